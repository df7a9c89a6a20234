"""Self-describing plain-text grid files.

Layout::

    # rotstokes-grid 1
    coords = cartesian            (or polar: axis 0 is r, axis 1 is theta)
    bounds = a0 b0 a1 b1
    resolution = n0 n1
    components = f1 f2
    nodes0 = ...                  (optional explicit axis-0 nodes)
    nodes1 = ...                  (optional explicit axis-1 nodes)
    [metadata]
    key = value
    [data]
    one line per node, axis 1 fastest, components separated by spaces

Without explicit nodes an axis is ``linspace(a, b, n)`` including both ends.
Floats are written with 17 significant digits so a round trip is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["GridData", "GridFormatError", "read_grid_file", "write_grid_file", "format_float"]

MAGIC = "# rotstokes-grid 1"


class GridFormatError(ValueError):
    pass


def format_float(v: float) -> str:
    return f"{float(v):.17g}"


@dataclass
class GridData:
    coords: str
    bounds: tuple
    resolution: tuple
    components: tuple
    values: np.ndarray
    metadata: dict = field(default_factory=dict)
    nodes0: np.ndarray | None = None
    nodes1: np.ndarray | None = None

    def __post_init__(self):
        if self.coords not in ("cartesian", "polar"):
            raise GridFormatError(f"unknown coordinate system {self.coords!r}")
        n0, n1 = (int(n) for n in self.resolution)
        if n0 < 2 or n1 < 1:
            raise GridFormatError("resolution must be at least 2 x 1")
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (n0, n1, len(self.components)):
            raise GridFormatError(f"values shape {self.values.shape} does not match header")
        for k, n in (("nodes0", n0), ("nodes1", n1)):
            v = getattr(self, k)
            if v is not None:
                v = np.asarray(v, dtype=float)
                if v.shape != (n,) or np.any(np.diff(v) <= 0):
                    raise GridFormatError(f"{k} must be {n} strictly increasing values")
                setattr(self, k, v)

    def axis(self, i: int) -> np.ndarray:
        explicit = self.nodes0 if i == 0 else self.nodes1
        if explicit is not None:
            return explicit
        a, b = self.bounds[2 * i], self.bounds[2 * i + 1]
        return np.linspace(a, b, int(self.resolution[i]))

    def points(self) -> np.ndarray:
        """Cartesian coordinates of every node, shape ``(n0, n1, 2)``."""
        a0, a1 = np.meshgrid(self.axis(0), self.axis(1), indexing="ij")
        if self.coords == "cartesian":
            return np.stack([a0, a1], axis=-1)
        return np.stack([a0 * np.cos(a1), a0 * np.sin(a1)], axis=-1)


def write_grid_file(path, grid: GridData) -> None:
    lines = [
        MAGIC,
        f"coords = {grid.coords}",
        "bounds = " + " ".join(format_float(b) for b in grid.bounds),
        f"resolution = {int(grid.resolution[0])} {int(grid.resolution[1])}",
        "components = " + " ".join(grid.components),
    ]
    if grid.nodes0 is not None:
        lines.append("nodes0 = " + " ".join(format_float(v) for v in grid.nodes0))
    if grid.nodes1 is not None:
        lines.append("nodes1 = " + " ".join(format_float(v) for v in grid.nodes1))
    lines.append("[metadata]")
    for key in sorted(grid.metadata):
        val = grid.metadata[key]
        val = format_float(val) if isinstance(val, float) else str(val)
        if "\n" in val:
            raise GridFormatError("metadata values must be single-line")
        lines.append(f"{key} = {val}")
    lines.append("[data]")
    flat = grid.values.reshape(-1, grid.values.shape[-1])
    lines.extend(" ".join(format_float(v) for v in row) for row in flat)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_grid_file(path) -> GridData:
    with open(path, encoding="utf-8") as fh:
        text = fh.read().splitlines()
    if not text or text[0].strip() != MAGIC:
        raise GridFormatError("missing grid file header line")
    header: dict = {}
    metadata: dict = {}
    section = "header"
    data_rows = []
    for lineno, raw in enumerate(text[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        if line == "[metadata]":
            section = "metadata"
            continue
        if line == "[data]":
            section = "data"
            continue
        if section == "data":
            try:
                data_rows.append([float(v) for v in line.split()])
            except ValueError as exc:
                raise GridFormatError(f"line {lineno}: bad number") from exc
            continue
        if "=" not in line:
            raise GridFormatError(f"line {lineno}: expected 'key = value'")
        key, val = (p.strip() for p in line.split("=", 1))
        (header if section == "header" else metadata)[key] = val
    for key in ("coords", "bounds", "resolution", "components"):
        if key not in header:
            raise GridFormatError(f"header is missing {key!r}")
    try:
        bounds = tuple(float(v) for v in header["bounds"].split())
        res = tuple(int(v) for v in header["resolution"].split())
    except ValueError as exc:
        raise GridFormatError("bounds/resolution are not numeric") from exc
    if len(bounds) != 4 or len(res) != 2:
        raise GridFormatError("bounds needs 4 numbers and resolution 2")
    comps = tuple(header["components"].split())
    arr = np.asarray(data_rows, dtype=float)
    if arr.shape != (res[0] * res[1], len(comps)):
        raise GridFormatError(f"expected {res[0] * res[1]} rows of {len(comps)} values, got {arr.shape}")
    nodes = [None, None]
    for i in (0, 1):
        if f"nodes{i}" in header:
            nodes[i] = np.array([float(v) for v in header[f"nodes{i}"].split()])
    return GridData(
        coords=header["coords"],
        bounds=bounds,
        resolution=res,
        components=comps,
        values=arr.reshape(res[0], res[1], len(comps)),
        metadata=metadata,
        nodes0=nodes[0],
        nodes1=nodes[1],
    )
