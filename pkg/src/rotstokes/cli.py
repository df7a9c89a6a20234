"""Command-line runs with CSV tables and a JSON summary.

Each subcommand reads its parameters from the matching ``[section]`` of an
INI file (every key has a default), computes its sweep, evaluates its
assertions and writes

    <out>/<command>.json          summary, assertions, resolved parameters
    <out>/<command>.<table>.csv   one file per sweep table

Files are staged in the output directory and renamed only after every one
of them has been written, so an error never leaves partial output.  Output
is byte-identical for identical configuration and seed; wall-clock timings
are written only with ``--timings``.

Exit status: 0 all assertions passed, 1 an assertion failed (reports are
still written), 2 bad configuration, 3 numerical failure, 4 input outside a
module's preconditions, 5 file-system error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__

__all__ = ["main", "run", "RunConfig", "Report", "ConfigError", "COMMANDS", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_PRECONDITION = 4
EXIT_IO = 5


class ConfigError(ValueError):
    """Malformed or out-of-range configuration."""


@dataclass
class RunConfig:
    command: str
    params: dict
    out: Path
    seed: int = 0
    threads: int = 1
    tolerance_scale: float = 1.0
    timings: bool = False


@dataclass
class Report:
    summary: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)  # name -> (columns, rows)
    assertions: dict = field(default_factory=dict)  # name -> {value, threshold, passed}
    extra_files: dict = field(default_factory=dict)

    def check(self, name: str, value: float, threshold: float, *, upper: bool = True) -> None:
        passed = bool(value <= threshold) if upper else bool(value >= threshold)
        self.assertions[name] = {
            "value": value,
            "threshold": threshold,
            "relation": "<=" if upper else ">=",
            "passed": passed,
        }

    def flag(self, name: str, passed: bool, detail=None) -> None:
        self.assertions[name] = {"passed": bool(passed), "detail": detail}

    @property
    def passed(self) -> bool:
        return all(a["passed"] for a in self.assertions.values())


# -- parameter parsing -------------------------------------------------------


def _parse_value(raw: str, default, key: str):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = [s for s in (p.strip() for p in raw.split(",")) if s]
            kind = type(default[0]) if default else float
            return tuple(kind(s) for s in items)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from exc
    return raw


def load_params(command: str, config_path: str | None) -> dict:
    spec = COMMANDS[command]
    params = dict(spec.defaults)
    if config_path is None:
        return params
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(config_path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    unknown_sections = [s for s in parser.sections() if s not in COMMANDS]
    if unknown_sections:
        raise ConfigError(f"unknown sections: {', '.join(sorted(unknown_sections))}")
    if parser.has_section(command):
        for key, raw in parser.items(command):
            if key not in spec.defaults:
                raise ConfigError(f"[{command}] unknown key {key!r}")
            params[key] = _parse_value(raw, spec.defaults[key], key)
    return params


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


# -- serialisation -----------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def render_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise ValueError("row length does not match the header")
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else str(f)
    if v is None or isinstance(v, str):
        return v
    return str(v)


def render_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def write_outputs(out: Path, files: dict) -> None:
    """Stage every file, then rename them into place together."""
    out.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=out)
            staged.append((tmp, out / name))
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.chmod(tmp, 0o644)
        for tmp, final in staged:
            os.replace(tmp, final)
    finally:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)


def _parallel_map(fn: Callable, items, threads: int) -> list:
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# -- osc-verify ---------------------------------------------------------------


def _geometric_refine(values):
    v = sorted(values)
    out = list(v)
    for a, b in zip(v[:-1], v[1:]):
        out.append(math.sqrt(a * b))
    return sorted(out)


def _run_osc(cfg: RunConfig) -> Report:
    from .oscquad import (
        OscIntegralSpec,
        closed_form_static,
        lemma21_bound,
        osc_double_integral,
        osc_time_integral,
    )

    p = cfg.params
    _require(p["suite"] in ("static", "bound"), "suite must be 'static' or 'bound'")
    _require(all(m > 1 for m in p["m"]), "m values must exceed 1")
    _require(all(r > 0 for r in p["r"]), "r values must be positive")
    rep = Report()
    tol = p["quad_tol"]
    if p["suite"] == "static":

        def row(mr):
            m, r = mr
            s = osc_time_integral(OscIntegralSpec(m, r, 0.0, "single"), tol=tol).value.real
            d = osc_double_integral(OscIntegralSpec(m, r, 0.0, "double"), tol=tol).value.real
            ref = closed_form_static(m, r)
            return [m, r, s, d, ref, abs(s - ref) / ref, abs(d - ref) / ref]

        pairs = [(m, r) for m in p["m"] for r in p["r"]]
        rows = _parallel_map(row, pairs, cfg.threads)
        cols = ["m", "r", "single", "double", "closed_form", "rel_err_single", "rel_err_double"]
        rep.tables["static"] = (cols, rows)
        worst = max(max(x[5], x[6]) for x in rows)
        rep.summary["max_rel_error"] = worst
        rep.summary["rows"] = len(rows)
        rep.check("static_rel_error", worst, p["max_rel_error"] * cfg.tolerance_scale)
        return rep

    _require(all(a != 0 for a in p["alpha"]), "the bound sweep needs alpha != 0")

    def sweep(alphas, radii):
        pts = [(k, m, r, a) for k in ("single", "double") for m in p["m"] for r in radii for a in alphas]

        def row(q):
            k, m, r, a = q
            spec = OscIntegralSpec(m, r, a, k)
            res = (osc_time_integral if k == "single" else osc_double_integral)(spec, tol=tol)
            b = lemma21_bound(m, r, a)
            return [k, m, r, a, abs(res.value), b, abs(res.value) / b]

        return _parallel_map(row, pts, cfg.threads)

    base = sweep(p["alpha"], p["r"])
    fine = sweep(_geometric_refine(p["alpha"]), _geometric_refine(p["r"]))
    cols = ["kind", "m", "r", "alpha", "abs_integral", "bound", "ratio", "refined"]
    rows = [x + [False] for x in base] + [x + [True] for x in fine]
    rep.tables["bound"] = (cols, rows)
    fitted = {}
    worst_drift = 0.0
    for k in ("single", "double"):
        for m in p["m"]:
            c0 = max(x[6] for x in base if x[0] == k and x[1] == m)
            c1 = max(x[6] for x in fine if x[0] == k and x[1] == m)
            fitted[f"{k}_m{m:g}"] = {"C": c0, "C_refined": c1, "drift": abs(c1 / c0 - 1.0)}
            worst_drift = max(worst_drift, abs(c1 / c0 - 1.0))
    rep.summary["fitted"] = fitted
    rep.check("fitted_constant_drift", worst_drift, p["stability"] * cfg.tolerance_scale)
    return rep


# -- kernel-verify --------------------------------------------------------------


def _run_kernel(cfg: RunConfig) -> Report:
    from .kernel import (
        fundamental_solution,
        fundamental_solution_grad_y,
        gauss,
        heat_kernel,
        hessian_tail,
        lemma32_bound,
        leading_kernel_grad_y,
    )

    p = cfg.params
    _require(p["n_trace"] >= 1, "n_trace must be positive")
    _require(all(a > 0 for a in p["alpha"]), "alpha values must be positive")
    _require(all(s >= 2 for s in p["x_norms"]), "|x| values must be at least 2")
    _require(all(0 <= f < 0.5 for f in p["y_fractions"]), "y fractions must lie in [0, 1/2)")
    rng = np.random.default_rng(cfg.seed)
    rep = Report()

    # tr H + G = 0 at random (x, t)
    xs = rng.uniform(-5.0, 5.0, size=(p["n_trace"], 2))
    ts = np.exp(rng.uniform(math.log(1e-3), math.log(1e3), size=p["n_trace"]))
    worst_trace = 0.0
    for x, t in zip(xs, ts):
        H = hessian_tail(x, t)
        G = float(gauss(x, t))
        scale = max(abs(G), float(np.max(np.abs(H))))
        worst_trace = max(worst_trace, abs(np.trace(H) + G) / scale)
    rep.summary["trace_identity_max_rel"] = worst_trace
    rep.check("trace_identity", worst_trace, p["trace_tol"] * cfg.tolerance_scale)

    # column divergence of K by central differences, three step sizes
    x0 = np.array([0.7, -0.4])
    t0 = 0.3

    def fd_div(h):
        out = np.zeros(2)
        for j in range(2):
            for i in range(2):
                e = np.zeros(2)
                e[i] = h
                out[j] += (heat_kernel(x0 + e, t0).k[i, j] - heat_kernel(x0 - e, t0).k[i, j]) / (2 * h)
        return float(np.max(np.abs(out)))

    hs = [p["fd_step"] / 2**i for i in range(3)]
    errs = [fd_div(h) for h in hs]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    rep.summary["div_fd"] = {"steps": hs, "errors": errs, "orders": orders}
    rep.check("div_fd_order", min(orders), 1.8 / cfg.tolerance_scale, upper=False)

    # far-field kernel sweep with a finite-difference check of grad_y Gamma
    pts = []
    for a in p["alpha"]:
        for nx in p["x_norms"]:
            for frac in p["y_fractions"]:
                th1, th2 = rng.uniform(0.0, 2.0 * math.pi, size=2)
                x = nx * np.array([math.cos(th1), math.sin(th1)])
                y = frac * nx * np.array([math.cos(th2), math.sin(th2)])
                pts.append((a, x, y))
    h = p["grad_fd_step"]

    def row(q):
        a, x, y = q
        tol = p["quad_tol"]
        val = fundamental_solution(x, y, a, tol=tol)
        g, _ = fundamental_solution_grad_y(x, y, a, tol=tol)
        b0 = lemma32_bound(x, y, a, 0).total
        b1 = lemma32_bound(x, y, a, 1).total
        r0 = float(np.max(np.abs(val.remainder))) / b0
        r1 = float(np.max(np.abs(g - leading_kernel_grad_y(x)))) / b1
        fd = np.zeros((2, 2, 2))
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            gp = fundamental_solution(x, y + e, a, tol=tol).gamma
            gm = fundamental_solution(x, y - e, a, tol=tol).gamma
            fd[:, :, k] = (gp - gm) / (2 * h)
        fd_err = float(np.max(np.abs(fd - g)) / np.max(np.abs(g)))
        return [a, x[0], x[1], y[0], y[1], r0, r1, fd_err]

    rows = _parallel_map(row, pts, cfg.threads)
    cols = ["alpha", "x1", "x2", "y1", "y2", "ratio_m0", "ratio_m1", "grad_fd_rel_err"]
    rep.tables["lemma32"] = (cols, rows)
    c0 = max(x[5] for x in rows)
    c1 = max(x[6] for x in rows)
    fd_worst = max(x[7] for x in rows)
    rep.summary["fitted"] = {"C_m0": c0, "C_m1": c1}
    rep.check("lemma32_m0_bounded", c0, p["max_ratio"] * cfg.tolerance_scale)
    rep.check("lemma32_m1_bounded", c1, p["max_ratio"] * cfg.tolerance_scale)
    rep.check("grad_y_fd", fd_worst, p["grad_fd_tol"] * cfg.tolerance_scale)
    return rep


# -- whole-plane -----------------------------------------------------------------


def _run_whole_plane(cfg: RunConfig) -> Report:
    from .forcings import algebraic_tensor, bump_tensor, compact_suite
    from .wholeplane import (
        coefficient_c,
        coefficient_c_tilde,
        divergence_form_potential,
        pressure_potential,
        stokes_residual,
        volume_potential,
    )

    p = cfg.params
    a = p["alpha"]
    _require(a != 0, "alpha must be nonzero")
    _require(all(h > 0 for h in p["fd_steps"]) and len(p["fd_steps"]) >= 2, "need two or more positive fd steps")
    rep = Report()
    rows = []
    for i, F in enumerate(compact_suite()):
        c = coefficient_c(F.as_compact_forcing())
        ct = coefficient_c_tilde(F)
        rows.append([i, F.radius, c, ct, abs(c - ct)])
    rep.tables["coefficients"] = (["tensor", "support_radius", "c", "c_tilde", "abs_diff"], rows)
    worst = max(x[4] for x in rows)
    rep.check("c_equals_c_tilde", worst, p["coefficient_tol"] * cfg.tolerance_scale)

    if p["residual"]:
        f = bump_tensor(1.0, ((0.3, 1.0), (-0.4, 0.2)), 2.0, ((0.1, 0.2), (0.0, 0.3))).as_compact_forcing()
        pot = volume_potential(f, a, radii=(), tol=1e-12)
        pres = pressure_potential(f)
        rrows = []
        min_order = math.inf
        for label, x in (("inside", (1.2, 0.5)), ("outside", (2.6, 1.1))):
            errs = []
            for h in sorted(p["fd_steps"], reverse=True):
                mom, div = stokes_residual(pot.u, pres, a, np.array(x), h, f.f)
                errs.append(max(float(np.max(np.abs(mom))), abs(div)))
                order = math.log2(errs[-2] / errs[-1]) if len(errs) > 1 else float("nan")
                if len(errs) > 1:
                    min_order = min(min_order, order / math.log2(prev_h / h))
                rrows.append([label, x[0], x[1], h, errs[-1], order])
                prev_h = h
        rep.tables["residual"] = (["point", "x1", "x2", "h", "residual", "log2_ratio"], rrows)
        rep.check("residual_order", min_order, 1.8 / cfg.tolerance_scale, upper=False)

    if p["decay"]:
        F = algebraic_tensor(
            p["eps"], quad_radius=p["quad_radius"], n_r=p["n_r"], n_theta=p["n_theta"], panel_width=p["panel_width"]
        )
        R = p["base_radius"]
        radii = tuple(R * 2**j for j in (2, 3, 4))
        res = divergence_form_potential(F, a, radii=radii, n_dir=p["n_dir"], tol=1e-8, base_radius=R)
        drows = [[rad, val] for rad, val in sorted(res.remainder_report.items())]
        rep.tables["decay"] = (["radius", "sup_abs_x_remainder"], drows)
        vals = [v for _, v in drows]
        rep.flag("remainder_decreasing", all(b < a for a, b in zip(vals[:-1], vals[1:])), vals)
        rep.summary["decay_bound_terms"] = res.bound_terms
    return rep


# -- exterior-linear -------------------------------------------------------------------


def _grid_from(p):
    from .exterior import SpectralGrid

    return SpectralGrid(n_theta=p["n_theta"], n_r=p["n_r"], r_max=p["r_max"], R0=p["R0"])


def _forcing_from(p, alpha):
    from .fields import CutoffProfile
    from .forcings import algebraic_tensor, bump_tensor, gaussian_tensor
    from .nssolver import CircularFields
    from .wholeplane import TensorForcing

    kind = p["forcing"]
    if kind == "zero":
        return None
    if kind == "gaussian":
        return gaussian_tensor(p["eps"])
    if kind == "bump":
        return bump_tensor(p["eps"], radius=4.0)
    if kind == "algebraic":
        return algebraic_tensor(p["eps"])
    if kind == "vortex-lift":
        fields = CircularFields(CutoffProfile(p["R0"]))
        return TensorForcing(
            lambda x: alpha * fields.grad_U(x),
            support_radius=2.0 * p["R0"],
            div=lambda x: alpha * fields.lap_U(x),
        )
    raise ConfigError(f"unknown forcing {kind!r}")


def _run_exterior(cfg: RunConfig) -> Report:
    from .exterior import remainder_decay_report, solution_grid_data, solve_exterior_linear
    from .gridio import write_grid_file

    p = cfg.params
    a = p["alpha"]
    _require(p["forcing"] in ("zero", "gaussian", "bump", "algebraic", "vortex-lift"), "unknown forcing")
    _require(a != 0 or p["forcing"] == "zero", "alpha = 0 needs zero forcing")
    grid = _grid_from(p)
    F = _forcing_from(p, a)
    rep = Report()
    sol = solve_exterior_linear(a, F, grid, gamma=p["gamma"])
    w = sol.quadrature_weights()
    uniq = np.zeros(w.shape[0], dtype=bool)
    uniq[sol._rad.unique()] = True
    if F is not None:
        Fs = np.asarray(F.F(sol.grid_points().reshape(-1, 2)), dtype=float).reshape(sol.u.shape + (2,))
        F_l2 = float(math.sqrt(np.sum(w * np.sum(Fs**2, axis=(2, 3)))))
    else:
        F_l2 = 0.0
    grad_l2 = sol.norms.l2_grad
    rep.summary.update(
        beta=sol.beta,
        b_omega=sol.b_omega,
        torque=sol.torque,
        grad_l2=grad_l2,
        F_l2=F_l2,
        linf=dict(sol.norms.linf_s),
        grid=grid.describe(),
        diagnostics=sol.diagnostics,
    )
    if p["forcing"] == "zero":
        rep.check("zero_forcing_zero_velocity", float(np.max(np.abs(sol.u))), 1e-14 * cfg.tolerance_scale)
    if p["forcing"] == "vortex-lift":
        rep.check("beta_vortex", abs(sol.beta - 4 * math.pi * a) / abs(4 * math.pi * a), 1e-8 * cfg.tolerance_scale)
    rep.check("energy_estimate", grad_l2, F_l2 * (1.0 + p["energy_slack"] * cfg.tolerance_scale))

    if p["refine"]:
        from .exterior import SpectralGrid

        fine = SpectralGrid(n_theta=2 * p["n_theta"], n_r=2 * p["n_r"], r_max=p["r_max"], R0=p["R0"])
        sol2 = solve_exterior_linear(a, F, fine, gamma=p["gamma"])
        rep.summary["beta_refined"] = sol2.beta
        rep.check("beta_grid_doubling", abs(sol2.beta - sol.beta), p["beta_tol"] * cfg.tolerance_scale)

    decay = remainder_decay_report(sol, p["gamma"])
    rows = [[rad, val] for rad, val in sorted(decay["radii"].items())]
    rep.tables["decay"] = (["radius", "sup_weighted_remainder"], rows)
    rep.summary["decay_reference"] = decay["reference"]
    rep.summary["decay_fitted_constant"] = decay["fitted_constant"]
    if p["grid_file"]:
        gd = solution_grid_data(sol)
        with tempfile.TemporaryDirectory() as td:
            path = Path(td) / "g.grid"
            write_grid_file(path, gd)
            rep.extra_files = {f"{cfg.command}.grid": path.read_text(encoding="utf-8")}
    return rep


# -- ns-solve ------------------------------------------------------------------------


def _run_ns(cfg: RunConfig) -> Report:
    from .nssolver import (
        NSProblem,
        fixed_point_map,
        mollified_forcing,
        picard_solve,
        random_ball_iterate,
        threshold_triple,
        forcing_norms,
        x0_distance,
    )

    p = cfg.params
    a = p["alpha"]
    _require(p["forcing"] in ("zero", "gaussian", "bump", "algebraic"), "unknown forcing")
    _require(p["mollify"] >= 0, "mollify must be >= 0")
    _require(0.0 <= p["gamma"] < 1.0, "gamma must lie in [0, 1)")
    grid = _grid_from(p)
    F = _forcing_from(p, a)
    gamma = p["gamma"]
    if F is not None and p["mollify"] > 0:
        F = mollified_forcing(F, p["mollify"], gamma=max(gamma, 0.5))
    rep = Report()
    res = picard_solve(
        a,
        F,
        grid,
        tol=p["tol"],
        max_iter=p["max_iter"],
        gamma=gamma,
        C0=p["C0"],
        epsilon=p["epsilon"],
        residual_tol=p["residual_tol"] * cfg.tolerance_scale,
    )
    s = res.summary()
    rows = [[i + 1, d, (res.ratios[i - 1] if i > 0 else float("nan"))] for i, d in enumerate(res.distances)]
    rep.tables["iterations"] = (["iteration", "x0_step", "ratio"], rows)
    rep.summary.update(s)
    rep.summary["grid"] = grid.describe()
    if res.thresholds is not None:
        t = res.thresholds
        rep.summary["thresholds"] = {"delta1": t.delta1, "delta2": t.delta2, "delta3": t.delta3, "flags": t.flags}
        rep.summary["membership"] = res.membership
        rep.summary["smallness"] = res.smallness
    rep.check("iterations", res.iterations, p["max_iter"])
    rep.check("final_step", res.distances[-1], p["tol"] * cfg.tolerance_scale)
    rep.check("strong_residual", res.residual["relative"], p["residual_tol"] * cfg.tolerance_scale)
    if gamma > 0:
        rep.check("energy_identity", res.energy["relative_residual"], p["energy_tol"] * cfg.tolerance_scale)
    else:
        rep.flag("energy_inequality", res.energy["inequality_holds"])
    if p["forcing"] == "zero":
        sol = res.solution
        prob = sol.problem
        target = 4.0 * math.pi * a
        rep.summary["expected_beta"] = target
        pts = prob.pts
        r2 = np.sum(pts**2, axis=-1)
        exact = a * np.stack([-pts[..., 1], pts[..., 0]], axis=-1) / r2[..., None]
        err = float(np.max(np.sqrt(r2) * np.hypot(*(sol.velocity() - exact).transpose(2, 0, 1))))
        rep.summary["vortex_weighted_error"] = err
        rep.check("beta_vortex", abs(sol.beta - target) / abs(target), p["vortex_tol"] * cfg.tolerance_scale)
        rep.check("vortex_profile", err, p["vortex_tol"] * cfg.tolerance_scale)

    if p["contraction_pairs"] > 0:
        prob = res.solution.problem
        t = res.thresholds or threshold_triple(a, forcing_norms(prob), p["C0"])
        rng = np.random.default_rng(cfg.seed)
        crow = []
        for i in range(p["contraction_pairs"]):
            while True:
                w1 = random_ball_iterate(prob, rng, p["ball_radius"] * t.delta1)
                w2 = random_ball_iterate(prob, rng, p["ball_radius"] * t.delta1)
                if all(t.contains(w1).values()) and all(t.contains(w2).values()):
                    break
            d0 = x0_distance(w1, w2)
            d1 = x0_distance(fixed_point_map(w1, prob), fixed_point_map(w2, prob))
            crow.append([i, w1.x0_norm(), w2.x0_norm(), d0, d1, d1 / d0])
        rep.tables["contraction"] = (["pair", "x0_norm_1", "x0_norm_2", "distance", "mapped_distance", "ratio"], crow)
        worst = max(x[5] for x in crow)
        rep.summary["contraction_max_ratio"] = worst
        rep.check("contraction", worst, p["contraction_bound"] * cfg.tolerance_scale)
    return rep


# -- hardy ------------------------------------------------------------------------


def _run_hardy(cfg: RunConfig) -> Report:
    from .hardy import fit_hardy_constant, hardy_check, hardy_family

    p = cfg.params
    _require(p["panels_per_decade"] >= 1 and p["n_gl"] >= 2 and p["n_theta"] >= 4, "grid too coarse")
    _require(0 < p["small_target"] <= 1, "small_target must lie in (0, 1]")
    kw = dict(panels_per_decade=p["panels_per_decade"], n_gl=p["n_gl"], n_theta=p["n_theta"])
    fam = hardy_family()

    def row(fld):
        r1 = hardy_check(fld, fld.grid(**kw), fld.grad)
        # rescale so that e * grad + linf1 = small_target
        c = p["small_target"] / (math.e * r1.grad + r1.linf1)
        small = fld.scaled(c)
        r2 = hardy_check(small, small.grid(**kw), small.grad)
        return r1, c, r2

    results = _parallel_map(row, fam, cfg.threads)
    cols = ["field", "scale", "r_max", "lhs", "grad", "linf1", "bound", "ratio", "simplified_bound", "small_hypothesis"]
    rows = []
    for fld, (r1, c, r2) in zip(fam, results):
        for sc, r in ((1.0, r1), (c, r2)):
            rows.append([fld.name, sc, r.r_max, r.lhs, r.grad, r.linf1, r.bound, r.ratio, r.simplified_bound, r.small_hypothesis])
    rep = Report()
    rep.tables["family"] = (cols, rows)
    C = fit_hardy_constant([r1 for r1, _, _ in results])
    rep.summary["fitted_C"] = C
    rep.check("ratio_bounded", C, p["max_ratio"] * cfg.tolerance_scale)
    # under the smallness hypothesis, log(e + linf1/grad) <= 2 |log grad|
    worst = max(r2.lhs / (C * r2.simplified_bound) for _, _, r2 in results if r2.small_hypothesis)
    rep.summary["simplified_worst"] = worst
    rep.flag("small_hypothesis_met", all(r2.small_hypothesis for _, _, r2 in results))
    rep.check("simplified_form", worst, 2.0)
    return rep


@dataclass(frozen=True)
class CommandSpec:
    runner: Callable
    defaults: dict
    help: str


COMMANDS: dict = {
    "osc-verify": CommandSpec(
        _run_osc,
        {
            "suite": "static",
            "m": (1.5, 2.0, 3.0),
            "r": (0.5, 1.0, 2.0),
            "alpha": (0.01, 0.1, 1.0, 10.0),
            "quad_tol": 1e-12,
            "max_rel_error": 1e-10,
            "stability": 0.10,
        },
        "oscillatory time integrals: closed forms at alpha = 0 or the bound sweep",
    ),
    "kernel-verify": CommandSpec(
        _run_kernel,
        {
            "n_trace": 1000,
            "alpha": (0.01, 0.1, 1.0),
            "x_norms": (2.0, 5.0, 10.0, 20.0, 50.0, 100.0),
            "y_fractions": (0.0, 0.25, 0.45),
            "quad_tol": 1e-12,
            "trace_tol": 1e-12,
            "fd_step": 1e-2,
            "grad_fd_step": 1e-4,
            "grad_fd_tol": 1e-6,
            "max_ratio": 100.0,
        },
        "heat-kernel algebra and the pointwise kernel estimates",
    ),
    "whole-plane": CommandSpec(
        _run_whole_plane,
        {
            "alpha": 0.1,
            "coefficient_tol": 1e-8,
            "residual": True,
            "fd_steps": (0.2, 0.1, 0.05),
            "decay": True,
            "eps": 1.0,
            "base_radius": 2.0,
            "quad_radius": 100.0,
            "panel_width": 4.0,
            "n_r": 8,
            "n_theta": 32,
            "n_dir": 4,
        },
        "whole-plane coefficients and remainder decay",
    ),
    "exterior-linear": CommandSpec(
        _run_exterior,
        {
            "alpha": 0.1,
            "forcing": "gaussian",
            "eps": 1.0,
            "gamma": 0.5,
            "n_theta": 32,
            "n_r": 48,
            "r_max": 1e4,
            "R0": 1.0,
            "energy_slack": 0.05,
            "refine": True,
            "beta_tol": 1e-8,
            "grid_file": False,
        },
        "exterior linear solve with coefficient, energy and decay checks",
    ),
    "ns-solve": CommandSpec(
        _run_ns,
        {
            "alpha": 0.05,
            "forcing": "zero",
            "eps": 0.01,
            "gamma": 0.5,
            "mollify": 0.0,
            "n_theta": 32,
            "n_r": 48,
            "r_max": 1e4,
            "R0": 1.0,
            "tol": 1e-10,
            "max_iter": 30,
            "residual_tol": 1e-4,
            "energy_tol": 1e-6,
            "vortex_tol": 1e-6,
            "C0": 1.0,
            "epsilon": 1.0,
            "contraction_pairs": 0,
            "ball_radius": 1.0,
            "contraction_bound": 0.8,
        },
        "Picard iteration for the nonlinear problem",
    ),
    "hardy": CommandSpec(
        _run_hardy,
        {
            "panels_per_decade": 12,
            "n_gl": 16,
            "n_theta": 16,
            "max_ratio": 1.0,
            "small_target": 0.5,
        },
        "log-corrected Hardy inequality over the fixed test family",
    ),
}


def _failure_class(exc: BaseException) -> int:
    from .exterior import ClosureError, ConditioningError
    from .nssolver import AccuracyError, NonConvergenceError, OutOfRegimeError
    from .quadrature import QuadratureBudgetError
    from .wholeplane import ConvergenceError

    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (ConvergenceError, NonConvergenceError, AccuracyError, ConditioningError, ClosureError, QuadratureBudgetError)):
        return EXIT_NUMERICAL
    if isinstance(exc, (OutOfRegimeError, ValueError)):
        return EXIT_PRECONDITION
    if isinstance(exc, OSError):
        return EXIT_IO
    raise exc


def run(cfg: RunConfig) -> int:
    """Execute one command and write its reports; returns the exit status."""
    spec = COMMANDS[cfg.command]
    t0 = time.perf_counter()
    report = spec.runner(cfg)
    elapsed = time.perf_counter() - t0
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": cfg.command,
        "package_version": __version__,
        "seed": cfg.seed,
        "tolerance_scale": cfg.tolerance_scale,
        "parameters": cfg.params,
        "summary": report.summary,
        "assertions": report.assertions,
        "passed": report.passed,
        "tables": {name: f"{cfg.command}.{name}.csv" for name in sorted(report.tables)},
    }
    if cfg.timings:
        doc["runtime_seconds"] = elapsed
    files = {f"{cfg.command}.json": render_json(doc)}
    for name, (cols, rows) in report.tables.items():
        files[f"{cfg.command}.{name}.csv"] = render_csv(cols, rows)
    files.update(report.extra_files)
    write_outputs(cfg.out, files)
    return EXIT_OK if report.passed else EXIT_ASSERTION


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rotstokes", description="Verification runs for flow past a rotating disk.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, spec in COMMANDS.items():
        sp = sub.add_parser(name, help=spec.help)
        sp.add_argument("--config", help="INI file; the [%s] section is read" % name)
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--seed", type=int, default=0, help="seed for randomized sweeps")
        sp.add_argument("--threads", type=int, default=1, help="worker threads for sweep rows")
        sp.add_argument("--tolerance-scale", type=float, default=1.0, help="multiplier applied to every threshold")
        sp.add_argument("--timings", action="store_true", help="record wall-clock time in the JSON summary")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.seed < 0 or args.seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if args.threads < 1:
            raise ConfigError("threads must be >= 1")
        if not (args.tolerance_scale > 0 and math.isfinite(args.tolerance_scale)):
            raise ConfigError("tolerance scale must be positive")
        params = load_params(args.command, args.config)
        cfg = RunConfig(
            args.command, params, Path(args.out), args.seed, args.threads, args.tolerance_scale, args.timings
        )
        return run(cfg)
    except Exception as exc:  # noqa: BLE001 - mapped to an exit class below
        code = _failure_class(exc)
        print(f"rotstokes {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
