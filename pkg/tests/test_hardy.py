import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rotstokes.hardy import (
    DegenerateInputError,
    HardyGrid,
    TraceError,
    fit_hardy_constant,
    hardy_check,
    hardy_family,
    hardy_sweep,
)

# Independent oracle (mpmath, 30 digits): the radial integrals of each profile
# and a bracketing maximisation of (1 + r) |f|.
ORACLE = {
    "inverse_R10000": (0.799479256475071531824, 2.18979371985509553035, 1.51399861530585284482),
    "log1_scalar_R1000": (3.22367817409484970613, 3.83664773277034910684, 59.3570498639472727147),
    "tent_scalar_R100": (4.28688777886714856133, 1.65189367323798498014, 799.057233291718361568),
    "tent_swirl_R100": (4.28688777886714856133, 4.69242415752507631246, 799.057233291718361568),
}

FAMILY = {f.name: f for f in hardy_family()}


@pytest.mark.parametrize("name", sorted(ORACLE))
def test_norms_against_oracle(name):
    fld = FAMILY[name]
    rep = hardy_check(fld, fld.grid(), fld.grad)
    lhs, grad, linf1 = ORACLE[name]
    assert rep.lhs == pytest.approx(lhs, rel=1e-8)
    assert rep.grad == pytest.approx(grad, rel=1e-8)
    # the sup is sampled on quadrature nodes
    assert rep.linf1 == pytest.approx(linf1, rel=1e-4)
    assert rep.linf1 <= linf1 * (1 + 1e-12)


def test_ratio_uniformly_bounded_over_family():
    results = hardy_sweep()
    C = fit_hardy_constant([r for _, r in results])
    assert 0.3 < C < 1.0
    assert all(r.lhs <= C * r.bound * (1 + 1e-12) for _, r in results)


def test_tent_ratio_does_not_vanish():
    ratios = [hardy_check(FAMILY[f"tent_scalar_R{R:g}"], FAMILY[f"tent_scalar_R{R:g}"].grid(), FAMILY[f"tent_scalar_R{R:g}"].grad).ratio for R in (10, 100, 1000)]
    assert min(ratios) > 0.25


def test_inverse_profile_lhs_converges_in_r_max():
    vals = [hardy_check(FAMILY[f"inverse_R{R:g}"], FAMILY[f"inverse_R{R:g}"].grid(), FAMILY[f"inverse_R{R:g}"].grad).lhs for R in (100, 1000, 10000)]
    assert vals[0] < vals[1] < vals[2]
    assert vals[2] - vals[1] < 0.2 * (vals[1] - vals[0])


@pytest.mark.parametrize("name", ["log2_scalar_R1000", "tent_scalar_R10"])
@given(c=st.floats(1e-4, 1e3))
def test_norms_scale_linearly(name, c):
    fld = FAMILY[name]
    a = hardy_check(fld, fld.grid(), fld.grad)
    b = hardy_check(fld.scaled(c), fld.grid(), fld.scaled(c).grad)
    for attr in ("lhs", "grad", "linf1"):
        assert getattr(b, attr) == pytest.approx(c * getattr(a, attr), rel=1e-12)
    # the bound is not homogeneous, the ratio is
    assert b.ratio == pytest.approx(a.ratio, rel=1e-12)


@pytest.mark.parametrize("name", ["inverse_R100", "log1_swirl_R10000", "tent_swirl_R100"])
def test_finite_difference_gradient_agrees(name):
    fld = FAMILY[name]
    g = fld.grid(panels_per_decade=6, n_gl=8)
    a = hardy_check(fld, g, fld.grad)
    b = hardy_check(fld, g)
    assert b.grad == pytest.approx(a.grad, rel=1e-5)


def test_simplified_form_under_smallness():
    worst = 0.0
    for fld in hardy_family():
        r1 = hardy_check(fld, fld.grid(), fld.grad)
        small = fld.scaled(0.5 / (math.e * r1.grad + r1.linf1))
        r2 = hardy_check(small, small.grid(), small.grad)
        assert r2.small_hypothesis
        # log(e + L/g) <= 2 |log g| when e g + L <= 1
        assert math.log(math.e + r2.linf1 / r2.grad) <= 2 * abs(math.log(r2.grad))
        worst = max(worst, r2.lhs / r2.simplified_bound)
    assert worst < 2.0


def test_trace_condition():
    with pytest.raises(TraceError):
        hardy_check(lambda p: np.ones(len(p)), HardyGrid(10.0))


def test_degenerate_input():
    with pytest.raises(DegenerateInputError):
        hardy_check(lambda p: np.where(np.hypot(*p.T) > 1.5, 1.0, 0.0), HardyGrid(10.0), lambda p: np.zeros_like(p))
    rep = hardy_check(lambda p: np.zeros(len(p)), HardyGrid(10.0))
    assert rep.lhs == rep.grad == rep.bound == 0.0


@pytest.mark.parametrize("kw", [dict(r_max=1.0), dict(r_max=10.0, n_gl=1), dict(r_max=10.0, panels_per_decade=0)])
def test_grid_validation(kw):
    with pytest.raises(ValueError):
        HardyGrid(**kw)


@given(st.floats(1.5, 1e6))
def test_grid_area(r_max):
    r, w = HardyGrid(r_max, breakpoints=(2.0,)).radial()
    assert np.sum(w) == pytest.approx(0.5 * (r_max**2 - 1.0), rel=1e-12)
