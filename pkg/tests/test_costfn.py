"""Cost-function families and the tangent-envelope linearization."""
import math

import numpy as np
import pytest

from eosdesign import CostFunction, cost_function, default_capacity_range, linearize
from eosdesign.costfn import (frac_next_breakpoint, frac_next_tangent,
                              numeric_next_breakpoint, numeric_next_tangent,
                              sqrt_next_breakpoint, sqrt_next_tangent)

FAMILIES = ("linear", "square_root", "fractional")


def test_value_known_points():
    assert cost_function("square_root").value(4.0) == 2.0
    assert cost_function("fractional").value(0.0) == 0.0
    assert cost_function("linear").value(318.0) == 318.0


def test_derivative_known_points():
    assert cost_function("square_root").derivative(4.0) == 0.25
    assert cost_function("fractional").derivative(1.0) == 0.25
    assert cost_function("linear").derivative(7.0) == 1.0


@pytest.mark.parametrize("family", FAMILIES)
def test_derivative_matches_central_difference(family):
    # independent finite-difference oracle at mu = 7
    fn = cost_function(family)
    h = 1e-6
    fd = (fn.value(7.0 + h) - fn.value(7.0 - h)) / (2.0 * h)
    assert fn.derivative(7.0) == pytest.approx(fd, rel=1e-6)


def test_value_rejects_negative_capacity():
    with pytest.raises(ValueError):
        cost_function("linear").value(-1.0)


def test_sqrt_derivative_rejects_zero():
    with pytest.raises(ValueError):
        cost_function("square_root").derivative(0.0)


def test_custom_requires_positive_derivative():
    with pytest.raises(ValueError):
        CostFunction("custom", value_fn=np.cos, deriv_fn=lambda m: -np.sin(m))
    with pytest.raises(ValueError):
        CostFunction("custom", value_fn=np.log1p)  # missing derivative


def test_unknown_family_rejected():
    with pytest.raises(ValueError):
        cost_function("cubic")


# ---------------------------------------------------------------------------
# linearization
# ---------------------------------------------------------------------------

# closed-form stepping from b0 = 1 at eps = 0.01, computed independently:
#   mu1 = ((1+eps)*sqrt(b0) + sqrt((eps^2+2eps)*b0))^2
#   b1  = ((1+eps)*sqrt(mu1) + sqrt((eps^2+2eps)*mu1))^2
SQRT_MU1 = 1.326584426950908
SQRT_B1 = 1.759826241828669


def test_sqrt_closed_form_first_step():
    eps = 0.01
    mu1 = sqrt_next_tangent(1.0, eps)
    b1 = sqrt_next_breakpoint(mu1, eps)
    assert mu1 == pytest.approx(SQRT_MU1, abs=1e-12)
    assert b1 == pytest.approx(SQRT_B1, abs=1e-12)
    # both fixed-point equations of the stepping scheme hold
    fn = cost_function("square_root")
    lhs2 = (1 + eps) * fn.value(1.0)
    rhs2 = fn.value(mu1) + fn.derivative(mu1) * (1.0 - mu1)
    assert abs(lhs2 - rhs2) < 1e-10
    lhs3 = (1 + eps) * fn.value(b1)
    rhs3 = fn.value(mu1) + fn.derivative(mu1) * (b1 - mu1)
    assert abs(lhs3 - rhs3) < 1e-10


def test_fractional_closed_form_satisfies_equations():
    fn = cost_function("fractional")
    eps = 0.01
    b = 1.0
    for _ in range(6):
        mu = frac_next_tangent(b, eps)
        assert mu is not None and mu > b
        assert (1 + eps) * fn.value(b) == pytest.approx(
            fn.value(mu) + fn.derivative(mu) * (b - mu), abs=1e-10)
        nb = frac_next_breakpoint(mu, eps)
        assert nb > mu
        assert (1 + eps) * fn.value(nb) == pytest.approx(
            fn.value(mu) + fn.derivative(mu) * (nb - mu), abs=1e-10)
        b = nb


def test_fractional_tangent_unreachable_past_threshold():
    # tangent values at b are bounded by sup g = 1, so no root once eps*b >= 1
    assert frac_next_tangent(100.0, 0.01) is None
    assert frac_next_tangent(99.0, 0.01) is not None
    assert numeric_next_tangent(cost_function("fractional"), 150.0, 0.01) is None


@pytest.mark.parametrize("family", ["square_root", "fractional"])
def test_closed_form_matches_numeric_rootfind(family):
    fn = cost_function(family)
    eps = 0.01
    closed = linearize(fn, eps, 1.0, 1e4, method="closed")
    numeric = linearize(fn, eps, 1.0, 1e4, method="numeric")
    assert closed.n_pieces == numeric.n_pieces
    np.testing.assert_allclose(closed.tangent_points, numeric.tangent_points, rtol=1e-8)
    np.testing.assert_allclose(closed.breakpoints, numeric.breakpoints, rtol=1e-8)


def test_linear_family_is_one_exact_piece():
    lin = linearize(cost_function("linear"), 0.5, 1.0, 1e3)
    assert lin.n_pieces == 1
    assert lin.slopes[0] == 1.0 and lin.intercepts[0] == 0.0
    mus = np.linspace(1.0, 1e3, 101)
    np.testing.assert_array_equal(lin.envelope(mus), mus)


def test_error_bound_on_dense_sample():
    rng = np.random.default_rng(7)
    mus = rng.uniform(1.0, 1e4, 100_000)
    for family in ("square_root", "fractional"):
        fn = cost_function(family)
        lin = linearize(fn, 0.01, 1.0, 1e4)
        rel = (lin.envelope(mus) - fn.value(mus)) / fn.value(mus)
        assert rel.min() >= -1e-12
        assert rel.max() <= 0.01 + 1e-12


def test_envelope_overestimates_and_touches_tangent_points():
    for family in ("square_root", "fractional"):
        fn = cost_function(family)
        lin = linearize(fn, 0.05, 1.0, 500.0)
        mus = np.linspace(1.0, 500.0, 2001)
        assert (lin.envelope(mus) >= fn.value(mus) - 1e-12).all()
        at_tangents = lin.envelope(lin.tangent_points.copy())
        np.testing.assert_allclose(at_tangents, fn.value(lin.tangent_points),
                                   rtol=1e-12)


def test_envelope_equals_min_over_all_pieces():
    fn = cost_function("fractional")
    lin = linearize(fn, 0.01, 1.0, 1e4)
    rng = np.random.default_rng(3)
    mus = rng.uniform(0.5, 2e4, 5000)  # beyond range too
    explicit = (lin.slopes[None, :] * mus[:, None] + lin.intercepts[None, :]).min(axis=1)
    np.testing.assert_allclose(lin.envelope(mus), explicit, rtol=1e-13)


def test_piece_ordering_invariants():
    for family in ("square_root", "fractional"):
        lin = linearize(cost_function(family), 0.01, 1.0, 1e4)
        # b0 < mu_1 < b_1 < mu_2 < ...
        merged = np.empty(2 * lin.n_pieces + 1)
        merged[0::2] = lin.breakpoints
        merged[1::2] = lin.tangent_points
        assert (np.diff(merged) > 0).all()
        assert (np.diff(lin.slopes) < 0).all()
        assert (np.diff(lin.intercepts) > 0).all()
        assert lin.breakpoints[0] == 1.0
        assert lin.breakpoints[-1] > 1e4


def test_huge_epsilon_gives_single_piece():
    lin = linearize(cost_function("square_root"), 50.0, 1.0, 100.0)
    assert lin.n_pieces == 1


def test_custom_family_numeric_path():
    fn = CostFunction("custom", value_fn=np.log1p,
                      deriv_fn=lambda m: 1.0 / (1.0 + m))
    lin = linearize(fn, 0.02, 1.0, 200.0)
    rng = np.random.default_rng(11)
    mus = rng.uniform(1.0, 200.0, 20_000)
    rel = (lin.envelope(mus) - fn.value(mus)) / fn.value(mus)
    assert rel.min() >= -1e-12 and rel.max() <= 0.02 + 1e-10


def test_linearize_input_validation():
    fn = cost_function("square_root")
    with pytest.raises(ValueError):
        linearize(fn, 0.0, 1.0, 10.0)
    with pytest.raises(ValueError):
        linearize(fn, 0.01, 5.0, 5.0)
    with pytest.raises(ValueError):
        linearize(fn, 0.01, -1.0, 5.0)
    with pytest.raises(ValueError):
        linearize(fn, 0.01, 1.0, 10.0, method="fancy")
    # linear family is exact with one piece no matter the method
    assert linearize(cost_function("linear"), 0.01, 1.0, 10.0, method="closed").n_pieces == 1


def test_default_capacity_range():
    fn = cost_function("square_root")
    lo, hi = default_capacity_range(fn, 100.0, 300.0, 10.0)
    assert 0 < lo < hi
    assert hi > 100.0  # always beyond total demand
    with pytest.raises(ValueError):
        default_capacity_range(fn, 0.0, 300.0, 10.0)


def test_dump_rows_shape():
    lin = linearize(cost_function("square_root"), 0.1, 1.0, 50.0)
    rows = list(lin.rows())
    assert len(rows) == lin.n_pieces
    k, mu, b, slope, intercept = rows[0]
    assert k == 0 and b > mu > 1.0 and slope > 0
