import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aimdalloc import (CostFunction, ConfigError, DimensionError, MonomialTerm, CameraCostRanges,
                       check_membership, finite_diff_gradient, camera_cost, sample_paper_cost)
from aimdalloc.cost_model import CAMERA_BRANCH_TAGS, StackedCosts, membership_grid


def test_evaluate_single_term(quad):
    assert quad(10).evaluate([2.0]) == 40.0


def test_evaluate_branch2():
    f = camera_cost(2, 10, 25, 22, 3)
    # 10 + 25 + 25/2 + (3/2)*22
    assert f.evaluate([1.0, 1.0, 1.0]) == pytest.approx(80.5, abs=1e-12)


def test_evaluate_zero_is_zero(rng):
    for _ in range(20):
        f = sample_paper_cost(rng)
        assert f.evaluate(np.zeros(3)) == 0.0


def test_evaluate_dimension_mismatch(quad):
    with pytest.raises(DimensionError) as info:
        quad(1).evaluate([1.0, 2.0])
    assert info.value.expected == 1 and info.value.actual == 2


def test_evaluate_batch_matches_pointwise(rng):
    f = sample_paper_cost(rng)
    pts = rng.random((7, 3))
    np.testing.assert_allclose(f.evaluate(pts), [f.evaluate(p) for p in pts], rtol=1e-14)


def test_gradient_single_term(quad):
    np.testing.assert_array_equal(quad(10).gradient([3.0]), [60.0])


def test_gradient_branch2():
    f = camera_cost(2, 10, 25, 22, 3)
    g = f.gradient([1.0, 1.0, 1.0])
    np.testing.assert_allclose(g, [20.0, 100.0, 132.0], rtol=1e-14)
    np.testing.assert_allclose(finite_diff_gradient(f, [1.0, 1.0, 1.0], 1e-6), g, rtol=1e-6)


def test_gradient_boundary_conventions():
    f = CostFunction.from_terms([(2.0, [1, 1]), (3.0, [2, 0]), (5.0, [0, 3])])
    # d/dx1 at x1=0: e=1 term leaves its cofactor (2*x2), e=2 term vanishes
    np.testing.assert_allclose(f.gradient([0.0, 4.0]), [8.0, 5 * 3 * 16.0])
    np.testing.assert_array_equal(f.gradient([0.0, 0.0]), [0.0, 0.0])


def test_gradient_matches_finite_differences_camera_family(rng):
    worst = 0.0
    for _ in range(20):
        f = sample_paper_cost(rng)
        for _ in range(20):
            x = 1.0 - rng.random(3)
            g = f.gradient(x)
            fd = finite_diff_gradient(f, x, 1e-6)
            # float FD resolution is ~eps*|f|/h, so measure against the gradient's scale
            worst = max(worst, np.max(np.abs(g - fd)) / np.max(np.abs(g)))
    assert worst < 1e-5


def test_finite_diff_examples():
    f = CostFunction.from_terms([(1.0, [2])])
    assert finite_diff_gradient(f, [1.0], 1e-6)[0] == pytest.approx(2.0, abs=1e-5)
    g = CostFunction.from_terms([(1.0, [1, 1])])
    np.testing.assert_allclose(finite_diff_gradient(g, [2.0, 3.0], 1e-6), [3.0, 2.0], atol=1e-4)
    fwd = finite_diff_gradient(f, [0.0], 1e-6)
    assert np.all(np.isfinite(fwd)) and fwd[0] == pytest.approx(1e-6, abs=1e-9)


@pytest.mark.parametrize("h", [0.0, -1e-3])
def test_finite_diff_rejects_bad_step(quad, h):
    with pytest.raises(ValueError):
        finite_diff_gradient(quad(1), [1.0], h)


def test_membership_holds_for_mild_quadratic(quad):
    rep = check_membership(quad(10), [1 / 90], [0.53], 50)
    assert rep.holds
    assert rep.worst_margin > 0
    # independent re-check on the same grid
    for x in membership_grid([0.53], 50):
        s = (1 / 90) * 20 * x[0]
        assert 0 < s < x[0]


def test_membership_fails_for_steep_quadratic(quad):
    rep = check_membership(quad(1e6), [1 / 90], [0.53], 50)
    assert not rep.holds
    assert rep.worst_margin < 0


def test_membership_fails_on_zero_gradient_component():
    f = CostFunction.from_terms([(1.0, [0, 2])])
    rep = check_membership(f, [1 / 90, 1 / 90], [1.0, 1.0], 10)
    assert not rep.holds
    assert rep.worst_resource == 0
    assert rep.worst_margin == 0.0


def test_membership_detects_nonconvexity():
    # x1*x2 is increasing but its Hessian [[0,1],[1,0]] is indefinite
    f = CostFunction.from_terms([(1.0, [1, 1]), (0.1, [2, 0]), (0.1, [0, 2])])
    rep = check_membership(f, [0.01, 0.01], [1.0, 1.0], 6)
    assert rep.min_hessian_eigenvalue < -0.5
    assert not rep.holds


def test_membership_report_implies_pointwise_inequalities(rng):
    for _ in range(5):
        f = sample_paper_cost(rng)
        box = np.array([0.6, 0.4, 0.5])
        rep = check_membership(f, [1 / 90] * 3, box, 8)
        if rep.holds:
            pts = membership_grid(box, 8)
            s = (1 / 90) * np.array([f.gradient(p) for p in pts])
            assert np.all(s > 0) and np.all(s < pts)


def test_camera_family_fails_membership_on_capacity_box(rng):
    # the high-degree terms make delta*grad exceed x long before x reaches C
    for _ in range(10):
        f = sample_paper_cost(rng)
        assert not check_membership(f, [1 / 90] * 3, [32.0, 20.0, 25.0], 10).holds


@pytest.mark.parametrize("bad", [dict(coefficient=-1.0, exponents=(1,)),
                                 dict(coefficient=1.0, exponents=(0, 0)),
                                 dict(coefficient=1.0, exponents=(-1, 2))])
def test_monomial_invariants(bad):
    with pytest.raises(ConfigError):
        MonomialTerm(**bad)


def test_sample_paper_cost_ranges_and_structure(rng):
    ranges = CameraCostRanges()
    assert (ranges.a, ranges.b, ranges.c, ranges.d) == ((10, 20), (25, 35), (22, 32), (1, 5))
    for _ in range(200):
        f = sample_paper_cost(rng)
        assert f.tag in CAMERA_BRANCH_TAGS
        assert f.is_separable
        assert all(t.coefficient > 0 for t in f.terms)
        assert np.all(f.gradient(rng.random(3)) >= 0)


def test_sample_paper_cost_deterministic():
    a = sample_paper_cost(np.random.default_rng(9))
    b = sample_paper_cost(np.random.default_rng(9))
    assert a == b


def test_sample_paper_cost_branch_frequencies():
    rng = np.random.default_rng(2024)
    tags = [sample_paper_cost(rng).tag for _ in range(100_000)]
    for tag in CAMERA_BRANCH_TAGS:
        assert abs(tags.count(tag) / len(tags) - 1 / 3) < 0.01


def test_camera_cost_branches_exact_terms():
    f1 = camera_cost(1, 10, 30, 24, 4)
    assert [(t.coefficient, t.exponents) for t in f1.terms] == [
        (10, (2, 0, 0)), (24, (0, 0, 2)), (5, (4, 0, 0)), (60, (0, 4, 0)),
        (15, (0, 6, 0)), (6, (0, 0, 4)), (0.5, (0, 0, 8))]
    f3 = camera_cost(3, 12, 30, 24, 6)
    assert [(t.coefficient, t.exponents) for t in f3.terms] == [
        (30, (0, 2, 0)), (24, (0, 0, 2)), (4, (6, 0, 0)), (1, (0, 6, 0)), (0.75, (0, 0, 4))]


def test_cost_dict_roundtrip(rng):
    f = sample_paper_cost(rng)
    assert CostFunction.from_dict(f.to_dict()) == f


def test_stacked_gradient_bitwise_equal(rng):
    costs = [sample_paper_cost(rng) for _ in range(12)]
    costs.append(CostFunction.from_terms([(1.5, [1, 1, 0]), (2.0, [0, 2, 1])]))
    xbar = rng.random((13, 3))
    expected = np.array([f.gradient(x) for f, x in zip(costs, xbar)])
    np.testing.assert_array_equal(StackedCosts(costs).gradient(xbar), expected)
    uni = StackedCosts(costs[:12])
    assert uni.univariate
    np.testing.assert_array_equal(uni.gradient(xbar[:12]), expected[:12])
    np.testing.assert_allclose(StackedCosts(costs).evaluate(xbar),
                               [f.evaluate(x) for f, x in zip(costs, xbar)], rtol=1e-14)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1),
       x=st.lists(st.floats(0, 2), min_size=3, max_size=3),
       dx=st.lists(st.floats(0, 1), min_size=3, max_size=3))
def test_evaluate_monotone(seed, x, dx):
    f = sample_paper_cost(np.random.default_rng(seed))
    x = np.array(x)
    assert f.evaluate(x) <= f.evaluate(x + np.array(dx))


def _mp_cost(f, point):
    import mpmath
    return mpmath.fsum(mpmath.mpf(t.coefficient) * mpmath.fprod(mpmath.mpf(float(v)) ** e
                                                               for v, e in zip(point, t.exponents))
                       for t in f.terms)


def test_stacked_difference_is_cancellation_free(rng):
    mpmath = pytest.importorskip("mpmath")
    mpmath.mp.dps = 60
    costs = [sample_paper_cost(rng) for _ in range(10)]
    costs.append(CostFunction.from_terms([(1.5, [1, 2, 0]), (2.0, [0, 1, 3])]))
    stacked = StackedCosts(costs)
    x = rng.random((11, 3))
    for scale in (1e-1, 1e-6, 1e-11):
        y = np.abs(x + scale * rng.standard_normal(x.shape))
        ref = np.array([float(_mp_cost(f, b) - _mp_cost(f, a)) for f, a, b in zip(costs, x, y)])
        np.testing.assert_allclose(stacked.difference(x, y), ref, rtol=1e-12)
