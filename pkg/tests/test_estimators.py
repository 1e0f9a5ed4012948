import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import rel_close
from naive import naive_batch_means_cov
from termctl.errors import PlanInfeasible, PreconditionError, SingularSigma, TooFewBatches
from termctl.estimators import (BatchMode, autocovariance, batch_means, batch_means_cov,
                                batch_means_cov_from_prefix, ess, make_plan, sample_cov,
                                select_batch_size, spectral_check, truncated_autocov_sum)
from termctl.model import GeometricDriftSpec, MinorisationSpec, MomentSpec, RegimeParams

GEO4 = RegimeParams(GeometricDriftSpec(0.5, 1.0, 1.0), MinorisationSpec(0.5), MomentSpec(4, 0.25))


def test_hand_example():
    est = batch_means_cov(np.array([1.0, 2, 3, 4]), 2)
    assert est.matrix[0, 0] == pytest.approx(4.0)
    assert (est.batch_size, est.num_batches) == (2, 2)


def test_constant_output_gives_zero():
    v = np.ones((100, 3)) * [1.0, -2.0, 5.0]
    assert np.all(batch_means_cov(v, 10).matrix == 0)
    assert np.all(sample_cov(v).matrix == 0)


def test_trailing_batch_dropped():
    v = np.array([1.0, 2, 3, 4, 100.0])
    assert batch_means_cov(v, 2).matrix[0, 0] == pytest.approx(4.0)
    assert batch_means(v, 2).ravel().tolist() == [1.5, 3.5]


def test_too_few_batches():
    with pytest.raises(TooFewBatches):
        batch_means_cov(np.arange(5.0), 3)


@settings(max_examples=60, deadline=None)
@given(T=st.integers(4, 400), d=st.integers(1, 4), seed=st.integers(0, 2**32 - 1),
       frac=st.floats(0.0, 1.0))
def test_matches_naive_loops(T, d, seed, frac):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((T, d)) * rng.uniform(0.1, 10, d)
    ell = 1 + int(frac * (T // 2 - 1))
    a = batch_means_cov(v, ell).matrix
    b = naive_batch_means_cov(v.tolist(), ell)
    assert np.linalg.norm(a - b) <= 1e-10 * max(np.linalg.norm(b), 1e-300)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (60, 2), elements=st.floats(-100, 100)),
       st.floats(-1e3, 1e3), st.floats(-10, 10))
def test_shift_and_scale(v, c, s):
    base = batch_means_cov(v, 6).matrix
    shifted = batch_means_cov(v + c, 6).matrix
    assert np.allclose(shifted, base, atol=1e-7 * (1 + abs(c)) ** 2)
    assert np.allclose(batch_means_cov(s * v, 6).matrix, s * s * base, rtol=1e-9, atol=1e-9)


def test_prefix_form_agrees():
    rng = np.random.default_rng(1)
    v = rng.standard_normal((503, 3))
    pre = np.vstack([np.zeros((1, 3)), np.cumsum(v, axis=0)])
    for t, ell in [(503, 20), (400, 7), (100, 50)]:
        assert np.allclose(batch_means_cov_from_prefix(pre, t, ell),
                           batch_means_cov(v[:t], ell).matrix, atol=1e-12)


def _iid_sqrt_errors():
    errs = []
    for seed in range(10):
        v = np.random.default_rng(seed).standard_normal((10**5, 3))
        errs.append(np.linalg.norm(batch_means_cov(v, int(math.isqrt(10**5))).matrix - np.eye(3)))
    return np.array(errs)


@pytest.mark.xfail(reason="k = 316 batches leave a Wishart sampling error near "
                   "sqrt(12/315) = 0.195 in d = 3", strict=False)
def test_iid_sqrt_batches_within_0_1_of_identity():
    assert np.median(_iid_sqrt_errors()) <= 0.1


def test_iid_sqrt_batches_match_wishart_error_scale():
    # E|W/(k-1) - I|_F^2 = (d^2 + d)/(k-1) for d = 3
    assert 0.12 <= np.median(_iid_sqrt_errors()) <= 0.28


def test_sample_cov_hand_and_psd():
    assert sample_cov(np.array([1.0, 2, 3])).matrix[0, 0] == pytest.approx(2 / 3)
    v = np.random.default_rng(0).standard_normal((5, 4))
    assert np.linalg.eigvalsh(sample_cov(v).matrix).min() > -1e-12
    with pytest.raises(PreconditionError):
        sample_cov(np.array([1.0]))


# ---------------------------------------------------------------- plans

def test_table56_plan(oracle):
    plan = select_batch_size(10**6, GEO4, 1.0, BatchMode.TABLE56)
    assert plan.batch_size == int(oracle["batch_ell_table_p4_T1e6"])
    assert plan.exponent_used == 0.75


def test_eq22_plan_at_1e6_is_feasible():
    # ceil(10^5.25) = 177828 leaves k = 5 batches, so no clamping happens
    plan = select_batch_size(10**6, GEO4, 1.0, "eq22")
    assert plan.batch_size == math.ceil(10 ** 5.25) and plan.num_batches == 5
    assert not plan.clamped


def test_plan_clamps_and_reports():
    plan = select_batch_size(40, GEO4, 1.0, "eq22")
    assert plan.clamped and plan.batch_size == 20 and plan.num_batches == 2


def test_plan_infeasible_for_tiny_T():
    with pytest.raises(PlanInfeasible):
        select_batch_size(3, GEO4, 1.0, "table")
    with pytest.raises(PlanInfeasible):
        select_batch_size(1, GEO4, 1.0, "table")


def test_user_mode_passthrough_and_validation():
    assert select_batch_size(1000, None, mode="user", batch_size=50).batch_size == 50
    with pytest.raises(PlanInfeasible):
        select_batch_size(1000, None, mode="user", batch_size=600)
    with pytest.raises(PlanInfeasible):
        make_plan(1000, 3)


@settings(max_examples=100, deadline=None)
@given(T=st.integers(8, 10**8), p=st.floats(4.1, 60))
def test_plan_invariants(T, p):
    r = RegimeParams(GeometricDriftSpec(0.5, 1.0, 1.0), MinorisationSpec(0.5), MomentSpec(p, 1 / p))
    try:
        plan = select_batch_size(T, r, 1.0, "table")
    except PlanInfeasible:
        return
    assert T >= 2 * plan.batch_size
    assert plan.batch_size >= math.ceil(math.log(T))


def test_plan_from_p0_only():
    assert select_batch_size(10**6, None, mode="table", p0=4).batch_size == 31623


# ---------------------------------------------------------------- ESS and spectra

def test_ess_values(oracle):
    assert rel_close(ess(1000, [[1.0]], [[4.0]]), oracle["ess_d1"])
    assert rel_close(ess(1000, np.eye(2), 4 * np.eye(2)), oracle["ess_d2"])
    assert ess(77, np.eye(3) * 2, np.eye(3) * 2) == pytest.approx(77)
    with pytest.raises(SingularSigma):
        ess(10, np.eye(2), np.zeros((2, 2)))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_ess_congruence_invariance(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((3, 3)) + 3 * np.eye(3)
    g = rng.standard_normal((3, 3))
    g = g @ g.T + np.eye(3)
    s = rng.standard_normal((3, 3))
    s = s @ s.T + np.eye(3)
    assert ess(1000, A @ g @ A.T, A @ s @ A.T) == pytest.approx(ess(1000, g, s), rel=1e-8)


def test_spectral_check():
    d = spectral_check(np.eye(2))
    assert (d.min_eig, d.max_eig, d.condition_number, d.pd) == (1.0, 1.0, 1.0, True)
    assert spectral_check(np.diag([1.0, 4.0])).condition_number == pytest.approx(4.0)
    assert not spectral_check(np.zeros((2, 2))).pd
    assert spectral_check(np.eye(2), sigma0=2.0).sigma0_violation


def test_autocovariance_of_ar1():
    from termctl.chains import AR1Chain
    v = AR1Chain(1, 0.5).output(200000, seed=3).values
    ac = autocovariance(v, 3)[:, 0, 0]
    assert np.allclose(ac, [1, 0.5, 0.25, 0.125], atol=0.03)
    assert truncated_autocov_sum(v)[0, 0] == pytest.approx(3.0, abs=0.2)
