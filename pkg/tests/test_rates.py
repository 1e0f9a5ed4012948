import math
import warnings

import pytest
from hypothesis import given, settings, strategies as st

from conftest import rel_close
from termctl.errors import Degenerate, PreconditionError, RegimeUnsupported
from termctl.model import (GeometricDriftSpec, MinorisationSpec, MomentClass, MomentSpec,
                           PolynomialDriftSpec, RegimeParams)
from termctl.rates import (P0GapWarning, approximation_exponent, approximation_rate,
                           compute_p0, dimension_growth_exponent, effective_p0,
                           log_min_simulation_threshold, min_simulation_threshold,
                           optimal_batch_exponent, p0_branch, psi_bar_geometric, psi_N,
                           psi_tilde_polynomial, rate_report, simulation_growth_exponent)


def geo(p=4.0, m0=1, d=1, **kw):
    return RegimeParams(GeometricDriftSpec(0.5, 1.0, 1.0, m0), MinorisationSpec(0.5, m0),
                        MomentSpec(p, 1 / p if p < 40 else 0.01), dim_feature=d, **kw)


# ---------------------------------------------------------------- p0

def test_p0_interpolated(oracle):
    assert rel_close(compute_p0(4, 0.25, 0.9), oracle["p0_interp_p4_e025_eta09"])
    assert p0_branch(4, 0.25, 0.9) == "interpolated"


def test_p0_full(oracle):
    assert compute_p0(4, 0.25, 0.99) == oracle["p0_full_p4_e025_eta099"]
    assert 0.99 > oracle["p0_upper_edge_p4_e025"]


def test_p0_exponential(oracle):
    assert rel_close(compute_p0(4, 0.25, 0.75, MomentClass.EXPONENTIAL_MOMENTS, 0.25),
                     oracle["p0_exp_eta075_ebar025"])
    # bounded features are handled like exponential moments
    assert compute_p0(4, 0.25, 0.75, MomentClass.BOUNDED, 0.25) == 2.75


def test_p0_unsupported_and_gap():
    with pytest.raises(RegimeUnsupported):
        compute_p0(4, 0.25, 0.5)
    # p/(2p-1) = 4/7 < 0.6 <= 0.8: moment bounds only
    with pytest.warns(P0GapWarning):
        with pytest.raises(RegimeUnsupported):
            compute_p0(4, 0.25, 0.6)


def test_p0_needs_eps_bar():
    with pytest.raises(PreconditionError):
        compute_p0(4, 0.25, 0.75, MomentClass.EXPONENTIAL_MOMENTS)
    with pytest.raises(PreconditionError):
        compute_p0(4, 0.25, 0.75, MomentClass.EXPONENTIAL_MOMENTS, 0.6)


@settings(max_examples=200, deadline=None)
@given(p=st.floats(2.05, 100), frac=st.floats(0.01, 1.0), eta=st.floats(0.01, 0.999))
def test_p0_polynomial_branches_bounded_by_p(p, frac, eta):
    eps = frac / p
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", P0GapWarning)
        try:
            p0 = compute_p0(p, eps, eta)
        except RegimeUnsupported:
            assert eta <= 2 * p / (3 * p - 2)
            return
    assert 0 < p0 <= p


@settings(max_examples=100, deadline=None)
@given(p=st.floats(4.5, 60), eta=st.floats(0.85, 0.995))
def test_p0_monotone_in_eta(p, eta):
    eps = 1 / p
    lo = compute_p0(p, eps, eta)
    hi = compute_p0(p, eps, min(eta + 0.004, 0.999))
    assert hi >= lo - 1e-12


def test_geometric_uses_p():
    assert effective_p0(geo(7.0)) == 7.0


# ---------------------------------------------------------------- psi

def test_psi_bar(oracle):
    assert rel_close(psi_bar_geometric(0.5, 0.5, 1, 4, 0.25, 1),
                     oracle["psi_bar_a05_l05_b1_p4_e025"])
    assert rel_close(psi_bar_geometric(0.5, 0.5, 1, 4, 0.25, 1, m0=2), oracle["psi_bar_m0_2"])


def test_psi_tilde(oracle):
    assert rel_close(psi_tilde_polynomial(0.5, 1, 0.5, 1, 4, 0.25, 2.5, 1),
                     oracle["psi_tilde_bracket8_p0_25"])
    p0 = compute_p0(4, 0.25, 0.9)
    assert rel_close(psi_tilde_polynomial(0.5, 1, 0.5, 1, 4, 0.25, p0, 1, m0=2, eta=0.9),
                     oracle["psi_tilde_m0_2_eta09"])


def test_psi_zero_moment_bound_and_degenerate_alpha():
    assert psi_bar_geometric(0.5, 0.5, 1, 4, 0.25, 0.0) == 0.0
    with pytest.raises(Degenerate):
        psi_tilde_polynomial(1.0, 1, 0.5, 1, 4, 0.25, 2.5, 1)


def test_psi_N_dispatch():
    r = geo()
    assert psi_N(r) == psi_bar_geometric(0.5, 0.5, 1.0, 4.0, 0.25, 1.0)


# ---------------------------------------------------------------- exponents

def test_approximation_rate(oracle):
    assert rel_close(approximation_rate(geo(), 1e4), oracle["psi_T_one_step_p4_T1e4"])
    assert rel_close(approximation_exponent(geo(m0=2)), oracle["psi_T_exp_multi_p4"])
    with pytest.raises(PreconditionError):
        approximation_rate(geo(), 2)


def test_growth_exponents(oracle):
    assert rel_close(dimension_growth_exponent(geo()), oracle["dim_exp_one_p4"])
    assert rel_close(simulation_growth_exponent(geo()), oracle["sim_exp_one_p4"])
    assert rel_close(dimension_growth_exponent(geo(m0=2)), oracle["dim_exp_multi_p4"])
    assert rel_close(simulation_growth_exponent(geo(m0=2)), oracle["sim_exp_multi_p4"])


def test_growth_exponent_limits():
    assert dimension_growth_exponent(geo(), p0=1e9) == pytest.approx(0.5, abs=1e-8)
    assert dimension_growth_exponent(geo(m0=2), p0=1e9) == pytest.approx(0.25, abs=1e-8)
    with pytest.raises(RegimeUnsupported):
        dimension_growth_exponent(geo(), p0=2.0)


def test_batch_exponents(oracle):
    assert rel_close(optimal_batch_exponent(geo(), 1.0), oracle["batch_exp_r1_p4_db1"])
    assert rel_close(optimal_batch_exponent(geo(m0=2), 1.0), oracle["batch_exp_r2_p4_db1"])
    assert rel_close(optimal_batch_exponent(geo(), 1.0, dimension_negligible=True),
                     oracle["batch_exp_r1_p4_negl"])
    # the middle term vanishes as delta_bar grows
    assert optimal_batch_exponent(geo(), 1e12) == pytest.approx(0.75, abs=1e-10)
    with pytest.raises(PreconditionError):
        optimal_batch_exponent(geo(), 0.4)


# ---------------------------------------------------------------- T*

def test_t_star_floor_multi_step(oracle):
    r = geo(4.0, m0=2)
    lg = log_min_simulation_threshold(r, 0.5, 1.0, 0.1, dimension_negligible=True)
    assert rel_close(lg, oracle["log_T_star_floor_multi_p4"])


def test_t_star_one_step(oracle):
    r = geo(8.0, d=2)
    lg = log_min_simulation_threshold(r, 0.05, 1.0, 0.1, psi_N_value=10.0)
    assert rel_close(lg, oracle["log_T_star_one_p8"])
    lg = log_min_simulation_threshold(r, 0.05, 1.0, 0.1, dimension_negligible=True)
    assert rel_close(lg, oracle["log_T_star_one_p8_negl"])
    r = geo(6.0, m0=2, d=3, trace_ratio=2.0)
    lg = log_min_simulation_threshold(r, 0.01, 1.0, 0.1, psi_N_value=3.0)
    assert rel_close(lg, oracle["log_T_star_multi_p6"])


def test_t_star_needs_p0_above_four_one_step():
    with pytest.raises(RegimeUnsupported):
        min_simulation_threshold(geo(4.0), 0.1, 1.0, 0.1)


def test_t_star_overflow_is_inf():
    r = geo(8.0, d=50)
    assert min_simulation_threshold(r, 1e-6, 1.0, 0.1, psi_N_value=1e300) == math.inf


@settings(max_examples=60, deadline=None)
@given(e1=st.floats(1e-4, 0.9), e2=st.floats(1e-4, 0.9))
def test_t_star_decreasing_in_epsilon(e1, e2):
    r = geo(8.0)
    lo, hi = sorted([e1, e2])
    assert log_min_simulation_threshold(r, lo, 1.0, 0.1, psi_N_value=5.0) >= \
        log_min_simulation_threshold(r, hi, 1.0, 0.1, psi_N_value=5.0)


def test_rate_report_keys():
    rep = rate_report(geo(8.0), 0.1).to_dict()
    for k in ("p0", "psi_N", "batch_exponent", "T_star", "dim_growth_exponent",
              "sim_growth_exponent"):
        assert k in rep
    assert rate_report(geo(4.0), 0.1).to_dict()["T_star"] is None


def test_polynomial_regime_rates():
    r = RegimeParams(PolynomialDriftSpec(0.5, 1.0, 0.999, 1.0), MinorisationSpec(0.5),
                     MomentSpec(8, 0.125))
    assert effective_p0(r) == 8.0
    assert psi_N(r) > 0
