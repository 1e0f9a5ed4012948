"""Independent calculator for the closed-form reference values.

Written against the formulas directly in mpmath at 40 digits; nothing
here imports the package. ``python3 tests/oracle_calculator.py --freeze``
rewrites tests/oracle_values.json, which the unit tests read.
"""
import json
import sys
from pathlib import Path

import mpmath as mp

mp.mp.dps = 40
FROZEN = Path(__file__).with_name("oracle_values.json")


def q_eta(eta):
    eta = mp.mpf(eta)
    return eta / (1 - eta)


def p0_interp(p, eps, eta):
    p, eps = mp.mpf(p), mp.mpf(eps)
    q = q_eta(eta)
    return p * q / (p + q + eps)


def psi_bar(alpha, lam, b, p, eps, M, m0=1):
    alpha, lam, b, p, eps, M = map(mp.mpf, (alpha, lam, b, p, eps, M))
    if m0 == 1:
        return (b / (alpha * (1 - lam))) ** (1 + eps / p) \
            * (p / (mp.e * mp.log(1 / lam))) ** p * M / alpha
    return (b * m0 / (alpha * (1 - lam))) ** (eps / p) * M / alpha


def psi_tilde(alpha, b, c, ups, p, eps, p0, M, m0=1, eta=None):
    alpha, b, c, ups, p, eps, p0, M = map(mp.mpf, (alpha, b, c, ups, p, eps, p0, M))
    br = 1 + b / (c * alpha) + (ups - c + b) / (1 - alpha)
    if m0 == 1:
        return br ** (1 + eps / p0) * M / alpha
    return mp.mpf(m0) ** (q_eta(eta) / p0 ** 2) * br ** ((p - p0 + eps) / p) * M / alpha


def log_t_star(p0, psi, trace_ratio, d, a, d1, d2, eps, one_step=True, negligible=False):
    p0, psi, tr, d, a, d1, d2, eps = map(mp.mpf, (p0, psi, trace_ratio, d, a, d1, d2, eps))
    if one_step:
        e1 = 2 * p0 / (p0 - 2) * (1 + d1)
        e2 = 4 * p0 / (p0 - 2) * (1 + d2)
        fl = 10 * p0 / (p0 - 2)
    else:
        e1 = 4 * (p0 - 1) / (p0 - 2) * (1 + d1)
        e2 = 8 * (p0 - 1) / (p0 - 2) * (1 + d2)
        fl = 16 * (p0 - 1) / (p0 - 2)
    body = e2 * mp.log(1 / eps)
    if not negligible:
        body += e1 * mp.log(psi * tr ** 2 * d ** 3 * d ** a)
    return max(body, fl)


def batch_exp(p0, db, rate, negligible=False):
    p0, db = mp.mpf(p0), mp.mpf(db)
    if rate == 1:
        mid = (p0 - 2) / (2 * p0 * (1 + db))
        return mp.mpf(1) / 2 + (0 if negligible else mid) + 1 / p0
    mid = (p0 - 2) / (4 * (p0 - 1) * (1 + db))
    return mp.mpf(3) / 4 + 1 / (4 * (p0 - 1)) + (0 if negligible else mid)


def hitting_exp_a(lam, b, alpha, ups):
    lam, b, alpha, ups = map(mp.mpf, (lam, b, alpha, ups))
    return 1 + mp.log((lam * ups + b - alpha) / (1 - alpha)) / mp.log(1 / lam)


def hit_mgf_nu(lam, b, alpha, ups, r):
    lam, b, alpha, ups, r = map(mp.mpf, (lam, b, alpha, ups, r))
    a = hitting_exp_a(lam, b, alpha, ups)
    return (b / (1 - lam)) / ((1 - (1 - alpha) * r ** a) * alpha)


def hit_mgf_x(lam, b, alpha, ups, r, V, inside):
    lam, b, alpha, ups, r, V = map(mp.mpf, (lam, b, alpha, ups, r, V))
    a = hitting_exp_a(lam, b, alpha, ups)
    G = V if inside else r * (lam * ups + b)
    return alpha * G / (1 - (1 - alpha) * r ** a)


def hit_poly_nu(b, c, alpha, ups):
    b, c, alpha, ups = map(mp.mpf, (b, c, alpha, ups))
    return b / (c * alpha) + (ups - c + b) / (1 - alpha)


def regen_poly(eta, m0, b, c, alpha, ups):
    q = q_eta(eta)
    return mp.mpf(2) ** (q - 1) * mp.mpf(m0) ** q * (1 + hit_poly_nu(b, c, alpha, ups))


def chi2_quantile(d, alpha):
    d, alpha = mp.mpf(d), mp.mpf(alpha)
    return mp.findroot(lambda x: mp.gammainc(d / 2, 0, x / 2, regularized=True) - (1 - alpha),
                       d + 2)


def unit_ball(d):
    d = mp.mpf(d)
    return mp.pi ** (d / 2) / mp.gamma(d / 2 + 1)


def c_alpha_d(alpha, d):
    return chi2_quantile(d, alpha) ** (mp.mpf(d) / 2) * unit_ball(d)


def values():
    v = {}
    # effective moment order
    v["p0_interp_p4_e025_eta09"] = p0_interp(4, 0.25, 0.9)
    v["p0_full_p4_e025_eta099"] = mp.mpf(4)
    v["p0_exp_eta075_ebar025"] = q_eta(0.75) - mp.mpf("0.25")
    v["p0_lower_edge_p4"] = mp.mpf(8) / 10
    v["p0_upper_edge_p4_e025"] = mp.mpf(17) / mp.mpf("17.25")
    # dimension factors
    v["psi_bar_a05_l05_b1_p4_e025"] = psi_bar(0.5, 0.5, 1, 4, 0.25, 1)
    v["psi_bar_m0_2"] = psi_bar(0.5, 0.5, 1, 4, 0.25, 1, m0=2)
    v["psi_tilde_bracket8_p0_25"] = psi_tilde(0.5, 1, 0.5, 1, 4, 0.25, 2.5, 1)
    v["psi_tilde_m0_2_eta09"] = psi_tilde(0.5, 1, 0.5, 1, 4, 0.25, p0_interp(4, 0.25, 0.9), 1,
                                          m0=2, eta=0.9)
    # approximation rate and growth exponents
    v["psi_T_one_step_p4_T1e4"] = mp.mpf(10) ** (mp.mpf(4) / 4) * mp.log(mp.mpf(10) ** 4)
    v["psi_T_exp_multi_p4"] = mp.mpf(1) / 4 + mp.mpf(1) / 12
    v["dim_exp_one_p4"] = mp.mpf(2) / 8
    v["sim_exp_one_p4"] = mp.mpf(8) / 2
    v["dim_exp_multi_p4"] = mp.mpf(2) / 12
    v["sim_exp_multi_p4"] = mp.mpf(12) / 2
    # thresholds
    v["log_T_star_floor_multi_p4"] = log_t_star(4, 1e-300, 1, 1, 1, 1, 0.1, 0.5,
                                                one_step=False, negligible=True)
    v["log_T_star_one_p8"] = log_t_star(8, 10, 1, 2, 1, 1, 0.1, 0.05)
    v["log_T_star_one_p8_negl"] = log_t_star(8, 10, 1, 2, 1, 1, 0.1, 0.05, negligible=True)
    v["log_T_star_multi_p6"] = log_t_star(6, 3, 2, 3, 1, 1, 0.1, 0.01, one_step=False)
    v["log_T_star_one_p40_negl_e015"] = log_t_star(40, 1, 1, 1, 1, 1, 0.1, 0.15,
                                                   negligible=True)
    # batch exponents
    v["batch_exp_r1_p4_db1"] = batch_exp(4, 1, 1)
    v["batch_exp_r2_p4_db1"] = batch_exp(4, 1, 2)
    v["batch_exp_r1_p4_negl"] = batch_exp(4, 1, 1, negligible=True)
    v["batch_ell_table_p4_T1e6"] = mp.ceil(mp.mpf(10) ** (6 * batch_exp(4, 1, 1, True)))
    # drift transforms
    v["geo_superset_lam_hat"] = (1 + 3 * mp.mpf("0.5")) / 3
    v["poly_superset_eta_hat"] = mp.log(mp.sqrt(9) - 1) / mp.log(9)
    v["geo_subset_lam_hat"] = (mp.mpf("0.5") * mp.mpf("0.2") + 1) / (mp.mpf("0.2") + 1)
    v["geo_subset_b_hat"] = 1 + 1 / mp.mpf("0.2")
    v["poly_subset_lower"] = mp.mpf(1) / (mp.sqrt(4) + 1)
    v["poly_subset_eta_hat"] = mp.log(mp.mpf("0.6") / mp.mpf("0.4")) / mp.log(4)
    v["poly_subset_b_hat"] = 1 + 4 * (1 - mp.mpf("0.25"))
    # hitting and regeneration bounds
    v["hitting_exp_a"] = hitting_exp_a(0.5, 1, 0.5, 1)
    v["hit_mgf_nu_r12"] = hit_mgf_nu(0.5, 1, 0.5, 1, 1.2)
    v["hit_mgf_x_in_r12_V2"] = hit_mgf_x(0.5, 1, 0.5, 1, 1.2, 2, True)
    v["hit_mgf_x_out_r12"] = hit_mgf_x(0.5, 1, 0.5, 1, 1.2, 5, False)
    v["hit_poly_nu"] = hit_poly_nu(1, 0.5, 0.5, 1)
    v["regen_geo"] = 1 / (mp.mpf("0.5") ** 3)
    v["regen_poly_m1"] = regen_poly(0.75, 1, 1, 0.5, 0.5, 1)
    v["regen_poly_m2"] = regen_poly(0.75, 2, 1, 0.5, 0.5, 1)
    v["initial_cycle_geo"] = 1 / (1 - mp.mpf("0.5")) * (2 + 1 * mp.log(mp.mpf("1.44"))
                                                        / mp.log(mp.mpf("1.2")))
    v["initial_cycle_poly"] = 2 * 3 / mp.mpf("0.5") * (
        4 + (mp.mpf(4) ** (1 - mp.mpf("0.75")) + mp.mpf(1) ** mp.mpf("0.75") + 0)
        / ((1 - mp.mpf("0.75")) * mp.mpf("0.5")))
    # ellipsoids
    v["chi2_d2_a005"] = chi2_quantile(2, 0.05)
    v["chi2_d1_a005"] = chi2_quantile(1, 0.05)
    v["chi2_d3_a010"] = chi2_quantile(3, 0.10)
    v["chi2_d7_a001"] = chi2_quantile(7, 0.01)
    v["halfwidth_d1_T100"] = mp.sqrt(chi2_quantile(1, 0.05) / 100)
    v["c_alpha_d2"] = c_alpha_d(0.05, 2)
    v["c_alpha_d1"] = c_alpha_d(0.05, 1)
    v["c_alpha_d3"] = c_alpha_d(0.05, 3)
    v["ellipsoid_vol_d3_T50"] = c_alpha_d(0.05, 3) * mp.mpf(50) ** (-mp.mpf(3) / 2) \
        * mp.sqrt(mp.mpf(2) * 3 * 5)
    # ESS
    v["ess_d1"] = mp.mpf(1000) * (mp.mpf(1) / 4)
    v["ess_d2"] = mp.mpf(1000) * mp.sqrt(mp.mpf(1) / 16)
    # stopping-rule stubs: first t >= T* with 1/t + eps/t < eps
    v["fvsr_stub_T1"] = next(t for t in range(5, 1000) if mp.mpf(1) / t + mp.mpf("0.1") / t
                             < mp.mpf("0.1"))
    # scaling stub: vol_root = K/sqrt(t), d = 1, Sigma_f = [[9]], T* = 100
    K = mp.mpf(3)
    t1 = next(t for t in range(100, 10**6) if K / mp.sqrt(t) + mp.mpf("0.1") / t < mp.mpf("0.1"))
    v["scaling_stub_T1"] = t1
    v["scaling_stub_ratio"] = mp.mpf("0.01") * t1 / (c_alpha_d(0.05, 1) ** 2 * 9)
    # AR(1) references
    v["ar1_sigma_f_rho05"] = (1 + mp.mpf("0.5")) / (1 - mp.mpf("0.5"))
    v["ar1_alpha_radius1"] = 2 * mp.ncdf(-mp.mpf("0.5") / mp.sqrt(mp.mpf("0.75")))
    v["ar1_pi_C_radius1"] = mp.erf(1 / mp.sqrt(2))
    return v


def as_floats(v):
    return {k: float(x) for k, x in v.items()}


if __name__ == "__main__":
    vals = values()
    if "--freeze" in sys.argv:
        FROZEN.write_text(json.dumps({k: mp.nstr(x, 25) for k, x in vals.items()}, indent=1)
                          + "\n")
    for k, x in vals.items():
        print("%-32s %s" % (k, mp.nstr(x, 17)))
