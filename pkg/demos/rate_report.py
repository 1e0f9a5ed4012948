"""
Reading a rate report
=====================

A regime bundles a drift condition, a minorisation and a moment bound.
From it we get the effective moment order p0, the dimension factor, the
batch-size exponent and the minimum simulation threshold T*.
"""
import math
import warnings

from termctl.errors import RegimeUnsupported
from termctl.harness import ar1_reference_regime
from termctl.model import (GeometricDriftSpec, MinorisationSpec, MomentClass, MomentSpec,
                           PolynomialDriftSpec, RegimeParams)
from termctl.rates import P0GapWarning, compute_p0, rate_report

# a geometric regime: p0 is just the moment order p
geo = RegimeParams(GeometricDriftSpec(lam=0.5, b=1.0, upsilon_C=1.0),
                   MinorisationSpec(0.5), MomentSpec(8.0, 0.125), dim_feature=2)
rep = rate_report(geo, epsilon=0.05)
print("geometric, p = 8")
for k, v in rep.to_dict().items():
    print("  %-38s %s" % (k, v))

# under polynomial drift p0 depends on eta; watch the three branches
print("\np0 against eta for p = 4, eps = 0.25")
for eta in (0.5, 0.75, 0.9, 0.99):
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always", P0GapWarning)
        try:
            p0 = compute_p0(4, 0.25, eta)
        except RegimeUnsupported as exc:
            p0 = "unsupported (%s)" % exc
    print("  eta = %-5s p0 = %s%s" % (eta, p0, "  [gap warning]" if w else ""))

# exponential moments use q - eps_bar instead
print("  exponential moments, eta = 0.75:",
      compute_p0(4, 0.25, 0.75, MomentClass.EXPONENTIAL_MOMENTS, eps_bar=0.25))

poly = RegimeParams(PolynomialDriftSpec(c=0.5, b=1.0, eta=0.999, upsilon_C=1.0),
                    MinorisationSpec(0.5), MomentSpec(8.0, 0.125))
print("\npolynomial, eta = 0.999: T* =", rate_report(poly, 0.05).T_star)

# the built-in AR(1) regime: the full threshold overflows, the
# dimension-negligible one is what the stopping rule uses by default
ar = rate_report(ar1_reference_regime(2), epsilon=0.15)
print("\nAR(1), d = 2: psi_N = %.3g, T* = %s, dimension-negligible T* = %.1f"
      % (ar.psi_N, ar.T_star, ar.T_star_dimension_negligible))
print("log10 psi_N =", round(math.log10(ar.psi_N), 2))
