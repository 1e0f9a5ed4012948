"""
Stopping when the confidence ellipsoid is small enough
======================================================

The fixed volume rule watches the volume of the batch-means confidence
ellipsoid and stops once Vol^{1/d} plus a guard term drops below the
requested precision. Nothing is allowed before the threshold T*.
"""
import numpy as np

from termctl.chains import AR1Chain, seed_stream
from termctl.harness import ar1_reference_regime, scaling_denominator
from termctl.termination import fvsr_run

d, rho, eps = 2, 0.5, 0.15
chain = AR1Chain(d, rho)
regime = ar1_reference_regime(d, rho)

rep = fvsr_run(chain.stream(seed_stream(11, 0)), eps, regime, 0.05, dimension_negligible=True)
print("status %s, T1 = %d, T* = %.1f (%s)" % (rep.status, rep.T1, rep.T_star_used,
                                              rep.T_star_source))
ell = rep.final_ellipsoid
print("ellipsoid centre", ell.center, "contains pi(f):", ell.contains(chain.pi_f))
print("ESS at stop: %.0f" % rep.ess_at_T1)

# with a small T* the stopping time tracks c^{2/d} det(Sigma_f)^{1/d} / eps^2
denom = scaling_denominator(chain.sigma_f, 0.05)
for eps in (0.4, 0.2, 0.1):
    t1 = [fvsr_run(chain.stream(seed_stream(5, i)), eps, regime, t_star=100).T1
          for i in range(20)]
    print("eps = %.2f  median T1 = %6.0f  median ratio = %.3f"
          % (eps, np.median(t1), np.median(eps * eps * np.array(t1) / denom)))
