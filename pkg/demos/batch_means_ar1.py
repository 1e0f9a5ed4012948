"""
Batch means on a vector AR(1) chain
===================================

For X_t = rho X_{t-1} + sqrt(1 - rho^2) Z_t the asymptotic covariance of
the sample mean is (1 + rho)/(1 - rho) I, so the estimator can be checked
against the truth. The effective sample size should sit near T/3 when
rho = 0.5.
"""
import numpy as np

from termctl.chains import AR1Chain
from termctl.estimators import batch_means_cov, ess, sample_cov, select_batch_size
from termctl.harness import ar1_reference_regime

d, rho = 3, 0.5
chain = AR1Chain(d, rho)
regime = ar1_reference_regime(d, rho)
print("true Sigma_f diagonal:", np.diag(chain.sigma_f))

for T in (10**4, 10**5, 10**6):
    out = chain.output(T, seed=1)
    for mode in ("EQ22", "TABLE56"):
        plan = select_batch_size(T, regime, 1.0, mode)
        sig = batch_means_cov(out, plan).matrix
        err = np.linalg.norm(sig - chain.sigma_f)
        r = ess(T, sample_cov(out).matrix, sig) / T
        print("T = %-8d %-8s l = %-6d k = %-5d |error|_F = %.3f  ESS/T = %.3f"
              % (T, mode, plan.batch_size, plan.num_batches, err, r))

# with k batches the error is roughly that of a Wishart matrix with k - 1
# degrees of freedom, so it falls like k^{-1/2}
k = 10**6 // 1413
print("Wishart scale at k = %d: %.3f" % (k, np.sqrt(108 / (k - 1))))
