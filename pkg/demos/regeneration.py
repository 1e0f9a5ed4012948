"""
Regenerative simulation by splitting
====================================

On the small set C = [-1, 1] the AR(1) kernel dominates alpha nu. Drawing
a bell after each move from C gives exact regeneration times, at which the
chain restarts from nu. Cycles are then i.i.d., which the ratio estimator
and a permutation test on the cycle lengths both exploit.
"""
import numpy as np
from scipy import stats

from termctl.chains import ar1_split_kernel
from termctl.splitting import (cycle_independence_test, extract_cycles, kac_estimate,
                               simulate_split)

kernel = ar1_split_kernel(rho=0.5, d=1, radius=1.0)
cert = kernel.certificate
print("alpha = %.6f (closed form %.6f), pi(C) = %.6f"
      % (kernel.mino.alpha, cert["alpha_closed_form"], cert["pi_C"]))
print("largest bell probability on random draws: %.4f"
      % kernel.spot_check(np.random.default_rng(0)))

path, rec = simulate_split(kernel, 10**5, "nu", 3)
print("regenerations %d, rate %.4f, expected alpha pi(C) = %.4f"
      % (rec.epochs.size, rec.epochs.size / 1e5, kernel.mino.alpha * cert["pi_C"]))
lens = rec.cycle_lengths
print("mean cycle length %.3f, longest %d" % (lens.mean(), lens.max()))

# states at regeneration epochs are fresh draws from nu
fresh = path[rec.epochs[rec.epochs < len(path)], 0]
ref = kernel.mino.nu.sample(np.random.default_rng(1), 20000)[:, 0]
print("two-sample KS against nu draws: p = %.3f" % stats.ks_2samp(fresh, ref).pvalue)

print("ratio estimate of the mean: %.4f" % kac_estimate(path, rec))
cs = extract_cycles(path, rec, pi_f=0.0)
print("cycle sums: %d cycles, variance %.3f" % (len(cs.cycles), cs.cycles[:, 0].var()))
print(cycle_independence_test(rec, n_perm=500, seed=0).to_dict())
