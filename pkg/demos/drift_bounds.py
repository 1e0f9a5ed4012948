"""
Drift bounds against simulation
===============================

Drift and minorisation constants bound moments of the return time to C
and of the regeneration time. Here both a geometric case (AR(1)) and a
polynomial case (random-walk Metropolis on a heavy-tailed target) are
compared with the empirical moments over many cycles.
"""
from termctl.chains import ar1_split_drift, ar1_split_kernel, heavy_tail_split_kernel
from termctl.drift import (FROM_NU, hitting_mgf_bound, hitting_exponent, stable_r_max,
                           skeleton_geometric_superset)
from termctl.harness import bound_validation_experiment
from termctl.errors import UnstableBound

dr = ar1_split_drift(0.5, 1, 1.5)
mino = ar1_split_kernel(0.5, 1, 1.5).mino
print("AR(1) drift on [-1.5, 1.5]:", dr.to_dict())
print("hitting exponent a = %.4f, stable r < %.4f" % (hitting_exponent(dr, mino),
                                                    stable_r_max(dr, mino)))
for r in (1.02, 1.05, 1.08, 1.1):
    try:
        print("  E_nu r^tau <= %.3f at r = %.2f" % (hitting_mgf_bound(dr, mino, r, FROM_NU), r))
    except UnstableBound as exc:
        print("  r = %.2f: %s" % (r, exc))
print("drift on a larger level set:", skeleton_geometric_superset(dr, 10.0).to_dict())

for chain_id in ("ar1-split", "rwm-heavy-split"):
    res = bound_validation_experiment(chain_id, reps=3, T=5 * 10**4)
    print("\n%s: %d cycles, mean length %.2f" % (chain_id, res.summary["n_cycles"],
                                                 res.summary["mean_cycle_length"]))
    for row in res.rows:
        print("  %-26s bound %-10.4g empirical %-10.4g %s" % (
            row["bound_name"], row["bound"], row["empirical"], row["status"]))

k = heavy_tail_split_kernel()
print("\nheavy-tail certificate:", {key: k.certificate[key] for key in k.certificate
                                    if key != "drift_check"})
