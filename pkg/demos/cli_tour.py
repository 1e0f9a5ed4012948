"""
The command line in five calls
==============================

Every subcommand prints JSON on stdout. Exit code 2 comes with an error
object, exit code 1 with a usage message on stderr.
"""
import json
import subprocess
import sys
import tempfile
from pathlib import Path

from termctl.harness import ar1_reference_regime


def termctl(*args):
    res = subprocess.run([sys.executable, "-m", "termctl", *args], capture_output=True,
                         text=True)
    print("$ termctl", " ".join(args))
    print("  exit", res.returncode)
    return res


work = Path(tempfile.mkdtemp())
ar1_reference_regime(2).to_json(work / "regime.json")

res = termctl("plan", "--regime", str(work / "regime.json"), "--epsilon", "0.15")
print("  T* dimension-negligible:", json.loads(res.stdout)["T_star_dimension_negligible"])

termctl("simulate", "--kernel", "ar1", "--d", "2", "--T", "20000", "--seed", "1",
        "--out", str(work / "chain.csv"))
res = termctl("analyze", "--input", str(work / "chain.csv"), "--regime",
              str(work / "regime.json"))
out = json.loads(res.stdout)
print("  sigma_hat:", out["sigma_hat"], " ess:", round(out["ess"]))

res = termctl("run-fvsr", "--epsilon", "0.2", "--d", "2", "--seed", "3")
print("  ", {k: json.loads(res.stdout)[k] for k in ("status", "T1", "T_star_used")})

res = termctl("run-fvsr", "--epsilon", "0.02", "--d", "2", "--max-T", "5000")
print("  ", json.loads(res.stdout)["error"])

res = termctl("plan", "--no-such-flag")
print("  stderr:", res.stderr.strip().splitlines()[-1])
