"""Compare the compiled simulator kernel with the pure-Python fallback.

Each backend runs in its own interpreter because the backend is chosen
at import time from PRIONOC_DISABLE_NUMBA. Both runs use the same seed,
so their reports must agree exactly.

    python benchmarks/bench_kernel.py --cycles 20000
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
from prionoc.network import build_ring, uniform_traffic, lambda_max
from prionoc.sim import SimConfig, run
from prionoc import _jit

cycles, frac = int(sys.argv[1]), float(sys.argv[2])
model = build_ring(8)
lm = 1e-6 * lambda_max(model, uniform_traffic(model, 1e-6))
cfg = SimConfig(model, uniform_traffic(model, frac * lm), cycles, min(5000, cycles // 10), seed=7)
if _jit.ENABLED:
    run(SimConfig(model, uniform_traffic(model, frac * lm), 2000, 100, seed=1))  # compile outside the timer
t0 = time.perf_counter()
rep = run(cfg)
elapsed = time.perf_counter() - t0
print(json.dumps({"numba": _jit.ENABLED, "seconds": elapsed, "mean_latency": rep.mean_latency(),
                  "delivered": rep.delivered}))
"""


def run_backend(disable: bool, cycles: int, fraction: float) -> dict:
    env = dict(os.environ, PRIONOC_DISABLE_NUMBA="1" if disable else "0")
    out = subprocess.run([sys.executable, "-c", WORKER, str(cycles), str(fraction)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--cycles", type=int, default=20_000)
    ap.add_argument("--fraction", type=float, default=0.7, help="load as a fraction of lambda_max")
    args = ap.parse_args(argv)

    fast = run_backend(False, args.cycles, args.fraction)
    slow = run_backend(True, args.cycles, args.fraction)
    for r in (fast, slow):
        name = "numba " if r["numba"] else "python"
        rate = args.cycles / r["seconds"]
        print(f"{name}  {r['seconds']:8.3f} s  {rate:12.0f} cycles/s  mean latency {r['mean_latency']:.6f}")
    print(f"speedup x{slow['seconds'] / fast['seconds']:.1f}")
    if (fast["mean_latency"], fast["delivered"]) != (slow["mean_latency"], slow["delivered"]):
        print("backends disagree", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
