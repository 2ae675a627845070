"""The pure-Python kernel must reproduce the compiled one bit for bit."""

import json
import os
import subprocess
import sys

import pytest

SCRIPT = r"""
import json
from prionoc import _jit
from prionoc.network import build_ring, uniform_traffic, lambda_max
from prionoc.sim import SimConfig, run
model = build_ring(6)
shape = uniform_traffic(model, 1e-6)
m = shape.scaled(0.8 * lambda_max(model, shape))
rep = run(SimConfig(model, m, 4000, 200, seed=17, trace=True))
print(json.dumps({"jit": _jit.ENABLED, "lat": rep.latency_mean.tolist(),
                  "occ": rep.queue_occupancy.tolist(), "trace": rep.trace.tolist()}))
"""


def run_backend(disable):
    env = dict(os.environ, PRIONOC_DISABLE_NUMBA="1" if disable else "0")
    out = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


@pytest.mark.slow
def test_backends_agree():
    fast, slow = run_backend(False), run_backend(True)
    assert slow["jit"] is False
    assert fast["lat"] == slow["lat"]
    assert fast["occ"] == slow["occ"]
    assert fast["trace"] == slow["trace"]
