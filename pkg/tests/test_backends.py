"""The numba lane and the pure NumPy fallback must produce identical bits."""

import json
import os
import subprocess
import sys

SCRIPT = r"""
import json, sys
import numpy as np
import sepgeo
from sepgeo.engine import ClockRecord, evolve
from sepgeo.geodesics import backwards_index_process
from sepgeo.coupling import discrepancy, variational_min
from sepgeo.models import build_rate_model, initial_condition

model = build_rate_model("asep", p=0.75)
init = initial_condition("flat", rho=0.5, labels=range(30))
out = {"backend": sepgeo.BACKEND}
run = evolve(model, init, ClockRecord.counter(99), 15.0, checkpoints=[7.0, 15.0])
out["positions"] = run.positions.tolist()
out["supR"] = [run.log.suppressed_right(n).tolist() for n in range(30)]
out["supL"] = [run.log.suppressed_left(n).tolist() for n in range(30)]
tr = backwards_index_process(run, 20, 15.0)
out["endpoint"] = tr.endpoint_label
out["switches"] = [[s, l] for s, l in tr.switches]
if tr.endpoint_label <= 20:
    out["disc"] = discrepancy(run, tr, 15.0)
vr = variational_min(run, 20, 15.0, range(0, 21))
out["varmin"] = [vr.value, vr.minimizer]
print(json.dumps(out))
"""


def _run_lane(backend: str) -> dict:
    env = dict(os.environ, SEPGEO_BACKEND=backend)
    res = subprocess.run([sys.executable, "-c", SCRIPT], env=env,
                         capture_output=True, text=True, timeout=600)
    assert res.returncode == 0, res.stderr[-2000:]
    return json.loads(res.stdout.strip().splitlines()[-1])


def test_numpy_fallback_matches_numba_bitwise():
    a = _run_lane("numba")
    b = _run_lane("numpy")
    assert a["backend"] == "numba"
    assert b["backend"] == "numpy"
    for key in ("positions", "supR", "supL", "endpoint", "switches", "varmin"):
        assert a[key] == b[key], key
    assert a.get("disc") == b.get("disc")
