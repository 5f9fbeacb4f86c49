"""Benchmark the numba kernels against the pure-Python fallback.

Runs the same lifetime simulation in two subprocesses (DSLCSIM_JIT=0 and
DSLCSIM_JIT=1), checks that every counter agrees, and reports wall time
for each backend.  The numba run is executed twice so the first-call
compilation cost is visible separately from the steady-state speed.

Usage:
    python benchmarks/compare_backends.py [--scale mini|desk] [--seed N]
"""

import argparse
import json
import os
import subprocess
import sys
import time

PROBE = """
import json, sys
from dslcsim import _kernels as K
from dslcsim.config import device_config
from dslcsim.engine import run_until_death
from dslcsim.trace import SyntheticSpec, generate_synthetic

scale, seed = sys.argv[1], int(sys.argv[2])
cfg = device_config(scale)
spec = SyntheticSpec(
    working_set_pages=cfg.logical_pages // 4,
    longevity_mixture=((600.0, 0.7), (18000.0, 0.3)),
    duration_s=3600.0, write_ratio=0.9, seed=seed)
reqs = generate_synthetic(spec)
r = run_until_death(cfg, reqs, policy="dslc", epoch_limit=2000)
print(json.dumps({"backend": K.BACKEND,
                  "counters": r.counters.as_dict(),
                  "lifetime_kb": r.lifetime_kb,
                  "died": r.died}))
"""


def run_once(jit_flag, scale, seed):
    env = dict(os.environ, DSLCSIM_JIT=jit_flag)
    t0 = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-c", PROBE, scale, str(seed)],
        env=env, capture_output=True, text=True)
    elapsed = time.perf_counter() - t0
    if proc.returncode != 0:
        raise RuntimeError(f"JIT={jit_flag} run failed:\n{proc.stderr}")
    return json.loads(proc.stdout), elapsed


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", default="desk", choices=("mini", "desk"),
                    help="device geometry (default: desk)")
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args(argv)

    py, t_py = run_once("0", args.scale, args.seed)
    nb_cold, t_cold = run_once("1", args.scale, args.seed)
    nb_warm, t_warm = run_once("1", args.scale, args.seed)

    assert py["backend"] == "python" and nb_cold["backend"] == "numba"
    for key, val in py["counters"].items():
        if nb_cold["counters"][key] != val or nb_warm["counters"][key] != val:
            raise SystemExit(
                f"backend mismatch on counter {key}: python={val} "
                f"numba_cold={nb_cold['counters'][key]} "
                f"numba_warm={nb_warm['counters'][key]}")
    if not (py["lifetime_kb"] == nb_cold["lifetime_kb"]
            == nb_warm["lifetime_kb"]):
        raise SystemExit("backend mismatch on lifetime_kb")

    host = py["counters"]["host_pages_written"]
    total = py["counters"]["total_pages_written"]
    print(f"workload: scale={args.scale} seed={args.seed} "
          f"host_pages={host} total_pages={total} died={py['died']}")
    print("all counters identical across backends")
    print(f"python          {t_py:8.2f} s")
    print(f"numba (cold)    {t_cold:8.2f} s   includes compile/cache load")
    print(f"numba (warm)    {t_warm:8.2f} s   speedup vs python: "
          f"{t_py / t_warm:.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
