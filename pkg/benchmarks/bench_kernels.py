"""Time the hot kernels with numba and with the plain-numpy fallback.

Each mode runs in its own interpreter because the switch is read at import:

    python3 benchmarks/bench_kernels.py            # both modes, side by side
    python3 benchmarks/bench_kernels.py --single   # current mode only (internal)
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _best(fn, repeat):
    fn()  # warm-up (JIT compile or cache load)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def single(repeat):
    from koopquad import NUMBA_ENABLED, BodyState, ControllerSpec, RigidBodyParams, SensorModel, TrajectoryPlan
    from koopquad import kernels
    from koopquad.dynamics import propagate_array
    from koopquad.sim import RunSettings, run_closed_loop

    p = RigidBodyParams()
    x = BodyState(nu=[0.3, -0.2, 0.5], v=[0.5, 0, 0]).to_array()
    u = np.array([10.0, 0.01, -0.01, 0.0])

    def chains():
        for _ in range(1000):
            kernels.angular_chain(x[9:12].copy(), p.jd, 2, 4)
            kernels.position_chain(x, p.jd, p.m, p.g, 9.81, 0, 4)

    results = {
        "rk4_propagate_1000_steps": _best(lambda: propagate_array(x, u, p, 1e-3, 1000), repeat),
        "chain_kernels_1000x2": _best(chains, repeat),
        "closed_loop_2s": _best(lambda: run_closed_loop(p, TrajectoryPlan(), ControllerSpec(), SensorModel(),
                                                        RunSettings(duration=2.0)), max(1, repeat // 3)),
    }
    return {"numba": NUMBA_ENABLED, "seconds": results}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--single", action="store_true")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if args.single:
        print(json.dumps(single(args.repeat)))
        return

    runs = {}
    for label, flag in (("numba", None), ("numpy", "1")):
        env = dict(os.environ)
        env.pop("KOOPQUAD_NO_NUMBA", None)
        if flag:
            env["KOOPQUAD_NO_NUMBA"] = flag
        out = subprocess.run([sys.executable, __file__, "--single", "--repeat", str(args.repeat)],
                             env=env, check=True, capture_output=True, text=True).stdout
        runs[label] = json.loads(out.strip().splitlines()[-1])["seconds"]

    print(f"{'benchmark':<28}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for name in runs["numba"]:
        a, b = runs["numba"][name], runs["numpy"][name]
        print(f"{name:<28}{a:>12.4f}{b:>12.4f}{b / a:>10.1f}")


if __name__ == "__main__":
    main()
