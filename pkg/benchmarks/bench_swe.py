"""Time the numpy and numba step kernels on the desk grid.

    python benchmarks/bench_swe.py [--n 96] [--steps 400]
"""

import argparse
import time

from tsunamisense import _accel
from tsunamisense.geo import GeoPoint, GridSpec, synth_bathymetry
from tsunamisense.swe import EpicenterSource, GridMetrics, PhysicalConstants, initial_condition, stable_dt, step


def run(use_numba, bathy, consts, metrics, dt, steps):
    s = initial_condition(EpicenterSource(GeoPoint(142.0, 36.0)), bathy)
    s = step(s, bathy, consts, dt, metrics=metrics, use_numba=use_numba)  # warm-up / JIT
    t0 = time.perf_counter()
    for _ in range(steps):
        s = step(s, bathy, consts, dt, metrics=metrics, use_numba=use_numba)
    return (time.perf_counter() - t0) / steps


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=96)
    ap.add_argument("--steps", type=int, default=400)
    args = ap.parse_args()
    bathy = synth_bathymetry(GridSpec(130.0, 160.0, 20.0, 50.0, args.n, args.n), "seamount")
    consts = PhysicalConstants()
    m = GridMetrics(bathy, consts, "sponge")
    dt = stable_dt(bathy, consts, 50.0, m)
    t_np = run(False, bathy, consts, m, dt, args.steps)
    print(f"grid {args.n}x{args.n}, {args.steps} steps")
    print(f"numpy : {t_np * 1e3:8.3f} ms/step")
    if _accel.HAS_NUMBA:
        t_nb = run(True, bathy, consts, m, dt, args.steps)
        print(f"numba : {t_nb * 1e3:8.3f} ms/step  (x{t_np / t_nb:.1f})")
    else:
        print("numba : not installed")


if __name__ == "__main__":
    main()
