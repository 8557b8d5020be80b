"""Compiled vs pure-Python kernel timings.

    python3 benchmarks/bench_kernels.py [--repeat N]

Times the three hot kernels on the reference-step workload (61 stages x
148 speeds x 169 controls for the DP and region rollouts, a 5 s RK4 path
at dt = 1e-4) and checks that both backends agree bit for bit.
"""
import argparse
import math
import timeit

import numpy as np

from phasewalk import kernels

W_REF = math.sqrt(9.81)
STAGES = np.linspace(0.9, 1.5, 61)
STATES = 0.03 + 0.01 * np.arange(148)
OMEGAS = W_REF + 0.05 * np.arange(-6, 7)
TAUS = 0.5 * np.arange(-6, 7)
CFG = np.array([1.2, 0.6, W_REF, 1.0, 9.81, 4e4, 5.0, 5.0, 100.0, 1.0, 0.6])
RK4_P = np.array([W_REF, 0.0, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 9.81])
RK4_S0 = np.array([-0.25, 0.1, 1.0, 0.98, 0.0, 0.0])


def workloads(impl):
    _, pol = kernels.backends()["python"].dp_sweep(STAGES, STATES, STATES[0], 0.01,
                                                   OMEGAS, TAUS, CFG)
    nt = TAUS.shape[0]
    ok = pol >= 0
    pw = np.where(ok, OMEGAS[np.maximum(pol, 0) // nt], np.nan)
    pt = np.where(ok, TAUS[np.maximum(pol, 0) % nt], np.nan)
    return {
        "rk4_path (50k steps)": lambda: impl.rk4_path(RK4_S0, RK4_P, 1e-4, 50_000),
        "dp_sweep (61x148x169)": lambda: impl.dp_sweep(STAGES, STATES, STATES[0], 0.01,
                                                       OMEGAS, TAUS, CFG),
        "region_rollout (61x148)": lambda: impl.region_rollout(STAGES, STATES, STATES[0], 0.01,
                                                               pw, pt, CFG, 1e-3),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    impls = kernels.backends()
    print(f"active backend: {kernels.BACKEND}; available: {', '.join(sorted(impls))}")
    loads = {name: workloads(impl) for name, impl in impls.items()}
    print(f"{'kernel':26s}" + "".join(f"{n:>12s}" for n in sorted(impls)) + "     speedup  equal")
    for kname in loads["python"]:
        times, outs = {}, {}
        for name in sorted(impls):
            fn = loads[name][kname]
            outs[name] = fn()
            times[name] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
        row = f"{kname:26s}" + "".join(f"{times[n] * 1e3:10.2f}ms" for n in sorted(impls))
        if "cython" in impls:
            eq = _same(outs["python"], outs["cython"])
            row += f"  {times['python'] / times['cython']:9.1f}x  {'yes' if eq else 'NO'}"
        print(row)


if __name__ == "__main__":
    main()
