"""Time the Metropolis sweep in the compiled and pure-Python cores.

Both cores are fed the same path and the same uniforms, so besides the
cost per slice and sweep (block and whole-path translations included) the
script also confirms that they end in the same state.

    python benchmarks/bench_sweep.py [--sweeps 200] [--repeat 3]
"""

import argparse
import time

import numpy as np

from relpimc import _backend
from relpimc.sampler import SimulationConfig

CASES = [
    # (label, m, omega, d, n_slices)
    ("light, d=1", 0.01, 1.0, 1, 50),
    ("m=1, d=1", 1.0, 1.0, 1, 100),
    ("heavy, d=1", 100.0, 1.0, 1, 200),
    ("m=1, d=3", 1.0, 1.0, 3, 100),
]


def time_core(core, cfg, uniforms, repeat):
    best = float("inf")
    final = None
    for _ in range(repeat):
        path = np.zeros((cfg.n_slices, cfg.d))
        start = time.perf_counter()
        core.run_sweeps(path, cfg.m, cfg.tau, cfg.pot_coef, cfg.proposal_width, uniforms, 0,
                        None, None, None, None, cfg.shift_width, cfg.collective_moves)
        best = min(best, time.perf_counter() - start)
        final = path
    return best, final


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sweeps", type=int, default=200)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    try:
        compiled = _backend.get_core("cython")
    except ImportError:
        compiled = None
        print("compiled core not built; timing the Python core only")
    python = _backend.get_core("python")

    print(f"{'case':<12} {'python ns/slice':>16} {'cython ns/slice':>16} {'speedup':>8}  identical")
    for label, m, omega, d, n in CASES:
        cfg = SimulationConfig(m=m, omega=omega, d=d, n_slices=n)
        uniforms = np.random.default_rng(0).random((args.sweeps, cfg.uniform_rows, d + 1))
        updates = args.sweeps * n
        t_py, path_py = time_core(python, cfg, uniforms, args.repeat)
        row = f"{label:<12} {1e9 * t_py / updates:16.0f}"
        if compiled is not None:
            t_cy, path_cy = time_core(compiled, cfg, uniforms, args.repeat)
            same = np.array_equal(path_py, path_cy)
            row += f" {1e9 * t_cy / updates:16.0f} {t_py / t_cy:8.1f}  {same}"
        print(row)


if __name__ == "__main__":
    import warnings

    warnings.simplefilter("ignore")
    main()
