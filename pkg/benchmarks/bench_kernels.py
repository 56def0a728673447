"""Time the compiled and pure-Python subspace-pursuit kernels side by side.

    python3 benchmarks/bench_kernels.py [--repeat N] [--trials N]

The full-trial row runs each backend in a subprocess, since the backend is
fixed at import time.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from jabfsp.kernels import backends

TRIAL_SNIPPET = """
import time
from jabfsp.evaluation.config import ExperimentConfig
from jabfsp.evaluation.harness import run_trial
cfg = ExperimentConfig(receivers=("jabfsp",), seed=7)
run_trial(cfg, 0)
t = time.perf_counter()
for i in range({trials}):
    run_trial(cfg, i)
print((time.perf_counter() - t) / {trials})
"""


def problem(rng, K=20, Q=40, T=7, s=4):
    B = rng.standard_normal((K, Q)) + 1j * rng.standard_normal((K, Q))
    X = np.zeros((Q, T), complex)
    X[rng.choice(Q, s, replace=False)] = rng.standard_normal((s, T)) + 1j * rng.standard_normal((s, T))
    Y = B @ X + 0.05 * (rng.standard_normal((K, T)) + 1j * rng.standard_normal((K, T)))
    return B, Y, s


def time_kernels(mod, repeat):
    rng = np.random.default_rng(0)
    B, Y, s = problem(rng)
    sup = np.array([1, 5, 9, 30])
    empty = np.zeros(0, dtype=np.int64)
    cases = {
        "block_energies": lambda: mod.block_energies(B, Y),
        "solve_support": lambda: mod.solve_support(B, Y, sup, 1e-12),
        "asp": lambda: mod.asp(B, Y, empty, Y, np.zeros((40, 7), complex), s, 20, 1e-12),
    }
    return {k: min(timeit.repeat(f, number=200, repeat=repeat)) / 200 for k, f in cases.items()}


def time_trial(name, trials):
    env = dict(os.environ, JABFSP_PURE_PYTHON="1" if name == "python" else "0")
    out = subprocess.run([sys.executable, "-c", TRIAL_SNIPPET.format(trials=trials)],
                         env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--trials", type=int, default=30)
    args = ap.parse_args()
    mods = backends()
    res = {name: time_kernels(mod, args.repeat) for name, mod in mods.items()}
    for name in mods:
        res[name]["full trial"] = time_trial(name, args.trials)
    names = list(mods)
    print(f"{'kernel':<16}" + "".join(f"{n:>14}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for k in res[names[0]]:
        line = f"{k:<16}" + "".join(f"{res[n][k] * 1e6:>11.1f} us" for n in names)
        if "cython" in res:
            line += f"{res['python'][k] / res['cython'][k]:>11.2f}x"
        print(line)


if __name__ == "__main__":
    main()
