"""Compare the compiled and numpy kernel backends on the shapes the solvers use.

    python benchmarks/bench_kernels.py [--repeat 5]

Each case runs the public entry point that dispatches to the kernel, so the
numbers include the surrounding numpy work a real run pays for.
"""

import argparse
import timeit

import numpy as np

from deepga import kernels
from deepga.network import NetConfig, init_params
from deepga.oracles import hjb_g_draws
from deepga.paths import make_rng, sample_paths
from deepga.problems import BsParams, make_bs_problem, make_hjb_problem
from deepga.rollout import candidate_losses, loss_and_grads


def cases():
    bs = make_bs_problem(BsParams(sigma_hat=0.1), d=100)
    hjb = make_hjb_problem(d=100)
    params = init_params(100, bs.n_steps, NetConfig(), make_rng(0), (40.0, 50.0))
    train = sample_paths(bs, make_rng(1), 64)
    valid = sample_paths(bs, make_rng(2), 256)
    grid = np.linspace(0.0, 100.0, 26)
    return {
        "euler paths, BS d=100 N=40 B=256": lambda: sample_paths(bs, make_rng(3), 256),
        "euler paths, HJB d=100 N=20 B=256": lambda: sample_paths(hjb, make_rng(3), 256),
        "fitness, 26 candidates B=256": lambda: candidate_losses(params, bs, valid, grid),
        "loss and gradients, B=64": lambda: loss_and_grads(params, bs, train),
        "HJB oracle draws, n=1e5 d=100": lambda: hjb_g_draws(100, 1.0, 0.0, 10**5, seed=0),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = kernels.available_backends()
    print(f"backends: {backends} (default {kernels.backend_name()})")
    header = f"{'case':40s}" + "".join(f"{b + ' ms':>14s}" for b in backends)
    print(header + ("    speedup" if len(backends) > 1 else ""))
    for name, fn in cases().items():
        best = {}
        for b in backends:
            with kernels.use_backend(b):
                fn()
                best[b] = 1e3 * min(timeit.repeat(fn, number=1, repeat=args.repeat))
        line = f"{name:40s}" + "".join(f"{best[b]:14.2f}" for b in backends)
        if len(backends) > 1:
            line += f"{best['python'] / best['cython']:10.2f}x"
        print(line)


if __name__ == "__main__":
    main()
