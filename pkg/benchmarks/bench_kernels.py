"""Time the compiled gauge kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--samples 2000]

Each kernel is run on the same inputs under every available backend; the
table reports the best wall time per call and the speedup over the fallback.
Outputs are compared as well, so a mismatch shows up here before it shows
up in a test.
"""
import argparse
import timeit

import numpy as np

from pathgames import _kernels


def _cases(n_samples, n_steps, dim, m, seed=0):
    rng = np.random.default_rng(seed)
    values = np.ascontiguousarray(np.cumsum(rng.normal(size=(n_samples, n_steps + 1, dim)), axis=1))
    sup_sq = np.einsum("skd,skd->sk", values, values).max(axis=1)
    term = values[:, -1].copy()
    ends = rng.integers(0, n_steps + 1, size=n_samples).astype(np.int64)
    center = values[0].copy()
    step = 1.0 / n_steps
    return {
        "running_sup_sq": lambda k: k.running_sup_sq(values),
        "upsilon_terms": lambda k: k.upsilon_terms(sup_sq, term, m),
        "upsilon_prefixes": lambda k: k.upsilon_prefixes(values, m),
        "upsilon_bar0_many": lambda k: k.upsilon_bar0_many(center, n_steps, values, ends, m, step),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-12, atol=1e-12)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--steps", type=int, default=64)
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--order", type=int, default=3)
    args = ap.parse_args(argv)

    backends = _kernels.backends()
    cases = _cases(args.samples, args.steps, args.dim, args.order)
    print(f"samples={args.samples} steps={args.steps} dim={args.dim} order={args.order}")
    print(f"backends: {', '.join(backends)} (active: {_kernels.BACKEND})")
    print(f"{'kernel':<20} " + " ".join(f"{name + ' [ms]':>14}" for name in backends) + f" {'speedup':>9} agree")
    for name, run in cases.items():
        times, outs = {}, {}
        for bname, mod in backends.items():
            outs[bname] = run(mod)
            timer = timeit.Timer(lambda: run(mod))
            number, _ = timer.autorange()
            times[bname] = min(timer.repeat(args.repeat, number)) / number * 1e3
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        agree = all(_same(outs["python"], o) for o in outs.values())
        print(f"{name:<20} " + " ".join(f"{times[b]:>14.3f}" for b in backends) + f" {speed:>8.1f}x {agree}")


if __name__ == "__main__":
    main()
