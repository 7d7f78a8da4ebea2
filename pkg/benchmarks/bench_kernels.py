"""Compare the compiled and numpy coalition kernels on a fitted tree model.

    python3 benchmarks/bench_kernels.py [--model adaboost|forest] [--size 100] [--repeat 3]

Every kernel output is checked against the numpy zeta kernel before the table prints.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from matchtech import _kernels_py, synthetic
from matchtech.explain import BackgroundSet
from matchtech.learn import LabeledDataset
from matchtech.learn.models import train_model

try:
    from matchtech import _kernels
except ImportError:  # extension not built
    _kernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", choices=("adaboost", "forest"), default="adaboost")
    ap.add_argument("--size", type=int, default=100, help="stumps or trees")
    ap.add_argument("--depth", type=int, default=4, help="forest tree depth")
    ap.add_argument("--background", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    ds = LabeledDataset.from_features(synthetic.two_population_rows(args.seed))
    if args.model == "adaboost":
        params = {"n_estimators": args.size}
    else:
        params = {"n_estimators": args.size, "max_depth": args.depth}
    kind = "adaboost" if args.model == "adaboost" else "random_forest"
    model = train_model(kind, ds.X, ds.y, params, args.seed, ds.feature_names)
    X = model.impute(ds.X)
    bg = BackgroundSet.sample(X, args.background, args.seed).rows
    ens = model.tree_ensemble()
    used = sorted(ens.features_used())
    bitpos = np.full(X.shape[1], -1, dtype=np.int64)
    bitpos[used] = np.arange(len(used))
    p = len(used)
    arrays = (ens.feature, ens.threshold, ens.left, ens.right, ens.value, ens.roots, ens.weights, float(ens.bias))
    x = np.ascontiguousarray(X[0])
    print(f"model: {args.model}, {len(ens.roots)} trees over {p} used features, 2^{p} = {1 << p} coalitions, "
          f"background {len(bg)}")

    backends = [("python", _kernels_py)] + ([("cython", _kernels)] if _kernels is not None else [])
    results = {}
    for name, mod in backends:
        for kernel in ("tree_coalition_values", "tree_coalition_values_direct"):
            if name == "python" and kernel.endswith("direct") and p > 14:
                continue  # the vectorized walk allocates per mask; too slow to be interesting
            fn = getattr(mod, kernel)
            t, v = best_of(lambda: fn(*arrays, x, bg, bitpos, p), args.repeat)
            results[(name, kernel)] = (t, v)
        t, phi = best_of(lambda: mod.shapley_from_coalitions(results[(name, "tree_coalition_values")][1], p),
                         args.repeat)
        results[(name, "shapley_from_coalitions")] = (t, phi)

    ref = results[("python", "tree_coalition_values")][1]
    for key, (_, v) in results.items():
        other = results[(key[0], "tree_coalition_values")][1] if key[1] == "shapley_from_coalitions" else ref
        if key[1] == "shapley_from_coalitions":
            ref_phi = results[("python", "shapley_from_coalitions")][1]
            assert np.allclose(v, ref_phi, atol=1e-12), key
        else:
            assert np.allclose(v, other, atol=1e-12), key

    print(f"{'kernel':32s} {'python s':>12s} {'cython s':>12s} {'speedup':>9s}")
    for kernel in ("tree_coalition_values", "tree_coalition_values_direct", "shapley_from_coalitions"):
        tp = results.get(("python", kernel), (None,))[0]
        tc = results.get(("cython", kernel), (None,))[0]
        sp = f"{tp / tc:9.1f}" if tp and tc else f"{'-':>9s}"
        fmt = lambda t: f"{t:12.4f}" if t is not None else f"{'-':>12s}"
        print(f"{kernel:32s} {fmt(tp)} {fmt(tc)} {sp}")


if __name__ == "__main__":
    main()
