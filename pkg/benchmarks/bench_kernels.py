"""Time each kernel on the numba and numpy backends.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Both backends are loaded side by side regardless of CORPUS_FORGE_BACKEND.
Results are checked for agreement before timing.
"""
import argparse
import json
import timeit

import numpy as np

from corpus_forge import kernels


def cases(rng):
    ref = rng.integers(0, 40, 4000)
    hyp = rng.integers(0, 40, 120)
    long_a = rng.integers(0, 40, 1500)
    long_b = rng.integers(0, 40, 1500)
    strings = rng.integers(0, 3, (729, 6))
    # every length-7 string in lexicographic order: consecutive rows share prefixes
    ordered = (np.arange(3**7)[:, None] // 3 ** np.arange(6, -1, -1)) % 3
    audio = rng.standard_normal(16000 * 60).astype(np.float32) * 0.1
    cps = np.arange(0, 301, 5)
    return {
        "edit_distance 1500x1500": lambda k: k.edit_distance(long_a, long_b),
        "prefix_distances window 300 vs 120": lambda k: k.prefix_distances(ref[:300], hyp, cps, 10**9),
        "prefix_distances early exit": lambda k: k.prefix_distances(ref, hyp, np.arange(0, 4001, 5), 30),
        "cross_distances 729x729 len 6": lambda k: k.cross_distances(strings, strings),
        "cross_distances sorted 729x2187": lambda k: k.cross_distances(strings, ordered),
        "frame_stats 60 s @16k": lambda k: k.frame_stats(audio, 400, 160),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(np.allclose(x, y, rtol=1e-9) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write results here")
    args = ap.parse_args()

    backends = {"numpy": kernels.implementation("numpy")}
    try:
        backends["numba"] = kernels.implementation("numba")
    except ImportError:
        print("numba not installed; timing numpy only")

    rows = []
    for name, fn in cases(np.random.default_rng(0)).items():
        results = {b: fn(k) for b, k in backends.items()}  # warm-up and JIT compile
        if len(results) == 2:
            assert same(results["numpy"], results["numba"]), f"{name}: backends disagree"
        row = {"kernel": name}
        for b, k in backends.items():
            row[b] = min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat))
        rows.append(row)

    width = max(len(r["kernel"]) for r in rows)
    print(f"{'kernel':<{width}}  {'numpy ms':>10}  {'numba ms':>10}  {'speedup':>8}")
    for r in rows:
        nb = r.get("numba")
        sp = f"{r['numpy'] / nb:8.1f}" if nb else f"{'-':>8}"
        nbs = f"{1e3 * nb:10.3f}" if nb else f"{'-':>10}"
        print(f"{r['kernel']:<{width}}  {1e3 * r['numpy']:10.3f}  {nbs}  {sp}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
