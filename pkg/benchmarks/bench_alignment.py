#!/usr/bin/env python3
"""Benchmark the compiled alignment kernel against the pure-Python fallback.

Usage: python benchmarks/bench_alignment.py [--pairs N] [--len N]
"""

from __future__ import annotations

import argparse
import random
import time

from usfkit.alignment import HAVE_SPEEDUPS, edit_counts_py

if HAVE_SPEEDUPS:
    from usfkit._speedups import edit_counts as edit_counts_ext


def make_pairs(n_pairs: int, mean_len: int, seed: int = 0):
    rng = random.Random(seed)
    vocab = [f"w{k}" for k in range(200)]
    pairs = []
    for _ in range(n_pairs):
        n = max(1, int(rng.gauss(mean_len, mean_len / 4)))
        ref = [rng.choice(vocab) for _ in range(n)]
        hyp = list(ref)
        for _ in range(max(1, n // 5)):
            op = rng.random()
            pos = rng.randrange(len(hyp))
            if op < 0.5:
                hyp[pos] = rng.choice(vocab)
            elif op < 0.75 and len(hyp) > 1:
                del hyp[pos]
            else:
                hyp.insert(pos, rng.choice(vocab))
        pairs.append((ref, hyp))
    return pairs


def bench(fn, pairs) -> float:
    start = time.perf_counter()
    for ref, hyp in pairs:
        fn(ref, hyp)
    return time.perf_counter() - start


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pairs", type=int, default=2000)
    parser.add_argument("--len", type=int, default=20, dest="mean_len")
    args = parser.parse_args()

    pairs = make_pairs(args.pairs, args.mean_len)
    t_py = bench(edit_counts_py, pairs)
    print(f"pure-python : {t_py:.3f}s for {args.pairs} pairs "
          f"({1e6 * t_py / args.pairs:.1f} us/pair)")
    if not HAVE_SPEEDUPS:
        print("compiled    : extension not built (pip install -e . --no-build-isolation)")
        return 0
    t_ext = bench(edit_counts_ext, pairs)
    print(f"compiled    : {t_ext:.3f}s for {args.pairs} pairs "
          f"({1e6 * t_ext / args.pairs:.1f} us/pair)")
    print(f"speedup     : {t_py / t_ext:.1f}x")

    mismatches = sum(
        edit_counts_py(r, h) != edit_counts_ext(r, h) for r, h in pairs[:500]
    )
    print(f"agreement   : {500 - mismatches}/500 identical count triples")
    return 1 if mismatches else 0


if __name__ == "__main__":
    raise SystemExit(main())
