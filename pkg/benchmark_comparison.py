#!/usr/bin/env python3
"""Benchmark comparison between the resultant and substitution pair solvers."""

import argparse
import sys
import time

import numpy as np
from tabulate import tabulate

from isorecon.normals import PAIR_SOLVERS
from isorecon.synthetic import random_planar_pair


def make_pairs(count: int, seed: int):
    """Random planar pairs with their exact reference shape."""
    return [random_planar_pair([seed, i]) for i in range(count)]


def benchmark_solver(name: str, pairs, tol: float):
    solve = PAIR_SOLVERS[name]
    found = []
    failures = 0
    hits = 0
    start = time.perf_counter()
    for pair, shape in pairs:
        try:
            shapes = solve(pair).shapes
        except ArithmeticError:
            failures += 1
            found.append(None)
            continue
        found.append(shapes)
        if len(shapes) and np.min(np.abs(shapes - shape).sum(axis=1)) < tol:
            hits += 1
    elapsed = time.perf_counter() - start
    counts = [len(s) for s in found if s is not None]
    row = {
        "solver": name,
        "hit rate": hits / len(pairs),
        "failures": failures,
        "mean candidates": float(np.mean(counts)) if counts else float("nan"),
        "us per pair": elapsed / len(pairs) * 1e6,
    }
    return row, found


def agreement(a, b, tol: float) -> tuple[int, int]:
    """Pairs where both solvers return candidates, and where their best ones match."""
    both = agreed = 0
    for x, y in zip(a, b):
        if x is None or y is None or not len(x) or not len(y):
            continue
        both += 1
        if np.abs(x[0] - y[0]).sum() < tol:
            agreed += 1
    return both, agreed


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pairs", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--tol", type=float, default=1e-5)
    args = parser.parse_args()

    print(f"\n{'=' * 60}")
    print(f"Solving {args.pairs:,} random planar pairs (seed {args.seed})")
    print(f"{'=' * 60}")
    pairs = make_pairs(args.pairs, args.seed)

    rows = []
    found = {}
    for name in PAIR_SOLVERS:
        row, found[name] = benchmark_solver(name, pairs, args.tol)
        rows.append(row)
    print(tabulate(rows, headers="keys", floatfmt=".3f"))

    both, agreed = agreement(found["resultant"], found["substitution"], args.tol)
    print(f"\nBest candidates agree on {agreed:,} of {both:,} pairs solved by both")
    return 0


if __name__ == "__main__":
    sys.exit(main())
