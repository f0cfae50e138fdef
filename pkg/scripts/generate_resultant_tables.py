#!/usr/bin/env python3
# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

"""Cross-check the resultant expansion tables against sympy.

For every degree case the symbolic Sylvester determinant is expanded with
sympy and compared term by term with ``expansion_table``. The generic
resultant degree in ``x`` is checked against ``NOMINAL_DEGREE``.
"""

import argparse
import sys

import sympy

from isorecon.resultant import NOMINAL_DEGREE, expansion_table

# x-degree of the coefficient of y^k in a generic cubic
X_DEGREE = (3, 2, 1, 0)


def symbolic_table(n: int, m: int) -> dict[tuple[int, ...], int]:
    a = sympy.symbols("a0:4")
    b = sympy.symbols("b0:4")
    y = sympy.Symbol("y")
    p = sum(a[k] * y**k for k in range(n + 1))
    q = sum(b[k] * y**k for k in range(m + 1))
    det = sympy.Poly(sympy.resultant(p, q, y), *a, *b)
    return {tuple(int(e) for e in exps): int(c) for exps, c in det.terms()}


def generic_degree(n: int, m: int) -> int:
    x, y = sympy.symbols("x y")
    a = [sympy.Symbol(f"a{k}_{i}") for k in range(4) for i in range(4)]
    b = [sympy.Symbol(f"b{k}_{i}") for k in range(4) for i in range(4)]

    def cubic(c, degree):
        return sum(
            c[4 * k + i] * x**i * y**k for k in range(degree + 1) for i in range(X_DEGREE[k] + 1)
        )

    res = sympy.resultant(cubic(a, n), cubic(b, m), y)
    return sympy.Poly(sympy.expand(res), x).degree()


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--skip-degree", action="store_true", help="skip the slow degree check")
    args = parser.parse_args()

    ok = True
    for (n, m), nominal in sorted(NOMINAL_DEGREE.items()):
        table = dict(expansion_table(n, m))
        expected = symbolic_table(n, m)
        match = table == expected
        line = f"({n}, {m}): {len(table)} terms, table {'ok' if match else 'MISMATCH'}"
        if not args.skip_degree:
            degree = generic_degree(n, m)
            match = match and degree == nominal
            line += f", degree {degree} (nominal {nominal})"
        print(line)
        ok = ok and match
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
