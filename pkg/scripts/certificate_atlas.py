"""Map certificate feasibility over the self/cross pressure plane.

Sweeps the u-equation pair (alpha11, alpha21) on a linear grid while the
rest of the parameters stay at their case1 values, records whether a
quadratic certificate exists, and at which K the search settled.  The
relation to watch: feasibility should flip exactly where the product
inequality alpha11*alpha22 vs the cross/self interaction term flips,
independent of the search internals.

The base point keeps case1's interspecies barrier b11*b22 tiny, which makes
everything above the precondition diagonal feasible; --barrier raises both
b coefficients so the infeasible wedge shows up in the picture.

Usage: python3 scripts/certificate_atlas.py [--grid 25] [--barrier 0.8] [--out atlas.npz]
"""

import argparse
from dataclasses import replace

import numpy as np

from sktspec.lyapunov import PreconditionError, find_certificate
from sktspec.model import check_conditions, preset

GLYPH_FEASIBLE = "#"
GLYPH_INFEASIBLE = "."
GLYPH_PRECONDITION = "-"


def scan(grid: int, barrier: float, lo: float = 0.02, hi: float = 2.0):
    base = replace(preset("case1"), b11=barrier, b22=barrier)
    a11 = np.linspace(lo, hi, grid)
    a21 = np.linspace(lo, hi, grid)
    feasible = np.zeros((grid, grid), dtype=bool)
    precondition = np.zeros((grid, grid), dtype=bool)
    k_used = np.full((grid, grid), np.nan)
    margin = np.full((grid, grid), np.nan)

    for i, x in enumerate(a11):
        for j, y in enumerate(a21):
            p = replace(base, alpha11=float(x), alpha21=float(y))
            report = check_conditions(p)
            margin[i, j] = float(report.cond_1_7.lhs) - float(report.cond_1_7.rhs)
            try:
                cert = find_certificate(p)
            except PreconditionError:
                precondition[i, j] = True
                continue
            if cert is not None:
                feasible[i, j] = True
                k_used[i, j] = cert.K
    return a11, a21, feasible, precondition, k_used, margin


def ascii_map(a11, a21, feasible, precondition):
    # rows: alpha11 descending so the picture reads like a plot
    lines = []
    for i in range(len(a11) - 1, -1, -1):
        row = []
        for j in range(len(a21)):
            if precondition[i, j]:
                row.append(GLYPH_PRECONDITION)
            elif feasible[i, j]:
                row.append(GLYPH_FEASIBLE)
            else:
                row.append(GLYPH_INFEASIBLE)
        lines.append(f"a11={a11[i]:5.2f} " + "".join(row))
    lines.append(" " * 10 + f"a21: {a21[0]:.2f} .. {a21[-1]:.2f}")
    return "\n".join(lines)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=25)
    ap.add_argument("--barrier", type=float, default=0.8,
                    help="value used for both b11 and b22")
    ap.add_argument("--out", default=None, help="optional npz dump of the scan")
    args = ap.parse_args(argv)

    a11, a21, feasible, precondition, k_used, margin = scan(args.grid, args.barrier)

    print(ascii_map(a11, a21, feasible, precondition))
    print()
    n = feasible.size
    print(f"feasible      {feasible.sum():4d}/{n}")
    print(f"precondition  {precondition.sum():4d}/{n}  (a11 <= a21 branch)")
    print(f"infeasible    {(~feasible & ~precondition).sum():4d}/{n}")

    # feasibility must track the sign of the inequality margin exactly
    eligible = ~precondition
    agree = (feasible == (margin > 0.0)) | ~eligible
    print(f"margin-sign agreement on eligible cells: {agree.all()}")
    ks = k_used[np.isfinite(k_used)]
    if ks.size:
        print(f"K over feasible cells: min {ks.min():.3f}  max {ks.max():.3f}")

    if args.out:
        np.savez(args.out, alpha11=a11, alpha21=a21, feasible=feasible,
                 precondition=precondition, k_used=k_used, margin=margin)
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
