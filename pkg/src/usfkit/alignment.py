"""Minimum-edit alignment counts, with an optional compiled kernel.

`edit_counts` resolves at import time to the Cython extension when it was
built, and to the pure-Python implementation otherwise. Both produce
identical (substitutions, deletions, insertions) triples: ties at equal cost
are resolved substitution first, then insertion, then deletion.
"""

from __future__ import annotations

from typing import Sequence


def edit_counts_py(ref: Sequence[str], hyp: Sequence[str]) -> tuple[int, int, int]:
    """Pure-Python reference implementation of the alignment kernel."""
    n, m = len(ref), len(hyp)
    rows = [list(range(m + 1))]
    for i in range(1, n + 1):
        prev = rows[i - 1]
        row = [i] + [0] * m
        ri = ref[i - 1]
        for j in range(1, m + 1):
            sub = prev[j - 1] + (ri != hyp[j - 1])
            ins = row[j - 1] + 1
            dele = prev[j] + 1
            best = sub
            if ins < best:
                best = ins
            if dele < best:
                best = dele
            row[j] = best
        rows.append(row)

    subs = dels = inss = 0
    i, j = n, m
    while i > 0 or j > 0:
        cost = rows[i][j]
        if i > 0 and j > 0 and cost == rows[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]):
            if ref[i - 1] != hyp[j - 1]:
                subs += 1
            i -= 1
            j -= 1
        elif j > 0 and cost == rows[i][j - 1] + 1:
            inss += 1
            j -= 1
        else:
            dels += 1
            i -= 1
    return subs, dels, inss


try:
    from usfkit._speedups import edit_counts as _edit_counts_ext
except ImportError:
    _edit_counts_ext = None

HAVE_SPEEDUPS = _edit_counts_ext is not None
edit_counts = _edit_counts_ext if HAVE_SPEEDUPS else edit_counts_py


def backend_name() -> str:
    return "compiled" if HAVE_SPEEDUPS else "pure-python"
