# cython: language_level=3
# cython: boundscheck=False
# cython: wraparound=False
"""Compiled alignment kernel; semantics identical to usfkit.alignment.edit_counts_py."""

from libc.stdlib cimport free, malloc


def edit_counts(ref, hyp):
    """Minimum-edit alignment counts (substitutions, deletions, insertions).

    Ties at equal cost resolve substitution first, then insertion, then deletion.
    """
    cdef Py_ssize_t n = len(ref)
    cdef Py_ssize_t m = len(hyp)
    cdef Py_ssize_t i, j, width
    cdef int sub, ins, dele, best, cost
    cdef int subs = 0, dels = 0, inss = 0
    cdef int *ra = NULL
    cdef int *ha = NULL
    cdef int *dp = NULL

    # intern tokens so the inner loop compares ints, not Python strings
    ids = {}
    width = m + 1
    ra = <int *> malloc((n if n > 0 else 1) * sizeof(int))
    ha = <int *> malloc((m if m > 0 else 1) * sizeof(int))
    dp = <int *> malloc((n + 1) * width * sizeof(int))
    if ra == NULL or ha == NULL or dp == NULL:
        free(ra); free(ha); free(dp)
        raise MemoryError()
    try:
        for i in range(n):
            tok = ref[i]
            ra[i] = ids.setdefault(tok, len(ids))
        for j in range(m):
            tok = hyp[j]
            ha[j] = ids.setdefault(tok, len(ids))

        for j in range(width):
            dp[j] = <int> j
        for i in range(1, n + 1):
            dp[i * width] = <int> i
            for j in range(1, width):
                sub = dp[(i - 1) * width + (j - 1)] + (ra[i - 1] != ha[j - 1])
                ins = dp[i * width + (j - 1)] + 1
                dele = dp[(i - 1) * width + j] + 1
                best = sub
                if ins < best:
                    best = ins
                if dele < best:
                    best = dele
                dp[i * width + j] = best

        i = n
        j = m
        while i > 0 or j > 0:
            cost = dp[i * width + j]
            if i > 0 and j > 0 and cost == dp[(i - 1) * width + (j - 1)] + (ra[i - 1] != ha[j - 1]):
                if ra[i - 1] != ha[j - 1]:
                    subs += 1
                i -= 1
                j -= 1
            elif j > 0 and cost == dp[i * width + (j - 1)] + 1:
                inss += 1
                j -= 1
            else:
                dels += 1
                i -= 1
        return subs, dels, inss
    finally:
        free(ra)
        free(ha)
        free(dp)
