# cython: language_level=3
"""Compiled pair counting for Kendall's tau-b."""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef long long _merge_count(double* a, double* buf, Py_ssize_t n) noexcept nogil:
    # bottom-up merge sort of a; returns the number of strict inversions
    cdef long long swaps = 0
    cdef Py_ssize_t width = 1, lo, mid, hi, i, j, k
    cdef double* src = a
    cdef double* dst = buf
    cdef double* tmp
    while width < n:
        lo = 0
        while lo < n:
            mid = lo + width
            if mid > n:
                mid = n
            hi = lo + 2 * width
            if hi > n:
                hi = n
            i = lo
            j = mid
            k = lo
            while i < mid and j < hi:
                if src[j] < src[i]:
                    dst[k] = src[j]
                    swaps += mid - i
                    j += 1
                else:
                    dst[k] = src[i]
                    i += 1
                k += 1
            while i < mid:
                dst[k] = src[i]
                i += 1
                k += 1
            while j < hi:
                dst[k] = src[j]
                j += 1
                k += 1
            lo = hi
        tmp = src
        src = dst
        dst = tmp
        width *= 2
    if src != a:
        for i in range(n):
            a[i] = src[i]
    return swaps


cdef long long _tie_pairs(double* a, Py_ssize_t n) noexcept nogil:
    # a must be sorted
    cdef long long total = 0, run = 1
    cdef Py_ssize_t i
    for i in range(1, n):
        if a[i] == a[i - 1]:
            run += 1
        else:
            total += run * (run - 1) // 2
            run = 1
    total += run * (run - 1) // 2
    return total


def sorted_pair_counts(double[::1] xs, double[::1] ys):
    """Counts for (x, y) already sorted lexicographically by x then y.

    Returns ``(n1, n2, n3, swaps)``: pairs tied in x, pairs tied in y, pairs
    tied in both, and strict y-inversions. ``ys`` is left sorted in place.
    """
    cdef Py_ssize_t n = xs.shape[0], i
    cdef long long n1 = 0, n3 = 0, run_x = 1, run_xy = 1, swaps, n2
    cdef double* buf
    if ys.shape[0] != n:
        raise ValueError("length mismatch")
    if n < 2:
        return 0, 0, 0, 0
    with nogil:
        for i in range(1, n):
            if xs[i] == xs[i - 1]:
                run_x += 1
                if ys[i] == ys[i - 1]:
                    run_xy += 1
                else:
                    n3 += run_xy * (run_xy - 1) // 2
                    run_xy = 1
            else:
                n1 += run_x * (run_x - 1) // 2
                n3 += run_xy * (run_xy - 1) // 2
                run_x = 1
                run_xy = 1
        n1 += run_x * (run_x - 1) // 2
        n3 += run_xy * (run_xy - 1) // 2
    buf = <double*> malloc(n * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            swaps = _merge_count(&ys[0], buf, n)
            n2 = _tie_pairs(&ys[0], n)
    finally:
        free(buf)
    return n1, n2, n3, swaps
