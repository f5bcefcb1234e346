# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for the disk median and NL-means filters.

Both take an optional ``uint8`` mask; only masked pixels are computed, the
rest are copied from the input.  Boundaries use reflect-101 indexing.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef inline Py_ssize_t _reflect(Py_ssize_t i, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t period
    if n == 1:
        return 0
    period = 2 * (n - 1)
    i = i % period
    if i < 0:
        i += period
    if i >= n:
        i = period - i
    return i


cdef double _select(double* a, Py_ssize_t n, Py_ssize_t k) noexcept nogil:
    # Wirth's selection; on return a[i] <= a[k] for i < k
    cdef Py_ssize_t lo = 0, hi = n - 1, i, j
    cdef double pivot, t
    while lo < hi:
        pivot = a[k]
        i = lo
        j = hi
        while True:
            while a[i] < pivot:
                i += 1
            while pivot < a[j]:
                j -= 1
            if i <= j:
                t = a[i]; a[i] = a[j]; a[j] = t
                i += 1
                j -= 1
            if i > j:
                break
        if j < k:
            lo = i
        if k < i:
            hi = j
    return a[k]


cdef double _median(double* a, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t k = n // 2, i
    cdef double upper = _select(a, n, k), lower
    if n % 2 == 1:
        return upper
    lower = a[0]
    for i in range(1, k):
        if a[i] > lower:
            lower = a[i]
    return 0.5 * (lower + upper)


def disk_median(const double[:, ::1] img, const Py_ssize_t[::1] dr, const Py_ssize_t[::1] dc,
                bint include_center, const unsigned char[:, ::1] mask=None):
    cdef Py_ssize_t H = img.shape[0], W = img.shape[1], K = dr.shape[0]
    cdef Py_ssize_t r, c, o, rr, cc, n
    cdef bint use_mask = mask is not None
    out_arr = np.array(img, dtype=np.float64, copy=True)
    cdef double[:, ::1] out = out_arr
    cdef double* buf = <double*> malloc((K + 1) * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for r in range(H):
                for c in range(W):
                    if use_mask and not mask[r, c]:
                        continue
                    n = 0
                    if include_center:
                        buf[0] = img[r, c]
                        n = 1
                    for o in range(K):
                        rr = _reflect(r + dr[o], H)
                        cc = _reflect(c + dc[o], W)
                        if rr == r and cc == c and not include_center:
                            continue
                        buf[n] = img[rr, cc]
                        n += 1
                    if n == 0:
                        with gil:
                            raise ValueError("empty neighbourhood; image too small for a donut filter")
                    out[r, c] = _median(buf, n)
    finally:
        free(buf)
    return out_arr


def nl_means(const double[:, ::1] padded, Py_ssize_t H, Py_ssize_t W, double h,
             Py_ssize_t patch, Py_ssize_t window, const unsigned char[:, ::1] mask=None):
    cdef Py_ssize_t n_active = H * W
    if mask is not None:
        n_active = int(np.count_nonzero(np.asarray(mask)))
    # sparse masks: direct patch distances only where needed; otherwise box sums per offset
    if n_active * patch * patch <= 6 * H * W:
        return _nlm_direct(padded, H, W, h, patch, window, mask)
    return _nlm_boxsum(padded, H, W, h, patch, window, mask)


cdef _nlm_direct(const double[:, ::1] padded, Py_ssize_t H, Py_ssize_t W, double h,
                 Py_ssize_t patch, Py_ssize_t window, const unsigned char[:, ::1] mask):
    cdef Py_ssize_t hp = patch // 2, hw = window // 2, off = hp + hw
    cdef Py_ssize_t r, c, dr, dc, pr, pc, r0, c0, r1, c1
    cdef double inv_h2 = 1.0 / (h * h), inv_n = 1.0 / (patch * patch)
    cdef double d, t, w, wsum, acc
    cdef bint use_mask = mask is not None
    out_arr = np.empty((H, W), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    with nogil:
        for r in range(H):
            for c in range(W):
                r0 = r + off
                c0 = c + off
                if use_mask and not mask[r, c]:
                    out[r, c] = padded[r0, c0]
                    continue
                wsum = 0.0
                acc = 0.0
                for dr in range(-hw, hw + 1):
                    for dc in range(-hw, hw + 1):
                        r1 = r0 + dr
                        c1 = c0 + dc
                        d = 0.0
                        for pr in range(-hp, hp + 1):
                            for pc in range(-hp, hp + 1):
                                t = padded[r0 + pr, c0 + pc] - padded[r1 + pr, c1 + pc]
                                d = d + t * t
                        w = exp(-d * inv_n * inv_h2)
                        wsum = wsum + w
                        acc = acc + w * padded[r1, c1]
                out[r, c] = acc / wsum
    return out_arr


cdef _nlm_boxsum(const double[:, ::1] padded, Py_ssize_t H, Py_ssize_t W, double h,
                 Py_ssize_t patch, Py_ssize_t window, const unsigned char[:, ::1] mask):
    cdef Py_ssize_t hp = patch // 2, hw = window // 2, off = hp + hw
    cdef Py_ssize_t IH = H + 2 * hp, IW = W + 2 * hp
    cdef Py_ssize_t r, c, k, dr, dc
    cdef double scale = 1.0 / (patch * patch * h * h)
    cdef double t, run, w
    cdef bint use_mask = mask is not None
    sq_arr = np.empty((IH, IW), dtype=np.float64)
    row_arr = np.empty((IH, W), dtype=np.float64)
    wsum_arr = np.zeros((H, W), dtype=np.float64)
    acc_arr = np.zeros((H, W), dtype=np.float64)
    out_arr = np.empty((H, W), dtype=np.float64)
    cdef double[:, ::1] sq = sq_arr, rows = row_arr, wsum = wsum_arr, acc = acc_arr, out = out_arr
    with nogil:
        for dr in range(-hw, hw + 1):
            for dc in range(-hw, hw + 1):
                for r in range(IH):
                    for c in range(IW):
                        t = padded[hw + r, hw + c] - padded[hw + dr + r, hw + dc + c]
                        sq[r, c] = t * t
                # horizontal then vertical running sums over the patch
                for r in range(IH):
                    run = 0.0
                    for k in range(patch):
                        run = run + sq[r, k]
                    rows[r, 0] = run
                    for c in range(1, W):
                        run = run + sq[r, c + patch - 1] - sq[r, c - 1]
                        rows[r, c] = run
                for c in range(W):
                    run = 0.0
                    for k in range(patch):
                        run = run + rows[k, c]
                    for r in range(H):
                        if r > 0:
                            run = run + rows[r + patch - 1, c] - rows[r - 1, c]
                        if use_mask and not mask[r, c]:
                            continue
                        w = exp(-run * scale)
                        wsum[r, c] = wsum[r, c] + w
                        acc[r, c] = acc[r, c] + w * padded[off + dr + r, off + dc + c]
        for r in range(H):
            for c in range(W):
                if use_mask and not mask[r, c]:
                    out[r, c] = padded[off + r, off + c]
                else:
                    out[r, c] = acc[r, c] / wsum[r, c]
    return out_arr
