# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled half sweep of the envelope iteration.

Must agree bit for bit with ``envelope_kernel.half_sweep_numpy``: same
clamping, same corner order in the multilinear interpolation, same
association of every sum.
"""
from libc.math cimport floor


cdef inline Py_ssize_t _clampi(Py_ssize_t i, Py_ssize_t n) nogil:
    if i < 0:
        return 0
    if i > n - 1:
        return n - 1
    return i


cdef inline double _interp(const double[:, :, :, ::1] s, Py_ssize_t* idx, double* e,
                           Py_ssize_t* n, double sign) nogil:
    cdef Py_ssize_t lo[4]
    cdef double f[4]
    cdef int active[4]
    cdef int nact = 0
    cdef int a, c, bit
    cdef double p, w, acc = 0.0
    cdef Py_ssize_t j[4]
    for a in range(4):
        p = idx[a] + sign * e[a]
        if p < 0.0:
            p = 0.0
        if p > n[a] - 1:
            p = n[a] - 1
        lo[a] = <Py_ssize_t> floor(p)
        if lo[a] >= n[a] - 1:
            lo[a] = n[a] - 1
            f[a] = 0.0
        else:
            f[a] = p - lo[a]
        if f[a] != 0.0:
            active[nact] = a
            nact += 1
    for c in range(1 << nact):
        w = 1.0
        for a in range(4):
            j[a] = lo[a]
        for bit in range(nact):
            a = active[bit]
            if (c >> (nact - 1 - bit)) & 1:
                w = w * f[a]
                j[a] = lo[a] + 1
            else:
                w = w * (1.0 - f[a])
        acc = acc + w * s[j[0], j[1], j[2], j[3]]
    return acc


def half_sweep(double[:, :, :, ::1] u, const double[:, :, :, ::1] snap,
               const double[:, :, :, ::1] obstacle, const long long[::1] nodes,
               const long long[:, ::1] offsets, const double[:, :, :, :, :, ::1] jofs):
    """Update ``u`` at ``nodes`` from ``snap``; return the largest change."""
    cdef Py_ssize_t n[4]
    cdef Py_ssize_t c[4]
    cdef Py_ssize_t idx[4]
    cdef Py_ssize_t jc[4]
    cdef double e[4]
    cdef Py_ssize_t k, m, d, a, flat
    cdef Py_ssize_t ndir = offsets.shape[0]
    cdef double best, va, vb, vc, vd, avg, change, delta
    for a in range(4):
        n[a] = u.shape[a]
        c[a] = jofs.shape[a]
    change = 0.0
    with nogil:
        for k in range(nodes.shape[0]):
            flat = nodes[k]
            idx[3] = flat % n[3]
            flat = flat // n[3]
            idx[2] = flat % n[2]
            flat = flat // n[2]
            idx[1] = flat % n[1]
            idx[0] = flat // n[1]
            for a in range(4):
                jc[a] = idx[a] if c[a] > 1 else 0
            best = obstacle[idx[0], idx[1], idx[2], idx[3]]
            for d in range(ndir):
                va = snap[_clampi(idx[0] + offsets[d, 0], n[0]), _clampi(idx[1] + offsets[d, 1], n[1]),
                          _clampi(idx[2] + offsets[d, 2], n[2]), _clampi(idx[3] + offsets[d, 3], n[3])]
                vb = snap[_clampi(idx[0] - offsets[d, 0], n[0]), _clampi(idx[1] - offsets[d, 1], n[1]),
                          _clampi(idx[2] - offsets[d, 2], n[2]), _clampi(idx[3] - offsets[d, 3], n[3])]
                for a in range(4):
                    e[a] = jofs[jc[0], jc[1], jc[2], jc[3], d, a]
                vc = _interp(snap, idx, e, n, 1.0)
                vd = _interp(snap, idx, e, n, -1.0)
                avg = 0.25 * ((va + vb) + (vc + vd))
                if avg < best:
                    best = avg
            delta = snap[idx[0], idx[1], idx[2], idx[3]] - best
            if delta < 0.0:
                delta = -delta
            if delta > change:
                change = delta
            u[idx[0], idx[1], idx[2], idx[3]] = best
    return change
