# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels; same contracts as _pykernels."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, floor, ceil, fmax, fmin

cnp.import_array()


cdef inline long _count(const double[:] d, const double[:] e2, double x) noexcept nogil:
    cdef long n = d.shape[0], i, c = 0
    cdef double q = d[0] - x
    cdef double tiny = 2.2250738585072014e-308
    if q == 0.0:
        q = -tiny
    if q < 0.0:
        c += 1
    for i in range(1, n):
        q = d[i] - x - e2[i - 1] / q
        if q == 0.0:
            q = -tiny
        if q < 0.0:
            c += 1
    return c


def sturm_count(diag, off_sq, shift):
    cdef double[:] d = np.ascontiguousarray(diag, dtype=np.float64)
    cdef double[:] e2 = np.ascontiguousarray(off_sq, dtype=np.float64)
    s = np.atleast_1d(np.asarray(shift, dtype=np.float64))
    cdef double[:] sv = np.ascontiguousarray(s.ravel())
    out = np.empty(sv.shape[0], dtype=np.int64)
    cdef long long[:] ov = out
    cdef Py_ssize_t k
    for k in range(sv.shape[0]):
        ov[k] = _count(d, e2, sv[k])
    return out.reshape(s.shape) if np.ndim(shift) else int(out[0])


def tridiag_eigvalsh(diag, off, double tol=1e-12):
    cdef double[:] d = np.ascontiguousarray(diag, dtype=np.float64)
    offa = np.ascontiguousarray(off, dtype=np.float64)
    cdef Py_ssize_t n = d.shape[0]
    if n == 0:
        return np.zeros(0)
    cdef double[:] e2 = offa * offa
    cdef double[:] eo = np.abs(offa)
    cdef double lo0 = 1e308, hi0 = -1e308, r
    cdef Py_ssize_t i, k
    for i in range(n):
        r = 0.0
        if i > 0:
            r += eo[i - 1]
        if i < n - 1:
            r += eo[i]
        lo0 = fmin(lo0, d[i] - r)
        hi0 = fmax(hi0, d[i] + r)
    cdef double scale = fmax(fmax(fabs(lo0), fabs(hi0)), 2.2250738585072014e-308)
    out = np.empty(n)
    cdef double[:] ov = out
    cdef double lo, hi, mid
    with nogil:
        for k in range(n):
            lo = lo0
            hi = hi0
            while hi - lo > tol * fmax(fabs(lo) + fabs(hi), scale * 1e-3) * 0.5 + 1e-300:
                mid = 0.5 * (lo + hi)
                if mid == lo or mid == hi:
                    break
                if _count(d, e2, mid) > k:
                    hi = mid
                else:
                    lo = mid
            ov[k] = 0.5 * (lo + hi)
    return out


def disk_raster(px, py, double eps, double x0, double y0, double h, Py_ssize_t nx, Py_ssize_t ny):
    cdef double[:] xs = np.ascontiguousarray(px, dtype=np.float64)
    cdef double[:] ys = np.ascontiguousarray(py, dtype=np.float64)
    mask = np.zeros((nx, ny), dtype=np.uint8)
    cdef unsigned char[:, :] m = mask
    cdef Py_ssize_t reach = <Py_ssize_t>ceil(eps / h) + 1
    cdef double eps2 = eps * eps, x, y, xl, yl, dx, dy
    cdef Py_ssize_t s, i, j, ci, cj, i0, i1, j0, j1
    with nogil:
        for s in range(xs.shape[0]):
            x = xs[s]
            y = ys[s]
            ci = <Py_ssize_t>floor((x - x0) / h)
            cj = <Py_ssize_t>floor((y - y0) / h)
            i0 = ci - reach if ci - reach > 0 else 0
            i1 = ci + reach + 1 if ci + reach + 1 < nx else nx
            j0 = cj - reach if cj - reach > 0 else 0
            j1 = cj + reach + 1 if cj + reach + 1 < ny else ny
            for i in range(i0, i1):
                xl = x0 + i * h
                dx = fmax(fmax(xl - x, 0.0), x - (xl + h))
                for j in range(j0, j1):
                    yl = y0 + j * h
                    dy = fmax(fmax(yl - y, 0.0), y - (yl + h))
                    if dx * dx + dy * dy <= eps2:
                        m[i, j] = 1
    return mask.astype(bool)


def flood_outside(blocked):
    cdef unsigned char[:, :] b = np.ascontiguousarray(blocked, dtype=np.uint8)
    cdef Py_ssize_t nx = b.shape[0], ny = b.shape[1]
    seen = np.zeros((nx, ny), dtype=np.uint8)
    cdef unsigned char[:, :] sv = seen
    stack = np.empty(2 * nx * ny + 8, dtype=np.int64)
    cdef long long[:] st = stack
    cdef Py_ssize_t top = 0, i, j, a, c, t
    cdef long long code
    with nogil:
        for i in range(nx):
            for j in range(ny):
                if (i == 0 or j == 0 or i == nx - 1 or j == ny - 1) and b[i, j] == 0 and sv[i, j] == 0:
                    sv[i, j] = 1
                    st[top] = i * ny + j
                    top += 1
        while top > 0:
            top -= 1
            code = st[top]
            i = code // ny
            j = code % ny
            for t in range(4):
                a = i
                c = j
                if t == 0:
                    a = i + 1
                elif t == 1:
                    a = i - 1
                elif t == 2:
                    c = j + 1
                else:
                    c = j - 1
                if a >= 0 and a < nx and c >= 0 and c < ny and b[a, c] == 0 and sv[a, c] == 0:
                    sv[a, c] = 1
                    st[top] = a * ny + c
                    top += 1
    return seen.astype(bool)
