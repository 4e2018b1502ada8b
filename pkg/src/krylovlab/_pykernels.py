"""Pure numpy implementations of the hot kernels."""
from collections import deque

import numpy as np


def sturm_count(diag, off_sq, shift):
    """Number of eigenvalues of the symmetric tridiagonal matrix below shift.

    ``shift`` may be an array; counts are computed for all entries at once.
    """
    shift = np.asarray(shift, dtype=float)
    count = np.zeros(shift.shape, dtype=np.int64)
    tiny = np.finfo(float).tiny
    q = diag[0] - shift
    q = np.where(q == 0.0, -tiny, q)
    count += q < 0
    for i in range(1, diag.size):
        q = diag[i] - shift - off_sq[i - 1] / q
        q = np.where(q == 0.0, -tiny, q)
        count += q < 0
    return count


def tridiag_eigvalsh(diag, off, tol=1e-12):
    """Eigenvalues (ascending) of a real symmetric tridiagonal matrix by bisection."""
    diag = np.asarray(diag, dtype=float)
    off = np.asarray(off, dtype=float)
    n = diag.size
    if n == 0:
        return np.zeros(0)
    off_sq = off * off
    rad = np.zeros(n)
    rad[:-1] += np.abs(off)
    rad[1:] += np.abs(off)
    lo0 = float(np.min(diag - rad))
    hi0 = float(np.max(diag + rad))
    scale = max(abs(lo0), abs(hi0), np.finfo(float).tiny)
    lo = np.full(n, lo0)
    hi = np.full(n, hi0)
    index = np.arange(n)
    while True:
        width = hi - lo
        if np.all(width <= tol * np.maximum(np.abs(lo) + np.abs(hi), scale * 1e-3) * 0.5 + 1e-300):
            break
        mid = 0.5 * (lo + hi)
        below = sturm_count(diag, off_sq, mid)
        move_hi = below > index
        stuck = (mid == lo) | (mid == hi)
        hi = np.where(move_hi, mid, hi)
        lo = np.where(move_hi, lo, mid)
        if np.all(stuck):
            break
    return 0.5 * (lo + hi)


def disk_raster(px, py, eps, x0, y0, h, nx, ny):
    """Cells whose closed square lies within eps of some sample point.

    Cell (i, j) is the square [x0 + i h, x0 + (i+1) h] x [y0 + j h, y0 + (j+1) h].
    """
    mask = np.zeros((nx, ny), dtype=bool)
    reach = int(np.ceil(eps / h)) + 1
    eps2 = eps * eps
    for x, y in zip(np.asarray(px, float), np.asarray(py, float)):
        ci = int(np.floor((x - x0) / h))
        cj = int(np.floor((y - y0) / h))
        i0, i1 = max(ci - reach, 0), min(ci + reach + 1, nx)
        j0, j1 = max(cj - reach, 0), min(cj + reach + 1, ny)
        if i0 >= i1 or j0 >= j1:
            continue
        xl = x0 + np.arange(i0, i1) * h
        yl = y0 + np.arange(j0, j1) * h
        dx = np.maximum(np.maximum(xl - x, 0.0), x - (xl + h))
        dy = np.maximum(np.maximum(yl - y, 0.0), y - (yl + h))
        mask[i0:i1, j0:j1] |= (dx[:, None] ** 2 + dy[None, :] ** 2) <= eps2
    return mask


def flood_outside(blocked):
    """Cells reachable from the border through unblocked cells (4-connected)."""
    blocked = np.asarray(blocked, dtype=bool)
    nx, ny = blocked.shape
    seen = np.zeros_like(blocked)
    queue = deque()
    for i in range(nx):
        for j in (0, ny - 1):
            if not blocked[i, j] and not seen[i, j]:
                seen[i, j] = True
                queue.append((i, j))
    for j in range(ny):
        for i in (0, nx - 1):
            if not blocked[i, j] and not seen[i, j]:
                seen[i, j] = True
                queue.append((i, j))
    while queue:
        i, j = queue.popleft()
        for a, b in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
            if 0 <= a < nx and 0 <= b < ny and not blocked[a, b] and not seen[a, b]:
                seen[a, b] = True
                queue.append((a, b))
    return seen
