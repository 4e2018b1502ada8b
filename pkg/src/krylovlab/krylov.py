"""Krylov and rational Krylov subspaces, and truncation-level diagnostics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import linalg

from .core import CoeffVector, SpectralMeasure, SubspaceFrame, gram_schmidt, orthonormalize_columns
from .errors import CapabilityError, DivergenceError, DomainError, SpectralPointError, WindowOverflowError
from .operators import (
    DEFAULT_WINDOW_CAP,
    OVERFLOW_GUARD,
    _check_basis,
    _keep_slice,
    _extra_slice,
    apply,
)

BREAKDOWN_TOL = 1e-12
MERGE_TOL = 1e-12


class WindowedOperator:
    """Applies an operator on a fixed window of coordinates.

    The window is chosen large enough for the planned number of applications,
    so no information is lost; leaving it raises instead of truncating.
    """

    def __init__(self, op, length):
        self.op = op
        self.basis = op.basis
        self.length = int(length)

    def coords(self, v):
        return self.basis.to_coords(self.basis.pad(v.coeffs, self.length))

    def vector(self, c):
        return CoeffVector(self.basis, self.basis.trim(self.basis.from_coords(c)))

    def matvec(self, c, adjoint=False):
        x = self.basis.from_coords(c)
        out = np.asarray(self.op.act_adjoint(x) if adjoint else self.op.act(x), dtype=complex)
        if out.size != self.length:
            if out.size < self.length:
                out = self.basis.pad(out, self.length)
            else:
                extra = out[_extra_slice(self.basis, self.length, out.size)]
                if np.any(extra):
                    raise WindowOverflowError("operator image left the working window")
                out = out[_keep_slice(self.basis, self.length, out.size)]
        res = self.basis.to_coords(out)
        if not np.all(np.isfinite(res)) or np.linalg.norm(res) > OVERFLOW_GUARD:
            raise DivergenceError("operator image above the overflow guard")
        return res


def working_window(op, g, steps, window=None, cap=DEFAULT_WINDOW_CAP):
    """Window length that holds g and ``steps`` applications of op."""
    need = op.ambient_length(g.active_len, steps)
    if window is not None:
        return max(int(window), g.active_len)
    if hasattr(op, "fourier_window"):
        need = max(need, op.fourier_window)
    if need > max(cap, g.active_len):
        raise WindowOverflowError(f"window {need} exceeds cap {cap}")
    return need


@dataclass(frozen=True, eq=False)
class KrylovBasis:
    op_id: str
    g: CoeffVector
    N: int
    frame: SubspaceFrame
    hess: np.ndarray
    breakdown_at: int | None
    next_vector: np.ndarray | None
    window: int

    @property
    def rank(self):
        return self.frame.dim

    def arnoldi_matrix(self):
        """Q_{rank+1} as coordinates (last column zero after breakdown)."""
        extra = self.next_vector if self.next_vector is not None else np.zeros(self.window)
        return np.column_stack([self.frame.matrix, extra])


def build_krylov(op, g, N, tol=BREAKDOWN_TOL, window=None, cap=DEFAULT_WINDOW_CAP):
    """Arnoldi with modified Gram-Schmidt and one reorthogonalization pass."""
    _check_basis(op, g)
    if N < 1:
        raise DomainError("Krylov order must be at least 1")
    length = working_window(op, g, N, window, cap)
    wop = WindowedOperator(op, length)
    start = wop.coords(g)
    size = np.linalg.norm(start)
    if size == 0.0:
        return KrylovBasis(op.op_id, g, N, SubspaceFrame.empty(g.basis, length),
                           np.zeros((1, 0), dtype=complex), 1, None, length)
    Q = np.zeros((length, N + 1), dtype=complex)
    H = np.zeros((N + 1, N), dtype=complex)
    Q[:, 0] = start / size
    rank = N
    next_vector = None
    breakdown_at = None
    for j in range(N):
        w = wop.matvec(Q[:, j])
        image = np.linalg.norm(w)
        for _ in range(2):
            for i in range(j + 1):
                h = np.vdot(Q[:, i], w)
                H[i, j] += h
                w -= h * Q[:, i]
        beta = np.linalg.norm(w)
        if image == 0.0 or beta <= tol * image:
            if j + 1 < N:
                rank = j + 1
                breakdown_at = rank + 1
            break
        H[j + 1, j] = beta
        Q[:, j + 1] = w / beta
        if j + 1 == N:
            next_vector = Q[:, N].copy()
    frame = SubspaceFrame(g.basis, Q[:, :rank], check=False)
    return KrylovBasis(op.op_id, g, N, frame, H[: rank + 1, :rank].copy(), breakdown_at,
                       next_vector, length)


def arnoldi_residual(op, kb):
    """max |A Q_N - Q_{N+1} Hbar_N| on the working window."""
    if kb.rank == 0:
        return 0.0
    wop = WindowedOperator(op, kb.window)
    AQ = np.column_stack([wop.matvec(c) for c in kb.frame.matrix.T])
    return float(np.max(np.abs(AQ - kb.arnoldi_matrix() @ kb.hess)))


def geher_vector(op, g, alpha, n, cap=DEFAULT_WINDOW_CAP):
    """(1 - alpha A)^n g."""
    bound = op.norm_bound()
    if not np.isfinite(bound):
        raise CapabilityError("needs a bounded operator")
    if alpha != 0 and abs(alpha) * bound >= 1.0:
        raise DomainError(f"|alpha| must be below 1/||A|| = {1.0 / bound:g}")
    if n < 0:
        raise DomainError("n must be nonnegative")
    out = g
    for _ in range(n):
        out = out - alpha * apply(op, out, cap)
    return out


def spectral_measure_of(op, g):
    """Atoms (eigenvalue, |component|^2) with coincident eigenvalues merged."""
    if not op.is_spectral:
        raise CapabilityError(f"{op.op_id} has no spectral coordinates")
    _check_basis(op, g)
    lam = np.asarray(op.diagonal_values(g.active_len))
    mass = np.abs(g.coords()) ** 2
    keep = mass > 0
    lam, mass = lam[keep], mass[keep]
    if lam.size == 0:
        return SpectralMeasure(np.zeros(0), np.zeros(0))
    order = np.lexsort((lam.imag, lam.real))
    lam, mass = lam[order], mass[order]
    pts, wts = [lam[0]], [mass[0]]
    for value, weight in zip(lam[1:], mass[1:]):
        if abs(value - pts[-1]) <= MERGE_TOL:
            wts[-1] += weight
        else:
            pts.append(value)
            wts.append(weight)
    pts = np.asarray(pts)
    if np.all(pts.imag == 0):
        pts = pts.real
    return SpectralMeasure(pts, np.asarray(wts))


def apply_function(op, g, phi):
    """phi(A) g for a diagonal operator."""
    if not op.is_spectral:
        raise CapabilityError(f"{op.op_id} has no spectral coordinates")
    _check_basis(op, g)
    lam = np.asarray(op.diagonal_values(g.active_len))
    active = g.coeffs != 0
    vals = np.zeros(lam.shape, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        vals[active] = np.asarray(phi(lam[active]), dtype=complex)
    if not np.all(np.isfinite(vals[active])):
        raise SpectralPointError("function is singular at an atom of the measure")
    return CoeffVector(g.basis, vals * g.coeffs)


def _ambient(op, kb, ambient_M):
    if ambient_M < kb.frame.ambient_dim:
        raise DomainError("ambient window smaller than the Krylov window")
    basis = kb.frame.basis
    M = int(ambient_M)
    Q = kb.frame.padded_matrix(M)
    if Q.shape[1]:
        perp = linalg.null_space(Q.conj().T)
    else:
        perp = np.eye(M, dtype=complex)
    grown = M + op.growth
    wop = WindowedOperator(op, grown)
    lift = lambda c: basis.to_coords(basis.pad(basis.from_coords(c), grown))
    Qg = np.column_stack([lift(c) for c in Q.T]) if Q.shape[1] else np.zeros((grown, 0))
    return Q, perp, Qg, wop, lift


class IntersectionReport(NamedTuple):
    max_cos: float
    witness: CoeffVector | None
    empty_complement: bool
    ambient_M: int


def krylov_intersection_estimate(op, kb, ambient_M):
    """Largest cosine between K_N and A(K_N^perp) inside the M-window."""
    Q, perp, Qg, wop, lift = _ambient(op, kb, ambient_M)
    if perp.shape[1] == 0 or Q.shape[1] == 0:
        return IntersectionReport(0.0, None, perp.shape[1] == 0, int(ambient_M))
    image = np.column_stack([wop.matvec(lift(c)) for c in perp.T])
    image_basis = _range_basis(image)
    if image_basis.shape[1] == 0:
        return IntersectionReport(0.0, None, False, int(ambient_M))
    u, s, _ = np.linalg.svd(Qg.conj().T @ image_basis)
    witness_coords = Qg @ u[:, 0]
    basis = kb.frame.basis
    witness = CoeffVector(basis, basis.from_coords(witness_coords))
    return IntersectionReport(float(min(s[0], 1.0)), witness, False, int(ambient_M))


def _range_basis(mat, rtol=1e-12):
    if mat.size == 0:
        return mat
    u, s, _ = np.linalg.svd(mat, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return u[:, :0]
    return u[:, s > rtol * s[0]]


class ReducibilityDefect(NamedTuple):
    out_defect: float
    in_defect: float


def reducibility_defect(op, kb, ambient_M):
    """Norms of (1-P)AP and PA(1-P) for P the projection onto K_N, M-window."""
    Q, perp, Qg, wop, lift = _ambient(op, kb, ambient_M)
    if Q.shape[1] == 0:
        return ReducibilityDefect(0.0, 0.0)
    AQ = np.column_stack([wop.matvec(lift(c)) for c in Q.T])
    out = AQ - Qg @ (Qg.conj().T @ AQ)
    out_defect = float(np.linalg.norm(out, 2))
    if perp.shape[1] == 0:
        return ReducibilityDefect(out_defect, 0.0)
    Aperp = np.column_stack([wop.matvec(lift(c)) for c in perp.T])
    in_defect = float(np.linalg.norm(Qg.conj().T @ Aperp, 2))
    return ReducibilityDefect(out_defect, in_defect)


def boundary_leakage(kb):
    """|h_{N+1,N}|: the part of A K_N that leaves K_N."""
    if kb.rank == 0 or kb.hess.shape[0] <= kb.rank:
        return 0.0
    return float(abs(kb.hess[kb.rank, kb.rank - 1]))


@dataclass(frozen=True, eq=False)
class RationalKrylovBasis:
    shifts: tuple
    frame: SubspaceFrame
    vectors: tuple
    residuals: tuple


def build_rational_krylov(op, g, shifts, N, resolvent_tol=1e-8):
    """Span of g and successive resolvent images (A - xi_m)^{-1} ... g."""
    _check_basis(op, g)
    if not op.caps.has_resolvent:
        raise CapabilityError(f"{op.op_id}: no resolvent")
    if N < 1:
        raise DomainError("order must be at least 1")
    shifts = list(np.atleast_1d(shifts))
    if len(shifts) == 1:
        shifts = shifts * max(N - 1, 1)
    if len(shifts) < N - 1:
        raise DomainError("need N - 1 shifts")
    vectors = [g]
    residuals = []
    for m in range(N - 1):
        xi = shifts[m]
        prev = vectors[-1]
        w = op.resolvent(xi, prev)
        resid = (apply(op, w) - xi * w - prev).norm()
        if resid > resolvent_tol * max(1.0, prev.norm()):
            raise SpectralPointError(f"resolvent solve at {xi} has residual {resid:.3g}")
        residuals.append(resid)
        vectors.append(w)
    frame, _ = gram_schmidt(vectors)
    return RationalKrylovBasis(tuple(shifts[: N - 1]), frame, tuple(vectors), tuple(residuals))


def distance_to_span(frame, x):
    """||x - P x|| for the orthogonal projection onto the frame."""
    from .core import project
    return (x - project(frame, x)).norm()


class CoreDefect(NamedTuple):
    graph_gap: float
    ratio: float


def krylov_core_defect(op, g, x, N):
    """Graph-norm gap of the best plain-norm Krylov approximant to x."""
    if not op.is_spectral:
        raise CapabilityError("the Krylov core check needs a diagonal operator")
    _check_basis(op, g)
    length = max(g.active_len, x.active_len)
    lam = np.asarray(op.diagonal_values(length))
    xc = x.coords(length)
    with np.errstate(over="ignore", invalid="ignore"):
        ax = np.linalg.norm(lam * xc)
    if not np.isfinite(ax) or ax > OVERFLOW_GUARD:
        raise DivergenceError("x is outside the operator domain on this window")
    kb = build_krylov(op, g, N, window=length)
    Q = kb.frame.padded_matrix(length)
    d = Q @ (Q.conj().T @ xc) - xc
    plain = np.linalg.norm(d)
    image = np.linalg.norm(lam * d)
    gap = float(np.sqrt(plain ** 2 + image ** 2))
    ratio = float(image / plain) if plain > 0 else 0.0
    return CoreDefect(gap, ratio)
