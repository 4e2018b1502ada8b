"""Coefficient vectors over declared orthonormal bases.

Every Hilbert-space element is stored as a dense complex array of
coefficients against one of the bases below.  Linear algebra is done in
"orthonormal coordinates": the identity map for the discrete bases and
``sqrt(weight) * sample`` for :class:`SpectralGrid`, so that the plain
Euclidean inner product of coordinates is the Hilbert-space inner product.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BasisMismatchError,
    DomainError,
    EmptyFrameError,
    QuadratureError,
)

GS_DROP_TOL = 1e-12
FRAME_ORTHO_TOL = 1e-10


# ---------------------------------------------------------------------------
# Bases
# ---------------------------------------------------------------------------


class Basis:
    """Common behaviour of the declared bases."""

    kind = "abstract"

    def labels(self, length):
        """Index labels of the first ``length`` coefficients."""
        return np.arange(length)

    def pad(self, coeffs, length):
        coeffs = np.asarray(coeffs, dtype=complex)
        if length < coeffs.size:
            raise ValueError("pad cannot shrink a vector")
        out = np.zeros(length, dtype=complex)
        out[: coeffs.size] = coeffs
        return out

    def common_length(self, *lengths):
        return max(lengths)

    def to_coords(self, coeffs):
        return np.asarray(coeffs, dtype=complex)

    def from_coords(self, coords):
        return np.asarray(coords, dtype=complex)

    def trim(self, coeffs):
        """Drop trailing exact zeros (keeps at least one entry)."""
        nz = np.flatnonzero(coeffs)
        end = nz[-1] + 1 if nz.size else 1
        return coeffs[:end]


@dataclass(frozen=True)
class CanonicalN(Basis):
    """Canonical basis (e_n) of l2(N); coefficient k is e_{k+origin}."""

    origin: int = 1
    kind = "N"

    def labels(self, length):
        return np.arange(self.origin, self.origin + length)


@dataclass(frozen=True)
class CanonicalZ(Basis):
    """Canonical basis of l2(Z) on a symmetric window [-M, M].

    A vector of length 2M+1 stores e_{-M}, ..., e_M; padding is symmetric.
    """

    kind = "Z"

    def labels(self, length):
        half = _half_width(length)
        return np.arange(-half, half + 1)

    def pad(self, coeffs, length):
        coeffs = np.asarray(coeffs, dtype=complex)
        extra = length - coeffs.size
        if extra < 0 or extra % 2:
            raise ValueError("symmetric padding needs an even nonnegative increment")
        return np.pad(coeffs, (extra // 2, extra // 2))

    def common_length(self, *lengths):
        return max(lengths)

    def trim(self, coeffs):
        nz = np.flatnonzero(coeffs)
        if not nz.size:
            return coeffs[(coeffs.size // 2):(coeffs.size // 2) + 1]
        half = _half_width(coeffs.size)
        reach = max(abs(nz[0] - half), abs(nz[-1] - half))
        return coeffs[half - reach: half + reach + 1]


def _half_width(length):
    if length % 2 != 1:
        raise ValueError("l2(Z) windows have odd length 2M+1")
    return length // 2


@dataclass(frozen=True)
class Legendre(Basis):
    """L2(a, b)-orthonormal shifted Legendre polynomials L_0, L_1, ..."""

    a: float = 0.0
    b: float = 1.0
    kind = "legendre"

    def __post_init__(self):
        if not self.a < self.b:
            raise DomainError("Legendre basis needs a < b")


@dataclass(frozen=True)
class FourierExp(Basis):
    """Exponentials exp(2 pi i m (x-a)/(b-a)) / sqrt(b-a) on [a, b].

    Coefficient k carries mode m = 0, 1, -1, 2, -2, ... so that the first
    N coefficients form the symmetric (or nearly symmetric) mode window.
    """

    a: float = 0.0
    b: float = 1.0
    kind = "fourier"

    def __post_init__(self):
        if not self.a < self.b:
            raise DomainError("Fourier basis needs a < b")

    def labels(self, length):
        return fourier_modes(length)


def fourier_modes(length):
    k = np.arange(length)
    return np.where(k % 2 == 1, (k + 1) // 2, -(k // 2))


def fourier_position(mode):
    """Inverse of :func:`fourier_modes` for a single mode."""
    return 2 * mode - 1 if mode > 0 else -2 * mode


@dataclass(frozen=True, eq=False)
class SpectralGrid(Basis):
    """Samples on strictly increasing real nodes with positive weights."""

    nodes: np.ndarray = field(default_factory=lambda: np.zeros(0))
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    kind = "grid"

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        weights = np.array(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape or nodes.size == 0:
            raise DomainError("grid needs matching nonempty 1-D nodes and weights")
        if np.any(np.diff(nodes) <= 0):
            raise DomainError("grid nodes must be strictly increasing")
        if np.any(weights <= 0):
            raise DomainError("grid weights must be positive")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "_sqrt_w", np.sqrt(weights))

    def __eq__(self, other):
        return (
            isinstance(other, SpectralGrid)
            and (other is self or (np.array_equal(self.nodes, other.nodes)
                                   and np.array_equal(self.weights, other.weights)))
        )

    def __hash__(self):
        return hash((self.nodes.tobytes(), self.weights.tobytes()))

    def labels(self, length):
        return self.nodes[:length]

    def pad(self, coeffs, length):
        if length != self.nodes.size:
            raise BasisMismatchError("grid vectors have a fixed length")
        return np.asarray(coeffs, dtype=complex)

    def trim(self, coeffs):
        return coeffs

    def to_coords(self, coeffs):
        return np.asarray(coeffs, dtype=complex) * self._sqrt_w

    def from_coords(self, coords):
        return np.asarray(coords, dtype=complex) / self._sqrt_w


@dataclass(frozen=True)
class DirectSumBasis(Basis):
    """Concatenation of a fixed-length left block and a growable right block."""

    left: Basis = None
    right: Basis = None
    left_len: int = 0
    kind = "sum"

    def split(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=complex)
        return coeffs[: self.left_len], coeffs[self.left_len:]

    def join(self, left, right):
        left = np.asarray(left, dtype=complex)
        if left.size > self.left_len:
            raise ValueError("left block longer than its declared length")
        return np.concatenate([self.left.pad(left, self.left_len), right])

    def pad(self, coeffs, length):
        lpart, rpart = self.split(coeffs)
        return self.join(lpart, self.right.pad(rpart, length - self.left_len))

    def trim(self, coeffs):
        lpart, rpart = self.split(coeffs)
        return self.join(lpart, self.right.trim(rpart) if rpart.size else rpart)

    def to_coords(self, coeffs):
        lpart, rpart = self.split(coeffs)
        return np.concatenate([self.left.to_coords(lpart), self.right.to_coords(rpart)])

    def from_coords(self, coords):
        lpart, rpart = self.split(coords)
        return np.concatenate([self.left.from_coords(lpart), self.right.from_coords(rpart)])


# ---------------------------------------------------------------------------
# Vectors
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CoeffVector:
    """Immutable complex coefficient vector against ``basis``.

    Coefficients past ``active_len`` are zero by convention.
    """

    basis: Basis
    coeffs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.coeffs, dtype=complex).ravel()
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    @property
    def active_len(self):
        return self.coeffs.size

    def padded(self, length):
        return self.basis.pad(self.coeffs, length)

    def coords(self, length=None):
        arr = self.coeffs if length is None else self.padded(length)
        return self.basis.to_coords(arr)

    def norm(self):
        return float(np.linalg.norm(self.coords()))

    def trimmed(self):
        return CoeffVector(self.basis, self.basis.trim(self.coeffs))

    def _binary(self, other, fn):
        _check_same_basis(self, other)
        n = self.basis.common_length(self.active_len, other.active_len)
        return CoeffVector(self.basis, fn(self.padded(n), other.padded(n)))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        return CoeffVector(self.basis, self.coeffs * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return CoeffVector(self.basis, self.coeffs / scalar)

    def __neg__(self):
        return CoeffVector(self.basis, -self.coeffs)

    def __repr__(self):
        return f"CoeffVector({self.basis!r}, len={self.active_len})"


def unit_vector(basis, label, length=None):
    """Basis vector with index label ``label`` (e.g. e_3 for CanonicalN)."""
    if isinstance(basis, CanonicalN):
        pos = label - basis.origin
        length = max(length or 0, pos + 1)
    elif isinstance(basis, CanonicalZ):
        half = max((length or 1) // 2, abs(label))
        length, pos = 2 * half + 1, label + half
    elif isinstance(basis, FourierExp):
        pos = fourier_position(label)
        length = max(length or 0, pos + 1)
    elif isinstance(basis, Legendre):
        pos = label
        length = max(length or 0, pos + 1)
    else:
        raise BasisMismatchError(f"no unit vectors for {basis!r}")
    if pos < 0:
        raise DomainError(f"label {label} below the basis origin")
    out = np.zeros(length, dtype=complex)
    out[pos] = 1.0
    return CoeffVector(basis, out)


def zero_vector(basis, length=1):
    if isinstance(basis, SpectralGrid):
        length = basis.nodes.size
    return CoeffVector(basis, np.zeros(length, dtype=complex))


def _check_same_basis(u, v):
    if u.basis != v.basis:
        raise BasisMismatchError(f"basis mismatch: {u.basis!r} vs {v.basis!r}")


def inner(u, v):
    """<u, v>, antilinear in the first slot."""
    _check_same_basis(u, v)
    n = u.basis.common_length(u.active_len, v.active_len)
    return complex(np.vdot(u.coords(n), v.coords(n)))


def norm(v):
    return v.norm()


# ---------------------------------------------------------------------------
# Frames
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SubspaceFrame:
    """Orthonormal frame stored as a matrix of orthonormal coordinates.

    ``matrix`` has shape (ambient_dim, dim); column j holds the coordinates
    of the j-th frame vector.
    """

    basis: Basis
    matrix: np.ndarray
    check: bool = True

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        if mat.ndim != 2:
            raise ValueError("frame matrix must be 2-D")
        if mat.shape[1] > mat.shape[0]:
            raise ValueError("frame dimension exceeds ambient dimension")
        if self.check and mat.shape[1]:
            gram = mat.conj().T @ mat
            err = np.max(np.abs(gram - np.eye(mat.shape[1])))
            if err > FRAME_ORTHO_TOL:
                raise ValueError(f"frame columns not orthonormal (err {err:.2e})")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def ambient_dim(self):
        return self.matrix.shape[0]

    @property
    def dim(self):
        return self.matrix.shape[1]

    @property
    def columns(self):
        return [CoeffVector(self.basis, self.basis.from_coords(c)) for c in self.matrix.T]

    def padded_matrix(self, length):
        """Frame coordinates extended to ``length`` ambient coordinates."""
        if length == self.ambient_dim:
            return self.matrix
        cols = [self.basis.to_coords(self.basis.pad(self.basis.from_coords(c), length))
                for c in self.matrix.T]
        if not cols:
            return np.zeros((length, 0), dtype=complex)
        return np.column_stack(cols)

    @classmethod
    def empty(cls, basis, ambient_dim=1):
        return cls(basis, np.zeros((ambient_dim, 0), dtype=complex))

    @classmethod
    def from_vectors(cls, vs, tol=GS_DROP_TOL):
        frame, _ = gram_schmidt(vs, tol)
        return frame


def _stack_coords(vs):
    basis = vs[0].basis
    for v in vs[1:]:
        _check_same_basis(vs[0], v)
    n = basis.common_length(*(v.active_len for v in vs))
    return basis, np.column_stack([v.coords(n) for v in vs])


def orthonormalize_columns(mat, tol=GS_DROP_TOL):
    """Modified Gram-Schmidt with one reorthogonalization pass.

    Columns whose residual falls below ``tol`` times their input norm are
    dropped.  Returns the orthonormal matrix (same row count).
    """
    mat = np.asarray(mat, dtype=complex)
    kept = []
    for j in range(mat.shape[1]):
        w = mat[:, j].copy()
        size = np.linalg.norm(w)
        if size == 0.0:
            continue
        for _ in range(2):
            for q in kept:
                w -= np.vdot(q, w) * q
        rest = np.linalg.norm(w)
        if rest < tol * size:
            continue
        kept.append(w / rest)
    if not kept:
        return np.zeros((mat.shape[0], 0), dtype=complex)
    return np.column_stack(kept)


def gram_schmidt(vs, tol=GS_DROP_TOL):
    """Orthonormalize ``vs``; returns (frame, rank)."""
    if not vs:
        raise ValueError("gram_schmidt needs a nonempty list")
    basis, mat = _stack_coords(list(vs))
    q = orthonormalize_columns(mat, tol)
    return SubspaceFrame(basis, q), q.shape[1]


def project(frame, v):
    """Orthogonal projection of ``v`` onto the span of ``frame``."""
    if frame.basis != v.basis:
        raise BasisMismatchError("frame and vector bases differ")
    n = frame.basis.common_length(frame.ambient_dim, v.active_len)
    q = frame.padded_matrix(n)
    c = v.coords(n)
    return CoeffVector(v.basis, v.basis.from_coords(q @ (q.conj().T @ c)))


def _aligned(U, V):
    if U.basis != V.basis:
        raise BasisMismatchError("frames live in different bases")
    n = U.basis.common_length(U.ambient_dim, V.ambient_dim)
    return U.padded_matrix(n), V.padded_matrix(n)


def principal_angles(U, V):
    """Principal angles between span U and span V, ascending.

    Cosines and sines are both computed so that small and large angles are
    accurate; the count is min(dim U, dim V).
    """
    if U.dim == 0 or V.dim == 0:
        raise EmptyFrameError("principal angles need nonempty frames")
    a, b = _aligned(U, V)
    if a.shape[1] > b.shape[1]:
        a, b = b, a
    cross = a.conj().T @ b
    cos = np.clip(np.linalg.svd(cross, compute_uv=False), 0.0, 1.0)
    cos = np.sort(cos)[::-1]
    rest = a - b @ cross.conj().T
    sin = np.clip(np.linalg.svd(rest, compute_uv=False), 0.0, 1.0)
    sin = np.sort(sin)
    angles = np.where(sin < np.sqrt(0.5), np.arcsin(sin), np.arccos(cos))
    return np.sort(angles)


# ---------------------------------------------------------------------------
# Spectral measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpectralMeasure:
    """Finite atomic measure: atoms (lambda_k, w_k) with w_k >= 0."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points).ravel()
        wts = np.array(self.weights, dtype=float).ravel()
        if pts.shape != wts.shape:
            raise ValueError("points and weights must match")
        if np.any(wts < 0):
            raise ValueError("weights must be nonnegative")
        pts.setflags(write=False)
        wts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    @property
    def atoms(self):
        return list(zip(self.points.tolist(), self.weights.tolist()))

    @property
    def total_mass(self):
        return float(np.sum(self.weights))

    def integrate(self, fn):
        """Integral of fn(lambda) against the measure."""
        return np.sum(np.asarray(fn(self.points)) * self.weights)

    def reweighted(self, power):
        """lambda^power times the measure; atoms at 0 are dropped for power < 0."""
        pts = self.points
        keep = np.ones(pts.size, dtype=bool) if power >= 0 else pts != 0
        lam = np.abs(pts[keep]).astype(float)
        return SpectralMeasure(pts[keep], self.weights[keep] * lam ** power)


# ---------------------------------------------------------------------------
# Quadrature and Legendre polynomials
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=64)
def _gauss_unit(order):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(order, a=0.0, b=1.0):
    """Gauss-Legendre nodes and weights on [a, b]."""
    x, w = _gauss_unit(int(order))
    half = 0.5 * (b - a)
    return half * x + 0.5 * (a + b), half * w


def composite_gauss(a, b, panels, order=16):
    """Composite Gauss rule with ``panels`` equal panels on [a, b]."""
    edges = np.linspace(a, b, panels + 1)
    x, w = _gauss_unit(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def integrate(fn, a, b, start=32, rtol=1e-10, max_order=1 << 13):
    """Integrate by Gauss-Legendre, doubling the order until stable.

    Stops once doubling changes the value by less than ``rtol`` times
    max(1, |value|).
    """
    order = start
    x, w = gauss_legendre(order, a, b)
    prev = np.sum(w * fn(x))
    while order < max_order:
        order *= 2
        x, w = gauss_legendre(order, a, b)
        val = np.sum(w * fn(x))
        if abs(val - prev) < rtol * max(1.0, abs(val)):
            return val
        prev = val
    raise QuadratureError(f"no convergence up to order {max_order}")


def legendre_table(kmax, interval, x, check=True):
    """Orthonormal shifted Legendre values L_0..L_kmax at points x.

    Returns an array of shape (kmax+1, len(x)).
    """
    a, b = interval
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if check:
        span = b - a
        if np.any(x < a - 1e-14 * span) or np.any(x > b + 1e-14 * span):
            raise DomainError(f"points outside [{a}, {b}]")
    t = np.clip((2.0 * x - a - b) / (b - a), -1.0, 1.0)
    table = np.empty((kmax + 1, t.size))
    p_prev = np.ones_like(t)
    table[0] = p_prev
    if kmax >= 1:
        p_cur = t.copy()
        table[1] = p_cur
        for k in range(1, kmax):
            p_next = ((2 * k + 1) * t * p_cur - k * p_prev) / (k + 1)
            p_prev, p_cur = p_cur, p_next
            table[k + 1] = p_cur
    scale = np.sqrt((2.0 * np.arange(kmax + 1) + 1.0) / (b - a))
    return table * scale[:, None]


def legendre_eval(k, interval, x):
    """k-th L2(a,b)-orthonormal shifted Legendre polynomial at x."""
    if k < 0:
        raise DomainError("degree must be nonnegative")
    a, b = interval
    if not a < b:
        raise DomainError("interval needs a < b")
    vals = legendre_table(k, interval, x)[k]
    return float(vals[0]) if np.ndim(x) == 0 else vals


def fourier_table(length, interval, x):
    """Values of the first ``length`` Fourier basis functions at x."""
    a, b = interval
    x = np.atleast_1d(np.asarray(x, dtype=float))
    modes = fourier_modes(length)
    phase = 2j * np.pi * np.outer(modes, (x - a) / (b - a))
    return np.exp(phase) / np.sqrt(b - a)


def basis_table(basis, length, x):
    if isinstance(basis, Legendre):
        return legendre_table(length - 1, (basis.a, basis.b), x)
    if isinstance(basis, FourierExp):
        return fourier_table(length, (basis.a, basis.b), x)
    raise BasisMismatchError(f"{basis!r} is not a function basis")


def expand(basis, fn, length, order=None):
    """Coefficients <b_k, fn> of a function against a function basis."""
    if order is None:
        order = max(2 * length + 32, 64)
    x, w = gauss_legendre(order, basis.a, basis.b)
    table = basis_table(basis, length, x)
    vals = np.asarray(fn(x), dtype=complex)
    return CoeffVector(basis, table.conj() @ (w * vals))


def evaluate(v, x):
    """Point values of a function-basis vector."""
    return basis_table(v.basis, v.active_len, x).T @ v.coeffs


def sample(grid, fn):
    """Vector of samples of ``fn`` on a spectral grid."""
    return CoeffVector(grid, np.asarray(fn(grid.nodes), dtype=complex))
