"""Gap distances between subspaces: the ordinary gap, the sphere distance and
the weak gap between unit balls."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    CanonicalN,
    CanonicalZ,
    FourierExp,
    Legendre,
    SubspaceFrame,
    _aligned,
)
from .errors import CapabilityError, ConfigError
from .krylov import build_krylov

DEFAULT_SAMPLES = 512
DEFAULT_ITERS = 200
ESTIMATOR_TOL = 1e-6


def _empty(frame):
    return frame is None or frame.dim == 0


def gap_delta(U, V):
    """delta(U, V) = sup over unit u in U of dist(u, V) = ||(1 - P_V) P_U||."""
    if _empty(U):
        return 0.0
    if _empty(V):
        return 1.0
    a, b = _aligned(U, V)
    rest = a - b @ (b.conj().T @ a)
    return float(min(np.linalg.norm(rest, 2), 1.0))


def gap_d(U, V):
    """d(U, V) = sup over unit u in U of dist(u, unit sphere of V)."""
    if _empty(U):
        return 0.0
    if _empty(V):
        return 2.0
    if U.dim > V.dim:
        return float(np.sqrt(2.0))
    a, b = _aligned(U, V)
    cos_min = np.linalg.svd(b.conj().T @ a, compute_uv=False).min()
    return float(np.sqrt(max(2.0 - 2.0 * min(cos_min, 1.0), 0.0)))


def gap_delta_hat(U, V):
    return max(gap_delta(U, V), gap_delta(V, U))


def gap_dhat(U, V):
    return max(gap_d(U, V), gap_d(V, U))


# ---------------------------------------------------------------------------
# Weak norm and weak gap
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeakNormSpec:
    """Test family xi_n = n-th basis vector, weights 2^-n, first M terms."""

    M: int = 64
    tail_bound_mode: bool = True

    def __post_init__(self):
        if self.M < 1:
            raise ConfigError("M must be positive")


def family_order(basis, length):
    """Storage positions listed in test-family order (n = 1, 2, ...)."""
    if isinstance(basis, (CanonicalN, Legendre, FourierExp)):
        return np.arange(length)
    if isinstance(basis, CanonicalZ):
        labels = np.asarray(basis.labels(length))
        return np.lexsort((labels < 0, np.abs(labels)))
    raise CapabilityError(f"no canonical test family for {basis!r}")


def family_weights(basis, length):
    """Weight 2^-n of each storage position."""
    order = family_order(basis, length)
    w = np.empty(length)
    w[order] = 0.5 ** np.arange(1, length + 1)
    return w


def weak_norm(x, spec=WeakNormSpec()):
    """(sum_{n <= M} 2^-n |x_n|, bound on the omitted tail)."""
    n = x.active_len
    order = family_order(x.basis, n)
    vals = np.abs(x.coeffs[order])
    head = vals[: spec.M]
    value = float(np.sum(head * 0.5 ** np.arange(1, head.size + 1)))
    tail = vals[spec.M:]
    bound = float(0.5 ** spec.M * np.linalg.norm(tail)) if tail.size else 0.0
    return value, bound


@dataclass
class DwResult:
    estimate: float
    certified_lower_bound: float
    witness: np.ndarray | None
    upper_bound: float | None
    heuristic: bool
    samples: int
    iterations: int


def _objective(A, B, Y):
    fa = np.linalg.norm(Y @ A.T, axis=1)
    fb = np.linalg.norm(Y @ B.T, axis=1) if B.shape[0] else np.zeros(Y.shape[0])
    return fa - fb


def _gradient(A, B, Y):
    ay = Y @ A.T
    na = np.linalg.norm(ay, axis=1)
    grad = (ay @ A.conj()) / np.where(na > 0, na, 1.0)[:, None]
    if B.shape[0]:
        by = Y @ B.T
        nb = np.linalg.norm(by, axis=1)
        grad -= (by @ B.conj()) / np.where(nb > 0, nb, 1.0)[:, None]
    return grad


def _project_box(Y, w):
    mag = np.abs(Y)
    scale = np.where(mag > w, w / np.where(mag > 0, mag, 1.0), 1.0)
    return Y * scale


def _ascent(A, B, w, Y, iters):
    step = np.full(Y.shape[0], 1.0)
    val = _objective(A, B, Y)
    for _ in range(iters):
        grad = _gradient(A, B, Y)
        trial = _project_box(Y + step[:, None] * w[None, :] * grad, w)
        tval = _objective(A, B, trial)
        better = tval >= val
        Y = np.where(better[:, None], trial, Y)
        val = np.where(better, tval, val)
        step = np.where(better, np.minimum(step * 1.5, 1e6), step * 0.5)
    return Y, val


def _conic_bounds(u, Bq, w):
    """Certified (lower, upper) for min over ||c|| <= 1 of sum w |u - Bq c|.

    Both the primal and its dual max Re<u, y> - ||Bq^H y|| over the box are
    solved as second-order cone programs; each answer is re-evaluated at a
    feasible point so the pair brackets the true value.
    """
    import cvxpy as cp

    m, k = Bq.shape
    ur, ui = u.real, u.imag
    br, bi = Bq.real, Bq.imag
    # complex quantities are carried as (real, imaginary) pairs
    cr, ci = cp.Variable(k), cp.Variable(k)
    rr = ur - (br @ cr - bi @ ci)
    ri = ui - (br @ ci + bi @ cr)
    mods = cp.norm(cp.vstack([rr, ri]), 2, axis=0)
    primal = cp.Problem(cp.Minimize(w @ mods), [cp.norm(cp.hstack([cr, ci]), 2) <= 1])
    primal.solve(solver=cp.CLARABEL)
    cv = np.asarray(cr.value) + 1j * np.asarray(ci.value)
    cv = cv / max(1.0, np.linalg.norm(cv))
    upper = float(np.sum(w * np.abs(u - Bq @ cv)))
    yr, yi = cp.Variable(m), cp.Variable(m)
    # Re<u, y> and B^H y in real form
    lin = ur @ yr + ui @ yi
    pr = br.T @ yr + bi.T @ yi
    pi = br.T @ yi - bi.T @ yr
    dual = cp.Problem(cp.Maximize(lin - cp.norm(cp.hstack([pr, pi]), 2)),
                      [cp.norm(cp.vstack([yr, yi]), 2, axis=0) <= w])
    dual.solve(solver=cp.CLARABEL)
    yv = np.asarray(yr.value) + 1j * np.asarray(yi.value)
    yv = _project_box(yv[None, :], w)[0]
    lower = float((np.conj(u) @ yv).real - np.linalg.norm(Bq.conj().T @ yv))
    return max(lower, 0.0), upper, yv


def dw(U, V, spec=None, samples=DEFAULT_SAMPLES, iters=DEFAULT_ITERS, seed=0, weights=None):
    """Weak gap d_w between the unit balls of U and V.

    Uses the dual form max over {|y_n| <= 2^-n} of ||P_U y|| - ||P_V y||;
    any feasible y certifies a lower bound.  Multistart projected ascent
    searches for the maximizer.
    """
    if samples <= 0 or iters <= 0:
        raise ConfigError("estimator budget must be positive")
    if _empty(U):
        return DwResult(0.0, 0.0, None, 0.0, False, 0, 0)
    if not _empty(V):
        a, b = _aligned(U, V)
    else:
        a = U.matrix
        b = np.zeros((a.shape[0], 0), dtype=complex)
    length = a.shape[0]
    w = family_weights(U.basis, length) if weights is None else np.asarray(weights, float)
    if spec is not None and spec.M < length:
        w = np.where(np.argsort(np.argsort(-w)) < spec.M, w, 0.0)
    A = a.conj().T
    B = b.conj().T
    if B.shape[0] == 0:
        # sup over the box of ||P_U y|| is attained at a vertex-like point;
        # for one-dimensional U it is sum w |u_n|, in general ascend.
        if A.shape[0] == 1:
            val = float(np.sum(w * np.abs(A[0])))
            y = w * np.exp(1j * np.angle(a[:, 0]))
            return DwResult(val, val, y, val, False, 1, 0)
    if A.shape[0] == 1:
        # B_V is circled, so the phase of u is immaterial and the problem
        # is convex: solve it directly
        lower, upper, y = _conic_bounds(a[:, 0], b, w)
        return DwResult(lower, lower, y, upper, False, 1, 0)
    rng = np.random.default_rng(seed)
    mag = rng.random((samples, length)) * w[None, :]
    phase = np.exp(2j * np.pi * rng.random((samples, length)))
    if np.isrealobj(a) or (np.allclose(a.imag, 0) and np.allclose(b.imag, 0)):
        phase = np.sign(phase.real) + 0j
    Y = mag * phase
    starts = []
    rest = a - b @ (b.conj().T @ a) if b.shape[1] else a
    tol = 1e-12
    # the row mask goes first so small budgets keep it
    mask = np.linalg.norm(rest, axis=1) > tol
    if np.any(mask):
        starts.append(w * mask)
    for col in np.concatenate([rest, a], axis=1).T:
        if np.any(np.abs(col) > tol):
            starts.append(w * np.exp(1j * np.angle(col)) * (np.abs(col) > tol))
    if starts:
        Y[: len(starts)] = np.asarray(starts)[: samples]
    Y, val = _ascent(A, B, w, Y, iters)
    best = int(np.argmax(val))
    lower = float(max(val[best], 0.0))
    return DwResult(lower, lower, Y[best], None, True, samples, iters)


def dw_hat(U, V, **kwargs):
    """max(d_w(U, V), d_w(V, U)) as a certified lower bound."""
    return max(dw(U, V, **kwargs).estimate, dw(V, U, **kwargs).estimate)


@dataclass
class GapReport:
    delta_uv: float
    delta_vu: float
    dhat: float
    delta_hat: float
    dw_uv: float
    dw_vu: float
    dw_hat: float
    method: dict = field(default_factory=dict)


def gap_report(U, V, samples=DEFAULT_SAMPLES, iters=DEFAULT_ITERS, seed=0):
    duv, dvu = gap_delta(U, V), gap_delta(V, U)
    wuv = dw(U, V, samples=samples, iters=iters, seed=seed)
    wvu = dw(V, U, samples=samples, iters=iters, seed=seed)
    return GapReport(duv, dvu, gap_dhat(U, V), max(duv, dvu), wuv.estimate, wvu.estimate,
                     max(wuv.estimate, wvu.estimate),
                     {"samples": samples, "iterations": iters, "seed": seed,
                      "certified_lower_bound": True})


def krylov_gap_trace(op, g, N_list, ref_N, samples=DEFAULT_SAMPLES, iters=DEFAULT_ITERS,
                     seed=0):
    """Gap and weak gap between K_N(A, g) and a reference K_ref_N(A, g)."""
    if ref_N < max(N_list):
        raise ConfigError("ref_N must be at least max(N_list)")
    kb = build_krylov(op, g, ref_N)
    ref = kb.frame
    rows = []
    for N in N_list:
        sub = SubspaceFrame(ref.basis, ref.matrix[:, : min(N, ref.dim)], check=False)
        rep = gap_report(sub, ref, samples, iters, seed)
        rows.append({"N": int(N), "delta_hat": rep.delta_hat, "dhat": rep.dhat,
                     "dw_forward": rep.dw_uv, "dw_backward": rep.dw_vu, "dw_hat": rep.dw_hat})
    return rows
