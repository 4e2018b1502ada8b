"""GMRES over Krylov subspaces, conjugate-gradient theta-iterates with their
convergence indicators, Ritz diagnostics and the A^2 f = A g route."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special

from . import kernels
from .core import CoeffVector, SpectralGrid, composite_gauss, zero_vector
from .errors import CapabilityError, ConfigError, DomainError, QuadratureError
from .krylov import WindowedOperator, build_krylov, working_window
from .operators import DEFAULT_WINDOW_CAP, SquaredOperator, _check_basis, apply

CSV_COLUMNS = ["experiment", "N", "rho0", "rho1", "rho2", "err", "res", "sol_norm",
               "delta_N", "ritz_min", "ritz_max"]


# ---------------------------------------------------------------------------
# GMRES
# ---------------------------------------------------------------------------


def _givens(a, b):
    """Complex rotation (c, s) with [c, s; -conj(s), c] [a; b] = [r; 0]."""
    if b == 0:
        return 1.0, 0.0
    if a == 0:
        return 0.0, np.conj(b) / abs(b)
    scale = np.hypot(abs(a), abs(b))
    c = abs(a) / scale
    s = (a / abs(a)) * np.conj(b) / scale
    return c, s


@dataclass
class GmresStep:
    N: int
    solution: CoeffVector
    residual: float


def gmres_trace(op, g, N_max, orders=None, window=None, cap=DEFAULT_WINDOW_CAP):
    """GMRES iterates for every order in ``orders`` (default 1..N_max).

    One Arnoldi run of order N_max; the small least-squares problems are
    updated with Givens rotations, falling back to a dense least-squares
    solve when the triangular factor is singular.
    """
    _check_basis(op, g)
    kb = build_krylov(op, g, N_max, window=window, cap=cap)
    orders = sorted(set(orders or range(1, N_max + 1)))
    basis = g.basis
    start = WindowedOperator(op, kb.window).coords(g)
    beta = np.linalg.norm(start)
    if kb.rank == 0:
        zero = zero_vector(basis, 1)
        return [GmresStep(N, zero, 0.0) for N in orders]
    H = kb.hess
    r = kb.rank
    R = H.astype(complex).copy()
    rhs = np.zeros(r + 1, dtype=complex)
    rhs[0] = beta
    rots = []
    residuals = np.empty(r)
    for j in range(r):
        for i, (c, s) in enumerate(rots):
            top, bot = R[i, j], R[i + 1, j]
            R[i, j] = c * top + s * bot
            R[i + 1, j] = -np.conj(s) * top + c * bot
        c, s = _givens(R[j, j], R[j + 1, j])
        rots.append((c, s))
        top, bot = R[j, j], R[j + 1, j]
        R[j, j] = c * top + s * bot
        R[j + 1, j] = 0.0
        top, bot = rhs[j], rhs[j + 1]
        rhs[j] = c * top + s * bot
        rhs[j + 1] = -np.conj(s) * top + c * bot
        residuals[j] = abs(rhs[j + 1])
    hnorm = np.max(np.abs(H)) if H.size else 1.0
    Q = kb.frame.matrix
    out = []
    for N in orders:
        k = min(N, r)
        diag = np.abs(np.diag(R[:k, :k]))
        if np.all(diag > 1e-14 * hnorm):
            y = linalg.solve_triangular(R[:k, :k], rhs[:k])
            res = float(residuals[k - 1])
        else:
            e1 = np.zeros(k + 1, dtype=complex)
            e1[0] = beta
            y = np.linalg.lstsq(H[: k + 1, :k], e1, rcond=1e-12)[0]
            res = float(np.linalg.norm(H[: k + 1, :k] @ y - e1))
        coords = Q[:, :k] @ y
        sol = CoeffVector(basis, basis.trim(basis.from_coords(coords)))
        out.append(GmresStep(N, sol, res))
    return out


def gmres_solve(op, g, N, window=None, cap=DEFAULT_WINDOW_CAP):
    """Minimizer of ||A f - g|| over K_N(A, g) and the minimal residual."""
    step = gmres_trace(op, g, N, orders=[N], window=window, cap=cap)[0]
    return step.solution, step.residual


# ---------------------------------------------------------------------------
# Conjugate-gradient theta-iterates
# ---------------------------------------------------------------------------


@dataclass
class ThetaIterateConfig:
    xi: float = 1.0
    sigma_list: tuple = (0.0, 1.0)
    max_N: int = 40
    f0: CoeffVector | None = None
    stop_tol: float = 0.0

    def __post_init__(self):
        if self.xi < 0:
            raise ConfigError("xi must be nonnegative")
        if any(s > self.xi for s in self.sigma_list):
            raise ConfigError("every sigma must satisfy sigma <= xi")
        if self.max_N < 1:
            raise ConfigError("max_N must be positive")


@dataclass
class ConvergenceTrace:
    rows: list = field(default_factory=list)
    converged: bool = False
    breakdown: bool = False
    experiment: str = ""

    def csv_rows(self, experiment=None):
        name = experiment or self.experiment
        out = []
        for row in self.rows:
            rho = row["rho"]
            ritz = row["ritz"]
            out.append({
                "experiment": name,
                "N": row["N"],
                "rho0": rho.get(0.0, float("nan")),
                "rho1": rho.get(1.0, float("nan")),
                # rho_2 is the squared residual norm whatever xi is
                "rho2": rho.get(2.0, row["res_norm"] ** 2),
                "err": row["err_norm"],
                "res": row["res_norm"],
                "sol_norm": row["sol_norm"],
                "delta_N": row["delta_N"],
                "ritz_min": ritz[0] if len(ritz) else float("nan"),
                "ritz_max": ritz[-1] if len(ritz) else float("nan"),
            })
        return out

    def column(self, key, sigma=None):
        if key == "rho":
            return np.array([row["rho"][float(sigma)] for row in self.rows])
        return np.array([row[key] for row in self.rows])


def ritz_from_cg(alphas, betas):
    """Ritz values of the Lanczos tridiagonal encoded by CG coefficients."""
    alphas = np.asarray(alphas, dtype=float)
    betas = np.asarray(betas, dtype=float)
    n = alphas.size
    diag = 1.0 / alphas
    diag[1:] += betas[: n - 1] / alphas[: n - 1]
    off = np.sqrt(betas[: n - 1]) / alphas[: n - 1]
    return kernels.tridiag_eigvalsh(diag, off)


def delta_from_ritz(ritz):
    ritz = np.asarray(ritz, dtype=float)
    return float(1.0 / ritz[0] + 2.0 * np.sum(1.0 / ritz[1:]))


class _SpectralSpace:
    """CG ingredients in spectral coordinates: exact weights for any powers."""

    def __init__(self, op, g, f0, xi):
        length = g.active_len if f0 is None else max(g.active_len, f0.active_len)
        if isinstance(g.basis, SpectralGrid):
            length = g.basis.nodes.size
        lam = np.asarray(op.diagonal_values(length))
        if np.any(np.abs(lam.imag) > 0) or np.any(lam.real < 0):
            raise CapabilityError("theta-iterates need a positive self-adjoint operator")
        self.lam_full = lam.real
        self.active = self.lam_full > 0
        self.lam = self.lam_full[self.active]
        self.basis = g.basis
        self.length = length
        self.f0 = np.zeros(length, dtype=complex) if f0 is None else f0.coords(length)
        gc = g.coords(length)
        self.r0 = (gc - self.lam_full * self.f0)[self.active]
        self.weight = self.lam ** (xi - 1.0)

    def matvec(self, x):
        return self.lam * x

    def ip(self, u, v):
        return np.vdot(u, self.weight * v)

    def rho(self, r, sigma):
        return float(np.sum(self.lam ** (sigma - 2.0) * np.abs(r) ** 2))

    def lift(self, x):
        full = self.f0.copy()
        full[self.active] += x
        return CoeffVector(self.basis, self.basis.from_coords(full))

    def residual_norm(self, r):
        return float(np.linalg.norm(r))


class _MatrixSpace:
    """CG ingredients for an operator known only through its action."""

    def __init__(self, op, g, f0, xi, max_N):
        if xi not in (1.0, 2.0):
            raise CapabilityError("non-diagonal operators support xi in {1, 2} only")
        self.xi = xi
        start = g if f0 is None else f0
        self.length = working_window(op, g if g.active_len >= start.active_len else start, max_N + 2)
        self.wop = WindowedOperator(op, self.length)
        self.basis = g.basis
        self.f0 = np.zeros(self.length, dtype=complex) if f0 is None else self.wop.coords(f0)
        self.r0 = self.wop.coords(g) - self.wop.matvec(self.f0)

    def matvec(self, x):
        return self.wop.matvec(x)

    def ip(self, u, v):
        if self.xi == 1.0:
            return np.vdot(u, v)
        return np.vdot(self.matvec(u), v)

    def lift(self, x):
        return CoeffVector(self.basis, self.basis.trim(self.basis.from_coords(self.f0 + x)))

    def residual_norm(self, r):
        return float(np.linalg.norm(r))


def _cg_steps(space, max_N, reorth=True):
    """Yields (N, x, r, alphas, betas); x is the update relative to f0."""
    r = space.r0.copy()
    x = np.zeros_like(r)
    rr = space.ip(r, r).real
    if rr <= 0:
        return
    rr0 = rr
    p = r.copy()
    basis = [r / np.sqrt(rr)]
    alphas, betas = [], []
    for N in range(1, max_N + 1):
        Ap = space.matvec(p)
        pAp = space.ip(p, Ap).real
        if pAp <= 0:
            return
        alpha = rr / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        if reorth:
            for q in basis:
                r = r - space.ip(q, r) * q
        rr_new = space.ip(r, r).real
        alphas.append(alpha)
        beta = rr_new / rr
        betas.append(beta)
        yield N, x, r, list(alphas), list(betas)
        if rr_new <= 1e-28 * rr0:
            return
        basis.append(r / np.sqrt(rr_new))
        p = r + beta * p
        rr = rr_new


def cg_theta_iterates(op, g, cfg, f_true=None, experiment=""):
    """Iterates minimizing ||A^{xi/2}(h - f_sol)|| over f0 + K_N(A, r_0)."""
    caps = op.caps
    if not (caps.is_selfadjoint and caps.is_positive):
        raise CapabilityError("theta-iterates need a positive self-adjoint operator")
    xi = float(cfg.xi)
    sigmas = [float(s) for s in cfg.sigma_list]
    spectral = op.is_spectral
    if not spectral:
        if any(s < 0 for s in sigmas):
            raise CapabilityError("sigma < 0 needs a diagonal operator")
        space = _MatrixSpace(op, g, cfg.f0, xi, cfg.max_N)
    else:
        space = _SpectralSpace(op, g, cfg.f0, xi)
    trace = ConvergenceTrace(experiment=experiment)
    ftrue_coords = None
    if f_true is not None:
        ftrue_coords = f_true.coords(max(space.length, f_true.active_len))[: space.length]
    stop_sigma = min(sigmas) if sigmas else None
    for N, x, r, alphas, betas in _cg_steps(space, cfg.max_N):
        f = space.lift(x)
        fc = f.coords(space.length)
        rho = {}
        for s in sigmas:
            if spectral:
                rho[s] = space.rho(r, s)
            elif s == 2.0:
                rho[s] = float(np.linalg.norm(r) ** 2)
            elif ftrue_coords is not None:
                e = fc - ftrue_coords
                rho[s] = float(np.linalg.norm(e) ** 2) if s == 0.0 else float(np.vdot(e, space.matvec(e)).real)
            else:
                rho[s] = float("nan")
        err = float(np.linalg.norm(fc - ftrue_coords)) if ftrue_coords is not None else float("nan")
        ritz = ritz_from_cg(alphas, betas)
        trace.rows.append({
            "N": N,
            "rho": rho,
            "err_norm": err,
            "res_norm": space.residual_norm(r),
            "sol_norm": f.norm(),
            "delta_N": delta_from_ritz(ritz),
            "ritz": ritz.tolist(),
            "solution": f,
            "residual": r,
        })
        if stop_sigma is not None and cfg.stop_tol > 0 and rho[stop_sigma] <= cfg.stop_tol:
            trace.converged = True
            break
    if trace.rows and not trace.converged:
        r0 = space.residual_norm(space.r0)
        trace.converged = trace.rows[-1]["res_norm"] <= 1e-13 * r0
    trace.space = space
    return trace


def variational_oracle(op, g, f0, xi, N, f_sol=None):
    """Brute-force minimizer of ||A^{xi/2}(h - f_sol)|| over f0 + K_N(A, r_0)."""
    xi = float(xi)
    r0 = g if f0 is None else g - apply(op, f0)
    start = zero_vector(g.basis, 1) if f0 is None else f0
    if r0.norm() == 0 or N == 0:
        return start
    kb = build_krylov(op, r0, N)
    length = kb.window
    Q = kb.frame.matrix
    basis = g.basis
    if op.is_spectral:
        lam = np.asarray(op.diagonal_values(length)).real
        active = lam > 0
        rc = r0.coords(length)
        W = lam[active] ** (xi / 2.0 - 1.0)
        A_half_Q = (lam[active] ** (xi / 2.0))[:, None] * Q[active]
        c = np.linalg.lstsq(A_half_Q, W * rc[active], rcond=1e-13)[0]
    else:
        wop = WindowedOperator(op, length)
        AQ = np.column_stack([wop.matvec(col) for col in Q.T])
        rc = wop.coords(r0)
        if xi == 2.0:
            c = np.linalg.lstsq(AQ, rc, rcond=1e-13)[0]
        elif xi == 1.0:
            c = np.linalg.lstsq(Q.conj().T @ AQ, Q.conj().T @ rc, rcond=1e-13)[0]
        else:
            raise CapabilityError("non-diagonal operators support xi in {1, 2} only")
    update = CoeffVector(basis, basis.from_coords(Q @ c))
    return start + update


@dataclass
class RitzReport:
    interlacing_ok: bool
    lambda1_decreasing: bool
    lambda_top_increasing: bool
    delta: list
    s_at_zero: list
    residual_identity: list
    skipped: list


def residual_polynomial(ritz, lam):
    """s_N(lambda) = prod (1 - lambda/lambda_k), evaluated in log-magnitude form."""
    ritz = np.asarray(ritz, dtype=float)
    lam = np.asarray(lam, dtype=float)
    factors = 1.0 - lam[:, None] / ritz[None, :]
    sign = np.prod(np.sign(factors), axis=1)
    with np.errstate(divide="ignore"):
        logmag = np.sum(np.log(np.abs(factors)), axis=1)
    return sign * np.exp(logmag)


def ritz_diagnostics(trace, tol=1e-9):
    """Interlacing, monotonicity and residual-polynomial checks on a trace."""
    rows = trace.rows
    ok = True
    dec = True
    inc = True
    skipped = []
    for prev, cur in zip(rows[:-1], rows[1:]):
        a = np.asarray(prev["ritz"])
        b = np.asarray(cur["ritz"])
        if b.size != a.size + 1:
            skipped.append(cur["N"])
            continue
        scale = tol * max(1.0, np.max(np.abs(b)))
        ok &= bool(np.all(b[:-1] < a + scale) and np.all(a < b[1:] + scale))
        dec &= bool(b[0] <= a[0] + scale)
        inc &= bool(b[-1] >= a[-1] - scale)
    space = getattr(trace, "space", None)
    identity = []
    s0 = []
    for row in rows:
        s0.append(float(residual_polynomial(row["ritz"], [0.0])[0]))
        if isinstance(space, _SpectralSpace):
            s = residual_polynomial(row["ritz"], space.lam)
            diff = np.linalg.norm(row["residual"] - s * space.r0) / np.linalg.norm(space.r0)
            identity.append(float(diff))
    return RitzReport(bool(ok), bool(dec), bool(inc), [row["delta_N"] for row in rows], s0,
                      identity, skipped)


@dataclass
class SquaresResult:
    solution: CoeffVector
    trace: ConvergenceTrace
    converged: bool
    residual: float


def solve_selfadjoint_via_squares(op, g, max_N, tol):
    """CG on A^2 f = A g with f0 = 0, stopped once ||A f - g|| <= tol."""
    if not op.caps.is_selfadjoint:
        raise CapabilityError("the squares route needs a self-adjoint operator")
    sq = SquaredOperator(op)
    ag = apply(op, g)
    cfg = ThetaIterateConfig(xi=1.0, sigma_list=(), max_N=max_N)
    if op.is_spectral:
        space = _SpectralSpace(sq, ag, None, 1.0)
    else:
        space = _MatrixSpace(sq, ag, None, 1.0, max_N)
    trace = ConvergenceTrace(experiment="squares")
    best = zero_vector(g.basis, 1)
    res = g.norm()
    if res <= tol:
        return SquaresResult(best, trace, True, res)
    for N, x, r, alphas, betas in _cg_steps(space, cfg.max_N):
        f = space.lift(x)
        res = (apply(op, f) - g).norm()
        ritz = ritz_from_cg(alphas, betas)
        trace.rows.append({"N": N, "rho": {}, "err_norm": float("nan"), "res_norm": res,
                           "sol_norm": f.norm(), "delta_N": delta_from_ritz(ritz),
                           "ritz": ritz.tolist(), "solution": f, "residual": r})
        best = f
        if res <= tol:
            trace.converged = True
            return SquaresResult(f, trace, True, res)
    return SquaresResult(best, trace, False, res)


# ---------------------------------------------------------------------------
# Log-normal example
# ---------------------------------------------------------------------------


@dataclass
class LognormalReport:
    xi: float
    log_norm_sq: list
    expected_log_norm_sq: list
    max_rel_error: float
    partial_sums: list
    increments: list
    grid: SpectralGrid


def lognormal_grid(xi, n_max, panel_width=0.25, order=20):
    """Grid on (0, inf) in the variable u = log x covering every weighted peak."""
    lo = min(-8.0, (-1.0 - xi) / 2.0 - 8.0)
    hi = (2 * n_max - 1 - xi) / 2.0 + 8.0
    panels = int(np.ceil((hi - lo) / panel_width))
    u, w = composite_gauss(lo, hi, panels, order)
    return u, w


def lognormal_log_density(u, xi):
    """log |f|^2 at x = e^u for the log-normal test vector."""
    return np.log(2.0) - 0.5 * np.log(2 * np.pi) - (3.0 + 2.0 * xi) * u - 2.0 * u * u


def lognormal_moment_check(xi, n_max, panel_width=0.25, order=20, rtol=1e-6):
    """||A^n f||^2 for A = multiplication by x^2, against exp((2n-1-xi)^2/2)."""
    if xi < 0:
        raise DomainError("xi must be nonnegative")

    def logs(width):
        u, w = lognormal_grid(xi, n_max, width, order)
        base = np.log(w) + u + lognormal_log_density(u, xi)
        return u, [float(special.logsumexp(base + 4.0 * n * u)) for n in range(n_max + 1)]

    u, coarse = logs(panel_width)
    _, fine = logs(panel_width / 2.0)
    gap = np.max(np.abs(np.expm1(np.array(coarse) - np.array(fine))))
    if gap > rtol:
        raise QuadratureError(f"grid under-resolved (doubling changes norms by {gap:.2e}); "
                              "reduce panel_width or raise order")
    expected = [(2 * n - 1 - xi) ** 2 / 2.0 for n in range(n_max + 1)]
    rel = float(np.max(np.abs(np.expm1(np.array(fine) - np.array(expected)))))
    terms = [np.exp(-0.5 * fine[n] / n) for n in range(1, n_max + 1)]
    partial = np.cumsum(terms).tolist()
    grid = SpectralGrid(np.exp(u), np.exp(u) * lognormal_grid(xi, n_max, panel_width, order)[1])
    return LognormalReport(float(xi), fine, expected, rel, partial, terms, grid)
