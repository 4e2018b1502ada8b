"""Projection methods: compressions between two orthonormal systems, truncated
solves, error and residual indicators, and the basis-comparison experiments."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .core import (
    CanonicalN,
    CoeffVector,
    FourierExp,
    Legendre,
    composite_gauss,
    evaluate,
    expand,
    orthonormalize_columns,
    unit_vector,
)
from .errors import CapabilityError, ConfigError, DomainError, WindowOverflowError
from .krylov import WindowedOperator
from .operators import (
    Diagonal,
    MatrixOperator,
    MultiplicationByX,
    VolterraL2_01,
    WeightedRightShift,
    apply,
)
from .solvers import gmres_solve, gmres_trace

LSTSQ_RCOND = 1e-12
ORTHO_TOL = 1e-10

LEGENDRE_CAP = 100
FOURIER_CAP = 500
SEC26_WINDOW = 2500
SEC26_N_MAX = 500
SEC26_VOLTERRA_N_MAX = 175


def _coords_matrix(vectors, length=None):
    basis = vectors[0].basis
    for v in vectors:
        if v.basis != basis:
            raise ConfigError("all vectors of a system must share a basis")
    n = length or basis.common_length(*(v.active_len for v in vectors))
    return basis, np.column_stack([v.coords(n) for v in vectors])


@dataclass(frozen=True, eq=False)
class TruncationPair:
    """Solution system (u_n) and trial system (v_n), both orthonormal."""

    solution_basis: tuple
    trial_basis: tuple

    def __post_init__(self):
        u, v = tuple(self.solution_basis), tuple(self.trial_basis)
        object.__setattr__(self, "solution_basis", u)
        object.__setattr__(self, "trial_basis", v)
        if not u or not v:
            raise ConfigError("both systems must be nonempty")
        if u[0].basis != v[0].basis:
            raise ConfigError("solution and trial systems live in different spaces")
        for system in (u, v):
            _, mat = _coords_matrix(list(system))
            err = np.max(np.abs(mat.conj().T @ mat - np.eye(mat.shape[1])))
            if err > ORTHO_TOL:
                raise ConfigError(f"system not orthonormal (error {err:.2e})")

    @property
    def basis(self):
        return self.solution_basis[0].basis

    @classmethod
    def canonical(cls, basis, N):
        """u_n = v_n = the first N vectors of the coefficient basis."""
        if isinstance(basis, CanonicalN):
            labels = range(basis.origin, basis.origin + N)
        elif isinstance(basis, FourierExp):
            from .core import fourier_modes
            labels = fourier_modes(N)
        elif isinstance(basis, Legendre):
            labels = range(N)
        else:
            from .core import CanonicalZ
            if isinstance(basis, CanonicalZ):
                half = N // 2
                labels = range(-half, N - half)
            else:
                raise ConfigError(f"no canonical system for {basis!r}")
        vecs = tuple(unit_vector(basis, int(k), N) for k in labels)
        return cls(vecs, vecs)


@dataclass(frozen=True, eq=False)
class CompressedSystem:
    A_N: np.ndarray
    g_N: np.ndarray
    N: int
    pair: TruncationPair


def compress(op, pair, g, N, window=None):
    """A_N[i, j] = <v_i, A u_j> and g_N[i] = <v_i, g> for i, j < N."""
    if N > len(pair.solution_basis) or N > len(pair.trial_basis):
        raise DomainError("N exceeds the available basis length")
    us = list(pair.solution_basis[:N])
    vs = list(pair.trial_basis[:N])
    basis = pair.basis
    length = window or basis.common_length(*(w.active_len for w in us + vs + [g]))
    length = max(length, getattr(op, "fourier_window", 0))
    wop = WindowedOperator(op, op.ambient_length(length, 1))
    U = np.column_stack([wop.coords(u) for u in us])
    V = np.column_stack([wop.coords(v) for v in vs])
    AU = np.column_stack([wop.matvec(c) for c in U.T])
    A_N = V.conj().T @ AU
    g_N = V.conj().T @ wop.coords(g)
    return CompressedSystem(A_N, g_N, N, pair)


def lift(sys, coeffs):
    """sum_j f_j u_j as a vector of the ambient space."""
    basis = sys.pair.basis
    us = sys.pair.solution_basis[: sys.N]
    n = basis.common_length(*(u.active_len for u in us))
    U = np.column_stack([u.padded(n) for u in us])
    return CoeffVector(basis, basis.trim(U @ np.asarray(coeffs)))


def solve_truncated(sys, method="direct-least-squares"):
    """f^(N) and the norm of eps^(N) = A_N f^(N) - g_N."""
    if method == "direct-least-squares":
        f = np.linalg.lstsq(sys.A_N, sys.g_N, rcond=LSTSQ_RCOND)[0]
    elif method == "gmres":
        op = MatrixOperator(sys.A_N)
        sol, _ = gmres_solve(op, CoeffVector(CanonicalN(), sys.g_N), sys.N)
        f = sol.padded(sys.N)
    else:
        raise ConfigError(f"unknown truncated-solve method {method!r}")
    eps = float(np.linalg.norm(sys.A_N @ f - sys.g_N))
    return f, eps


@dataclass
class ErrorResidual:
    error_norm: float | None
    residual_norm: float
    error: CoeffVector | None
    support: list | None


def _quad_grid(basis, modes):
    panels = max(64, 4 * modes)
    return composite_gauss(basis.a, basis.b, panels, 16)


def error_residual(op, f_true, g, f_hat, threshold=1e-8):
    """Infinite-dimensional error f - f_hat and residual g - A f_hat.

    ``f_true`` and ``g`` are coefficient vectors of the same basis (exact
    coefficient arithmetic) or callables (quadrature of point values, for
    function bases only).
    """
    basis = f_hat.basis
    if callable(g) or callable(f_true):
        if not isinstance(basis, (Legendre, FourierExp)):
            raise CapabilityError("callable data need a function basis")
        x, w = _quad_grid(basis, f_hat.active_len)
        approx = evaluate(f_hat, x)
        image = op.image_values(f_hat.coeffs, x)
        gvals = g(x) if callable(g) else evaluate(g, x)
        res = float(np.sqrt(np.sum(w * np.abs(gvals - image) ** 2)))
        if f_true is None:
            return ErrorResidual(None, res, None, None)
        fvals = f_true(x) if callable(f_true) else evaluate(f_true, x)
        err = float(np.sqrt(np.sum(w * np.abs(fvals - approx) ** 2)))
        return ErrorResidual(err, res, None, None)
    res_vec = g - apply(op, f_hat, cap=max(2500, f_hat.active_len + 8))
    res = res_vec.norm()
    if f_true is None:
        return ErrorResidual(None, res, None, None)
    err_vec = f_true - f_hat
    labels = np.asarray(basis.labels(err_vec.active_len))
    support = labels[np.abs(err_vec.coeffs) > threshold].tolist()
    return ErrorResidual(err_vec.norm(), res, err_vec, support)


def bad_truncation_basis(op, u_basis, N, ambient_M):
    """Trial system making every A_N singular: v_n orthogonal to A u_1..A u_n
    and to v_1..v_{n-1}, chosen inside the M-window."""
    if ambient_M <= 2 * N:
        raise DomainError("need ambient_M > 2N")
    basis = u_basis[0].basis
    grown = op.ambient_length(ambient_M, 1)
    wop = WindowedOperator(op, grown)
    images = [wop.matvec(wop.coords(u)) for u in u_basis[:N]]
    trial = []
    constraints = np.zeros((grown, 0), dtype=complex)
    candidates = [basis.to_coords(basis.pad(unit_vector(basis, k).coeffs, grown))
                  for k in basis.labels(ambient_M)]
    for n in range(N):
        stack = np.column_stack([constraints, images[n]]) if images[n].any() else constraints
        constraints = orthonormalize_columns(stack)
        picked = None
        for cand in candidates:
            w = cand - constraints @ (constraints.conj().T @ cand)
            w = w - constraints @ (constraints.conj().T @ w)
            if np.linalg.norm(w) > 0.5:
                picked = w / np.linalg.norm(w)
                break
        if picked is None:
            raise WindowOverflowError("constraints fill the window; enlarge ambient_M")
        trial.append(picked)
        constraints = orthonormalize_columns(np.column_stack([constraints, picked]))
    return [CoeffVector(basis, basis.trim(basis.from_coords(c))) for c in trial]


def compression_gap(op, pair, N, ambient_M):
    """||A - Q_N A P_N|| restricted to the M-window (spectral norm)."""
    basis = pair.basis
    grown = op.ambient_length(ambient_M, 1)
    wop = WindowedOperator(op, grown)
    cols = []
    for k in basis.labels(ambient_M):
        e = basis.to_coords(basis.pad(unit_vector(basis, k).coeffs, grown))
        cols.append(wop.matvec(e))
    A = np.column_stack(cols)
    embed = np.zeros((grown, ambient_M), dtype=complex)
    for j, k in enumerate(basis.labels(ambient_M)):
        embed[:, j] = basis.to_coords(basis.pad(unit_vector(basis, k).coeffs, grown))
    U = np.column_stack([wop.coords(u) for u in pair.solution_basis[:N]])
    V = np.column_stack([wop.coords(v) for v in pair.trial_basis[:N]])
    U_in = embed.conj().T @ U
    compressed = V @ (V.conj().T @ A @ U_in) @ U_in.conj().T
    return float(np.linalg.norm(A - compressed, 2))


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


def sec26_solution(cutoff=250):
    """f_n = 1/n for n <= cutoff."""
    return CoeffVector(CanonicalN(), 1.0 / np.arange(1, cutoff + 1))


def sec26_solution_norm(cutoff=250):
    """Closed form sqrt(pi^2/6 - psi'(cutoff+1))."""
    return float(np.sqrt(np.pi ** 2 / 6 - special.polygamma(1, cutoff + 1)))


def sec26_operator(kind):
    if kind == "baseline":
        return Diagonal("1/(5n)")
    if kind == "noninjective":
        return Diagonal("1/(5n)", zeros=(3, 6, 9))
    if kind == "shift":
        return WeightedRightShift("1/(5n)")
    if kind == "volterra":
        return VolterraL2_01()
    raise ConfigError(f"unknown section 2.6 experiment {kind!r}")


def _row(experiment, N, err, res, sol):
    nan = float("nan")
    return {"experiment": experiment, "N": int(N), "rho0": nan, "rho1": nan, "rho2": nan,
            "err": float(err), "res": float(res), "sol_norm": float(sol), "delta_N": nan,
            "ritz_min": nan, "ritz_max": nan}


def run_sec26(kind, orders=None, N_max=None, window=SEC26_WINDOW):
    """GMRES on the four section-2.6 problems; one row per order."""
    op = sec26_operator(kind)
    name = f"sec2.6-{kind}"
    if kind == "volterra":
        N_max = N_max or SEC26_VOLTERRA_N_MAX
        basis = op.basis
        f = CoeffVector(basis, [0.5, 0.5 / np.sqrt(3.0)])
        g = apply(op, f)
        steps = gmres_trace(op, g, N_max, orders=orders)
    else:
        N_max = N_max or SEC26_N_MAX
        f = sec26_solution()
        g = apply(op, f)
        steps = gmres_trace(op, g, N_max, orders=orders, window=window)
    rows, solutions = [], {}
    for step in steps:
        er = error_residual(op, f, g, step.solution)
        rows.append(_row(name, step.N, er.error_norm, er.residual_norm, step.solution.norm()))
        solutions[step.N] = (step.solution, er)
    return rows, solutions


A5_PROBLEMS = {
    "volterra": {"interval": (0.0, 1.0), "f": lambda x: x, "g": lambda x: 0.5 * x ** 2,
                 "norm": 1.0 / np.sqrt(3.0)},
    "multiplication": {"interval": (1.0, 2.0), "f": lambda x: x, "g": lambda x: x ** 2,
                       "norm": np.sqrt(7.0 / 3.0)},
}


def _a5_operator(problem, basis):
    a, b = A5_PROBLEMS[problem]["interval"]
    if problem == "volterra":
        return VolterraL2_01(basis)
    return MultiplicationByX(a, b, basis)


def run_basis_comparison(problem, basis, N_max, orders=None, krylov_tol=1e-10):
    """Error, residual and solution norms of the truncated problem per N."""
    if problem not in A5_PROBLEMS:
        raise ConfigError(f"unknown problem {problem!r}")
    spec = A5_PROBLEMS[problem]
    a, b = spec["interval"]
    name = f"a5-{problem}-{basis}"
    orders = sorted(set(orders or range(1, N_max + 1)))
    if basis in ("legendre", "krylov"):
        space = Legendre(a, b)
        if basis == "legendre" and max(orders) > LEGENDRE_CAP:
            raise ConfigError(f"Legendre runs are capped at N = {LEGENDRE_CAP}")
        op = _a5_operator(problem, space)
        f = expand(space, spec["f"], 2)
        g = expand(space, spec["g"], 3)
        rows = []
        if basis == "legendre":
            for N in orders:
                pair = TruncationPair.canonical(space, N)
                sys = compress(op, pair, g, N)
                coeffs, _ = solve_truncated(sys)
                fhat = lift(sys, coeffs)
                er = error_residual(op, f, g, fhat)
                rows.append(_row(name, N, er.error_norm, er.residual_norm, fhat.norm()))
            return rows
        steps = gmres_trace(op, g, max(orders), orders=orders)
        last = None
        for step in steps:
            if last is not None and last[1] <= krylov_tol:
                fhat = last[0]
            else:
                fhat = step.solution
            er = error_residual(op, f, g, fhat)
            last = (fhat, er.residual_norm)
            rows.append(_row(name, step.N, er.error_norm, er.residual_norm, fhat.norm()))
        return rows
    if basis == "fourier":
        if max(orders) > FOURIER_CAP:
            raise ConfigError(f"Fourier runs are capped at N = {FOURIER_CAP}")
        space = FourierExp(a, b)
        op = _a5_operator(problem, space)
        g = expand(space, spec["g"], max(orders), order=4 * max(orders) + 64)
        rows = []
        for N in orders:
            pair = TruncationPair.canonical(space, N)
            sys = compress(op, pair, CoeffVector(space, g.coeffs[:N]), N)
            coeffs, _ = solve_truncated(sys)
            fhat = lift(sys, coeffs)
            er = error_residual(op, spec["f"], spec["g"], fhat)
            rows.append(_row(name, N, er.error_norm, er.residual_norm, fhat.norm()))
        return rows
    raise ConfigError(f"unknown basis {basis!r}")
