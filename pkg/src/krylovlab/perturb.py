"""K-class certificates, polynomial inverses, operator perturbation bounds and
the gain/loss of Krylov solvability scenarios."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev
from scipy.special import polygamma

from . import kernels
from .core import (
    CanonicalN,
    CanonicalZ,
    CoeffVector,
    Legendre,
    SpectralGrid,
    composite_gauss,
    sample,
    unit_vector,
)
from .errors import ConfigError, DomainError, GridResolutionError, SpectralPointError
from .krylov import build_krylov, distance_to_span
from .operators import (
    DirectSum,
    Diagonal,
    MatrixOperator,
    RankOnePlusScaledShift,
    RightShiftN,
    RightShiftZ,
    ScaledOperator,
    VolterraL2_01,
    WeightedRightShift,
    apply,
)

DEFAULT_EPS = 0.05
DEFAULT_GRID = 400
BOX_MARGIN = 3.0  # box = sample bounding box +- 3 eps

# ---------------------------------------------------------------------------
# K-class certificate
# ---------------------------------------------------------------------------


@dataclass
class KClassCertificate:
    spectrum_samples: np.ndarray
    epsilon: float
    h: float
    box: tuple
    region_mask: np.ndarray
    zero_clearance: float
    complement_connected: bool
    region_bounded: bool = True

    @property
    def valid(self):
        return self.zero_clearance > 0 and self.complement_connected and self.region_bounded

    @property
    def status(self):
        # the test is sound only: failure does not disprove membership
        return "certified" if self.valid else "unknown"

    @property
    def reason(self):
        if self.valid:
            return ""
        if self.zero_clearance <= 0:
            return "zero lies in the fattened spectrum"
        return "complement of the fattened spectrum is disconnected"

    def summary(self):
        return {"status": self.status, "epsilon": self.epsilon, "h": self.h,
                "box": list(self.box), "zero_clearance": self.zero_clearance,
                "complement_connected": self.complement_connected, "reason": self.reason}


def _zero_clearance(mask, x0, y0, h):
    ii, jj = np.nonzero(mask)
    if ii.size == 0:
        return math.inf
    xl, yl = x0 + ii * h, y0 + jj * h
    dx = np.maximum(np.maximum(xl, 0.0), -(xl + h))
    dy = np.maximum(np.maximum(yl, 0.0), -(yl + h))
    return float(np.sqrt(np.min(dx * dx + dy * dy)))


def kclass_certify(spectrum_samples, eps=DEFAULT_EPS, grid=DEFAULT_GRID):
    """Rasterize the eps-fattened spectrum and test the K-class conditions.

    ``grid`` is the number of cells along the longer side of the box, or
    ``"auto"`` for the coarsest grid with h <= eps/4.
    """
    z = np.asarray(spectrum_samples, dtype=complex).ravel()
    if z.size == 0 or not np.all(np.isfinite(z)):
        raise DomainError("spectrum samples must be finite and nonempty")
    if not eps > 0:
        raise ConfigError("eps must be positive")
    margin = BOX_MARGIN * eps
    x0, x1 = z.real.min() - margin, z.real.max() + margin
    y0, y1 = z.imag.min() - margin, z.imag.max() + margin
    side = max(x1 - x0, y1 - y0)
    if grid == "auto":
        cells = int(math.ceil(side / (eps / 4.0)))
    else:
        cells = int(grid)
    h = side / cells
    if h > eps / 4.0 * (1 + 1e-12):
        raise GridResolutionError(f"cell size {h:.3g} exceeds eps/4 = {eps / 4:.3g}; "
                                  f"use at least {math.ceil(side / (eps / 4))} cells")
    nx = max(int(math.ceil((x1 - x0) / h)), 1)
    ny = max(int(math.ceil((y1 - y0) / h)), 1)
    mask = np.asarray(kernels.disk_raster(z.real.copy(), z.imag.copy(), float(eps),
                                          float(x0), float(y0), float(h), nx, ny), dtype=bool)
    outside = np.asarray(kernels.flood_outside(mask), dtype=bool)
    connected = bool(np.all(outside | mask))
    clearance = _zero_clearance(mask, x0, y0, h)
    return KClassCertificate(z, float(eps), float(h), (x0, y0, x0 + nx * h, y0 + ny * h), mask,
                             clearance, connected)


def circle_samples(spacing, radius=1.0, start=0.0, stop=2 * np.pi):
    """Points on a circular arc no farther apart than ``spacing``."""
    count = max(int(math.ceil(radius * (stop - start) / spacing)), 1)
    t = np.linspace(start, stop, count + 1)
    return radius * np.exp(1j * t)


def lid_spectrum(n, spacing):
    """Spectrum of the multiplication operator with a raised lid over angles [0, 1/n]."""
    lid = circle_samples(spacing, 1.0 + 1.0 / n, 0.0, 1.0 / n)
    rest = circle_samples(spacing, 1.0, 1.0 / n, 2 * np.pi)
    return np.concatenate([lid, rest])


# ---------------------------------------------------------------------------
# Polynomial approximation of the inverse
# ---------------------------------------------------------------------------


@dataclass
class PolyInverse:
    coeffs: np.ndarray
    interval: tuple
    sup_error: float

    def _t(self, lam):
        m, M = self.interval
        if M == m:
            return np.zeros_like(np.asarray(lam, dtype=float))
        return (2 * np.asarray(lam, dtype=float) - (M + m)) / (M - m)

    def __call__(self, lam):
        return chebyshev.chebval(self._t(lam), self.coeffs)

    def apply(self, op, g):
        """p(A) g by the Clenshaw recurrence with operator applications."""
        m, M = self.interval
        zero = g * 0.0
        if M == m:
            return g * self.coeffs[0]

        def T(v):
            return (apply(op, v) * 2.0 - v * (M + m)) * (1.0 / (M - m))

        b1, b2 = zero, zero
        for c in self.coeffs[:0:-1]:
            b1, b2 = g * c + T(b1) * 2.0 - b2, b1
        return g * self.coeffs[0] + T(b1) - b2


def poly_inverse_approx(interval, degree, samples=None):
    """Chebyshev truncation of 1/lambda on [m, M] with m > 0.

    Coefficients are closed form: with a = (M+m)/(M-m) and
    r = a - sqrt(a^2 - 1), 1/(t + a) = (2/sqrt(a^2-1)) sum' (-r)^k T_k(t).
    ``sup_error`` is the maximum deviation over ``samples`` (default: 10^4
    points on the interval).
    """
    m, M = float(interval[0]), float(interval[1])
    if not m > 0:
        raise DomainError("the interval must lie in (0, inf)")
    if M < m:
        raise ConfigError("interval must satisfy m <= M")
    if degree < 0:
        raise ConfigError("degree must be nonnegative")
    if M == m:
        coeffs = np.array([1.0 / m])
    else:
        a = (M + m) / (M - m)
        s = math.sqrt(a * a - 1.0)
        r = a - s
        k = np.arange(degree + 1)
        coeffs = (2.0 / (M - m)) * (2.0 / s) * (-r) ** k
        coeffs[0] *= 0.5
    pi = PolyInverse(coeffs, (m, M), 0.0)
    lam = np.linspace(m, M, 10_000) if samples is None else np.asarray(samples, dtype=float)
    pi.sup_error = float(np.max(np.abs(pi(lam) - 1.0 / lam)))
    return pi


# ---------------------------------------------------------------------------
# Perturbation bound for K-class diagonal operators
# ---------------------------------------------------------------------------


@dataclass
class PerturbationReport:
    status: str
    op_distance: float
    inverse_norm: float
    smallness_limit: float
    lhs: float
    rhs: float
    ratio: float
    certificate: KClassCertificate | None = None

    @property
    def holds(self):
        return self.status == "ok" and self.lhs <= self.rhs * (1 + 1e-12) + 1e-15


def kclass_perturbation_check(A, A_prime, g, eps=DEFAULT_EPS, grid="auto"):
    """Check ||f - f'|| <= 2 ||g|| ||A^-1||^2 ||A' - A|| for diagonal A, A'.

    Norms are taken over the coordinates carried by g (and the explicit
    diagonals, when finite).
    """
    n = g.active_len
    for op in (A, A_prime):
        if getattr(op, "values", None) is not None:
            n = max(n, op.values.size)
    lam = np.asarray(A.diagonal_values(n), dtype=complex)
    lam2 = np.asarray(A_prime.diagonal_values(n), dtype=complex)
    if np.any(lam2 == 0):
        raise SpectralPointError("perturbed operator is singular")
    cert = kclass_certify(lam, eps, grid)
    if not cert.valid:
        return PerturbationReport("unperturbed operator not certified", 0.0, math.inf, 0.0,
                                  math.nan, math.nan, math.nan, cert)
    dist = float(np.max(np.abs(lam - lam2)))
    inv = float(1.0 / np.min(np.abs(lam)))
    limit = 1.0 / (2.0 * inv)
    if dist > limit:
        return PerturbationReport("hypothesis unmet", dist, inv, limit, math.nan, math.nan,
                                  math.nan, cert)
    gc = g.coords(n)
    lhs = float(np.linalg.norm(gc / lam - gc / lam2))
    rhs = 2.0 * float(np.linalg.norm(gc)) * inv * inv * dist
    ratio = lhs / rhs if rhs > 0 else 0.0
    return PerturbationReport("ok", dist, inv, limit, lhs, rhs, ratio, cert)


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------


@dataclass
class Assertion:
    name: str
    holds: bool
    witness: float
    detail: str = ""


@dataclass
class ScenarioReport:
    scenario: str
    N_krylov: int
    rows: list = field(default_factory=list)
    limit: dict = field(default_factory=dict)
    assertions: list = field(default_factory=list)

    @property
    def ok(self):
        return all(a.holds for a in self.assertions)

    def check(self, name, holds, witness, detail=""):
        self.assertions.append(Assertion(name, bool(holds), float(witness), detail))

    def to_json(self):
        return {
            "scenario": self.scenario,
            "N_krylov": self.N_krylov,
            "rows": self.rows,
            "limit": self.limit,
            "assertions": [a.__dict__ for a in self.assertions],
            "ok": self.ok,
        }


SOLVED_TOL = 1e-8


def krylov_residual(op, g, f, N):
    """Distance from f to K_N(op, g)."""
    kb = build_krylov(op, g, N)
    return float(distance_to_span(kb.frame, f))


def _row(n, op_distance, datum_distance, residual, solution_distance, **extra):
    row = {"n": n, "op_distance": op_distance, "datum_distance": datum_distance,
           "krylov_contains_solution": residual <= SOLVED_TOL, "krylov_residual": residual,
           "solution_distance": solution_distance}
    row.update(extra)
    return row


def ex51_operator(n):
    """Weighted shift truncated to a cycle on the first n coordinates."""
    mat = np.zeros((n, n))
    for k in range(1, n):
        mat[k, k - 1] = 1.0 / k**2
    mat[0, n - 1] = 1.0 / n**2
    return MatrixOperator(mat, extend="zero", op_id=f"ex5.1-cycle:{n}")


def ex51_distance(n):
    """Exact ||R - R_n||: column e_n carries weight sqrt(2)/n^2, later columns 1/k^2."""
    return math.sqrt(2.0) / n**2


def ex51_bound(n):
    return float(polygamma(1, n)) + 1.0 / n**2


def _scenario_ex51(n_list, N):
    rep = ScenarioReport("ex5.1", N)
    B = CanonicalN()
    g, f = unit_vector(B, 2), unit_vector(B, 1)
    R = WeightedRightShift("1/n^2")
    for n in n_list:
        if n < 2:
            raise ConfigError("ex5.1 needs n >= 2")
        Rn = ex51_operator(n)
        width = n + 40
        diff = np.array([apply(R, unit_vector(B, k, width)).coords(width + 1)
                         - np.pad(apply(Rn, unit_vector(B, k, width)).coords(width), (0, 1))
                         for k in range(1, width + 1)]).T
        measured = float(np.linalg.norm(diff, 2))
        res = krylov_residual(Rn, g, f, max(N, n))
        solve_res = (apply(Rn, f) - g).norm()
        rep.rows.append(_row(n, measured, 0.0, res, 0.0, bound=ex51_bound(n),
                             exact_distance=ex51_distance(n), solve_residual=solve_res))
        rep.check(f"n={n}: ||R - R_n|| <= bound", measured <= ex51_bound(n), measured)
        rep.check(f"n={n}: measured norm equals sqrt(2)/n^2",
                  abs(measured - ex51_distance(n)) <= 1e-12, abs(measured - ex51_distance(n)))
        rep.check(f"n={n}: e_1 solves R_n f = e_2", solve_res <= 1e-15, solve_res)
        rep.check(f"n={n}: e_1 in K(R_n, e_2)", res <= SOLVED_TOL, res)
    limit_res = [krylov_residual(R, g, f, k) for k in (1, N // 2, N)]
    rep.limit = {"krylov_residual": limit_res[-1], "residuals_by_N": limit_res,
                 "krylov_solvable": limit_res[-1] <= SOLVED_TOL, "label": "lost"}
    worst = max(abs(r - 1.0) for r in limit_res)
    rep.check("limit: dist(e_1, K_N(R, e_2)) = 1 for all N", worst <= 1e-12, worst)
    return rep


def _scenario_ex52(n_list, N):
    rep = ScenarioReport("ex5.2", N)
    B = CanonicalN()
    g = unit_vector(B, 2)
    A = MatrixOperator([[0, 0], [0, 1]], extend="zero", op_id="e2-projector")
    f_lim = unit_vector(B, 2)
    for n in n_list:
        An = RankOnePlusScaledShift(n)
        fn = unit_vector(B, 1) * float(n)
        solve_res = (apply(An, fn) - g).norm()
        v, first = g, 0.0
        for _ in range(N):
            v = apply(An, v)
            first = max(first, abs(v.coeffs[0]))
        res = krylov_residual(An, g, fn, N)
        rep.rows.append(_row(n, 1.0 / n, 0.0, res, (fn - f_lim).norm(), solve_residual=solve_res,
                             max_first_component=first))
        rep.check(f"n={n}: A_n (n e_1) = e_2", solve_res <= 1e-14, solve_res)
        rep.check(f"n={n}: <e_1, A_n^k g> = 0 for k <= N", first == 0.0, first)
        rep.check(f"n={n}: n e_1 not in K_N(A_n, g)", abs(res - n) <= 1e-12 * n, res)
    res = krylov_residual(A, g, f_lim, N)
    rep.limit = {"krylov_residual": res, "krylov_solvable": res <= SOLVED_TOL,
                 "label": "gained"}
    rep.check("limit: e_2 in K(A, e_2)", res <= SOLVED_TOL, res)
    return rep


def _volterra_sum(N, left_scale=1.0, right_scale=1.0):
    L = N + 4
    V = VolterraL2_01()
    left = V if left_scale == 1.0 else ScaledOperator(V, left_scale)
    right = RightShiftN() if right_scale == 1.0 else ScaledOperator(RightShiftN(), right_scale)
    return DirectSum(left, right, L), L


def _sum_vector(op, L, left, right):
    return CoeffVector(op.basis, op.basis.join(Legendre(0.0, 1.0).pad(left, L), right))


def _volterra_data(L):
    # orthonormal Legendre on [0, 1]: 1 = p_0, x = p_0/2 + p_1/(2 sqrt 3)
    gx = np.zeros(L, dtype=complex)
    gx[:2] = [0.5, 0.5 / math.sqrt(3.0)]
    one = np.zeros(L, dtype=complex)
    one[0] = 1.0
    return gx, one


def _e(k, length=None):
    return unit_vector(CanonicalN(), k, length).coeffs


def _scenario_direct_sum(kind, n_list, N):
    rep = ScenarioReport(kind, N)
    probe, L = _volterra_sum(N)
    gx, one = _volterra_data(L)
    vnorm = 2.0 / math.pi
    x_norm = 1.0 / math.sqrt(3.0)

    def vec(op, lc, lv, rc, rv):
        return _sum_vector(op, L, lc * lv, rc * rv)

    for n in n_list:
        if kind == "ex5.4i":
            op, _ = _volterra_sum(N)
            gn = vec(op, 1.0 / n, gx, 1.0, _e(2))
            fn = vec(op, 1.0 / n, one, 1.0, _e(1, 2))
            f = vec(op, 0.0, one, 1.0, _e(1, 2))
            op_dist, datum = 0.0, x_norm / n
        elif kind == "ex5.4ii":
            op, _ = _volterra_sum(N)
            gn = vec(op, 1.0, gx, 1.0 / n, _e(2))
            fn = vec(op, 1.0, one, 1.0 / n, _e(1, 2))
            f = vec(op, 1.0, one, 0.0, _e(1, 2))
            op_dist, datum = 0.0, 1.0 / n
        elif kind == "ex5.5i":
            op, _ = _volterra_sum(N, left_scale=1.0 / n)
            gn = vec(op, 1.0 / n, gx, 1.0, _e(2))
            fn = vec(op, 1.0, one, 1.0, _e(1, 2))
            f = vec(op, 0.0, one, 1.0, _e(1, 2))
            op_dist, datum = vnorm * (1 - 1.0 / n), x_norm * (1 - 1.0 / n)
        else:
            op, _ = _volterra_sum(N, right_scale=1.0 / n)
            gn = vec(op, 1.0, gx, 1.0 / n, _e(2))
            fn = vec(op, 1.0, one, 1.0, _e(1, 2))
            f = vec(op, 1.0, one, 0.0, _e(1, 2))
            op_dist, datum = 1.0 - 1.0 / n, 1.0 - 1.0 / n
        solve_res = (apply(op, fn) - gn).norm()
        res = krylov_residual(op, gn, fn, N)
        rep.rows.append(_row(n, op_dist, datum, res, (fn - f).norm(), solve_residual=solve_res))
        rep.check(f"n={n}: f_n solves the perturbed problem", solve_res <= 1e-12, solve_res)
        rep.check(f"n={n}: f_n not in K_N(A_n, g_n)", res > 1e-3, res)
    # limit problem
    if kind in ("ex5.4i", "ex5.5i"):
        op = _volterra_sum(N, left_scale=1.0 if kind == "ex5.4i" else 0.0)[0]
        g = _sum_vector(op, L, 0 * gx, _e(2))
        f = _sum_vector(op, L, 0 * one, _e(1, 2))
        res = krylov_residual(op, g, f, N)
        rep.limit = {"krylov_residual": res, "solve_residual": (apply(op, f) - g).norm(),
                     "krylov_solvable": res <= SOLVED_TOL, "label": "persists"}
        rep.check("limit: 0 + e_1 is not a Krylov solution", abs(res - 1.0) <= 1e-12, res)
    else:
        op = _volterra_sum(N, right_scale=1.0 if kind == "ex5.4ii" else 0.0)[0]
        g = _sum_vector(op, L, gx, 0 * _e(2))
        f = _sum_vector(op, L, one, 0 * _e(1, 2))
        Ns = [n for n in (N // 4, N // 2, N) if n >= 1]
        residuals = [krylov_residual(op, g, f, k) for k in Ns]
        # K_N(V, x) = span{x, ..., x^N}; dist(1, that span) = 1/(N+1)
        worst = max(abs(r * (k + 1) - 1.0) for r, k in zip(residuals, Ns))
        rep.limit = {"krylov_residual": residuals[-1], "residuals_by_N": residuals,
                     "N_values": Ns, "solve_residual": (apply(op, f) - g).norm(),
                     "krylov_solvable": worst <= 1e-8, "label": "emerges"}
        rep.check("limit: residual equals 1/(N+1), so 1 + 0 lies in the closure",
                  worst <= 1e-8, worst)
    return rep


def lid_operator(n, panels=64, order=16):
    """Multiplication by the raised-lid symbol on a quadrature grid of [0, 1]."""
    c = 1.0 / (2 * math.pi * n)
    x1, w1 = composite_gauss(0.0, c, 4, order)
    x2, w2 = composite_gauss(c, 1.0, panels, order)
    grid = SpectralGrid(np.concatenate([x1, x2]), np.concatenate([w1, w2]))
    vals = np.exp(2j * np.pi * grid.nodes) * np.where(grid.nodes <= c, 1.0 + 1.0 / n, 1.0)
    return Diagonal(vals, basis=grid, op_id=f"lid:{n}"), grid


def _scenario_ex56(n_list, N, grid):
    rep = ScenarioReport("ex5.6", N)
    for n in n_list:
        eps = 1.0 / (4 * n)
        cert = kclass_certify(lid_spectrum(n, eps / 4), eps, grid)
        op, g_grid = lid_operator(n)
        g = sample(g_grid, np.ones_like)
        f = sample(g_grid, lambda x: 1.0 / (np.exp(2j * np.pi * x)
                                            * np.where(x <= 1 / (2 * math.pi * n), 1 + 1 / n, 1.0)))
        res = krylov_residual(op, g, f, N)
        res_half = krylov_residual(op, g, f, max(N // 2, 1))
        rep.rows.append(_row(n, 1.0 / n, 0.0, res, 0.0, certificate=cert.summary(),
                             krylov_residual_half=res_half))
        rep.check(f"n={n}: A_n certified K-class at eps=1/(4n)", cert.valid, cert.zero_clearance,
                  cert.reason)
        rep.check(f"n={n}: Krylov residual decreases with N", res < res_half, res)
    cert = kclass_certify(circle_samples(DEFAULT_EPS / 4), DEFAULT_EPS, grid)
    Z = CanonicalZ()
    res = krylov_residual(RightShiftZ(), unit_vector(Z, 0), unit_vector(Z, -1), N)
    rep.limit = {"certificate": cert.summary(), "krylov_residual": res,
                 "krylov_solvable": res <= SOLVED_TOL, "label": "lost"}
    rep.check("limit: full circle not certified (0 enclosed)",
              not cert.complement_connected and not cert.valid, cert.zero_clearance, cert.reason)
    rep.check("limit: A^-1 e_0 = e_-1 not in K(R, e_0)", abs(res - 1.0) <= 1e-12, res)
    return rep


def _scenario_lemma51(n_list, N, eps, grid):
    rep = ScenarioReport("lemma5.1", N)
    K = 400
    base = 1.0 / np.arange(1, K + 1)
    B = CanonicalN()
    g = CoeffVector(B, 1.0 / np.arange(1, 61))
    for n in n_list:
        samples = np.concatenate([base + 1.0 / n, [1.0 / n]])
        cert = kclass_certify(samples, eps, grid)
        op = Diagonal(f"1/n + {1.0 / n!r}", op_id=f"diag:1/n+1/{n}")
        lam = op.diagonal_values(g.active_len)
        f = CoeffVector(B, g.coeffs / lam)
        res = krylov_residual(op, g, f, N)
        rep.rows.append(_row(n, 1.0 / n, 0.0, res, 0.0, certificate=cert.summary()))
        expected = 1.0 / n > eps
        rep.check(f"n={n}: certified iff 1/n > eps", cert.valid == expected, cert.zero_clearance,
                  cert.reason)
    cert = kclass_certify(np.concatenate([base, [0.0]]), eps, grid)
    rep.limit = {"certificate": cert.summary(), "label": "K-class lost in the limit"}
    rep.check("limit: compact positive A not certified", not cert.valid, cert.zero_clearance,
              cert.reason)
    return rep


SCENARIOS = ("ex5.1", "ex5.2", "ex5.4i", "ex5.4ii", "ex5.5i", "ex5.5ii", "ex5.6", "lemma5.1")


def run_scenario(scenario, n_list=None, N_krylov=40, eps=DEFAULT_EPS, grid="auto"):
    """Run one of the canned perturbation scenarios."""
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; choose from {', '.join(SCENARIOS)}")
    if N_krylov < 1:
        raise ConfigError("N_krylov must be positive")
    if n_list is None:
        n_list = {"ex5.6": [2, 4, 8], "lemma5.1": [5, 10, 40, 100]}.get(scenario, [2, 4, 8, 16])
    n_list = [int(n) for n in n_list]
    if any(n < 1 for n in n_list):
        raise ConfigError("n values must be positive")
    if scenario == "ex5.1":
        return _scenario_ex51(n_list, N_krylov)
    if scenario == "ex5.2":
        return _scenario_ex52(n_list, N_krylov)
    if scenario == "ex5.6":
        return _scenario_ex56(n_list, N_krylov, grid)
    if scenario == "lemma5.1":
        return _scenario_lemma51(n_list, N_krylov, eps, grid)
    return _scenario_direct_sum(scenario, n_list, N_krylov)
