"""The operator gallery.

Each operator acts exactly on coefficient arrays of its basis.  Shifts and
polynomial-basis operators enlarge the support by a fixed ``growth`` per
application; :func:`apply` grows the stored window on demand up to a cap and
raises instead of truncating silently.
"""
from __future__ import annotations

import ast
import math
import operator as _op
import re
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .core import (
    CanonicalN,
    CanonicalZ,
    CoeffVector,
    DirectSumBasis,
    FourierExp,
    Legendre,
    SpectralGrid,
    composite_gauss,
    expand,
    fourier_modes,
    gauss_legendre,
    legendre_table,
)
from .errors import (
    BasisMismatchError,
    CapabilityError,
    ConfigError,
    DivergenceError,
    DomainError,
    SpectralPointError,
    WindowOverflowError,
)

DEFAULT_WINDOW_CAP = 2500
OVERFLOW_GUARD = 1e150
FOURIER_WINDOW = 1001


# ---------------------------------------------------------------------------
# Sequence and symbol rules
# ---------------------------------------------------------------------------

_BINOPS = {ast.Add: _op.add, ast.Sub: _op.sub, ast.Mult: _op.mul,
           ast.Div: _op.truediv, ast.Pow: _op.pow}
_UNARY = {ast.USub: _op.neg, ast.UAdd: _op.pos}
_FUNCS = {"sqrt": np.sqrt, "exp": np.exp, "log": np.log, "abs": np.abs,
          "sin": np.sin, "cos": np.cos, "gamma": special.gamma}
_CONSTS = {"pi": np.pi, "e": np.e}
_IMPLICIT = re.compile(r"(?<=[0-9)])\s*(?=\(|[a-df-z])")


class Rule:
    """Arithmetic expression in one variable, evaluated with numpy.

    Accepts the usual shorthand: ``1/(5n)``, ``n^2``, ``p^2+1``.  ``var`` may
    also be a tuple of names, evaluated through :meth:`evaluate`.
    """

    def __init__(self, text, var="n"):
        if callable(text):
            self.text, self._fn, self.var = getattr(text, "__name__", "callable"), text, var
            return
        self.text = str(text)
        self.var = var
        src = _IMPLICIT.sub("*", self.text.replace("^", "**"))
        try:
            tree = ast.parse(src, mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse rule {text!r}") from exc
        self._tree = tree.body
        self._check(self._tree)
        self._fn = None

    def _check(self, node):
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            self._check(node.operand)
        elif isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)):
            pass
        elif isinstance(node, ast.Name) and (node.id in self._names() or node.id in _CONSTS):
            pass
        elif (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
              and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
            self._check(node.args[0])
        else:
            raise ConfigError(f"unsupported token in rule {self.text!r}")

    def _names(self):
        return (self.var,) if isinstance(self.var, str) else tuple(self.var)

    def _eval(self, node, env):
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            return _UNARY[type(node.op)](self._eval(node.operand, env))
        if isinstance(node, ast.Constant):
            return node.value
        if isinstance(node, ast.Name):
            return env[node.id] if node.id in env else _CONSTS[node.id]
        return _FUNCS[node.func.id](self._eval(node.args[0], env))

    def evaluate(self, env):
        """Evaluate with a mapping from variable names to arrays."""
        env = {k: np.asarray(v, dtype=float) for k, v in env.items()}
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return np.asarray(self._eval(self._tree, env))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self._fn is not None:
            out = self._fn(x)
        else:
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                out = self._eval(self._tree, {self.var: x})
        return np.broadcast_to(np.asarray(out), x.shape).copy()

    def __repr__(self):
        return f"Rule({self.text!r})"


# ---------------------------------------------------------------------------
# Base class
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Capabilities:
    has_adjoint: bool = True
    has_resolvent: bool = False
    has_spectrum_samples: bool = False
    is_selfadjoint: bool = False
    is_positive: bool = False
    is_unbounded: bool = False
    is_compact: bool = False


class Operator:
    """Base class: exact action on coefficient arrays of ``basis``."""

    op_id = "abstract"
    growth = 0

    def __init__(self, basis):
        self.basis = basis

    @property
    def caps(self):
        return Capabilities()

    def accepts(self, basis):
        return basis == self.basis

    def act(self, x):
        """Exact image of coefficient array x (length len(x)+growth)."""
        raise NotImplementedError

    def act_adjoint(self, x):
        raise CapabilityError(f"{self.op_id}: adjoint not available")

    def norm_bound(self):
        """Operator norm (exact where known) or inf."""
        return math.inf

    def diagonal_values(self, length):
        """Eigenvalue attached to each coordinate, for diagonal operators."""
        raise CapabilityError(f"{self.op_id} is not diagonal in its basis")

    @property
    def is_spectral(self):
        try:
            self.diagonal_values(1)
        except CapabilityError:
            return False
        return True

    def resolvent(self, xi, v, length=None):
        """(A - xi)^{-1} v."""
        raise CapabilityError(f"{self.op_id}: no resolvent")

    def spectrum_samples(self, count=512):
        raise CapabilityError(f"{self.op_id}: no spectrum samples")

    def ambient_length(self, length, steps):
        """Window needed to apply the operator ``steps`` times."""
        return length + self.growth * steps

    def __repr__(self):
        return f"<{type(self).__name__} {self.op_id}>"


def _check_basis(op, v):
    if not op.accepts(v.basis):
        raise BasisMismatchError(f"{op.op_id} acts on {op.basis!r}, got {v.basis!r}")


def _finalize(v, out, cap):
    basis = v.basis
    n = v.active_len
    if out.size > n and not np.any(out[_extra_slice(basis, n, out.size)]):
        out = out[_keep_slice(basis, n, out.size)]
    if out.size > max(cap, n):
        raise WindowOverflowError(f"window {out.size} exceeds cap {cap}")
    if not np.all(np.isfinite(out)) or np.linalg.norm(basis.to_coords(out)) > OVERFLOW_GUARD:
        raise DivergenceError("result norm above the overflow guard")
    return CoeffVector(basis, out)


def _extra_slice(basis, n, m):
    if isinstance(basis, CanonicalZ):
        k = (m - n) // 2
        return np.r_[0:k, m - k:m]
    return slice(n, m)


def _keep_slice(basis, n, m):
    if isinstance(basis, CanonicalZ):
        k = (m - n) // 2
        return slice(k, m - k)
    return slice(0, n)


def apply(op, v, cap=DEFAULT_WINDOW_CAP):
    """A v, growing the window by at most ``op.growth`` up to ``cap``."""
    _check_basis(op, v)
    return _finalize(v, np.asarray(op.act(v.coeffs), dtype=complex), cap)


def adjoint_apply(op, v, cap=DEFAULT_WINDOW_CAP):
    """A* v."""
    if not op.caps.has_adjoint:
        raise CapabilityError(f"{op.op_id}: adjoint not available")
    _check_basis(op, v)
    return _finalize(v, np.asarray(op.act_adjoint(v.coeffs), dtype=complex), cap)


def apply_power(op, v, k, cap=DEFAULT_WINDOW_CAP, closed_form=False):
    """A^k v by repeated application (or the Volterra closed form)."""
    if k < 0:
        raise DomainError("power must be nonnegative")
    if closed_form:
        if not isinstance(op, VolterraL2_01):
            raise CapabilityError("closed-form powers exist only for the Volterra operator")
        return op.power_closed_form(v, k)
    out = v
    for _ in range(k):
        out = apply(op, out, cap)
    return out


# ---------------------------------------------------------------------------
# Shifts
# ---------------------------------------------------------------------------


class RightShiftN(Operator):
    op_id = "right-shift-N"
    growth = 1

    def __init__(self):
        super().__init__(CanonicalN())

    @property
    def caps(self):
        return Capabilities()

    def act(self, x):
        return np.concatenate([[0.0], x])

    def act_adjoint(self, x):
        return LeftShiftN().act(x)

    def norm_bound(self):
        return 1.0


class LeftShiftN(Operator):
    op_id = "left-shift-N"

    def __init__(self):
        super().__init__(CanonicalN())

    def act(self, x):
        return np.concatenate([x[1:], [0.0]])

    def act_adjoint(self, x):
        return RightShiftN().act(x)[: len(x) + 1]

    def norm_bound(self):
        return 1.0


class RightShiftZ(Operator):
    """Bilateral right shift on the symmetric window."""

    op_id = "right-shift-Z"
    growth = 2

    def __init__(self):
        super().__init__(CanonicalZ())

    def act(self, x):
        return np.concatenate([[0.0, 0.0], x])

    def act_adjoint(self, x):
        return np.concatenate([x, [0.0, 0.0]])

    def norm_bound(self):
        return 1.0


class LeftShiftZ(RightShiftZ):
    op_id = "left-shift-Z"

    def act(self, x):
        return super().act_adjoint(x)

    def act_adjoint(self, x):
        return super().act(x)


class WeightedRightShift(Operator):
    """sum_n sigma_n |e_{n+1}><e_n| on l2(N), or on l2(Z) with sigma_n = s(|n|).

    On l2(Z) the rule is evaluated at |n| + 1 so that a rule written for
    n >= 1 (like ``1/(5n)``) serves the symmetric sequence of weights.
    """

    def __init__(self, rule, space="N"):
        if space not in ("N", "Z"):
            raise ConfigError("space must be 'N' or 'Z'")
        super().__init__(CanonicalN() if space == "N" else CanonicalZ())
        self.rule = rule if isinstance(rule, Rule) else Rule(rule)
        self.space = space
        self.growth = 1 if space == "N" else 2
        self.op_id = f"weighted-shift{'-Z' if space == 'Z' else ''}:{self.rule.text}"
        w = self.rule(np.arange(1, 200))
        if np.any(w <= 0) or np.any(np.diff(w) >= 0):
            raise ConfigError("weights must be positive and strictly decreasing")

    def weights(self, labels):
        labels = np.asarray(labels)
        if self.space == "N":
            return self.rule(labels).astype(complex)
        return self.rule(np.abs(labels) + 1).astype(complex)

    @property
    def caps(self):
        return Capabilities(is_compact=bool(self.rule(np.array([1e7]))[0] < 1e-3 * self.rule(np.array([1.0]))[0]))

    def act(self, x):
        w = self.weights(self.basis.labels(len(x)))
        if self.space == "N":
            return np.concatenate([[0.0], w * x])
        return np.concatenate([[0.0, 0.0], w * x])

    def act_adjoint(self, x):
        n = len(x)
        if self.space == "N":
            w = self.weights(self.basis.labels(n))
            return np.concatenate([np.conj(w[: n - 1]) * x[1:], [0.0]])
        w = self.weights(self.basis.labels(n + 2))
        return np.conj(w) * np.concatenate([x, [0.0, 0.0]])

    def norm_bound(self):
        return float(self.rule(np.array([1.0]))[0])


class CreationShift(Operator):
    """Shift with weights sqrt(n): e_n -> sqrt(n) e_{n+1} (demo only)."""

    op_id = "creation"
    growth = 1

    def __init__(self):
        super().__init__(CanonicalN())

    @property
    def caps(self):
        return Capabilities(is_unbounded=True)

    def act(self, x):
        w = np.sqrt(np.arange(1, len(x) + 1))
        return np.concatenate([[0.0], w * x])

    def act_adjoint(self, x):
        w = np.sqrt(np.arange(1, len(x)))
        return np.concatenate([w * x[1:], [0.0]])


# ---------------------------------------------------------------------------
# Diagonal and spectral operators
# ---------------------------------------------------------------------------


class Diagonal(Operator):
    """Multiplication of coefficient k by a_k in a given basis.

    ``values`` is either a :class:`Rule` evaluated on basis labels, or an
    explicit finite array (then vectors may not extend past it).
    """

    def __init__(self, values, basis=None, zeros=(), unbounded=None, op_id=None):
        super().__init__(basis or CanonicalN())
        self.zeros = tuple(int(z) for z in zeros)
        if isinstance(values, (str, Rule)) or callable(values):
            self.rule = values if isinstance(values, Rule) else Rule(values)
            self.values = None
        else:
            self.rule = None
            self.values = np.asarray(values, dtype=complex)
        label = self.rule.text if self.rule is not None else "explicit"
        self.op_id = op_id or f"diag:{label}"
        probe = self.diagonal_values(self._probe_len())
        if unbounded is None:
            unbounded = self._looks_unbounded()
        self._unbounded = bool(unbounded)
        real = bool(np.all(np.abs(probe.imag) <= 1e-15 * np.maximum(1.0, np.abs(probe.real))))
        self._caps = Capabilities(
            has_resolvent=True,
            has_spectrum_samples=True,
            is_selfadjoint=real,
            is_positive=real and bool(np.all(probe.real >= 0)),
            is_unbounded=self._unbounded,
            is_compact=not self._unbounded and self._looks_compact(),
        )

    def _probe_len(self):
        return self.values.size if self.values is not None else 1000

    def _looks_unbounded(self):
        if self.values is not None:
            return False
        big = np.abs(self.rule(np.array([1e3, 1e6])))
        return bool(big[1] > 10 * max(big[0], 1.0))

    def _looks_compact(self):
        if self.values is not None:
            return True
        tail = np.abs(self.rule(np.array([1.0, 1e7])))
        return bool(tail[1] < 1e-3 * max(tail[0], 1e-300))

    @property
    def caps(self):
        return self._caps

    def accepts(self, basis):
        return basis == self.basis

    def diagonal_values(self, length):
        if self.values is not None:
            if length > self.values.size:
                raise WindowOverflowError(
                    f"explicit diagonal has {self.values.size} entries, vector has {length}")
            vals = self.values[:length].copy()
        else:
            labels = self.basis.labels(length)
            vals = self.rule(labels).astype(complex)
        if self.zeros:
            labels = np.asarray(self.basis.labels(length))
            vals[np.isin(labels, self.zeros)] = 0.0
        return vals

    def act(self, x):
        if self.values is not None and len(x) > self.values.size:
            if np.any(x[self.values.size:]):
                raise WindowOverflowError("vector extends past the explicit diagonal")
            x = x[: self.values.size]
        return self.diagonal_values(len(x)) * x

    def act_adjoint(self, x):
        if self.values is not None and len(x) > self.values.size:
            x = x[: self.values.size]
        return np.conj(self.diagonal_values(len(x))) * x

    def norm_bound(self):
        if self._unbounded:
            return math.inf
        return float(np.max(np.abs(self.diagonal_values(self._probe_len()))))

    def resolvent(self, xi, v, length=None):
        vals = self.diagonal_values(v.active_len)
        gap = vals - xi
        if np.any(gap == 0) or np.min(np.abs(gap)) < 1e-14 * max(1.0, abs(xi)):
            raise SpectralPointError(f"shift {xi} lies on an eigenvalue")
        return CoeffVector(v.basis, v.coeffs / gap)

    def spectrum_samples(self, count=512):
        return self.diagonal_values(min(count, self._probe_len()))


class SpectralSymbol(Operator):
    """Multiplication by a real symbol m(p) on a spectral grid."""

    def __init__(self, symbol, grid, unbounded=True, op_id=None):
        super().__init__(grid)
        self.symbol = symbol if isinstance(symbol, Rule) else Rule(symbol, var="p")
        self.op_id = op_id or f"symbol:{self.symbol.text}"
        vals = self.symbol(grid.nodes)
        self._values = vals.astype(complex)
        self._caps = Capabilities(
            has_resolvent=True,
            has_spectrum_samples=True,
            is_selfadjoint=True,
            is_positive=bool(np.all(vals >= 0)),
            is_unbounded=bool(unbounded),
        )

    @property
    def caps(self):
        return self._caps

    def diagonal_values(self, length):
        return self._values[:length]

    def act(self, x):
        return self._values * x

    def act_adjoint(self, x):
        return np.conj(self._values) * x

    def norm_bound(self):
        return math.inf if self._caps.is_unbounded else float(np.max(np.abs(self._values)))

    def resolvent(self, xi, v, length=None):
        gap = self._values - xi
        if np.min(np.abs(gap)) == 0:
            raise SpectralPointError(f"shift {xi} on the grid spectrum")
        return CoeffVector(v.basis, v.coeffs / gap)

    def spectrum_samples(self, count=512):
        return self._values


def symmetric_grid(L=400.0, panels=160, order=20, pmin=1e-6):
    """Symmetric grid on [-L, L], geometric panels resolving |p| near 0."""
    edges = np.concatenate([[0.0], np.geomspace(pmin, L, panels)])
    x, w = gauss_legendre(order, -1.0, 1.0)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    pos = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wts = (half[:, None] * w[None, :]).ravel()
    order_idx = np.argsort(pos)
    pos, wts = pos[order_idx], wts[order_idx]
    return SpectralGrid(np.concatenate([-pos[::-1], pos]), np.concatenate([wts[::-1], wts]))


def gaussian_hat(p):
    """Fourier transform of exp(-x^2)."""
    return np.exp(-0.25 * np.asarray(p) ** 2) / np.sqrt(2.0)


def lorentzian_hat(p):
    """Fourier transform of 1/(1+x^2)."""
    return np.sqrt(np.pi / 2.0) * np.exp(-np.abs(np.asarray(p)))


# ---------------------------------------------------------------------------
# Function-space operators
# ---------------------------------------------------------------------------

_CACHE_LOCK = threading.Lock()
_MATRIX_CACHE = {}


def _cached(key, builder):
    with _CACHE_LOCK:
        hit = _MATRIX_CACHE.get(key)
    if hit is not None:
        return hit
    mat = builder()
    mat.setflags(write=False)
    with _CACHE_LOCK:
        return _MATRIX_CACHE.setdefault(key, mat)


def _volterra_legendre_quadrature(size):
    """<L_m, V L_k> for m, k < size by Gauss quadrature on the triangle.

    The inner integral over [0, x] uses the substitution y = x s; every
    integrand is a polynomial so the rule is exact up to rounding.  Entries
    outside the tridiagonal band vanish by degree counting and are zeroed.
    """
    q = size + 4
    x, wx = gauss_legendre(q, 0.0, 1.0)
    s, ws = gauss_legendre(q, 0.0, 1.0)
    pts = np.outer(x, s)
    inner_sums = np.empty((size, q))
    t = 2.0 * pts - 1.0
    p_prev, p_cur = np.ones_like(t), t.copy()
    for k in range(size):
        if k == 0:
            pk = p_prev
        elif k == 1:
            pk = p_cur
        else:
            p_prev, p_cur = p_cur, ((2 * k - 1) * t * p_cur - (k - 1) * p_prev) / k
            pk = p_cur
        inner_sums[k] = np.sqrt(2 * k + 1) * (pk @ ws)
    outer = legendre_table(size, (0.0, 1.0), x)
    mat = (outer * (wx * x)[None, :]) @ inner_sums.T
    band = np.abs(np.subtract.outer(np.arange(size + 1), np.arange(size))) <= 1
    band[0, 0] = True
    return np.where(band, mat, 0.0)


def volterra_legendre_closed_form(size):
    """Tridiagonal matrix of V in the orthonormal Legendre basis on [0, 1]."""
    mat = np.zeros((size + 1, size))
    mat[0, 0] = 0.5
    for k in range(size):
        mat[k + 1, k] = 0.5 / np.sqrt((2 * k + 1) * (2 * k + 3))
        if k >= 1:
            mat[k - 1, k] = -0.5 / np.sqrt((2 * k + 1) * (2 * k - 1))
    return mat


def volterra_fourier_matrix(size):
    """<phi_m, V phi_n> for the exponential basis on [0, 1], closed form."""
    modes = fourier_modes(size)
    m = modes[:, None]
    n = modes[None, :]
    mat = np.zeros((size, size), dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        col0 = np.where(modes == 0, 0.5, 1j / (2 * np.pi * np.where(modes == 0, 1, modes)))
        rest = ((m == n).astype(complex) - (m == 0)) / (2j * np.pi * np.where(n == 0, 1, n))
    mat[:, :] = np.where(n == 0, col0[:, None], rest)
    return mat


class VolterraL2_01(Operator):
    """(Vf)(x) = int_0^x f(y) dy on L2[0, 1].

    In the Legendre basis the action is exact (degree grows by one).  In the
    Fourier basis the operator is represented by its compression onto a fixed
    mode window (the image of an exponential has infinitely many modes).
    """

    op_id = "volterra"

    def __init__(self, basis=None, fourier_window=FOURIER_WINDOW):
        super().__init__(basis or Legendre(0.0, 1.0))
        if isinstance(self.basis, Legendre):
            if (self.basis.a, self.basis.b) != (0.0, 1.0):
                raise DomainError("Volterra operator lives on [0, 1]")
            self.growth = 1
        elif isinstance(self.basis, FourierExp):
            if (self.basis.a, self.basis.b) != (0.0, 1.0):
                raise DomainError("Volterra operator lives on [0, 1]")
            self.fourier_window = int(fourier_window)
        else:
            raise BasisMismatchError("Volterra acts on Legendre or Fourier coefficients")

    @property
    def caps(self):
        return Capabilities(has_resolvent=True, is_compact=True)

    def matrix(self, size):
        """Matrix in the basis: (size+1) x size for Legendre, square for Fourier."""
        if isinstance(self.basis, Legendre):
            cache_size = max(64, 1 << int(np.ceil(np.log2(max(size, 1)))))
            full = _cached(("volterra-legendre", cache_size),
                           lambda: _volterra_legendre_quadrature(cache_size))
            return full[: size + 1, :size]
        full = _cached(("volterra-fourier", self.fourier_window),
                       lambda: volterra_fourier_matrix(self.fourier_window))
        if size > self.fourier_window:
            raise WindowOverflowError("vector longer than the Fourier window")
        return full[:size, :size]

    def _fourier_pad(self, x):
        if len(x) > self.fourier_window:
            raise WindowOverflowError("vector longer than the Fourier window")
        return np.pad(x, (0, self.fourier_window - len(x)))

    def act(self, x):
        if isinstance(self.basis, Legendre):
            return self.matrix(len(x)) @ x
        return self.matrix(self.fourier_window) @ self._fourier_pad(x)

    def act_adjoint(self, x):
        if isinstance(self.basis, Legendre):
            mat = self.matrix(len(x) + 1)
            return mat[: len(x) + 1, : len(x) + 1].conj().T @ np.pad(x, (0, 1))
        return self.matrix(self.fourier_window).conj().T @ self._fourier_pad(x)

    def norm_bound(self):
        return 2.0 / np.pi

    def image_values(self, coeffs, x):
        """Point values of V f for a coefficient array of f."""
        coeffs = np.asarray(coeffs, dtype=complex)
        x = np.asarray(x, dtype=float)
        if isinstance(self.basis, Legendre):
            img = self.matrix(len(coeffs)) @ coeffs
            return legendre_table(len(img) - 1, (0.0, 1.0), x).T @ img
        modes = fourier_modes(len(coeffs))
        vals = np.zeros(x.shape, dtype=complex)
        for c, m in zip(coeffs, modes):
            if c == 0:
                continue
            if m == 0:
                vals += c * x
            else:
                vals += c * (np.exp(2j * np.pi * m * x) - 1.0) / (2j * np.pi * m)
        return vals

    def power_closed_form(self, v, k):
        """V^k v from the Cauchy formula for repeated integration."""
        if not isinstance(self.basis, Legendre):
            raise CapabilityError("closed-form powers implemented on Legendre coefficients")
        if k == 0:
            return v
        n_in = v.active_len
        n_out = n_in + k
        q = n_out + 4
        x, wx = gauss_legendre(q, 0.0, 1.0)
        s, ws = gauss_legendre(q, 0.0, 1.0)
        pts = np.outer(x, s).ravel()
        fvals = (legendre_table(n_in - 1, (0.0, 1.0), pts).T @ v.coeffs).reshape(q, q)
        kernel = (1.0 - s) ** (k - 1) * ws
        vals = x ** k / math.factorial(k - 1) * (fvals @ kernel)
        table = legendre_table(n_out - 1, (0.0, 1.0), x)
        return CoeffVector(v.basis, table @ (wx * vals))

    def resolvent(self, xi, v, length=None):
        """(V - xi)^{-1} v = -(xi - V)^{-1} v."""
        return -volterra_resolvent(xi, v, length)


class MultiplicationByX(Operator):
    """(Mf)(x) = x f(x) on L2(a, b)."""

    def __init__(self, a, b, basis=None, fourier_window=FOURIER_WINDOW):
        if not a < b:
            raise DomainError("need a < b")
        super().__init__(basis or Legendre(a, b))
        self.a, self.b = float(a), float(b)
        self.op_id = f"mult-x:{self.a:g},{self.b:g}"
        if isinstance(self.basis, Legendre):
            self.growth = 1
        elif isinstance(self.basis, FourierExp):
            self.fourier_window = int(fourier_window)
        elif not isinstance(self.basis, SpectralGrid):
            raise BasisMismatchError("multiplication acts on Legendre, Fourier or grid vectors")
        if isinstance(self.basis, (Legendre, FourierExp)) and (self.basis.a, self.basis.b) != (self.a, self.b):
            raise DomainError("basis interval differs from the operator interval")

    @property
    def caps(self):
        return Capabilities(has_resolvent=True, has_spectrum_samples=True,
                            is_selfadjoint=True, is_positive=self.a >= 0)

    def diagonal_values(self, length):
        if isinstance(self.basis, SpectralGrid):
            return self.basis.nodes[:length].astype(complex)
        raise CapabilityError("multiplication is diagonal only on a grid")

    def matrix(self, size):
        if isinstance(self.basis, Legendre):
            c, h = 0.5 * (self.a + self.b), 0.5 * (self.b - self.a)
            k = np.arange(1, size + 1)
            beta = k / np.sqrt(4.0 * k * k - 1.0)
            mat = np.zeros((size + 1, size))
            mat[np.arange(size), np.arange(size)] = c
            mat[k, k - 1] = h * beta
            mat[k[:-1] - 1, k[:-1]] = h * beta[:-1]
            return mat
        if isinstance(self.basis, FourierExp):
            return _cached(("mult-fourier", self.a, self.b, size), lambda: self._fourier(size))
        raise CapabilityError("no matrix on a grid")

    def _fourier(self, size):
        length = self.b - self.a
        modes = fourier_modes(size)
        diff = modes[None, :] - modes[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            off = length / (2j * np.pi * np.where(diff == 0, 1, diff))
        return np.where(diff == 0, 0.5 * (self.a + self.b), off)

    def act(self, x):
        if isinstance(self.basis, SpectralGrid):
            return self.basis.nodes * x
        if isinstance(self.basis, Legendre):
            return self.matrix(len(x)) @ x
        if len(x) > self.fourier_window:
            raise WindowOverflowError("vector longer than the Fourier window")
        return self.matrix(self.fourier_window) @ np.pad(x, (0, self.fourier_window - len(x)))

    def act_adjoint(self, x):
        return self.act(x)

    def norm_bound(self):
        return max(abs(self.a), abs(self.b))

    def image_values(self, coeffs, x):
        from .core import basis_table
        x = np.asarray(x, dtype=float)
        return x * (basis_table(self.basis, len(coeffs), x).T @ np.asarray(coeffs, dtype=complex))

    def resolvent(self, xi, v, length=None):
        """(M - xi)^{-1} v via quadrature of v(x)/(x - xi)."""
        if self.a <= np.real(xi) <= self.b and abs(np.imag(xi)) < 1e-14:
            raise SpectralPointError(f"shift {xi} inside [{self.a}, {self.b}]")
        if isinstance(self.basis, SpectralGrid):
            return CoeffVector(v.basis, v.coeffs / (self.basis.nodes - xi))
        from .core import basis_table, evaluate
        n_out = length or max(v.active_len + 64, 128)
        if isinstance(self.basis, FourierExp):
            n_out = min(n_out, self.fourier_window)
        return expand(self.basis, lambda t: evaluate(v, t) / (t - xi), n_out,
                      order=max(2 * n_out + 64, 256))

    def spectrum_samples(self, count=512):
        return np.linspace(self.a, self.b, count).astype(complex)


def convolution_coeffs(n_range):
    """Fourier coefficients c_n of the convolution kernel; c_0 = 0."""
    out = {}
    for n in n_range:
        n = int(n)
        out[n] = 0j if n == 0 else 1.0 / (1 + 4j * n * np.pi + (1 - 4 * n * n) * np.pi ** 2)
    return out


def convolution_kernel(x):
    """The kernel k(x) whose Fourier coefficients are :func:`convolution_coeffs`."""
    x = np.asarray(x, dtype=float)
    return np.e * np.sin(np.pi * x) / ((1 + np.e) * np.pi * np.exp(x)) - 1.0 / (1 + np.pi ** 2)


class ConvolutionL2_01(Diagonal):
    """Convolution on L2[0, 1], diagonal in the exponential basis."""

    def __init__(self):
        def rule(modes):
            modes = np.asarray(modes, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                c = 1.0 / (1 + 4j * modes * np.pi + (1 - 4 * modes ** 2) * np.pi ** 2)
            return np.where(modes == 0, 0.0, c)

        rule.__name__ = "convolution"
        super().__init__(Rule(rule), basis=FourierExp(0.0, 1.0), unbounded=False,
                         op_id="convolution")

    def _looks_compact(self):
        return True

    def norm_bound(self):
        return float(np.max(np.abs(self.diagonal_values(2001))))


# ---------------------------------------------------------------------------
# Finite matrices, sums and wrappers
# ---------------------------------------------------------------------------


class MatrixOperator(Operator):
    """Dense matrix on the first n coordinates of l2(N).

    ``extend='finite'`` treats the space as C^n (longer vectors are an
    error); ``extend='zero'`` extends by zero, giving a finite-rank operator.
    """

    def __init__(self, matrix, extend="finite", op_id="matrix", selfadjoint=None):
        super().__init__(CanonicalN())
        mat = np.array(matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ConfigError("matrix operator needs a square matrix")
        mat.setflags(write=False)
        self.matrix = mat
        self.extend = extend
        self.op_id = op_id
        herm = np.allclose(mat, mat.conj().T, atol=1e-14) if selfadjoint is None else selfadjoint
        pos = herm and bool(np.all(np.linalg.eigvalsh(mat) >= -1e-14)) if mat.size else False
        self._caps = Capabilities(is_selfadjoint=herm, is_positive=pos, is_compact=True)

    @property
    def caps(self):
        return self._caps

    def _fit(self, x):
        n = self.matrix.shape[0]
        if len(x) > n:
            if self.extend == "finite" and np.any(x[n:]):
                raise WindowOverflowError(f"vector exceeds the {n}-dimensional space")
            tail = len(x) - n
            return x[:n], tail
        return np.pad(x, (0, n - len(x))), 0

    def act(self, x):
        y, tail = self._fit(np.asarray(x, dtype=complex))
        return np.concatenate([self.matrix @ y, np.zeros(tail)])

    def act_adjoint(self, x):
        y, tail = self._fit(np.asarray(x, dtype=complex))
        return np.concatenate([self.matrix.conj().T @ y, np.zeros(tail)])

    def norm_bound(self):
        return float(np.linalg.norm(self.matrix, 2))

    def ambient_length(self, length, steps):
        return max(length, self.matrix.shape[0])


class TwoByTwoTheta(MatrixOperator):
    """[[1, cos t], [0, sin t]] on C^2."""

    def __init__(self, theta):
        self.theta = float(theta)
        super().__init__([[1.0, np.cos(theta)], [0.0, np.sin(theta)]],
                         op_id=f"theta:{self.theta:g}")


class RankOnePlusScaledShift(Operator):
    """|e_2><e_2| + R/n on l2(N)."""

    growth = 1

    def __init__(self, n):
        super().__init__(CanonicalN())
        if n <= 0:
            raise ConfigError("n must be positive")
        self.n = n
        self.op_id = f"rank-one-shift:{n:g}"

    def act(self, x):
        out = np.concatenate([[0.0], np.asarray(x, dtype=complex)]) / self.n
        if len(x) >= 2:
            out[1] += x[1]
        return out

    def act_adjoint(self, x):
        x = np.asarray(x, dtype=complex)
        out = np.concatenate([x[1:], [0.0]]) / self.n
        if len(x) >= 2:
            out[1] += x[1]
        return out

    def norm_bound(self):
        return 1.0 + 1.0 / self.n


class ScaledOperator(Operator):
    """c A."""

    def __init__(self, inner_op, factor):
        super().__init__(inner_op.basis)
        self.inner = inner_op
        self.factor = factor
        self.growth = inner_op.growth
        self.op_id = f"{factor:g}*{inner_op.op_id}" if np.isreal(factor) else f"scaled:{inner_op.op_id}"

    @property
    def caps(self):
        c = self.inner.caps
        real = np.isreal(self.factor)
        return Capabilities(
            has_adjoint=c.has_adjoint,
            has_resolvent=c.has_resolvent and self.factor != 0,
            has_spectrum_samples=c.has_spectrum_samples,
            is_selfadjoint=c.is_selfadjoint and real,
            is_positive=c.is_positive and real and np.real(self.factor) >= 0,
            is_unbounded=c.is_unbounded and self.factor != 0,
            is_compact=c.is_compact or self.factor == 0,
        )

    def accepts(self, basis):
        return self.inner.accepts(basis)

    def act(self, x):
        return self.factor * self.inner.act(x)

    def act_adjoint(self, x):
        return np.conj(self.factor) * self.inner.act_adjoint(x)

    def diagonal_values(self, length):
        return self.factor * self.inner.diagonal_values(length)

    def norm_bound(self):
        return abs(self.factor) * self.inner.norm_bound() if self.factor != 0 else 0.0

    def resolvent(self, xi, v, length=None):
        if self.factor == 0:
            raise CapabilityError("zero operator has resolvent -1/xi, use it directly")
        return self.inner.resolvent(xi / self.factor, v, length) / self.factor

    def spectrum_samples(self, count=512):
        return self.factor * self.inner.spectrum_samples(count)


class SquaredOperator(Operator):
    """A^2 (used by the A^2 f = A g route)."""

    def __init__(self, inner_op):
        super().__init__(inner_op.basis)
        self.inner = inner_op
        self.growth = 2 * inner_op.growth
        self.op_id = f"({inner_op.op_id})^2"

    @property
    def caps(self):
        c = self.inner.caps
        return Capabilities(has_adjoint=c.has_adjoint, has_spectrum_samples=c.has_spectrum_samples,
                            is_selfadjoint=c.is_selfadjoint, is_positive=c.is_selfadjoint,
                            is_unbounded=c.is_unbounded, is_compact=c.is_compact)

    def accepts(self, basis):
        return self.inner.accepts(basis)

    def act(self, x):
        return self.inner.act(self.inner.act(x))

    def act_adjoint(self, x):
        return self.inner.act_adjoint(self.inner.act_adjoint(x))

    def diagonal_values(self, length):
        return self.inner.diagonal_values(length) ** 2

    def norm_bound(self):
        return self.inner.norm_bound() ** 2


class DirectSum(Operator):
    """A_1 (+) A_2 on a fixed-length left block and a growable right block."""

    def __init__(self, left, right, left_len):
        basis = DirectSumBasis(left.basis, right.basis, int(left_len))
        super().__init__(basis)
        self.left, self.right = left, right
        self.left_len = int(left_len)
        self.growth = right.growth
        self.op_id = f"({left.op_id})+({right.op_id})"

    @property
    def caps(self):
        a, b = self.left.caps, self.right.caps
        return Capabilities(
            has_adjoint=a.has_adjoint and b.has_adjoint,
            is_selfadjoint=a.is_selfadjoint and b.is_selfadjoint,
            is_positive=a.is_positive and b.is_positive,
            is_unbounded=a.is_unbounded or b.is_unbounded,
            is_compact=a.is_compact and b.is_compact,
        )

    def _left(self, y):
        if len(y) > self.left_len:
            if np.any(y[self.left_len:]):
                raise WindowOverflowError("left block outgrew its declared length")
            y = y[: self.left_len]
        return np.pad(y, (0, self.left_len - len(y)))

    def act(self, x):
        lpart, rpart = self.basis.split(x)
        return np.concatenate([self._left(self.left.act(lpart)), self.right.act(rpart)])

    def act_adjoint(self, x):
        lpart, rpart = self.basis.split(x)
        return np.concatenate([self._left(self.left.act_adjoint(lpart)),
                               self.right.act_adjoint(rpart)])

    def norm_bound(self):
        return max(self.left.norm_bound(), self.right.norm_bound())


# ---------------------------------------------------------------------------
# Volterra closed forms
# ---------------------------------------------------------------------------


def volterra_svd(n_max, length=None):
    """Singular triples (sigma_n, phi_n, psi_n), n = 0..n_max-1.

    phi_n and psi_n are returned as Legendre coefficient vectors obtained by
    quadrature projection.
    """
    if n_max < 1:
        raise DomainError("n_max must be at least 1")
    basis = Legendre(0.0, 1.0)
    length = length or int(40 + 3 * (2 * n_max + 1))
    out = []
    for n in range(n_max):
        freq = (2 * n + 1) * np.pi / 2
        sigma = 2.0 / ((2 * n + 1) * np.pi)
        phi = expand(basis, lambda x, f=freq: np.sqrt(2.0) * np.cos(f * x), length)
        psi = expand(basis, lambda x, f=freq: np.sqrt(2.0) * np.sin(f * x), length)
        out.append((sigma, phi, psi))
    return out


def volterra_resolvent(z, psi, length=None):
    """(z - V)^{-1} psi = psi/z + z^{-2} int_0^x exp((x-y)/z) psi(y) dy."""
    if z == 0:
        raise SpectralPointError("z = 0 is the spectrum of the Volterra operator")
    if not isinstance(psi.basis, Legendre) or (psi.basis.a, psi.basis.b) != (0.0, 1.0):
        raise BasisMismatchError("resolvent implemented on Legendre coefficients over [0, 1]")
    n_in = psi.active_len
    n_out = length or max(n_in + 40, 64)
    q = max(n_out, n_in) + 24
    x, wx = gauss_legendre(q, 0.0, 1.0)
    s, ws = gauss_legendre(q, 0.0, 1.0)
    pts = np.outer(x, s)
    pvals = (legendre_table(n_in - 1, (0.0, 1.0), pts.ravel()).T @ psi.coeffs).reshape(q, q)
    kern = np.exp(np.outer(x, 1.0 - s) / z) * ws[None, :]
    integral = x * np.sum(kern * pvals, axis=1)
    direct = legendre_table(n_in - 1, (0.0, 1.0), x).T @ psi.coeffs
    vals = direct / z + integral / z ** 2
    table = legendre_table(n_out - 1, (0.0, 1.0), x)
    return CoeffVector(psi.basis, table @ (wx * vals))


# ---------------------------------------------------------------------------
# Smoothness classes of vectors
# ---------------------------------------------------------------------------


@dataclass
class VectorClassReport:
    norms: list
    analytic_fit: float
    qa_partial_sums: list
    bounded_fit: float
    bounded_sup: float | None
    truncated: bool
    classification: dict = field(default_factory=dict)


def power_norms(op, g, n_max, cap=DEFAULT_WINDOW_CAP):
    """||A^n g|| for n = 0..n_max; stops early on overflow.

    Diagonal operators are handled in log space through their eigenvalues,
    so large powers stay accurate.
    """
    norms = []
    truncated = False
    if op.is_spectral:
        lam = np.abs(op.diagonal_values(g.active_len))
        mass = np.abs(g.coords()) ** 2
        keep = mass > 0
        lam, mass = lam[keep], mass[keep]
        with np.errstate(divide="ignore"):
            loglam, logmass = np.log(lam), np.log(mass)
        for n in range(n_max + 1):
            terms = logmass + 2 * n * loglam if n else logmass
            top = np.max(terms) if terms.size else -np.inf
            log_sq = top + np.log(np.sum(np.exp(terms - top))) if np.isfinite(top) else -np.inf
            if 0.5 * log_sq > np.log(OVERFLOW_GUARD):
                truncated = True
                break
            norms.append(float(np.exp(0.5 * log_sq)))
        return norms, truncated
    v = g
    for n in range(n_max + 1):
        if n:
            try:
                v = apply(op, v, cap)
            except (DivergenceError, WindowOverflowError):
                truncated = True
                break
        norms.append(v.norm())
    return norms, truncated


def estimate_norm(op, start, iters=200, tol=1e-12, cap=DEFAULT_WINDOW_CAP):
    """||A|| by power iteration on A*A started from ``start``.

    Each step renormalizes and restores the starting window, so polynomial
    bases do not grow without bound.
    """
    if not op.caps.has_adjoint:
        raise CapabilityError(f"{op.op_id}: power iteration needs the adjoint")
    length = start.active_len
    v = start / start.norm()
    est = 0.0
    for _ in range(iters):
        w = adjoint_apply(op, apply(op, v, cap), cap)
        if w.active_len > length and not isinstance(w.basis, CanonicalZ):
            w = CoeffVector(w.basis, w.coeffs[:length])
        lam = w.norm()
        if lam == 0:
            return 0.0
        v = w / lam
        if abs(lam - est) <= tol * lam:
            est = lam
            break
        est = lam
    return float(np.sqrt(est))


def vector_class_report(op, g, n_max, cap=DEFAULT_WINDOW_CAP):
    """Heuristic smoothness diagnostics from the sequence ||A^n g||."""
    norms, truncated = power_norms(op, g, n_max, cap)
    seq = np.asarray(norms[1:], dtype=float)
    n = np.arange(1, seq.size + 1)
    pos = seq > 0
    with np.errstate(divide="ignore"):
        log_fact = special.gammaln(n + 1)
        analytic = float(np.max(np.exp((np.log(seq[pos]) - log_fact[pos]) / n[pos]))) if pos.any() else 0.0
        bounded = float(np.max(np.exp(np.log(seq[pos]) / n[pos]))) if pos.any() else 0.0
        terms = np.where(pos, np.exp(-np.log(np.where(pos, seq, 1.0)) / n), np.inf)
    partial = np.cumsum(terms).tolist()
    bounded_sup = None
    if op.is_spectral:
        lam = np.abs(op.diagonal_values(g.active_len))
        support = np.abs(g.coords()) > 0
        bounded_sup = float(max(np.max(lam[support]) if support.any() else 0.0, bounded))
    incr = np.diff(partial[-5:]) if len(partial) >= 6 else np.array([])
    classification = {
        "label": "heuristic",
        "analytic": bool(np.isfinite(analytic)),
        "quasi_analytic_partial_sums_growing": bool(incr.size and np.min(incr) > 1e-3),
    }
    return VectorClassReport(norms, analytic, partial, bounded, bounded_sup, truncated,
                             classification)


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

OPERATOR_TABLE = {
    "right-shift-N": "unilateral right shift on l2(N)",
    "left-shift-N": "unilateral left shift on l2(N)",
    "right-shift-Z": "bilateral right shift on l2(Z)",
    "left-shift-Z": "bilateral left shift on l2(Z)",
    "weighted-shift:<rule>": "weighted right shift on l2(N), e.g. weighted-shift:1/(5n)",
    "weighted-shift-Z:<rule>": "weighted right shift on l2(Z), sigma_n = rule(|n|+1)",
    "diag:<rule>": "diagonal operator a_n = rule(n); params: zeros=[...]",
    "volterra": "Volterra operator on L2[0,1]; params: basis=legendre|fourier",
    "convolution": "convolution on L2[0,1], diagonal in the exponential basis",
    "mult-x:<a>,<b>": "multiplication by x on L2(a,b); params: basis=legendre|fourier",
    "laplacian": "-d2/dx2 as the Fourier symbol p^2; params: L, panels, order",
    "laplacian+1": "-d2/dx2 + 1 as the Fourier symbol p^2 + 1",
    "rank-one-shift:<n>": "|e2><e2| + R/n on l2(N)",
    "theta:<angle>": "the 2x2 matrix [[1, cos t], [0, sin t]]",
    "creation": "shift with weights sqrt(n), demo only",
}


def make_operator(op_id, **params):
    """Build a gallery operator from its string identifier."""
    head, _, arg = op_id.partition(":")
    if op_id == "right-shift-N":
        return RightShiftN()
    if op_id == "left-shift-N":
        return LeftShiftN()
    if op_id == "right-shift-Z":
        return RightShiftZ()
    if op_id == "left-shift-Z":
        return LeftShiftZ()
    if head == "weighted-shift" and arg:
        return WeightedRightShift(arg, "N")
    if head == "weighted-shift-Z" and arg:
        return WeightedRightShift(arg, "Z")
    if head == "diag" and arg:
        return Diagonal(arg, zeros=params.get("zeros", ()), unbounded=params.get("unbounded"))
    if op_id == "volterra":
        kind = params.get("basis", "legendre")
        basis = Legendre(0.0, 1.0) if kind == "legendre" else FourierExp(0.0, 1.0)
        return VolterraL2_01(basis, params.get("fourier_window", FOURIER_WINDOW))
    if op_id == "convolution":
        return ConvolutionL2_01()
    if head == "mult-x" and arg:
        a, b = (float(t) for t in arg.split(","))
        kind = params.get("basis", "legendre")
        basis = Legendre(a, b) if kind == "legendre" else FourierExp(a, b)
        return MultiplicationByX(a, b, basis, params.get("fourier_window", FOURIER_WINDOW))
    if op_id in ("laplacian", "laplacian+1"):
        grid = symmetric_grid(params.get("L", 400.0), params.get("panels", 160),
                              params.get("order", 20))
        symbol = "p^2" if op_id == "laplacian" else "p^2+1"
        return SpectralSymbol(symbol, grid, unbounded=True, op_id=op_id)
    if head == "rank-one-shift" and arg:
        return RankOnePlusScaledShift(float(arg))
    if head == "theta" and arg:
        return TwoByTwoTheta(float(arg))
    if op_id == "creation":
        return CreationShift()
    raise ConfigError(f"unknown operator id {op_id!r}")
