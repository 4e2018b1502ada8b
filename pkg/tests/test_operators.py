import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import gamma

from krylovlab.core import (
    CanonicalN,
    CanonicalZ,
    CoeffVector,
    FourierExp,
    Legendre,
    expand,
    fourier_modes,
    inner,
    unit_vector,
)
from krylovlab.errors import (
    BasisMismatchError,
    CapabilityError,
    ConfigError,
    DivergenceError,
    DomainError,
    SpectralPointError,
    WindowOverflowError,
)
from krylovlab.operators import (
    OPERATOR_TABLE,
    Diagonal,
    MultiplicationByX,
    RightShiftN,
    Rule,
    VolterraL2_01,
    WeightedRightShift,
    adjoint_apply,
    apply,
    apply_power,
    convolution_coeffs,
    convolution_kernel,
    estimate_norm,
    lorentzian_hat,
    make_operator,
    power_norms,
    vector_class_report,
    volterra_legendre_closed_form,
    volterra_resolvent,
    volterra_svd,
)
from krylovlab.solvers import lognormal_moment_check


def _random(basis, n, seed):
    rng = np.random.default_rng(seed)
    if isinstance(basis, CanonicalZ):
        n = 2 * (n // 2) + 1
    return CoeffVector(basis, rng.standard_normal(n) + 1j * rng.standard_normal(n))


ADJOINT_CASES = [
    "right-shift-N", "left-shift-N", "right-shift-Z", "left-shift-Z",
    "weighted-shift:1/(5n)", "weighted-shift-Z:1/n", "diag:1/n", "volterra",
    "mult-x:1,2", "rank-one-shift:3", "creation",
]


class TestRule:
    def test_implicit_multiplication(self):
        np.testing.assert_allclose(Rule("1/(5n)")([1, 2]), [0.2, 0.1])

    def test_caret_power(self):
        np.testing.assert_allclose(Rule("p^2+1", var="p")([0, 2]), [1, 5])

    def test_several_variables(self):
        out = Rule("rho1*N^2", var=("rho1", "N")).evaluate({"rho1": [1, 2], "N": [3, 4]})
        np.testing.assert_allclose(out, [9, 32])

    @pytest.mark.parametrize("text", ["__import__('os')", "n.real", "n if n else 1", "1/("])
    def test_unsafe_or_malformed(self, text):
        with pytest.raises(ConfigError):
            Rule(text)


class TestShifts:
    def test_right_shift_moves_support(self):
        out = apply(RightShiftN(), unit_vector(CanonicalN(), 1))
        np.testing.assert_array_equal(out.coeffs, [0, 1])

    def test_left_shift_kills_first(self):
        out = apply(make_operator("left-shift-N"), unit_vector(CanonicalN(), 1))
        assert out.norm() == 0

    def test_bilateral_shift(self):
        out = apply(make_operator("right-shift-Z"), unit_vector(CanonicalZ(), 0))
        assert out.coeffs[out.active_len // 2 + 1] == 1

    def test_weighted_shift_weights(self):
        op = make_operator("weighted-shift:1/(5n)")
        out = apply(op, CoeffVector(CanonicalN(), [1.0, 1.0]))
        np.testing.assert_allclose(out.coeffs, [0, 0.2, 0.1])

    def test_weights_must_decrease(self):
        with pytest.raises(ConfigError):
            WeightedRightShift("n")

    def test_window_cap(self):
        v = unit_vector(CanonicalN(), 1)
        with pytest.raises(WindowOverflowError):
            apply_power(RightShiftN(), v, 20, cap=10)

    def test_creation_diverges(self):
        v = unit_vector(CanonicalN(), 1)
        with pytest.raises(DivergenceError):
            apply_power(make_operator("creation"), v, 300)

    def test_basis_mismatch(self):
        with pytest.raises(BasisMismatchError):
            apply(RightShiftN(), unit_vector(Legendre(), 0))


class TestAdjoint:
    @pytest.mark.parametrize("op_id", ADJOINT_CASES)
    @given(seed=st.integers(0, 2**31))
    def test_adjoint_identity(self, op_id, seed):
        op = make_operator(op_id)
        u = _random(op.basis, 9, seed)
        v = _random(op.basis, 9, seed + 1)
        lhs = inner(apply(op, u), v)
        rhs = inner(u, adjoint_apply(op, v))
        assert lhs == pytest.approx(rhs, abs=1e-12 * (1 + u.norm() * v.norm()))

    def test_fourier_volterra_adjoint(self):
        op = make_operator("volterra", basis="fourier", fourier_window=41)
        u = _random(FourierExp(), 41, 1)
        v = _random(FourierExp(), 41, 2)
        assert inner(apply(op, u), v) == pytest.approx(inner(u, adjoint_apply(op, v)), abs=1e-12)


class TestDiagonal:
    def test_zeros_override(self):
        op = Diagonal("1/(5n)", zeros=(3,))
        out = apply(op, CoeffVector(CanonicalN(), np.ones(4)))
        np.testing.assert_allclose(out.coeffs.real, [0.2, 0.1, 0, 0.05])

    def test_caps(self):
        op = Diagonal("1/n")
        assert op.caps.is_selfadjoint and op.caps.is_positive and op.caps.is_compact
        assert Diagonal("n").caps.is_unbounded

    def test_resolvent(self):
        op = Diagonal("1/n")
        v = CoeffVector(CanonicalN(), [1.0, 1.0])
        w = op.resolvent(2.0, v)
        np.testing.assert_allclose((apply(op, w) - 2.0 * w).coeffs, v.coeffs)
        with pytest.raises(SpectralPointError):
            op.resolvent(0.5, v)

    def test_convolution_symbol_matches_kernel(self):
        # the Fourier coefficients of the kernel are the symbol
        modes = fourier_modes(9)
        coeffs = expand(FourierExp(), convolution_kernel, 9, order=400).coeffs
        table = convolution_coeffs(modes)
        np.testing.assert_allclose(coeffs, [table[m] for m in modes], atol=1e-14)


class TestVolterra:
    def test_matrix_quadrature_matches_closed_form(self):
        op = VolterraL2_01()
        np.testing.assert_allclose(op.matrix(12), volterra_legendre_closed_form(12), atol=1e-13)

    def test_action_on_one(self):
        one = CoeffVector(Legendre(), [1.0])
        out = apply(VolterraL2_01(), one)
        np.testing.assert_allclose(out.coeffs, [0.5, 0.5 / np.sqrt(3.0)], atol=1e-15)

    def test_closed_form_powers(self):
        v = CoeffVector(Legendre(), [1.0, -2.0, 0.5])
        a = apply_power(VolterraL2_01(), v, 4)
        b = apply_power(VolterraL2_01(), v, 4, closed_form=True)
        np.testing.assert_allclose(a.coeffs, b.coeffs, atol=1e-14)

    def test_closed_form_only_for_volterra(self):
        with pytest.raises(CapabilityError):
            apply_power(RightShiftN(), unit_vector(CanonicalN(), 1), 2, closed_form=True)

    def test_singular_values(self):
        triples = volterra_svd(20)
        sig = np.array([t[0] for t in triples])
        np.testing.assert_allclose(sig, 2.0 / ((2 * np.arange(20) + 1) * np.pi), rtol=0, atol=1e-12)

    def test_singular_vectors(self):
        op = VolterraL2_01()
        for sigma, phi, psi in volterra_svd(10):
            assert (apply(op, phi) - sigma * psi).norm() <= 1e-8

    def test_power_iteration_norm(self):
        est = estimate_norm(VolterraL2_01(), CoeffVector(Legendre(), np.ones(30)))
        assert est == pytest.approx(2.0 / np.pi, abs=1e-3)

    def test_resolvent(self):
        psi = CoeffVector(Legendre(), [1.0, 0.3])
        z = 0.7
        w = volterra_resolvent(z, psi)
        back = z * w - apply(VolterraL2_01(), w)
        np.testing.assert_allclose(back.coeffs[:2], psi.coeffs, atol=1e-10)
        with pytest.raises(SpectralPointError):
            volterra_resolvent(0.0, psi)

    def test_interval_enforced(self):
        with pytest.raises(DomainError):
            VolterraL2_01(Legendre(0.0, 2.0))


class TestMultiplication:
    def test_three_term_action(self):
        op = MultiplicationByX(1.0, 2.0)
        f = expand(Legendre(1.0, 2.0), lambda x: x, 2)
        g = apply(op, f)
        ref = expand(Legendre(1.0, 2.0), lambda x: x ** 2, 3)
        np.testing.assert_allclose(g.coeffs, ref.coeffs, atol=1e-14)

    def test_norm(self):
        assert MultiplicationByX(1.0, 2.0).norm_bound() == 2.0

    def test_interval_mismatch(self):
        with pytest.raises(DomainError):
            MultiplicationByX(1.0, 2.0, Legendre(0.0, 1.0))


class TestVectorClasses:
    def test_lorentzian_power_norms(self):
        # squared norms pi Gamma(1+4n) / 2^(1+4n) for A = -d2/dx2
        op = make_operator("laplacian")
        f = CoeffVector(op.basis, lorentzian_hat(op.basis.nodes))
        norms, truncated = power_norms(op, f, 5)
        expected = [np.pi * gamma(1 + 4 * n) / 2 ** (1 + 4 * n) for n in range(6)]
        np.testing.assert_allclose(np.square(norms), expected, rtol=1e-6)
        assert norms[1] == pytest.approx(1.53499, abs=1e-5)
        assert not truncated

    @pytest.mark.parametrize("xi", [0.0, 1.0])
    def test_lognormal_moments(self, xi):
        rep = lognormal_moment_check(xi, 4)
        assert rep.max_rel_error <= 1e-6
        if xi == 0.0:
            assert np.exp(rep.log_norm_sq[1]) == pytest.approx(np.exp(0.5), rel=1e-6)

    def test_lognormal_increments_vanish(self):
        rep = lognormal_moment_check(0.0, 60)
        assert rep.increments[-1] < 1e-8

    def test_analytic_vector_report(self):
        op = Diagonal("1/n")
        rep = vector_class_report(op, unit_vector(CanonicalN(), 2), 10)
        assert rep.classification["label"] == "heuristic"
        np.testing.assert_allclose(rep.norms, 0.5 ** np.arange(11))
        assert rep.bounded_sup == pytest.approx(0.5)


class TestRegistry:
    @pytest.mark.parametrize("key", [k for k in OPERATOR_TABLE if "<" not in k])
    def test_plain_ids_build(self, key):
        assert make_operator(key).op_id.startswith(key.split(":")[0])

    def test_unknown(self):
        with pytest.raises(ConfigError):
            make_operator("nope")
