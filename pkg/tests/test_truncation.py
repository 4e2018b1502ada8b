import numpy as np
import pytest

from krylovlab.core import CanonicalN, CoeffVector, Legendre, expand, unit_vector
from krylovlab.errors import ConfigError, DomainError
from krylovlab.operators import Diagonal, MultiplicationByX, RightShiftN, apply
from krylovlab.truncation import (
    TruncationPair,
    bad_truncation_basis,
    compress,
    compression_gap,
    error_residual,
    lift,
    run_basis_comparison,
    run_sec26,
    sec26_solution,
    sec26_solution_norm,
    solve_truncated,
)


def _vec(c):
    return CoeffVector(CanonicalN(), c)


class TestPair:
    def test_canonical(self):
        pair = TruncationPair.canonical(CanonicalN(), 3)
        assert len(pair.solution_basis) == 3

    def test_not_orthonormal(self):
        e1 = unit_vector(CanonicalN(), 1)
        with pytest.raises(ConfigError):
            TruncationPair((e1, e1), (e1, e1))

    def test_different_spaces(self):
        with pytest.raises(ConfigError):
            TruncationPair((unit_vector(CanonicalN(), 1),), (unit_vector(Legendre(), 0),))


class TestCompression:
    def test_diagonal_compression(self):
        op = Diagonal("n")
        pair = TruncationPair.canonical(CanonicalN(), 4)
        sys = compress(op, pair, _vec([1.0, 4.0, 9.0, 16.0]), 4)
        np.testing.assert_allclose(sys.A_N, np.diag([1, 2, 3, 4]))
        f, eps = solve_truncated(sys)
        np.testing.assert_allclose(f, [1, 2, 3, 4])
        assert eps < 1e-14

    @pytest.mark.parametrize("method", ["direct-least-squares", "gmres"])
    def test_solve_methods_agree(self, method):
        op = Diagonal("1/n")
        pair = TruncationPair.canonical(CanonicalN(), 5)
        g = _vec([1.0, 0.5, 1 / 3, 0.25, 0.2])
        f, eps = solve_truncated(compress(op, pair, g, 5), method)
        np.testing.assert_allclose(f, np.ones(5), atol=1e-10)

    def test_unknown_method(self):
        pair = TruncationPair.canonical(CanonicalN(), 2)
        with pytest.raises(ConfigError):
            solve_truncated(compress(Diagonal("n"), pair, _vec([1.0]), 2), "magic")

    def test_N_too_large(self):
        pair = TruncationPair.canonical(CanonicalN(), 2)
        with pytest.raises(DomainError):
            compress(Diagonal("n"), pair, _vec([1.0]), 3)

    def test_lift(self):
        pair = TruncationPair.canonical(CanonicalN(), 3)
        sys = compress(Diagonal("n"), pair, _vec([1.0]), 3)
        np.testing.assert_allclose(lift(sys, [1.0, 2.0, 0.0]).coeffs, [1.0, 2.0])

    def test_shift_compression_is_singular(self):
        # the canonical compression of R is strictly lower triangular
        pair = TruncationPair.canonical(CanonicalN(), 4)
        sys = compress(RightShiftN(), pair, _vec([0.0, 1.0]), 4)
        assert np.linalg.matrix_rank(sys.A_N) == 3

    def test_compression_gap_of_diagonal(self):
        op = Diagonal("1/n")
        pair = TruncationPair.canonical(CanonicalN(), 5)
        assert compression_gap(op, pair, 5, 20) == pytest.approx(1 / 6)

    def test_bad_basis_makes_compression_singular(self):
        op = Diagonal("1/n")
        us = TruncationPair.canonical(CanonicalN(), 4).solution_basis
        vs = bad_truncation_basis(op, us, 4, 12)
        pair = TruncationPair(us, tuple(vs))
        sys = compress(op, pair, _vec([1.0]), 4)
        for n in range(1, 5):
            assert abs(np.linalg.det(sys.A_N[:n, :n])) < 1e-12
        with pytest.raises(DomainError):
            bad_truncation_basis(op, us, 4, 8)


class TestErrorResidual:
    def test_support(self):
        op = Diagonal("1/n")
        f = _vec([1.0, 1.0, 1.0])
        g = apply(op, f)
        rep = error_residual(op, f, g, _vec([1.0, 0.0, 1.0]))
        assert rep.support == [2]
        assert rep.error_norm == pytest.approx(1.0)
        assert rep.residual_norm == pytest.approx(0.5)

    def test_callable_data(self):
        basis = Legendre(1.0, 2.0)
        op = MultiplicationByX(1.0, 2.0)
        fhat = expand(basis, lambda x: x, 2)
        rep = error_residual(op, lambda x: x, lambda x: x ** 2, fhat)
        assert rep.error_norm < 1e-13 and rep.residual_norm < 1e-13


class TestExperiments:
    def test_solution_norm_closed_form(self):
        direct = np.linalg.norm(1.0 / np.arange(1, 251))
        assert sec26_solution_norm() == pytest.approx(direct, rel=1e-14)
        assert sec26_solution().norm() == pytest.approx(1.28099, abs=1e-4)

    def test_baseline_converges(self):
        rows, _ = run_sec26("baseline", orders=[5, 50, 200], N_max=200)
        assert rows[-1]["err"] < rows[0]["err"]
        assert rows[-1]["res"] < 1e-6

    def test_noninjective_support(self):
        _, sols = run_sec26("noninjective", orders=[300], N_max=300)
        _, er = sols[300]
        assert er.support == [3, 6, 9]

    def test_shift_limits(self):
        rows, sols = run_sec26("shift", orders=[300], N_max=300)
        assert rows[-1]["err"] == pytest.approx(1.0, abs=0.01)
        assert rows[-1]["res"] == pytest.approx(0.2, abs=0.01)

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            run_sec26("other")

    def test_legendre_volterra(self):
        rows = run_basis_comparison("volterra", "legendre", 4)
        assert rows[-1]["err"] < 1e-12
        assert rows[-1]["sol_norm"] == pytest.approx(1 / np.sqrt(3), abs=1e-12)

    def test_fourier_cap(self):
        with pytest.raises(ConfigError):
            run_basis_comparison("multiplication", "fourier", 10, orders=[600])

    def test_unknown_problem(self):
        with pytest.raises(ConfigError):
            run_basis_comparison("heat", "legendre", 3)
