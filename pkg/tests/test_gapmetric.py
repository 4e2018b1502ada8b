import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from krylovlab.core import CanonicalN, CanonicalZ, CoeffVector, SpectralGrid, SubspaceFrame, unit_vector
from krylovlab.errors import BasisMismatchError, CapabilityError, ConfigError
from krylovlab.gapmetric import (
    ESTIMATOR_TOL,
    WeakNormSpec,
    dw,
    dw_hat,
    family_order,
    family_weights,
    gap_d,
    gap_delta,
    gap_delta_hat,
    gap_dhat,
    gap_report,
    krylov_gap_trace,
    weak_norm,
)
from krylovlab.krylov import build_krylov
from krylovlab.operators import RightShiftN


def e(k, length=24):
    return unit_vector(CanonicalN(), k, length)


def span(*vs):
    return SubspaceFrame.from_vectors(list(vs))


EMPTY = SubspaceFrame.empty(CanonicalN(), 24)


def _random_frame(rng, dim, length=6):
    vs = [CoeffVector(CanonicalN(), rng.standard_normal(length)) for _ in range(dim)]
    return span(*vs)


class TestOrdinaryGap:
    @given(st.floats(0.0, np.pi / 2))
    def test_lines_in_plane(self, t):
        U = span(e(1))
        V = span(np.cos(t) * e(1) + np.sin(t) * e(2))
        assert gap_delta(U, V) == pytest.approx(np.sin(t), abs=1e-12)
        assert gap_d(U, V) == pytest.approx(2 * np.sin(t / 2), abs=1e-7)

    def test_conventions(self):
        U = span(e(1))
        assert gap_delta(EMPTY, U) == 0.0
        assert gap_delta(U, EMPTY) == 1.0
        assert gap_d(EMPTY, U) == 0.0
        assert gap_d(U, EMPTY) == 2.0

    def test_bigger_space_is_sqrt2_away(self):
        assert gap_d(span(e(1), e(2)), span(e(1))) == pytest.approx(np.sqrt(2))

    def test_nested_krylov_spaces(self):
        kb = build_krylov(RightShiftN(), e(1, 1), 64)
        ref = kb.frame
        for N in (4, 8, 16, 32, 63):
            sub = SubspaceFrame(ref.basis, ref.matrix[:, :N])
            assert gap_delta_hat(sub, ref) == pytest.approx(1.0, abs=1e-10)
            assert gap_dhat(sub, ref) == pytest.approx(np.sqrt(2), abs=1e-10)

    def test_basis_mismatch(self):
        with pytest.raises(BasisMismatchError):
            gap_delta(span(e(1)), span(unit_vector(CanonicalZ(), 0)))

    @given(st.integers(0, 2**31), st.integers(1, 3), st.integers(1, 3))
    def test_delta_between_zero_and_one(self, seed, a, b):
        rng = np.random.default_rng(seed)
        U, V = _random_frame(rng, a), _random_frame(rng, b)
        assert 0.0 <= gap_delta(U, V) <= 1.0
        assert gap_delta(U, V) <= gap_d(U, V) + 1e-12


class TestWeakNorm:
    def test_value(self):
        v, tail = weak_norm(CoeffVector(CanonicalN(), [1.0, -1.0]))
        assert v == pytest.approx(0.75)
        assert tail == 0.0

    def test_tail_bound(self):
        x = CoeffVector(CanonicalN(), np.ones(5))
        v, tail = weak_norm(x, WeakNormSpec(M=3))
        assert v == pytest.approx(0.875)
        assert tail == pytest.approx(0.125 * np.sqrt(2))

    def test_bad_M(self):
        with pytest.raises(ConfigError):
            WeakNormSpec(M=0)

    def test_z_family_order(self):
        # labels 0, 1, -1, 2, -2
        assert CanonicalZ().labels(5)[family_order(CanonicalZ(), 5)].tolist() == [0, 1, -1, 2, -2]
        np.testing.assert_allclose(family_weights(CanonicalZ(), 3), [0.125, 0.5, 0.25])

    def test_grid_has_no_family(self):
        with pytest.raises(CapabilityError):
            family_order(SpectralGrid([0.0, 1.0], [1.0, 1.0]), 2)


class TestWeakGap:
    @pytest.mark.parametrize("n", range(1, 21))
    def test_line_against_zero(self, n):
        assert dw(span(e(n)), EMPTY).estimate == 2.0 ** -n

    def test_empty_source(self):
        assert dw(EMPTY, span(e(1))).estimate == 0.0

    def test_budget_validated(self):
        with pytest.raises(ConfigError):
            dw(span(e(1)), EMPTY, samples=0)

    @pytest.mark.parametrize("n,m", [(2, 3), (3, 5), (4, 9)])
    def test_lines_through_first_vector(self, n, m):
        # span{e1 + e_n} against span{e1 + e_m}
        U = span(e(1) + e(n))
        V = span(e(1) + e(m))
        res = dw(U, V)
        expected = (2.0 ** -n + 2.0 ** -m) / np.sqrt(2)
        assert res.certified_lower_bound == pytest.approx(expected, rel=1e-7)
        assert res.upper_bound - res.certified_lower_bound < 1e-7
        assert not res.heuristic

    def test_witness_is_feasible(self):
        U = span(e(1) + e(2), e(3))
        V = span(e(1))
        res = dw(U, V, samples=64, iters=100)
        w = family_weights(CanonicalN(), res.witness.size)
        assert np.all(np.abs(res.witness) <= w * (1 + 1e-12))
        assert res.heuristic

    def test_reference_against_truncation(self):
        # d_w(K_64, K_N) for the shift is the weighted tail norm
        kb = build_krylov(RightShiftN(), e(1, 1), 64)
        ref = kb.frame
        for N in (4, 8, 16):
            sub = SubspaceFrame(ref.basis, ref.matrix[:, :N])
            exact = np.sqrt(np.sum(4.0 ** -np.arange(N + 1, 65)))
            assert dw(ref, sub, samples=64, iters=100).estimate == pytest.approx(exact, rel=1e-6)
            assert dw(sub, ref).estimate == pytest.approx(0.0, abs=1e-12)

    def test_symmetric_version(self):
        U, V = span(e(1)), span(e(2))
        assert dw_hat(U, V) == pytest.approx(0.5)

    @settings(max_examples=10)
    @given(st.integers(0, 2**31))
    def test_triangle_inequality(self, seed):
        rng = np.random.default_rng(seed)
        U, V, W = (_random_frame(rng, 1) for _ in range(3))
        lhs = dw(U, W).estimate
        rhs = dw(U, V).estimate + dw(V, W).estimate
        assert lhs <= rhs + 2 * ESTIMATOR_TOL


class TestReports:
    def test_gap_report(self):
        rep = gap_report(span(e(1)), span(e(1), e(2)), samples=32, iters=50)
        assert rep.delta_uv == pytest.approx(0.0, abs=1e-14)
        assert rep.delta_vu == pytest.approx(1.0)
        assert rep.dw_vu == pytest.approx(0.25)
        assert rep.method["certified_lower_bound"]

    def test_trace_requires_reference(self):
        with pytest.raises(ConfigError):
            krylov_gap_trace(RightShiftN(), e(1, 1), [8], 4)

    def test_trace_rows(self):
        rows = krylov_gap_trace(RightShiftN(), e(1, 1), [2, 4], 8, samples=32, iters=50)
        assert [r["N"] for r in rows] == [2, 4]
        assert rows[0]["dw_hat"] > rows[1]["dw_hat"]
        assert all(r["delta_hat"] == pytest.approx(1.0) for r in rows)
