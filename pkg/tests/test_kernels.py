import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import eigh_tridiagonal

from krylovlab import kernels


class TestBackendSelection:
    def test_python_backend_always_present(self):
        assert "python" in kernels.backends()

    def test_selected_backend_is_listed(self):
        assert kernels.BACKEND in kernels.backends()


class TestTridiagonal:
    @given(st.integers(1, 30), st.integers(0, 2**31))
    def test_eigenvalues_match_lapack(self, n, seed):
        rng = np.random.default_rng(seed)
        d = rng.standard_normal(n)
        e = rng.standard_normal(n - 1)
        ref = eigh_tridiagonal(d, e, eigvals_only=True)
        for impl in kernels.backends().values():
            np.testing.assert_allclose(impl.tridiag_eigvalsh(d, e), ref, atol=1e-11)

    def test_sturm_count(self, backend):
        d = np.array([1.0, 2.0, 3.0])
        off_sq = np.zeros(2)
        np.testing.assert_array_equal(backend.sturm_count(d, off_sq, np.array([0.5, 1.5, 2.5, 3.5])),
                                      [0, 1, 2, 3])

    def test_empty(self, backend):
        assert backend.tridiag_eigvalsh(np.zeros(0), np.zeros(0)).size == 0

    def test_backends_agree_on_graded_matrix(self):
        d = 1.0 / np.arange(1, 41) ** 2
        e = 1e-3 / np.arange(1, 40)
        impls = list(kernels.backends().values())
        ref = impls[0].tridiag_eigvalsh(d, e)
        for impl in impls[1:]:
            np.testing.assert_allclose(impl.tridiag_eigvalsh(d, e), ref, atol=1e-15)


class TestRaster:
    def test_single_disk(self, backend):
        mask = backend.disk_raster(np.array([0.5]), np.array([0.5]), 0.2, 0.0, 0.0, 0.1, 10, 10)
        assert mask[5, 5] and mask[4, 4]
        assert not mask[0, 0] and not mask[9, 9]

    def test_backends_agree(self, rng):
        px, py = rng.random(50), rng.random(50)
        impls = list(kernels.backends().values())
        ref = impls[0].disk_raster(px, py, 0.07, -0.2, -0.2, 0.013, 110, 110)
        for impl in impls[1:]:
            np.testing.assert_array_equal(impl.disk_raster(px, py, 0.07, -0.2, -0.2, 0.013, 110, 110), ref)

    def test_flood_stops_at_ring(self, backend):
        blocked = np.zeros((9, 9), dtype=bool)
        blocked[2, 2:7] = blocked[6, 2:7] = blocked[2:7, 2] = blocked[2:7, 6] = True
        seen = backend.flood_outside(blocked)
        assert seen[0, 0] and not seen[4, 4]
        assert not seen[blocked].any()
