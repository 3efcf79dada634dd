import numpy as np
import pytest

from mvldp.measure import Ensemble
from mvldp.models import drift, porous_media_model
from mvldp.spaces import (SpaceSpec, dual_pair, h_inner, h_norm, v_norm,
                          vstar_norm)


def fine_quadrature_lr(coeffs, r, points=16384):
    """Independent L^r norm of the sine series via a dense midpoint rule."""
    x = (np.arange(points) + 0.5) / points
    k = np.arange(1, len(coeffs) + 1)
    vals = np.sqrt(2.0) * np.sin(np.pi * np.outer(x, k)) @ coeffs
    return (np.mean(np.abs(vals) ** r)) ** (1.0 / r)


class TestHInner:
    def test_euclidean_identity(self):
        sp = SpaceSpec.euclidean(2)
        assert h_inner([1.0, 0.0], [1.0, 0.0], sp) == 1.0

    def test_spectral_first_mode(self):
        sp = SpaceSpec.spectral_dirichlet(16, 2.0)
        e1 = np.zeros(16)
        e1[0] = 1.0
        assert h_inner(e1, e1, sp) == pytest.approx(1.0 / np.pi**2, rel=1e-14)

    def test_grid_ones(self):
        sp = SpaceSpec.grid_dirichlet(3, 2.0)
        ones = np.ones(3)
        assert h_inner(ones, ones, sp) == 0.75

    def test_symmetric_bilinear_positive(self):
        rng = np.random.default_rng(0)
        for sp in (SpaceSpec.euclidean(4), SpaceSpec.spectral_dirichlet(6, 2.0),
                   SpaceSpec.grid_dirichlet(5, 2.0)):
            for _ in range(20):
                u = rng.standard_normal(sp.dim)
                v = rng.standard_normal(sp.dim)
                w = rng.standard_normal(sp.dim)
                a, b = rng.standard_normal(2)
                assert h_inner(u, v, sp) == pytest.approx(h_inner(v, u, sp), abs=1e-12)
                lhs = h_inner(a * u + b * w, v, sp)
                rhs = a * h_inner(u, v, sp) + b * h_inner(w, v, sp)
                assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)
                assert h_inner(u, u, sp) > 0

    def test_dimension_mismatch_rejected(self):
        sp = SpaceSpec.euclidean(3)
        with pytest.raises(ValueError):
            h_inner(np.ones(2), np.ones(3), sp)

    def test_spectral_mode_norms_decrease(self):
        sp = SpaceSpec.spectral_dirichlet(8, 2.0)
        norms = []
        for k in range(8):
            e = np.zeros(8)
            e[k] = 1.0
            norms.append(h_norm(e, sp))
            assert norms[-1] == pytest.approx(1.0 / ((k + 1) * np.pi), rel=1e-12)
        assert all(a > b for a, b in zip(norms, norms[1:]))


class TestVNorm:
    def test_zero_vector(self):
        for sp in (SpaceSpec.euclidean(3), SpaceSpec.spectral_dirichlet(4, 3.0),
                   SpaceSpec.grid_dirichlet(4, 4.0)):
            assert v_norm(np.zeros(sp.dim), sp) == 0.0

    def test_grid_single_node(self):
        sp = SpaceSpec.grid_dirichlet(1, 2.0)
        h = sp.h
        assert v_norm(np.array([1.0]), sp) == pytest.approx(np.sqrt(2.0 / h), rel=1e-14)

    def test_spectral_first_mode_l2(self):
        sp = SpaceSpec.spectral_dirichlet(16, 2.0)
        e1 = np.zeros(16)
        e1[0] = 1.0
        assert v_norm(e1, sp) == pytest.approx(1.0, abs=1e-6)

    def test_spectral_lr_against_fine_quadrature(self):
        sp = SpaceSpec.spectral_dirichlet(8, 4.0)
        rng = np.random.default_rng(1)
        coeffs = rng.standard_normal(8) / np.arange(1, 9) ** 2
        assert v_norm(coeffs, sp) == pytest.approx(
            fine_quadrature_lr(coeffs, 4.0), rel=1e-3)


class TestDualPair:
    def test_matches_h_inner_for_h_vectors(self):
        rng = np.random.default_rng(2)
        for sp in (SpaceSpec.euclidean(4), SpaceSpec.spectral_dirichlet(6, 2.0),
                   SpaceSpec.grid_dirichlet(5, 3.0)):
            for _ in range(20):
                a = rng.standard_normal(sp.dim)
                v = rng.standard_normal(sp.dim)
                assert dual_pair(a, v, sp) == pytest.approx(
                    h_inner(a, v, sp), abs=1e-12)

    def test_zero_functional(self):
        sp = SpaceSpec.grid_dirichlet(4, 2.0)
        assert dual_pair(np.zeros(4), np.ones(4), sp) == 0.0

    def test_porous_drift_pairing_is_minus_l2_mass(self):
        # at r = 2 the dissipative pairing gives 2·⟨A(e1), e1⟩ = -2·‖e1‖²_{L²} = -2
        model = porous_media_model(modes=16, r=2.0, kappa=0.0)
        e1 = np.zeros(16)
        e1[0] = 1.0
        a = drift(model, 0.0, e1, Ensemble.dirac(e1))
        value = 2.0 * dual_pair(a, e1, model.space)
        oracle = -2.0 * fine_quadrature_lr(e1, 2.0) ** 2
        assert value == pytest.approx(oracle, abs=1e-6)
        assert value == pytest.approx(-2.0, abs=1e-9)


class TestVStarNorm:
    def test_euclidean(self):
        sp = SpaceSpec.euclidean(3)
        a = np.array([3.0, 0.0, 4.0])
        assert vstar_norm(a, sp) == pytest.approx(5.0, rel=1e-12)

    def test_grid_p2_against_linear_algebra(self):
        # for p = 2 the dual norm is sqrt(h·aᵀL⁻¹a) with the Dirichlet Laplacian L
        n = 7
        sp = SpaceSpec.grid_dirichlet(n, 2.0)
        h = sp.h
        lap = (np.diag(np.full(n, 2.0)) - np.diag(np.ones(n - 1), 1)
               - np.diag(np.ones(n - 1), -1)) / h**2
        rng = np.random.default_rng(3)
        for _ in range(10):
            a = rng.standard_normal(n)
            oracle = np.sqrt(h * a @ np.linalg.solve(lap, a))
            assert vstar_norm(a, sp) == pytest.approx(oracle, rel=1e-6)

    def test_grid_duality_lower_bound(self):
        sp = SpaceSpec.grid_dirichlet(9, 4.0)
        rng = np.random.default_rng(4)
        a = rng.standard_normal(9)
        norm = vstar_norm(a, sp)
        for _ in range(200):
            v = rng.standard_normal(9)
            pairing = dual_pair(a, v, sp)
            assert abs(pairing) <= norm * v_norm(v, sp) * (1 + 1e-9)


class TestSpaceSpecValidation:
    def test_grid_mesh_identity(self):
        for n in (3, 48, 64, 97):
            sp = SpaceSpec.grid_dirichlet(n, 2.0)
            # the h-weighted inner product divides by (n+1) exactly
            assert h_inner(np.ones(n), np.ones(n), sp) * (n + 1) / n == 1.0

    def test_spectral_eigenvalues(self):
        sp = SpaceSpec.spectral_dirichlet(5, 2.0)
        lam = sp.eigenvalues
        assert lam[0] == pytest.approx(np.pi**2, rel=1e-15)
        assert np.all(np.diff(lam) > 0)

    def test_bad_kind_rejected(self):
        with pytest.raises(ValueError):
            SpaceSpec("fourier", 4)

    def test_bad_exponent_rejected(self):
        with pytest.raises(ValueError):
            SpaceSpec.euclidean(2, v_exponent=1.0)
