from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvldp.measure import Ensemble, h_norm_sq_rows, mean, second_moment, w2
from mvldp.spaces import SpaceSpec

R1 = SpaceSpec.euclidean(1)
R2 = SpaceSpec.euclidean(2)


def w2_brute(mu: Ensemble, nu: Ensemble, space: SpaceSpec) -> float:
    """Exact transport distance by enumerating all point matchings."""
    n = mu.n_points
    best = np.inf
    for perm in permutations(range(n)):
        cost = float(np.mean(h_norm_sq_rows(mu.points[list(perm)] - nu.points, space)))
        best = min(best, cost)
    return float(np.sqrt(best))


def random_pair(rng, n, dim, space=None):
    mu = Ensemble(rng.standard_normal((n, dim)) * rng.uniform(0.2, 3.0))
    nu = Ensemble(rng.standard_normal((n, dim)) * rng.uniform(0.2, 3.0))
    return mu, nu


class TestSecondMoment:
    def test_dirac_at_origin(self):
        assert second_moment(Ensemble.dirac([0.0]), R1) == 0.0

    def test_symmetric_pair(self):
        assert second_moment(Ensemble([[1.0], [-1.0]]), R1) == 1.0

    def test_single_point_r2(self):
        assert second_moment(Ensemble.dirac([3.0, 4.0]), R2) == 25.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            second_moment(Ensemble.dirac([1.0, 2.0]), R1)

    def test_identical_points_exact_for_any_count(self):
        # anchored averaging keeps replicated points exactly on their value
        x = np.array([0.1234567891234567, -2.7182818284590455])
        for n in (1, 2, 3, 5, 7):
            ens = Ensemble(np.tile(x, (n, 1)))
            assert second_moment(ens, R2) == second_moment(Ensemble.dirac(x), R2)
            assert np.array_equal(mean(ens), x)


class TestMean:
    def test_dirac(self):
        x = np.array([1.5, -0.25])
        assert np.array_equal(mean(Ensemble.dirac(x)), x)

    def test_symmetric(self):
        assert mean(Ensemble([[1.0], [-1.0]]))[0] == 0.0

    def test_arithmetic(self):
        assert mean(Ensemble([[1.0], [2.0], [3.0]]))[0] == 2.0


class TestW2:
    def test_identity(self):
        rng = np.random.default_rng(0)
        ens = Ensemble(rng.standard_normal((5, 2)))
        assert w2(ens, ens, R2) == 0.0

    def test_shifted_pair_1d(self):
        mu = Ensemble([[0.0], [1.0]])
        nu = Ensemble([[1.0], [2.0]])
        assert w2(mu, nu, R1) == pytest.approx(w2_brute(mu, nu, R1), abs=1e-15)
        assert w2(mu, nu, R1) == pytest.approx(1.0, abs=1e-15)

    def test_four_points_r2_vs_brute_force(self):
        rng = np.random.default_rng(1)
        mu, nu = random_pair(rng, 4, 2)
        assert w2(mu, nu, R2) == pytest.approx(w2_brute(mu, nu, R2), abs=1e-12)

    def test_small_ensembles_exact_all_spaces(self):
        rng = np.random.default_rng(2)
        spaces = [R1, R2, SpaceSpec.euclidean(3),
                  SpaceSpec.spectral_dirichlet(3, 2.0),
                  SpaceSpec.grid_dirichlet(3, 2.0)]
        for trial in range(40):
            space = spaces[trial % len(spaces)]
            n = int(rng.integers(1, 7))
            mu, nu = random_pair(rng, n, space.dim)
            got = w2(mu, nu, space, method="assignment")
            assert got == pytest.approx(w2_brute(mu, nu, space), abs=1e-12)

    def test_sorted_fast_path_agrees(self):
        rng = np.random.default_rng(3)
        for space in (R1, SpaceSpec.spectral_dirichlet(1, 2.0),
                      SpaceSpec.grid_dirichlet(1, 2.0)):
            for _ in range(20):
                n = int(rng.integers(1, 30))
                mu, nu = random_pair(rng, n, 1)
                fast = w2(mu, nu, space, method="sorted")
                general = w2(mu, nu, space, method="assignment")
                assert fast == pytest.approx(general, abs=1e-12)

    def test_unequal_counts_rejected(self):
        with pytest.raises(ValueError):
            w2(Ensemble([[0.0]]), Ensemble([[0.0], [1.0]]), R1)

    def test_oversized_rejected(self):
        pts = np.zeros((513, 1))
        with pytest.raises(ValueError):
            w2(Ensemble(pts), Ensemble(pts), R1)


coords = st.floats(min_value=-10, max_value=10, allow_nan=False, width=64)


@st.composite
def ensemble_pairs(draw):
    n = draw(st.integers(min_value=1, max_value=5))
    dim = draw(st.integers(min_value=1, max_value=3))
    mk = lambda: np.array(
        draw(st.lists(st.lists(coords, min_size=dim, max_size=dim),
                      min_size=n, max_size=n)))
    return Ensemble(mk()), Ensemble(mk()), SpaceSpec.euclidean(dim)


@given(ensemble_pairs())
@settings(max_examples=60, deadline=None)
def test_w2_symmetry(pair):
    mu, nu, space = pair
    assert w2(mu, nu, space) == pytest.approx(w2(nu, mu, space), abs=1e-12)


@given(ensemble_pairs(), st.integers(0, 2**31))
@settings(max_examples=40, deadline=None)
def test_w2_triangle_inequality(pair, seed):
    mu, nu, space = pair
    rho = Ensemble(np.random.default_rng(seed).uniform(-10, 10, mu.points.shape))
    assert w2(mu, nu, space) <= w2(mu, rho, space) + w2(rho, nu, space) + 1e-12


@given(ensemble_pairs())
@settings(max_examples=60, deadline=None)
def test_w2_bounded_by_index_coupling(pair):
    mu, nu, space = pair
    paired = float(np.mean(h_norm_sq_rows(mu.points - nu.points, space)))
    assert w2(mu, nu, space) ** 2 <= paired + 1e-12


@given(ensemble_pairs())
@settings(max_examples=60, deadline=None)
def test_second_moment_lipschitz_under_w2(pair):
    mu, nu, space = pair
    gap = abs(np.sqrt(second_moment(mu, space)) - np.sqrt(second_moment(nu, space)))
    assert gap <= w2(mu, nu, space) + 1e-9
