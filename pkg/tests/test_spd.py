import math

import numpy as np
import pytest

from bcigrasp.spd import (
    NotSpdError,
    check_spd,
    expm,
    geodesic_midpoint,
    invsqrtm,
    karcher_mean,
    logm,
    random_spd,
    riemann_distance,
    sqrtm,
)


def gev_distance(a, b):
    """Independent distance oracle: log generalized eigenvalues of (a, b).

    Uses np.linalg.solve + eigvals rather than the sym-eigendecomposition
    route of the implementation under test.
    """
    w = np.linalg.eigvals(np.linalg.solve(a, b))
    return math.sqrt(float(np.sum(np.log(w.real) ** 2)))


def grid_search_mean(mats, rounds=6, points=13):
    """Brute-force Karcher mean of 2x2 SPD matrices on a refining grid."""
    def cost(a, b, c):
        m = np.array([[a, b], [b, c]])
        return sum(gev_distance(m, x) ** 2 for x in mats)

    center = np.mean(mats, axis=0)
    a0, b0, c0 = center[0, 0], center[0, 1], center[1, 1]
    half = max(abs(a0), abs(c0), 1.0) * 0.6
    best = (a0, b0, c0)
    for _ in range(rounds):
        a0, b0, c0 = best
        grid_a = np.linspace(a0 - half, a0 + half, points)
        grid_b = np.linspace(b0 - half, b0 + half, points)
        grid_c = np.linspace(c0 - half, c0 + half, points)
        best_cost = np.inf
        for a in grid_a:
            for b in grid_b:
                for c in grid_c:
                    if a <= 0 or c <= 0 or a * c - b * b <= 1e-12:
                        continue
                    value = cost(a, b, c)
                    if value < best_cost:
                        best_cost = value
                        best = (a, b, c)
        half = 2.0 * half / (points - 1)
    a, b, c = best
    return np.array([[a, b], [b, c]])


class TestMatrixFunctions:
    def test_log_exp_roundtrip(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            a = random_spd(5, rng)
            np.testing.assert_allclose(expm(logm(a)), a, atol=1e-10)

    def test_sqrt_squares_back(self):
        rng = np.random.default_rng(8)
        a = random_spd(6, rng)
        s = sqrtm(a)
        np.testing.assert_allclose(s @ s, a, atol=1e-10)
        np.testing.assert_allclose(invsqrtm(a) @ a @ invsqrtm(a), np.eye(6), atol=1e-10)

    def test_check_spd_rejects(self):
        with pytest.raises(NotSpdError):
            check_spd(np.array([[1.0, 2.0], [0.0, 1.0]]))
        with pytest.raises(NotSpdError):
            check_spd(np.array([[1.0, 0.0], [0.0, -2.0]]))
        with pytest.raises(NotSpdError):
            check_spd(np.array([[np.nan, 0.0], [0.0, 1.0]]))
        with pytest.raises(NotSpdError):
            check_spd(np.ones((2, 3)))


class TestDistance:
    def test_zero_on_equal(self):
        rng = np.random.default_rng(1)
        a = random_spd(4, rng)
        assert riemann_distance(a, a) < 1e-12

    def test_diagonal_closed_form(self):
        for d in (2, 8, 32):
            expected = math.sqrt(d) * math.log(4.0)
            assert abs(riemann_distance(np.eye(d), 4.0 * np.eye(d)) - expected) < 1e-10

    def test_symmetry(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            a, b = random_spd(4, rng), random_spd(4, rng)
            assert abs(riemann_distance(a, b) - riemann_distance(b, a)) < 1e-9

    def test_congruence_invariance(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            a, b = random_spd(3, rng), random_spd(3, rng)
            g = rng.standard_normal((3, 3))
            while abs(np.linalg.det(g)) < 1e-3:
                g = rng.standard_normal((3, 3))
            d0 = riemann_distance(a, b)
            d1 = riemann_distance(g.T @ a @ g, g.T @ b @ g, validate=False)
            assert abs(d0 - d1) < 1e-9 * max(1.0, d0)

    def test_matches_generalized_eigenvalue_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            a, b = random_spd(5, rng), random_spd(5, rng)
            assert abs(riemann_distance(a, b) - gev_distance(a, b)) < 1e-9

    def test_triangle_inequality_spot_check(self):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            a, b, c = (random_spd(3, rng) for _ in range(3))
            ab = riemann_distance(a, b)
            bc = riemann_distance(b, c)
            ac = riemann_distance(a, c)
            assert ac <= ab + bc + 1e-9

    def test_rejects_non_spd(self):
        with pytest.raises(NotSpdError):
            riemann_distance(np.eye(3), -np.eye(3))


class TestKarcherMean:
    def test_identical_inputs(self):
        rng = np.random.default_rng(11)
        a = random_spd(4, rng)
        np.testing.assert_allclose(karcher_mean([a, a, a]), a, atol=1e-10)

    def test_two_matrix_closed_form_midpoint(self):
        d = 5
        mean = karcher_mean([np.eye(d), 4.0 * np.eye(d)])
        np.testing.assert_allclose(mean, 2.0 * np.eye(d), atol=1e-8)

    def test_random_pairs_match_midpoint(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            a, b = random_spd(4, rng), random_spd(4, rng)
            np.testing.assert_allclose(
                karcher_mean([a, b]), geodesic_midpoint(a, b), atol=1e-8
            )

    def test_grid_search_oracle_2x2(self):
        rng = np.random.default_rng(13)
        for _ in range(3):
            mats = [random_spd(2, rng, scale=0.5) for _ in range(3)]
            fast = karcher_mean(mats)
            brute = grid_search_mean(mats)
            assert np.abs(fast - brute).max() < 1e-3

    def test_convergence_info(self):
        rng = np.random.default_rng(14)
        mats = [random_spd(3, rng) for _ in range(4)]
        mean, info = karcher_mean(mats, return_info=True)
        assert info.converged
        assert info.residual < 1e-8
        # gradient norm at the returned point
        from bcigrasp.spd import _sym
        is_ = invsqrtm(mean)
        grad = sum(logm(_sym(is_ @ m @ is_)) for m in mats) / len(mats)
        assert np.linalg.norm(grad, "fro") < 1e-6

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            karcher_mean([])
