import numpy as np
import pytest

from sparsebump.bumps import ExponentConfig
from sparsebump.grid import DyadicCube, GridConfig, contains, leaf_slice, root_cube
from sparsebump.operators import (
    PowerIterationError,
    apply_sparse,
    dense_norm_l2_oracle,
    exact_norm_l2,
    norm_lower_bound,
    primal_indicator_ratios,
    testing_constants,
)
from sparsebump.sparse import SparseFamily, random_sparse, stopping_family
from sparsebump.weights import (
    LeafFunction,
    Weight,
    average,
    fix_chain_cubes,
    fix_const,
    generate_weight,
    mass,
)

G4 = GridConfig(1, 4)


def chain_family() -> SparseFamily:
    return SparseFamily(G4, frozenset(fix_chain_cubes(G4, 4)), 0.5)


def singleton_family(grid=G4) -> SparseFamily:
    return SparseFamily(grid, frozenset([root_cube(grid)]), 0.5)


def random_pair(grid, seed, volatility=0.8):
    sigma = generate_weight(grid, "random_cascade", seed=seed, volatility=volatility)
    w = generate_weight(grid, "random_cascade", seed=seed + 1000, volatility=volatility)
    return sigma, w


class TestApplySparse:
    def test_single_average(self):
        s, _ = fix_const()
        out = apply_sparse(singleton_family(), s, LeafFunction.constant(G4), 0.0)
        np.testing.assert_allclose(out.values, 1.0, rtol=1e-15)

    def test_chain_counts_containing_cubes(self):
        # each of the k+1 chain cubes through E_{[0,2^-k)} contributes 1
        s, _ = fix_const()
        fam = chain_family()
        out = apply_sparse(fam, s, LeafFunction.constant(G4), 0.0)
        expected = np.ones(16)
        for k in range(5):
            expected[leaf_slice(DyadicCube(k, (0,)), G4)] = k + 1
        np.testing.assert_allclose(out.values, expected, rtol=1e-14)

    def test_fractional_root(self):
        s, _ = fix_const()
        out = apply_sparse(singleton_family(), s, LeafFunction.constant(G4), 0.5)
        np.testing.assert_allclose(out.values, 1.0, rtol=1e-15)

    def test_monotone_in_f(self):
        g = GridConfig(1, 6)
        sigma, _ = random_pair(g, 7)
        fam = random_sparse(g, 0.5, seed=3, target_size=20)
        rng = np.random.default_rng(0)
        f = rng.random(64)
        gvals = f + rng.random(64)
        a = apply_sparse(fam, sigma, LeafFunction(g, f), 0.0).values
        b = apply_sparse(fam, sigma, LeafFunction(g, gvals), 0.0).values
        assert np.all(b >= a)

    def test_unweighted_bilinear_form_is_symmetric(self):
        g = GridConfig(1, 6)
        sigma, _ = random_pair(g, 11)
        fam = random_sparse(g, 0.5, seed=5, target_size=18)
        rng = np.random.default_rng(1)
        f = LeafFunction(g, rng.random(64))
        h = LeafFunction(g, rng.random(64))
        v = g.leaf_volume
        lhs = float(np.sum(apply_sparse(fam, sigma, f, 0.25).values
                           * sigma.leaf_density * h.values) * v)
        rhs = float(np.sum(apply_sparse(fam, sigma, h, 0.25).values
                           * sigma.leaf_density * f.values) * v)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_grid_mismatch_raises(self):
        s, _ = fix_const()
        with pytest.raises(ValueError, match="share one grid"):
            apply_sparse(singleton_family(), s, LeafFunction.constant(GridConfig(1, 3)), 0.0)


class TestExactNormL2:
    def test_rank_one_projection(self):
        s, w = fix_const()
        assert exact_norm_l2(singleton_family(), s, w, 0.0) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_dense_oracle(self, seed):
        g = GridConfig(1, 4)
        sigma, w = random_pair(g, seed)
        fam = random_sparse(g, 0.5, seed=seed, target_size=10)
        a = exact_norm_l2(fam, sigma, w, 0.0, tol=1e-13)
        b = dense_norm_l2_oracle(fam, sigma, w, 0.0)
        assert a == pytest.approx(b, abs=1e-8)

    def test_matches_dense_oracle_chain(self):
        s, w = fix_const()
        fam = chain_family()
        a = exact_norm_l2(fam, s, w, 0.0, tol=1e-13)
        b = dense_norm_l2_oracle(fam, s, w, 0.0)
        assert a == pytest.approx(b, abs=1e-8)

    def test_homogeneity_in_sigma(self):
        g = GridConfig(1, 4)
        sigma, w = random_pair(g, 40)
        fam = random_sparse(g, 0.5, seed=2, target_size=8)
        base = exact_norm_l2(fam, sigma, w, 0.0, tol=1e-13)
        scaled = exact_norm_l2(fam, sigma.scaled(4.0), w, 0.0, tol=1e-13)
        assert scaled == pytest.approx(2.0 * base, abs=1e-8)  # c^{1/2} with c=4

    def test_nonconvergence_carries_iterates(self):
        g = GridConfig(1, 4)
        sigma, w = random_pair(g, 41)
        fam = random_sparse(g, 0.5, seed=2, target_size=8)
        with pytest.raises(PowerIterationError) as err:
            exact_norm_l2(fam, sigma, w, 0.0, tol=0.0, max_iter=2)
        assert len(err.value.last_two) == 2

    def test_zero_sigma_leaves_excluded(self):
        g = GridConfig(1, 2)
        sigma = Weight(g, np.array([1.0, 1.0, 0.0, 0.0]))
        w = Weight(g, np.ones(4))
        fam = singleton_family(g)
        a = exact_norm_l2(fam, sigma, w, 0.0, tol=1e-13)
        b = dense_norm_l2_oracle(fam, sigma, w, 0.0)
        assert a == pytest.approx(b, abs=1e-10)


class TestNormLowerBound:
    def test_projection_attains_one(self):
        s, w = fix_const()
        cfg = ExponentConfig(2, 4, 0.0, 1)
        assert norm_lower_bound(singleton_family(), s, w, cfg, budget=10) == pytest.approx(1.0, abs=1e-9)

    def test_monotone_in_budget(self):
        g = GridConfig(1, 5)
        sigma, w = random_pair(g, 8)
        fam = random_sparse(g, 0.5, seed=8, target_size=12)
        cfg = ExponentConfig(2, 3, 0.0, 1)
        low = norm_lower_bound(fam, sigma, w, cfg, budget=0, seed=5)
        high = norm_lower_bound(fam, sigma, w, cfg, budget=40, seed=5)
        assert high >= low

    def test_dominates_indicator_candidates(self):
        g = GridConfig(1, 5)
        sigma, w = random_pair(g, 9)
        fam = random_sparse(g, 0.5, seed=9, target_size=12)
        cfg = ExponentConfig(2, 3, 0.25, 1)
        lb = norm_lower_bound(fam, sigma, w, cfg, budget=0)
        for ratio in primal_indicator_ratios(fam, sigma, w, cfg).values():
            assert lb >= ratio / (1 + 1e-12)

    def test_diagonal_reaches_exact_norm(self):
        cfg = ExponentConfig(2, 2, 0.0, 1, "extended")
        s, w = fix_const()
        fam = chain_family()
        exact = exact_norm_l2(fam, s, w, 0.0, tol=1e-13)
        lb = norm_lower_bound(fam, s, w, cfg, budget=200, seed=0)
        assert lb <= exact + 1e-8
        assert lb >= 0.99 * exact

    def test_deterministic_under_seed(self):
        g = GridConfig(1, 5)
        sigma, w = random_pair(g, 10)
        fam = random_sparse(g, 0.5, seed=10, target_size=10)
        cfg = ExponentConfig(2, 3, 0.0, 1)
        a = norm_lower_bound(fam, sigma, w, cfg, budget=15, seed=3)
        b = norm_lower_bound(fam, sigma, w, cfg, budget=15, seed=3)
        assert a == b

    def test_dominates_dual_testing_terms(self):
        # the adjoint indicator candidates witness the per-R terms of T_star
        g = GridConfig(1, 5)
        sigma, w = random_pair(g, 12)
        fam = random_sparse(g, 0.5, seed=12, target_size=14)
        cfg = ExponentConfig(2, 3, 0.0, 1)
        lb = norm_lower_bound(fam, sigma, w, cfg, budget=0)
        rep = testing_constants(fam, sigma, w, cfg)
        for term in rep.per_R_star.values():
            assert lb >= term / (1 + 1e-12)
        assert lb >= rep.T_star / (1 + 1e-12)


def brute_force_t_star(family, sigma, w, cfg):
    """Direct transcription of the dual testing constant, independent of the
    argument-swapping implementation."""
    d = family.grid.dimension
    sigma_exc = family.exceptional_mass(sigma)
    best = 0.0
    for r in family.sorted_cubes():
        wr = mass(w, r)
        if wr <= 0:
            continue
        total = 0.0
        for q in family.sorted_cubes():
            if not contains(r, q):
                continue
            total += (q.volume ** (cfg.alpha / d - 1.0) * mass(w, q)) ** cfg.p_dual * sigma_exc[q]
        best = max(best, wr ** (-1.0 / cfg.q_dual) * total ** (1.0 / cfg.p_dual))
    return best


class TestTestingConstants:
    def test_singleton_collapses_to_one(self):
        s, w = fix_const()
        rep = testing_constants(singleton_family(), s, w, ExponentConfig(2, 4, 0.0, 1))
        assert rep.T == pytest.approx(1.0, abs=1e-14)
        assert rep.T_star == pytest.approx(1.0, abs=1e-14)
        assert not rep.extended_warning

    def test_chain_diagonal_telescopes(self):
        s, w = fix_const()
        rep = testing_constants(chain_family(), s, w, ExponentConfig(2, 2, 0.0, 1, "extended"))
        assert rep.extended_warning
        for value in rep.per_R.values():
            assert value == pytest.approx(1.0, rel=1e-12)
        assert rep.T == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("seed", range(4))
    def test_t_star_matches_brute_force(self, seed):
        g = GridConfig(1, 5)
        sigma, w = random_pair(g, seed + 60)
        fam = random_sparse(g, 0.5, seed=seed, target_size=14)
        cfg = ExponentConfig(2, 3, 0.25, 1)
        rep = testing_constants(fam, sigma, w, cfg)
        assert rep.T_star == pytest.approx(brute_force_t_star(fam, sigma, w, cfg), rel=1e-12)

    def test_indicator_ratios_dominate_testing_terms(self):
        for seed in range(5):
            g = GridConfig(1, 6)
            sigma, w = random_pair(g, seed + 80)
            if seed % 2:
                fam = stopping_family(sigma, 2.0, root_cube(g))
            else:
                fam = random_sparse(g, 0.5, seed=seed, target_size=20)
            cfg = ExponentConfig(2, 3, 0.0, 1)
            rep = testing_constants(fam, sigma, w, cfg)
            ratios = primal_indicator_ratios(fam, sigma, w, cfg)
            for r_cube, term in rep.per_R.items():
                assert ratios[r_cube] >= term / (1 + 1e-12)

    def test_serialization_shape(self):
        s, w = fix_const()
        rep = testing_constants(chain_family(), s, w, ExponentConfig(2, 4, 0.0, 1))
        out = rep.to_dict()
        assert set(out) == {"p", "q", "alpha", "T", "T_star", "argmax_R",
                            "argmax_R_star", "mode", "extended_warning"}
