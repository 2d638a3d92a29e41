"""End-to-end properties of the factorization, the tests and the views."""

import itertools
import time

import numpy as np
import pytest

from asca.design import NOMINAL, ORDINAL, FactorSpec, assemble_design
from asca.diagnostics import d_statistic, q_statistic, sample_acf
from asca.factorization import anova_table, fit, univariate_anova
from asca.inference import permutation_test
from asca.sca import pca_effect
from pipeline import Pipeline

from conftest import crossed_levels


def random_balanced_design(rng):
    a = int(rng.integers(2, 4))
    b = int(rng.integers(2, 4))
    reps = int(rng.integers(2, 4))
    la, lb = crossed_levels(a, b, reps=reps)
    if rng.random() < 0.3:
        return assemble_design([FactorSpec('A', la, a)])
    return assemble_design([FactorSpec('A', la, a), FactorSpec('B', lb, b)], [('A', 'B')])


def one_way_f(x, groups):
    """Textbook one-way ANOVA F."""
    grand = x.mean()
    levels = np.unique(groups)
    between = sum(np.sum(groups == g) * (x[groups == g].mean() - grand) ** 2 for g in levels)
    within = sum(np.sum((x[groups == g] - x[groups == g].mean()) ** 2) for g in levels)
    return (between / (levels.size - 1)) / (within / (x.size - levels.size))


def test_exact_decomposition_on_balanced_designs(rng):
    start = time.perf_counter()
    for _ in range(100):
        design = random_balanced_design(rng)
        X = rng.normal(size=(design.n_observations, int(rng.integers(1, 21))))
        dec = fit(X, design)
        assert np.max(np.abs(dec.reconstruction() - X)) < 1e-8 * np.max(np.abs(X))
        table = anova_table(dec)
        assert table.total.pct_ss == pytest.approx(100.0, abs=1e-6)
        assert sum(r.ss for r in table.rows) + table.residual.ss == pytest.approx(table.total.ss, rel=1e-6)
    assert time.perf_counter() - start < 5


def test_one_way_f_matches_the_closed_form(rng):
    for _ in range(50):
        groups = int(rng.integers(3, 6))
        reps = int(rng.integers(4, 9))
        (levels,) = crossed_levels(groups, reps=reps)
        design = assemble_design([FactorSpec('group', levels, groups)])
        x = rng.normal(size=levels.size) + 0.5 * levels
        table = anova_table(fit(x, design))
        assert table.term('group').f == pytest.approx(one_way_f(x, levels), rel=1e-9)


def test_single_column_matches_the_multivariate_path(one_way_design, rng):
    design = one_way_design(3, 4)
    x = rng.normal(size=12)
    uni = univariate_anova(x, design, 49, seed=2)
    multi = anova_table(fit(x.reshape(-1, 1), design),
                        tests=permutation_test(x.reshape(-1, 1), design, permutations=49, seed=2))
    assert uni.term('group').ss == multi.term('group').ss
    assert uni.term('group').f == multi.term('group').f
    assert uni.term('group').p == multi.term('group').p


def test_monte_carlo_p_matches_exhaustive_enumeration():
    x = np.array([1.0, 1.4, 3.1, 2.7])
    groups = np.array([0, 0, 1, 1])
    design = assemble_design([FactorSpec('group', groups, 2)])
    observed = one_way_f(x, groups)
    exhaustive = [one_way_f(x[list(p)], groups) for p in itertools.permutations(range(4))]
    exact = np.mean([f >= observed * (1 - 1e-10) for f in exhaustive])

    start = time.perf_counter()
    (result,) = permutation_test(x, design, permutations=10_000, seed=17)
    assert time.perf_counter() - start < 2
    assert result.p == pytest.approx(exact, abs=0.02)


def test_null_calibration(rng):
    (levels,) = crossed_levels(3, reps=8)
    design = assemble_design([FactorSpec('group', levels, 3)])
    hits = 0
    for seed in range(200):
        (result,) = permutation_test(rng.normal(size=(24, 5)), design, permutations=199, seed=seed)
        hits += result.p <= 0.05
    assert 0.01 <= hits / 200 <= 0.10


def test_unbalance_signature(two_factor_design, rng):
    balanced = two_factor_design(3, 4, reps=3)
    la, lb = balanced.factors[0].levels_per_observation, balanced.factors[1].levels_per_observation
    X = (np.outer(la, rng.normal(size=6)) + np.outer(lb == 1, rng.normal(size=6))
         + rng.normal(0, 0.5, size=(36, 6)))
    assert anova_table(fit(X, balanced)).total.pct_ss == pytest.approx(100.0, abs=1e-6)

    # Rows removed unevenly across cells, as whole missing periods are.
    drop = [0, 1, 3, 4, 9, 10, 13, 14, 22, 23]
    unbalanced = two_factor_design(3, 4, reps=3, drop=drop)
    keep = np.setdiff1d(np.arange(36), drop)
    table = anova_table(fit(X[keep], unbalanced))
    assert abs(table.total.pct_ss - 100.0) > 1e-3


def test_lakes_degrees_of_freedom(rng):
    years, sensors = crossed_levels(12, 7)
    keep = np.arange(20, 84)
    design = assemble_design(
        [FactorSpec('year', years[keep], 12, ORDINAL), FactorSpec('sensor', sensors[keep], 7, NOMINAL)],
        [('year', 'sensor')],
    )
    table = anova_table(fit(rng.normal(size=(64, 14)), design))
    assert [row.df for row in table] == [1, 6, 6, 50, 63]


def test_pollen_degrees_of_freedom(rng):
    years, fortnights = crossed_levels(30, 26)
    keep = years != 17
    design = assemble_design(
        [FactorSpec('year', years[keep], 30, ORDINAL), FactorSpec('fortnight', fortnights[keep], 26)],
        [('year', 'fortnight')],
    )
    table = anova_table(fit(rng.normal(size=(754, 44)), design))
    assert [row.df for row in table] == [1, 25, 25, 702, 753]


def test_component_views_are_consistent(two_factor_design, rng):
    design = two_factor_design(3, 4, reps=2)
    X = rng.normal(size=(24, 7))
    dec = fit(X, design)
    table = anova_table(dec)
    for term in design.terms:
        effect = dec.effect(term)
        view = pca_effect(effect, min(effect.shape), term=term)
        assert np.sum(view.singular_values ** 2) == pytest.approx(table.term(term).ss, rel=1e-8)
        np.testing.assert_allclose(view.loadings.T @ view.loadings, np.eye(view.n_components), atol=1e-9)


def test_planted_rank_one_effect_is_recovered(one_way_design, rng):
    design = one_way_design(4, 5)
    truth = rng.normal(size=30)
    truth /= np.linalg.norm(truth)
    levels = design.factors[0].levels_per_observation
    X = np.outer(levels - 1.5, truth) * 4 + rng.normal(0, 0.05, size=(20, 30))
    view = pca_effect(fit(X, design).effect('group'), 1)
    assert abs(view.loadings[:, 0] @ truth) > 0.999


def test_q_statistic_sums_to_the_residual_ss(two_factor_design, rng):
    dec = fit(rng.normal(size=(12, 4)), two_factor_design())
    assert np.sum(q_statistic(dec.residuals)) == pytest.approx(anova_table(dec).residual.ss, rel=1e-12)


def test_d_statistic_matches_explicit_hotelling(rng):
    for _ in range(20):
        n = int(rng.integers(6, 15))
        X = rng.normal(size=(n, 5))
        X -= X.mean(axis=0)
        u, s, _ = np.linalg.svd(X, full_matrices=False)
        scores = u[:, :3] * s[:3]
        inverse = np.linalg.inv(np.cov(scores, rowvar=False))
        expected = np.einsum('ij,jk,ik->i', scores, inverse, scores)
        np.testing.assert_allclose(d_statistic(scores, s[:3]), expected, rtol=1e-8)


def test_ar1_autocorrelation(rng):
    e = rng.normal(size=5000)
    x = np.empty(5000)
    x[0] = e[0]
    for t in range(1, 5000):
        x[t] = 0.8 * x[t - 1] + e[t]
    assert 0.75 <= sample_acf(x, 1)[1] <= 0.85


def test_repeated_runs_are_byte_identical(station, tmp_path):
    path = station(null_distribution=True)
    Pipeline.from_file(path).run()
    out = tmp_path / 'out'
    first = {p.relative_to(out): p.read_bytes() for p in out.rglob('*') if p.is_file()}
    Pipeline.from_file(path).run()
    second = {p.relative_to(out): p.read_bytes() for p in out.rglob('*') if p.is_file()}
    assert first == second


def test_lakes_scale_permutations_finish_quickly(rng):
    years, sensors = crossed_levels(12, 7)
    keep = np.arange(20, 84)
    design = assemble_design(
        [FactorSpec('year', years[keep], 12, ORDINAL), FactorSpec('sensor', sensors[keep], 7)],
        [('year', 'sensor')],
    )
    X = rng.normal(size=(64, 2920))
    start = time.perf_counter()
    results = permutation_test(X, design, permutations=999, seed=0, n_jobs=2)
    assert time.perf_counter() - start < 30
    assert [r.k for r in results] == [999, 999, 999]


def test_pure_effect_is_returned_unchanged(two_factor_design, rng):
    design = two_factor_design(2, 3, reps=2)
    mean = rng.normal(size=4)
    effect = design.columns('B') @ rng.normal(size=(2, 4))
    dec = fit(mean + effect, design)
    np.testing.assert_allclose(dec.effect('B'), effect, atol=1e-10)
    np.testing.assert_allclose(dec.residuals, 0, atol=1e-10)
    np.testing.assert_allclose(dec.effect('A'), 0, atol=1e-10)


def test_scaling_equivariance(two_factor_design, rng):
    design = two_factor_design(2, 3, reps=3)
    X = rng.normal(size=(18, 4))
    a, b = fit(X, design), fit(7.5 * X, design)
    ta, tb = anova_table(a), anova_table(b)
    for term in design.terms:
        np.testing.assert_allclose(b.effect(term), 7.5 * a.effect(term), atol=1e-10)
        assert tb.term(term).f == pytest.approx(ta.term(term).f, rel=1e-9)


def test_reference_level_does_not_change_effects(crossed, rng):
    (levels,) = crossed(4, reps=3)
    X = rng.normal(size=(12, 3))
    last = fit(X, assemble_design([FactorSpec('group', levels, 4)]))
    first = fit(X, assemble_design([FactorSpec('group', levels, 4, reference=0)]))
    assert not np.allclose(last.coefficients, first.coefficients)
    np.testing.assert_allclose(last.effect('group'), first.effect('group'), atol=1e-9)
