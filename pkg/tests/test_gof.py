import math
from types import SimpleNamespace

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from gofmult.distributions import MultivariateNormal, Normal
from gofmult.errors import DegenerateData, ReplicateFailure
from gofmult.estimation import fit_mle
from gofmult.gof import (
    GofContext,
    MultiplierWeights,
    build_context,
    empirical_cdf,
    indicator_matrix,
    multiplier_process,
    multiplier_replicate,
    multiplier_test,
    normalize_statistic,
    parametric_bootstrap_test,
    pvalue,
    statistic_observed,
    uniform_grid,
)
from gofmult.registry import get_family
from gofmult.rng import stream


def toy_context(statistic="Sn*"):
    data = np.array([[0.4], [-1.0], [2.0]])
    psi = np.array([[0.5, -1.0], [1.5, 0.2], [-2.0, 0.8]])
    fdot = np.array([[-0.3, 0.1], [-0.2, -0.4], [-0.1, 0.05]])
    ind = indicator_matrix(data, data).astype(float)
    fhat = np.array([0.6, 0.2, 0.9])
    return GofContext(statistic, data, np.zeros(2), data, ind.mean(axis=0), fhat, ind, psi, fdot)


def test_indicator_toy_table():
    x = np.array([[0.4], [-1.0], [2.0]])
    expected = np.array([[1, 0, 1], [1, 1, 1], [0, 0, 1]], dtype=bool)
    assert np.array_equal(indicator_matrix(x, x), expected)


def test_bivariate_empirical_cdf_brute_force(rng):
    x = rng.normal(size=(5, 2))
    brute = [sum(all(x[i] <= x[j]) for i in range(5)) / 5 for j in range(5)]
    assert_allclose(empirical_cdf(x, x), brute)


def test_empirical_cdf_univariate_ties():
    x = np.array([[1.0], [1.0], [2.0]])
    assert_allclose(empirical_cdf(x, x), [2 / 3, 2 / 3, 1.0])


def test_grid_fhat_is_increasing():
    data = Normal().sample([10.0, 1.0], 50, stream(1))
    ctx = build_context(Normal(), data, fit_mle(Normal(), data), "Sn")
    assert ctx.m == 1000
    assert np.all(np.diff(ctx.Fhat) > 0)
    assert_allclose(ctx.Fhat, uniform_grid(1000))
    assert_allclose(Normal().cdf(ctx.theta, ctx.eval_points), ctx.Fhat, atol=1e-12)


def test_grid_statistics_need_univariate_data():
    f = MultivariateNormal(2)
    x = f.sample(np.array([0, 0, 1, 1, 0.3]), 30, stream(2))
    with pytest.raises(ValueError):
        build_context(f, x, fit_mle(f, x), "Tn")


@pytest.mark.parametrize("statistic", ["Sn", "Tn", "Sn*", "Tn*"])
def test_perfect_fit_gives_zero(statistic):
    ctx = toy_context()
    ctx = GofContext(normalize_statistic(statistic), ctx.data, ctx.theta, ctx.eval_points, ctx.Fn, ctx.Fn.copy())
    assert statistic_observed(ctx) == 0.0


def test_single_observation_tn_star():
    ctx = GofContext("Tn*", np.array([[0.3]]), np.zeros(2), np.array([[0.3]]), np.array([1.0]), np.array([0.62]))
    assert_allclose(statistic_observed(ctx), 0.38)


def test_hand_summed_sn_star():
    x = np.array([9.1, 10.4, 8.7, 11.2, 10.0])
    theta = np.array([10.0, 1.0])
    fhat = Normal().cdf(theta, x)
    fn = np.array([2, 4, 1, 5, 3]) / 5
    expected = sum((a - b) ** 2 for a, b in zip(fn, fhat))
    ctx = build_context(Normal(), x, theta, "Sn*", multiplier=False)
    assert_allclose(statistic_observed(ctx), expected, rtol=1e-15)


def direct_process(ctx, z):
    n = ctx.n
    zbar = z.mean()
    out = np.zeros(ctx.m)
    for j in range(ctx.m):
        out[j] = sum((z[i] - zbar) * (ctx.indicator[i, j] - ctx.influence[i] @ ctx.Fdot[j]) for i in range(n))
    return out / math.sqrt(n)


def test_factored_form_matches_direct_formula():
    ctx = toy_context()
    z = np.array([0.3, -1.2, 0.8])
    assert_allclose(multiplier_process(ctx, z), direct_process(ctx, z), atol=1e-14)


def test_factored_form_random_instances(rng):
    for _ in range(20):
        n, m, p = rng.integers(2, 9, size=3)
        data = rng.normal(size=(n, 2))
        pts = rng.normal(size=(m, 2))
        ctx = GofContext("Tn*", data, np.zeros(p), pts, np.zeros(m), np.zeros(m),
                         indicator_matrix(data, pts).astype(float), rng.normal(size=(n, p)), rng.normal(size=(m, p)))
        z = rng.normal(size=n)
        assert np.max(np.abs(multiplier_process(ctx, z) - direct_process(ctx, z))) <= 1e-12


def test_constant_weights_annihilate():
    assert multiplier_replicate(toy_context(), np.full(3, 2.5)) == 0.0


def test_permutation_invariance():
    ctx = toy_context("Tn*")
    z = np.array([0.3, -1.2, 0.8])
    perm = np.array([2, 0, 1])
    shuffled = GofContext("Tn*", ctx.data[perm], ctx.theta, ctx.eval_points, ctx.Fn, ctx.Fhat,
                          ctx.indicator[perm], ctx.influence[perm], ctx.Fdot)
    assert_allclose(multiplier_replicate(shuffled, z[perm]), multiplier_replicate(ctx, z), rtol=1e-14)


def test_batched_replicates_match_single(rng):
    ctx = toy_context()
    z = rng.normal(size=(4, 3))
    assert_allclose(multiplier_replicate(ctx, z), [multiplier_replicate(ctx, r) for r in z], rtol=1e-14)


def test_pvalue_convention():
    reps = np.array([0.1, 0.5, 0.5, 0.9])
    assert pvalue(0.5, reps) == 0.75
    assert pvalue(1.0, reps) == 0.0
    assert pvalue(0.5, reps, corrected=True) == 4 / 5


def test_multiplier_weights():
    assert set(np.unique(MultiplierWeights("rademacher").draw(stream(3), 100))) == {-1.0, 1.0}
    with pytest.raises(ValueError):
        MultiplierWeights("uniform")


def test_minimum_replicates():
    x = Normal().sample([0, 1], 30, stream(4))
    with pytest.raises(ValueError):
        multiplier_test(Normal(), x, N=50)


def test_same_seed_bit_identical():
    x = Normal().sample([10, 1], 100, stream(5))
    a = multiplier_test(Normal(), x, "Sn*", 200, seed=7)
    b = multiplier_test(Normal(), x, "Sn*", 200, seed=7)
    assert np.array_equal(a.replicates, b.replicates) and a.pvalue == b.pvalue
    a = parametric_bootstrap_test(Normal(), x, "Sn", 100, seed=7)
    b = parametric_bootstrap_test(Normal(), x, "Sn", 100, seed=7)
    assert np.array_equal(a.replicates, b.replicates)


def test_stored_pvalue_reproducible():
    x = get_family("logis").sample(np.array([0.0, 1.0]), 150, stream(6))
    for res in (multiplier_test(Normal(), x, "Tn", 200, seed=1), parametric_bootstrap_test(Normal(), x, "Tn*", 100, seed=1)):
        assert res.pvalue == np.mean(res.replicates >= res.observed)
        assert 0.0 <= res.pvalue <= 1.0


def test_constant_data_fails_before_resampling():
    with pytest.raises(DegenerateData):
        parametric_bootstrap_test(Normal(), np.full(50, 1.0), N=100)
    with pytest.raises(DegenerateData):
        multiplier_test(Normal(), np.full(50, 1.0), N=100)


def test_replicate_failure_threshold(monkeypatch):
    import gofmult.gof as gof
    from gofmult.errors import NonConvergence

    real = gof.fit_mle
    count = {"n": 0}

    def flaky(family, data, config=None, with_influence=True):
        count["n"] += 1
        if count["n"] > 1 and count["n"] % 10 == 0:
            raise NonConvergence("forced")
        return real(family, data, config, with_influence)

    monkeypatch.setattr(gof, "fit_mle", flaky)
    x = Normal().sample([0, 1], 40, stream(8))
    with pytest.raises(ReplicateFailure) as err:
        gof.parametric_bootstrap_test(Normal(), x, N=100, seed=1)
    assert err.value.failures == 3


def test_mp_and_pb_agree_on_large_null_sample():
    x = Normal().sample([10, 1], 500, stream(9))
    mp = multiplier_test(Normal(), x, "Sn*", 500, seed=1)
    pb = parametric_bootstrap_test(Normal(), x, "Sn*", 500, seed=1)
    assert abs(mp.pvalue - pb.pvalue) <= 0.1


def test_location_scale_equivariance():
    x = get_family("logis").sample(np.array([0.0, 1.0]), 120, stream(10))
    a = multiplier_test(Normal(), x, "Sn*", 200, seed=3)
    b = multiplier_test(Normal(), 5.0 + 3.0 * x, "Sn*", 200, seed=3)
    assert_allclose(a.observed, b.observed, rtol=1e-10)
    assert_allclose(a.replicates, b.replicates, rtol=1e-6)


@pytest.mark.slow
def test_null_pvalues_uniform():
    ps = []
    for k in range(500):
        x = Normal().sample([10, 1], 200, stream(11, k))
        ps.append(multiplier_test(Normal(), x, "Sn*", 250, seed=k).pvalue)
    assert stats.kstest(ps, "uniform").statistic <= 1.36 / math.sqrt(500)


def test_divergence_under_alternative():
    def medians(n):
        obs, rep = [], []
        for k in range(20):
            x = get_family("weibull").sample(np.array([1.2, 1.0]), n, stream(12, n, k))
            r = multiplier_test(Normal(), x, "Sn*", 100, seed=k)
            obs.append(r.observed)
            rep.append(np.median(r.replicates))
        return np.median(obs), np.median(rep)

    o1, r1 = medians(100)
    o4, r4 = medians(400)
    assert o4 > o1
    assert 0.5 <= r4 / r1 <= 2.0


def test_statistic_aliases():
    assert normalize_statistic("snstar") == "Sn*"
    assert normalize_statistic("TN") == "Tn"
    with pytest.raises(ValueError):
        normalize_statistic("ad")
