import numpy as np
import pytest

from qtraj.cltstats import (
    anderson_darling_statistic,
    clt_report,
    default_lag_window,
    estimate_mu,
    estimate_sigma2_batch,
    estimate_sigma2_series,
    normality_test,
    normalized_sums,
    sigma2_group_stderr,
    skew_mixing_bound,
    summability_report,
    variance_convergence_check,
)
from qtraj.environment import DisorderProcess
from qtraj.instrument import KrausInstrument
from qtraj.linalg import maximally_mixed
from qtraj.models import MODELS, ModelSpec, construct
from qtraj.trajectory import (
    exact_pattern_moments,
    pattern_indicators,
    sample_records,
)


def _bernoulli_half_env():
    # keep-switch at p = 1/2 yields an iid fair-coin record; the zoo rejects
    # p = 1/2 (no forgetting), so build the instrument directly
    inst = MODELS["keep-switch"].build({"p": 0.5})
    return DisorderProcess("deterministic", 0, lambda p: inst)


def test_bernoulli_half_sigma2_quarter():
    env = _bernoulli_half_env()
    # exact enumeration oracle: increments of Var(N_n) stabilize at Sigma^2
    _, v5 = exact_pattern_moments(env, 0, maximally_mixed(2), 5, (0,))
    _, v6 = exact_pattern_moments(env, 0, maximally_mixed(2), 6, (0,))
    assert v6 - v5 == pytest.approx(0.25, abs=1e-10)
    rec = sample_records(env, 0, maximally_mixed(2), 2000, 400, seed=3)
    ind = pattern_indicators(rec, (0,))
    mu, _ = estimate_mu(ind)
    s2 = estimate_sigma2_series(ind, mu)
    s2b = estimate_sigma2_batch(ind, mu, 100)
    assert abs(s2 - 0.25) < 0.025
    assert abs(s2b - 0.25) < 0.025


def test_zero_mass_pattern_zero_stats():
    env = _bernoulli_half_env()
    rec = sample_records(env, 0, maximally_mixed(2), 100, 50, seed=1)
    ind = pattern_indicators(rec, (0,)) & False
    mu, _ = estimate_mu(ind)
    assert mu == 0.0
    assert estimate_sigma2_series(ind, mu) == 0.0


def test_toy_sigma2_matches_enumeration_oracle():
    env, _ = construct(ModelSpec("toy"))
    rho0 = maximally_mixed(2)
    # Cesaro-style oracle: Var(N_n) - Var(N_{n-1}) is exact Sigma^2 once the
    # covariance tail has died (lag >= 2 vanishes for the toy record)
    _, v3 = exact_pattern_moments(env, 0, rho0, 3, (0,))
    _, v4 = exact_pattern_moments(env, 0, rho0, 4, (0,))
    sigma2_exact = v4 - v3
    assert sigma2_exact == pytest.approx(5 / 16, abs=1e-10)
    rec = sample_records(env, 0, rho0, 2000, 500, seed=5)
    ind = pattern_indicators(rec, (0,))
    mu, _ = estimate_mu(ind)
    assert abs(estimate_sigma2_series(ind, mu) - sigma2_exact) < 0.1 * sigma2_exact


def test_variance_convergence_iid_flat():
    env = _bernoulli_half_env()
    rec = sample_records(env, 0, maximally_mixed(2), 1000, 2000, seed=7)
    ind = pattern_indicators(rec, (0,))
    mu, _ = estimate_mu(ind)
    vals = variance_convergence_check(ind, mu, [100, 400, 1000])
    assert np.all(np.abs(vals - 0.25) < 0.03)


def test_variance_convergence_degenerate_goes_to_zero():
    inst = KrausInstrument(dim=2, labels=("a",), kraus=((np.eye(2, dtype=complex),),))
    env = DisorderProcess("deterministic", 0, lambda p: inst)
    rec = sample_records(env, 0, maximally_mixed(2), 500, 100, seed=2)
    ind = pattern_indicators(rec, (0,))
    vals = variance_convergence_check(ind, 1.0, [100, 500])
    assert np.all(vals == 0.0)
    z = normalized_sums(ind, 1.0)
    assert np.max(np.abs(z)) == 0.0


def test_normality_test_gaussian_calibration():
    rng = np.random.default_rng(11)
    rejections = 0
    for _ in range(40):
        z = rng.normal(0.0, 0.7, size=10_000)
        res = normality_test(z, 0.49)
        if res.p_value < 0.01:
            rejections += 1
    assert rejections <= 2  # >= 95% of runs pass at level 0.01


def test_normality_test_rejects_constant():
    res = normality_test(np.zeros(2000), 1.0)
    assert res.p_value < 1e-6


def test_normality_test_degenerate_routing():
    res = normality_test(np.zeros(100), 0.0)
    assert res.degenerate
    assert np.isnan(res.ks_statistic)
    assert res.max_abs == 0.0


def test_normality_test_lattice_correction_preserves_level():
    rng = np.random.default_rng(13)
    n = 2000
    # lattice-valued sums: rounded Gaussians on the 1/sqrt(n) grid
    z = np.round(rng.normal(0.0, 0.5, size=10_000) * np.sqrt(n)) / np.sqrt(n)
    raw = normality_test(z, 0.25)
    corrected = normality_test(z, 0.25, lattice_step=1 / np.sqrt(n), dither_seed=5)
    assert corrected.p_value > 0.01
    assert corrected.p_value >= raw.p_value


def test_estimate_mu_single_outcome():
    ind = np.ones((30, 50), dtype=bool)
    mu, se = estimate_mu(ind)
    assert mu == 1.0 and se == 0.0


def test_estimate_mu_zero_mass_pattern_exact_zero():
    # toy pattern ((1,1),(2,2)) breaks the chaining constraint, so it never occurs
    env, _ = construct(ModelSpec("toy"))
    from qtraj.trajectory import exact_pattern_mean, parse_pattern

    pattern = parse_pattern(env.instrument_at(1).labels, "11,22")
    assert exact_pattern_mean(env, 0, maximally_mixed(2), pattern) == 0.0
    rec = sample_records(env, 0, maximally_mixed(2), 200, 200, seed=17)
    mu, _ = estimate_mu(pattern_indicators(rec, pattern))
    assert mu == 0.0


def test_batch_length_must_divide():
    ind = np.zeros((4, 10))
    with pytest.raises(ValueError):
        estimate_sigma2_batch(ind, 0.0, 3)


def test_lag_window_bounds():
    assert default_lag_window(2000) == 17
    ind = np.zeros((2, 10))
    with pytest.raises(ValueError):
        estimate_sigma2_series(ind, 0.0, lag_window=10)


def test_skew_mixing_bound_zero_inputs():
    assert skew_mixing_bound(lambda n: 0.0, lambda k: 0.0, 5) == 0.0


def test_skew_mixing_bound_explicit_minimum():
    r = lambda j: 2.0 * 0.5**j
    val = skew_mixing_bound(lambda n: 0.0, r, 10)
    assert val == pytest.approx(r(9) + 2 * r(9), abs=1e-15)


def test_skew_mixing_bound_monotone():
    alpha = lambda n: 0.25 * 0.5**n
    r = lambda j: 2.0 * 0.7**j
    vals = [skew_mixing_bound(alpha, r, n) for n in range(2, 20)]
    assert all(x >= y - 1e-12 for x, y in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        skew_mixing_bound(alpha, r, 1)


def test_summability_report_geometric():
    alpha = lambda n: 0.25 * 0.6**n
    r = lambda j: 2.0 * 0.7**j
    partial, converged = summability_report(alpha, r, delta=1.0, n_max=400)
    assert converged
    assert np.all(np.diff(partial) >= 0)
    # slowly decaying geometric tails still register as summable
    _, converged_slow = summability_report(lambda n: 0.0, lambda j: 6.0 * 0.98**j, n_max=200)
    assert converged_slow
    # a non-vanishing bound does not
    _, diverged = summability_report(lambda n: 0.2, lambda j: 0.5, n_max=100)
    assert not diverged
    # identically zero tail converges trivially
    _, zero = summability_report(lambda n: 0.0, lambda j: 0.0, n_max=50)
    assert zero


def test_clt_report_fields():
    env = _bernoulli_half_env()
    rec = sample_records(env, 0, maximally_mixed(2), 400, 500, seed=9)
    ind = pattern_indicators(rec, (0,))
    rep = clt_report(ind, lattice_correction=True, dither_seed=1)
    assert rep.n_steps == 400 and rep.n_trajectories == 500
    assert not rep.degenerate
    assert abs(rep.sigma2_series - rep.sigma2_batch) < 0.15 * rep.sigma2_series
    d = rep.to_dict()
    assert "ks_pvalue" in d and "ks_pvalue_raw" in d


def test_sigma2_group_stderr_reasonable():
    env = _bernoulli_half_env()
    rec = sample_records(env, 0, maximally_mixed(2), 500, 600, seed=4)
    ind = pattern_indicators(rec, (0,))
    mu, _ = estimate_mu(ind)
    mean, se = sigma2_group_stderr(ind, mu, n_groups=6)
    assert abs(mean - 0.25) < 5 * se + 0.02


def test_anderson_darling_secondary():
    rng = np.random.default_rng(3)
    z = rng.normal(0, 0.5, 4000)
    assert anderson_darling_statistic(z, 0.25) < 2.0
    assert anderson_darling_statistic(z + 0.5, 0.25) > 10.0


def test_estimator_consistency_across_zoo():
    # series and batch long-run variance agree within 15% on every zoo model
    # at a desk-scale configuration (stationary start, most likely symbol)
    from qtraj.stationary import solve_stationary_state
    from qtraj.trajectory import exact_cylinder_distribution

    for name in MODELS:
        env, _ = construct(ModelSpec(name))
        sol = solve_stationary_state(env, 0)
        assert sol.converged, name
        one_step = exact_cylinder_distribution(env, 0, sol.state, 1)
        pattern = max(one_step, key=one_step.get)
        rec = sample_records(env, 0, sol.state, 1000, 500, seed=31)
        ind = pattern_indicators(rec, pattern)
        mu, _ = estimate_mu(ind)
        s2 = estimate_sigma2_series(ind, mu)
        s2b = estimate_sigma2_batch(ind, mu, 100)
        if max(s2, s2b) <= 1e-12:
            continue  # degenerate record (replacement from its stationary state)
        assert abs(s2 - s2b) <= 0.15 * max(s2, s2b), f"{name}: {s2} vs {s2b}"
