import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtraj.environment import DisorderProcess
from qtraj.instrument import KrausInstrument
from qtraj.linalg import basis_state, check_state, maximally_mixed
from qtraj.models import DistSpec, EnvSpec, ModelSpec, construct
from qtraj.trajectory import (
    EnumerationCapError,
    exact_cylinder_distribution,
    exact_pattern_mean,
    exact_pattern_moments,
    parse_pattern,
    pattern_count,
    pattern_indicators,
    sample_annealed,
    sample_quenched,
    sample_records,
    sample_records_annealed,
)


def _single_outcome_env():
    inst = KrausInstrument(dim=2, labels=("a",), kraus=((np.eye(2, dtype=complex),),))
    return DisorderProcess("deterministic", 0, lambda p: inst)


def test_quenched_toy_posteriors_are_basis_states():
    env, _ = construct(ModelSpec("toy"))
    sample = sample_quenched(env, 0, maximally_mixed(2), 20, seed=5, keep_posteriors=True)
    for rho in sample.posteriors:
        check_state(rho)
        assert np.max(np.diag(rho).real) == pytest.approx(1.0, abs=1e-12)


def test_single_outcome_instrument_constant_record():
    env = _single_outcome_env()
    sample = sample_quenched(env, 0, maximally_mixed(2), 15, seed=1)
    assert np.all(sample.outcomes == 0)


def test_empirical_matches_exact_cylinder_smoke():
    env, _ = construct(ModelSpec("toy"))
    rho0 = maximally_mixed(2)
    n = 2
    exact = exact_cylinder_distribution(env, 0, rho0, n)
    rec = sample_records(env, 0, rho0, n, 20_000, seed=9)
    tv = _tv_against(exact, rec, env.instrument_at(1).n_outcomes)
    assert tv < 0.02


def _tv_against(exact, records, n_outcomes):
    n = records.shape[1]
    keys = records[:, 0].astype(np.int64)
    for j in range(1, n):
        keys = keys * n_outcomes + records[:, j]
    counts = np.bincount(keys, minlength=n_outcomes**n) / records.shape[0]
    tv = 0.0
    for word in range(n_outcomes**n):
        digits = []
        w = word
        for _ in range(n):
            digits.append(w % n_outcomes)
            w //= n_outcomes
        digits = tuple(reversed(digits))
        tv += abs(counts[word] - exact.get(digits, 0.0))
    return 0.5 * tv


def test_annealed_two_point_mixture_oracle():
    # iid environment choosing alpha in {0.2, 0.8} at each step: the annealed
    # law mixes the quenched laws over per-step parameter sequences
    from itertools import product

    from qtraj.instrument import apply_selective
    from qtraj.models import MODELS

    spec = ModelSpec("noisy-label", env=EnvSpec("iid", 3, {"alpha": DistSpec("choice", values=(0.2, 0.8))}))
    env, _ = construct(spec)
    rho0 = maximally_mixed(2)
    n = 2
    insts = {a: MODELS["noisy-label"].build({"d": 2, "alpha": a}) for a in (0.2, 0.8)}
    mix = {}
    for alphas in product((0.2, 0.8), repeat=n):
        weight = 0.5**n
        for word in product(range(4), repeat=n):
            sigma = rho0
            for a, alpha in zip(word, alphas):
                sigma = apply_selective(insts[alpha], a, sigma)
            p = np.trace(sigma).real
            if p > 0:
                mix[word] = mix.get(word, 0.0) + weight * p
    rec = sample_records_annealed(env, lambda e: rho0, n, 20_000, seed=21)
    tv = _tv_against(mix, rec, 4)
    assert tv < 0.02


def test_annealed_deterministic_same_law_as_quenched():
    env, _ = construct(ModelSpec("toy"))
    s = sample_annealed(env, lambda e: maximally_mixed(2), 10, seed=3)
    assert not s.quenched
    assert len(s.outcomes) == 10


def test_annealed_toy_iid_marginals_uniform():
    spec = ModelSpec("toy", env=EnvSpec("iid", 5, {"d": DistSpec("choice", values=(2,))}))
    env, _ = construct(spec)
    rec = sample_records_annealed(env, lambda e: maximally_mixed(2), 1, 8000, seed=2)
    freq = np.bincount(rec[:, 0], minlength=4) / len(rec)
    assert np.all(np.abs(freq - 0.25) < 4 * np.sqrt(0.25 * 0.75 / len(rec)))


def test_pattern_count_examples():
    assert pattern_count([0, 0, 0, 0], (0, 0), 3) == 3
    assert pattern_count([1, 2, 1, 2, 1], (1, 2), 4) == 2
    assert pattern_count([1, 0, 1, 1], (1,), 4) == 3
    with pytest.raises(ValueError):
        pattern_count([0, 1], (0, 1), 2)


@given(st.lists(st.integers(0, 2), min_size=6, max_size=30), st.integers(1, 4))
@settings(max_examples=50, deadline=None)
def test_pattern_count_additivity(seq, split):
    pattern = (0, 1)
    n = len(seq) - len(pattern) + 1
    split = min(split, n - 1)
    total = pattern_count(seq, pattern, n)
    left = pattern_count(seq, pattern, split)
    # remaining window starts, shifted onto the tail of the sequence
    right = pattern_count(seq[split:], pattern, n - split)
    assert total == left + right


def test_exact_cylinder_sums_to_one_across_zoo():
    for name in ("toy", "noisy-label", "cyclic-keep-switch", "gad", "keep-switch", "lazy-cyclic"):
        env, _ = construct(ModelSpec(name))
        d = env.instrument_at(1).dim
        dist = exact_cylinder_distribution(env, 0, maximally_mixed(d), 3)
        assert sum(dist.values()) == pytest.approx(1.0, abs=1e-9)


def test_exact_cylinder_toy_two_step_closed_form():
    env, _ = construct(ModelSpec("toy"))
    dist = exact_cylinder_distribution(env, 0, maximally_mixed(2), 2)
    # P((k1,l1),(k2,l2)) = 1/8 iff l2 == k1 (0-based index a = 2*k + l)
    for a1 in range(4):
        for a2 in range(4):
            k1, l2 = a1 // 2, a2 % 2
            expected = 0.125 if l2 == k1 else 0.0
            assert dist.get((a1, a2), 0.0) == pytest.approx(expected, abs=1e-12)


def test_exact_cylinder_ad_ground_never_emits_one():
    env, _ = construct(ModelSpec("amplitude-damping"))
    dist = exact_cylinder_distribution(env, 0, basis_state(2, 0), 4)
    assert set(dist) == {(0, 0, 0, 0)}


def test_enumeration_cap():
    env, _ = construct(ModelSpec("toy"))
    with pytest.raises(EnumerationCapError):
        exact_cylinder_distribution(env, 0, maximally_mixed(2), 4, cap=100)


def test_exact_pattern_moments_zero_mass():
    env, _ = construct(ModelSpec("amplitude-damping"))
    mean, var = exact_pattern_moments(env, 0, basis_state(2, 0), 3, (1,))
    assert mean == 0.0 and var == 0.0


def test_exact_pattern_moments_toy_single_symbol():
    env, _ = construct(ModelSpec("toy"))
    mean, var = exact_pattern_moments(env, 0, maximally_mixed(2), 4, (0,))
    assert mean == pytest.approx(1.0, abs=1e-10)  # 4 * 1/4
    assert var > 0


def test_exact_pattern_mean_matches_distribution():
    env, _ = construct(ModelSpec("cyclic-keep-switch"))
    rho0 = maximally_mixed(3)
    assert exact_pattern_mean(env, 0, rho0, (0,)) == pytest.approx(1 / 6, abs=1e-12)


def test_mc_moments_match_exact_smoke():
    env, _ = construct(ModelSpec("noisy-label"))
    rho0 = maximally_mixed(2)
    n, pattern = 3, (0,)
    mean, var = exact_pattern_moments(env, 0, rho0, n, pattern)
    rec = sample_records(env, 0, rho0, n, 20_000, seed=13)
    counts = pattern_indicators(rec, pattern).sum(axis=1)
    se = counts.std(ddof=1) / np.sqrt(len(counts))
    assert abs(counts.mean() - mean) < 4 * se


def test_sampled_posteriors_valid_states():
    env, _ = construct(ModelSpec("gad"))
    s = sample_quenched(env, 0, maximally_mixed(2), 50, seed=3, keep_posteriors=True)
    for rho in s.posteriors:
        check_state(rho, tol_trace=1e-9)


def test_parse_pattern_forms():
    labels = ("K", "S")
    assert parse_pattern(labels, "K,S") == (0, 1)
    assert parse_pattern(labels, "KS") == (0, 1)
    assert parse_pattern(labels, "K") == (0,)
    pair_labels = ("11", "12", "21", "22")
    assert parse_pattern(pair_labels, "11,21") == (0, 2)
    with pytest.raises(ValueError):
        parse_pattern(labels, "KX")


def test_workers_do_not_change_records():
    env, _ = construct(ModelSpec("cyclic-keep-switch"))
    rho0 = maximally_mixed(3)
    a = sample_records(env, 0, rho0, 40, 64, seed=4, workers=1)
    b = sample_records(env, 0, rho0, 40, 64, seed=4, workers=3)
    assert np.array_equal(a, b)


def test_trajectory_id_stream_independent_of_batch():
    env, _ = construct(ModelSpec("toy"))
    rho0 = maximally_mixed(2)
    big = sample_records(env, 0, rho0, 30, 10, seed=8)
    one = sample_quenched(env, 0, rho0, 30, seed=8, traj_id=7)
    assert np.array_equal(big[7], one.outcomes)
