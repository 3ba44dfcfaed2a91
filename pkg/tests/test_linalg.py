import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtraj.linalg import (
    KernelIntersectionError,
    basis_state,
    cone_gauge_m,
    contraction_coefficient_lower_bound,
    hermitize,
    maximally_mixed,
    projective_distance,
    random_density_matrix,
    random_pure_state,
    superop_from_kraus,
    superop_identity,
    trace_norm,
)

from conftest import random_state


def test_trace_norm_identity():
    assert trace_norm(np.eye(2, dtype=complex)) == pytest.approx(2.0, abs=1e-12)


def test_trace_norm_pure_state_difference():
    m = basis_state(2, 0) - basis_state(2, 1)
    assert trace_norm(m) == pytest.approx(2.0, abs=1e-12)


def test_trace_norm_matches_eigenvalue_oracle(rng):
    # Hermitian M: trace norm equals the sum of |eigenvalues|
    for _ in range(20):
        m = hermitize(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
        oracle = np.sum(np.abs(np.linalg.eigvalsh(m)))
        assert trace_norm(m) == pytest.approx(oracle, abs=1e-10)


def test_trace_norm_rejects_nonfinite():
    with pytest.raises(ValueError):
        trace_norm(np.array([[np.nan, 0], [0, 1]], dtype=complex))


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_trace_norm_is_a_norm(seed):
    r = np.random.default_rng(seed)
    a = r.standard_normal((3, 3)) + 1j * r.standard_normal((3, 3))
    b = r.standard_normal((3, 3)) + 1j * r.standard_normal((3, 3))
    c = r.uniform(-3, 3)
    assert trace_norm(a + b) <= trace_norm(a) + trace_norm(b) + 1e-10
    assert trace_norm(c * a) == pytest.approx(abs(c) * trace_norm(a), abs=1e-10)


def _gauge_grid_oracle(a, b, grid=20001):
    # independent evaluation of sup{lambda: a - lambda*b PSD} by grid scan
    best = 0.0
    for lam in np.linspace(0.0, 1.0, grid):
        if np.linalg.eigvalsh(hermitize(a - lam * b))[0] >= -1e-10:
            best = lam
    return best


def test_cone_gauge_self():
    rho = random_density_matrix(np.random.default_rng(5), 3)
    assert cone_gauge_m(rho, rho) == pytest.approx(1.0, abs=1e-12)


def test_cone_gauge_mixed_vs_pure():
    mixed = maximally_mixed(2)
    pure = basis_state(2, 0)
    assert cone_gauge_m(mixed, pure) == pytest.approx(0.5, abs=1e-9)
    assert cone_gauge_m(pure, mixed) == pytest.approx(0.0, abs=1e-9)
    assert cone_gauge_m(mixed, pure) == pytest.approx(_gauge_grid_oracle(mixed, pure), abs=1e-4)


def test_cone_gauge_rank_deficient_without_exception(rng):
    # interior A, boundary B whose kernel is not contained in ker A
    a = random_density_matrix(rng, 3)
    b = random_state(rng, 3, rank=1)
    val = cone_gauge_m(a, b)
    assert 0.0 <= val <= 1.0


def test_projective_distance_basics(rng):
    rho = random_density_matrix(rng, 2)
    assert projective_distance(rho, rho) == pytest.approx(0.0, abs=1e-9)
    # boundary state at distance 1 from any interior state (within the PSD
    # tolerance of the cone gauge, which admits lambda up to 2*tol_psd)
    assert projective_distance(maximally_mixed(2), basis_state(2, 0)) == pytest.approx(1.0, abs=1e-9)


def test_projective_distance_bounds_sampled(rng):
    for _ in range(200):
        a = random_density_matrix(rng, 2)
        b = random_density_matrix(rng, 2)
        d = projective_distance(a, b)
        assert -1e-12 <= d <= 1.0 + 1e-12
        assert 0.5 * trace_norm(a - b) <= d + 1e-8
        assert d == pytest.approx(projective_distance(b, a), abs=1e-9)


def _toy_superop(d):
    # channel rho -> tr(rho)/d * I
    ops = []
    for k in range(d):
        for l in range(d):
            v = np.zeros((d, d), dtype=complex)
            v[k, l] = 1.0 / np.sqrt(d)
            ops.append(v)
    return superop_from_kraus(ops)


def test_contraction_bound_toy_channel(rng):
    assert contraction_coefficient_lower_bound(_toy_superop(2), 30, rng) == pytest.approx(0.0, abs=1e-9)


def test_contraction_bound_identity(rng):
    est = contraction_coefficient_lower_bound(superop_identity(2), 30, rng)
    assert est == pytest.approx(1.0, abs=1e-9)


def test_contraction_bound_strictly_positive_channel(rng):
    # depolarizing-style strictly positive channel has bound < 1
    alpha, d = 0.4, 2
    ops = []
    for k in range(d):
        for l in range(d):
            v = np.zeros((d, d), dtype=complex)
            v[k, l] = np.sqrt((1 - alpha) * (k == l) + alpha / d)
            ops.append(v)
    est = contraction_coefficient_lower_bound(superop_from_kraus(ops), 50, rng)
    assert est < 1.0 - 1e-3


def test_contraction_bound_kernel_violation(rng):
    zero = superop_from_kraus([np.zeros((2, 2), dtype=complex)])
    with pytest.raises(KernelIntersectionError):
        contraction_coefficient_lower_bound(zero, 5, rng)


def test_channel_contracts_projective_distance(rng):
    # trace-preserving positive map never expands the projective metric
    for _ in range(20):
        g = rng.standard_normal((4, 2, 2)) + 1j * rng.standard_normal((4, 2, 2))
        acc = sum(v.conj().T @ v for v in g)
        evals, evecs = np.linalg.eigh(acc)
        w = evecs @ np.diag(evals**-0.5) @ evecs.conj().T
        ops = [v @ w for v in g]  # normalized so sum V'V = I
        m = superop_from_kraus(ops)
        a = random_density_matrix(rng, 2)
        b = random_density_matrix(rng, 2)
        fa = hermitize((m @ a.reshape(-1)).reshape(2, 2))
        fb = hermitize((m @ b.reshape(-1)).reshape(2, 2))
        fa /= np.trace(fa).real
        fb /= np.trace(fb).real
        assert projective_distance(fa, fb) <= projective_distance(a, b) + 1e-9


def test_pure_state_sampler_valid(rng):
    rho = random_pure_state(rng, 3)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.eigvalsh(rho)[0] >= -1e-12
