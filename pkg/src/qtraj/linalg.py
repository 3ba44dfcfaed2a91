"""Dense complex-matrix primitives: PSD cone, trace norm, projective metric.

States are plain complex numpy arrays (d x d, Hermitian, PSD, unit trace).
Superoperators are represented as d^2 x d^2 complex matrices acting on the
row-major vectorization of a matrix, in the matrix-unit basis E_ij ordered
row-major.  With that convention the representation of a composition is the
matrix product of the representations.
"""

from __future__ import annotations

import numpy as np

TOL_HERM = 1e-10
TOL_PSD = 1e-10
TOL_TRACE = 1e-10

# sup{lambda : lambda*B <= A} for unit-trace A, B is always in [0, 1];
# 60 bisection steps resolve it to ~1e-18.
_GAUGE_BISECTION_ITERS = 60


class KernelIntersectionError(RuntimeError):
    """A sampled state was annihilated by a map assumed to have trivial kernel on states."""


def hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def min_eigenvalue(m: np.ndarray) -> float:
    """Smallest eigenvalue of the Hermitian part of m."""
    return float(np.linalg.eigvalsh(hermitize(m))[0])


def is_hermitian(m: np.ndarray, tol: float = TOL_HERM) -> bool:
    return bool(np.max(np.abs(m - m.conj().T)) <= tol)


def check_state(
    rho: np.ndarray,
    tol_herm: float = TOL_HERM,
    tol_psd: float = TOL_PSD,
    tol_trace: float = TOL_TRACE,
) -> None:
    """Raise ValueError unless rho is a valid density matrix within tolerances."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"state must be square, got shape {rho.shape}")
    if not np.all(np.isfinite(rho.view(float) if rho.dtype.kind == "f" else np.abs(rho))):
        raise ValueError("state has non-finite entries")
    if not is_hermitian(rho, tol_herm):
        raise ValueError("state is not Hermitian within tolerance")
    lo = min_eigenvalue(rho)
    if lo < -tol_psd:
        raise ValueError(f"state not PSD: min eigenvalue {lo:.3e}")
    tr = complex(np.trace(rho)).real
    if abs(tr - 1.0) > tol_trace:
        raise ValueError(f"state trace {tr!r} differs from 1 beyond tolerance")


def is_state(rho: np.ndarray, **kwargs) -> bool:
    try:
        check_state(rho, **kwargs)
        return True
    except ValueError:
        return False


def maximally_mixed(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex) / dim


def basis_state(dim: int, i: int) -> np.ndarray:
    rho = np.zeros((dim, dim), dtype=complex)
    rho[i, i] = 1.0
    return rho


def trace_norm(m: np.ndarray) -> float:
    """Trace norm: sum of singular values."""
    m = np.asarray(m, dtype=complex)
    if not np.all(np.isfinite(m.real)) or not np.all(np.isfinite(m.imag)):
        raise ValueError("trace_norm: non-finite entries")
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def cone_gauge_m(a: np.ndarray, b: np.ndarray, tol_psd: float = TOL_PSD) -> float:
    """Largest lambda >= 0 with a - lambda*b PSD, for unit-trace PSD a, b.

    Computed by bisection on the PSD predicate, which stays well defined when
    b is rank deficient (where a similarity-transform formula would not be).
    Returns 0 when no positive lambda exists.
    """

    def psd_at(lam: float) -> bool:
        return min_eigenvalue(a - lam * b) >= -tol_psd

    if psd_at(1.0):
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(_GAUGE_BISECTION_ITERS):
        mid = 0.5 * (lo + hi)
        if psd_at(mid):
            lo = mid
        else:
            hi = mid
    return lo


def projective_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Projective metric on states: (1 - m(a,b)m(b,a)) / (1 + m(a,b)m(b,a))."""
    prod = cone_gauge_m(a, b) * cone_gauge_m(b, a)
    return (1.0 - prod) / (1.0 + prod)


# ---------------------------------------------------------------------------
# Superoperators
# ---------------------------------------------------------------------------


def superop_identity(dim: int) -> np.ndarray:
    return np.eye(dim * dim, dtype=complex)


def superop_from_kraus(kraus_branches) -> np.ndarray:
    """Representation of X -> sum_j V_j X V_j^dagger in the matrix-unit basis."""
    branches = [np.asarray(v, dtype=complex) for v in kraus_branches]
    d = branches[0].shape[0]
    m = np.zeros((d * d, d * d), dtype=complex)
    for v in branches:
        m += np.kron(v, v.conj())
    return m


def apply_superop(m: np.ndarray, x: np.ndarray) -> np.ndarray:
    d = x.shape[0]
    return (m @ x.reshape(-1)).reshape(d, d)


def superop_dim(m: np.ndarray) -> int:
    d2 = m.shape[0]
    d = int(round(d2**0.5))
    if d * d != d2:
        raise ValueError("superoperator matrix is not d^2 x d^2")
    return d


def projective_apply(m: np.ndarray, x: np.ndarray, ref: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    """Projective action of a superoperator: normalize in trace norm, fall back to ref on 0."""
    y = apply_superop(m, x)
    norm = trace_norm(y)
    if norm <= tol:
        return ref
    return y / norm


def random_pure_state(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Haar-random pure state density matrix."""
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    return np.outer(v, v.conj())


def random_density_matrix(rng: np.random.Generator, dim: int, rank: int | None = None) -> np.ndarray:
    """Random mixed state from a Ginibre factor of the given rank (default full)."""
    k = dim if rank is None else rank
    g = rng.standard_normal((dim, k)) + 1j * rng.standard_normal((dim, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def contraction_coefficient_lower_bound(
    m: np.ndarray,
    n_samples: int,
    rng: np.random.Generator,
    ref: np.ndarray | None = None,
    kernel_tol: float = 1e-14,
) -> float:
    """Sampled lower bound on the projective contraction coefficient of a superoperator.

    Takes the max of the projective distance between images of Haar-random
    pure-state pairs.  The true coefficient is a supremum over all state
    pairs, so the returned value is an estimate (lower bound), not a
    certificate.  A sampled state annihilated by the map raises
    KernelIntersectionError.
    """
    d = superop_dim(m)
    if ref is None:
        ref = maximally_mixed(d)
    best = 0.0
    for _ in range(n_samples):
        a = random_pure_state(rng, d)
        b = random_pure_state(rng, d)
        ya = apply_superop(m, a)
        yb = apply_superop(m, b)
        na, nb = trace_norm(ya), trace_norm(yb)
        if na <= kernel_tol or nb <= kernel_tol:
            raise KernelIntersectionError("map annihilates a sampled state")
        best = max(best, projective_distance(hermitize(ya / na), hermitize(yb / nb)))
    return best
