"""Dynamically stationary states, forgetting rates, and label-chain bounds.

The stationary trajectory is found by iterating the non-selective channels
backward from a full-rank reference state and detecting Cauchy convergence in
trace norm under a doubling schedule.  Forgetting is quantified by the
expected trace-norm gap between an arbitrarily started evolution and the
stationary trajectory, averaged over disorder draws.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .environment import DisorderProcess
from .instrument import KrausInstrument, apply_channel, compose_channels, extract_label_map
from .linalg import contraction_coefficient_lower_bound, maximally_mixed, trace_norm
from .rng import TAG_BETA, derive_seed, substream

TOL_STATIONARY = 1e-9
MAX_BACK_DEPTH = 4096


@dataclass
class StationaryStateSolution:
    state: np.ndarray
    back_depth: int
    cauchy_gap: float
    converged: bool


def _backward_iterate(env: DisorderProcess, origin: int, depth: int, ref: np.ndarray) -> np.ndarray:
    """Apply the channels at indices origin-depth+1 .. origin (innermost first) to ref."""
    rho = ref
    for idx in range(origin - depth + 1, origin + 1):
        rho = apply_channel(env.instrument_at(idx), rho)
    return rho


def solve_stationary_state(
    env: DisorderProcess,
    origin: int = 0,
    tol: float = TOL_STATIONARY,
    max_back_depth: int = MAX_BACK_DEPTH,
    ref: np.ndarray | None = None,
) -> StationaryStateSolution:
    """Backward-iteration solve for the stationary state at the given index.

    Iterates x_n = channel(origin) o ... o channel(origin-n+1) applied to a
    full-rank reference state and stops when one doubling of the depth moves
    the iterate by at most tol in trace norm.  A second backward iteration
    from an independent full-rank reference must agree to the same tolerance;
    this rules out spurious convergence on periodic non-forgetting channels,
    where iterates of a single reference can revisit themselves.
    Non-convergence within max_back_depth is reported as a failed solution,
    not an exception, since forgetting may genuinely fail for the model.
    """
    if max_back_depth < 2:
        raise ValueError("max_back_depth must be >= 2")
    d = env.instrument_at(origin).dim
    if ref is None:
        ref = maximally_mixed(d)
    weights = 2.0 * np.arange(1, d + 1) / (d * (d + 1))
    ref2 = np.diag(weights).astype(complex)
    if trace_norm(ref2 - ref) <= tol:
        ref2 = np.diag(weights[::-1]).astype(complex)
    depth = 1
    current = _backward_iterate(env, origin, depth, ref)
    gap = np.inf
    while depth < max_back_depth:
        depth *= 2
        nxt = _backward_iterate(env, origin, depth, ref)
        gap = max(
            trace_norm(nxt - current),
            trace_norm(nxt - _backward_iterate(env, origin, depth, ref2)),
        )
        current = nxt
        if gap <= tol:
            return StationaryStateSolution(state=current, back_depth=depth, cauchy_gap=gap, converged=True)
    return StationaryStateSolution(state=current, back_depth=depth, cauchy_gap=float(gap), converged=False)


def verify_stationarity(
    env: DisorderProcess,
    origin: int,
    horizons: Sequence[int],
    tol: float = TOL_STATIONARY,
    max_back_depth: int = MAX_BACK_DEPTH,
) -> float:
    """Max over horizons n of || forward-evolved s(origin) - s(origin+n) ||_1.

    The state at origin+n is solved independently, so this cross-checks the
    cocycle-invariance of the backward solution.  Solver failure raises.
    """
    sol = solve_stationary_state(env, origin, tol=tol, max_back_depth=max_back_depth)
    if not sol.converged:
        raise RuntimeError(f"stationary solver did not converge at origin {origin}")
    worst = 0.0
    rho = sol.state
    for n in range(1, max(horizons) + 1):
        rho = apply_channel(env.instrument_at(origin + n), rho)
        if n in horizons:
            indep = solve_stationary_state(env, origin + n, tol=tol, max_back_depth=max_back_depth)
            if not indep.converged:
                raise RuntimeError(f"stationary solver did not converge at origin {origin + n}")
            worst = max(worst, trace_norm(rho - indep.state))
    return worst


@dataclass
class ForgettingEstimate:
    n_values: tuple[int, ...]
    beta_hat: np.ndarray
    stderr: np.ndarray
    fitted_rate: tuple[float, float] | None  # (C, r) with beta ~ C * r^n


def estimate_beta(
    env: DisorderProcess,
    theta_map: Callable[[DisorderProcess], np.ndarray],
    n_values: Sequence[int],
    n_env_samples: int,
    seed: int = 0,
    tol: float = TOL_STATIONARY,
    max_back_depth: int = MAX_BACK_DEPTH,
    max_failure_fraction: float = 0.01,
) -> ForgettingEstimate:
    """Monte Carlo estimate of the expected trace-norm forgetting at each horizon.

    Each disorder draw solves the stationary state at the origin, then evolves
    the initial-state rule and the stationary state forward with the same
    channels; the stationary trajectory at horizon n is exactly the forward
    image of the solved state.  Draws where the solver fails are skipped, and
    the run aborts when they exceed the allowed fraction.
    """
    n_values = tuple(sorted(int(n) for n in n_values))
    n_max = n_values[-1]
    sums = np.zeros(len(n_values))
    sq_sums = np.zeros(len(n_values))
    failures = 0
    completed = 0
    for s in range(n_env_samples):
        drawn = env if env.kind == "deterministic" else env.reseeded(derive_seed(seed, TAG_BETA, s))
        sol = solve_stationary_state(drawn, 0, tol=tol, max_back_depth=max_back_depth)
        if not sol.converged:
            failures += 1
            if failures > max(1, int(max_failure_fraction * n_env_samples)):
                raise RuntimeError(
                    f"stationary solver failed on {failures}/{s + 1} disorder draws"
                )
            continue
        rho = theta_map(drawn)
        srho = sol.state
        pos = 0
        for n in range(1, n_max + 1):
            inst = drawn.instrument_at(n)
            rho = apply_channel(inst, rho)
            srho = apply_channel(inst, srho)
            if n == n_values[pos]:
                gap = trace_norm(rho - srho)
                sums[pos] += gap
                sq_sums[pos] += gap * gap
                pos += 1
                if pos == len(n_values):
                    break
        completed += 1
    if completed == 0:
        raise RuntimeError("no successful disorder draws")
    beta = sums / completed
    var = np.maximum(sq_sums / completed - beta**2, 0.0)
    stderr = np.sqrt(var / completed)
    fitted = fit_log_linear(n_values, beta)
    return ForgettingEstimate(n_values=n_values, beta_hat=beta, stderr=stderr, fitted_rate=fitted)


def fit_log_linear(n_values: Sequence[int], beta: np.ndarray) -> tuple[float, float] | None:
    """Least-squares fit beta ~ C * r^n; None when any value is non-positive."""
    beta = np.asarray(beta, dtype=float)
    if np.any(beta <= 0.0) or len(beta) < 2:
        return None
    slope, intercept = np.polyfit(np.asarray(n_values, dtype=float), np.log(beta), 1)
    return float(np.exp(intercept)), float(np.exp(slope))


def group_rate_bound(lam: float, L: int, d: int, q: float, n: int) -> float:
    """Closed-form forgetting bound 2*lam^floor(n/L) + 2*d*q^n for walk-type models."""
    if not (0.0 < lam < 1.0):
        raise ValueError("group rate bound requires lambda in (0, 1)")
    if not (0.0 < q < 1.0):
        raise ValueError("group rate bound requires q in (0, 1)")
    if L < 1 or d < 1:
        raise ValueError("group rate bound requires L >= 1 and d >= 1")
    if n < 1:
        raise ValueError("group rate bound requires n >= 1")
    return 2.0 * lam ** (n // L) + 2.0 * d * q**n


def label_transition_matrix(inst: KrausInstrument) -> np.ndarray:
    """Column-stochastic one-step label matrix of a basis-preserving instrument.

    Entry (k, i) is the probability of landing on basis label k after one
    measurement from basis label i.  Raises when the instrument does not have
    the basis-preserving structure.
    """
    maps, reason = extract_label_map(inst)
    if maps is None:
        raise ValueError(f"instrument is not basis-preserving: {reason}")
    d = inst.dim
    w = basis_outcome_weights(inst)
    t = np.zeros((d, d))
    for a, f_a in enumerate(maps):
        for i in range(d):
            t[f_a[i], i] += w[a, i]
    return t


def basis_outcome_weights(inst: KrausInstrument) -> np.ndarray:
    """w[a, i] = tr T_a(rho_i) for the basis states rho_i."""
    stack = inst.stacked()  # (A, r, d, d)
    return np.einsum("ajki,ajki->ai", stack, stack.conj()).real


def contraction_decay(
    env: DisorderProcess,
    origin: int,
    n_values: Sequence[int],
    n_samples: int = 100,
    seed: int = 0,
) -> list[tuple[int, float]]:
    """Sampled lower bounds on the contraction coefficient of the n-step channel.

    The true coefficient decay constants are non-constructive; this reports
    sampled estimates (lower bounds) along the given horizons.
    """
    n_values = sorted(int(n) for n in n_values)
    out = []
    m = None
    pos = 1
    for n in range(1, n_values[-1] + 1):
        step = compose_channels([env.instrument_at(origin + n)])
        m = step if m is None else step @ m
        if n in n_values:
            rng = substream(seed, 0xC0, n)
            out.append((n, contraction_coefficient_lower_bound(m, n_samples, rng)))
        pos += 1
    return out


def beta_report_rows(estimate: ForgettingEstimate, bound: Callable[[int], float] | None):
    """CSV-ready rows (n, beta_hat, stderr, bound)."""
    rows = []
    for i, n in enumerate(estimate.n_values):
        b = bound(n) if bound is not None else float("nan")
        rows.append((n, float(estimate.beta_hat[i]), float(estimate.stderr[i]), b))
    return rows
