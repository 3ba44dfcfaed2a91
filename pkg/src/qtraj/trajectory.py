"""Quenched and annealed sampling of measurement records, plus exact oracles.

The sampler draws outcome k with the Born probabilities of the current
posterior under the instrument at index origin+k, then applies the normalized
selective update.  Trajectories are vectorized across a batch; each trajectory
owns the random stream addressed by (seed, trajectory_id), so results are
reproducible and independent of chunking or execution order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .environment import DisorderProcess
from .instrument import posterior
from .rng import TAG_ENV_DRAW, TAG_TRAJECTORY, derive_seed, substream

ENUMERATION_CAP = 1_000_000
_PRUNE_TOL = 1e-15
_BORN_TOL = 1e-9


class EnumerationCapError(RuntimeError):
    """Word space too large for exhaustive enumeration; use Monte Carlo sampling."""


class DegenerateBornError(RuntimeError):
    """All outcome mass vanished after clamping; the model or state is inconsistent."""


@dataclass
class TrajectorySample:
    """One sampled measurement record, with optional posterior states."""

    outcomes: np.ndarray
    posteriors: list[np.ndarray] | None
    env_seed: int
    rng_seed: int
    quenched: bool


def _simulate_chunk(
    env: DisorderProcess,
    origin: int,
    rho0: np.ndarray,
    n_steps: int,
    seed: int,
    traj_lo: int,
    traj_hi: int,
) -> np.ndarray:
    n_traj = traj_hi - traj_lo
    d = rho0.shape[0]
    rho = np.repeat(rho0[None, :, :].astype(complex), n_traj, axis=0)
    uniforms = np.empty((n_traj, n_steps))
    for i, t in enumerate(range(traj_lo, traj_hi)):
        uniforms[i] = substream(seed, TAG_TRAJECTORY, t).random(n_steps)
    records = np.empty((n_traj, n_steps), dtype=np.int16)
    for k in range(1, n_steps + 1):
        inst = env.instrument_at(origin + k)
        w = inst.stacked()
        probs = np.einsum("ajik,tkl,ajil->ta", w, rho, w.conj()).real
        np.clip(probs, 0.0, None, out=probs)
        cum = np.cumsum(probs, axis=1)
        total = cum[:, -1]
        if np.any(total < _BORN_TOL):
            t_bad = traj_lo + int(np.argmin(total))
            raise DegenerateBornError(
                f"outcome mass {total.min():.3e} at step {k}, trajectory {t_bad}"
            )
        u = uniforms[:, k - 1] * total
        choice = np.minimum((cum <= u[:, None]).sum(axis=1), inst.n_outcomes - 1)
        records[:, k - 1] = choice
        w_sel = w[choice]
        rho = np.einsum("tjik,tkl,tjml->tim", w_sel, rho, w_sel.conj())
        traces = np.einsum("tii->t", rho).real
        rho /= traces[:, None, None]
        rho = 0.5 * (rho + np.conj(np.swapaxes(rho, 1, 2)))
    return records


def sample_records(
    env: DisorderProcess,
    origin: int,
    rho0: np.ndarray,
    n_steps: int,
    n_traj: int,
    seed: int,
    workers: int = 1,
) -> np.ndarray:
    """Batch of quenched records, shape (n_traj, n_steps), dtype int16 outcome indices.

    The result is identical for any worker count: chunk c simulates trajectory
    ids [lo, hi) and each trajectory's randomness depends only on (seed, id).
    """
    if n_steps < 1 or n_traj < 1:
        raise ValueError("n_steps and n_traj must be >= 1")
    workers = max(1, int(workers))
    if workers == 1 or n_traj < 2 * workers:
        return _simulate_chunk(env, origin, rho0, n_steps, seed, 0, n_traj)
    bounds = np.linspace(0, n_traj, workers + 1, dtype=int)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(
            pool.map(
                lambda ab: _simulate_chunk(env, origin, rho0, n_steps, seed, int(ab[0]), int(ab[1])),
                zip(bounds[:-1], bounds[1:]),
            )
        )
    return np.concatenate(parts, axis=0)


def _reconstruct_posteriors(
    env: DisorderProcess, origin: int, rho0: np.ndarray, outcomes: np.ndarray
) -> list[np.ndarray]:
    states = []
    rho = rho0
    for k, a in enumerate(outcomes, start=1):
        rho = posterior(env.instrument_at(origin + k), int(a), rho)
        states.append(rho)
    return states


def sample_quenched(
    env: DisorderProcess,
    origin: int,
    rho0: np.ndarray,
    steps: int,
    seed: int,
    traj_id: int = 0,
    keep_posteriors: bool = False,
) -> TrajectorySample:
    """One quenched record for the fixed disorder realization carried by env."""
    rec = _simulate_chunk(env, origin, rho0, steps, seed, traj_id, traj_id + 1)[0]
    post = _reconstruct_posteriors(env, origin, rho0, rec) if keep_posteriors else None
    return TrajectorySample(outcomes=rec, posteriors=post, env_seed=env.seed, rng_seed=seed, quenched=True)


def sample_annealed(
    env: DisorderProcess,
    rho0_map,
    steps: int,
    seed: int,
    traj_id: int = 0,
    keep_posteriors: bool = False,
) -> TrajectorySample:
    """One annealed record: draw a fresh disorder realization, then sample quenched.

    rho0_map maps the drawn environment to the initial state, covering both
    constant and disorder-dependent initial states.
    """
    drawn = env.reseeded(derive_seed(seed, TAG_ENV_DRAW, traj_id))
    rho0 = rho0_map(drawn)
    sample = sample_quenched(drawn, 0, rho0, steps, seed, traj_id=traj_id, keep_posteriors=keep_posteriors)
    sample.quenched = False
    return sample


def sample_records_annealed(
    env: DisorderProcess, rho0_map, n_steps: int, n_traj: int, seed: int
) -> np.ndarray:
    """Batch of annealed records (fresh disorder draw per trajectory)."""
    recs = np.empty((n_traj, n_steps), dtype=np.int16)
    for t in range(n_traj):
        recs[t] = sample_annealed(env, rho0_map, n_steps, seed, traj_id=t).outcomes
    return recs


# ---------------------------------------------------------------------------
# Pattern counting
# ---------------------------------------------------------------------------


def parse_pattern(labels: tuple[str, ...], text: str) -> tuple[int, ...]:
    """Pattern from text: comma-separated outcome labels, or greedy tokenization."""
    if "," in text:
        parts = [p.strip() for p in text.split(",") if p.strip()]
        return tuple(labels.index(p) for p in parts)
    if text in labels:
        return (labels.index(text),)
    # greedy longest-prefix tokenization, for prefix-free label sets like K/S
    out = []
    rest = text
    while rest:
        for cand in sorted(labels, key=len, reverse=True):
            if rest.startswith(cand):
                out.append(labels.index(cand))
                rest = rest[len(cand) :]
                break
        else:
            raise ValueError(f"cannot parse pattern {text!r} over alphabet {labels}")
    return tuple(out)


def pattern_count(outcomes, pattern, n: int) -> int:
    """Number of sliding-window occurrences of the pattern starting at indices 1..n."""
    outcomes = np.asarray(outcomes)
    pattern = np.asarray(pattern)
    m = len(pattern)
    if m == 0:
        raise ValueError("pattern must be nonempty")
    if len(outcomes) < n + m - 1:
        raise ValueError(f"need {n + m - 1} outcomes for n={n}, m={m}; got {len(outcomes)}")
    hits = np.ones(n, dtype=bool)
    for j in range(m):
        hits &= outcomes[j : j + n] == pattern[j]
    return int(hits.sum())


def pattern_indicators(records: np.ndarray, pattern) -> np.ndarray:
    """Window-start indicator array, shape (n_traj, n_steps - m + 1)."""
    records = np.atleast_2d(records)
    pattern = np.asarray(pattern)
    m = len(pattern)
    n = records.shape[1] - m + 1
    if n < 1:
        raise ValueError("records shorter than the pattern")
    hits = np.ones((records.shape[0], n), dtype=bool)
    for j in range(m):
        hits &= records[:, j : j + n] == pattern[j]
    return hits


# ---------------------------------------------------------------------------
# Exact small-horizon oracles
# ---------------------------------------------------------------------------


def exact_cylinder_distribution(
    env: DisorderProcess,
    origin: int,
    rho0: np.ndarray,
    n: int,
    cap: int = ENUMERATION_CAP,
) -> dict[tuple[int, ...], float]:
    """Exhaustive law of length-n outcome words via sequential selective maps.

    Words of probability below the pruning floor (1e-15) are omitted.  Raises
    EnumerationCapError when the word space exceeds the cap.
    """
    n_outcomes = env.instrument_at(origin + 1).n_outcomes
    if n_outcomes**n > cap:
        raise EnumerationCapError(
            f"{n_outcomes}^{n} words exceed the cap {cap}; use Monte Carlo sampling"
        )
    instruments = [env.instrument_at(origin + k) for k in range(1, n + 1)]
    out: dict[tuple[int, ...], float] = {}
    stack: list[tuple[int, tuple[int, ...], np.ndarray]] = [(0, (), rho0.astype(complex))]
    while stack:
        depth, word, sigma = stack.pop()
        if depth == n:
            out[word] = float(np.trace(sigma).real)
            continue
        inst = instruments[depth]
        w = inst.stacked()
        children = np.einsum("ajik,kl,ajml->aim", w, sigma, w.conj())
        masses = np.einsum("aii->a", children).real
        for a in range(inst.n_outcomes):
            if masses[a] > _PRUNE_TOL:
                stack.append((depth + 1, word + (a,), children[a]))
    total = sum(out.values())
    if abs(total - 1.0) > _BORN_TOL:
        raise RuntimeError(f"enumerated word masses sum to {total!r}")
    return out


def exact_pattern_mean(
    env: DisorderProcess, origin: int, rho0: np.ndarray, pattern, cap: int = ENUMERATION_CAP
) -> float:
    """Exact one-window occurrence probability of the pattern (cylinder mass)."""
    pattern = tuple(int(a) for a in pattern)
    dist = exact_cylinder_distribution(env, origin, rho0, len(pattern), cap=cap)
    return dist.get(pattern, 0.0)


def exact_pattern_moments(
    env: DisorderProcess,
    origin: int,
    rho0: np.ndarray,
    n: int,
    pattern,
    cap: int = ENUMERATION_CAP,
) -> tuple[float, float]:
    """Exact mean and variance of the pattern count with window starts 1..n."""
    pattern = tuple(int(a) for a in pattern)
    m = len(pattern)
    dist = exact_cylinder_distribution(env, origin, rho0, n + m - 1, cap=cap)
    mean = 0.0
    second = 0.0
    for word, p in dist.items():
        c = pattern_count(np.array(word), pattern, n)
        mean += p * c
        second += p * c * c
    return mean, second - mean * mean


def dump_records(path, records: np.ndarray) -> None:
    """Text dump, one record per line, outcome symbols as alphabet indices."""
    records = np.atleast_2d(records)
    with open(path, "w") as fh:
        for row in records:
            fh.write(" ".join(str(int(a)) for a in row) + "\n")
