"""Basis-preserving structure checks, block couplings, and coalescence runs.

For instruments whose Kraus operators map basis rays to basis rays, the
outcome law from any initial state is a mixture of the laws from basis states,
and two such label evolutions can be merged blockwise: couple the terminal
labels of an L-step block maximally, draw the two outcome words conditionally
on their terminal labels, and repeat.  Once the hidden labels meet, both
records coincide forever, which bounds the pattern-count discrepancy between
any two initial states by the coalescence time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .environment import DisorderProcess
from .instrument import KrausInstrument, extract_label_map
from .linalg import basis_state
from .rng import TAG_COUPLING, derive_seed, substream
from .trajectory import exact_cylinder_distribution, pattern_indicators

MARGINAL_TOL = 1e-10


@dataclass(frozen=True)
class LabelMap:
    """Per-outcome total maps on basis labels; words compose left to right."""

    maps: tuple[tuple[int, ...], ...]

    def apply(self, outcome: int, label: int) -> int:
        return self.maps[outcome][label]

    def word(self, word: Sequence[int], label: int) -> int:
        for a in word:
            label = self.maps[a][label]
        return label

    @property
    def dim(self) -> int:
        return len(self.maps[0])


@dataclass(frozen=True)
class A1Report:
    passed: bool
    label_map: LabelMap | None
    reason: str | None


def check_A1(inst: KrausInstrument, tol: float = 1e-10) -> A1Report:
    """Check the basis-preserving structure of a perfect instrument.

    Every Kraus operator must send each basis vector to a scalar multiple of a
    single basis vector, with images of distinct basis vectors orthogonal.
    Imperfect instruments are unsupported by design.
    """
    maps, reason = extract_label_map(inst, tol=tol)
    if maps is None:
        return A1Report(passed=False, label_map=None, reason=reason)
    return A1Report(passed=True, label_map=LabelMap(maps=maps), reason=None)


def check_A1_env(
    env: DisorderProcess, n_samples: int = 50, indices: Sequence[int] = (1,), seed: int = 0
) -> A1Report:
    """check_A1 across sampled disorder realizations; label maps must not depend on omega."""
    reference: LabelMap | None = None
    n_samples = 1 if env.kind == "deterministic" else n_samples
    for s in range(n_samples):
        drawn = env if env.kind == "deterministic" else env.reseeded(derive_seed(seed, 0xA1, s))
        for idx in indices:
            rep = check_A1(drawn.instrument_at(idx))
            if not rep.passed:
                return rep
            if reference is None:
                reference = rep.label_map
            elif rep.label_map.maps != reference.maps:
                return A1Report(False, None, "label maps differ across disorder realizations")
    return A1Report(True, reference, None)


def block_law(
    env: DisorderProcess, origin: int, label: int, L: int, cap: int = 1_000_000
) -> dict[tuple[int, ...], float]:
    """Quenched law of the L-step outcome block started from a basis label."""
    d = env.instrument_at(origin + 1).dim
    return exact_cylinder_distribution(env, origin, basis_state(d, label), L, cap=cap)


def terminal_label_law(
    env: DisorderProcess,
    origin: int,
    label: int,
    L: int,
    label_map: LabelMap,
    cap: int = 1_000_000,
) -> np.ndarray:
    """Push the L-block law from a basis label forward through the word's label map."""
    law = np.zeros(label_map.dim)
    for word, p in block_law(env, origin, label, L, cap=cap).items():
        law[label_map.word(word, label)] += p
    return law


def overlap_criterion(
    env: DisorderProcess,
    env_samples: int,
    L: int,
    label_map: LabelMap | None = None,
    origin: int = 0,
    seed: int = 0,
) -> float:
    """Minimal terminal-label overlap over sampled disorder draws and label pairs.

    Returns the empirical merge bound: min over samples and pairs (i, j) of
    sum_k min(law_i(k), law_j(k)).  For a deterministic environment a single
    evaluation is exact.
    """
    if label_map is None:
        rep = check_A1_env(env, seed=seed)
        if not rep.passed:
            raise ValueError(f"basis-preserving check failed: {rep.reason}")
        label_map = rep.label_map
    d = label_map.dim
    n_samples = 1 if env.kind == "deterministic" else env_samples
    worst = 1.0
    for s in range(n_samples):
        drawn = env if env.kind == "deterministic" else env.reseeded(derive_seed(seed, 0xA2, s))
        laws = [terminal_label_law(drawn, origin, i, L, label_map) for i in range(d)]
        for i in range(d):
            for j in range(i + 1, d):
                worst = min(worst, float(np.minimum(laws[i], laws[j]).sum()))
    return worst


def maximal_label_coupling(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Joint law on label pairs with marginals p, q and maximal diagonal mass.

    Diagonal entries are min(p_k, q_k); the residual mass is the product of
    the normalized residual vectors.  When the residual vanishes all mass is
    diagonal.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError("probability vectors must be 1-D of equal length")
    for v in (p, q):
        if np.any(v < -1e-12) or abs(v.sum() - 1.0) > 1e-9:
            raise ValueError("inputs must be probability vectors")
    r = np.minimum(p, q)
    alpha = float(r.sum())
    lam = np.diag(r)
    residual = 1.0 - alpha
    if residual > 1e-15:
        lam += np.outer(p - r, q - r) / residual
    return lam


@dataclass
class BlockCoupling:
    """Joint law on pairs of L-step words with the two quenched block laws as marginals."""

    words_a: list[tuple[int, ...]]
    words_b: list[tuple[int, ...]]
    joint: np.ndarray  # indexed by (word_a, word_b) positions
    merge_mass: float
    law_a: dict[tuple[int, ...], float]
    law_b: dict[tuple[int, ...], float]

    def sample(self, rng: np.random.Generator) -> tuple[tuple[int, ...], tuple[int, ...]]:
        flat = self.joint.reshape(-1)
        idx = int(np.searchsorted(np.cumsum(flat), rng.random() * flat.sum(), side="right"))
        idx = min(idx, flat.size - 1)
        ia, ib = divmod(idx, self.joint.shape[1])
        return self.words_a[ia], self.words_b[ib]


def build_block_coupling(
    env: DisorderProcess,
    origin: int,
    i: int,
    j: int,
    L: int,
    label_map: LabelMap,
    cap: int = 1_000_000,
) -> BlockCoupling:
    """Couple the L-block laws from basis labels i and j through their terminal labels.

    Terminal labels are coupled maximally; each word is then drawn from its
    block law conditioned on the terminal label (zero-mass labels fall back to
    the lexicographically first word).  Equal labels get the diagonal
    self-coupling.  Marginals reproduce the quenched block laws exactly.
    """
    law_i = block_law(env, origin, i, L, cap=cap)
    if i == j:
        words = sorted(law_i)
        n = len(words)
        joint = np.zeros((n, n))
        for k, w in enumerate(words):
            joint[k, k] = law_i[w]
        return BlockCoupling(words, list(words), joint, merge_mass=1.0, law_a=law_i, law_b=dict(law_i))
    law_j = block_law(env, origin, j, L, cap=cap)
    d = label_map.dim
    bar_i = np.zeros(d)
    for w, p in law_i.items():
        bar_i[label_map.word(w, i)] += p
    bar_j = np.zeros(d)
    for w, p in law_j.items():
        bar_j[label_map.word(w, j)] += p
    lam = maximal_label_coupling(bar_i, bar_j)

    ref_word = tuple([0] * L)
    words_a = sorted(set(law_i) | {ref_word})
    words_b = sorted(set(law_j) | {ref_word})
    pos_a = {w: k for k, w in enumerate(words_a)}
    pos_b = {w: k for k, w in enumerate(words_b)}

    gamma = np.zeros((d, len(words_a)))
    for w, p in law_i.items():
        gamma[label_map.word(w, i), pos_a[w]] += p
    delta = np.zeros((d, len(words_b)))
    for w, p in law_j.items():
        delta[label_map.word(w, j), pos_b[w]] += p
    for k in range(d):
        if bar_i[k] > 0:
            gamma[k] /= bar_i[k]
        else:
            gamma[k, pos_a[ref_word]] = 1.0
        if bar_j[k] > 0:
            delta[k] /= bar_j[k]
        else:
            delta[k, pos_b[ref_word]] = 1.0

    joint = gamma.T @ lam @ delta
    merge = 0.0
    for ia, wa in enumerate(words_a):
        ka = label_map.word(wa, i)
        for ib, wb in enumerate(words_b):
            if joint[ia, ib] > 0 and ka == label_map.word(wb, j):
                merge += joint[ia, ib]
    return BlockCoupling(words_a, words_b, joint, merge_mass=float(merge), law_a=law_i, law_b=law_j)


def coupling_marginal_error(coupling: BlockCoupling) -> float:
    """Max deviation of the coupling's marginals from the two block laws."""
    marg_a = coupling.joint.sum(axis=1)
    marg_b = coupling.joint.sum(axis=0)
    err = 0.0
    for k, w in enumerate(coupling.words_a):
        err = max(err, abs(marg_a[k] - coupling.law_a.get(w, 0.0)))
    for k, w in enumerate(coupling.words_b):
        err = max(err, abs(marg_b[k] - coupling.law_b.get(w, 0.0)))
    return err


@dataclass
class CoalescenceStats:
    """Block and outcome coalescence samples from coupled runs."""

    r_star: np.ndarray  # block index at which the hidden labels met
    t_out: np.ndarray  # first index from which the two records agree forever
    merged: np.ndarray  # False where the run was censored at the block cap
    L: int
    epsilon: float  # declared merge bound used for the consistency flag
    records: list[tuple[np.ndarray, np.ndarray]] | None
    inconsistent: bool

    @property
    def mean_t_out(self) -> float:
        return float(np.mean(self.t_out[self.merged]))

    @property
    def stderr_t_out(self) -> float:
        vals = self.t_out[self.merged]
        return float(np.std(vals, ddof=1) / np.sqrt(len(vals)))

    def tail(self, r: int) -> float:
        """Empirical probability that the labels had not met after r blocks."""
        return float(np.mean(self.r_star > r))


def simulate_coalescence(
    env: DisorderProcess,
    theta_map: Callable[[DisorderProcess], np.ndarray],
    eta_map: Callable[[DisorderProcess], np.ndarray],
    L: int,
    n_blocks: int,
    n_runs: int,
    seed: int = 0,
    label_map: LabelMap | None = None,
    epsilon: float | None = None,
    keep_records: bool = False,
    tail_blocks: int = 2,
    origin: int = 0,
) -> CoalescenceStats:
    """Run the two-sided block coupling and record coalescence statistics.

    Each run draws a fresh disorder realization, decomposes the two initial
    states into basis labels through their diagonal weights (coupled
    maximally), then alternates L-step blocks: distinct labels use the block
    coupling, equal labels the diagonal self-coupling, so records provably
    agree after the labels meet.  tail_blocks extra shared blocks are emitted
    past coalescence so that sliding windows covering the disagreement region
    are complete.
    """
    if label_map is None:
        rep = check_A1_env(env, seed=seed)
        if not rep.passed:
            raise ValueError(f"basis-preserving check failed: {rep.reason}")
        label_map = rep.label_map
    r_star = np.zeros(n_runs, dtype=np.int64)
    t_out = np.zeros(n_runs, dtype=np.int64)
    merged = np.zeros(n_runs, dtype=bool)
    records: list[tuple[np.ndarray, np.ndarray]] | None = [] if keep_records else None
    cache: dict[tuple, BlockCoupling] = {}
    deterministic = env.kind == "deterministic"

    for run in range(n_runs):
        drawn = env if deterministic else env.reseeded(derive_seed(seed, TAG_COUPLING, run))
        rng = substream(seed, TAG_COUPLING, run, 1)
        weights_a = np.clip(np.diag(theta_map(drawn)).real, 0.0, None)
        weights_b = np.clip(np.diag(eta_map(drawn)).real, 0.0, None)
        lam = maximal_label_coupling(weights_a / weights_a.sum(), weights_b / weights_b.sum())
        flat = lam.reshape(-1)
        idx = min(int(np.searchsorted(np.cumsum(flat), rng.random() * flat.sum())), flat.size - 1)
        x, y = divmod(idx, lam.shape[1])

        rec_a: list[int] = []
        rec_b: list[int] = []
        met_at = 0 if x == y else None
        block = 0
        while block < n_blocks + tail_blocks:
            block += 1
            base = origin + (block - 1) * L
            if x == y:
                key = ("diag", base if not deterministic else 0, x)
                coup = cache.get(key)
                if coup is None:
                    coup = build_block_coupling(drawn, base, x, x, L, label_map)
                    if deterministic:
                        cache[key] = coup
                wa, wb = coup.sample(rng)
            else:
                key = ("pair", base if not deterministic else 0, x, y)
                coup = cache.get(key) if deterministic else None
                if coup is None:
                    coup = build_block_coupling(drawn, base, x, y, L, label_map)
                    if deterministic:
                        cache[key] = coup
                wa, wb = coup.sample(rng)
            rec_a.extend(wa)
            rec_b.extend(wb)
            x = label_map.word(wa, x)
            y = label_map.word(wb, y)
            if met_at is None and x == y:
                met_at = block
            if met_at is not None and block >= met_at + tail_blocks:
                break
        a = np.array(rec_a, dtype=np.int16)
        b = np.array(rec_b, dtype=np.int16)
        if met_at is not None:
            merged[run] = True
            r_star[run] = met_at
            diff = np.flatnonzero(a != b)
            t_out[run] = int(diff[-1]) + 2 if diff.size else 1
        else:
            r_star[run] = n_blocks + 1
            t_out[run] = len(a) + 1
        if keep_records:
            records.append((a, b))

    inconsistent = False
    if epsilon is not None and epsilon < 1.0:
        bound = (1.0 - epsilon) ** n_blocks
        allowance = bound * n_runs + 4.0 * np.sqrt(max(bound * (1.0 - bound) * n_runs, 1.0))
        inconsistent = float(np.sum(~merged)) > allowance
    elif epsilon is not None:
        inconsistent = bool(np.any(~merged))
    return CoalescenceStats(
        r_star=r_star,
        t_out=t_out,
        merged=merged,
        L=L,
        epsilon=float(epsilon) if epsilon is not None else float("nan"),
        records=records,
        inconsistent=inconsistent,
    )


def admissibility_discrepancy(
    stats: CoalescenceStats, pattern: Sequence[int], n_grid: Sequence[int]
) -> np.ndarray:
    """Empirical discrepancy (1/sqrt(n)) E|sum_{k<=n} (dN_k(B) - dN_k(A))| on the grid.

    Window differences vanish from the outcome coalescence index onward, so
    the stored finite records determine every partial sum exactly provided the
    run kept records (simulate_coalescence(keep_records=True)).
    """
    if stats.records is None:
        raise ValueError("coalescence run did not keep records")
    pattern = tuple(int(a) for a in pattern)
    m = len(pattern)
    n_grid = [int(n) for n in n_grid]
    totals = np.zeros((len(stats.records), len(n_grid)))
    for r, (a, b) in enumerate(stats.records):
        n_windows = len(a) - m + 1
        if n_windows < 1:
            continue
        da = pattern_indicators(a[None, :], pattern)[0].astype(np.int64)
        db = pattern_indicators(b[None, :], pattern)[0].astype(np.int64)
        cum = np.cumsum(db - da)
        for c, n in enumerate(n_grid):
            totals[r, c] = cum[min(n, n_windows) - 1]
    return np.abs(totals).mean(axis=0) / np.sqrt(np.asarray(n_grid, dtype=float))


def mixture_decomposition_error(
    env: DisorderProcess, origin: int, rho: np.ndarray, n: int, cap: int = 1_000_000
) -> float:
    """Max word-probability gap between the law from rho and the label mixture.

    For basis-preserving instruments the law of any length-n word from rho
    equals sum_i <e_i|rho|e_i> times the law from basis label i.
    """
    d = rho.shape[0]
    full = exact_cylinder_distribution(env, origin, rho, n, cap=cap)
    weights = np.diag(rho).real
    mixed: dict[tuple[int, ...], float] = {}
    for i in range(d):
        if weights[i] <= 0:
            continue
        for w, p in block_law(env, origin, i, n, cap=cap).items():
            mixed[w] = mixed.get(w, 0.0) + weights[i] * p
    err = 0.0
    for w in set(full) | set(mixed):
        err = max(err, abs(full.get(w, 0.0) - mixed.get(w, 0.0)))
    return err
