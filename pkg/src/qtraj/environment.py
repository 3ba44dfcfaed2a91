"""Invertible stationary disorder processes supplying the instrument at each step.

A DisorderProcess maps every integer index to an instrument, deterministically
in its seed.  Three kinds are supported: a constant instrument, independent
parameter draws per index, and a two-sided stationary finite-state Markov
chain whose symbol selects the parameters.  Index translation (the shift) is
exact re-basing: the underlying realization is shared, so shifting commutes
with evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .instrument import KrausInstrument
from .rng import TAG_IID, TAG_MARKOV_FWD, TAG_MARKOV_INIT, substream

TOL_ROW_STOCHASTIC = 1e-12
TOL_STATIONARY_VEC = 1e-10


class MarkovSpecError(ValueError):
    pass


@dataclass(frozen=True)
class MixingProfile:
    """Upper bound on the strong mixing coefficient of the instrument process."""

    alpha_bound: Callable[[int], float]
    rate_constants: tuple[float, float] | None  # (C, r) with bound <= C * r^n

    def __call__(self, n: int) -> float:
        return self.alpha_bound(n)


def _sample_categorical(rng: np.random.Generator, probs: np.ndarray) -> int:
    return int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))


class _MarkovRealization:
    """Lazily materialized two-sided stationary path of a finite Markov chain.

    The state at index 0 is drawn from the stationary law; forward transitions
    use the chain kernel, backward transitions use the time-reversed kernel
    P_hat(y, x) = pi(x) P(x, y) / pi(y), so the two-sided path is exactly
    stationary.  Every draw is addressed by (seed, index), hence reproducible.
    """

    def __init__(self, seed: int, transition: np.ndarray, stationary: np.ndarray):
        self.seed = seed
        self.transition = transition
        self.stationary = stationary
        rev = (stationary[:, None] * transition).T / stationary[:, None]
        self.reversed_kernel = rev / rev.sum(axis=1, keepdims=True)
        self._states: dict[int, int] = {}
        self._lo = 0
        self._hi = 0
        self._states[0] = _sample_categorical(substream(seed, TAG_MARKOV_INIT), stationary)

    def state(self, n: int) -> int:
        if n in self._states:
            return self._states[n]
        while self._hi < n:
            prev = self._states[self._hi]
            self._hi += 1
            rng = substream(self.seed, TAG_MARKOV_FWD, self._hi)
            self._states[self._hi] = _sample_categorical(rng, self.transition[prev])
        while self._lo > n:
            nxt = self._states[self._lo]
            self._lo -= 1
            rng = substream(self.seed, TAG_MARKOV_FWD, self._lo)
            self._states[self._lo] = _sample_categorical(rng, self.reversed_kernel[nxt])
        return self._states[n]


class DisorderProcess:
    """Instrument-valued stationary process indexed by the integers.

    Parameters
    ----------
    kind : 'deterministic' | 'iid' | 'finite-markov'
    seed : base seed; the full realization is a pure function of it.
    builder : maps a parameter dict to a KrausInstrument.
    base_params : parameters shared by every index.
    draw : for 'iid', callable (rng) -> dict of per-index parameter draws.
    transition, stationary, symbol_params : for 'finite-markov', a row-stochastic
        matrix, its stationary vector (computed when omitted), and one parameter
        dict per symbol.
    """

    def __init__(
        self,
        kind: str,
        seed: int,
        builder: Callable[[Mapping], KrausInstrument],
        base_params: Mapping | None = None,
        draw: Callable[[np.random.Generator], Mapping] | None = None,
        transition: np.ndarray | None = None,
        stationary: np.ndarray | None = None,
        symbol_params: Sequence[Mapping] | None = None,
        offset: int = 0,
        _shared_chain: _MarkovRealization | None = None,
    ):
        if kind not in ("deterministic", "iid", "finite-markov"):
            raise ValueError(f"unknown environment kind {kind!r}")
        self.kind = kind
        self.seed = int(seed)
        self.builder = builder
        self.base_params = dict(base_params or {})
        self.draw = draw
        self.offset = int(offset)
        self._cache: dict[int, KrausInstrument] = {}
        self.transition = None
        self.stationary = None
        self.symbol_params = None
        self._chain = None
        if kind == "iid" and draw is None:
            raise ValueError("iid environment requires a draw function")
        if kind == "finite-markov":
            if transition is None or symbol_params is None:
                raise MarkovSpecError("finite-markov environment requires transition and symbol_params")
            p = np.asarray(transition, dtype=float)
            if stationary is None:
                stationary = stationary_distribution(p)
            pi = np.asarray(stationary, dtype=float)
            validate_markov_chain(p, pi)
            if len(symbol_params) != p.shape[0]:
                raise MarkovSpecError("one parameter dict per Markov symbol is required")
            self.transition = p
            self.stationary = pi
            self.symbol_params = [dict(s) for s in symbol_params]
            self._chain = _shared_chain or _MarkovRealization(self.seed, p, pi)

    def params_at(self, n: int) -> dict:
        """Model parameters in force at (absolute) index n."""
        idx = n + self.offset
        params = dict(self.base_params)
        if self.kind == "iid":
            params.update(self.draw(substream(self.seed, TAG_IID, idx)))
        elif self.kind == "finite-markov":
            params.update(self.symbol_params[self._chain.state(idx)])
        return params

    def instrument_at(self, n: int) -> KrausInstrument:
        idx = 0 if self.kind == "deterministic" else n + self.offset
        inst = self._cache.get(idx)
        if inst is None:
            inst = self.builder(self.params_at(n))
            if len(self._cache) < 100_000:
                self._cache[idx] = inst
        return inst

    def shifted(self, m: int) -> "DisorderProcess":
        """Re-base the index origin: shifted(m).instrument_at(n) == instrument_at(n + m)."""
        return DisorderProcess(
            kind=self.kind,
            seed=self.seed,
            builder=self.builder,
            base_params=self.base_params,
            draw=self.draw,
            transition=self.transition,
            stationary=self.stationary,
            symbol_params=self.symbol_params,
            offset=self.offset + m,
            _shared_chain=self._chain,
        )

    def reseeded(self, seed: int) -> "DisorderProcess":
        """Fresh realization of the same law (a new draw of the disorder)."""
        return DisorderProcess(
            kind=self.kind,
            seed=seed,
            builder=self.builder,
            base_params=self.base_params,
            draw=self.draw,
            transition=self.transition,
            stationary=self.stationary,
            symbol_params=self.symbol_params,
            offset=0,
        )

    def mixing_profile(self) -> MixingProfile:
        """Strong-mixing bound for the instrument process.

        Deterministic and iid environments mix instantly (bound 0 for n >= 1).
        For a finite Markov driver the instrument-process coefficients are
        bounded by those of the driving chain, and alpha(n) <= beta(n), the
        chain's beta-mixing coefficient.
        """
        if self.kind in ("deterministic", "iid"):
            return MixingProfile(alpha_bound=lambda n: 0.0, rate_constants=(0.0, 0.0))
        p, pi = self.transition, self.stationary
        rate = dobrushin_row(p)

        def bound(n: int) -> float:
            return min(0.25, markov_beta_mixing_bound(p, pi, n))

        return MixingProfile(alpha_bound=bound, rate_constants=(1.0, rate))


def instrument_at(env: DisorderProcess, n: int) -> KrausInstrument:
    return env.instrument_at(n)


# ---------------------------------------------------------------------------
# Finite Markov chain utilities
# ---------------------------------------------------------------------------


def stationary_distribution(p: np.ndarray) -> np.ndarray:
    """Stationary row vector of a row-stochastic matrix via the unit eigenvector."""
    w, vr = np.linalg.eig(p.T)
    k = int(np.argmin(np.abs(w - 1.0)))
    pi = np.real(vr[:, k])
    pi = np.abs(pi)
    return pi / pi.sum()


def _is_primitive(p: np.ndarray) -> bool:
    """Wielandt test: an n-state chain is irreducible and aperiodic iff some
    power at most n^2 - 2n + 2 of its support pattern is everywhere positive."""
    n = p.shape[0]
    support = (p > 0).astype(np.int8)
    acc = support.copy()
    bound = n * n - 2 * n + 2
    for _ in range(max(bound, 1)):
        if np.all(acc > 0):
            return True
        acc = np.minimum(acc @ support, 1)
    return bool(np.all(acc > 0))


def validate_markov_chain(p: np.ndarray, pi: np.ndarray) -> None:
    p = np.asarray(p, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise MarkovSpecError("transition matrix must be square")
    if np.any(p < -TOL_ROW_STOCHASTIC):
        raise MarkovSpecError("negative transition probabilities")
    if np.max(np.abs(p.sum(axis=1) - 1.0)) > TOL_ROW_STOCHASTIC:
        raise MarkovSpecError("rows must sum to 1")
    if np.max(np.abs(pi @ p - pi)) > TOL_STATIONARY_VEC:
        raise MarkovSpecError("stationary vector does not satisfy pi P = pi")
    if not _is_primitive(p):
        raise MarkovSpecError("chain must be irreducible and aperiodic")


def markov_beta_mixing_bound(p: np.ndarray, pi: np.ndarray, n: int) -> float:
    """beta-mixing coefficient of the stationary chain at gap n.

    beta(n) = sum_x pi(x) * TV(P^n(x, .), pi).  The alpha coefficient of the
    chain (and of any instrument process it drives) is bounded by this value.
    """
    p = np.asarray(p, dtype=float)
    pi = np.asarray(pi, dtype=float)
    validate_markov_chain(p, pi)
    if n < 1:
        raise ValueError("n must be >= 1")
    pn = np.linalg.matrix_power(p, n)
    tv = 0.5 * np.abs(pn - pi[None, :]).sum(axis=1)
    return float(np.dot(pi, tv))


def dobrushin_row(p: np.ndarray) -> float:
    """Dobrushin coefficient of a row-stochastic matrix: max_x,y TV(P(x,.), P(y,.))."""
    p = np.asarray(p, dtype=float)
    n = p.shape[0]
    worst = 0.0
    for x in range(n):
        for y in range(x + 1, n):
            worst = max(worst, 0.5 * float(np.abs(p[x] - p[y]).sum()))
    return worst


def dobrushin_coefficient(q: np.ndarray, tol: float = 1e-10) -> float:
    """Dobrushin coefficient of a column-stochastic matrix.

    delta(Q) = 1 - min over column pairs (i, j) of sum_k min(q[k,i], q[k,j]).
    """
    q = np.asarray(q, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ValueError("matrix must be square")
    if np.any(q < -tol) or np.max(np.abs(q.sum(axis=0) - 1.0)) > tol:
        raise ValueError("matrix must be column-stochastic")
    n = q.shape[0]
    overlap = 1.0
    for i in range(n):
        for j in range(i + 1, n):
            overlap = min(overlap, float(np.minimum(q[:, i], q[:, j]).sum()))
    return 1.0 - overlap
