"""Quantum instruments: outcome-resolved Kraus maps and the induced channel.

An instrument is a finite family of completely positive trace-non-increasing
maps, one per recorded outcome, whose sum is trace preserving.  Perfect
instruments carry exactly one Kraus operator per outcome; imperfect ones may
carry several.  All maps here are pure functions of immutable inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linalg import (
    apply_superop,
    hermitize,
    maximally_mixed,
    min_eigenvalue,
    random_pure_state,
    superop_dim,
    superop_from_kraus,
    superop_identity,
)
from .rng import substream

TOL_TP = 1e-9
TOL_ZERO = 1e-12  # selective-update mass below this triggers the reference-state fallback
STRICT_POS_SAMPLES = 200
STRICT_POS_EIG_TOL = 1e-12


class InstrumentStructureError(ValueError):
    """Kraus family is malformed (dimension mismatch, empty outcome, ...)."""


class UnknownOutcomeError(KeyError):
    pass


class MonomialStructureError(RuntimeError):
    """Channel does not have the diagonal-sector structure required for the exact test."""


@dataclass(frozen=True)
class KrausInstrument:
    """Outcome alphabet plus, per outcome, one or more d x d Kraus operators."""

    dim: int
    labels: tuple[str, ...]
    kraus: tuple[tuple[np.ndarray, ...], ...]
    _stack: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise InstrumentStructureError("dim must be >= 1")
        if len(self.labels) != len(self.kraus) or not self.kraus:
            raise InstrumentStructureError("labels and kraus lists must match and be nonempty")
        if len(set(self.labels)) != len(self.labels):
            raise InstrumentStructureError("duplicate outcome labels")
        frozen = []
        r_max = 0
        for branches in self.kraus:
            if not branches:
                raise InstrumentStructureError("each outcome needs at least one Kraus operator")
            ops = []
            for v in branches:
                v = np.asarray(v, dtype=complex)
                if v.shape != (self.dim, self.dim):
                    raise InstrumentStructureError(
                        f"Kraus operator shape {v.shape} != ({self.dim}, {self.dim})"
                    )
                if not np.all(np.isfinite(v.real)) or not np.all(np.isfinite(v.imag)):
                    raise InstrumentStructureError("non-finite Kraus entries")
                v = v.copy()
                v.flags.writeable = False
                ops.append(v)
            r_max = max(r_max, len(ops))
            frozen.append(tuple(ops))
        object.__setattr__(self, "kraus", tuple(frozen))
        # padded stack (n_outcomes, r_max, d, d) for vectorized evaluation
        stack = np.zeros((len(frozen), r_max, self.dim, self.dim), dtype=complex)
        for a, branches in enumerate(frozen):
            for j, v in enumerate(branches):
                stack[a, j] = v
        stack.flags.writeable = False
        object.__setattr__(self, "_stack", stack)

    @property
    def n_outcomes(self) -> int:
        return len(self.labels)

    @property
    def perfect(self) -> bool:
        return all(len(b) == 1 for b in self.kraus)

    def stacked(self) -> np.ndarray:
        """Zero-padded Kraus array of shape (n_outcomes, r_max, d, d)."""
        return self._stack

    def index(self, outcome: int | str) -> int:
        if isinstance(outcome, str):
            try:
                return self.labels.index(outcome)
            except ValueError:
                raise UnknownOutcomeError(outcome) from None
        a = int(outcome)
        if not 0 <= a < self.n_outcomes:
            raise UnknownOutcomeError(outcome)
        return a


@dataclass(frozen=True)
class ValidationReport:
    max_deviation: float
    passed: bool
    tol: float


def validate(inst: KrausInstrument, tol: float = TOL_TP) -> ValidationReport:
    """Check trace preservation: sum over outcomes and branches of V^dag V = I."""
    acc = np.zeros((inst.dim, inst.dim), dtype=complex)
    for branches in inst.kraus:
        for v in branches:
            acc += v.conj().T @ v
    dev = float(np.max(np.abs(acc - np.eye(inst.dim))))
    return ValidationReport(max_deviation=dev, passed=dev <= tol, tol=tol)


def apply_selective(inst: KrausInstrument, outcome: int | str, rho: np.ndarray) -> np.ndarray:
    """Unnormalized selective update sum_j V_{a,j} rho V_{a,j}^dagger."""
    a = inst.index(outcome)
    out = np.zeros((inst.dim, inst.dim), dtype=complex)
    for v in inst.kraus[a]:
        out += v @ rho @ v.conj().T
    return out


def apply_channel(inst: KrausInstrument, rho: np.ndarray) -> np.ndarray:
    """Non-selective channel: sum over all outcomes of the selective maps."""
    out = np.zeros((inst.dim, inst.dim), dtype=complex)
    for branches in inst.kraus:
        for v in branches:
            out += v @ rho @ v.conj().T
    return hermitize(out)


def outcome_probabilities(inst: KrausInstrument, rho: np.ndarray, tol: float = TOL_TP) -> np.ndarray:
    """Born probabilities p(a) = tr T_a(rho), clamped at 0 and renormalized."""
    w = inst.stacked()
    p = np.einsum("ajik,kl,ajil->a", w, rho, w.conj()).real
    if np.min(p) < -tol:
        raise RuntimeError(f"outcome probability {np.min(p):.3e} below -{tol}")
    p = np.clip(p, 0.0, None)
    total = p.sum()
    if abs(total - 1.0) > tol:
        raise RuntimeError(f"outcome probabilities sum to {total!r}, beyond tolerance {tol}")
    return p / total


def posterior(
    inst: KrausInstrument,
    outcome: int | str,
    rho: np.ndarray,
    ref: np.ndarray | None = None,
    tol_zero: float = TOL_ZERO,
) -> np.ndarray:
    """Normalized selective update; falls back to the reference state on zero mass."""
    out = apply_selective(inst, outcome, rho)
    mass = complex(np.trace(out)).real
    if mass <= tol_zero:
        return maximally_mixed(inst.dim) if ref is None else ref
    return hermitize(out / mass)


# ---------------------------------------------------------------------------
# Superoperator views and compositions
# ---------------------------------------------------------------------------


def selective_superoperator(inst: KrausInstrument, outcome: int | str) -> np.ndarray:
    return superop_from_kraus(inst.kraus[inst.index(outcome)])


def channel_superoperator(inst: KrausInstrument) -> np.ndarray:
    ops = [v for branches in inst.kraus for v in branches]
    return superop_from_kraus(ops)


def compose_channels(instruments: Sequence[KrausInstrument], dim: int | None = None) -> np.ndarray:
    """Superoperator of the n-step non-selective composition (step 1 first).

    An empty list yields the identity superoperator on the given dimension;
    dimensions of all instruments must match.
    """
    if instruments:
        dim = instruments[0].dim
        for inst in instruments:
            if inst.dim != dim:
                raise InstrumentStructureError("dimension mismatch in composition")
    elif dim is None:
        raise InstrumentStructureError("empty composition needs an explicit dimension")
    m = superop_identity(dim)
    for inst in instruments:
        m = channel_superoperator(inst) @ m
    return m


def adjoint_selective(inst: KrausInstrument, outcome: int | str, y: np.ndarray) -> np.ndarray:
    """Heisenberg-picture selective map sum_j V_{a,j}^dagger Y V_{a,j}."""
    a = inst.index(outcome)
    out = np.zeros((inst.dim, inst.dim), dtype=complex)
    for v in inst.kraus[a]:
        out += v.conj().T @ y @ v
    return out


def povm_cylinder_element(instruments: Sequence[KrausInstrument], word: Sequence[int | str]) -> np.ndarray:
    """Effect operator of a finite outcome word: <rho, E_w> is the word's probability.

    instruments[k-1] is the instrument used at step k; the word must have the
    same length as the instrument list.
    """
    if len(instruments) != len(word):
        raise ValueError("word length must equal number of instruments")
    e = np.eye(instruments[0].dim, dtype=complex)
    for inst, a in zip(reversed(instruments), reversed(list(word))):
        e = adjoint_selective(inst, a, e)
    return hermitize(e)


# ---------------------------------------------------------------------------
# Strict positivity
# ---------------------------------------------------------------------------


def diagonal_sector_matrix(m: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Extract the label-transition matrix of a diagonal-sector channel.

    Requires the superoperator to annihilate all off-diagonal matrix units and
    to map diagonal units into the diagonal sector (the structure of channels
    whose Kraus operators are all scaled matrix units).  Raises
    MonomialStructureError otherwise.
    """
    d = superop_dim(m)
    scale = max(1.0, float(np.max(np.abs(m))))
    t = np.zeros((d, d))
    diag_idx = [i * d + i for i in range(d)]
    offdiag_mask = np.ones(d * d, dtype=bool)
    offdiag_mask[diag_idx] = False
    for col in range(d * d):
        i, j = divmod(col, d)
        if i != j:
            if np.max(np.abs(m[:, col])) > tol * scale:
                raise MonomialStructureError("channel does not annihilate off-diagonal inputs")
        else:
            if np.max(np.abs(m[offdiag_mask, col])) > tol * scale:
                raise MonomialStructureError("channel maps diagonal inputs outside the diagonal sector")
            t[:, i] = m[diag_idx, col].real
    return t


def _structured_pure_states(d: int):
    """Basis states and two-level superpositions, where positivity typically degenerates."""
    for i in range(d):
        v = np.zeros(d, dtype=complex)
        v[i] = 1.0
        yield np.outer(v, v.conj())
    for i in range(d):
        for j in range(i + 1, d):
            for phase in (1.0, -1.0, 1.0j):
                v = np.zeros(d, dtype=complex)
                v[i] = 1.0 / np.sqrt(2)
                v[j] = phase / np.sqrt(2)
                yield np.outer(v, v.conj())


def strict_positivity_check(
    m: np.ndarray,
    mode: str = "sampled",
    n_samples: int = STRICT_POS_SAMPLES,
    seed: int = 0,
    eig_tol: float = STRICT_POS_EIG_TOL,
) -> bool:
    """Does the positive map send every nonzero PSD matrix to a positive definite one?

    sampled mode probes basis states, two-level superpositions, and
    Haar-random pure states (a necessary-condition probe, not a proof).
    monomial-exact mode applies only to diagonal-sector channels, where
    positivity of every entry of the induced label-transition matrix is an
    exact criterion.
    """
    if mode == "monomial-exact":
        t = diagonal_sector_matrix(m)
        return bool(np.all(t > 0.0))
    if mode != "sampled":
        raise ValueError(f"unknown mode {mode!r}")
    d = superop_dim(m)
    rng = substream(seed, 0x5151)
    probes = list(_structured_pure_states(d))
    probes.extend(random_pure_state(rng, d) for _ in range(n_samples))
    for rho in probes:
        if min_eigenvalue(apply_superop(m, rho)) <= eig_tol:
            return False
    return True


def esp_probe(env, origin: int = 0, n_max: int = 20, mode: str = "auto", seed: int = 0) -> int | None:
    """Smallest n <= n_max such that the n-step composed channel is strictly positive.

    Compositions run along the environment starting after `origin`.  Returns
    None when no such n is found.  mode "auto" uses the exact diagonal-sector
    criterion when the composition has that structure and the sampled probe
    otherwise.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    d = env.instrument_at(origin + 1).dim
    m = superop_identity(d)
    for n in range(1, n_max + 1):
        m = channel_superoperator(env.instrument_at(origin + n)) @ m
        if mode == "auto":
            try:
                if bool(np.all(diagonal_sector_matrix(m) > 0.0)):
                    return n
                continue
            except MonomialStructureError:
                use = "sampled"
        else:
            use = mode
        if strict_positivity_check(m, mode=use, seed=seed):
            return n
    return None


# ---------------------------------------------------------------------------
# Basis-preserving (monomial) structure extraction
# ---------------------------------------------------------------------------


def extract_label_map(inst: KrausInstrument, tol: float = 1e-10):
    """For a perfect instrument, extract the per-outcome basis-label maps.

    Requires every Kraus operator to send each basis vector to a scalar
    multiple of a single basis vector, with images of distinct basis vectors
    orthogonal.  Returns (maps, None) on success, where maps[a] is a tuple f_a
    with f_a[i] the target label of basis label i; on failure returns
    (None, reason).  Labels carried by zero columns are filled with the
    operator's common target row when it has one, else identity; they never
    receive probability mass.
    """
    if not inst.perfect:
        return None, "instrument is not perfect (multiple Kraus operators per outcome)"
    d = inst.dim
    maps = []
    for a, branches in enumerate(inst.kraus):
        v = branches[0]
        scale = max(float(np.max(np.abs(v))), 1.0)
        f = [-1] * d
        rows_used: dict[int, int] = {}
        nonzero_rows = set()
        for i in range(d):
            col = v[:, i]
            idx = np.flatnonzero(np.abs(col) > tol * scale)
            if idx.size > 1:
                return None, f"outcome {inst.labels[a]!r}: column {i} is not a basis ray"
            if idx.size == 1:
                k = int(idx[0])
                if k in rows_used:
                    return None, (
                        f"outcome {inst.labels[a]!r}: images of basis labels "
                        f"{rows_used[k]} and {i} are not orthogonal"
                    )
                rows_used[k] = i
                f[i] = k
                nonzero_rows.add(k)
        common_row = nonzero_rows.pop() if len(nonzero_rows) == 1 else None
        for i in range(d):
            if f[i] < 0:
                f[i] = common_row if common_row is not None else i
        maps.append(tuple(f))
    return tuple(maps), None


def instrument_to_json(inst: KrausInstrument) -> str:
    """Serialize to JSON with complex entries as [re, im] pairs."""
    payload = {
        "dim": inst.dim,
        "alphabet": list(inst.labels),
        "kraus": [
            [[[float(z.real), float(z.imag)] for z in row] for row in v.tolist()]
            for branches in inst.kraus
            for v in branches
        ],
        "branches_per_outcome": [len(b) for b in inst.kraus],
    }
    return json.dumps(payload, sort_keys=True)


def instrument_from_json(text: str) -> KrausInstrument:
    """Instrument from JSON: either explicit Kraus matrices or a zoo reference.

    Explicit form: {"dim", "alphabet", "kraus": [[[re, im], ...], ...],
    "branches_per_outcome"}.  Zoo form: {"model": name, "params": {...}}.
    """
    payload = json.loads(text)
    if "model" in payload:
        from .models import MODELS

        model = MODELS[payload["model"]]
        params = dict(model.defaults)
        params.update(payload.get("params", {}))
        return model.build(params)
    dim = int(payload["dim"])
    labels = tuple(str(x) for x in payload["alphabet"])
    counts = payload.get("branches_per_outcome", [1] * len(labels))
    flat = [
        np.array([[complex(re, im) for re, im in row] for row in mat], dtype=complex)
        for mat in payload["kraus"]
    ]
    if sum(counts) != len(flat):
        raise InstrumentStructureError("branch counts do not match number of Kraus matrices")
    kraus = []
    pos = 0
    for c in counts:
        kraus.append(tuple(flat[pos : pos + c]))
        pos += c
    return KrausInstrument(dim=dim, labels=labels, kraus=tuple(kraus))
