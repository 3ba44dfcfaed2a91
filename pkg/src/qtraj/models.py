"""Model zoo: constructors and hypothesis validators for the example instruments.

Each model declares, alongside its Kraus builder, the constants relevant to
the toolkit's checks: the merge block length L and probability epsilon, the
strict-positivity onset index when known, a deterministic forgetting-rate
bound, and (when available in closed form) the dynamically stationary state.
Declared constants are re-derived by the analysis modules; nothing here is
trusted by the acceptance suite without a cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .environment import DisorderProcess
from .instrument import KrausInstrument
from .linalg import basis_state, maximally_mixed
from .stationary import basis_outcome_weights, group_rate_bound, label_transition_matrix


class ConstructionError(ValueError):
    """Model parameters violate a declared hypothesis; message names the inequality."""


@dataclass(frozen=True)
class DistSpec:
    """Distribution of an environment-dependent parameter."""

    dist: str  # uniform | randint | choice
    low: float | None = None
    high: float | None = None
    values: tuple | None = None

    def sample(self, rng: np.random.Generator):
        if self.dist == "uniform":
            return float(rng.uniform(self.low, self.high))
        if self.dist == "randint":
            return int(rng.integers(int(self.low), int(self.high) + 1))
        if self.dist == "choice":
            return self.values[int(rng.integers(0, len(self.values)))]
        raise ConstructionError(f"unknown distribution {self.dist!r}")

    def bounds(self) -> tuple[float, float]:
        if self.dist == "uniform":
            return float(self.low), float(self.high)
        if self.dist == "randint":
            return float(self.low), float(self.high)
        vals = [v for v in self.values]
        return float(min(vals)), float(max(vals))


@dataclass(frozen=True)
class EnvSpec:
    kind: str = "deterministic"  # deterministic | iid | finite-markov
    seed: int = 0
    draws: Mapping[str, DistSpec] = field(default_factory=dict)
    transition: tuple | None = None
    symbols: tuple | None = None  # per-symbol parameter dicts


@dataclass(frozen=True)
class ModelSpec:
    name: str
    params: Mapping = field(default_factory=dict)
    env: EnvSpec = field(default_factory=EnvSpec)


@dataclass(frozen=True)
class GroupInfo:
    """Walk-type structure: outcome a acts on labels by left multiplication with s(a)."""

    table: tuple[tuple[int, ...], ...]
    s_map: tuple[int, ...]
    L: int
    eps0: float
    q: float

    @property
    def dim(self) -> int:
        return len(self.table)

    @property
    def lam(self) -> float:
        return 1.0 - self.dim * self.eps0


@dataclass(frozen=True)
class ModelConstants:
    """Machine-readable constant sheet consumed by the acceptance checks."""

    name: str
    dim: int
    n_outcomes: int
    L: int | None = None
    epsilon: float | None = None
    esp_index: int | None = None
    esp_fails: bool = False
    r_bound: Callable[[int], float] | None = None
    r_bound_desc: str = "empirical"
    stationary_state: Callable[[DisorderProcess, int], np.ndarray] | None = None
    dobrushin: float | None = None
    group: GroupInfo | None = None

    def sheet(self) -> dict:
        return {
            "name": self.name,
            "dim": self.dim,
            "n_outcomes": self.n_outcomes,
            "L": self.L,
            "epsilon": self.epsilon,
            "esp_index": self.esp_index,
            "esp_fails": self.esp_fails,
            "r_bound": self.r_bound_desc,
            "dobrushin": self.dobrushin,
            "group_q": self.group.q if self.group else None,
            "group_lambda": self.group.lam if self.group else None,
        }


# ---------------------------------------------------------------------------
# Shared builders
# ---------------------------------------------------------------------------


def _pair_labels(d: int) -> tuple[str, ...]:
    if d > 9:
        raise ConstructionError("pair-outcome alphabets support d <= 9")
    return tuple(f"{k}{l}" for k in range(1, d + 1) for l in range(1, d + 1))


def _projective_pair_instrument(q: np.ndarray) -> KrausInstrument:
    """Instrument with Kraus sqrt(q[k,l]) |e_k><e_l| over the pair alphabet."""
    d = q.shape[0]
    kraus = []
    for k in range(d):
        for l in range(d):
            v = np.zeros((d, d), dtype=complex)
            v[k, l] = math.sqrt(max(q[k, l], 0.0))
            kraus.append((v,))
    return KrausInstrument(dim=d, labels=_pair_labels(d), kraus=tuple(kraus))


def _group_instrument(table, s_map, labels, weights: np.ndarray) -> KrausInstrument:
    """Walk-type instrument: V_a = sum_g sqrt(w[a, g]) |e_{s(a) g}><e_g|."""
    d = len(table)
    kraus = []
    for a, s_a in enumerate(s_map):
        v = np.zeros((d, d), dtype=complex)
        for g in range(d):
            v[table[s_a][g], g] = math.sqrt(max(weights[a, g], 0.0))
        kraus.append((v,))
    return KrausInstrument(dim=d, labels=tuple(labels), kraus=tuple(kraus))


def cyclic_table(d: int) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple((g + h) % d for h in range(d)) for g in range(d))


def validate_group_table(table: Sequence[Sequence[int]]) -> None:
    d = len(table)
    elems = set(range(d))
    for g in range(d):
        if set(table[g]) != elems or {table[h][g] for h in range(d)} != elems:
            raise ConstructionError("multiplication table must have permutation rows and columns")
        if table[0][g] != g or table[g][0] != g:
            raise ConstructionError("element 0 must be the identity")
    for g in range(d):
        for h in range(d):
            for k in range(d):
                if table[table[g][h]][k] != table[g][table[h][k]]:
                    raise ConstructionError("multiplication table is not associative")
    for g in range(d):
        if 0 not in table[g]:
            raise ConstructionError("missing inverses in multiplication table")


def _hellinger_affinity_max(weights: np.ndarray) -> float:
    """max over label pairs g != g' of sum_a sqrt(w[a,g] w[a,g'])."""
    d = weights.shape[1]
    worst = 0.0
    for g in range(d):
        for h in range(d):
            if g != h:
                worst = max(worst, float(np.sqrt(weights[:, g] * weights[:, h]).sum()))
    return worst


def _check_weight_columns(weights: np.ndarray, tol: float = 1e-9) -> None:
    if np.any(weights < -tol):
        raise ConstructionError("weights must satisfy w >= 0")
    colsums = weights.sum(axis=0)
    if np.max(np.abs(colsums - 1.0)) > tol:
        raise ConstructionError("weights must satisfy sum_a w_{a,g} = 1 for every label g")


def _range_of(params: Mapping, draws: Mapping[str, DistSpec], key: str, default=None):
    """(low, high) bounds of a parameter over the environment's draws."""
    if key in draws:
        return draws[key].bounds()
    v = params.get(key, default)
    if v is None:
        raise ConstructionError(f"missing parameter {key!r}")
    return float(v), float(v)


# ---------------------------------------------------------------------------
# Model definitions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelDef:
    name: str
    defaults: Mapping
    build: Callable[[Mapping], KrausInstrument]
    constants: Callable[[Mapping, Mapping], ModelConstants]  # (params, draws) -> sheet
    validate: Callable[[Mapping, Mapping], None]


def _toy_build(p):
    d = int(p["d"])
    return _projective_pair_instrument(np.full((d, d), 1.0 / d))


def _toy_validate(p, draws):
    if int(p["d"]) < 2:
        raise ConstructionError("toy model requires d >= 2")


def _toy_constants(p, draws):
    d = int(p["d"])
    return ModelConstants(
        name="toy",
        dim=d,
        n_outcomes=d * d,
        L=1,
        epsilon=1.0,
        esp_index=1,
        r_bound=lambda n: 0.0,
        r_bound_desc="0",
        stationary_state=lambda env, idx: maximally_mixed(d),
        dobrushin=0.0,
    )


def _noisy_label_q(d, alpha):
    return (1.0 - alpha) * np.eye(d) + alpha / d


def _noisy_label_build(p):
    return _projective_pair_instrument(_noisy_label_q(int(p["d"]), float(p["alpha"])))


def _noisy_label_validate(p, draws):
    lo, hi = _range_of(p, draws, "alpha")
    if not (0.0 < lo and hi <= 1.0):
        raise ConstructionError("noisy-label requires alpha(omega) in (0, 1]")


def _noisy_label_constants(p, draws):
    d = int(p["d"])
    lo, _ = _range_of(p, draws, "alpha")
    return ModelConstants(
        name="noisy-label",
        dim=d,
        n_outcomes=d * d,
        L=1,
        epsilon=lo,
        esp_index=1,
        r_bound=lambda n, a=lo: 2.0 * (1.0 - a) ** n,
        r_bound_desc=f"2*(1-{lo})^n",
        stationary_state=lambda env, idx: maximally_mixed(d),
        dobrushin=1.0 - lo,
    )


def _absorbing_q(d, alpha):
    q = np.zeros((d, d))
    q[0, 0] = 1.0
    for l in range(1, d):
        q[0, l] = alpha
        q[l, l] = 1.0 - alpha
    return q


def _absorbing_build(p):
    return _projective_pair_instrument(_absorbing_q(int(p["d"]), float(p["alpha"])))


def _absorbing_validate(p, draws):
    lo, hi = _range_of(p, draws, "alpha")
    if not (0.0 < lo and hi < 1.0):
        raise ConstructionError("absorbing model requires alpha(omega) in (0, 1)")


def _absorbing_constants(name):
    def mk(p, draws):
        d = int(p["d"])
        lo, _ = _range_of(p, draws, "alpha")
        return ModelConstants(
            name=name,
            dim=d,
            n_outcomes=d * d,
            L=1,
            epsilon=lo,
            esp_fails=True,
            r_bound=lambda n, a=lo: 2.0 * (1.0 - a) ** n,
            r_bound_desc=f"2*(1-{lo})^n",
            stationary_state=lambda env, idx: basis_state(d, 0),
            dobrushin=1.0 - lo,
        )

    return mk


def _cyclic_ks_q(a):
    q = np.zeros((3, 3))
    for l in range(3):
        q[l, l] = a
        q[(l + 1) % 3, l] = 1.0 - a
    return q


def _cyclic_ks_build(p):
    return _projective_pair_instrument(_cyclic_ks_q(float(p["a"])))


def _cyclic_ks_validate(p, draws):
    lo, hi = _range_of(p, draws, "a")
    if not (0.0 < lo and hi < 1.0):
        raise ConstructionError("cyclic keep-switch requires a(omega) in (0, 1)")


def _cyclic_ks_constants(p, draws):
    lo, hi = _range_of(p, draws, "a")
    eps = min(lo, 1.0 - hi)
    return ModelConstants(
        name="cyclic-keep-switch",
        dim=3,
        n_outcomes=9,
        L=1,
        epsilon=eps,
        esp_index=2,
        r_bound=lambda n, e=eps: 2.0 * (1.0 - e) ** n,
        r_bound_desc=f"2*(1-{eps})^n",
        stationary_state=lambda env, idx: maximally_mixed(3),
        dobrushin=1.0 - eps,
    )


def _ad_build(p):
    g = float(p["gamma"])
    v0 = np.array([[1.0, 0.0], [0.0, math.sqrt(1.0 - g)]], dtype=complex)
    v1 = np.array([[0.0, math.sqrt(g)], [0.0, 0.0]], dtype=complex)
    return KrausInstrument(dim=2, labels=("0", "1"), kraus=((v0,), (v1,)))


def _ad_validate(p, draws):
    lo, hi = _range_of(p, draws, "gamma")
    if not (0.0 < lo and hi <= 1.0):
        raise ConstructionError("amplitude damping requires gamma(omega) >= gamma_* > 0 and <= 1")


def _ad_constants(p, draws):
    lo, _ = _range_of(p, draws, "gamma")
    return ModelConstants(
        name="amplitude-damping",
        dim=2,
        n_outcomes=2,
        L=1,
        epsilon=lo,
        esp_fails=True,
        r_bound=lambda n, g=lo: 2.0 * (1.0 - g) ** (n / 2.0),
        r_bound_desc=f"2*(1-{lo})^(n/2)",
        stationary_state=lambda env, idx: basis_state(2, 0),
    )


def _gad_build(p):
    pw, g = float(p["p"]), float(p["gamma"])
    sp, sq = math.sqrt(pw), math.sqrt(1.0 - pw)
    sg, s1g = math.sqrt(g), math.sqrt(1.0 - g)
    k0 = sp * np.array([[1.0, 0.0], [0.0, s1g]], dtype=complex)
    k1 = sp * np.array([[0.0, sg], [0.0, 0.0]], dtype=complex)
    k2 = sq * np.array([[s1g, 0.0], [0.0, 1.0]], dtype=complex)
    k3 = sq * np.array([[0.0, 0.0], [sg, 0.0]], dtype=complex)
    return KrausInstrument(dim=2, labels=("0", "1", "2", "3"), kraus=((k0,), (k1,), (k2,), (k3,)))


def _gad_validate(p, draws):
    plo, phi = _range_of(p, draws, "p")
    glo, ghi = _range_of(p, draws, "gamma")
    delta = min(plo, 1.0 - phi, glo, 1.0 - ghi)
    if not delta > 0.0:
        raise ConstructionError("generalized amplitude damping requires p, gamma in [delta, 1-delta], delta > 0")


def _gad_constants(p, draws):
    glo, _ = _range_of(p, draws, "gamma")
    plo, phi = _range_of(p, draws, "p")
    delta = min(plo, 1.0 - phi, glo)
    return ModelConstants(
        name="gad",
        dim=2,
        n_outcomes=4,
        L=1,
        epsilon=delta,
        esp_index=1,
        r_bound_desc="empirical",
    )


def _keep_switch_build(p):
    pw = float(p["p"])
    sp, sq = math.sqrt(pw), math.sqrt(1.0 - pw)
    vk = np.array([[sp, 0.0], [0.0, sq]], dtype=complex)
    vs = np.array([[0.0, sp], [sq, 0.0]], dtype=complex)
    return KrausInstrument(dim=2, labels=("K", "S"), kraus=((vk,), (vs,)))


def _keep_switch_validate(p, draws):
    lo, hi = _range_of(p, draws, "p")
    if not (0.0 < lo and hi < 1.0):
        raise ConstructionError("keep-switch requires p(omega) in (0, 1)")
    if lo <= 0.5 <= hi:
        raise ConstructionError("keep-switch requires p(omega) != 1/2 (range must avoid 1/2)")


def _keep_switch_stationary(env: DisorderProcess, idx: int) -> np.ndarray:
    pw = float(env.params_at(idx)["p"])
    return np.diag([pw, 1.0 - pw]).astype(complex)


def _keep_switch_constants(p, draws):
    return ModelConstants(
        name="keep-switch",
        dim=2,
        n_outcomes=2,
        L=1,
        epsilon=1.0,
        esp_index=2,
        r_bound_desc="empirical",
        stationary_state=_keep_switch_stationary,
    )


def _cbt_build(p):
    rates = np.asarray(p["rates"], dtype=float)
    d = rates.shape[0]
    kraus = []
    for k in range(d):
        for i in range(d):
            v = np.zeros((d, d), dtype=complex)
            v[k, i] = math.sqrt(max(rates[k, i], 0.0))
            kraus.append((v,))
    return KrausInstrument(dim=d, labels=_pair_labels(d), kraus=tuple(kraus))


def _cbt_validate(p, draws):
    rates = np.asarray(p["rates"], dtype=float)
    if rates.ndim != 2 or rates.shape[0] != rates.shape[1]:
        raise ConstructionError("complete basis transition requires a square rate matrix")
    if np.min(rates) <= 0.0:
        raise ConstructionError("complete basis transition requires r_{k,i} >= delta > 0")
    if np.max(np.abs(rates.sum(axis=0) - 1.0)) > 1e-9:
        raise ConstructionError("complete basis transition requires sum_k r_{k,i} = 1")


def _cbt_constants(p, draws):
    rates = np.asarray(p["rates"], dtype=float)
    d = rates.shape[0]
    delta = float(np.min(rates))
    return ModelConstants(
        name="complete-basis-transition",
        dim=d,
        n_outcomes=d * d,
        L=1,
        epsilon=d * delta,
        esp_index=1,
        r_bound=lambda n, e=d * delta: 2.0 * (1.0 - e) ** n,
        r_bound_desc=f"2*(1-{d * delta})^n",
    )


def _replacement_build(p):
    d = int(p["d"])
    r = int(p["reset_label"])
    kraus = []
    for k in range(d):
        for l in range(d):
            v = np.zeros((d, d), dtype=complex)
            if k == r:
                v[k, l] = 1.0
            kraus.append((v,))
    return KrausInstrument(dim=d, labels=_pair_labels(d), kraus=tuple(kraus))


def _replacement_validate(p, draws):
    d = int(p["d"])
    if d < 2:
        raise ConstructionError("replacement model requires d >= 2")
    lo, hi = _range_of(p, draws, "reset_label", default=0)
    if lo < 0 or hi > d - 1:
        raise ConstructionError("reset label must lie in {0, ..., d-1}")


def _replacement_stationary(env: DisorderProcess, idx: int) -> np.ndarray:
    p = env.params_at(idx)
    return basis_state(int(p["d"]), int(p["reset_label"]))


def _replacement_constants(p, draws):
    d = int(p["d"])
    return ModelConstants(
        name="replacement",
        dim=d,
        n_outcomes=d * d,
        L=1,
        epsilon=1.0,
        esp_fails=True,
        r_bound=lambda n: 0.0,
        r_bound_desc="0",
        stationary_state=_replacement_stationary,
    )


def _gks_weights(p) -> np.ndarray:
    offsets = np.asarray(p["offsets"], dtype=float)
    probs = offsets + float(p.get("jitter", 0.0))
    return np.vstack([probs, 1.0 - probs])


def _gks_build(p):
    d = int(p["d"])
    return _group_instrument(cyclic_table(d), (0, 1), ("K", "S"), _gks_weights(p))


def _gks_validate(p, draws):
    d = int(p["d"])
    alpha, eta = float(p["alpha"]), float(p["eta"])
    offsets = np.asarray(p["offsets"], dtype=float)
    jlo, jhi = _range_of(p, draws, "jitter", default=0.0)
    if not (0.0 < alpha < 0.5):
        raise ConstructionError("generalized keep-switch requires alpha in (0, 1/2)")
    if eta <= 0.0:
        raise ConstructionError("generalized keep-switch requires eta > 0")
    if len(offsets) != d:
        raise ConstructionError("one offset per label is required")
    if np.min(offsets) + jlo < alpha or np.max(offsets) + jhi > 1.0 - alpha:
        raise ConstructionError("generalized keep-switch requires p_i(omega) in [alpha, 1-alpha]")
    gaps = np.abs(offsets[:, None] - offsets[None, :]) + np.eye(d)
    if np.min(gaps) < eta:
        raise ConstructionError("generalized keep-switch requires |p_i - p_j| >= eta for i != j")
    if d * alpha ** (d - 1) >= 1.0:
        raise ConstructionError("generalized keep-switch requires d * alpha^(d-1) < 1")


def _gks_constants(p, draws):
    d = int(p["d"])
    alpha, eta = float(p["alpha"]), float(p["eta"])
    info = GroupInfo(
        table=cyclic_table(d),
        s_map=(0, 1),
        L=d - 1,
        eps0=alpha ** (d - 1),
        q=math.sqrt(1.0 - eta * eta),
    )
    return _group_constants("generalized-keep-switch", d, 2, info)


def _group_constants(name, d, n_outcomes, info: GroupInfo) -> ModelConstants:
    return ModelConstants(
        name=name,
        dim=d,
        n_outcomes=n_outcomes,
        L=info.L,
        epsilon=d * info.eps0,
        r_bound=lambda n, i=info, dd=d: group_rate_bound(i.lam, i.L, dd, i.q, n),
        r_bound_desc=f"2*{info.lam:.6g}^floor(n/{info.L}) + 2*{d}*{info.q:.6g}^n",
        group=info,
    )


def _weights_from_rows(rows) -> np.ndarray:
    # rows[g] is the outcome law at label g; instruments want w[a, g]
    return np.asarray(rows, dtype=float).T


def _lazy_cyclic_build(p):
    d = int(p["d"])
    w = _weights_from_rows(p["rows"])
    table = cyclic_table(d)
    return _group_instrument(table, (d - 1, 0, 1), ("-1", "0", "+1"), w)


def _lazy_cyclic_validate(p, draws):
    d = int(p["d"])
    w = _weights_from_rows(p["rows"])
    if w.shape != (3, d):
        raise ConstructionError("lazy cyclic requires one (minus, stay, plus) row per label")
    _check_weight_columns(w)
    if np.min(w) <= 0.0:
        raise ConstructionError("lazy cyclic requires p_i^a >= alpha > 0")
    if _hellinger_affinity_max(w) >= 1.0 - 1e-12:
        raise ConstructionError("lazy cyclic requires pairwise row affinity q < 1")


def _lazy_cyclic_constants(p, draws):
    d = int(p["d"])
    w = _weights_from_rows(p["rows"])
    alpha = float(np.min(w))
    info = GroupInfo(
        table=cyclic_table(d),
        s_map=(d - 1, 0, 1),
        L=d - 1,
        eps0=alpha ** (d - 1),
        q=_hellinger_affinity_max(w),
    )
    return _group_constants("lazy-cyclic", d, 3, info)


def _biased_cyclic_build(p):
    d = int(p["d"])
    plus = np.asarray(p["plus"], dtype=float)
    w = np.vstack([1.0 - plus, plus])
    return _group_instrument(cyclic_table(d), (d - 1, 1), ("-1", "+1"), w)


def _biased_cyclic_validate(p, draws):
    d = int(p["d"])
    if d % 2 == 0:
        raise ConstructionError("biased cyclic requires odd d")
    plus = np.asarray(p["plus"], dtype=float)
    if len(plus) != d or np.min(plus) <= 0.0 or np.max(plus) >= 1.0:
        raise ConstructionError("biased cyclic requires p_i^+ in (0, 1) per label")
    w = np.vstack([1.0 - plus, plus])
    if _hellinger_affinity_max(w) >= 1.0 - 1e-12:
        raise ConstructionError("biased cyclic requires pairwise row affinity q < 1")


def _biased_cyclic_constants(p, draws):
    d = int(p["d"])
    plus = np.asarray(p["plus"], dtype=float)
    w = np.vstack([1.0 - plus, plus])
    alpha = float(np.min(w))
    info = GroupInfo(
        table=cyclic_table(d),
        s_map=(d - 1, 1),
        L=d,
        eps0=alpha**d,
        q=_hellinger_affinity_max(w),
    )
    return _group_constants("biased-cyclic", d, 2, info)


def _fga_build(p):
    table = tuple(tuple(row) for row in p["table"])
    d = len(table)
    w = _weights_from_rows(p["rows"])
    labels = tuple(f"g{a}" for a in range(d))
    return _group_instrument(table, tuple(range(d)), labels, w)


def _fga_validate(p, draws):
    table = tuple(tuple(row) for row in p["table"])
    validate_group_table(table)
    d = len(table)
    w = _weights_from_rows(p["rows"])
    if w.shape != (d, d):
        raise ConstructionError("finite group action requires a full outcome law per label")
    _check_weight_columns(w)
    if np.min(w) <= 0.0:
        raise ConstructionError("finite group action requires mu_g(a) >= alpha > 0")
    if _hellinger_affinity_max(w) >= 1.0 - 1e-12:
        raise ConstructionError("finite group action requires pairwise row affinity q < 1")


def _fga_constants(p, draws):
    table = tuple(tuple(row) for row in p["table"])
    d = len(table)
    w = _weights_from_rows(p["rows"])
    alpha = float(np.min(w))
    info = GroupInfo(table=table, s_map=tuple(range(d)), L=1, eps0=alpha, q=_hellinger_affinity_max(w))
    return _group_constants("finite-group-action", d, d, info)


def covering_radius(table, gens) -> int:
    """Smallest L such that products of exactly L generators reach every element.

    Requires the identity to belong to the generating set, so shorter words can
    be padded with identity moves.
    """
    d = len(table)
    if 0 not in gens:
        raise ConstructionError("cayley graph requires the identity in the generating set")
    reached = {0}
    for step in range(1, d + 1):
        reached = {table[s][g] for g in reached for s in gens}
        if len(reached) == d:
            return step
    raise ConstructionError("generating set does not generate the group")


def _cayley_build(p):
    table = tuple(tuple(row) for row in p["table"])
    gens = tuple(int(g) for g in p["gens"])
    w = _weights_from_rows(p["rows"])
    labels = tuple(f"s{g}" for g in gens)
    return _group_instrument(table, gens, labels, w)


def _cayley_validate(p, draws):
    table = tuple(tuple(row) for row in p["table"])
    validate_group_table(table)
    gens = tuple(int(g) for g in p["gens"])
    covering_radius(table, gens)
    w = _weights_from_rows(p["rows"])
    if w.shape != (len(gens), len(table)):
        raise ConstructionError("cayley graph requires one generator law per label")
    _check_weight_columns(w)
    if np.min(w) <= 0.0:
        raise ConstructionError("cayley graph requires p_g^s >= alpha > 0")
    if _hellinger_affinity_max(w) >= 1.0 - 1e-12:
        raise ConstructionError("cayley graph requires pairwise row affinity q < 1")


def _cayley_constants(p, draws):
    table = tuple(tuple(row) for row in p["table"])
    gens = tuple(int(g) for g in p["gens"])
    d = len(table)
    w = _weights_from_rows(p["rows"])
    alpha = float(np.min(w))
    L0 = covering_radius(table, gens)
    info = GroupInfo(table=table, s_map=gens, L=L0, eps0=alpha**L0, q=_hellinger_affinity_max(w))
    return _group_constants("cayley-graph", d, len(gens), info)


MODELS: dict[str, ModelDef] = {
    "toy": ModelDef("toy", {"d": 2}, _toy_build, _toy_constants, _toy_validate),
    "noisy-label": ModelDef(
        "noisy-label", {"d": 2, "alpha": 0.3}, _noisy_label_build, _noisy_label_constants, _noisy_label_validate
    ),
    "absorbing": ModelDef(
        "absorbing", {"d": 3, "alpha": 0.3}, _absorbing_build, _absorbing_constants("absorbing"), _absorbing_validate
    ),
    "absorbing-general-d": ModelDef(
        "absorbing-general-d",
        {"d": 4, "alpha": 0.3},
        _absorbing_build,
        _absorbing_constants("absorbing-general-d"),
        _absorbing_validate,
    ),
    "cyclic-keep-switch": ModelDef(
        "cyclic-keep-switch", {"a": 0.5}, _cyclic_ks_build, _cyclic_ks_constants, _cyclic_ks_validate
    ),
    "amplitude-damping": ModelDef(
        "amplitude-damping", {"gamma": 0.5}, _ad_build, _ad_constants, _ad_validate
    ),
    "gad": ModelDef("gad", {"p": 0.5, "gamma": 0.5}, _gad_build, _gad_constants, _gad_validate),
    "keep-switch": ModelDef("keep-switch", {"p": 0.3}, _keep_switch_build, _keep_switch_constants, _keep_switch_validate),
    "complete-basis-transition": ModelDef(
        "complete-basis-transition",
        {"rates": ((0.7, 0.4), (0.3, 0.6))},
        _cbt_build,
        _cbt_constants,
        _cbt_validate,
    ),
    "replacement": ModelDef(
        "replacement", {"d": 2, "reset_label": 0}, _replacement_build, _replacement_constants, _replacement_validate
    ),
    "generalized-keep-switch": ModelDef(
        "generalized-keep-switch",
        {"d": 3, "alpha": 0.2, "eta": 0.2, "offsets": (0.25, 0.45, 0.65), "jitter": 0.0},
        _gks_build,
        _gks_constants,
        _gks_validate,
    ),
    "lazy-cyclic": ModelDef(
        "lazy-cyclic",
        {"d": 3, "rows": ((0.5, 0.3, 0.2), (0.2, 0.5, 0.3), (0.3, 0.2, 0.5))},
        _lazy_cyclic_build,
        _lazy_cyclic_constants,
        _lazy_cyclic_validate,
    ),
    "biased-cyclic": ModelDef(
        "biased-cyclic",
        {"d": 3, "plus": (0.3, 0.5, 0.7)},
        _biased_cyclic_build,
        _biased_cyclic_constants,
        _biased_cyclic_validate,
    ),
    "finite-group-action": ModelDef(
        "finite-group-action",
        {
            "table": ((0, 1, 2), (1, 2, 0), (2, 0, 1)),
            "rows": ((0.5, 0.3, 0.2), (0.2, 0.5, 0.3), (0.3, 0.2, 0.5)),
        },
        _fga_build,
        _fga_constants,
        _fga_validate,
    ),
    "cayley-graph": ModelDef(
        "cayley-graph",
        {
            "table": tuple(tuple((g + h) % 4 for h in range(4)) for g in range(4)),
            "gens": (0, 1),
            "rows": ((0.2, 0.8), (0.4, 0.6), (0.6, 0.4), (0.8, 0.2)),
        },
        _cayley_build,
        _cayley_constants,
        _cayley_validate,
    ),
}


def construct(spec: ModelSpec) -> tuple[DisorderProcess, ModelConstants]:
    """Build the environment-parameterized instrument and its constant sheet.

    The model's hypotheses are validated over the declared parameter ranges
    before anything is built; a violation raises ConstructionError naming the
    failed inequality.
    """
    if spec.name not in MODELS:
        raise ConstructionError(f"unknown model {spec.name!r}; known: {sorted(MODELS)}")
    model = MODELS[spec.name]
    params = dict(model.defaults)
    params.update(spec.params)
    draws = dict(spec.env.draws)
    model.validate(params, draws)
    constants = model.constants(params, draws)

    if spec.env.kind == "deterministic":
        env = DisorderProcess("deterministic", spec.env.seed, model.build, base_params=params)
    elif spec.env.kind == "iid":
        if not draws:
            raise ConstructionError("iid environment requires at least one parameter draw")

        def draw_fn(rng, _draws=draws):
            return {k: d.sample(rng) for k, d in _draws.items()}

        env = DisorderProcess("iid", spec.env.seed, model.build, base_params=params, draw=draw_fn)
    elif spec.env.kind == "finite-markov":
        if spec.env.transition is None or spec.env.symbols is None:
            raise ConstructionError("finite-markov environment requires transition and symbols")
        symbols = [dict(s) for s in spec.env.symbols]
        for sym in symbols:
            merged = dict(params)
            merged.update(sym)
            model.validate(merged, {})
        env = DisorderProcess(
            "finite-markov",
            spec.env.seed,
            model.build,
            base_params=params,
            transition=np.asarray(spec.env.transition, dtype=float),
            symbol_params=symbols,
        )
    else:
        raise ConstructionError(f"unknown environment kind {spec.env.kind!r}")
    return env, constants


@dataclass(frozen=True)
class GroupHypothesesReport:
    L: int
    eps0_declared: float
    eps0_measured: float
    q_declared: float
    q_measured: float
    f1_ok: bool
    f2_ok: bool
    violation: str | None = None


def validate_group_hypotheses(
    spec: ModelSpec, n_env_samples: int = 100, seed: int = 0
) -> GroupHypothesesReport:
    """Check the block-positivity and row-affinity hypotheses of a walk-type model.

    The block condition is verified by explicit L-step products of the induced
    label-transition matrices over sampled environments; the affinity condition
    by direct evaluation over all label pairs.  Measured values are compared
    with the declared constants.
    """
    from .rng import derive_seed

    env, constants = construct(spec)
    if constants.group is None:
        raise ConstructionError(f"model {spec.name!r} is not a walk-type model")
    info = constants.group
    n_samples = 1 if env.kind == "deterministic" else n_env_samples
    f1_min = np.inf
    q_max = 0.0
    violation = None
    for s in range(n_samples):
        e = env if env.kind == "deterministic" else env.reseeded(derive_seed(seed, 0xF1, s))
        prod = np.eye(info.dim)
        for k in range(1, info.L + 1):
            inst = e.instrument_at(k)
            q_here = _hellinger_affinity_max(basis_outcome_weights(inst))
            if q_here > q_max:
                q_max = q_here
            prod = label_transition_matrix(inst) @ prod
        f1_min = min(f1_min, float(np.min(prod)))
    f1_ok = f1_min >= info.eps0 - 1e-12
    f2_ok = q_max <= info.q + 1e-12 and q_max < 1.0
    if not f1_ok:
        violation = f"block product entry {f1_min:.3e} < declared eps0 {info.eps0:.3e}"
    elif not f2_ok:
        violation = f"row affinity {q_max:.6f} exceeds declared q {info.q:.6f}"
    return GroupHypothesesReport(
        L=info.L,
        eps0_declared=info.eps0,
        eps0_measured=float(f1_min),
        q_declared=info.q,
        q_measured=float(q_max),
        f1_ok=f1_ok,
        f2_ok=f2_ok,
        violation=violation,
    )
