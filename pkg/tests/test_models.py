import numpy as np
import pytest

from qtraj.environment import dobrushin_coefficient
from qtraj.instrument import validate
from qtraj.models import (
    MODELS,
    ConstructionError,
    DistSpec,
    EnvSpec,
    ModelSpec,
    construct,
    covering_radius,
    cyclic_table,
    validate_group_hypotheses,
    validate_group_table,
)
from qtraj.stationary import label_transition_matrix


def test_every_model_constructs_and_validates():
    for name in MODELS:
        env, constants = construct(ModelSpec(name))
        assert validate(env.instrument_at(1)).passed
        assert constants.name == name


DISORDERED_SPECS = {
    "noisy-label": EnvSpec("iid", 1, {"alpha": DistSpec("uniform", 0.2, 0.8)}),
    "amplitude-damping": EnvSpec("iid", 2, {"gamma": DistSpec("uniform", 0.5, 0.95)}),
    "keep-switch": EnvSpec("iid", 3, {"p": DistSpec("uniform", 0.2, 0.45)}),
    "generalized-keep-switch": EnvSpec("iid", 4, {"jitter": DistSpec("uniform", 0.0, 0.15)}),
    "replacement": EnvSpec("iid", 5, {"reset_label": DistSpec("randint", 0, 1)}),
    "cyclic-keep-switch": EnvSpec("iid", 6, {"a": DistSpec("uniform", 0.2, 0.8)}),
    "gad": EnvSpec("iid", 7, {"p": DistSpec("uniform", 0.3, 0.7), "gamma": DistSpec("uniform", 0.3, 0.7)}),
    "absorbing": EnvSpec("iid", 8, {"alpha": DistSpec("uniform", 0.2, 0.8)}),
}


def test_every_model_validates_across_disorder_draws():
    # 1000 sampled environments per disordered variant; deterministic models
    # are constant in the disorder, so a single instrument suffices there
    for name, env_spec in DISORDERED_SPECS.items():
        env, _ = construct(ModelSpec(name, env=env_spec))
        for n in range(1, 1001):
            assert validate(env.instrument_at(n)).passed, f"{name} at index {n}"
    for name in MODELS:
        env, _ = construct(ModelSpec(name))
        assert validate(env.instrument_at(1)).passed


def test_biased_cyclic_rejects_even_d():
    with pytest.raises(ConstructionError, match="odd"):
        construct(ModelSpec("biased-cyclic", {"d": 4, "plus": (0.3, 0.5, 0.7, 0.4)}))


def test_keep_switch_rejects_half():
    with pytest.raises(ConstructionError, match="1/2"):
        construct(ModelSpec("keep-switch", {"p": 0.5}))
    with pytest.raises(ConstructionError, match="1/2"):
        construct(ModelSpec("keep-switch", env=EnvSpec("iid", 0, {"p": DistSpec("uniform", 0.4, 0.6)})))


def test_noisy_label_rejects_alpha_out_of_range():
    with pytest.raises(ConstructionError):
        construct(ModelSpec("noisy-label", {"alpha": 0.0}))
    with pytest.raises(ConstructionError):
        construct(ModelSpec("noisy-label", {"alpha": 1.5}))


def test_gks_rejects_gap_violation():
    with pytest.raises(ConstructionError, match="eta"):
        construct(ModelSpec("generalized-keep-switch", {"offsets": (0.25, 0.30, 0.65)}))


def test_weights_must_sum_to_one():
    with pytest.raises(ConstructionError, match="sum"):
        construct(ModelSpec("lazy-cyclic", {"rows": ((0.5, 0.3, 0.3), (0.2, 0.5, 0.3), (0.3, 0.2, 0.5))}))


def test_unknown_model_rejected():
    with pytest.raises(ConstructionError, match="unknown model"):
        construct(ModelSpec("not-a-model"))


def test_cyclic_keep_switch_constants():
    env, constants = construct(ModelSpec("cyclic-keep-switch"))
    assert constants.epsilon == pytest.approx(0.5)
    assert constants.esp_index == 2
    assert constants.dobrushin == pytest.approx(0.5)
    assert constants.r_bound(3) == pytest.approx(2.0 ** (1 - 3))
    t = label_transition_matrix(env.instrument_at(1))
    assert dobrushin_coefficient(t) == pytest.approx(0.5, abs=1e-12)


def test_lazy_cyclic_constants():
    _, constants = construct(ModelSpec("lazy-cyclic"))
    info = constants.group
    assert info.L == 2  # d - 1
    assert info.eps0 == pytest.approx(0.2**2)


def test_gks_declared_constants():
    _, constants = construct(ModelSpec("generalized-keep-switch"))
    info = constants.group
    assert info.L == 2
    assert info.eps0 == pytest.approx(0.04)
    assert info.lam == pytest.approx(0.88)
    assert info.q == pytest.approx(np.sqrt(1 - 0.2**2))


def test_finite_group_action_constants():
    _, constants = construct(ModelSpec("finite-group-action"))
    info = constants.group
    assert info.L == 1
    assert info.eps0 == pytest.approx(0.2)


def test_covering_radius_z4():
    table = cyclic_table(4)
    assert covering_radius(table, (0, 1)) == 3
    with pytest.raises(ConstructionError):
        covering_radius(table, (0, 2))  # 2 alone does not generate Z4 with identity padding


def test_group_table_validation():
    validate_group_table(cyclic_table(5))
    bad = ((0, 1), (1, 0))
    validate_group_table(bad)  # Z2 is fine
    with pytest.raises(ConstructionError):
        validate_group_table(((0, 1), (0, 1)))


@pytest.mark.parametrize("name", ["generalized-keep-switch", "lazy-cyclic", "biased-cyclic",
                                  "finite-group-action", "cayley-graph"])
def test_group_hypotheses_hold(name):
    rep = validate_group_hypotheses(ModelSpec(name), n_env_samples=20, seed=1)
    assert rep.f1_ok and rep.f2_ok, rep.violation
    assert rep.eps0_measured >= rep.eps0_declared - 1e-12
    assert rep.q_measured <= rep.q_declared + 1e-12


def test_group_hypotheses_disordered_gks():
    spec = ModelSpec("generalized-keep-switch", env=EnvSpec("iid", 2, {"jitter": DistSpec("uniform", 0.0, 0.15)}))
    rep = validate_group_hypotheses(spec, n_env_samples=100, seed=3)
    assert rep.f1_ok and rep.f2_ok, rep.violation


def test_constant_sheet_serializable():
    import json

    for name in MODELS:
        _, constants = construct(ModelSpec(name))
        json.dumps(constants.sheet())
