"""Config-driven experiment runner.

Subcommands: validate | esp | stationary | forgetting | clt | couple | report.
Exit codes: 0 success, 2 config error, 3 numerical failure, 4 statistical
acceptance failure.  All outputs are deterministic given the seeds; wall-clock
timestamps live only in the result's meta field.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from .cltstats import (
    clt_report,
    skew_mixing_bound,
    summability_report,
    variance_convergence_check,
)
from .config import TASKS, ConfigError, ExperimentConfig, load_config
from .coupling import check_A1_env, overlap_criterion, simulate_coalescence
from .instrument import esp_probe, validate
from .linalg import basis_state, maximally_mixed
from .models import ModelSpec, construct, validate_group_hypotheses
from .rng import derive_seed
from .stationary import (
    beta_report_rows,
    contraction_decay,
    estimate_beta,
    solve_stationary_state,
    verify_stationarity,
)
from .trajectory import (
    dump_records,
    exact_pattern_mean,
    parse_pattern,
    pattern_indicators,
    sample_records,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_STATISTICAL = 4


class NumericalFailure(RuntimeError):
    pass


def _initial_state(name: str, env, constants):
    d = env.instrument_at(1).dim
    if name == "mixed":
        return maximally_mixed(d)
    if name == "stationary":
        sol = solve_stationary_state(env, 0)
        if not sol.converged:
            raise NumericalFailure("stationary solver did not converge for the initial state")
        return sol.state
    if name == "plus":
        v = np.ones(d, dtype=complex) / np.sqrt(d)
        return np.outer(v, v.conj())
    if name.startswith("basis:"):
        return basis_state(d, int(name.split(":", 1)[1]))
    raise ConfigError(f"unknown initial state {name!r}")


def _default_patterns(cfg: ExperimentConfig, env) -> tuple[str, ...]:
    if cfg.patterns:
        return cfg.patterns
    return (env.instrument_at(1).labels[0],)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{x:.17g}" if isinstance(x, float) else x for x in row])


def _task_validate(cfg: ExperimentConfig, env, constants, out: dict) -> int:
    samples = int(cfg.options.get("env_samples", 1000))
    n_check = 1 if env.kind == "deterministic" else samples
    worst = 0.0
    for s in range(n_check):
        drawn = env if env.kind == "deterministic" else env.reseeded(derive_seed(cfg.seed, 0xE0, s))
        rep = validate(drawn.instrument_at(1))
        worst = max(worst, rep.max_deviation)
        if not rep.passed:
            out["validate"] = {"passed": False, "max_deviation": worst}
            return EXIT_NUMERICAL
    a1 = check_A1_env(env, seed=cfg.seed)
    out["validate"] = {"passed": True, "max_deviation": worst, "a1": a1.passed, "a1_reason": a1.reason}
    out["constants"] = constants.sheet()
    if a1.passed and constants.L is not None:
        eps = overlap_criterion(env, int(cfg.options.get("overlap_samples", 200)), constants.L, seed=cfg.seed)
        out["validate"]["overlap"] = eps
        out["validate"]["overlap_note"] = (
            "empirical minimum over sampled disorder draws"
            if env.kind != "deterministic"
            else "exact for the deterministic environment"
        )
    if constants.group is not None:
        rep = validate_group_hypotheses(ModelSpec(cfg.model.name, cfg.model.params, cfg.model.env), seed=cfg.seed)
        out["group_hypotheses"] = {
            "L": rep.L,
            "eps0_declared": rep.eps0_declared,
            "eps0_measured": rep.eps0_measured,
            "q_declared": rep.q_declared,
            "q_measured": rep.q_measured,
            "passed": rep.f1_ok and rep.f2_ok,
            "violation": rep.violation,
        }
        if not (rep.f1_ok and rep.f2_ok):
            return EXIT_STATISTICAL
    return EXIT_OK


def _task_esp(cfg: ExperimentConfig, env, constants, out: dict) -> int:
    n_max = int(cfg.options.get("n_max", 20))
    found = esp_probe(env, 0, n_max=n_max, seed=cfg.seed)
    out["esp"] = {"found_at": found, "n_max": n_max, "declared": constants.esp_index,
                  "declared_fails": constants.esp_fails}
    if constants.esp_index is not None and found != constants.esp_index:
        return EXIT_STATISTICAL
    if constants.esp_fails and found is not None:
        return EXIT_STATISTICAL
    return EXIT_OK


def _task_stationary(cfg: ExperimentConfig, env, constants, out: dict) -> int:
    tol = float(cfg.options.get("tol", 1e-9))
    horizons = [int(h) for h in cfg.options.get("horizons", [1, 2, 3, 4, 5])]
    sol = solve_stationary_state(env, 0, tol=tol)
    out["stationary"] = {
        "converged": sol.converged,
        "back_depth": sol.back_depth,
        "cauchy_gap": sol.cauchy_gap,
        "state": [[[z.real, z.imag] for z in row] for row in sol.state.tolist()],
    }
    if not sol.converged:
        return EXIT_NUMERICAL
    residual = verify_stationarity(env, 0, horizons, tol=tol)
    out["stationary"]["max_residual"] = residual
    out["stationary"]["horizons"] = horizons
    if residual > 10 * tol:
        return EXIT_NUMERICAL
    return EXIT_OK


def _task_forgetting(cfg: ExperimentConfig, env, constants, out: dict, out_dir: Path | None) -> int:
    n_values = [int(n) for n in cfg.options.get("n_values", range(1, 16))]
    n_env = int(cfg.options.get("env_samples", 2000))
    theta_name = cfg.options.get("theta", "plus")
    theta = lambda e: _initial_state(theta_name, e, constants)  # noqa: E731
    est = estimate_beta(env, theta, n_values, n_env, seed=cfg.seed)
    rows = beta_report_rows(est, constants.r_bound)
    out["forgetting"] = {
        "n_values": list(est.n_values),
        "beta_hat": est.beta_hat.tolist(),
        "stderr": est.stderr.tolist(),
        "bound": [r[3] for r in rows],
        "bound_desc": constants.r_bound_desc,
        "fitted_rate": est.fitted_rate,
        "theta": theta_name,
    }
    if out_dir is not None:
        _write_csv(out_dir / "forgetting.csv", ["n", "beta_hat", "stderr", "bound"], rows)
    if constants.r_bound is not None:
        for n, beta, se, bound in rows:
            if beta > bound + 3.0 * se + 1e-12:
                out["forgetting"]["violated_at"] = n
                return EXIT_STATISTICAL
    return EXIT_OK


def _task_clt(cfg: ExperimentConfig, env, constants, out: dict, out_dir: Path | None) -> int:
    inst = env.instrument_at(1)
    patterns = [parse_pattern(inst.labels, p) for p in _default_patterns(cfg, env)]
    m_max = max(len(p) for p in patterns)
    rho0 = _initial_state(cfg.options.get("initial", "stationary"), env, constants)
    records = sample_records(env, 0, rho0, cfg.n_steps + m_max - 1, cfg.n_trajectories, cfg.seed,
                             workers=cfg.threads)
    if cfg.options.get("dump_records") and out_dir is not None:
        dump_records(out_dir / "records.txt", records)
    alpha_level = float(cfg.options.get("alpha_level", 0.01))
    code = EXIT_OK
    out["clt"] = {}
    for text, pattern in zip(_default_patterns(cfg, env), patterns):
        ind = pattern_indicators(records, pattern)[:, : cfg.n_steps]
        # exact centering from the enumeration oracle where the environment is fixed
        mu_exact = exact_pattern_mean(env, 0, rho0, pattern) if env.kind == "deterministic" else None
        report = clt_report(ind, mu=mu_exact, lattice_correction=True,
                            dither_seed=derive_seed(cfg.seed, 0xD1, len(text)))
        entry = report.to_dict()
        grid = [n for n in (cfg.n_steps // 4, cfg.n_steps // 2, cfg.n_steps) if n >= 1]
        entry["var_convergence"] = variance_convergence_check(ind, report.mu_hat, grid).tolist()
        entry["var_grid"] = grid
        if report.degenerate:
            entry["passed"] = report.max_abs_normalized <= float(cfg.options.get("degenerate_eps", 1e-8))
        else:
            agree = abs(report.sigma2_series - report.sigma2_batch) <= 0.15 * max(
                report.sigma2_series, report.sigma2_batch
            )
            var_ok = abs(entry["var_convergence"][-1] - report.sigma2_series) <= 0.10 * report.sigma2_series
            entry["passed"] = bool(report.ks_pvalue > alpha_level and agree and var_ok)
        out["clt"][text] = entry
        if not entry["passed"]:
            code = EXIT_STATISTICAL
        if out_dir is not None:
            _write_csv(
                out_dir / f"normalized_{text.replace(',', '-')}.csv",
                ["normalized_sum"],
                [(float(x),) for x in report.normalized_samples],
            )
    return code


def _task_couple(cfg: ExperimentConfig, env, constants, out: dict, out_dir: Path | None) -> int:
    a1 = check_A1_env(env, seed=cfg.seed)
    if not a1.passed:
        out["couple"] = {"a1": False, "reason": a1.reason}
        return EXIT_NUMERICAL
    L = constants.L or 1
    eps = overlap_criterion(env, int(cfg.options.get("overlap_samples", 200)), L,
                            label_map=a1.label_map, seed=cfg.seed)
    d = env.instrument_at(1).dim
    theta = lambda e: basis_state(d, 0)  # noqa: E731
    eta = lambda e: basis_state(d, d - 1)  # noqa: E731
    runs = int(cfg.options.get("runs", 10_000))
    n_blocks = int(cfg.options.get("n_blocks", 60))
    stats = simulate_coalescence(
        env, theta, eta, L, n_blocks, runs, seed=cfg.seed, label_map=a1.label_map, epsilon=eps
    )
    mean_bound = L / eps + 1.0
    out["couple"] = {
        "L": L,
        "epsilon": eps,
        "runs": runs,
        "mean_t_out": stats.mean_t_out,
        "stderr_t_out": stats.stderr_t_out,
        "mean_bound": mean_bound,
        "tail": {r: stats.tail(r) for r in range(1, 11)},
        "inconsistent": stats.inconsistent,
        "note": "failure of the empirical criterion does not refute admissibility; "
        "only the block coupling is exhibited",
    }
    if out_dir is not None:
        _write_csv(
            out_dir / "coalescence.csv",
            ["run_id", "R_star", "T_out"],
            [(i, int(r), int(t)) for i, (r, t) in enumerate(zip(stats.r_star, stats.t_out))],
        )
    if stats.inconsistent or stats.mean_t_out > mean_bound + 3.0 * stats.stderr_t_out:
        return EXIT_STATISTICAL
    for r in range(1, 11):
        bound = (1.0 - eps) ** r
        se = np.sqrt(max(bound * (1.0 - bound) / runs, 1e-12))
        if stats.tail(r) > bound + 3.0 * se:
            return EXIT_STATISTICAL
    return EXIT_OK


def _task_report(cfg: ExperimentConfig, env, constants, out: dict, out_dir: Path | None) -> int:
    code = EXIT_OK
    small = dict(cfg.options)
    small.setdefault("env_samples", 200)
    small.setdefault("runs", 2000)
    sub = ExperimentConfig(
        task="report",
        model=cfg.model,
        patterns=cfg.patterns,
        n_steps=min(cfg.n_steps, 1000),
        n_trajectories=min(cfg.n_trajectories, 2000),
        seed=cfg.seed,
        threads=cfg.threads,
        out=cfg.out,
        options=small,
    )
    for fn in (_task_validate, _task_esp, _task_stationary):
        code = max(code, fn(sub, env, constants, out))
    if constants.r_bound is not None or cfg.options.get("force_forgetting"):
        code = max(code, _task_forgetting(sub, env, constants, out, out_dir))
    code = max(code, _task_clt(sub, env, constants, out, out_dir))
    a1 = check_A1_env(env, seed=cfg.seed)
    if a1.passed:
        code = max(code, _task_couple(sub, env, constants, out, out_dir))
    profile = env.mixing_profile()
    if constants.r_bound is not None:
        out["skew_mixing_bound_n10"] = skew_mixing_bound(profile, constants.r_bound, 10)
        _, converged = summability_report(profile, constants.r_bound, delta=1.0, n_max=200)
        out["summability_delta1"] = {"converged": converged, "note": "delta=1 representative exponent"}
    decay = contraction_decay(env, 0, [1, 2, 4, 8], n_samples=60, seed=cfg.seed)
    out["contraction_decay"] = {
        "values": {n: v for n, v in decay},
        "note": "estimate (lower bound); the exact supremum is not computed",
    }
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qtraj", description=__doc__, allow_abbrev=False)
    sub = parser.add_subparsers(dest="task", required=True)
    for task in TASKS:
        p = sub.add_parser(task, allow_abbrev=False)
        p.add_argument("--model", help="model name from the zoo")
        p.add_argument("--config", help="TOML experiment config")
        p.add_argument("--seed", type=int)
        p.add_argument("--steps", type=int)
        p.add_argument("--trajectories", type=int)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--out", help="output directory")
        p.add_argument("--pattern", action="append", default=None)
    return parser


def _coerce(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def _merge_config(args, extra_params: dict) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config)
        cfg = ExperimentConfig(
            task=args.task,
            model=cfg.model if not args.model else ModelSpec(args.model, extra_params, cfg.model.env),
            patterns=tuple(args.pattern) if args.pattern else cfg.patterns,
            n_steps=args.steps or cfg.n_steps,
            n_trajectories=args.trajectories or cfg.n_trajectories,
            seed=cfg.seed if args.seed is None else args.seed,
            threads=args.threads or cfg.threads,
            out=args.out or cfg.out,
            options=cfg.options,
        )
    else:
        if not args.model:
            raise ConfigError("either --model or --config is required")
        cfg = ExperimentConfig(
            task=args.task,
            model=ModelSpec(args.model, extra_params),
            patterns=tuple(args.pattern) if args.pattern else (),
            n_steps=args.steps or 2000,
            n_trajectories=args.trajectories or 5000,
            seed=args.seed if args.seed is not None else 0,
            threads=args.threads or 0,
            out=args.out,
        )
    if args.config and extra_params and not args.model:
        params = dict(cfg.model.params)
        params.update(extra_params)
        cfg = ExperimentConfig(
            task=cfg.task,
            model=ModelSpec(cfg.model.name, params, cfg.model.env),
            patterns=cfg.patterns,
            n_steps=cfg.n_steps,
            n_trajectories=cfg.n_trajectories,
            seed=cfg.seed,
            threads=cfg.threads,
            out=cfg.out,
            options=cfg.options,
        )
    return cfg.validated()


def run(cfg: ExperimentConfig) -> tuple[int, dict]:
    """Run one task; returns (exit_code, result payload). Raises ConfigError on bad configs."""
    from .models import ConstructionError

    started = time.time()
    try:
        env, constants = construct(cfg.model)
    except ConstructionError as exc:
        raise ConfigError(str(exc)) from exc
    out: dict = {"task": cfg.task, "model": cfg.model.name, "seed": cfg.seed}
    out_dir = Path(cfg.out) if cfg.out else None
    try:
        if cfg.task == "validate":
            code = _task_validate(cfg, env, constants, out)
        elif cfg.task == "esp":
            code = _task_esp(cfg, env, constants, out)
        elif cfg.task == "stationary":
            code = _task_stationary(cfg, env, constants, out)
        elif cfg.task == "forgetting":
            code = _task_forgetting(cfg, env, constants, out, out_dir)
        elif cfg.task == "clt":
            code = _task_clt(cfg, env, constants, out, out_dir)
        elif cfg.task == "couple":
            code = _task_couple(cfg, env, constants, out, out_dir)
        elif cfg.task == "report":
            code = _task_report(cfg, env, constants, out, out_dir)
        else:
            raise ConfigError(f"unknown task {cfg.task!r}")
    except NumericalFailure as exc:
        out["error"] = str(exc)
        code = EXIT_NUMERICAL
    out["exit_code"] = code
    out["meta"] = {"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime(started))}
    if out_dir is not None:
        _write_json(out_dir / f"{cfg.task}.json", out)
    return code, out


def main(argv=None) -> int:
    parser = build_parser()
    args, unknown = parser.parse_known_args(argv)
    extra: dict = {}
    i = 0
    while i < len(unknown):
        tok = unknown[i]
        if tok.startswith("--") and i + 1 < len(unknown):
            extra[tok[2:].replace("-", "_")] = _coerce(unknown[i + 1])
            i += 2
        else:
            print(f"qtraj: unrecognized argument {tok!r}", file=sys.stderr)
            return EXIT_CONFIG
    try:
        cfg = _merge_config(args, extra)
        code, out = run(cfg)
    except ConfigError as exc:
        print(f"qtraj: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    json.dump(out, sys.stdout, indent=2, sort_keys=True, default=_json_default)
    print()
    return code


if __name__ == "__main__":
    sys.exit(main())
