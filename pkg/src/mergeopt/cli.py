"""Command-line entry point: run / sweep / verify / bound / pareto / icv.

Configuration comes from an INI-style file (sections [run] and
[objectives]) overridable by flags; flags win. Exit codes are fixed for
scripting: 0 ok, 1 verify failure, 2 config error, 3 divergence.
"""

from __future__ import annotations

import configparser
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import analysis, verify
from .core import ConfigError, DivergenceError, RunConfig, validate_run_config
from .io import read_reward_csv, write_front_csv, write_trajectory_csv
from .objectives import (
    delta_star,
    make_quadratic_set,
    multiobjective_optimum,
    save_objective_set,
    weighted_loss,
)
from .optimizers import run_iterative_rs, run_morlhf, run_rewarded_soups
from .verify import morlhf_deviation

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3

OUTPUT_ROOT_ENV = "MERGEOPT_OUT_ROOT"

_ENGINES = {
    "iterative-rs": run_iterative_rs,
    "morlhf": run_morlhf,
    "rewarded-soups": run_rewarded_soups,
}


def _default_out(algorithm: str) -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs")) / algorithm


def _parse_floats(text: str):
    return tuple(float(x) for x in text.replace(",", " ").split())


def load_config_file(path) -> dict:
    """Read [run] and [objectives] sections into a flat option dict."""
    parser = configparser.ConfigParser()
    with open(path, encoding="ascii") as handle:
        parser.read_file(handle)
    options = {}
    run = parser["run"] if parser.has_section("run") else {}
    for key in ("seed", "dim", "num_objectives", "subset_size", "merge_frequency", "total_steps"):
        if key in run:
            options[key] = int(run[key])
    if "weights" in run:
        options["weights"] = _parse_floats(run["weights"])
    for key in ("lr_mode", "merge_strategy", "algorithm"):
        if key in run:
            options[key] = run[key].strip()
    if "learning_rate" in run and run["learning_rate"].strip():
        options["learning_rate"] = float(run["learning_rate"])
    if "final_merge_all" in run:
        options["final_merge_all"] = run.getboolean("final_merge_all")
    obj = parser["objectives"] if parser.has_section("objectives") else {}
    for key in ("mu", "l_smooth", "spread"):
        if key in obj:
            options[key] = float(obj[key])
    if "seed" in obj:
        options["objective_seed"] = int(obj["seed"])
    return options


def build_config(file_options: dict, flag_options: dict) -> tuple:
    """Merge file options and flags (flags win); returns (cfg, algorithm)."""
    merged = dict(file_options)
    merged.update({k: v for k, v in flag_options.items() if v is not None})
    algorithm = merged.pop("algorithm", "iterative-rs")
    cfg = RunConfig()
    for key, value in merged.items():
        if not hasattr(cfg, key):
            raise ConfigError([f"unknown option {key!r}"])
        cfg = replace(cfg, **{key: value})
    return cfg, algorithm


def execute_run(cfg: RunConfig, algorithm: str, out_dir: Path, instrument_lemma1=None) -> dict:
    """Run one experiment and persist trajectory, objectives and report.

    Returns the report dict; raises ConfigError / DivergenceError.
    """
    if algorithm not in _ENGINES:
        raise ConfigError([f"unknown algorithm {algorithm!r}"])
    violations = validate_run_config(cfg)
    if violations:
        raise ConfigError(violations)
    if instrument_lemma1 is None:
        instrument_lemma1 = (
            algorithm == "iterative-rs"
            and cfg.subset_size == cfg.num_objectives
            and cfg.lr_mode == "theorem"
        )
    cfg = replace(cfg, instrument_lemma1=instrument_lemma1)
    objective_seed = cfg.seed if cfg.objective_seed is None else cfg.objective_seed
    oset = make_quadratic_set(
        objective_seed,
        cfg.num_objectives,
        cfg.dim,
        cfg.mu,
        cfg.l_smooth,
        cfg.spread,
        weights=cfg.weights,
    )
    trajectory = _ENGINES[algorithm](oset, cfg)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_objective_set(out_dir / "objectives.txt", oset)
    write_trajectory_csv(out_dir / "trajectory.csv", trajectory, oset)

    theta_star = multiobjective_optimum(oset)
    optimum = weighted_loss(oset, theta_star)
    report = {
        "algorithm": algorithm,
        "final_gap": float(weighted_loss(oset, trajectory.final_merged) - optimum),
        "delta_star": float(delta_star(oset)),
        "grad_bound_estimate": analysis.estimate_gradient_bound(trajectory, oset),
        "wall_ms": trajectory.wall_ms,
    }
    if cfg.lr_mode == "theorem":
        bi = analysis.BoundInputs(
            mu=cfg.mu,
            l_smooth=cfg.l_smooth,
            grad_bound=report["grad_bound_estimate"],
            merge_frequency=cfg.merge_frequency,
            subset_size=cfg.subset_size,
            num_objectives=cfg.num_objectives,
            delta_star=report["delta_star"],
            dist_ref_sq=float(np.sum((trajectory.theta_ref - theta_star) ** 2)),
        )
        hetero, drift = analysis.bound_decomposition(bi, cfg.total_steps)
        report["bound_at_T"] = float(hetero + drift)
        report["A1"] = float(hetero)
        report["A2"] = float(drift)
    if algorithm == "iterative-rs" and cfg.merge_frequency == 1 and cfg.subset_size == cfg.num_objectives:
        report["morlhf_max_abs_deviation"] = morlhf_deviation(oset, cfg)

    lines = [
        "# gradient bound is estimated post-hoc from this run's own",
        "# trajectory; any bound below is circular in that constant.",
    ]
    lines += [f"{key} = {value!r}" if isinstance(value, float) else f"{key} = {value}"
              for key, value in report.items()]
    (out_dir / "report.txt").write_text("\n".join(lines) + "\n", encoding="ascii")
    return report


@click.group()
def main():
    """Multi-objective merge-and-fine-tune optimizer toolbox."""


_RUN_FLAGS = [
    click.option("--config", "config_path", type=click.Path(exists=True), default=None,
                 help="INI config file with [run] and [objectives] sections."),
    click.option("--algorithm", type=click.Choice(sorted(_ENGINES)), default=None),
    click.option("--seed", type=int, default=None),
    click.option("--dim", type=int, default=None),
    click.option("--num-objectives", "num_objectives", type=int, default=None),
    click.option("--subset-size", "subset_size", type=int, default=None),
    click.option("--merge-frequency", "merge_frequency", type=int, default=None),
    click.option("--total-steps", "total_steps", type=int, default=None),
    click.option("--weights", type=str, default=None, help="Comma/space separated simplex weights."),
    click.option("--lr-mode", "lr_mode", type=click.Choice(["theorem", "constant"]), default=None),
    click.option("--learning-rate", "learning_rate", type=float, default=None),
    click.option("--merge-strategy", "merge_strategy", type=click.Choice(["fixed", "selective"]), default=None),
    click.option("--mu", type=float, default=None),
    click.option("--l-smooth", "l_smooth", type=float, default=None),
    click.option("--spread", type=float, default=None),
    click.option("--objective-seed", "objective_seed", type=int, default=None),
    click.option("--final-merge-all/--final-merge-subset", "final_merge_all", default=None),
]


def _with_run_flags(fn):
    for flag in reversed(_RUN_FLAGS):
        fn = flag(fn)
    return fn


def _collect_config(config_path, weights, **flags):
    file_options = load_config_file(config_path) if config_path else {}
    if weights is not None:
        flags["weights"] = _parse_floats(weights)
    return build_config(file_options, flags)


def _fail_config(exc: ConfigError):
    for violation in exc.violations:
        click.echo(f"config error: {violation}", err=True)
    sys.exit(EXIT_CONFIG)


def _fail_diverged(exc: DivergenceError):
    click.echo(f"divergence at step {exc.step}", err=True)
    sys.exit(EXIT_DIVERGED)


@main.command("run")
@_with_run_flags
@click.option("--out", type=click.Path(), default=None, help="Output directory.")
def cmd_run(config_path, weights, out, **flags):
    """Run one experiment; writes trajectory.csv, objectives.txt, report.txt."""
    try:
        cfg, algorithm = _collect_config(config_path, weights, **flags)
        out_dir = Path(out) if out else _default_out(algorithm)
        report = execute_run(cfg, algorithm, out_dir)
    except ConfigError as exc:
        _fail_config(exc)
    except DivergenceError as exc:
        _fail_diverged(exc)
    click.echo(f"wrote {out_dir} (final_gap={report['final_gap']:.6g})")


@main.command("sweep")
@_with_run_flags
@click.option("--axis", type=click.Choice(["m", "M", "T", "seed"]), required=True)
@click.option("--values", type=str, required=True, help="Comma separated values for the axis.")
@click.option("--out", type=click.Path(), default=None, help="Output root directory.")
def cmd_sweep(config_path, weights, axis, values, out, **flags):
    """Run one experiment per axis value; emits per-value dirs + summary.csv."""
    axis_field = {"m": "merge_frequency", "M": "subset_size", "T": "total_steps", "seed": "seed"}[axis]
    try:
        base_cfg, algorithm = _collect_config(config_path, weights, **flags)
        value_list = [int(v) for v in values.replace(",", " ").split()]
        if not value_list:
            raise ConfigError(["sweep values list is empty"])
        for value in value_list:
            bad = validate_run_config(replace(base_cfg, **{axis_field: value}))
            if bad:
                raise ConfigError([f"value {value} on axis {axis}: {msg}" for msg in bad])
    except ConfigError as exc:
        _fail_config(exc)
    out_root = Path(out) if out else _default_out(f"sweep-{axis}")
    out_root.mkdir(parents=True, exist_ok=True)
    rows = []
    failure = None
    for value in value_list:
        cfg = replace(base_cfg, **{axis_field: value})
        try:
            report = execute_run(cfg, algorithm, out_root / f"{axis}_{value}")
        except (ConfigError, DivergenceError) as exc:
            failure = exc
            break
        rows.append(
            (
                value,
                report["final_gap"],
                report.get("bound_at_T", float("nan")),
                report.get("A1", float("nan")),
                report.get("A2", float("nan")),
                report["wall_ms"],
            )
        )
    with open(out_root / "summary.csv", "w", encoding="ascii") as handle:
        handle.write("value,final_gap,bound_T,A1,A2,wall_ms\n")
        for row in rows:
            handle.write(f"{row[0]},{row[1]!r},{row[2]!r},{row[3]!r},{row[4]!r},{row[5]!r}\n")
    if failure is not None:
        click.echo(f"sweep aborted after {len(rows)} values", err=True)
        if isinstance(failure, ConfigError):
            _fail_config(failure)
        _fail_diverged(failure)
    click.echo(f"wrote {out_root / 'summary.csv'} ({len(rows)} rows)")


@main.command("verify")
@click.option("--level", type=click.Choice(["fast", "full"]), default="fast")
@click.option("--json", "json_path", type=click.Path(), default=None,
              help="Also write the results as JSON.")
def cmd_verify(level, json_path):
    """Run the property battery; exit 0 iff every check passes."""
    results = verify.run_checks(level)
    for name, passed, detail in results:
        click.echo(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
    if json_path:
        payload = [{"name": n, "passed": p, "detail": d} for n, p, d in results]
        Path(json_path).write_text(json.dumps(payload, indent=2) + "\n", encoding="ascii")
    failed = [name for name, passed, _ in results if not passed]
    if failed:
        click.echo(f"first failing property: {failed[0]}", err=True)
        sys.exit(EXIT_VERIFY_FAIL)


@main.command("bound")
@click.option("--mu", type=float, required=True)
@click.option("--l-smooth", "l_smooth", type=float, required=True)
@click.option("--grad-bound", "grad_bound", type=float, required=True)
@click.option("--merge-frequency", "merge_frequency", type=int, required=True)
@click.option("--subset-size", "subset_size", type=int, required=True)
@click.option("--num-objectives", "num_objectives", type=int, required=True)
@click.option("--delta-star", "delta_star_value", type=float, required=True)
@click.option("--dist-ref-sq", "dist_ref_sq", type=float, required=True)
@click.option("--t-start", type=int, default=1)
@click.option("--t-end", type=int, required=True)
@click.option("--out", type=click.Path(), default=None, help="CSV output path (default stdout).")
def cmd_bound(mu, l_smooth, grad_bound, merge_frequency, subset_size, num_objectives,
              delta_star_value, dist_ref_sq, t_start, t_end, out):
    """Evaluate the closed-form gap bound over a range of step counts."""
    try:
        bi = analysis.BoundInputs(
            mu=mu,
            l_smooth=l_smooth,
            grad_bound=grad_bound,
            merge_frequency=merge_frequency,
            subset_size=subset_size,
            num_objectives=num_objectives,
            delta_star=delta_star_value,
            dist_ref_sq=dist_ref_sq,
        )
        if t_start < 1 or t_end < t_start:
            raise ValueError("need 1 <= t-start <= t-end")
    except ValueError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    lines = ["T,bound,A1,A2"]
    for t in range(t_start, t_end + 1):
        hetero, drift = analysis.bound_decomposition(bi, t)
        lines.append(f"{t},{hetero + drift!r},{hetero!r},{drift!r}")
    text = "\n".join(lines) + "\n"
    if out:
        Path(out).write_text(text, encoding="ascii")
        click.echo(f"wrote {out}")
    else:
        click.echo(text, nl=False)


@main.command("pareto")
@click.argument("rewards_csv", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), required=True, help="Front CSV output path.")
def cmd_pareto(rewards_csv, out):
    """Extract the non-dominated front of a reward CSV and its means."""
    try:
        sample_ids, matrix = read_reward_csv(rewards_csv)
        front = analysis.pareto_front(matrix)
        per_objective, overall = analysis.front_mean_rewards(matrix, front)
    except ValueError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    write_front_csv(out, sample_ids, matrix, front, per_objective, overall)
    click.echo(f"front size {len(front)} of {matrix.shape[0]}; overall mean {overall!r}")


@main.command("icv")
@click.argument("rewards_csv", type=click.Path(exists=True))
@click.option("--epsilon", type=float, default=1e-9, show_default=True)
def cmd_icv(rewards_csv, epsilon):
    """Print the inverse-coefficient-of-variation score of a reward CSV."""
    try:
        _, matrix = read_reward_csv(rewards_csv)
        score = analysis.icv_score(matrix, epsilon)
        guarded = analysis.icv_guarded_count(matrix, epsilon)
    except ValueError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    click.echo(f"icv = {score!r}")
    if guarded:
        click.echo(f"warning: {guarded} sample(s) hit the epsilon std guard", err=True)


if __name__ == "__main__":
    main()
