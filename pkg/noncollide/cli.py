"""Command line: check, run, ensemble and validate.

Exit codes are the machine contract:

    0  all conditions pass / run finished / every criterion passed
    1  some condition or criterion failed
    2  no failure, but some condition could not be decided
    3  invalid configuration
    4  simulation or I/O error

Logs go to stderr; stdout carries only the JSON condition report of
``check``.
"""

import functools
import logging
import sys
from pathlib import Path
from typing import Callable, Optional

import click

from noncollide import __version__
from noncollide.analysis import moment_report
from noncollide.conditions import ConditionReport, check_preset
from noncollide.config import DEFAULT_SEED, OUTPUT_DIR, validate_config
from noncollide.errors import ConfigError, NoncollideError, UnsupportedPresetError
from noncollide.integrate import simulate, simulate_ensemble
from noncollide.output import default_path, report_json, write_ensemble_json, write_trajectory_csv
from noncollide.run_config import RunConfig, load_config
from noncollide.utils.logging_setup import setup_logging
from noncollide.utils.noise import NoisePath

logger = logging.getLogger(__name__)

EXIT_CONFIG_ERROR = 3
EXIT_RUNTIME_ERROR = 4


def _guarded(command: Callable) -> Callable:
    """Map errors onto exit codes."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except ConfigError as e:
            logger.error(str(e))
            sys.exit(EXIT_CONFIG_ERROR)
        except (NoncollideError, OSError) as e:
            logger.error(f"{type(e).__name__}: {e}")
            sys.exit(EXIT_RUNTIME_ERROR)

    return wrapper


def _load(config_path: str, seed: Optional[int]) -> RunConfig:
    cfg = load_config(config_path).with_seed(seed)
    if cfg.seed_defaulted and seed is None:
        logger.warning(f"Config has no seed; using default {DEFAULT_SEED} (recorded in the output echo)")
    return cfg


def _warn_on_conditions(cfg: RunConfig) -> ConditionReport:
    report = check_preset(cfg.coefficient_set())
    if report.status != "pass":
        logger.warning(f"Conditions {report.status} for {cfg.system.kind} (failed: {report.failed()}); "
                       f"non-collision is not guaranteed")
    return report


config_option = click.option("--config", "config_path", required=True,
                             type=click.Path(exists=True, dir_okay=False), help="Run config (YAML)")
seed_option = click.option("--seed", type=int, default=None, help="Override the config seed")
out_option = click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file")


@click.group()
@click.version_option(__version__, prog_name="noncollide")
@click.option("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
@click.option("--json-logs/--plain-logs", default=None, help="Structured JSON log lines on stderr")
def cli(log_level: Optional[str], json_logs: Optional[bool]):
    """Simulate and verify non-colliding particle systems."""
    setup_logging(log_level, json_logs)
    try:
        validate_config()
    except ValueError as e:
        logger.error(str(e))
        sys.exit(EXIT_CONFIG_ERROR)


@cli.command()
@config_option
@seed_option
@out_option
@_guarded
def check(config_path: str, seed: Optional[int], out: Optional[str]):
    """Check the well-posedness conditions and print the JSON report."""
    cfg = _load(config_path, seed)
    report = check_preset(cfg.coefficient_set())
    text = report_json(report)
    click.echo(text)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n", encoding="utf-8")
    logger.info(f"Conditions: {report.status} ({report.method})")
    sys.exit(report.exit_code)


@cli.command()
@config_option
@seed_option
@out_option
@_guarded
def run(config_path: str, seed: Optional[int], out: Optional[str]):
    """Simulate one path and write the trajectory CSV."""
    cfg = _load(config_path, seed)
    _warn_on_conditions(cfg)
    cs = cfg.coefficient_set()
    traj = simulate(cs, cfg.initial_point(), cfg.T, cfg.step_control(), NoisePath.for_path(cfg.seed, 0, cs.p))
    write_trajectory_csv(traj, cfg, out or default_path(cfg, "run"))
    sys.exit(0)


@cli.command()
@config_option
@seed_option
@out_option
@click.option("--workers", type=int, default=None, help="Worker processes (does not change results)")
@_guarded
def ensemble(config_path: str, seed: Optional[int], out: Optional[str], workers: Optional[int]):
    """Simulate n_paths paths and write the statistics JSON."""
    cfg = _load(config_path, seed)
    report = _warn_on_conditions(cfg)
    cs = cfg.coefficient_set()
    x0 = cfg.initial_point()
    stats = simulate_ensemble(cs, x0, cfg.T, cfg.step_control(), cfg.n_paths, cfg.seed,
                              workers=workers or cfg.workers)
    extra = {"conditions": report.status}
    try:
        extra["moment"] = moment_report(stats, cs, cfg.T, x0=x0,
                                        growth_constant=report.constants.get("C2_c")).model_dump()
    except UnsupportedPresetError:
        logger.info(f"No closed-form moment law for {cs.kind}")
    write_ensemble_json(stats, cfg, out or default_path(cfg, "ensemble"), extra=extra)
    sys.exit(0)


@cli.command()
@seed_option
@out_option
@click.option("--full", is_flag=True, help="Run at the documented full sample sizes")
@click.option("--only", multiple=True, help="Run only this criterion id (repeatable)")
@_guarded
def validate(seed: Optional[int], out: Optional[str], full: bool, only: tuple):
    """Run the acceptance suite and write the JSON scorecard."""
    from noncollide.validation.workflow import ValidationWorkflow

    try:
        workflow = ValidationWorkflow(full=full, only=only)
    except ValueError as e:
        raise ConfigError([f"--only: {e}"]) from e
    scorecard = workflow.run(DEFAULT_SEED if seed is None else seed)
    path = scorecard.write(out or OUTPUT_DIR / f"scorecard_{scorecard.scale}.json")
    logger.info(f"Scorecard written to {path}: {'PASS' if scorecard.passed else 'FAIL'}")
    sys.exit(scorecard.exit_code)


def main():
    cli()


if __name__ == "__main__":
    main()
