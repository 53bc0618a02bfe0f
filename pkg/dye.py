import argparse
import logging
import os.path as osp
import sys

import numpy as np

sys.path.insert(0, osp.join(osp.dirname(osp.abspath(__file__)), "code", "src"))

from dyestk import invariants  # noqa: E402
from dyestk.analysis import step_bounds  # noqa: E402
from dyestk.config_manager import ConfigManager  # noqa: E402
from dyestk.envelope import evaluate  # noqa: E402
from dyestk.exceptions import DyeError, BadConfig, NotConverged, EXIT_OK, EXIT_NUMERICAL, EXIT_INVARIANT  # noqa: E402
from dyestk.id_gen import generate_run_id  # noqa: E402
from dyestk.json_util import write_json, dumps_report, write_trajectory_csv, write_envelope_csv, \
    write_trials_csv  # noqa: E402
from dyestk.run_config import RunConfig, parse_config, start_point  # noqa: E402
from dyestk.saddle_lab import mc_run, discovered_attractors  # noqa: E402
from dyestk.splitting import run  # noqa: E402

log = logging.getLogger(__name__)

COMMANDS = ("solve", "envelope", "check", "saddle-mc", "bounds")


def load_run_config(conf: ConfigManager) -> RunConfig:
    """
    Read and validate the run config named on the command line, applying --seed and --q-at-z.
    """
    if not osp.exists(conf.args.config):
        raise BadConfig("config file not found: %s" % conf.args.config)
    with open(conf.args.config, "r") as f:
        config = parse_config(f.read(), conf.defaults)
    if conf.args.seed is not None:
        config = config.with_seed(conf.args.seed)
    else:
        conf.setup_seed(config.seed)
    if conf.args.q_at_z:
        config = config.with_q_at_z(True)
    return config


def _header(command: str, config: RunConfig) -> dict:
    return {"command": command, "run_id": generate_run_id(command, config.document, config.seed),
            "problem": config.problem_name, "seed": config.seed}


def _emit(conf: ConfigManager, file_name: str, report: dict) -> None:
    write_json(osp.join(conf.output_path, file_name), report)
    print(dumps_report(report))


def cmd_solve(conf: ConfigManager, config: RunConfig) -> int:
    """
    Run the splitting iteration from the configured start and save the trajectory.
    """
    problem, split, stop = config.problem, config.split, config.stop
    z0 = start_point(config)
    log.info("Solving %s in mode %s from z0=%s", problem.name, split.mode, z0.tolist())
    trajectory = run(problem, split, z0, tol=stop.tol, max_iter=stop.max_iter, escape_radius=stop.escape_radius)
    write_trajectory_csv(osp.join(conf.output_path, config.output.trajectory_csv), trajectory, problem.dimension)

    report = _header("solve", config)
    report.update(split.describe())
    report.update({"status": trajectory.status, "iterations": trajectory.iterations, "z0": z0,
                   "z_final": trajectory.final_z, "x_final": trajectory.final_x,
                   "residual": trajectory.final_residual})
    _emit(conf, "solve.json", report)
    if not trajectory.converged:
        raise NotConverged(trajectory.iterations, trajectory.final_residual)
    return EXIT_OK


def cmd_envelope(conf: ConfigManager, config: RunConfig) -> int:
    """
    Tabulate the envelope value and gradient norm over a grid of a 1-D or 2-D problem.
    """
    problem, grid = config.problem, config.output.grid
    if problem.dimension > 2:
        raise BadConfig("envelope grids are limited to 1-D and 2-D problems, got n=%d" % problem.dimension)
    axis = np.linspace(grid.lo, grid.hi, grid.points)
    mesh = np.meshgrid(*([axis] * problem.dimension), indexing="ij")
    points = [np.array(coords) for coords in zip(*(m.ravel() for m in mesh))]
    values, grad_norms = [], []
    for z in points:
        evaluation = evaluate(problem, config.split, z, with_hessian=False)
        values.append(evaluation.value)
        grad_norms.append(evaluation.gradient_norm)
    write_envelope_csv(osp.join(conf.output_path, config.output.envelope_csv), [p.tolist() for p in points], values,
                       grad_norms)
    log.info("Envelope of %s tabulated at %d points", problem.name, len(points))

    report = _header("envelope", config)
    report.update(config.split.describe())
    report.update({"grid": {"lo": grid.lo, "hi": grid.hi, "points": grid.points}, "evaluations": len(points),
                   "csv": config.output.envelope_csv, "min_envelope": min(values)})
    _emit(conf, "envelope.json", report)
    return EXIT_OK


def cmd_check(conf: ConfigManager, config: RunConfig) -> int:
    """
    Run the invariant suite. Exit code 0 iff every check passes.
    """
    grid = config.check.grid
    results = invariants.run_suite(config.problem, config.split, samples=config.check.samples, lo=grid.lo,
                                   hi=grid.hi, grid_points=grid.points, seed=config.seed, z0=start_point(config),
                                   max_iter=config.stop.max_iter)
    passed = invariants.suite_passed(results)
    report = _header("check", config)
    report.update({"passed": passed, "checks": [r.as_dict() for r in results]})
    _emit(conf, "check.json", report)
    if not passed:
        log.error("Invariant check failed: %s", ", ".join(r.name for r in results if not r.passed))
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_saddle_mc(conf: ConfigManager, config: RunConfig) -> int:
    """
    Run the Monte-Carlo avoidance experiment.
    """
    saddles = minimizers = None
    if config.experiment.discover:
        grid = config.experiment.discover_grid
        found_saddles, found_minimizers = discovered_attractors(config.problem, config.split, lo=grid.lo, hi=grid.hi,
                                                                points=grid.points)
        if config.experiment.saddles is None:
            saddles = found_saddles
        if config.experiment.minimizers is None:
            minimizers = found_minimizers
    outcome = mc_run(config.mc_config(saddles=saddles, minimizers=minimizers), workers=conf.workers)
    if config.output.per_trial_csv:
        write_trials_csv(osp.join(conf.output_path, config.output.trials_csv), outcome.results,
                         config.problem.dimension)
    report = _header("saddle-mc", config)
    report.update(outcome.summary())
    report.update({"mode": config.split.mode, "gamma": config.split.gamma,
                   "alpha": config.split.alpha, "saddles": outcome.saddles, "minimizers": outcome.minimizers})
    _emit(conf, "saddle_mc.json", report)
    return EXIT_OK


def cmd_bounds(conf: ConfigManager, config: RunConfig) -> int:
    """
    Report the relaxation bounds of the configured splitting.
    """
    report = _header("bounds", config)
    report.update(step_bounds(config.problem, config.split).as_dict())
    _emit(conf, "bounds.json", report)
    return EXIT_OK


HANDLERS = {"solve": cmd_solve, "envelope": cmd_envelope, "check": cmd_check, "saddle-mc": cmd_saddle_mc,
            "bounds": cmd_bounds}


def add_args(parser: argparse.ArgumentParser, conf: ConfigManager) -> None:
    """
    Add one sub-command per command, each with the shared flags.
    :param parser: Argument Parser
    :param conf: ConfigManager declaring the shared flags.
    """
    commands = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub = commands.add_parser(name, help=HANDLERS[name].__doc__.strip().splitlines()[0])
        conf.add_args(sub)


def main(argv=None) -> int:
    conf = ConfigManager()
    parser = argparse.ArgumentParser(description="Davis-Yin splitting and envelope toolkit.")
    add_args(parser, conf)
    args = parser.parse_args(argv)
    try:
        conf.process_args(args)
        config = load_run_config(conf)
        return HANDLERS[args.command](conf, config)
    except DyeError as e:
        log.error("%s: %s", type(e).__name__, e)
        return e.exit_code
    except Exception:
        log.exception("Unexpected failure in %s", args.command)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
