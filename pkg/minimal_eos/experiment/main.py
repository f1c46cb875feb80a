"""main module combines config, distributor, runner, logger and writers into the command line operations"""

import functools
import logging

import fsspec
import pandas as pd

from minimal_eos.analysis import CheckResult, gfs_bounds
from minimal_eos.dynamics import gfs_analytic, gfs_interval
from minimal_eos.errors import ConfigError, DivergedError, EmptyRegionError, PreconditionError
from minimal_eos.experiment.config import apply_overrides, resolve_config
from minimal_eos.experiment.distributor import make_distributor
from minimal_eos.experiment.logger import LoggerReader, LoggerWriter
from minimal_eos.experiment.runner import Runner, single_cell, summary_frame, sweep_cells
from minimal_eos.experiment.verify import verify_trajectory
from minimal_eos.experiment.writer import ReportWriter, frame_to_csv_text, read_trajectory_csv
from minimal_eos.regions import PREDICATES, SAMPLERS

LOGGER = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def exit_codes(command):
    """map the error hierarchy to exit codes, the wrapped command returns its own code otherwise"""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (ConfigError, PreconditionError, EmptyRegionError) as e:
            print(f"error: {e}")
            return EXIT_CONFIG
        except DivergedError as e:
            print(f"diverged: {e}")
            return EXIT_DIVERGED

    return wrapper


def _run_config(config, preset, mode=None, **overrides):
    cfg = resolve_config(config=config, preset=preset, **overrides)
    if mode is not None:
        cfg = apply_overrides(cfg, {"mode": mode})
    return cfg


def _run_single(run_config, out, progress, force_report=False):
    runner = Runner(run_config, out, progress=progress, force_report=force_report)
    result = runner(single_cell(run_config))
    status = "diverged" if result.diverged else {None: "done", True: "PASS", False: "FAIL"}[result.passed]
    print(f"{result.name}: {status} ; final loss {result.final_loss:.6e} ; outputs in {out}")
    if result.tag:
        print(f"{result.name}: {result.tag}")
    if result.diverged:
        return EXIT_DIVERGED
    return EXIT_VERIFY_FAILED if result.passed is False else EXIT_PASS


@exit_codes
def simulate(
    config=None,
    preset=None,
    eta=None,
    steps=None,
    seed=None,
    out="out",
    unclipped=None,
    clip_variant=None,
    progress=False,
):
    """gradient descent run (or the configured mode) writing csv, svg and report"""
    run_config = _run_config(
        config, preset, eta=eta, steps=steps, seed=seed, unclipped=unclipped, clip_variant=clip_variant
    )
    return _run_single(run_config, out, progress)


@exit_codes
def gf(config=None, preset=None, eta=None, seed=None, out="out", grad_tol=None, max_gf_steps=None):
    """gradient flow from the configured initial point until the gradient vanishes"""
    run_config = _run_config(
        config, preset, mode="gf", eta=eta, seed=seed, grad_tol=grad_tol, max_gf_steps=max_gf_steps
    )
    return _run_single(run_config, out, progress=False)


@exit_codes
def constrained(config=None, preset=None, eta=None, steps=None, seed=None, out="out", progress=False):
    """projected descent on the stable set from the configured initial point"""
    run_config = _run_config(config, preset, mode="constrained", eta=eta, steps=steps, seed=seed)
    return _run_single(run_config, out, progress)


@exit_codes
def gfs(config=None, preset=None, eta=None, seed=None):
    """print the analytic gradient flow solution sharpness of the initial point and its bounds"""
    run_config = _run_config(config, preset, eta=eta, seed=seed)
    cfg = run_config.model_config()
    p = run_config.initial_params()
    estimate = gfs_analytic(cfg, p)
    bounds = gfs_bounds(cfg, p)
    print(f"initial point {p}")
    print(f"gamma {estimate.gamma:.16e}")
    print(f"alpha_inf^2 {estimate.alpha_inf_sq:.16e}")
    print(f"phi {estimate.phi:.16e} (2/eta = {2.0 / cfg.eta:.6g})")
    print(f"phi bounds [{bounds.lower:.16e}, {bounds.upper:.16e}]")
    interval = gfs_interval(cfg, p)
    if interval is not None:
        print(f"initial phi interval [{interval[0]:.16e}, {interval[1]:.16e}]")
    return EXIT_PASS


@exit_codes
def sample_init(config=None, preset=None, eta=None, seed=None, sampler=None, count=1, out=None):
    """draw initial points from a region; prints them, or writes a csv when out is given"""
    run_config = _run_config(config, preset, eta=eta, seed=seed, sampler=sampler)
    cfg = run_config.model_config()
    draw = SAMPLERS[run_config.sampler]
    predicate = PREDICATES[run_config.sampler]
    rows = []
    for i in range(int(count)):
        p = draw(cfg, run_config.seed + i)
        if not predicate(cfg, p).member:
            raise EmptyRegionError(f"sampled point {p} left {run_config.sampler}")
        rows.append({"seed": run_config.seed + i, "alpha": p.alpha, "beta1": p.beta1, "beta2": p.beta2})
    text = frame_to_csv_text(pd.DataFrame(rows, columns=["seed", "alpha", "beta1", "beta2"]))
    if out is None:
        print(text, end="")
    else:
        fs, relative_path = fsspec.core.url_to_fs(out)
        fs.makedirs(relative_path, exist_ok=True)
        path = f"{relative_path}/{run_config.run_name}.{run_config.sampler}.samples.csv"
        with fs.open(path, "w") as f:
            f.write(text)
        print(f"{len(rows)} points from {run_config.sampler} written to {path}")
    return EXIT_PASS


@exit_codes
def verify(
    config=None,
    preset=None,
    eta=None,
    steps=None,
    seed=None,
    out="out",
    unclipped=None,
    clip_variant=None,
    replay=None,
    progress=False,
):
    """
    Run the applicable verification suite and write the report.

    With `replay`, the trajectory is reloaded from that csv instead of simulated;
    stored values that disagree with recomputation fail the run.
    """
    run_config = _run_config(
        config, preset, eta=eta, steps=steps, seed=seed, unclipped=unclipped, clip_variant=clip_variant
    )
    if replay is None:
        return _run_single(run_config, out, progress, force_report=True)

    cfg = run_config.model_config()
    replayed = read_trajectory_csv(replay, cfg, run_config.clip_variant, run_config.unclipped)
    report, _ = verify_trajectory(run_config, replayed.trajectory)
    first = replayed.mismatches[0] if replayed.mismatches else None
    note = ""
    if first is not None:
        note = f"{len(replayed.mismatches)} mismatches, first at t={first[0]} in column {first[1]}"
    report.checks.insert(
        0,
        CheckResult(
            name="csv_replay",
            bound="stored steps and derived values reproduce within 1e-12",
            passed=replayed.consistent,
            first_violation=None if first is None else first[0],
            worst_slack=0.0 if replayed.consistent else -float(len(replayed.mismatches)),
            note=note,
        ),
    )
    name = f"{run_config.run_name}.replay"
    header = [f"replay of {replay}", f"lambda1 {cfg.lambda1} lambda2 {cfg.lambda2} eta {cfg.eta}"]
    ReportWriter(out)(name, report, header)
    status = "PASS" if report.passed else "FAIL"
    print(f"{name}: {status} ; {len(report.failed())} failed checks ; report in {out}")
    return EXIT_PASS if report.passed else EXIT_VERIFY_FAILED


def _as_list(value):
    """fire hands over a scalar, a tuple or the raw comma separated text; all become comma separated text"""
    if value is None or isinstance(value, str):
        return value
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return str(value)


@exit_codes
def sweep(
    config=None,
    preset=None,
    etas=None,
    seeds=None,
    steps=None,
    out="out",
    unclipped=None,
    clip_variant=None,
    distribution_strategy="sequential",
    processes=None,
    wandb_project="minimal_eos",
    enable_wandb=False,
):
    """
    One run per (eta, seed), cells distributed over the chosen strategy.

    The summary csv keeps the input order; divergent cells are recorded in their row.
    """
    run_config = _run_config(
        config,
        preset,
        steps=steps,
        unclipped=unclipped,
        clip_variant=clip_variant,
        sweep_etas=_as_list(etas),
        sweep_seeds=_as_list(seeds),
    )
    eta_list = run_config.sweep_etas or [run_config.eta]
    seed_list = run_config.sweep_seeds or [run_config.seed]
    cells = sweep_cells(run_config, [float(e) for e in eta_list], [int(s) for s in seed_list])
    print(f"sweep of {len(cells)} cells with the {distribution_strategy} strategy")

    stats_folder = out + "/stats"
    runner = Runner(
        run_config,
        out,
        logger_builder=functools.partial(LoggerWriter, stats_folder=stats_folder),
        force_report=True,
    )
    distributor = make_distributor(distribution_strategy, cells, runner, processes)
    results = distributor()
    LoggerReader(stats_folder, wandb_project=wandb_project, enable_wandb=enable_wandb).log()

    fs, relative_path = fsspec.core.url_to_fs(out)
    fs.makedirs(relative_path, exist_ok=True)
    summary_path = f"{relative_path}/{run_config.run_name}.summary.csv"
    with fs.open(summary_path, "w") as f:
        f.write(frame_to_csv_text(summary_frame(results)))
    print(f"summary written to {summary_path}")

    if any(r.diverged or r.passed is False for r in results):
        return EXIT_VERIFY_FAILED
    return EXIT_PASS
