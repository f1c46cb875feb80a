"""The runner simulates one cell of an experiment, verifies it and writes its artifacts"""

import dataclasses
import logging
import math
import time
from dataclasses import dataclass
from typing import Optional

import pandas as pd

from minimal_eos.analysis import CheckResult, PhaseReport, detect_phases, fit_decay_slope
from minimal_eos.constrained import constrained_start, simulate_constrained
from minimal_eos.dynamics import gf_integrate, simulate
from minimal_eos.errors import DivergedError, NotConvergedError, PreconditionError
from minimal_eos.experiment.figures import constrained_figures, gf_figures, trajectory_figures
from minimal_eos.experiment.verify import diverged_report, verify_constrained_run, verify_gf_result, verify_trajectory
from minimal_eos.experiment.writer import CsvWriter, ReportWriter, SvgWriter
from minimal_eos.model import loss

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class Cell:
    index: int
    eta: float
    seed: int
    name: str


@dataclass
class CellResult:
    """outcome of one cell, one row of a sweep summary"""

    index: int
    eta: float
    seed: int
    name: str
    tag: str = ""
    phases: Optional[PhaseReport] = None
    slope: float = math.nan
    final_loss: float = math.nan
    max_sharpness: float = math.nan
    passed: Optional[bool] = None
    diverged: bool = False
    error: str = ""

    def row(self):
        phases = self.phases or PhaseReport()
        return {
            "eta": self.eta,
            "seed": self.seed,
            "t1": phases.t1,
            "t2": phases.t2,
            "t3": phases.t3,
            "t4": phases.t4,
            "slope": self.slope,
            "final_loss": self.final_loss,
            "max_sharpness": self.max_sharpness,
            "passed": "" if self.passed is None else str(self.passed).lower(),
            "diverged": str(self.diverged).lower(),
            "tag": self.tag,
            "error": self.error,
        }


def summary_frame(results):
    """rows in task order; missing phase times stay empty"""
    frame = pd.DataFrame([r.row() for r in results])
    for column in ("t1", "t2", "t3", "t4"):
        frame[column] = frame[column].astype("Int64")
    frame["seed"] = frame["seed"].astype("int64")
    return frame


def decay_slope(traj, phases):
    """fitted surrogate slope over [0, T4], or over the whole run when T4 is not reached; NaN below two points"""
    end = phases.t4 if phases.t4 is not None else len(traj) - 1
    if end < 1:
        LOGGER.info(f"decay slope skipped, the window [0, {end}] holds fewer than 2 records")
        return math.nan
    try:
        return fit_decay_slope(traj, (0, end))
    except PreconditionError:
        return math.nan


class Runner:
    """Runner class"""

    def __init__(self, run_config, output_folder, logger_builder=None, progress=False, force_report=False):
        self.run_config = run_config
        self.output_folder = output_folder
        self.logger_builder = logger_builder
        self.progress = progress
        self.force_report = force_report

    def __call__(self, cell):
        rc = dataclasses.replace(self.run_config, eta=cell.eta, seed=cell.seed)
        logger = self.logger_builder(cell.index) if self.logger_builder is not None else None
        if logger is not None:
            logger.start()
        result = CellResult(index=cell.index, eta=cell.eta, seed=cell.seed, name=cell.name)
        cfg = rc.model_config()
        p0 = rc.initial_params()
        result.tag = rc.region_tag()
        LOGGER.info(f"cell {cell.name}: mode {rc.mode}, eta {cell.eta}, seed {cell.seed}, start {p0}")

        if rc.mode == "gf":
            frame, figures, report, stats = self._gf(rc, cfg, p0, result)
        elif rc.mode == "constrained":
            frame, figures, report, stats = self._constrained(rc, cfg, p0, result)
        else:
            frame, figures, report, stats = self._gd(rc, cfg, p0, result)

        if report is not None:
            result.passed = report.passed and not result.diverged
        self._write(rc, cell.name, frame, figures, report, result)
        if logger is not None:
            stats["diverged"] = int(result.diverged)
            stats["failed"] = int(result.passed is False)
            logger(stats)
            logger.end()
        return result

    def _needs_report(self, rc):
        return self.force_report or "report" in rc.outputs

    def _gd(self, rc, cfg, p0, result):
        report = None
        try:
            traj = simulate(
                cfg, p0, rc.steps, clip_variant=rc.clip_variant, unclipped=rc.unclipped, progress=self.progress
            )
        except DivergedError as e:
            traj = e.partial
            result.diverged = True
            result.error = str(e)
            report = diverged_report(e)
        phases = detect_phases(traj)
        if not result.diverged and self._needs_report(rc):
            report, phases = verify_trajectory(rc, traj)
        result.phases = phases
        result.slope = decay_slope(traj, phases)
        result.final_loss = float(traj.column("loss")[-1])
        result.max_sharpness = float(traj.column("sharpness").max())
        figures = trajectory_figures(traj, rc) if "svg" in rc.outputs and not result.diverged else {}
        stats = {
            "steps": len(traj) - 1,
            "spikes": len(phases.spikes),
            "clipped": int(traj.column("clipped").sum()),
        }
        return traj, figures, report, stats

    def _gf(self, rc, cfg, p0, result):
        converged = True
        try:
            flow = gf_integrate(
                cfg, p0, grad_tol=rc.grad_tol, max_steps=rc.max_gf_steps, sample_every=rc.gf_sample_every
            )
        except NotConvergedError as e:
            flow = e.partial
            converged = False
            result.error = str(e)
        report = None
        if self._needs_report(rc):
            report = verify_gf_result(cfg, p0, flow)
            if not converged:
                report.checks.append(
                    CheckResult(
                        name="gf_converged", bound=f"grad sup norm <= {rc.grad_tol}", passed=False, note=result.error
                    )
                )
        terminal = flow.terminal
        result.final_loss = loss(cfg, terminal)
        frame = pd.DataFrame(
            {
                "step": [s.step for s in flow.samples],
                "time": [s.time for s in flow.samples],
                "alpha": [s.params.alpha for s in flow.samples],
                "beta1": [s.params.beta1 for s in flow.samples],
                "beta2": [s.params.beta2 for s in flow.samples],
                "loss": [loss(cfg, s.params) for s in flow.samples],
                "gamma": [s.params.alpha**2 - s.params.beta1**2 - s.params.beta2**2 for s in flow.samples],
            }
        )
        figures = gf_figures(cfg, flow) if "svg" in rc.outputs else {}
        return frame, figures, report, {"steps": flow.steps}

    def _constrained(self, rc, cfg, p0, result):
        start = constrained_start(cfg, p0, rc.product_bound)
        run = simulate_constrained(cfg, start, rc.steps, rc.product_bound, progress=self.progress)
        report = verify_constrained_run(cfg, run) if self._needs_report(rc) else None
        losses = run.losses(cfg)
        result.final_loss = float(losses[-1])
        frame = pd.DataFrame(
            {
                "t": list(range(len(run.states))),
                "alpha": [s.alpha for s in run.states],
                "beta2": [s.beta2 for s in run.states],
                "loss": losses,
            }
        )
        figures = constrained_figures(cfg, run) if "svg" in rc.outputs else {}
        return frame, figures, report, {"steps": rc.steps, "t_tilde": -1 if run.t_tilde is None else run.t_tilde}

    def _write(self, rc, name, table, figures, report, result):
        start_time = time.perf_counter()
        if "csv" in rc.outputs and table is not None:
            csv_writer = CsvWriter(self.output_folder)
            if isinstance(table, pd.DataFrame):
                csv_writer.write_frame(name, table)
            else:
                csv_writer(name, table)
        if figures:
            svg_writer = SvgWriter(self.output_folder)
            for suffix, plot in figures.items():
                svg_writer(f"{name}.{suffix}", plot)
        if report is not None and "report" in rc.outputs:
            header = [
                f"run {name} mode {rc.mode} clip_variant {rc.clip_variant}",
                f"lambda1 {rc.lambda1} lambda2 {rc.lambda2} eta {rc.eta} seed {rc.seed} steps {rc.steps}",
            ]
            if result.tag:
                header.append(result.tag)
            if result.diverged:
                header.append("diverged")
            ReportWriter(self.output_folder)(name, report, header)
        LOGGER.debug(f"artifacts of {name} written in {time.perf_counter() - start_time:.3f}s")


def single_cell(run_config):
    return Cell(index=0, eta=run_config.eta, seed=run_config.seed, name=run_config.run_name)


def sweep_cells(run_config, eta_list, seed_list):
    """one cell per (eta, seed), eta major, in input order"""
    cells = []
    for eta in eta_list:
        for seed in seed_list:
            name = f"{run_config.run_name}_eta{eta:.6g}_seed{seed}"
            cells.append(Cell(index=len(cells), eta=eta, seed=seed, name=name))
    return cells


__all__ = ["Cell", "CellResult", "Runner", "single_cell", "summary_frame", "sweep_cells"]
