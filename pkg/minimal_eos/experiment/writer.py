"""writer module saves trajectories as csv, plots as svg and verification reports as text"""

import io
import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import List

import fsspec
import numpy as np
import pandas as pd

from minimal_eos.dynamics import Trajectory, gd_step, gd_step_unclipped, make_record
from minimal_eos.errors import DivergedError
from minimal_eos.model import Params

LOGGER = logging.getLogger(__name__)

CSV_COLUMNS = ["t", "alpha", "beta1", "beta2", "loss", "l1", "l2", "lhat", "sharpness", "cos_beta1", "clipped"]
FLOAT_FORMAT = "%.16e"
REPLAY_TOL = 1e-12


def trajectory_frame(traj):
    frame = pd.DataFrame({name: traj.column(name) for name in CSV_COLUMNS})
    frame["t"] = frame["t"].astype(np.int64)
    frame["clipped"] = frame["clipped"].astype(np.int64)
    return frame


def frame_to_csv_text(frame):
    """17 significant digits in fixed scientific notation, so equal inputs give equal bytes"""
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return buffer.getvalue()


class _FolderWriter:
    def __init__(self, output_folder):
        self.fs, self.output_folder = fsspec.core.url_to_fs(output_folder)
        self.fs.makedirs(self.output_folder, exist_ok=True)

    def _write_text(self, filename, text):
        path = self.output_folder + "/" + filename
        with self.fs.open(path, "w", encoding="utf-8") as f:
            f.write(text)
        LOGGER.debug(f"wrote {path}")
        return path


class CsvWriter(_FolderWriter):
    """the csv writer writes one file per trajectory or table"""

    def __call__(self, name, traj):
        return self.write_frame(name, trajectory_frame(traj))

    def write_frame(self, name, frame):
        return self._write_text(f"{name}.csv", frame_to_csv_text(frame))


class SvgWriter(_FolderWriter):
    def __call__(self, name, plot):
        return self._write_text(f"{name}.svg", plot.render())


def format_report(report, header=()):
    """one line per check: name | bound | worst slack | status"""
    lines = [f"# {h}" for h in header]
    for c in report.checks:
        slack = "n/a" if c.skipped else f"{c.worst_slack:.6e}"
        line = f"{c.name} | {c.bound} | {slack} | {c.status}"
        if c.first_violation is not None:
            line += f" | first violation at t={c.first_violation}"
        if c.note:
            line += f" | {c.note}"
        lines.append(line)
    lines.append(f"overall | all checks | - | {'PASS' if report.passed else 'FAIL'}")
    return "\n".join(lines) + "\n"


class ReportWriter(_FolderWriter):
    def __call__(self, name, report, header=()):
        return self._write_text(f"{name}.report.txt", format_report(report, header))


@dataclass
class ReplayResult:
    """a trajectory rebuilt from a csv and the stored values that disagree with recomputation"""

    trajectory: Trajectory
    mismatches: List[tuple] = field(default_factory=list)

    @property
    def consistent(self):
        return not self.mismatches


def _step_function(clip_variant, unclipped):
    if unclipped:
        return gd_step_unclipped
    return partial(gd_step, clip_variant=clip_variant)


def _close(stored, recomputed):
    return abs(stored - recomputed) <= REPLAY_TOL * max(1.0, abs(recomputed))


def read_trajectory_csv(path, cfg, clip_variant="cap", unclipped=False):
    """
    Reload a trajectory csv and check it against recomputation.

    Every row after the first must be the descent step of the stored row before
    it (same clip rule), and every derived column must match the values
    recomputed from (alpha, beta1, beta2). Disagreements beyond REPLAY_TOL
    (relative to max(1, |value|)) and broken step numbering are reported as
    mismatches (t, column, stored, recomputed), ordered by t.
    """
    with fsspec.open(path, "r", encoding="utf-8") as f:
        frame = pd.read_csv(f, float_precision="round_trip")
    missing = [c for c in CSV_COLUMNS if c not in frame.columns]
    if missing:
        raise ValueError(f"{path} lacks columns {missing}")
    step = _step_function(clip_variant, unclipped)
    traj = Trajectory(config=cfg, clip_variant=clip_variant, unclipped=unclipped)
    mismatches = []
    previous = None
    for i, row in enumerate(frame.itertuples(index=False)):
        if int(row.t) != i:
            mismatches.append((i, "t", float(row.t), float(i)))
        p = Params(float(row.alpha), float(row.beta1), float(row.beta2))
        clipped = bool(row.clipped)
        if previous is not None:
            mismatches.extend(_transition_mismatches(cfg, step, i, previous, p, clipped))
        traj.records.append(make_record(cfg, i, p, clipped))
        previous = p
    for name in CSV_COLUMNS[4:-1]:
        stored = frame[name].to_numpy(dtype=np.float64)
        recomputed = traj.column(name)
        bad = np.abs(stored - recomputed) > REPLAY_TOL * np.maximum(1.0, np.abs(recomputed))
        for i in np.flatnonzero(bad):
            mismatches.append((int(i), name, float(stored[i]), float(recomputed[i])))
    mismatches.sort(key=lambda m: m[0])
    if mismatches:
        first = mismatches[0][0]
        LOGGER.warning(f"{len(mismatches)} stored values of {path} disagree with recomputation, first at t={first}")
    return ReplayResult(trajectory=traj, mismatches=mismatches)


def _transition_mismatches(cfg, step, t, previous, p, clipped):
    try:
        outcome = step(cfg, previous)
    except DivergedError:
        return [(t, "step", math.nan, math.nan)]
    expected = outcome.next
    found = []
    for name in ("alpha", "beta1", "beta2"):
        stored, recomputed = getattr(p, name), getattr(expected, name)
        if not _close(stored, recomputed):
            found.append((t, name, stored, recomputed))
    if clipped != outcome.beta1_clipped:
        found.append((t, "clipped", float(clipped), float(outcome.beta1_clipped)))
    return found
