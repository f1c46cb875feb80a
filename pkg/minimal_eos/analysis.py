"""analysis module: phase detection, theorem checks, decay fitting and abnormality detection over trajectories

Band checks allow an additive slack of BAND_TOL times the bound magnitude.
Monotonicity checks are strict with no tolerance.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from minimal_eos.dynamics import gfs_analytic
from minimal_eos.errors import PreconditionError
from minimal_eos.regions import in_X

LOGGER = logging.getLogger(__name__)

BAND_TOL = 1e-9
T4_AT_START_NOTE = "T4 = 0, the start is already past the surrogate window"


@dataclass
class PhaseReport:
    """phase times of a trajectory, None when the pattern does not occur"""

    t1: Optional[int] = None
    t2: Optional[int] = None
    t3: Optional[int] = None
    t4: Optional[int] = None
    spikes: List[int] = field(default_factory=list)


@dataclass(frozen=True)
class GfsBounds:
    lower: float
    upper: float


@dataclass
class CheckResult:
    """outcome of one check; slack is signed, negative means the bound is exceeded"""

    name: str
    bound: str
    passed: bool = True
    first_violation: Optional[int] = None
    worst_slack: float = math.inf
    skipped: bool = False
    note: str = ""

    @property
    def status(self):
        if self.skipped:
            return "SKIP"
        return "PASS" if self.passed else "FAIL"


@dataclass
class VerificationReport:
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def failed(self):
        return [c for c in self.checks if not c.passed]

    def check(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(f"no check named {name}")

    def extend(self, other):
        self.checks.extend(other.checks)
        return self

    @classmethod
    def merge(cls, *reports):
        merged = cls()
        for report in reports:
            merged.extend(report)
        return merged


@dataclass(frozen=True)
class AbnormalEvent:
    step: int
    kind: str
    value: float


@dataclass(frozen=True)
class DecayReference:
    """per-step loss ratios (1 - k lambda2 / lambda1)^2 for k = 4, 2, 1"""

    fast: float
    constrained: float
    slow: float

    @property
    def log_bracket(self):
        """the ratio bracket as per-step log decay slopes"""
        return math.log(self.fast), math.log(self.slow)

    @property
    def log_constrained(self):
        return math.log(self.constrained)


def decay_reference(cfg):
    ratio = cfg.lambda2 / cfg.lambda1
    return DecayReference(
        fast=(1.0 - 4.0 * ratio) ** 2,
        constrained=(1.0 - 2.0 * ratio) ** 2,
        slow=(1.0 - ratio) ** 2,
    )


def build_check(name, bound, steps, slack, ok, note=""):
    steps = np.asarray(steps, dtype=np.int64)
    slack = np.asarray(slack, dtype=np.float64)
    ok = np.asarray(ok, dtype=bool)
    if slack.size == 0:
        return CheckResult(name=name, bound=bound, note=note or "empty range")
    bad = np.flatnonzero(~ok)
    return CheckResult(
        name=name,
        bound=bound,
        passed=bad.size == 0,
        first_violation=int(steps[bad[0]]) if bad.size else None,
        worst_slack=float(np.min(slack)),
        note=note,
    )


def _at_least(name, bound_text, steps, value, lower):
    slack = value - lower
    return build_check(name, bound_text, steps, slack, slack >= -BAND_TOL * np.abs(lower))


def _at_most(name, bound_text, steps, value, upper):
    slack = upper - value
    return build_check(name, bound_text, steps, slack, slack >= -BAND_TOL * np.abs(upper))


def _increasing(name, bound_text, steps, values):
    """strict increase between consecutive entries, violations reported at the later step"""
    values = np.asarray(values, dtype=np.float64)
    diff = np.diff(values)
    return build_check(name, bound_text, np.asarray(steps)[1:], diff, diff > 0.0)


def _skipped(name, bound_text, note):
    return CheckResult(name=name, bound=bound_text, skipped=True, note=note)


def _require_x_start(traj):
    if len(traj) == 0:
        raise PreconditionError("empty trajectory")
    report = in_X(traj.config, traj[0].params)
    if not report.member:
        raise PreconditionError(f"initial point is not in X(eta): violated {report.violated_names()}")


def _first_true(mask):
    idx = np.flatnonzero(mask)
    return int(idx[0]) if idx.size else None


def _monotone_run_end(values, start, increasing):
    """last index of the strict monotone run beginning at `start`, None if the run is empty or reaches the end"""
    n = len(values)
    end = start
    while end + 1 < n and ((values[end + 1] > values[end]) if increasing else (values[end + 1] < values[end])):
        end += 1
    if end == start or end == n - 1:
        return None
    return end


def detect_phases(traj):
    """
    T1: first t with lambda1 eta alpha^2 >= 1.5
    T2: end of the strict increase run of alpha started at t = 0
    T3: end of the strict decrease run of alpha started at T2
    T4: first t with beta2 >= 0.5 sqrt(lambda1 eta / 2)
    spikes: every t with L(t) > L(t - 1)
    """
    if len(traj) == 0:
        raise PreconditionError("empty trajectory")
    cfg = traj.config
    alpha = traj.column("alpha")
    beta2 = traj.column("beta2")
    loss = traj.column("loss")
    t1 = _first_true(cfg.lambda1 * cfg.eta * alpha * alpha >= 1.5)
    t4 = _first_true(beta2 >= 0.5 * math.sqrt(cfg.lambda1 * cfg.eta / 2.0))
    t2 = _monotone_run_end(alpha, 0, increasing=True)
    t3 = _monotone_run_end(alpha, t2, increasing=False) if t2 is not None else None
    spikes = [int(t) for t in np.flatnonzero(loss[1:] > loss[:-1]) + 1]
    report = PhaseReport(t1=t1, t2=t2, t3=t3, t4=t4, spikes=spikes)
    LOGGER.debug(f"phases t1={t1} t2={t2} t3={t3} t4={t4} spikes={len(spikes)}")
    return report


def verify_param_lemma(traj):
    """sharpness close to lambda1 alpha^2, top eigenvector aligned with beta1, beta2 increasing"""
    _require_x_start(traj)
    cfg = traj.config
    steps = traj.column("t")
    alpha = traj.column("alpha")
    sharp = traj.column("sharpness")
    base = cfg.lambda1 * alpha * alpha
    return VerificationReport(
        [
            _at_least("param_sharpness_lower", "S >= lambda1 alpha^2", steps, sharp, base),
            _at_most("param_sharpness_upper", "S <= 1.12 lambda1 alpha^2", steps, sharp, 1.12 * base),
            _at_least("param_eigvec_alignment", "|cos(v, e_beta1)| > 0.9", steps, traj.column("cos_beta1"), 0.9),
            _increasing("param_beta2_increasing", "beta2(t+1) > beta2(t)", steps, traj.column("beta2")),
        ]
    )


def verify_sharpness_bands(traj, phases):
    """sharpness bands before and after T1, and the alpha range after T1"""
    _require_x_start(traj)
    cfg = traj.config
    eta = cfg.eta
    t1 = phases.t1 if phases.t1 is not None else len(traj)
    steps = traj.column("t")
    sharp = traj.column("sharpness")
    alpha = traj.column("alpha")
    scaled = cfg.lambda1 * eta * alpha * alpha
    pre, post = slice(0, t1), slice(t1, None)
    checks = [
        _at_least("band_pre_t1_lower", "S >= 1.1 / eta before T1", steps[pre], sharp[pre], 1.1 / eta),
        _at_most("band_pre_t1_upper", "S <= 1.7 / eta before T1", steps[pre], sharp[pre], 1.7 / eta),
        _at_least("band_post_t1_lower", "S >= 1.5 / eta from T1", steps[post], sharp[post], 1.5 / eta),
        _at_most("band_post_t1_upper", "S <= 4.71 / eta from T1", steps[post], sharp[post], 4.71 / eta),
        _at_least("alpha_post_t1_lower", "lambda1 eta alpha^2 >= 1.5 from T1", steps[post], scaled[post], 1.5),
        _at_most("alpha_post_t1_upper", "lambda1 eta alpha^2 <= 4.2 from T1", steps[post], scaled[post], 4.2),
        _increasing("alpha_increasing_pre_t1", "alpha(t+1) > alpha(t) before T1", steps[pre], alpha[pre]),
    ]
    if phases.t1 is None:
        checks[2].note = checks[3].note = checks[4].note = checks[5].note = "T1 not reached"
    return VerificationReport(checks)


def verify_lhat(traj, phases):
    """
    Surrogate checks before T4.

    The sandwich holds while sqrt(2 / (lambda1 eta)) beta2 <= 1/2, so it is
    checked on t < T4; the ratio bracket covers every step t -> t + 1 with t < T4.
    A run starting at or past the threshold (T4 = 0) leaves both ranges empty.

    The surrogate has no lambda2 factor while L2 does, so the sandwich compares
    lambda2 * lhat with L2. The ratio bracket is scale free.
    """
    _require_x_start(traj)
    names = ("lhat_sandwich_lower", "lhat_sandwich_upper", "lhat_ratio_lower", "lhat_ratio_upper")
    bounds = (
        "lambda2 lhat >= 0.75 L2",
        "lambda2 lhat <= 3.3 L2 (<= L2 when alpha <= sqrt(2 / (lambda1 eta)))",
        "lhat(t+1) / lhat(t) >= (1 - 4 lambda2 / lambda1)^2",
        "lhat(t+1) / lhat(t) <= (1 - lambda2 / lambda1)^2",
    )
    if phases.t4 is None:
        LOGGER.info("T4 not reached, surrogate checks skipped")
        return VerificationReport([_skipped(n, b, "T4 not reached") for n, b in zip(names, bounds)])
    cfg = traj.config
    before = slice(0, phases.t4)
    steps = traj.column("t")[before]
    alpha = traj.column("alpha")[before]
    l2 = traj.column("l2")[before]
    lhat = traj.column("lhat")[: phases.t4 + 1]
    scaled = cfg.lambda2 * lhat[before]
    upper_factor = np.where(alpha <= cfg.clip_alpha, 1.0, 3.3)
    ref = decay_reference(cfg)
    ratio = lhat[1:] / lhat[:-1]
    report = VerificationReport(
        [
            _at_least(names[0], bounds[0], steps, scaled, 0.75 * l2),
            _at_most(names[1], bounds[1], steps, scaled, upper_factor * l2),
            _at_least(names[2], bounds[2], steps, ratio, ref.fast),
            _at_most(names[3], bounds[3], steps, ratio, ref.slow),
        ]
    )
    if phases.t4 == 0:
        for c in report.checks:
            c.note = T4_AT_START_NOTE
    return report


def fit_decay_slope(traj, window):
    """
    Least squares slope of log lhat against t over the inclusive step range `window`.

    Return:
        - per step log decay; an exact geometric c * rho^t gives log(rho)
    """
    start, end = window
    lhat = traj.column("lhat")[start : end + 1]
    t = traj.column("t")[start : end + 1].astype(np.float64)
    if lhat.size < 2:
        raise PreconditionError(f"window {window} holds fewer than 2 records")
    if np.any(lhat <= 0.0):
        raise PreconditionError(f"lhat is not positive over window {window}")
    y = np.log(lhat)
    x = t - t.mean()
    return float(np.dot(x, y - y.mean()) / np.dot(x, x))


def gfs_bounds(cfg, p):
    """two sided bound on the gradient flow solution sharpness as a function of beta2"""
    eta, lambda1 = cfg.eta, cfg.lambda1
    b2_sq = p.beta2 * p.beta2

    def bound(c):
        return (c - lambda1 * eta * b2_sq) / (2.0 * eta) + lambda1 * math.sqrt(
            4.0 + (c / (eta * lambda1) - b2_sq) ** 2
        ) / 2.0

    return GfsBounds(lower=bound(1.0), upper=bound(4.2))


def verify_gfs(traj):
    """bracket lower <= phi <= upper at every step and nonincreasing bound sequences"""
    _require_x_start(traj)
    cfg = traj.config
    steps = traj.column("t")
    phi = np.array([gfs_analytic(cfg, r.params).phi for r in traj.records])
    bounds = [gfs_bounds(cfg, r.params) for r in traj.records]
    lower = np.array([b.lower for b in bounds])
    upper = np.array([b.upper for b in bounds])
    lower_step = lower[:-1] - lower[1:]
    upper_step = upper[:-1] - upper[1:]
    return VerificationReport(
        [
            _at_least("gfs_lower", "phi >= lower bound", steps, phi, lower),
            _at_most("gfs_upper", "phi <= upper bound", steps, phi, upper),
            build_check("gfs_lower_nonincreasing", "lower(t+1) <= lower(t)", steps[1:], lower_step, lower_step >= 0.0),
            build_check("gfs_upper_nonincreasing", "upper(t+1) <= upper(t)", steps[1:], upper_step, upper_step >= 0.0),
        ]
    )


def verify_eos_phases(traj, phases):
    """progressive sharpening past 2.37 / eta at T2 and self stabilization below 2 / eta + eta at T3"""
    eta = traj.config.eta
    names = ("eos_phase_order", "eos_sharpness_at_t2", "eos_sharpness_at_t3")
    bounds = ("0 < T2 < T3", "S(T2) > 2.37 / eta", "S(T3) < 2 / eta + eta")
    if phases.t2 is None or phases.t3 is None:
        return VerificationReport(
            [CheckResult(name=n, bound=b, passed=False, note="T2 or T3 not detected") for n, b in zip(names, bounds)]
        )
    s2, s3 = traj[phases.t2].sharp.value, traj[phases.t3].sharp.value
    order = phases.t3 - phases.t2
    return VerificationReport(
        [
            build_check(names[0], bounds[0], [phases.t3], [order], [0 < phases.t2 < phases.t3]),
            build_check(names[1], bounds[1], [phases.t2], [s2 - 2.37 / eta], [s2 > 2.37 / eta]),
            build_check(names[2], bounds[2], [phases.t3], [2.0 / eta + eta - s3], [s3 < 2.0 / eta + eta]),
        ]
    )


def verify_product_invariant(traj):
    product = traj.column("alpha") * traj.column("beta2")
    steps = traj.column("t")
    slack = np.minimum(product, 1.0 - product)
    return VerificationReport(
        [
            build_check(
                "product_in_unit_interval", "0 < alpha beta2 < 1", steps, slack, (product > 0.0) & (product < 1.0)
            )
        ]
    )


def convergence_time(traj, epsilon, delta):
    """first T with L(t) <= epsilon and S(t) <= (2 + delta) / eta for every t >= T, None if not reached"""
    if len(traj) == 0:
        return None
    ok = (traj.column("loss") <= epsilon) & (traj.column("sharpness") <= (2.0 + delta) / traj.config.eta)
    bad = np.flatnonzero(~ok)
    if bad.size == 0:
        return 0
    t = int(bad[-1]) + 1
    return t if t < len(traj) else None


def verify_global_convergence(traj, epsilon=1e-4, delta=0.1):
    t = convergence_time(traj, epsilon, delta)
    final = traj[len(traj) - 1]
    eta = traj.config.eta
    note = f"reached at t={t}" if t is not None else "not reached within horizon"
    loss_check = build_check(
        "final_loss", f"L <= {epsilon}", [final.t], [epsilon - final.parts.total], [final.parts.total <= epsilon]
    )
    sharp_bound = (2.0 + delta) / eta
    sharp_check = build_check(
        "final_sharpness",
        f"S <= {2.0 + delta} / eta",
        [final.t],
        [sharp_bound - final.sharp.value],
        [final.sharp.value <= sharp_bound],
    )
    loss_check.note = sharp_check.note = note
    return VerificationReport([loss_check, sharp_check])


def detect_abnormal(traj, collapse_threshold=0.1):
    """alpha sign flips, and the first step where lambda1 eta alpha^2 drops below `collapse_threshold`"""
    cfg = traj.config
    alpha = traj.column("alpha")
    events = []
    for t in range(1, len(alpha)):
        prev, cur = alpha[t - 1], alpha[t]
        if prev != 0.0 and cur != 0.0 and (prev > 0.0) != (cur > 0.0):
            events.append(AbnormalEvent(step=t, kind="alpha_sign_flip", value=float(cur)))
    collapse = _first_true(cfg.lambda1 * cfg.eta * alpha * alpha < collapse_threshold)
    if collapse is not None:
        value = float(cfg.lambda1 * cfg.eta * alpha[collapse] ** 2)
        events.append(AbnormalEvent(step=collapse, kind="alpha_collapse", value=value))
    events.sort(key=lambda e: e.step)
    if events:
        LOGGER.warning(f"{len(events)} abnormal events, first at step {events[0].step}")
    return events
