"""dynamics module: gradient descent (clipped and unclipped), gradient flow and its analytic solution"""

import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import List, Optional

import numpy as np
from tqdm import tqdm

from minimal_eos.errors import DivergedError, NotConvergedError
from minimal_eos.model import LossParts, Params, SharpnessInfo, check_finite, loss_parts, sharpness_info

LOGGER = logging.getLogger(__name__)

CLIP_VARIANTS = ("cap", "printed-max")
DIVERGENCE_ALPHA = 1e6


@dataclass(frozen=True)
class StepOutcome:
    next: Params
    beta1_clipped: bool
    alpha_sign_flip: bool


@dataclass(frozen=True)
class TrajectoryRecord:
    """snapshot of one step: parameters and everything derived from them"""

    t: int
    params: Params
    parts: LossParts
    sharp: SharpnessInfo
    beta1_clipped: bool = False


@dataclass
class Trajectory:
    """ordered records of a run, records[t].t == t"""

    config: object
    records: List[TrajectoryRecord] = field(default_factory=list)
    clip_variant: str = "cap"
    unclipped: bool = False

    def __len__(self):
        return len(self.records)

    def __getitem__(self, t):
        return self.records[t]

    def column(self, name):
        """numpy array of one per-step quantity"""
        getters = {
            "t": lambda r: r.t,
            "alpha": lambda r: r.params.alpha,
            "beta1": lambda r: r.params.beta1,
            "beta2": lambda r: r.params.beta2,
            "loss": lambda r: r.parts.total,
            "l1": lambda r: r.parts.l1,
            "l2": lambda r: r.parts.l2,
            "lhat": lambda r: r.parts.lhat,
            "sharpness": lambda r: r.sharp.value,
            "cos_beta1": lambda r: r.sharp.cos_beta1,
            "clipped": lambda r: r.beta1_clipped,
        }
        if name not in getters:
            raise KeyError(f"unknown trajectory column {name}")
        getter = getters[name]
        return np.array([getter(r) for r in self.records])

    @property
    def theorem_applicable(self):
        """the convergence theorems assume the capped beta1 update"""
        return not self.unclipped and self.clip_variant == "cap"


@dataclass(frozen=True)
class GfsEstimate:
    """gradient flow solution reached from a point, from the conserved layer imbalance"""

    gamma: float
    alpha_inf_sq: float
    phi: float

    @property
    def beta2_inf_sq(self):
        return 1.0 / self.alpha_inf_sq


@dataclass(frozen=True)
class GfSample:
    step: int
    time: float
    params: Params


@dataclass
class GfResult:
    terminal: Params
    samples: List[GfSample]
    steps: int


def make_record(cfg, t, p, beta1_clipped=False):
    return TrajectoryRecord(
        t=t, params=p, parts=loss_parts(cfg, p), sharp=sharpness_info(cfg, p), beta1_clipped=beta1_clipped
    )


def _raw_step(cfg, p):
    a, b1, b2 = p.alpha, p.beta1, p.beta2
    residual = 1.0 - a * b2
    next_alpha = a - cfg.eta * (cfg.lambda1 * b1 * b1 * a - cfg.lambda2 * b2 * residual)
    raw_beta1 = b1 - cfg.eta * cfg.lambda1 * a * a * b1
    next_beta2 = b2 + cfg.eta * cfg.lambda2 * a * residual
    return next_alpha, raw_beta1, next_beta2


def clip_beta1(raw, c, clip_variant="cap"):
    """
    Clip the beta1 update.

    `cap` is sign(x) * min(|x|, c), the rule the convergence proofs rely on;
    `printed-max` is the sign(x) * max(|x|, c) rule as typeset in the update
    definition. Returns the clipped value and whether it differs from `raw`.
    """
    if clip_variant == "cap":
        if abs(raw) > c:
            return math.copysign(c, raw), True
        return raw, False
    if clip_variant == "printed-max":
        if raw == 0.0:
            return 0.0, False
        if abs(raw) < c:
            return math.copysign(c, raw), True
        return raw, False
    raise ValueError(f"Unknown clip_variant {clip_variant}, choose from {CLIP_VARIANTS}")


def _outcome(p, next_alpha, next_beta1, next_beta2, clipped):
    nxt = Params(next_alpha, next_beta1, next_beta2)
    if not nxt.is_finite() or abs(next_alpha) > DIVERGENCE_ALPHA:
        raise DivergedError(f"gradient descent left the finite range: {nxt}", last_state=p)
    flip = p.alpha != 0.0 and next_alpha != 0.0 and (p.alpha > 0.0) != (next_alpha > 0.0)
    return StepOutcome(next=nxt, beta1_clipped=clipped, alpha_sign_flip=flip)


def gd_step(cfg, p, clip_variant="cap"):
    """one gradient descent step with clipping on beta1"""
    check_finite(p)
    next_alpha, raw_beta1, next_beta2 = _raw_step(cfg, p)
    next_beta1, clipped = clip_beta1(raw_beta1, cfg.clip_beta1, clip_variant)
    return _outcome(p, next_alpha, next_beta1, next_beta2, clipped)


def gd_step_unclipped(cfg, p):
    check_finite(p)
    next_alpha, raw_beta1, next_beta2 = _raw_step(cfg, p)
    return _outcome(p, next_alpha, raw_beta1, next_beta2, False)


def simulate(cfg, p0, steps, clip_variant="cap", unclipped=False, progress=False):
    """
    Run gradient descent for `steps` steps from `p0`.

    On divergence the raised DivergedError carries the partial trajectory.
    """
    check_finite(p0, step=0)
    trajectory = Trajectory(config=cfg, clip_variant=clip_variant, unclipped=unclipped)
    trajectory.records.append(make_record(cfg, 0, p0))
    step = gd_step_unclipped if unclipped else partial(gd_step, clip_variant=clip_variant)
    p = p0
    for t in tqdm(range(1, steps + 1), disable=not progress, desc="gd"):
        try:
            outcome = step(cfg, p)
        except DivergedError as e:
            LOGGER.warning(f"run diverged at step {t}")
            e.step = t
            e.last_state = p
            e.partial = trajectory
            raise
        p = outcome.next
        trajectory.records.append(make_record(cfg, t, p, outcome.beta1_clipped))
    return trajectory


def gf_step_size(cfg):
    """fixed RK4 step, h * lambda1 <= 0.1"""
    return min(1e-2, 1.0 / (10.0 * cfg.lambda1))


def _neg_grad(cfg, a, b1, b2):
    residual = 1.0 - a * b2
    return (
        cfg.lambda2 * b2 * residual - cfg.lambda1 * b1 * b1 * a,
        -cfg.lambda1 * a * a * b1,
        cfg.lambda2 * a * residual,
    )


def gf_integrate(cfg, p0, grad_tol=1e-10, max_steps=10**8, sample_every=1000):
    """
    Integrate the gradient flow d theta / dt = -grad L(theta) with classical RK4.

    Stops as soon as the sup norm of the gradient is at most `grad_tol`.
    Every `sample_every` internal steps the current point is recorded.
    """
    check_finite(p0)
    h = gf_step_size(cfg)
    a, b1, b2 = p0.alpha, p0.beta1, p0.beta2
    samples = [GfSample(0, 0.0, p0)]
    for n in range(max_steps + 1):
        k1 = _neg_grad(cfg, a, b1, b2)
        if max(abs(k1[0]), abs(k1[1]), abs(k1[2])) <= grad_tol:
            terminal = Params(a, b1, b2)
            if samples[-1].step != n:
                samples.append(GfSample(n, n * h, terminal))
            LOGGER.debug(f"gradient flow converged after {n} steps")
            return GfResult(terminal=terminal, samples=samples, steps=n)
        if n == max_steps:
            break
        k2 = _neg_grad(cfg, a + 0.5 * h * k1[0], b1 + 0.5 * h * k1[1], b2 + 0.5 * h * k1[2])
        k3 = _neg_grad(cfg, a + 0.5 * h * k2[0], b1 + 0.5 * h * k2[1], b2 + 0.5 * h * k2[2])
        k4 = _neg_grad(cfg, a + h * k3[0], b1 + h * k3[1], b2 + h * k3[2])
        a += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        b1 += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        b2 += h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        if not (math.isfinite(a) and math.isfinite(b1) and math.isfinite(b2)):
            raise DivergedError("gradient flow left the finite range", last_state=samples[-1].params, step=n + 1)
        if sample_every and (n + 1) % sample_every == 0:
            samples.append(GfSample(n + 1, (n + 1) * h, Params(a, b1, b2)))
    terminal = Params(a, b1, b2)
    if samples[-1].step != max_steps:
        samples.append(GfSample(max_steps, max_steps * h, terminal))
    raise NotConvergedError(
        f"gradient flow did not reach grad_tol={grad_tol} in {max_steps} steps",
        terminal_state=terminal,
        steps=max_steps,
        partial=GfResult(terminal=terminal, samples=samples, steps=max_steps),
    )


def _neg_grad_batch(cfg, theta):
    a, b1, b2 = theta[:, 0], theta[:, 1], theta[:, 2]
    residual = 1.0 - a * b2
    out = np.empty_like(theta)
    out[:, 0] = cfg.lambda2 * b2 * residual - cfg.lambda1 * b1 * b1 * a
    out[:, 1] = -cfg.lambda1 * a * a * b1
    out[:, 2] = cfg.lambda2 * a * residual
    return out


def _integrate_batch(cfg, theta, grad_tol, max_steps, check_every, sample_every=0):
    """RK4 on an (n, 3) array; returns the terminal array, the sampled (step, array) pairs and the step count"""
    h = gf_step_size(cfg)
    samples = [(0, theta.copy())]
    for n in range(max_steps + 1):
        k1 = _neg_grad_batch(cfg, theta)
        if (n % check_every == 0 or n == max_steps) and np.max(np.abs(k1)) <= grad_tol:
            if samples[-1][0] != n:
                samples.append((n, theta.copy()))
            LOGGER.debug(f"batched gradient flow converged after {n} steps")
            return theta, samples, n
        if n == max_steps:
            break
        k2 = _neg_grad_batch(cfg, theta + 0.5 * h * k1)
        k3 = _neg_grad_batch(cfg, theta + 0.5 * h * k2)
        k4 = _neg_grad_batch(cfg, theta + h * k3)
        theta = theta + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if sample_every and (n + 1) % sample_every == 0:
            samples.append((n + 1, theta.copy()))
    raise NotConvergedError(
        f"batched gradient flow did not reach grad_tol={grad_tol} in {max_steps} steps",
        terminal_state=[Params.from_array(row) for row in theta],
        steps=max_steps,
    )


def gf_integrate_many(cfg, points, grad_tol=1e-10, max_steps=10**8, check_every=100):
    """
    Integrate the gradient flow from several starting points at once.

    Same step rule as gf_integrate; integration stops once every point has a
    gradient sup norm at most `grad_tol` (checked every `check_every` steps).
    Returns the terminal points as a list of Params.
    """
    theta = np.array([p.as_array() for p in points], dtype=np.float64)
    terminal, _, _ = _integrate_batch(cfg, theta, grad_tol, max_steps, check_every)
    return [Params.from_array(row) for row in terminal]


def gf_paths(cfg, points, grad_tol=1e-10, max_steps=10**8, sample_every=1000, check_every=100):
    """gradient flow paths from several points, one GfResult per point sharing the batch step count"""
    theta = np.array([p.as_array() for p in points], dtype=np.float64)
    h = gf_step_size(cfg)
    terminal, samples, steps = _integrate_batch(cfg, theta, grad_tol, max_steps, check_every, sample_every)
    return [
        GfResult(
            terminal=Params.from_array(terminal[i]),
            samples=[GfSample(n, n * h, Params.from_array(batch[i])) for n, batch in samples],
            steps=steps,
        )
        for i in range(len(points))
    ]


def alpha_inf_sq(gamma):
    """positive root of a^4 - gamma a^2 - 1 = 0, written without cancellation"""
    root = math.sqrt(4.0 + gamma * gamma)
    if gamma >= 0.0:
        return (gamma + root) / 2.0
    return 2.0 / (root - gamma)


def gfs_analytic(cfg, p):
    """
    Gradient flow solution sharpness from the conserved alpha^2 - beta1^2 - beta2^2.

    The flow ends on beta1 = 0, alpha beta2 = 1 where the sharpness is
    max(lambda1 a^2, lambda2 a^2 + lambda2 / a^2); both branches are evaluated.
    """
    check_finite(p)
    gamma = p.alpha * p.alpha - p.beta1 * p.beta1 - p.beta2 * p.beta2
    a2 = alpha_inf_sq(gamma)
    phi = max(cfg.lambda1 * a2, cfg.lambda2 * a2 + cfg.lambda2 / a2)
    return GfsEstimate(gamma=gamma, alpha_inf_sq=a2, phi=phi)


def gfs_interval(cfg, p) -> Optional[tuple]:
    """
    Bracket on phi that ignores beta1, lambda1 (g - lambda2 + r) / 2 <= phi <= lambda1 (g + r) / 2
    with g = alpha^2 - beta2^2 and r = sqrt(4 + g^2).

    Holds when g <= 0 and beta1^2 <= lambda2, on the lambda1 branch; returns
    None when g > 0.
    """
    g = p.alpha * p.alpha - p.beta2 * p.beta2
    if g > 0.0:
        return None
    r = math.sqrt(4.0 + g * g)
    return cfg.lambda1 * (g - cfg.lambda2 + r) / 2.0, cfg.lambda1 * (g + r) / 2.0
