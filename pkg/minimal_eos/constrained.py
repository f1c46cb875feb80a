"""constrained module: projected gradient descent on the stable set M_dagger

On M_dagger beta1 is identically zero, so the projection reduces to the
explicit update
    alpha <- min(alpha + eta lambda2 beta2 (1 - alpha beta2), sqrt(2 / (eta lambda1)))
    beta2 <- beta2 + eta lambda2 alpha (1 - alpha beta2)
The cap is an assignment of cfg.clip_alpha, so reaching it is an exact equality.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from tqdm import tqdm

from minimal_eos.analysis import CheckResult, VerificationReport, build_check, decay_reference
from minimal_eos.errors import PreconditionError
from minimal_eos.model import Params
from minimal_eos.regions import in_M_dagger

LOGGER = logging.getLogger(__name__)

DECAY_RTOL = 1e-10


@dataclass(frozen=True)
class ConstrainedState:
    """(alpha, beta2) on M_dagger; beta1 is zero and not stored"""

    alpha: float
    beta2: float

    def to_params(self):
        return Params(self.alpha, 0.0, self.beta2)

    def loss(self, cfg):
        return 0.5 * cfg.lambda2 * (1.0 - self.alpha * self.beta2) ** 2


@dataclass
class ConstrainedRun:
    states: List[ConstrainedState] = field(default_factory=list)
    t_tilde: Optional[int] = None

    def losses(self, cfg):
        return np.array([s.loss(cfg) for s in self.states])


def _require_member(cfg, s, product_bound):
    report = in_M_dagger(cfg, s.to_params(), product_bound)
    if not report.member:
        raise PreconditionError(f"{s} is not in M_dagger: violated {report.violated_names()}")


def pgd_step(cfg, s, product_bound=1.0):
    _require_member(cfg, s, product_bound)
    residual = 1.0 - s.alpha * s.beta2
    raw_alpha = s.alpha + cfg.eta * cfg.lambda2 * s.beta2 * residual
    next_alpha = cfg.clip_alpha if raw_alpha >= cfg.clip_alpha else raw_alpha
    next_beta2 = s.beta2 + cfg.eta * cfg.lambda2 * s.alpha * residual
    return ConstrainedState(next_alpha, next_beta2)


def simulate_constrained(cfg, s0, steps, product_bound=1.0, progress=False):
    """
    Iterate pgd_step `steps` times from `s0`.

    t_tilde is the first step whose alpha equals the cap, None when the cap is not reached.
    """
    _require_member(cfg, s0, product_bound)
    run = ConstrainedRun(states=[s0])
    s = s0
    for _ in tqdm(range(steps), disable=not progress, desc="constrained"):
        s = pgd_step(cfg, s, product_bound)
        run.states.append(s)
    for t, state in enumerate(run.states):
        if state.alpha == cfg.clip_alpha:
            run.t_tilde = t
            break
    LOGGER.debug(f"constrained trajectory of {steps} steps, t_tilde={run.t_tilde}")
    return run


def verify_constrained_decay(cfg, states, t_tilde):
    """
    Exact loss decay (1 - 2 lambda2 / lambda1)^2 per step from t_tilde on, and strict
    monotonicity (alpha up, loss down) before it.

    Steps with zero loss sit at a fixed point and are skipped by the ratio check.
    """
    losses = np.array([s.loss(cfg) for s in states])
    alpha = np.array([s.alpha for s in states])
    steps = np.arange(len(states))
    expected = decay_reference(cfg).constrained
    bound = f"|L(t+1) / L(t) - {expected:.8f}| <= {DECAY_RTOL} relative"

    if t_tilde is None:
        ratio_check = CheckResult(name="constrained_decay_ratio", bound=bound, skipped=True, note="cap not reached")
        pre = len(states)
    else:
        idx = np.arange(t_tilde, len(states) - 1)
        idx = idx[losses[idx] > 0.0]
        ratio = losses[idx + 1] / losses[idx]
        slack = DECAY_RTOL * expected - np.abs(ratio - expected)
        ratio_check = build_check("constrained_decay_ratio", bound, idx + 1, slack, slack >= 0.0)
        pre = t_tilde + 1

    alpha_diff = np.diff(alpha[:pre])
    loss_diff = -np.diff(losses[:pre])
    return VerificationReport(
        [
            ratio_check,
            build_check(
                "constrained_alpha_increasing",
                "alpha(t+1) > alpha(t) before t_tilde",
                steps[1:pre],
                alpha_diff,
                alpha_diff > 0.0,
            ),
            build_check(
                "constrained_loss_decreasing", "L(t+1) < L(t) before t_tilde", steps[1:pre], loss_diff, loss_diff > 0.0
            ),
        ]
    )


def constrained_start(cfg, p, product_bound=1.0):
    """
    Starting point of the constrained trajectory for a gradient descent initialization.

    beta1 is dropped, alpha is clamped into [1 / sqrt(lambda1 eta), sqrt(2 / (lambda1 eta))]
    and beta2 is lowered if needed so that alpha beta2 <= product_bound.
    """
    if p.alpha <= 0.0 or p.beta2 <= 0.0:
        raise PreconditionError(f"constrained start needs positive alpha and beta2, got {p}")
    alpha = min(max(p.alpha, 1.0 / math.sqrt(cfg.lambda1 * cfg.eta)), cfg.clip_alpha)
    beta2 = p.beta2
    if alpha * beta2 > product_bound:
        beta2 = product_bound / alpha
        while alpha * beta2 > product_bound:
            beta2 = float(np.nextafter(beta2, 0.0))
    s = ConstrainedState(alpha, beta2)
    _require_member(cfg, s, product_bound)
    return s
