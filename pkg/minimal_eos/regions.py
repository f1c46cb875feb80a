"""regions module: membership predicates and seeded samplers for the parameter sets of the model

Sets:
    - X(eta): the initialization set
    - X_tilde(eta): the flatter subset of X(eta) used by the edge of stability theorem
    - Y: the learning-rate free set, every member lies in X(r eta) for a whole range of r
    - M_dagger(eta): the stable set the constrained trajectory lives on

Predicates follow the typeset inequalities exactly: closed bounds are tested
with <=, open bounds with <, and no tolerance is applied. Samplers draw alpha,
then beta2, then beta1^2 (log uniform, random sign) from their conditional
windows and shrink open endpoints by a relative 1e-12.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from minimal_eos.errors import EmptyRegionError, PreconditionError
from minimal_eos.model import Params

LOGGER = logging.getLogger(__name__)

SAMPLER_BUDGET = 10**5
OPEN_SHRINK = 1e-12
DEFAULT_R_GRID = tuple(np.linspace(0.55, 1.0, 10))


@dataclass(frozen=True)
class Violation:
    name: str
    slack: float


@dataclass
class RegionReport:
    """membership verdict, violated constraints and the signed slack of every constraint"""

    member: bool
    violated: List[Violation] = field(default_factory=list)
    slacks: Dict[str, float] = field(default_factory=dict)

    def violated_names(self):
        return [v.name for v in self.violated]


class _Constraints:
    """accumulates signed slacks; positive slack means the constraint holds with room"""

    def __init__(self, rel_tol=0.0):
        self.rel_tol = rel_tol
        self.slacks = {}
        self.violated = []

    def _record(self, name, slack, ok):
        self.slacks[name] = slack
        if not ok:
            self.violated.append(Violation(name, slack))

    def _tol(self, bound):
        return self.rel_tol * abs(bound)

    def at_least(self, name, value, bound):
        self._record(name, value - bound, value >= bound - self._tol(bound))

    def at_most(self, name, value, bound):
        self._record(name, bound - value, value <= bound + self._tol(bound))

    def below(self, name, value, bound):
        self._record(name, bound - value, value < bound)

    def above(self, name, value, bound):
        self._record(name, value - bound, value > bound)

    def equal(self, name, value, target):
        self._record(name, -abs(value - target), value == target)

    def report(self):
        return RegionReport(member=not self.violated, violated=list(self.violated), slacks=dict(self.slacks))


def _beta1_sq_bound(lambda1, lambda2, alpha, beta2, factor):
    """(lambda2 beta2 / (factor lambda1 alpha)) (1 - alpha beta2)"""
    return lambda2 * beta2 / (factor * lambda1 * alpha) * (1.0 - alpha * beta2)


def _x_alpha_window(lambda1, eta):
    return math.sqrt(1.1 / (lambda1 * eta)), math.sqrt(2.0 / (lambda1 * eta))


def _x_beta2_floor(lambda1, eta, alpha):
    return max(math.sqrt(6.0 * eta * lambda1) / 20.0, 3.0 / (20.0 * alpha), alpha)


def _check_x(c, lambda1, lambda2, eta, p):
    c.above("alpha_positive", p.alpha, 0.0)
    if p.alpha <= 0.0:
        return
    alpha_lo, alpha_hi = _x_alpha_window(lambda1, eta)
    c.at_least("alpha_lower", p.alpha, alpha_lo)
    c.at_most("alpha_upper", p.alpha, alpha_hi)
    c.at_least("beta2_lower", p.beta2, _x_beta2_floor(lambda1, eta, p.alpha))
    c.below("beta2_upper", p.beta2, 1.0 / p.alpha)
    b1_sq = p.beta1 * p.beta1
    c.at_least("beta1_sq_lower", b1_sq, _beta1_sq_bound(lambda1, lambda2, p.alpha, p.beta2, 500.0))
    c.at_most("beta1_sq_upper", b1_sq, _beta1_sq_bound(lambda1, lambda2, p.alpha, p.beta2, 1.0))


def _check_x_tilde(c, lambda1, lambda2, eta, p):
    _check_x(c, lambda1, lambda2, eta, p)
    if p.alpha <= 0.0:
        return
    c.at_most("alpha_tilde_upper", p.alpha, math.sqrt(1.5 / (lambda1 * eta)))
    c.at_most("beta2_tilde_upper", p.beta2, 0.2 / p.alpha)
    c.at_most("beta1_sq_tilde_upper", p.beta1 * p.beta1, _beta1_sq_bound(lambda1, lambda2, p.alpha, p.beta2, 50.0))


def in_X(cfg, p):
    c = _Constraints()
    _check_x(c, cfg.lambda1, cfg.lambda2, cfg.eta, p)
    return c.report()


def in_X_tilde(cfg, p):
    c = _Constraints()
    _check_x_tilde(c, cfg.lambda1, cfg.lambda2, cfg.eta, p)
    return c.report()


def in_Y(p, lambda1, lambda2):
    c = _Constraints()
    c.at_least("alpha_lower", p.alpha, 2.0 * math.sqrt(5.0) / math.sqrt(lambda1))
    if p.alpha <= 0.0:
        return c.report()
    c.below("alpha_upper", p.alpha, 1.0)
    c.at_least("beta2_lower", p.beta2, max(p.alpha, math.sqrt(3.0) / (10.0 * p.alpha)))
    c.below("beta2_upper", p.beta2, 1.0 / p.alpha)
    gap = 1.0 - p.alpha * p.beta2
    if gap <= 0.0:
        c.above("residual_positive", gap, 0.0)
        return c.report()
    ratio = p.beta1 * p.beta1 / gap
    c.at_least("beta1_ratio_lower", ratio, lambda2 * p.beta2 / (500.0 * lambda1 * p.alpha))
    c.at_most("beta1_ratio_upper", ratio, lambda2 * p.beta2 / (lambda1 * p.alpha))
    return c.report()


def in_M_dagger(cfg, p, product_bound=1.0):
    """
    Membership in the stable set M_dagger(eta).

    The product bound defaults to 1, the value used when the constrained update
    is derived; the set is also stated with a looser bound of 9.
    """
    c = _Constraints()
    c.at_least("alpha_lower", p.alpha, 1.0 / math.sqrt(cfg.lambda1 * cfg.eta))
    c.at_most("alpha_upper", p.alpha, cfg.clip_alpha)
    c.equal("beta1_zero", p.beta1, 0.0)
    product = p.alpha * p.beta2
    c.above("product_positive", product, 0.0)
    c.at_most("product_upper", product, product_bound)
    return c.report()


def _open_hi(x):
    return x * (1.0 - OPEN_SHRINK)


def _draw_beta1(rng, lo, hi):
    lo, hi = lo * (1.0 + OPEN_SHRINK), hi * (1.0 - OPEN_SHRINK)
    b1_sq = math.exp(rng.uniform(math.log(lo), math.log(hi)))
    b1_sq = min(max(b1_sq, lo), hi)
    sign = 1.0 if rng.uniform() < 0.5 else -1.0
    return sign * math.sqrt(b1_sq)


def _rejection_loop(name, draw, accept):
    for attempt in range(SAMPLER_BUDGET):
        p = draw()
        if p is not None and accept(p):
            if attempt:
                LOGGER.debug(f"{name} sampler needed {attempt + 1} draws")
            return p
    raise EmptyRegionError(f"{name} sampler exhausted {SAMPLER_BUDGET} draws")


def sample_X(cfg, seed):
    """deterministic member of X(eta) for a given seed"""
    lambda1, lambda2, eta = cfg.lambda1, cfg.lambda2, cfg.eta
    alpha_lo, alpha_hi = _x_alpha_window(lambda1, eta)
    # beta2 in [max(.., alpha), 1 / alpha) needs alpha < 1 and alpha < 20 / sqrt(6 eta lambda1)
    alpha_hi = min(alpha_hi, _open_hi(1.0), _open_hi(20.0 / math.sqrt(6.0 * eta * lambda1)))
    if alpha_lo > alpha_hi:
        raise EmptyRegionError(f"X(eta) is empty for lambda1={lambda1}, eta={eta}")
    rng = np.random.default_rng(seed)

    def draw():
        alpha = rng.uniform(alpha_lo, alpha_hi)
        b2_lo, b2_hi = _x_beta2_floor(lambda1, eta, alpha), _open_hi(1.0 / alpha)
        if b2_lo >= b2_hi:
            return None
        beta2 = rng.uniform(b2_lo, b2_hi)
        beta1 = _draw_beta1(
            rng,
            _beta1_sq_bound(lambda1, lambda2, alpha, beta2, 500.0),
            _beta1_sq_bound(lambda1, lambda2, alpha, beta2, 1.0),
        )
        return Params(alpha, beta1, beta2)

    return _rejection_loop("X", draw, lambda p: in_X(cfg, p).member)


def sample_X_tilde(cfg, seed):
    """deterministic member of X_tilde(eta) for a given seed"""
    lambda1, lambda2, eta = cfg.lambda1, cfg.lambda2, cfg.eta
    alpha_lo, _ = _x_alpha_window(lambda1, eta)
    # alpha <= beta2 <= 0.2 / alpha and sqrt(6 eta lambda1) / 20 <= 0.2 / alpha bound alpha from above
    alpha_hi = min(
        math.sqrt(1.5 / (lambda1 * eta)),
        math.sqrt(0.2),
        4.0 / math.sqrt(6.0 * eta * lambda1),
    )
    if alpha_lo > alpha_hi:
        raise EmptyRegionError(
            f"X_tilde(eta) is empty for lambda1={lambda1}, eta={eta}: alpha window [{alpha_lo}, {alpha_hi}]"
        )
    rng = np.random.default_rng(seed)

    def draw():
        alpha = rng.uniform(alpha_lo, alpha_hi)
        b2_lo = _x_beta2_floor(lambda1, eta, alpha)
        b2_hi = min(0.2 / alpha, _open_hi(1.0 / alpha))
        if b2_lo > b2_hi:
            return None
        beta2 = rng.uniform(b2_lo, b2_hi)
        beta1 = _draw_beta1(
            rng,
            _beta1_sq_bound(lambda1, lambda2, alpha, beta2, 500.0),
            _beta1_sq_bound(lambda1, lambda2, alpha, beta2, 50.0),
        )
        return Params(alpha, beta1, beta2)

    return _rejection_loop("X_tilde", draw, lambda p: in_X_tilde(cfg, p).member)


def sample_Y(lambda1, lambda2, seed):
    """deterministic member of Y for a given seed"""
    alpha_lo, alpha_hi = 2.0 * math.sqrt(5.0) / math.sqrt(lambda1), _open_hi(1.0)
    if alpha_lo > alpha_hi:
        raise EmptyRegionError(f"Y is empty for lambda1={lambda1}")
    rng = np.random.default_rng(seed)

    def draw():
        alpha = rng.uniform(alpha_lo, alpha_hi)
        b2_lo = max(alpha, math.sqrt(3.0) / (10.0 * alpha))
        b2_hi = _open_hi(1.0 / alpha)
        if b2_lo >= b2_hi:
            return None
        beta2 = rng.uniform(b2_lo, b2_hi)
        gap = 1.0 - alpha * beta2
        if gap <= 0.0:
            return None
        lo = lambda2 * beta2 / (500.0 * lambda1 * alpha) * gap
        hi = lambda2 * beta2 / (lambda1 * alpha) * gap
        return Params(alpha, _draw_beta1(rng, lo, hi), beta2)

    return _rejection_loop("Y", draw, lambda p: in_Y(p, lambda1, lambda2).member)


def sample_M_dagger(cfg, seed, product_bound=1.0):
    """deterministic member of M_dagger(eta); beta1 is exactly zero"""
    alpha_lo, alpha_hi = 1.0 / math.sqrt(cfg.lambda1 * cfg.eta), cfg.clip_alpha
    rng = np.random.default_rng(seed)

    def draw():
        alpha = rng.uniform(alpha_lo, alpha_hi)
        product = rng.uniform(OPEN_SHRINK, 1.0) * _open_hi(product_bound)
        return Params(alpha, 0.0, product / alpha)

    return _rejection_loop("M_dagger", draw, lambda p: in_M_dagger(cfg, p, product_bound).member)


SAMPLERS = {
    "X": lambda cfg, seed: sample_X(cfg, seed),
    "X_tilde": lambda cfg, seed: sample_X_tilde(cfg, seed),
    "Y": lambda cfg, seed: sample_Y(cfg.lambda1, cfg.lambda2, seed),
}

PREDICATES = {
    "X": in_X,
    "X_tilde": in_X_tilde,
    "Y": lambda cfg, p: in_Y(p, cfg.lambda1, cfg.lambda2),
}


def proposition_C(p, lambda1, lambda2, r_grid=DEFAULT_R_GRID, rel_tol=1e-12):
    """
    Check that a member of Y lies in X(r eta) for every r of `r_grid`, with eta = 2 / (lambda1 alpha^2).

    The grid endpoints 0.55 and 1 put alpha exactly on the X(r eta) alpha bounds,
    so closed bounds are compared with a relative tolerance `rel_tol`.
    """
    report = in_Y(p, lambda1, lambda2)
    if not report.member:
        raise PreconditionError(f"{p} is not in Y: violated {report.violated_names()}")
    eta = 2.0 / (lambda1 * p.alpha * p.alpha)
    if eta > 0.1 * (1.0 + rel_tol):
        LOGGER.debug(f"learning rate {eta} exceeds 0.1")
        return False
    for r in r_grid:
        c = _Constraints(rel_tol=rel_tol)
        _check_x(c, lambda1, lambda2, r * eta, p)
        if c.violated:
            LOGGER.debug(f"{p} leaves X({r} * {eta}): {[v.name for v in c.violated]}")
            return False
    return True
