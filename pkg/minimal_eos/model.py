"""model module: loss, gradient, hessian and sharpness of the width-one two-layer linear network

The network is f(x; theta) = alpha * (beta1 * x1 + beta2 * x2) with
x ~ N(0, diag(lambda1, lambda2)) and target y = x2. Every vector and matrix is
ordered (alpha, beta1, beta2).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from minimal_eos.eigen import top_eigenpair
from minimal_eos.errors import ConfigError, DivergedError

MIN_LAMBDA1 = 100.0
MAX_ETA = 0.1


@dataclass(frozen=True)
class ModelConfig:
    """problem constants and learning rate

    The theory range (lambda1 >= 100, lambda1 * lambda2 <= 1,
    eta in [2 / lambda1, 0.1]) is enforced unless `allow_out_of_theory` is set.
    """

    lambda1: float
    lambda2: float
    eta: float
    allow_out_of_theory: bool = False
    clip_beta1: float = field(init=False, repr=False)
    clip_alpha: float = field(init=False, repr=False)

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "eta"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ConfigError(f"{name} must be a positive finite number, got {value}")
        if not self.allow_out_of_theory:
            errors = []
            if self.lambda1 < MIN_LAMBDA1:
                errors.append(f"lambda1 = {self.lambda1} is below {MIN_LAMBDA1}")
            if self.lambda1 * self.lambda2 > 1.0:
                errors.append(f"lambda1 * lambda2 = {self.lambda1 * self.lambda2} exceeds 1")
            if not 2.0 / self.lambda1 <= self.eta <= MAX_ETA:
                errors.append(f"eta = {self.eta} is outside [{2.0 / self.lambda1}, {MAX_ETA}]")
            if errors:
                raise ConfigError("; ".join(errors) + " (set allow_out_of_theory to bypass)")
        object.__setattr__(self, "clip_beta1", math.sqrt(10.0) / (6.0 * math.sqrt(self.lambda1)))
        object.__setattr__(self, "clip_alpha", math.sqrt(2.0 / (self.eta * self.lambda1)))

    @property
    def threshold(self):
        """the stability threshold 2 / eta"""
        return 2.0 / self.eta

    def with_eta(self, eta):
        return ModelConfig(self.lambda1, self.lambda2, eta, allow_out_of_theory=self.allow_out_of_theory)


@dataclass(frozen=True)
class Params:
    """the parameter vector theta = (alpha, beta1, beta2)"""

    alpha: float
    beta1: float
    beta2: float

    def as_array(self):
        return np.array([self.alpha, self.beta1, self.beta2], dtype=np.float64)

    @classmethod
    def from_array(cls, a):
        return cls(float(a[0]), float(a[1]), float(a[2]))

    def is_finite(self):
        return math.isfinite(self.alpha) and math.isfinite(self.beta1) and math.isfinite(self.beta2)


@dataclass(frozen=True)
class LossParts:
    """loss L = l1 + l2 together with the restricted-alpha surrogate lhat"""

    total: float
    l1: float
    l2: float
    lhat: float


@dataclass(frozen=True)
class SharpnessInfo:
    """largest hessian eigenvalue, its unit eigenvector as a tuple and the alignment with beta1"""

    value: float
    eigvec: tuple
    cos_beta1: float
    degenerate: bool = False


def check_finite(p, step=None):
    if not p.is_finite():
        raise DivergedError(f"non-finite parameters {p}", last_state=None, step=step)


def loss(cfg, p):
    """population square loss 0.5 * lambda1 * (alpha beta1)^2 + 0.5 * lambda2 * (alpha beta2 - 1)^2"""
    return loss_parts(cfg, p).total


def lhat(cfg, beta2):
    """surrogate loss obtained by fixing alpha at sqrt(2 / (lambda1 eta))"""
    return 0.5 * (1.0 - math.sqrt(2.0) * beta2 / math.sqrt(cfg.lambda1 * cfg.eta)) ** 2


def loss_parts(cfg, p):
    check_finite(p)
    l1 = 0.5 * cfg.lambda1 * (p.alpha * p.beta1) ** 2
    l2 = 0.5 * cfg.lambda2 * (p.alpha * p.beta2 - 1.0) ** 2
    return LossParts(total=l1 + l2, l1=l1, l2=l2, lhat=lhat(cfg, p.beta2))


def gradient(cfg, p):
    """gradient (d/dalpha, d/dbeta1, d/dbeta2) of the loss"""
    check_finite(p)
    a, b1, b2 = p.alpha, p.beta1, p.beta2
    residual = 1.0 - a * b2
    return np.array(
        [
            cfg.lambda1 * b1 * b1 * a - cfg.lambda2 * b2 * residual,
            cfg.lambda1 * a * a * b1,
            -cfg.lambda2 * a * residual,
        ],
        dtype=np.float64,
    )


def hessian(cfg, p):
    check_finite(p)
    a, b1, b2 = p.alpha, p.beta1, p.beta2
    l1, l2 = cfg.lambda1, cfg.lambda2
    h_ab1 = 2.0 * l1 * a * b1
    h_ab2 = 2.0 * l2 * a * b2 - l2
    return np.array(
        [
            [l1 * b1 * b1 + l2 * b2 * b2, h_ab1, h_ab2],
            [h_ab1, l1 * a * a, 0.0],
            [h_ab2, 0.0, l2 * a * a],
        ],
        dtype=np.float64,
    )


def sharpness_info(cfg, p):
    """sharpness S(theta), the top eigenvector v and |cos(v, (0, 1, 0))|"""
    value, eigvec, degenerate = top_eigenpair(hessian(cfg, p))
    vec = tuple(float(x) for x in eigvec)
    return SharpnessInfo(value=value, eigvec=vec, cos_beta1=abs(vec[1]), degenerate=degenerate)


def minimizer_sharpness(cfg, alpha):
    """closed form sharpness on the minimizer manifold beta1 = 0, alpha beta2 = 1"""
    a2 = alpha * alpha
    return max(cfg.lambda1 * a2, cfg.lambda2 * a2 + cfg.lambda2 / a2)
