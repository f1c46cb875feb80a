"""run configuration: the flat `key = value` format, shipped presets and command line overrides"""

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import List, Optional

import fsspec

from minimal_eos.dynamics import CLIP_VARIANTS
from minimal_eos.errors import ConfigError
from minimal_eos.model import ModelConfig, Params
from minimal_eos.regions import PREDICATES, SAMPLERS

LOGGER = logging.getLogger(__name__)

CONFIG_FOLDER = Path(__file__).parent.parent / "configs"
PRESETS = ("figure1", "figure2", "figure3", "figure4", "figure5", "figure7")
MODES = ("gd", "gd-unclipped", "gf", "constrained")
OUTPUTS = ("csv", "svg", "report")
REQUIRED_KEYS = ("lambda1", "lambda2", "eta", "steps", "init")
EXPLICIT_KEYS = ("alpha", "beta1", "beta2")


@dataclass
class RunConfig:
    """everything needed to run, verify and write one experiment"""

    lambda1: float
    lambda2: float
    eta: float
    steps: int
    init: str
    alpha: Optional[float] = None
    beta1: Optional[float] = None
    beta2: Optional[float] = None
    sampler: str = "X"
    seed: int = 0
    mode: str = "gd"
    outputs: List[str] = field(default_factory=lambda: list(OUTPUTS))
    clip_variant: str = "cap"
    allow_out_of_theory: bool = False
    profile: str = "X"
    preset: Optional[str] = None
    name: Optional[str] = None
    product_bound: float = 1.0
    collapse_threshold: float = 0.1
    converge_epsilon: Optional[float] = None
    converge_delta: float = 0.1
    grad_tol: float = 1e-10
    max_gf_steps: int = 10**8
    gf_sample_every: int = 1000
    sweep_etas: List[float] = field(default_factory=list)
    sweep_seeds: List[int] = field(default_factory=list)

    @property
    def run_name(self):
        return self.name or self.preset or "run"

    @property
    def unclipped(self):
        return self.mode == "gd-unclipped"

    def model_config(self, eta=None):
        return ModelConfig(
            self.lambda1,
            self.lambda2,
            self.eta if eta is None else eta,
            allow_out_of_theory=self.allow_out_of_theory,
        )

    def initial_params(self, eta=None, seed=None):
        """explicit parameters, or a draw of the configured sampler"""
        if self.init == "explicit":
            return Params(self.alpha, self.beta1, self.beta2)
        return SAMPLERS[self.sampler](self.model_config(eta), self.seed if seed is None else seed)

    def region_tag(self, eta=None, seed=None):
        """empty when the initial point lies in the profile region, else "out-of-region" """
        p = self.initial_params(eta, seed)
        report = PREDICATES[self.profile](self.model_config(eta), p)
        if report.member:
            return ""
        LOGGER.info(f"initial point {p} is outside {self.profile}: {report.violated_names()}")
        return "out-of-region"


def _parse_float(key, text):
    try:
        if "/" in text:
            value = float(Fraction(text.replace(" ", "")))
        else:
            value = float(text)
    except (ValueError, ZeroDivisionError) as e:
        raise ConfigError(f"{key}: cannot read {text!r} as a number") from e
    if not math.isfinite(value):
        raise ConfigError(f"{key}: {text!r} is not finite")
    return value


def _parse_int(key, text):
    value = _parse_float(key, text)
    if value != int(value):
        raise ConfigError(f"{key}: {text!r} is not an integer")
    return int(value)


def _parse_bool(key, text):
    if text.lower() == "true":
        return True
    if text.lower() == "false":
        return False
    raise ConfigError(f"{key}: expected true or false, got {text!r}")


def _parse_choice(choices):
    def parse(key, text):
        if text not in choices:
            raise ConfigError(f"{key}: {text!r} is not one of {', '.join(choices)}")
        return text

    return parse


def _parse_list(item_parser):
    def parse(key, text):
        return [item_parser(key, item.strip()) for item in text.split(",") if item.strip()]

    return parse


def _parse_str(_, text):
    return text


PARSERS = {
    "lambda1": _parse_float,
    "lambda2": _parse_float,
    "eta": _parse_float,
    "steps": _parse_int,
    "init": _parse_choice(("explicit", "sampler")),
    "alpha": _parse_float,
    "beta1": _parse_float,
    "beta2": _parse_float,
    "sampler": _parse_choice(tuple(SAMPLERS)),
    "seed": _parse_int,
    "mode": _parse_choice(MODES),
    "outputs": _parse_list(_parse_choice(OUTPUTS)),
    "clip_variant": _parse_choice(CLIP_VARIANTS),
    "allow_out_of_theory": _parse_bool,
    "profile": _parse_choice(tuple(PREDICATES)),
    "preset": _parse_choice(PRESETS),
    "name": _parse_str,
    "product_bound": _parse_float,
    "collapse_threshold": _parse_float,
    "converge_epsilon": _parse_float,
    "converge_delta": _parse_float,
    "grad_tol": _parse_float,
    "max_gf_steps": _parse_int,
    "gf_sample_every": _parse_int,
    "sweep_etas": _parse_list(_parse_float),
    "sweep_seeds": _parse_list(_parse_int),
}


def validate(cfg):
    """domain checks shared by parsing and overrides; returns cfg"""
    if cfg.steps < 0:
        raise ConfigError(f"steps must be nonnegative, got {cfg.steps}")
    if cfg.init == "explicit":
        missing = [k for k in EXPLICIT_KEYS if getattr(cfg, k) is None]
        if missing:
            raise ConfigError(f"explicit init needs {', '.join(missing)}", missing_keys=missing)
    for eta in [cfg.eta] + list(cfg.sweep_etas):
        cfg.model_config(eta)
    if cfg.product_bound <= 0 or cfg.collapse_threshold <= 0 or cfg.grad_tol <= 0:
        raise ConfigError("product_bound, collapse_threshold and grad_tol must be positive")
    if cfg.max_gf_steps <= 0 or cfg.gf_sample_every < 0:
        raise ConfigError("max_gf_steps must be positive and gf_sample_every nonnegative")
    return cfg


def parse_config(text):
    """
    Parse the flat configuration format.

    One `key = value` per line, `#` starts a comment, unknown or repeated keys
    are errors, and every missing required key is listed in a single error.
    """
    values = {}
    for number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {number}: expected `key = value`, got {raw_line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in PARSERS:
            raise ConfigError(f"line {number}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {number}: key {key!r} given twice")
        values[key] = PARSERS[key](key, value)

    missing = [k for k in REQUIRED_KEYS if k not in values]
    if values.get("init") == "explicit":
        missing += [k for k in EXPLICIT_KEYS if k not in values]
    if missing:
        raise ConfigError(f"missing keys: {', '.join(missing)}", missing_keys=missing)
    return validate(RunConfig(**values))


def load_config(path):
    with fsspec.open(path, "r", encoding="utf-8") as f:
        return parse_config(f.read())


def load_preset(name):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}, choose from {', '.join(PRESETS)}")
    return load_config(str(CONFIG_FOLDER / f"{name}.cfg"))


def apply_overrides(cfg, overrides):
    """
    Replace every field of `overrides` whose value is not None and validate the result.

    `unclipped=True` switches the mode to gd-unclipped.
    """
    changes = {k: v for k, v in overrides.items() if v is not None}
    if changes.pop("unclipped", False):
        changes["mode"] = "gd-unclipped"
    for key, value in list(changes.items()):
        if key not in PARSERS:
            raise ConfigError(f"unknown override {key!r}")
        if isinstance(value, str) and PARSERS[key] is not _parse_str:
            changes[key] = PARSERS[key](key, value)
    return validate(dataclasses.replace(cfg, **changes))


def resolve_config(config=None, preset=None, **overrides):
    """configuration file, else preset, then overrides"""
    if config is not None:
        cfg = load_config(config)
    elif preset is not None:
        cfg = load_preset(preset)
    else:
        raise ConfigError("give --config <path> or --preset <name>")
    return apply_overrides(cfg, overrides)
