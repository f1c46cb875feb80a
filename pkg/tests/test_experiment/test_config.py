import os
import tempfile

import pytest
from minimal_eos.errors import ConfigError
from minimal_eos.experiment.config import (
    PRESETS,
    apply_overrides,
    load_config,
    load_preset,
    parse_config,
    resolve_config,
)
from minimal_eos.model import Params

BASE = """
lambda1 = 100
lambda2 = 0.01   # lambda1 * lambda2 = 1
eta = 1/20
steps = 100
init = sampler
sampler = X
seed = 3
"""


def test_parse_config():
    cfg = parse_config(BASE)
    assert cfg.lambda1 == 100.0
    assert cfg.eta == 0.05
    assert cfg.steps == 100
    assert cfg.seed == 3
    assert cfg.mode == "gd"
    assert cfg.outputs == ["csv", "svg", "report"]
    assert cfg.run_name == "run"


def test_figure1_preset():
    cfg = load_preset("figure1")
    assert (cfg.lambda1, cfg.lambda2, cfg.eta, cfg.steps) == (100.0, 0.01, 0.05, 10000)
    assert cfg.initial_params() == Params(0.54, 0.005, 0.7)
    assert cfg.region_tag() == ""
    assert cfg.run_name == "figure1"


@pytest.mark.parametrize("name", PRESETS)
def test_presets_parse(name):
    cfg = load_preset(name)
    assert cfg.preset == name
    cfg.model_config()


def test_empty_input_lists_missing_keys():
    with pytest.raises(ConfigError) as info:
        parse_config("")
    assert info.value.missing_keys == ["lambda1", "lambda2", "eta", "steps", "init"]


def test_explicit_init_needs_params():
    with pytest.raises(ConfigError) as info:
        parse_config(BASE.replace("init = sampler", "init = explicit") + "alpha = 0.5\n")
    assert info.value.missing_keys == ["beta1", "beta2"]


@pytest.mark.parametrize(
    "text",
    [
        BASE.replace("eta = 1/20", "eta = 0.5"),
        BASE + "unknown = 1\n",
        BASE + "seed = 4\n",
        BASE + "mode = fast\n",
        BASE.replace("steps = 100", "steps = 1.5"),
        BASE + "allow_out_of_theory = maybe\n",
        BASE + "just text\n",
    ],
)
def test_invalid_config(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_out_of_theory_flag():
    cfg = parse_config(BASE.replace("eta = 1/20", "eta = 0.5") + "allow_out_of_theory = true\n")
    assert cfg.eta == 0.5


def test_overrides():
    cfg = parse_config(BASE)
    cfg = apply_overrides(cfg, {"eta": "1/12", "steps": 10, "seed": None, "unclipped": True})
    assert cfg.eta == pytest.approx(1 / 12)
    assert cfg.steps == 10
    assert cfg.seed == 3
    assert cfg.mode == "gd-unclipped"
    assert cfg.unclipped
    with pytest.raises(ConfigError):
        apply_overrides(cfg, {"eta": 0.5})
    with pytest.raises(ConfigError):
        apply_overrides(cfg, {"nope": 1})


def test_list_values():
    cfg = parse_config(BASE + "sweep_etas = 1/20, 1/12\nsweep_seeds = 0,1,2\noutputs = csv\n")
    assert cfg.sweep_etas == [0.05, pytest.approx(1 / 12)]
    assert cfg.sweep_seeds == [0, 1, 2]
    assert cfg.outputs == ["csv"]


def test_out_of_region_tag():
    text = BASE.replace("init = sampler", "init = explicit") + "alpha = 0.3\nbeta1 = 0.0\nbeta2 = 0.5\n"
    cfg = parse_config(text)
    assert cfg.region_tag() == "out-of-region"


def test_load_config_and_resolve():
    with tempfile.TemporaryDirectory() as tmpdir:
        path = os.path.join(tmpdir, "run.cfg")
        with open(path, "w", encoding="utf-8") as f:
            f.write(BASE)
        assert load_config(path) == parse_config(BASE)
        assert resolve_config(config=path, steps=5).steps == 5
    assert resolve_config(preset="figure2").preset == "figure2"
    with pytest.raises(ConfigError):
        resolve_config()
    with pytest.raises(ConfigError):
        load_preset("figure6")
