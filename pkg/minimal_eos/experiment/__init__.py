"""experiment harness"""

from .config import load_preset, parse_config, resolve_config
from .main import constrained, gf, gfs, sample_init, simulate, sweep, verify
