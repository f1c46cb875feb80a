"""cli entry point"""

import functools
import sys

import fire
from minimal_eos.experiment import constrained, gf, gfs, sample_init, simulate, sweep, verify


def _exiting(command):
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        sys.exit(command(*args, **kwargs))

    return wrapper


def main():
    """Main entry point"""
    fire.Fire(
        {
            "simulate": _exiting(simulate),
            "gf": _exiting(gf),
            "gfs": _exiting(gfs),
            "constrained": _exiting(constrained),
            "sample-init": _exiting(sample_init),
            "verify": _exiting(verify),
            "sweep": _exiting(sweep),
        }
    )


if __name__ == "__main__":
    main()
