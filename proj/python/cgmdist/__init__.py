"""Distributional analysis of continuous glucose monitoring data."""

from ._core import *  # noqa: F401,F403
from ._core import __version__, run_cli


def main() -> int:
    """Console entry point mirroring the native `cgmdist` executable."""
    import sys

    code, out, err = run_cli(sys.argv[1:])
    sys.stdout.write(out)
    sys.stderr.write(err)
    return code
