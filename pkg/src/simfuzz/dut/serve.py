"""Serve a bundled model over the framed stdio protocol.

    python -m simfuzz.dut.serve --dut toy-cpu
"""

import argparse
import sys

from . import create_dut, list_duts
from .wire import serve


def main(argv=None):
    parser = argparse.ArgumentParser(prog="python -m simfuzz.dut.serve")
    parser.add_argument("--dut", required=True, choices=list_duts())
    parser.add_argument("--backend", choices=("python", "cython"), default=None)
    parser.add_argument("--delay-us", type=float, default=0.0)
    args = parser.parse_args(argv)
    opts = {"delay_us": args.delay_us} if args.dut == "synth-delay" else {}
    dut = create_dut(args.dut, backend=args.backend, **opts)
    return serve(dut)


if __name__ == "__main__":
    sys.exit(main())
