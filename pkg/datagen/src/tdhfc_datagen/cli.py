"""Command line front end: one invocation per system writes one file."""

from __future__ import annotations

import argparse
import sys

from .generate import BUNDLED_SYSTEMS, write_interchange


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tdhfc-datagen",
        description="Generate STO-3G interchange JSON for a bundled system.",
    )
    parser.add_argument("system", choices=sorted(BUNDLED_SYSTEMS), help="which molecule")
    parser.add_argument("-o", "--out", required=True, help="output JSON path")
    args = parser.parse_args(argv)
    spec = BUNDLED_SYSTEMS[args.system]
    payload = write_interchange(spec, args.out)
    print(f"wrote {args.out}: {payload['name']} (N={payload['n_basis']})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
