"""Command-line wrapper: ``convert <name> <input-dir> <output-dir>``."""

from __future__ import annotations

import argparse
import os
import sys

from .convert import ConversionError, convert, convert_cora_ml


def build_parser():
    parser = argparse.ArgumentParser(
        prog="convert",
        description="Convert a legacy citation dataset into the portable "
                    "directory format")
    parser.add_argument("name", help="dataset name (e.g. cora, citeseer, "
                        "pubmed, cora_ml)")
    parser.add_argument("input_dir", help="directory with the raw files")
    parser.add_argument("output_dir", help="destination directory")
    parser.add_argument("--seed", type=int, default=0,
                        help="split seed (cora_ml only)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.name == "cora_ml":
            convert_cora_ml(os.path.join(args.input_dir, "cora_ml.npz"),
                            args.output_dir, seed=args.seed)
        else:
            convert(args.name, args.input_dir, args.output_dir)
    except (ConversionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"converted {args.name} -> {args.output_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
