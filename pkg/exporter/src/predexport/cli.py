"""Command-line entry point: one export per invocation, single-threaded."""

import argparse
import sys

from predexport import __version__
from predexport.export import (ExportError, ExportManifest, INPUT_KINDS,
                               OUTPUT_FORMATS, export)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="predexport",
        description="Convert saved per-member prediction arrays into a "
                    "calibdis dump file.")
    p.add_argument("--version", action="version",
                   version="predexport %s" % __version__)
    p.add_argument("--member", action="append", required=True, metavar="PATH",
                   help="member array file (.npy, or .npz holding several "
                        "members); repeat once per file, order is kept")
    p.add_argument("--labels", required=True, metavar="PATH",
                   help="label vector (.npy, or text with one integer "
                        "per line)")
    p.add_argument("--kind", required=True, choices=INPUT_KINDS,
                   help="whether the arrays hold probabilities or logits")
    p.add_argument("--out", required=True, metavar="PATH",
                   help="dump file to write")
    p.add_argument("--format", default="binary", choices=OUTPUT_FORMATS,
                   help="dump format (default binary)")
    p.add_argument("--labels-out", default="", metavar="PATH",
                   help="labels sidecar path for csv output "
                        "(default OUT.labels.csv)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    manifest_kwargs = dict(
        member_paths=tuple(args.member),
        labels_path=args.labels,
        input_kind=args.kind,
        out_path=args.out,
        out_format=args.format,
        labels_out_path=args.labels_out,
    )
    try:
        written = export(ExportManifest(**manifest_kwargs))
    except ExportError as err:
        sys.stderr.write("predexport: %s\n" % err)
        return 1
    except OSError as err:
        sys.stderr.write("predexport: %s\n" % err)
        return 1
    sys.stdout.write("wrote %s\n" % " ".join(written))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
