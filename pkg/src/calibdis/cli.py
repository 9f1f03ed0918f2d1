"""Command-line surface: metrics, rejection, verify, synth, oracle, convert.

Exit codes: 0 success, 2 usage error, 3 input/validation failure,
4 theorem violation from verify. Every report output embeds the tool
version, the input digests, and the full configuration, so runs are
reproducible from their outputs alone.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from . import calibration as cal
from . import core, formats, info, rejection, worlds
from .core import fmt_float


class UsageError(Exception):
    pass


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="calibdis",
        description="Calibration, disagreement, and accuracy-gap metrics "
                    "for ensemble prediction dumps and exact finite worlds.")
    p.add_argument("--version", action="version", version="calibdis %s" % __version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add_dataset_args(sp, labels_help):
        sp.add_argument("--predictions", required=True,
                        help="prediction dump (.csv or binary)")
        sp.add_argument("--labels", help=labels_help)
        sp.add_argument("--top", action="store_true",
                        help="one-hot every member row at its argmax first")

    def add_binning_args(sp):
        sp.add_argument("--bins", type=int, default=cal.DEFAULT_BIN_COUNT)
        sp.add_argument("--binning", choices=("equal-width", "equal-count"),
                        default="equal-width")
        sp.add_argument("--ic-floor", type=float, default=cal.DEFAULT_IC_FLOOR)
        sp.add_argument("--log-base", choices=("nat", "2"), default="nat")

    sp = sub.add_parser("metrics", help="full metric report on a dump")
    add_dataset_args(sp, "labels CSV (required for CSV dumps, overrides "
                         "binary-embedded labels)")
    add_binning_args(sp)
    sp.add_argument("--out", required=True, help="report file")
    sp.add_argument("--diagram", help="also write reliability-diagram CSV here")

    sp = sub.add_parser("rejection", help="metrics over low-score-first subsets")
    add_dataset_args(sp, "labels CSV (required for CSV dumps)")
    add_binning_args(sp)
    sp.add_argument("--score", choices=rejection.SCORE_KINDS,
                    default="pred-error")
    sp.add_argument("--grid", type=int, default=20,
                    help="quantile grid size (fractions i/grid)")
    sp.add_argument("--absolute",
                    help="comma-separated score cutoffs instead of a grid")
    sp.add_argument("--fixed-bins", action="store_true",
                    help="freeze bin edges on the full dataset")
    sp.add_argument("--reverse", action="store_true",
                    help="retain high scores first")
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--format", choices=("csv", "structured-text"),
                    help="default: csv when --out ends in .csv")
    sp.add_argument("--out", required=True, help="curve file")

    sp = sub.add_parser("verify", help="check every proved identity and bound")
    sp.add_argument("--world", help="world spec text file")
    sp.add_argument("--predictions", help="prediction dump")
    sp.add_argument("--labels", help="labels CSV for CSV dumps")
    sp.add_argument("--top", action="store_true")
    sp.add_argument("--ic-floor", type=float, default=cal.DEFAULT_IC_FLOOR)
    sp.add_argument("--log-base", choices=("nat", "2"), default="nat")
    sp.add_argument("--out", help="also write the report here")

    sp = sub.add_parser("synth", help="construct a synthetic world")
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--classes", type=int, required=True)
    sp.add_argument("--xcount", type=int, required=True)
    sp.add_argument("--members", type=int, required=True)
    sp.add_argument("--mode", choices=("matched", "levelset-mixed", "random"),
                    default="matched")
    sp.add_argument("--out", required=True, help="world spec text file")

    sp = sub.add_parser("oracle", help="exact closed-form report on a world")
    sp.add_argument("--world", required=True)
    sp.add_argument("--top", action="store_true")
    sp.add_argument("--ic-floor", type=float, default=cal.DEFAULT_IC_FLOOR)
    sp.add_argument("--log-base", choices=("nat", "2"), default="nat")
    sp.add_argument("--out", required=True, help="report file")

    sp = sub.add_parser("convert", help="translate between dump formats")
    sp.add_argument("--in", dest="src", required=True)
    sp.add_argument("--out", dest="dst", required=True)
    sp.add_argument("--labels", help="labels CSV when the input is CSV")
    sp.add_argument("--labels-out", help="labels sidecar when the output is CSV")
    return p


def _load_dataset(args) -> core.EnsembleDataset:
    fmt = formats.detect_format(args.predictions)
    if fmt == "csv" and not args.labels:
        raise UsageError("CSV dumps carry no labels; pass --labels")
    ds = formats.read_dump(args.predictions, fmt, labels_path=args.labels)
    if getattr(args, "top", False):
        ds = core.apply_top(ds)
    return ds


def _input_items(args) -> list:
    items = [("input", formats.file_digest(args.predictions))]
    items.append(("labels_input",
                  formats.file_digest(args.labels) if args.labels else "-"))
    return items


def _config_items(args) -> list:
    return [
        ("bins", str(args.bins)),
        ("binning", args.binning),
        ("top", "true" if getattr(args, "top", False) else "false"),
        ("ic_floor", fmt_float(args.ic_floor)),
        ("log_base", args.log_base),
    ]


def _scheme(args) -> cal.BinningScheme:
    return cal.BinningScheme(kind=args.binning, bin_count=args.bins)


def _info_cfg(args) -> info.InfoConfig:
    return info.InfoConfig(log_base=args.log_base, prob_floor=args.ic_floor)


def _cmd_metrics(args) -> int:
    ds = _load_dataset(args)
    scheme = _scheme(args)
    cfg = _info_cfg(args)
    marg = core.marginal(ds)
    labels = ds.labels
    err = core.expected_test_error(ds)
    calrep = cal.calibration_report(marg, labels, scheme,
                                    ic_floor=args.ic_floor,
                                    log_base=args.log_base)
    inforep = info.info_report(ds, cfg)
    t1 = core.top1_quantities(marg, labels)
    items = _input_items(args) + _config_items(args)
    items += [
        ("members", str(ds.member_count)),
        ("samples", str(ds.sample_count)),
        ("classes", str(ds.class_count)),
        ("acc", fmt_float(np.mean(core.per_sample_accuracy(marg, labels)))),
        ("pred_acc", fmt_float(np.mean(core.per_sample_pred_acc(marg)))),
        ("top1_acc", fmt_float(np.mean(t1.hit))),
        ("top1_conf", fmt_float(np.mean(t1.conf))),
        ("test_error", fmt_float(err.mean)),
        ("dis", fmt_float(core.expected_disagreement(ds))),
        ("gde_gap", fmt_float(core.gde_gap(marg, labels))),
        ("ece", fmt_float(calrep.ece)),
        ("cwce", fmt_float(calrep.cwce)),
        ("cace", fmt_float(calrep.cace)),
        ("cace_qweighted", fmt_float(calrep.cace_qweighted)),
        ("ecace", fmt_float(calrep.ecace)),
        ("cace_levelset", fmt_float(cal.cace_levelset(marg, labels))),
        ("ecace_levelset", fmt_float(inforep.ecace_levelset)),
        ("mean_entropy_marginal", fmt_float(inforep.mean_entropy_marginal)),
        ("mean_entropy_conditional", fmt_float(inforep.mean_entropy_conditional)),
        ("approx_entropy_marginal", fmt_float(inforep.approx_entropy_marginal)),
        ("bald_mean", fmt_float(inforep.bald_mean)),
        ("bald_kl_mean", fmt_float(inforep.bald_kl_mean)),
        ("approx_bald_mean", fmt_float(inforep.approx_bald_mean)),
        ("cross_entropy", fmt_float(inforep.cross_entropy)),
        ("entropic_gde_gap", fmt_float(inforep.entropic_gde_gap)),
        ("test_error_upper_bound", fmt_float(inforep.test_error_upper_bound)),
    ]
    formats._write_text(args.out, formats.render_report("metrics", items))
    if args.diagram:
        formats._write_text(args.diagram, formats.diagram_csv_text(calrep.per_bin))
    return 0


def _cmd_rejection(args) -> int:
    ds = _load_dataset(args)
    if args.absolute:
        try:
            taus = tuple(float(v) for v in args.absolute.split(","))
        except ValueError:
            raise UsageError("--absolute wants comma-separated numbers")
        spec = rejection.SweepSpec(kind="absolute", thresholds=taus)
    else:
        spec = rejection.SweepSpec(kind="quantile", grid_count=args.grid)
    curve = rejection.rejection_curve(
        ds, spec, score_kind=args.score, scheme=_scheme(args),
        cfg=_info_cfg(args), fixed_bins=args.fixed_bins,
        reverse=args.reverse, threads=args.threads)
    fmt = args.format or ("csv" if args.out.lower().endswith(".csv")
                          else "structured-text")
    digest = formats.file_digest(args.predictions)
    payload = rejection.emit_curve(curve, fmt, dataset_digest=digest)
    with open(args.out, "wb") as fh:
        fh.write(payload)
    if fmt == "csv":
        meta = _input_items(args) + _config_items(args) + [
            ("score_kind", args.score),
            ("sweep", "absolute" if args.absolute else
             "quantile grid_count=%d" % args.grid),
            ("fixed_bins", "true" if args.fixed_bins else "false"),
            ("reverse", "true" if args.reverse else "false"),
            ("curve", formats.file_digest(args.out)),
        ]
        formats._write_text(args.out + ".meta.txt",
                            formats.render_report("rejection-meta", meta))
    return 0


def _check_items(checks) -> list:
    items = []
    for c in checks:
        items.append(("check", "%s %s slack=%s tol=%s"
                      % (c.name, "pass" if c.passed else "FAIL",
                         fmt_float(c.slack), fmt_float(c.tolerance))))
    return items


def _cmd_verify(args) -> int:
    if bool(args.world) == bool(args.predictions):
        raise UsageError("verify wants exactly one of --world or --predictions")
    cfg = info.InfoConfig(log_base=args.log_base, prob_floor=args.ic_floor)
    if args.world:
        world = formats.read_world(args.world)
        if args.top:
            world = worlds.world_apply_top(world)
        rep = worlds.exact_report(world, cfg)
        suite = worlds.verify_theorems(world, cfg)
        items = [("input", formats.file_digest(args.world)),
                 ("subject", "world"),
                 ("top", "true" if args.top else "false"),
                 ("ic_floor", fmt_float(args.ic_floor)),
                 ("log_base", args.log_base),
                 ("acc", fmt_float(rep.acc)),
                 ("pred_acc", fmt_float(rep.pred_acc)),
                 ("test_error", fmt_float(rep.test_error)),
                 ("dis", fmt_float(rep.dis)),
                 ("gde_gap", fmt_float(rep.gde_gap)),
                 ("cace", fmt_float(rep.cace_exact)),
                 ("cwce", fmt_float(rep.cwce_exact)),
                 ("ecace", fmt_float(rep.ecace_exact))]
    else:
        ds = _load_dataset(args)
        suite = worlds.verify_dataset(ds, cfg)
        marg = core.marginal(ds)
        items = _input_items(args)
        items += [("subject", "dataset"),
                  ("top", "true" if args.top else "false"),
                  ("ic_floor", fmt_float(args.ic_floor)),
                  ("log_base", args.log_base),
                  ("gde_gap", fmt_float(core.gde_gap(marg, ds.labels))),
                  ("cace", fmt_float(cal.cace_levelset(marg, ds.labels)))]
    items += _check_items(suite.checks)
    items.append(("verdict", "pass" if suite.ok else "FAIL"))
    text = formats.render_report("verify", items)
    sys.stdout.write(text)
    if args.out:
        formats._write_text(args.out, text)
    return 0 if suite.ok else 4


def _cmd_synth(args) -> int:
    if args.mode == "random":
        world = worlds.build_random_world(args.seed, args.classes,
                                          args.xcount, args.members)
    else:
        world = worlds.build_classwise_calibrated_world(
            args.seed, args.classes, args.xcount, args.members, args.mode)
    header = ["# tool_version %s" % __version__,
              "# seed %d classes %d xcount %d members %d mode %s"
              % (args.seed, args.classes, args.xcount, args.members, args.mode)]
    formats._write_text(args.out,
                        "\n".join(header) + "\n" + formats.world_to_text(world))
    return 0


def _cmd_oracle(args) -> int:
    world = formats.read_world(args.world)
    if args.top:
        world = worlds.world_apply_top(world)
    cfg = info.InfoConfig(log_base=args.log_base, prob_floor=args.ic_floor)
    rep = worlds.exact_report(world, cfg)
    items = [("input", formats.file_digest(args.world)),
             ("top", "true" if args.top else "false"),
             ("ic_floor", fmt_float(args.ic_floor)),
             ("log_base", args.log_base),
             ("xcount", str(world.x_count)),
             ("classes", str(world.class_count)),
             ("members", str(world.member_count))]
    for key in ("acc", "pred_acc", "test_error", "dis", "gde_gap",
                "top1_acc", "top1_conf", "cace_exact", "cwce_exact",
                "ecace_exact", "cace_qweighted_exact", "bald", "bald_kl",
                "approx_bald", "cross_entropy", "mean_entropy_marginal",
                "mean_entropy_conditional", "entropic_gde_gap",
                "test_error_upper_bound"):
        items.append((key, fmt_float(getattr(rep, key))))
    ls = rep.levelsets
    for i in range(ls.values.size):
        items.append(("level", "%s %s %s" % (fmt_float(ls.values[i]),
                                             fmt_float(ls.label_masses[i]),
                                             fmt_float(ls.self_masses[i]))))
    formats._write_text(args.out, formats.render_report("oracle", items))
    return 0


def _cmd_convert(args) -> int:
    src_fmt = formats.detect_format(args.src)
    dst_fmt = formats.detect_format(args.dst)
    if src_fmt == "csv" and not args.labels:
        raise UsageError("CSV input needs --labels")
    ds = formats.read_dump(args.src, src_fmt, labels_path=args.labels)
    labels_out = args.labels_out
    if dst_fmt == "csv" and labels_out is None:
        labels_out = args.dst + ".labels.csv"
    formats.write_dump(ds, args.dst, dst_fmt, labels_path=labels_out)
    return 0


_COMMANDS = {
    "metrics": _cmd_metrics,
    "rejection": _cmd_rejection,
    "verify": _cmd_verify,
    "synth": _cmd_synth,
    "oracle": _cmd_oracle,
    "convert": _cmd_convert,
}


def cli(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except UsageError as err:
        print("usage error: %s" % err, file=sys.stderr)
        return 2
    except (formats.DumpError, core.ValidationError) as err:
        print("input error: %s" % err, file=sys.stderr)
        return 3
    except (ValueError, OSError) as err:
        print("error: %s" % err, file=sys.stderr)
        return 3


def main(argv=None) -> int:
    return cli(argv)


if __name__ == "__main__":
    sys.exit(main())
