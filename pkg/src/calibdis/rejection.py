"""Rejection curves: metrics over subsets that keep the lowest-scoring samples.

A sweep either walks a quantile grid (retain the lowest ceil(f*N) scores
for fractions f = i/g) or a list of absolute score cutoffs (retain
scores <= tau). Scores never depend on labels, so the curves are valid
selective-prediction diagnostics. Ties are broken by sample index, which
makes every curve reproducible across runs and thread counts.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import calibration as cal
from . import core, info

SCORE_KINDS = ("pred-error", "bald", "approx-bald")

# metric columns every emitted curve carries, in order
CURVE_COLUMNS = (
    "threshold", "retained_count", "retained_fraction", "mean_score",
    "test_error", "dis", "gde_gap", "ece", "cwce", "cace",
    "cace_qweighted", "ecace", "bald_mean", "approx_bald_mean",
    "cross_entropy",
)


def per_sample_score(ds: core.EnsembleDataset, kind: str,
                     cfg: info.InfoConfig = info.InfoConfig()) -> np.ndarray:
    """Label-free uncertainty score per sample; low means keep."""
    if kind not in SCORE_KINDS:
        raise ValueError("score kind must be one of %s" % (SCORE_KINDS,))
    if kind == "pred-error":
        return 1.0 - core.per_sample_pred_acc(core.marginal(ds))
    if kind == "bald":
        return info.bald(ds, cfg).values
    return info.approx_bald(ds, form="variance").values


@dataclass(frozen=True)
class SweepSpec:
    """Which subsets a curve visits.

    kind "quantile": grid_count evenly spaced retained fractions
    i/grid_count, i = 1..grid_count. kind "absolute": one row per given
    score threshold, in the given order.
    """

    kind: str = "quantile"
    grid_count: int = 20
    thresholds: tuple = ()

    def __post_init__(self):
        if self.kind not in ("quantile", "absolute"):
            raise ValueError("sweep kind must be quantile or absolute")
        if self.kind == "quantile" and self.grid_count < 1:
            raise ValueError("grid_count must be >= 1")
        if self.kind == "absolute" and len(self.thresholds) == 0:
            raise ValueError("absolute sweep needs at least one threshold")

    def fractions(self) -> tuple:
        if self.kind != "quantile":
            return ()
        g = self.grid_count
        return tuple((i + 1) / g for i in range(g))


@dataclass(frozen=True)
class RejectionRow:
    threshold: float
    retained_count: int
    retained_fraction: float
    mean_score: Optional[float] = None
    test_error: Optional[float] = None
    dis: Optional[float] = None
    gde_gap: Optional[float] = None
    ece: Optional[float] = None
    cwce: Optional[float] = None
    cace: Optional[float] = None
    cace_qweighted: Optional[float] = None
    ecace: Optional[float] = None
    bald_mean: Optional[float] = None
    approx_bald_mean: Optional[float] = None
    cross_entropy: Optional[float] = None

    @property
    def empty(self) -> bool:
        return self.retained_count == 0


@dataclass(frozen=True)
class RejectionCurve:
    score_kind: str
    spec: SweepSpec
    scheme: cal.BinningScheme
    fixed_bins: bool
    reverse: bool
    ic_floor: float
    log_base: str
    sample_count: int
    rows: tuple


def _retained_count(fraction: float, n: int) -> int:
    # guard against 0.15 * 420 = 62.999999... style float drift
    count = math.ceil(fraction * n - 1e-9)
    return min(max(count, 1), n)


def _fixed_edge_set(ds, scheme, ic_floor, log_base):
    """Bin edges frozen on the full dataset, reused for every subset."""
    marg = core.marginal(ds)
    labels = ds.labels
    t1 = core.top1_quantities(marg, labels)
    q = marg.ravel()
    scale = cal._log_scale(log_base)
    top = -math.log(ic_floor) * scale
    v_t = -np.log(np.maximum(q, ic_floor)) * scale
    s = core.per_sample_accuracy(marg, labels)
    v_s = -np.log(np.maximum(s, ic_floor)) * scale
    acc_vals = np.concatenate([s, q])
    ic_scheme = cal.BinningScheme(kind=scheme.kind,
                                  bin_count=scheme.bin_count, lo=0.0, hi=top)
    return {
        "ece": cal.make_bins(scheme, t1.conf),
        "cace": cal.make_bins(scheme, q),
        "cwce": cal.make_bins(scheme, q),
        "qweighted": cal.make_bins(scheme, acc_vals),
        "ecace": cal.make_bins(ic_scheme, np.concatenate([v_s, v_t])),
    }


def _metrics_row(ds, threshold, indices, scores, scheme, edges, cfg):
    n_total = ds.sample_count
    count = int(indices.size)
    if count == 0:
        return RejectionRow(threshold=float(threshold), retained_count=0,
                            retained_fraction=0.0)
    sub = core.take(ds, indices)
    marg = core.marginal(sub)
    labels = sub.labels
    err = core.expected_test_error(sub)
    dis = core.expected_disagreement(sub, mode="marginal-identity")
    gap = core.gde_gap(marg, labels)
    e = edges or {}
    return RejectionRow(
        threshold=float(threshold),
        retained_count=count,
        retained_fraction=count / n_total,
        mean_score=float(np.mean(scores[indices])),
        test_error=err.mean,
        dis=dis,
        gde_gap=gap,
        ece=cal.ece(marg, labels, scheme, edges=e.get("ece")),
        cwce=cal.cwce(marg, labels, scheme, edges=e.get("cwce")),
        cace=cal.cace(marg, labels, scheme, edges=e.get("cace")),
        cace_qweighted=cal.cace_qweighted(marg, labels, scheme,
                                          edges=e.get("qweighted")),
        ecace=cal.ecace(marg, labels, scheme, ic_floor=cfg.prob_floor,
                        log_base=cfg.log_base, edges=e.get("ecace")),
        bald_mean=info.bald(sub, cfg).mean,
        approx_bald_mean=info.approx_bald(sub, form="variance").mean,
        cross_entropy=info.cross_entropy_dataset(marg, labels, cfg),
    )


def rejection_curve(ds: core.EnsembleDataset,
                    spec: SweepSpec = SweepSpec(),
                    score_kind: str = "pred-error",
                    scheme: cal.BinningScheme = cal.BinningScheme(),
                    cfg: info.InfoConfig = info.InfoConfig(),
                    fixed_bins: bool = False,
                    reverse: bool = False,
                    threads: int = 1) -> RejectionCurve:
    """Metrics on each retained subset of a low-score-first sweep.

    The threshold column always holds the score cutoff actually applied
    (the largest retained score on a quantile grid), so a quantile sweep
    and an absolute sweep at the matching order statistics emit equal
    rows. reverse retains high scores first instead. By default every
    subset is re-binned on its own values (adaptive schemes adapt per
    subset); fixed_bins freezes edges on the full dataset instead.
    threads parallelizes rows without changing them.
    """
    scores = per_sample_score(ds, score_kind, cfg)
    n = ds.sample_count
    key = -scores if reverse else scores
    order = np.argsort(key, kind="stable")
    sorted_scores = scores[order]
    edges = _fixed_edge_set(ds, scheme, cfg.prob_floor, cfg.log_base) \
        if fixed_bins else None

    jobs = []
    if spec.kind == "quantile":
        for f in spec.fractions():
            count = _retained_count(f, n)
            cutoff = float(sorted_scores[count - 1])
            jobs.append((cutoff, np.sort(order[:count])))
    else:
        for tau in spec.thresholds:
            if reverse:
                # sorted_scores is descending; retain scores >= tau
                count = int(np.searchsorted(-sorted_scores, -tau, side="right"))
            else:
                count = int(np.searchsorted(sorted_scores, tau, side="right"))
            jobs.append((float(tau), np.sort(order[:count])))

    def run(job):
        threshold, indices = job
        return _metrics_row(ds, threshold, indices, scores, scheme, edges, cfg)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = tuple(pool.map(run, jobs))
    else:
        rows = tuple(run(job) for job in jobs)

    return RejectionCurve(score_kind=score_kind, spec=spec, scheme=scheme,
                          fixed_bins=fixed_bins, reverse=reverse,
                          ic_floor=cfg.prob_floor, log_base=cfg.log_base,
                          sample_count=n, rows=rows)


def _cell(value, blank: str) -> str:
    if value is None:
        return blank
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return core.fmt_float(value)


def _row_cells(row: RejectionRow, blank: str) -> list:
    return [
        core.fmt_float(row.threshold),
        str(row.retained_count),
        core.fmt_float(row.retained_fraction),
        _cell(row.mean_score, blank),
        _cell(row.test_error, blank),
        _cell(row.dis, blank),
        _cell(row.gde_gap, blank),
        _cell(row.ece, blank),
        _cell(row.cwce, blank),
        _cell(row.cace, blank),
        _cell(row.cace_qweighted, blank),
        _cell(row.ecace, blank),
        _cell(row.bald_mean, blank),
        _cell(row.approx_bald_mean, blank),
        _cell(row.cross_entropy, blank),
    ]


def emit_curve(curve: RejectionCurve, fmt: str = "csv",
               dataset_digest: str = "") -> bytes:
    """Deterministic serialization of a curve.

    csv: fixed 15-column schema, one row per sweep point, metric cells
    left empty on flagged (empty-subset) rows. structured-text: the same
    rows plus the sweep spec, configuration, and dataset digest.
    """
    if fmt == "csv":
        lines = [",".join(CURVE_COLUMNS)]
        for row in curve.rows:
            lines.append(",".join(_row_cells(row, "")))
        return ("\n".join(lines) + "\n").encode("utf-8")
    if fmt != "structured-text":
        raise ValueError("format must be csv or structured-text")
    from . import __version__
    spec = curve.spec
    if spec.kind == "quantile":
        sweep = "quantile grid_count=%d" % spec.grid_count
    else:
        sweep = "absolute thresholds=%s" % ",".join(
            core.fmt_float(t) for t in spec.thresholds)
    lines = [
        "calibdis-curve v1",
        "tool_version %s" % __version__,
        "dataset_digest %s" % (dataset_digest or "-"),
        "sample_count %d" % curve.sample_count,
        "score_kind %s" % curve.score_kind,
        "sweep %s" % sweep,
        "binning %s bins=%d" % (curve.scheme.kind, curve.scheme.bin_count),
        "fixed_bins %s" % ("true" if curve.fixed_bins else "false"),
        "reverse %s" % ("true" if curve.reverse else "false"),
        "ic_floor %s" % core.fmt_float(curve.ic_floor),
        "log_base %s" % curve.log_base,
        "columns %s" % " ".join(CURVE_COLUMNS),
    ]
    for row in curve.rows:
        lines.append("row %s" % " ".join(_row_cells(row, "-")))
    return ("\n".join(lines) + "\n").encode("utf-8")
