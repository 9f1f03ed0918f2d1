"""Binned and level-set calibration error estimators.

All estimators compare two weightings of the same score points:

* ece            top-1 confidence vs top-1 correctness, per sample
* cace           pooled over all (sample, class) points: label-hit mass
                 vs confidence mass per bin ("class-aggregated")
* cwce           the same comparison kept separate per class, summed
* cace_qweighted confidence-weighted variant whose single-bin value
                 recovers the accuracy / predicted-accuracy gap exactly
* ecace          the class-aggregated comparison on the information
                 content scale -log p, truncated at L = -log(floor)

Binned values are aggregations: merging score points into a bin can
only cancel signed differences, so a binned estimate is a lower bound
on its distinct-value (level-set) counterpart. At a single bin, `cace`
is identically 0 while `cace_qweighted` equals the gap; theorems that
relate calibration error to the gap therefore hold for the level-set
estimators (`cace_levelset`, `ecace_levelset`), not the coarse binned
ones. CWCE >= CACE is likewise guaranteed only when both use common bin
edges; with equal-count binning each class adapts its own quantile
edges (per-class coverage is what the scheme is for) and the inequality
is no longer structural.

Bin conventions: bins are half-open [lower, upper) except the last,
which is closed; a value sitting exactly on an interior edge belongs to
the bin on its right.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as K
from .core import ScoreSet, per_sample_accuracy, top1_quantities

DEFAULT_BIN_COUNT = 15
DEFAULT_IC_FLOOR = 1e-12
LEVEL_DIGITS = 12  # scores equal after rounding to this many decimals share a level


def normalize_log_base(log_base: str) -> str:
    """Canonical token for a log base: 'nat' or '2'."""
    token = str(log_base).strip().lower()
    if token in ("nat", "natural", "e"):
        return "nat"
    if token in ("2", "base-2", "bits"):
        return "2"
    raise ValueError("log_base must be 'nat' or '2'")


def _log_scale(log_base: str) -> float:
    return 1.0 if normalize_log_base(log_base) == "nat" else 1.0 / math.log(2.0)


@dataclass(frozen=True)
class BinningScheme:
    """Equal-width or equal-count (quantile) binning of a score interval."""

    kind: str = "equal-width"
    bin_count: int = DEFAULT_BIN_COUNT
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.kind not in ("equal-width", "equal-count"):
            raise ValueError("binning kind must be equal-width or equal-count")
        if self.bin_count < 1:
            raise ValueError("bin_count must be >= 1")
        if not (self.hi > self.lo):
            raise ValueError("empty binning domain")


def make_bins(scheme: BinningScheme, values=None) -> np.ndarray:
    """Bin edges for a scheme; equal-count requires the pooled values.

    Equal-count edges are nearest-rank quantiles of the sorted pooled
    multiset; duplicate or out-of-domain edges are dropped, so the
    result may have fewer bins than requested.
    """
    if scheme.kind == "equal-width":
        return np.linspace(scheme.lo, scheme.hi, scheme.bin_count + 1)
    if values is None:
        raise ValueError("equal-count binning needs the pooled values")
    v = np.sort(np.asarray(values, dtype=np.float64).ravel(), kind="stable")
    if v.size == 0:
        return np.linspace(scheme.lo, scheme.hi, scheme.bin_count + 1)
    edges = [scheme.lo]
    b = scheme.bin_count
    for i in range(1, b):
        rank = math.ceil(i * v.size / b)
        e = float(v[rank - 1])
        if e > edges[-1] and e < scheme.hi:
            edges.append(e)
    edges.append(scheme.hi)
    return np.asarray(edges, dtype=np.float64)


def assign_bins(edges: np.ndarray, values) -> np.ndarray:
    """Bin index per value; interior-edge values go right, domain is clipped."""
    idx = np.searchsorted(edges, np.asarray(values, dtype=np.float64),
                          side="right") - 1
    return np.clip(idx, 0, len(edges) - 2).astype(np.int64)


@dataclass(frozen=True)
class BinStat:
    index: int
    lower: float
    upper: float
    count: int
    hit_mass: float   # sum of hit indicators in the bin
    conf_mass: float  # sum of confidence values in the bin

    @property
    def mean_hit(self) -> float:
        return self.hit_mass / self.count if self.count else float("nan")

    @property
    def mean_conf(self) -> float:
        return self.conf_mass / self.count if self.count else float("nan")


def label_score_set(marg, labels) -> ScoreSet:
    """Scores pbar(y_n | x_n) with mass 1/N each (the label-score variable)."""
    acc = per_sample_accuracy(marg, labels)
    n = acc.shape[0]
    return ScoreSet(acc, np.full(n, 1.0 / n))


def self_score_set(marg) -> ScoreSet:
    """Scores q = pbar(k | x_n) with mass q/N each (the self-score variable)."""
    marg = np.asarray(marg, dtype=np.float64)
    n = marg.shape[0]
    q = marg.ravel()
    return ScoreSet(q, q / n)


def _resolve_edges(scheme, edges, pooled_values):
    if edges is not None:
        e = np.asarray(edges, dtype=np.float64)
        if e.ndim != 1 or e.size < 2 or np.any(np.diff(e) <= 0):
            raise ValueError("explicit edges must be strictly increasing")
        return e
    return make_bins(scheme, pooled_values)


def ece(marg, labels, scheme: BinningScheme = BinningScheme(),
        edges=None) -> float:
    """Expected calibration error of the top-1 prediction."""
    t1 = top1_quantities(marg, labels)
    e = _resolve_edges(scheme, edges, t1.conf)
    idx = assign_bins(e, t1.conf)
    nbins = len(e) - 1
    counts = np.bincount(idx, minlength=nbins).astype(np.float64)
    hit_b = K.binned_sum(idx, t1.hit, nbins)
    conf_b = K.binned_sum(idx, t1.conf, nbins)
    n = t1.conf.shape[0]
    terms = np.zeros(nbins)
    filled = counts > 0
    terms[filled] = (counts[filled] / n) * np.abs(
        hit_b[filled] / counts[filled] - conf_b[filled] / counts[filled])
    return K.kahan_sum(terms)


def ece_bin_stats(marg, labels, scheme: BinningScheme = BinningScheme(),
                  edges=None) -> tuple:
    """Per-bin reliability-diagram data for the top-1 prediction."""
    t1 = top1_quantities(marg, labels)
    e = _resolve_edges(scheme, edges, t1.conf)
    idx = assign_bins(e, t1.conf)
    nbins = len(e) - 1
    counts = np.bincount(idx, minlength=nbins)
    hit_b = K.binned_sum(idx, t1.hit, nbins)
    conf_b = K.binned_sum(idx, t1.conf, nbins)
    return tuple(
        BinStat(index=b, lower=float(e[b]), upper=float(e[b + 1]),
                count=int(counts[b]), hit_mass=float(hit_b[b]),
                conf_mass=float(conf_b[b]))
        for b in range(nbins)
    )


def cace(marg, labels, scheme: BinningScheme = BinningScheme(),
         edges=None) -> float:
    """Class-aggregated calibration error over pooled (sample, class) points.

    Each of the N*K points carries a confidence weight q and a hit
    weight 1{label matches the class}; the estimator sums per-bin
    absolute differences of the two masses. At bin_count=1 both totals
    equal 1, so the estimate collapses to 0; use cace_levelset for the
    distinct-value version that upper-bounds the accuracy gap.
    """
    marg = np.asarray(marg, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n, k = marg.shape
    q = marg.ravel()
    hits = np.zeros((n, k), dtype=np.float64)
    hits[np.arange(n), labels] = 1.0
    e = _resolve_edges(scheme, edges, q)
    idx = assign_bins(e, q)
    nbins = len(e) - 1
    hit_b = K.binned_sum(idx, hits.ravel(), nbins)
    conf_b = K.binned_sum(idx, q, nbins)
    return K.kahan_sum(np.abs(hit_b - conf_b)) / n


def cwce(marg, labels, scheme: BinningScheme = BinningScheme(),
         edges=None) -> float:
    """Class-wise calibration error: the cace comparison per class, summed.

    With equal-count binning each class bins on its own quantiles (the
    adaptive variant); pass explicit edges to force common bins.
    """
    marg = np.asarray(marg, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n, k_count = marg.shape
    total = np.empty(k_count)
    for k in range(k_count):
        q = np.ascontiguousarray(marg[:, k])
        hits = (labels == k).astype(np.float64)
        e = _resolve_edges(scheme, edges, q)
        idx = assign_bins(e, q)
        nbins = len(e) - 1
        hit_b = K.binned_sum(idx, hits, nbins)
        conf_b = K.binned_sum(idx, q, nbins)
        total[k] = K.kahan_sum(np.abs(hit_b - conf_b))
    return K.kahan_sum(total) / n


def cace_qweighted(marg, labels, scheme: BinningScheme = BinningScheme(),
                   edges=None) -> float:
    """Confidence-weighted class-aggregated calibration error.

    Compares the expected label score against the expected self score
    within each bin. Merging all points into one bin yields exactly
    |mean accuracy - mean predicted accuracy|, the gde gap.
    """
    marg = np.asarray(marg, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = marg.shape[0]
    s_values = per_sample_accuracy(marg, labels)
    t_values = marg.ravel()
    e = _resolve_edges(scheme, edges, np.concatenate([s_values, t_values]))
    nbins = len(e) - 1
    s_b = K.binned_sum(assign_bins(e, s_values), s_values, nbins)
    t_b = K.binned_sum(assign_bins(e, t_values), t_values * t_values, nbins)
    return K.kahan_sum(np.abs(s_b - t_b)) / n


def ecace(marg, labels, scheme: BinningScheme = BinningScheme(),
          ic_floor: float = DEFAULT_IC_FLOOR, log_base: str = "nat",
          edges=None) -> float:
    """Class-aggregated calibration error on the information-content scale.

    Scores are -log max(q, ic_floor), living on [0, L] with
    L = -log(ic_floor); the floor only enters the log, masses are the
    raw probabilities. Compares the per-bin mass of label scores
    (1/N each) against self-score mass (q/N each).
    """
    if not (0.0 < ic_floor < 1.0):
        raise ValueError("ic_floor must lie in (0, 1)")
    scale = _log_scale(log_base)
    marg = np.asarray(marg, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = marg.shape[0]
    top = -math.log(ic_floor) * scale
    q = marg.ravel()
    v_t = -np.log(np.maximum(q, ic_floor)) * scale
    s = per_sample_accuracy(marg, labels)
    v_s = -np.log(np.maximum(s, ic_floor)) * scale
    if edges is None:
        dom = BinningScheme(kind=scheme.kind, bin_count=scheme.bin_count,
                            lo=0.0, hi=top)
        e = make_bins(dom, np.concatenate([v_s, v_t]))
    else:
        e = _resolve_edges(scheme, edges, None)
    nbins = len(e) - 1
    s_b = K.binned_sum(assign_bins(e, v_s), np.ones_like(v_s), nbins)
    t_b = K.binned_sum(assign_bins(e, v_t), q, nbins)
    return K.kahan_sum(np.abs(s_b - t_b)) / n


def _level_groups(values, digits=LEVEL_DIGITS):
    keys = np.round(np.asarray(values, dtype=np.float64), digits)
    _, inverse = np.unique(keys, return_inverse=True)
    return inverse.astype(np.int64), int(inverse.max()) + 1 if inverse.size else 0


def cace_levelset(marg, labels, digits: int = LEVEL_DIGITS) -> float:
    """Distinct-value class-aggregated calibration error.

    Groups the pooled (sample, class) scores into levels (values equal
    after rounding) instead of bins. This is the exact-arithmetic
    estimator: it upper-bounds the gde gap and every binned cace.
    """
    marg = np.asarray(marg, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n, k = marg.shape
    q = marg.ravel()
    hits = np.zeros((n, k), dtype=np.float64)
    hits[np.arange(n), labels] = 1.0
    inverse, nlevels = _level_groups(q)
    hit_l = K.binned_sum(inverse, hits.ravel(), nlevels)
    conf_l = K.binned_sum(inverse, q, nlevels)
    return K.kahan_sum(np.abs(hit_l - conf_l)) / n


def ecace_levelset(marg, labels, ic_floor: float = DEFAULT_IC_FLOOR,
                   log_base: str = "nat", digits: int = LEVEL_DIGITS) -> float:
    """Distinct-value calibration error on the information-content scale.

    Levels are grouped on the floored scores -log max(q, ic_floor), so
    probabilities below the floor share the top level L. Satisfies
    ecace_levelset >= |cross_entropy - entropy| / L on floor-consistent
    inputs.
    """
    if not (0.0 < ic_floor < 1.0):
        raise ValueError("ic_floor must lie in (0, 1)")
    scale = _log_scale(log_base)
    marg = np.asarray(marg, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n, k = marg.shape
    q = marg.ravel()
    v_t = -np.log(np.maximum(q, ic_floor)) * scale
    s = per_sample_accuracy(marg, labels)
    v_s = -np.log(np.maximum(s, ic_floor)) * scale
    both = np.concatenate([v_s, v_t])
    inverse, nlevels = _level_groups(both, digits)
    inv_s, inv_t = inverse[:n], inverse[n:]
    s_l = K.binned_sum(inv_s, np.ones_like(v_s), nlevels)
    t_l = K.binned_sum(inv_t, q, nlevels)
    return K.kahan_sum(np.abs(s_l - t_l)) / n


@dataclass(frozen=True)
class CalibrationReport:
    bins_used: BinningScheme
    ic_floor: float
    log_base: str
    ece: float
    cwce: float
    cace: float
    cace_qweighted: float
    ecace: float
    per_bin: tuple  # BinStat per top-1 confidence bin (reliability diagram)


def calibration_report(marg, labels, scheme: BinningScheme = BinningScheme(),
                       ic_floor: float = DEFAULT_IC_FLOOR,
                       log_base: str = "nat") -> CalibrationReport:
    """All binned calibration estimators under one scheme, plus diagram bins."""
    return CalibrationReport(
        bins_used=scheme,
        ic_floor=ic_floor,
        log_base=normalize_log_base(log_base),
        ece=ece(marg, labels, scheme),
        cwce=cwce(marg, labels, scheme),
        cace=cace(marg, labels, scheme),
        cace_qweighted=cace_qweighted(marg, labels, scheme),
        ecace=ecace(marg, labels, scheme, ic_floor, log_base),
        per_bin=ece_bin_stats(marg, labels, scheme),
    )
