"""Dataset container, validation, and base ensemble quantities.

An ensemble prediction dump is a (M, N, K) tensor of per-member class
probabilities over N samples and K classes, plus one integer label per
sample. Everything downstream (calibration estimators, information
scores, rejection curves) consumes this container or the (N, K)
ensemble marginal derived from it.

Conventions used throughout:

* accuracy of a probabilistic prediction is the expected 0/1 score of
  sampling the prediction: sum_k 1{y = k} * pbar(k | x), averaged;
* predicted accuracy is the self-agreement sum_k pbar(k | x)^2;
* disagreement is the probability two independent member draws predict
  differently, which for the sampling semantics equals one minus the
  mean predicted accuracy (the "marginal-identity" estimator);
* argmax ties resolve to the lowest class index everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import _kernels as K

DISAGREEMENT_MODES = ("marginal-identity", "ordered-pairs", "distinct-pairs")


def fmt_float(x) -> str:
    """Decimal text with enough digits to reconstruct the double exactly."""
    return "%.17g" % float(x)


DEFAULT_TOLERANCE = 1e-6


class ValidationError(ValueError):
    """Raised when an input cannot be turned into a usable dataset."""


@dataclass(frozen=True)
class ValidationPolicy:
    """How strictly probability rows are checked.

    mode "strict" reports any row whose sum deviates from 1 by more than
    tolerance; mode "renormalize" instead divides every row by its own
    sum and reports what was corrected. Rows with nonpositive sum, or
    with an entry below -tolerance, are rejected under both modes.
    """

    mode: str = "strict"
    tolerance: float = DEFAULT_TOLERANCE

    def __post_init__(self):
        if self.mode not in ("strict", "renormalize"):
            raise ValueError("policy mode must be strict or renormalize")
        if not (self.tolerance >= 0.0):
            raise ValueError("tolerance must be nonnegative")


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    max_row_deviation: float
    off_rows: int
    renormalized_rows: int
    negative_entries: int
    rejected_rows: int
    label_violations: int
    messages: tuple
    dataset: Optional["EnsembleDataset"]


@dataclass(frozen=True)
class EnsembleDataset:
    """Immutable (by convention) container for an ensemble prediction dump.

    probs has shape (member_count, sample_count, class_count) in float64;
    labels is int64 in [0, class_count); sample_ids are unique strings
    aligned with the sample axis.
    """

    probs: np.ndarray
    labels: np.ndarray
    sample_ids: tuple = field(default=())

    def __post_init__(self):
        probs = np.ascontiguousarray(self.probs, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if probs.ndim != 3:
            raise ValidationError("probs must have shape (members, samples, classes)")
        m, n, k = probs.shape
        if m < 1:
            raise ValidationError("at least one member required")
        if n < 1:
            raise ValidationError("empty dataset: sample_count must be >= 1")
        if k < 2:
            raise ValidationError("class_count must be >= 2")
        if labels.shape != (n,):
            raise ValidationError("labels must have shape (sample_count,)")
        if labels.size and (labels.min() < 0 or labels.max() >= k):
            raise ValidationError("labels must lie in [0, class_count)")
        ids = self.sample_ids
        if not ids:
            ids = tuple(str(i) for i in range(n))
        else:
            ids = tuple(str(s) for s in ids)
            if len(ids) != n:
                raise ValidationError("sample_ids must align with the sample axis")
            if len(set(ids)) != n:
                raise ValidationError("sample_ids must be unique")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "sample_ids", ids)

    @property
    def member_count(self) -> int:
        return self.probs.shape[0]

    @property
    def sample_count(self) -> int:
        return self.probs.shape[1]

    @property
    def class_count(self) -> int:
        return self.probs.shape[2]


@dataclass(frozen=True)
class ScoreSet:
    """A finite weighted multiset of scalar scores (level-set masses).

    values are the distinct (or per-point) score locations; masses are
    nonnegative and sum to at most 1 plus rounding slack.
    """

    values: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        masses = np.ascontiguousarray(self.masses, dtype=np.float64)
        if values.ndim != 1 or masses.shape != values.shape:
            raise ValueError("values and masses must be aligned 1-d arrays")
        if masses.size and masses.min() < -1e-12:
            raise ValueError("masses must be nonnegative")
        if float(np.sum(masses)) > 1.0 + 1e-9:
            raise ValueError("total mass exceeds 1")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "masses", masses)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.masses))


def validate_arrays(probs, labels, sample_ids=None,
                    policy: ValidationPolicy = ValidationPolicy()) -> ValidationReport:
    """Check (and under the renormalize policy, repair) raw dump arrays.

    Returns a report; report.dataset is the usable EnsembleDataset when
    report.ok, else None. Structural impossibilities (wrong rank, zero
    samples, one class, label shape mismatch) raise ValidationError
    immediately since no report could carry a dataset for them.
    """
    probs = np.ascontiguousarray(probs, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    if probs.ndim != 3:
        raise ValidationError("probs must have shape (members, samples, classes)")
    m, n, k = probs.shape
    if n < 1:
        raise ValidationError("empty dataset: sample_count must be >= 1")
    if k < 2:
        raise ValidationError("class_count must be >= 2")
    if labels.shape != (n,):
        raise ValidationError("labels must have shape (sample_count,)")

    tol = policy.tolerance
    messages = []

    if not np.all(np.isfinite(probs)):
        raise ValidationError("probs contain non-finite entries")

    label_violations = int(np.count_nonzero((labels < 0) | (labels >= k)))
    if label_violations:
        messages.append("%d labels outside [0, %d)" % (label_violations, k))

    negative_entries = int(np.count_nonzero(probs < 0.0))
    hard_negative = bool(np.any(probs < -tol))
    row_sums = probs.sum(axis=2)
    deviation = np.abs(row_sums - 1.0)
    max_dev = float(deviation.max())
    off_rows = int(np.count_nonzero(deviation > tol))
    rejected_rows = int(np.count_nonzero(row_sums <= 0.0))
    if hard_negative:
        bad = int(np.count_nonzero(np.any(probs < -tol, axis=2)))
        rejected_rows = max(rejected_rows, bad)
        messages.append("entries below -tolerance present")
    if rejected_rows:
        messages.append("%d rows rejected (nonpositive sum or entry < -tolerance)"
                        % rejected_rows)
    elif negative_entries:
        messages.append("%d slightly negative entries (within tolerance)"
                        % negative_entries)

    renormalized = 0
    dataset = None
    ok = label_violations == 0 and rejected_rows == 0 and not hard_negative
    if ok:
        if policy.mode == "renormalize":
            probs = probs / row_sums[:, :, None]
            renormalized = off_rows
            if off_rows:
                messages.append("%d rows renormalized" % off_rows)
            off_rows = 0
        elif off_rows:
            ok = False
            messages.append("%d rows deviate from unit sum beyond tolerance"
                            % off_rows)
    if ok:
        dataset = EnsembleDataset(probs, labels, sample_ids or ())

    return ValidationReport(
        ok=ok,
        max_row_deviation=max_dev,
        off_rows=off_rows,
        renormalized_rows=renormalized,
        negative_entries=negative_entries,
        rejected_rows=rejected_rows,
        label_violations=label_violations,
        messages=tuple(messages),
        dataset=dataset,
    )


def validate_dataset(ds: EnsembleDataset,
                     policy: ValidationPolicy = ValidationPolicy()) -> ValidationReport:
    """Validate an already-constructed dataset's probability rows."""
    return validate_arrays(ds.probs, ds.labels, ds.sample_ids, policy)


def marginal(ds: EnsembleDataset) -> np.ndarray:
    """Ensemble marginal pbar(k | x_n): mean over members, shape (N, K)."""
    return K.member_mean(ds.probs)


def apply_top(ds: EnsembleDataset) -> EnsembleDataset:
    """Replace every member row with the one-hot of its argmax.

    Ties go to the lowest class index. Idempotent: the argmax of a
    one-hot row is its hot index.
    """
    m, n, k = ds.probs.shape
    winners = np.argmax(ds.probs, axis=2)
    onehot = np.zeros((m, n, k), dtype=np.float64)
    mm, nn = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
    onehot[mm, nn, winners] = 1.0
    return EnsembleDataset(onehot, ds.labels, ds.sample_ids)


def take(ds: EnsembleDataset, indices) -> EnsembleDataset:
    """Subset the sample axis, preserving order of the given indices."""
    idx = np.asarray(indices, dtype=np.int64)
    ids = tuple(ds.sample_ids[i] for i in idx)
    return EnsembleDataset(ds.probs[:, idx, :], ds.labels[idx], ids)


def per_sample_accuracy(marg: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Probability mass the marginal puts on the true label, per sample."""
    marg = np.asarray(marg, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    return marg[np.arange(marg.shape[0]), labels]


def per_sample_pred_acc(marg: np.ndarray) -> np.ndarray:
    """Self-agreement sum_k pbar(k | x)^2, per sample."""
    return K.row_square_sums(marg)


def per_sample_disagreement(marg: np.ndarray) -> np.ndarray:
    """1 - sum_k pbar(k | x)^2: chance two member draws differ, per sample."""
    return 1.0 - K.row_square_sums(marg)


class Top1(NamedTuple):
    pred: np.ndarray   # argmax class per sample
    conf: np.ndarray   # top-1 probability per sample
    hit: np.ndarray    # 1.0 where argmax equals the label


def top1_quantities(marg: np.ndarray, labels: np.ndarray) -> Top1:
    """Argmax class, its confidence, and its correctness, per sample."""
    marg = np.asarray(marg, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    pred = np.argmax(marg, axis=1)
    conf = marg[np.arange(marg.shape[0]), pred]
    hit = (pred == labels).astype(np.float64)
    return Top1(pred=pred, conf=conf, hit=hit)


class TestError(NamedTuple):
    per_member: np.ndarray  # 1 - mean_n probs[m, n, y_n]
    mean: float


def expected_test_error(ds: EnsembleDataset) -> TestError:
    """Per-member probabilistic test error and its mean over members."""
    per_member = 1.0 - K.member_gather_means(ds.probs, ds.labels)
    return TestError(per_member=per_member, mean=K.mean1d(per_member))


def expected_disagreement(ds: EnsembleDataset, mode: str = "marginal-identity") -> float:
    """Probability two independent member draws predict different classes.

    Modes:
      marginal-identity  1 - mean_n sum_k pbar(k|x_n)^2 (default; O(MNK))
      ordered-pairs      mean over all M^2 ordered member pairs, members
                         drawn independently with replacement (equals
                         marginal-identity up to roundoff)
      distinct-pairs     mean over the M(M-1) pairs of distinct members;
                         requires member_count >= 2
    """
    if mode not in DISAGREEMENT_MODES:
        raise ValueError("unknown disagreement mode %r" % (mode,))
    m = ds.member_count
    if mode == "marginal-identity":
        return K.mean1d(per_sample_disagreement(marginal(ds)))
    agree = K.pairwise_agreement(ds.probs)
    if mode == "ordered-pairs":
        return 1.0 - K.kahan_sum(agree) / (m * m)
    if m < 2:
        raise ValueError("distinct-pairs disagreement needs at least 2 members")
    off_diag = K.kahan_sum(agree) - K.kahan_sum(np.diagonal(agree).copy())
    return 1.0 - off_diag / (m * (m - 1))


def gde_gap(marg: np.ndarray, labels: np.ndarray) -> float:
    """|mean accuracy - mean predicted accuracy|.

    Zero exactly when the expected test error equals the expected
    disagreement (the generalization-disagreement equality).
    """
    acc = K.mean1d(per_sample_accuracy(marg, labels))
    pred = K.mean1d(per_sample_pred_acc(marg))
    return abs(acc - pred)
