"""Information-theoretic scores for ensembles.

Entropy, mutual information between prediction and member choice
(BALD), the linear information-content approximation ic'(p) = 1 - p
with its entropy/mutual-information analogues, dataset cross-entropy,
the entropic analogue of the accuracy / predicted-accuracy equality,
and the cross-entropy test-error bound.

The probability floor applies inside logarithms only, never to the
probabilities used as weights, so masses stay exact. Natural log is the
default; pass log_base="2" for bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from .calibration import (
    DEFAULT_IC_FLOOR,
    _log_scale,
    ecace_levelset,
    normalize_log_base,
)
from .core import EnsembleDataset, marginal, per_sample_accuracy

BOUND_SLACK = 1e-9  # tolerance granted to exact-arithmetic inequality checks


@dataclass(frozen=True)
class InfoConfig:
    log_base: str = "nat"
    prob_floor: float = DEFAULT_IC_FLOOR

    def __post_init__(self):
        object.__setattr__(self, "log_base", normalize_log_base(self.log_base))
        if not (0.0 < self.prob_floor < 1.0):
            raise ValueError("prob_floor must lie in (0, 1)")

    @property
    def scale(self) -> float:
        return _log_scale(self.log_base)

    @property
    def ic_top(self) -> float:
        """L, the largest representable information content."""
        return -math.log(self.prob_floor) * self.scale


class SampleStat(NamedTuple):
    values: np.ndarray
    mean: float


def _probs_of(ds):
    return ds.probs if isinstance(ds, EnsembleDataset) else np.asarray(ds, dtype=np.float64)


def shannon_entropy(p, cfg: InfoConfig = InfoConfig()) -> np.ndarray:
    """Entropy -sum p log p per row (0 log 0 = 0), floored inside the log.

    Accepts a single probability vector or an (N, K) stack of rows;
    returns a matching scalar array.
    """
    p = np.asarray(p, dtype=np.float64)
    single = p.ndim == 1
    rows = p[None, :] if single else p
    out = K.entropy_rows(rows, cfg.prob_floor) * cfg.scale
    return out[0] if single else out


def approx_entropy(p) -> np.ndarray:
    """Linearized entropy 1 - sum p^2 (the expectation of ic'(p) = 1 - p)."""
    p = np.asarray(p, dtype=np.float64)
    single = p.ndim == 1
    rows = p[None, :] if single else p
    out = 1.0 - K.row_square_sums(rows)
    return out[0] if single else out


def bald(ds, cfg: InfoConfig = InfoConfig()) -> SampleStat:
    """Mutual information between the prediction and the member choice.

    Entropy-difference form: H(marginal) - mean_m H(member row), per
    sample. Nonnegative up to rounding.
    """
    probs = _probs_of(ds)
    marg = K.member_mean(probs)
    m, n, k = probs.shape
    ent_marg = K.entropy_rows(marg, cfg.prob_floor)
    ent_members = K.entropy_rows(probs.reshape(m * n, k), cfg.prob_floor)
    ent_cond = K.member_mean(ent_members.reshape(m, n, 1))[:, 0]
    values = (ent_marg - ent_cond) * cfg.scale
    return SampleStat(values=values, mean=K.mean1d(values))


def bald_kl(ds, cfg: InfoConfig = InfoConfig()) -> SampleStat:
    """The same mutual information as mean KL(member || marginal).

    Algebraically identical to bald(); computed by an independent route
    (the query-by-committee form) so the identity can be tested.
    """
    probs = _probs_of(ds)
    marg = K.member_mean(probs)
    values = K.bald_kl_rows(probs, marg, cfg.prob_floor) * cfg.scale
    return SampleStat(values=values, mean=K.mean1d(values))


def approx_bald(ds, form: str = "variance") -> SampleStat:
    """Linearized mutual information, per sample.

    form="variance": sum over classes of the population variance of the
    member probabilities (divide by M). form="entropy-difference":
    approx_entropy(marginal) - mean_m approx_entropy(member). The two
    agree to rounding; under one-hot members both equal the per-sample
    disagreement rate.
    """
    probs = _probs_of(ds)
    if form == "variance":
        values = K.variance_rows(probs)
    elif form == "entropy-difference":
        m, n, k = probs.shape
        marg = K.member_mean(probs)
        ae_marg = 1.0 - K.row_square_sums(marg)
        ae_members = 1.0 - K.row_square_sums(probs.reshape(m * n, k))
        ae_cond = K.member_mean(ae_members.reshape(m, n, 1))[:, 0]
        values = ae_marg - ae_cond
    else:
        raise ValueError("form must be 'variance' or 'entropy-difference'")
    return SampleStat(values=values, mean=K.mean1d(values))


def cross_entropy_dataset(marg, labels, cfg: InfoConfig = InfoConfig()) -> float:
    """Mean -log max(pbar(y_n | x_n), floor) over samples."""
    s = per_sample_accuracy(np.asarray(marg, dtype=np.float64), labels)
    values = -np.log(np.maximum(s, cfg.prob_floor)) * cfg.scale
    return K.mean1d(values)


def test_error_upper_bound(cross_entropy: float, log_base: str = "nat") -> float:
    """1 - exp(-CE): an upper bound on the probabilistic test error.

    CE must be nonnegative; a base-2 CE is converted to nats first.
    """
    if cross_entropy < 0.0:
        raise ValueError("cross-entropy must be nonnegative")
    nats = cross_entropy / _log_scale(log_base)
    return 1.0 - math.exp(-nats)


@dataclass(frozen=True)
class EntropicGdeReport:
    cross_entropy: float
    mean_entropy_marginal: float
    entropic_gde_gap: float
    ic_top: float
    ecace_levelset: float
    ecace_bound_ok: bool
    ecace_bound_slack: float
    mean_entropy_conditional: float
    top_members: bool  # every member row has zero entropy (one-hot)


def entropic_gde_report(ds, cfg: InfoConfig = InfoConfig()) -> EntropicGdeReport:
    """Gap |CE - H(prediction | input)| and its calibration-error bound.

    The bound gap / L <= distinct-value ecace is checked with the
    level-set estimator: binned aggregation can only cancel signed
    differences, so coarse bins would not honor the inequality. All
    three quantities use the same floored log values, which makes the
    check unconditional.
    """
    probs = _probs_of(ds)
    labels = ds.labels if isinstance(ds, EnsembleDataset) else None
    if labels is None:
        raise ValueError("entropic_gde_report needs a dataset with labels")
    m, n, k = probs.shape
    marg = K.member_mean(probs)
    ce = cross_entropy_dataset(marg, labels, cfg)
    h_marg = K.mean1d(K.entropy_rows(marg, cfg.prob_floor)) * cfg.scale
    gap = abs(ce - h_marg)
    level = ecace_levelset(marg, labels, cfg.prob_floor, cfg.log_base)
    top = cfg.ic_top
    slack = level - gap / top
    ent_members = K.entropy_rows(probs.reshape(m * n, k), cfg.prob_floor)
    h_cond = K.mean1d(ent_members) * cfg.scale
    return EntropicGdeReport(
        cross_entropy=ce,
        mean_entropy_marginal=h_marg,
        entropic_gde_gap=gap,
        ic_top=top,
        ecace_levelset=level,
        ecace_bound_ok=bool(slack >= -BOUND_SLACK),
        ecace_bound_slack=float(slack),
        mean_entropy_conditional=h_cond,
        top_members=bool(h_cond == 0.0),
    )


@dataclass(frozen=True)
class InfoReport:
    cfg: InfoConfig
    mean_entropy_marginal: float
    mean_entropy_conditional: float
    bald_mean: float
    bald_kl_mean: float
    approx_entropy_marginal: float
    approx_bald_mean: float
    cross_entropy: float
    entropic_gde_gap: float
    ecace_levelset: float
    ecace_bound_ok: bool
    test_error_upper_bound: float
    top_members: bool
    per_sample_entropy_marginal: np.ndarray
    per_sample_entropy_conditional: np.ndarray
    per_sample_bald: np.ndarray
    per_sample_bald_kl: np.ndarray
    per_sample_approx_entropy: np.ndarray
    per_sample_approx_bald: np.ndarray


def info_report(ds: EnsembleDataset, cfg: InfoConfig = InfoConfig()) -> InfoReport:
    """Every information score of the module on one dataset."""
    probs = ds.probs
    m, n, k = probs.shape
    marg = marginal(ds)
    ent_marg = K.entropy_rows(marg, cfg.prob_floor) * cfg.scale
    ent_members = K.entropy_rows(probs.reshape(m * n, k), cfg.prob_floor)
    ent_cond = K.member_mean(ent_members.reshape(m, n, 1))[:, 0] * cfg.scale
    b = bald(ds, cfg)
    bkl = bald_kl(ds, cfg)
    ae_marg = approx_entropy(marg)
    ab = approx_bald(ds)
    egde = entropic_gde_report(ds, cfg)
    return InfoReport(
        cfg=cfg,
        mean_entropy_marginal=K.mean1d(ent_marg),
        mean_entropy_conditional=K.mean1d(ent_cond),
        bald_mean=b.mean,
        bald_kl_mean=bkl.mean,
        approx_entropy_marginal=K.mean1d(ae_marg),
        approx_bald_mean=ab.mean,
        cross_entropy=egde.cross_entropy,
        entropic_gde_gap=egde.entropic_gde_gap,
        ecace_levelset=egde.ecace_levelset,
        ecace_bound_ok=egde.ecace_bound_ok,
        test_error_upper_bound=test_error_upper_bound(egde.cross_entropy, cfg.log_base),
        top_members=egde.top_members,
        per_sample_entropy_marginal=ent_marg,
        per_sample_entropy_conditional=ent_cond,
        per_sample_bald=b.values,
        per_sample_bald_kl=bkl.values,
        per_sample_approx_entropy=ae_marg,
        per_sample_approx_bald=ab.values,
    )
