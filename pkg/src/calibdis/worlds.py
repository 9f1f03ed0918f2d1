"""Exact finite worlds: ground truth for every identity the package reports.

A world is a small discrete joint distribution over inputs x, labels y,
ensemble members, and their predictions: p(x) * p(y|x) * p(yhat|x,member)
* p(member). Every quantity the empirical estimators approximate is
computed here by exhaustive summation, so estimator code and oracle
code never share an arithmetic route. Worlds stay deliberately small
(tens of x points); plain numpy reductions are used throughout.

Level sets group scores that are equal after rounding to 12 decimal
digits; constructed worlds use decimal/dyadic fractions so levels never
split spuriously.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import EnsembleDataset
from .info import InfoConfig

LEVEL_DIGITS = 12
EXACT_TOL = 1e-12
INEQ_TOL = 1e-9  # slack granted to exact-arithmetic inequalities

MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """Small portable 64-bit generator; the whole package's only RNG.

    The state advances by a fixed odd constant, so a block of draws can
    be produced vectorized from an affine state sequence while matching
    the scalar sequence bit for bit.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & MASK64
        return z ^ (z >> 31)

    def next_float(self) -> float:
        return (self.next_u64() >> 11) * 2.0 ** -53

    def next_below(self, n: int) -> int:
        return self.next_u64() % n

    def floats(self, count: int) -> np.ndarray:
        """count uniforms in [0, 1), identical to repeated next_float()."""
        if count == 0:
            return np.zeros(0)
        idx = np.arange(1, count + 1, dtype=np.uint64)
        states = np.uint64(self.state) + idx * np.uint64(_GAMMA)
        self.state = int(states[-1])
        z = states
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z = z ^ (z >> np.uint64(31))
        return (z >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


@dataclass(frozen=True)
class FiniteWorld:
    """Discrete joint p(x) p(y|x) p(yhat|x,member) p(member)."""

    x_masses: np.ndarray      # (X,) nonnegative, sums to 1
    label_table: np.ndarray   # (X, K) rows sum to 1
    member_tables: np.ndarray  # (M, X, K) rows sum to 1
    member_masses: np.ndarray = field(default=None)  # (M,) sums to 1
    name: str = ""

    def __post_init__(self):
        x_masses = np.ascontiguousarray(self.x_masses, dtype=np.float64)
        label_table = np.ascontiguousarray(self.label_table, dtype=np.float64)
        member_tables = np.ascontiguousarray(self.member_tables, dtype=np.float64)
        if member_tables.ndim != 3:
            raise ValueError("member_tables must have shape (M, X, K)")
        m, x, k = member_tables.shape
        if self.member_masses is None:
            member_masses = np.full(m, 1.0 / m)
        else:
            member_masses = np.ascontiguousarray(self.member_masses, dtype=np.float64)
        if x_masses.shape != (x,) or label_table.shape != (x, k):
            raise ValueError("world tables are inconsistent with (M, X, K)")
        if member_masses.shape != (m,):
            raise ValueError("member_masses must have shape (M,)")
        if k < 2 or x < 1 or m < 1:
            raise ValueError("world needs at least 1 x, 2 classes, 1 member")
        for arr, what in ((x_masses, "x_masses"), (member_masses, "member_masses")):
            if arr.min() < -1e-12:
                raise ValueError("%s must be nonnegative" % what)
            if abs(float(np.sum(arr)) - 1.0) > 1e-9:
                raise ValueError("%s must sum to 1" % what)
        for table, what in ((label_table, "label_table"),
                            (member_tables.reshape(m * x, k), "member_tables")):
            if table.min() < -1e-12 or table.max() > 1.0 + 1e-9:
                raise ValueError("%s entries must lie in [0, 1]" % what)
            if np.abs(table.sum(axis=1) - 1.0).max() > 1e-9:
                raise ValueError("%s rows must sum to 1" % what)
        object.__setattr__(self, "x_masses", x_masses)
        object.__setattr__(self, "label_table", label_table)
        object.__setattr__(self, "member_tables", member_tables)
        object.__setattr__(self, "member_masses", member_masses)

    @property
    def x_count(self) -> int:
        return self.member_tables.shape[1]

    @property
    def class_count(self) -> int:
        return self.member_tables.shape[2]

    @property
    def member_count(self) -> int:
        return self.member_tables.shape[0]


def world_marginal(world: FiniteWorld) -> np.ndarray:
    """Marginal prediction table pbar(k|x): member mixture row by row."""
    return np.einsum("m,mxk->xk", world.member_masses, world.member_tables)


def world_apply_top(world: FiniteWorld) -> FiniteWorld:
    """One-hot every member row at its argmax (ties to the lowest index)."""
    m, x, k = world.member_tables.shape
    winners = np.argmax(world.member_tables, axis=2)
    onehot = np.zeros((m, x, k))
    mm, xx = np.meshgrid(np.arange(m), np.arange(x), indexing="ij")
    onehot[mm, xx, winners] = 1.0
    return FiniteWorld(world.x_masses, world.label_table, onehot,
                       world.member_masses, name=world.name)


def _entropy_table(rows: np.ndarray, floor: float) -> np.ndarray:
    floored = np.maximum(rows, floor) if floor > 0.0 else rows
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.log(floored)
    return np.where(rows > 0.0, -rows * logs, 0.0).sum(axis=-1)


def _group_levels(values: np.ndarray, digits: int = LEVEL_DIGITS):
    keys = np.round(values, digits)
    uniq, inverse = np.unique(keys, return_inverse=True)
    return uniq.size, inverse


@dataclass(frozen=True)
class LevelSets:
    """Distinct score levels with the two masses compared by calibration.

    label_masses[v] aggregates p(x) * p(y=k|x) over (x, k) points whose
    score sits at level v; self_masses[v] aggregates p(x) * q. Each side
    sums to 1.
    """

    values: np.ndarray
    label_masses: np.ndarray
    self_masses: np.ndarray


@dataclass(frozen=True)
class ExactReport:
    acc: float
    pred_acc: float
    test_error: float
    dis: float
    gde_gap: float
    top1_acc: float
    top1_conf: float
    cace_exact: float
    cwce_exact: float
    ecace_exact: float
    cace_qweighted_exact: float
    bald: float
    bald_kl: float
    approx_bald: float
    cross_entropy: float
    mean_entropy_marginal: float
    mean_entropy_conditional: float
    entropic_gde_gap: float
    test_error_upper_bound: float
    levelsets: LevelSets
    ic_floor: float
    log_base: str


def exact_report(world: FiniteWorld, cfg: InfoConfig = InfoConfig()) -> ExactReport:
    """Every reported quantity, by exhaustive summation over the world."""
    px = world.x_masses
    labels = world.label_table
    members = world.member_tables
    wm = world.member_masses
    marg = world_marginal(world)
    x_count, k_count = marg.shape
    scale = cfg.scale
    floor = cfg.prob_floor

    acc = float(np.sum(px * np.sum(labels * marg, axis=1)))
    pred_acc = float(np.sum(px * np.sum(marg * marg, axis=1)))

    # test error via the member route, not via acc
    per_member_acc = np.einsum("x,mxk,xk->m", px, members, labels)
    test_error = float(np.sum(wm * (1.0 - per_member_acc)))

    # disagreement via the independent-pair route, not via pred_acc
    agree = np.einsum("axk,bxk,x->ab", members, members, px)
    dis = 1.0 - float(wm @ agree @ wm)

    gde_gap_val = abs(acc - pred_acc)

    winners = np.argmax(marg, axis=1)
    rows = np.arange(x_count)
    top1_conf = float(np.sum(px * marg[rows, winners]))
    top1_acc = float(np.sum(px * labels[rows, winners]))

    # level sets over the pooled (x, k) points
    q_flat = marg.ravel()
    s_flat = (px[:, None] * labels).ravel()
    t_flat = (px[:, None] * marg).ravel()
    n_levels, inverse = _group_levels(q_flat)
    label_masses = np.bincount(inverse, weights=s_flat, minlength=n_levels)
    self_masses = np.bincount(inverse, weights=t_flat, minlength=n_levels)
    level_values = np.zeros(n_levels)
    level_values[inverse] = q_flat  # representative: any member of the level
    cace_exact = float(np.sum(np.abs(label_masses - self_masses)))
    cace_qweighted_exact = float(
        np.sum(level_values * np.abs(label_masses - self_masses)))

    cwce_exact = 0.0
    for k in range(k_count):
        n_k, inv_k = _group_levels(marg[:, k])
        s_k = np.bincount(inv_k, weights=px * labels[:, k], minlength=n_k)
        t_k = np.bincount(inv_k, weights=px * marg[:, k], minlength=n_k)
        cwce_exact += float(np.sum(np.abs(s_k - t_k)))

    # information-content levels: the floor merges sub-floor scores at L
    ic_flat = -np.log(np.maximum(q_flat, floor)) * scale
    n_ic, inv_ic = _group_levels(ic_flat)
    s_ic = np.bincount(inv_ic, weights=s_flat, minlength=n_ic)
    t_ic = np.bincount(inv_ic, weights=t_flat, minlength=n_ic)
    ecace_exact = float(np.sum(np.abs(s_ic - t_ic)))

    ent_marg = _entropy_table(marg, floor)
    ent_members = _entropy_table(members, floor)  # (M, X)
    mean_ent_marg = float(np.sum(px * ent_marg)) * scale
    mean_ent_cond = float(np.sum(px * (wm @ ent_members))) * scale
    bald_val = float(np.sum(px * (ent_marg - wm @ ent_members))) * scale

    floored_members = np.maximum(members, floor)
    floored_marg = np.maximum(marg, floor)
    with np.errstate(divide="ignore"):
        log_ratio = np.log(floored_members) - np.log(floored_marg)[None, :, :]
    kl_terms = np.where(members > 0.0, members * log_ratio, 0.0).sum(axis=2)
    bald_kl_val = float(np.sum(px * (wm @ kl_terms))) * scale

    ae_marg = 1.0 - np.sum(marg * marg, axis=1)
    ae_members = 1.0 - np.sum(members * members, axis=2)
    approx_bald_val = float(np.sum(px * (ae_marg - wm @ ae_members)))

    ce = float(np.sum(px * np.sum(
        labels * (-np.log(floored_marg)), axis=1))) * scale
    entropic_gap = abs(ce - mean_ent_marg)
    bound = 1.0 - math.exp(-ce / scale)

    return ExactReport(
        acc=acc, pred_acc=pred_acc, test_error=test_error, dis=dis,
        gde_gap=gde_gap_val, top1_acc=top1_acc, top1_conf=top1_conf,
        cace_exact=cace_exact, cwce_exact=cwce_exact, ecace_exact=ecace_exact,
        cace_qweighted_exact=cace_qweighted_exact, bald=bald_val,
        bald_kl=bald_kl_val, approx_bald=approx_bald_val, cross_entropy=ce,
        mean_entropy_marginal=mean_ent_marg,
        mean_entropy_conditional=mean_ent_cond,
        entropic_gde_gap=entropic_gap,
        test_error_upper_bound=bound,
        levelsets=LevelSets(values=level_values, label_masses=label_masses,
                            self_masses=self_masses),
        ic_floor=floor, log_base=cfg.log_base,
    )


@dataclass(frozen=True)
class TheoremCheck:
    name: str
    passed: bool
    slack: float       # worst margin observed; negative means violated
    tolerance: float
    detail: str = ""


@dataclass(frozen=True)
class TheoremReport:
    checks: tuple

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> tuple:
        return tuple(c for c in self.checks if not c.passed)


def check_tautology(world: FiniteWorld, tol: float = EXACT_TOL) -> TheoremCheck:
    """Per class and level q of pbar(k|x): sum of p(x) pbar(k|x) over the
    level equals q times the level's x-mass. Holds on every world; the
    only slack is float roundoff and level grouping."""
    marg = world_marginal(world)
    px = world.x_masses
    worst = 0.0
    for k in range(world.class_count):
        col = marg[:, k]
        n_k, inv = _group_levels(col)
        mass = np.bincount(inv, weights=px, minlength=n_k)
        weighted = np.bincount(inv, weights=px * col, minlength=n_k)
        rep = np.zeros(n_k)
        rep[inv] = col
        worst = max(worst, float(np.abs(weighted - rep * mass).max()))
    return TheoremCheck(name="tautology-level-sets", passed=worst <= tol,
                        slack=tol - worst, tolerance=tol,
                        detail="max level deviation %.3e" % worst)


def check_classwise_calibration(world: FiniteWorld,
                                tol: float = 1e-10) -> TheoremCheck:
    """p(Y=k | pbar(k|x)=q) == q for every class and attained level."""
    marg = world_marginal(world)
    px = world.x_masses
    worst = 0.0
    for k in range(world.class_count):
        col = marg[:, k]
        n_k, inv = _group_levels(col)
        mass = np.bincount(inv, weights=px, minlength=n_k)
        label_mass = np.bincount(inv, weights=px * world.label_table[:, k],
                                 minlength=n_k)
        rep = np.zeros(n_k)
        rep[inv] = col
        worst = max(worst, float(np.abs(label_mass - rep * mass).max()))
    return TheoremCheck(name="classwise-calibration", passed=worst <= tol,
                        slack=tol - worst, tolerance=tol,
                        detail="max level deviation %.3e" % worst)


def _normalize(v: np.ndarray) -> np.ndarray:
    total = float(np.sum(v))
    if total <= 0.0:
        return np.full(v.shape, 1.0 / v.size)
    return v / total


def _normalize_rows(rows: np.ndarray) -> np.ndarray:
    sums = rows.sum(axis=-1, keepdims=True)
    flat = np.where(sums <= 0.0, 1.0, sums)
    out = rows / flat
    uniform = np.full(rows.shape[-1], 1.0 / rows.shape[-1])
    return np.where(sums <= 0.0, uniform, out)


def build_random_world(seed: int, class_count: int, x_count: int,
                       member_count: int,
                       uniform_member_masses: bool = True,
                       name: str = "") -> FiniteWorld:
    """Random world from normalized uniform draws; fixed draw order
    (x masses, label rows, member rows, member masses)."""
    rng = SplitMix64(seed)
    x_masses = _normalize(rng.floats(x_count))
    label_table = _normalize_rows(
        rng.floats(x_count * class_count).reshape(x_count, class_count))
    member_tables = _normalize_rows(
        rng.floats(member_count * x_count * class_count)
        .reshape(member_count, x_count, class_count))
    if uniform_member_masses:
        member_masses = np.full(member_count, 1.0 / member_count)
    else:
        member_masses = _normalize(rng.floats(member_count))
    return FiniteWorld(x_masses, label_table, member_tables, member_masses,
                       name=name or ("random-%d" % seed))


def build_classwise_calibrated_world(seed: int, class_count: int,
                                     x_count: int, member_count: int,
                                     mode: str = "matched") -> FiniteWorld:
    """World satisfying class-wise calibration exactly.

    matched: labels copy the marginal row by row, so even per-x
    calibration holds. levelset-mixed: x points come in pairs sharing
    one marginal row; the pair's label rows are the marginal plus and
    minus a two-class perturbation, so each level stays calibrated in
    aggregate while no single x is matched. Requires even x_count.
    The result is verified by the calibration and tautology checkers.
    """
    if mode not in ("matched", "levelset-mixed"):
        raise ValueError("mode must be matched or levelset-mixed")
    rng = SplitMix64(seed)
    if mode == "matched":
        base = build_random_world(seed, class_count, x_count, member_count)
        world = FiniteWorld(base.x_masses, world_marginal(base).copy(),
                            base.member_tables, base.member_masses,
                            name="matched-%d" % seed)
    else:
        if x_count < 2 or x_count % 2 != 0:
            raise ValueError("levelset-mixed needs an even x_count >= 2")
        pairs = x_count // 2
        pair_masses = _normalize(rng.floats(pairs))
        x_masses = np.repeat(pair_masses / 2.0, 2)
        member_tables = np.empty((member_count, x_count, class_count))
        label_table = np.empty((x_count, class_count))
        for i in range(pairs):
            block = _normalize_rows(
                rng.floats(member_count * class_count)
                .reshape(member_count, class_count))
            member_tables[:, 2 * i, :] = block
            member_tables[:, 2 * i + 1, :] = block
            marg_row = block.mean(axis=0)
            a = rng.next_below(class_count)
            b = (a + 1 + rng.next_below(class_count - 1)) % class_count
            t = 0.45 * min(marg_row[a], marg_row[b],
                           1.0 - marg_row[a], 1.0 - marg_row[b])
            delta = np.zeros(class_count)
            delta[a] = t
            delta[b] = -t
            label_table[2 * i] = marg_row + delta
            label_table[2 * i + 1] = marg_row - delta
        world = FiniteWorld(x_masses, label_table, member_tables,
                            np.full(member_count, 1.0 / member_count),
                            name="levelset-mixed-%d" % seed)
    cal = check_classwise_calibration(world)
    taut = check_tautology(world)
    if not (cal.passed and taut.passed):
        raise RuntimeError("constructed world failed its calibration check: %s %s"
                           % (cal.detail, taut.detail))
    return world


def build_two_regime_world() -> FiniteWorld:
    """Fixed mixture of a matched stratum and a miscalibrated one.

    Stratum A (mass 300/420, 3 x points): members agree on rotations of
    (0.9, 0.05, 0.05) and labels equal the marginal, so every
    calibration error vanishes and the predicted error is low (0.185).
    Stratum B (mass 120/420, 3 x points): members genuinely disagree,
    averaging to rotations of (0.6, 0.3, 0.1); labels are the marginal
    plus a perturbation delta = (0.1, -0.25, 0.15) chosen orthogonal to
    the marginal, so each x keeps accuracy == predicted accuracy
    (the equality gap stays 0) while class-wise calibration breaks.
    Predicted error in B is 0.54, so low-score rejection retains A
    first. All fractions are exact multiples of 1/20 for clean
    finite-sample expansion (see expand_world_dataset).
    """
    a_base = np.array([0.9, 0.05, 0.05])
    b_member_rows = np.array([
        [0.8, 0.1, 0.1],
        [0.5, 0.5, 0.0],
        [0.5, 0.3, 0.2],
    ])  # columns average to (0.6, 0.3, 0.1)
    b_label_base = np.array([0.7, 0.05, 0.25])

    def rot(row, j):
        return np.roll(row, j)

    x_masses = np.array([100.0, 100.0, 100.0, 40.0, 40.0, 40.0]) / 420.0
    label_table = np.empty((6, 3))
    member_tables = np.empty((3, 6, 3))
    for j in range(3):
        label_table[j] = rot(a_base, j)
        for m in range(3):
            member_tables[m, j] = rot(a_base, j)
    for j in range(3):
        label_table[3 + j] = rot(b_label_base, j)
        for m in range(3):
            member_tables[m, 3 + j] = rot(b_member_rows[m], j)
    return FiniteWorld(x_masses, label_table, member_tables,
                       np.full(3, 1.0 / 3.0), name="two-regime")


def _balanced_label_order(counts: np.ndarray) -> np.ndarray:
    """Interleave class copies so every prefix stays near-proportional.

    Copy j of class k gets position (j + 0.5) / counts[k]; the merged
    ascending order (ties to the lower class) spreads each class evenly,
    which keeps prefix label counts exactly proportional wherever the
    proportions are integral.
    """
    order = []
    for k, c in enumerate(counts):
        for j in range(int(c)):
            order.append(((j + 0.5) / c, k))
    order.sort()
    return np.array([k for _, k in order], dtype=np.int64)


def expand_world_dataset(world: FiniteWorld, copies_per_x) -> EnsembleDataset:
    """Finite-sample dataset whose empirical masses equal a rescaled world.

    Each x is replicated copies_per_x[x] times with its member rows
    copied exactly; label copies follow the exact per-class counts
    copies_per_x[x] * p(y=k|x), which must be integral. Copies are
    interleaved in balanced order. Requires uniform member masses.
    """
    copies = np.asarray(copies_per_x, dtype=np.int64)
    if copies.shape != (world.x_count,) or copies.min() < 1:
        raise ValueError("need a positive copy count per x point")
    if np.abs(world.member_masses - 1.0 / world.member_count).max() > 1e-12:
        raise ValueError("dataset expansion requires uniform member masses")
    label_counts = world.label_table * copies[:, None]
    rounded = np.rint(label_counts)
    if np.abs(label_counts - rounded).max() > 1e-6:
        raise ValueError("copies_per_x does not make label probabilities integral")
    probs_cols = []
    labels = []
    ids = []
    for x in range(world.x_count):
        order = _balanced_label_order(rounded[x])
        labels.append(order)
        probs_cols.append(np.repeat(world.member_tables[:, x:x + 1, :],
                                    copies[x], axis=1))
        ids.extend("x%d-%d" % (x, i) for i in range(copies[x]))
    probs = np.concatenate(probs_cols, axis=1)
    return EnsembleDataset(probs, np.concatenate(labels), tuple(ids))


def sample_dataset(world: FiniteWorld, sample_count: int,
                   seed: int) -> EnsembleDataset:
    """Draw x's by p(x), labels by p(y|x); member rows copied exactly.

    Deterministic given the seed (x draws first, then label draws).
    Requires uniform member masses, since datasets carry no weights.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    if np.abs(world.member_masses - 1.0 / world.member_count).max() > 1e-12:
        raise ValueError("sampling requires uniform member masses")
    rng = SplitMix64(seed)
    u_x = rng.floats(sample_count)
    cum_x = np.cumsum(world.x_masses)
    x_idx = np.searchsorted(cum_x, u_x, side="right")
    x_idx = np.minimum(x_idx, world.x_count - 1).astype(np.int64)
    u_y = rng.floats(sample_count)
    cum_labels = np.cumsum(world.label_table, axis=1)
    labels = (u_y[:, None] >= cum_labels[x_idx, :-1]).sum(axis=1)
    probs = world.member_tables[:, x_idx, :].copy()
    return EnsembleDataset(probs, labels.astype(np.int64),
                           tuple(str(i) for i in range(sample_count)))


def verify_theorems(world: FiniteWorld,
                    cfg: InfoConfig = InfoConfig()) -> TheoremReport:
    """Check every proved identity and bound on exact world quantities."""
    rep = exact_report(world, cfg)
    px = world.x_masses
    members = world.member_tables
    wm = world.member_masses
    marg = world_marginal(world)
    checks = []

    def ident(name, left, right, tol):
        err = abs(left - right)
        checks.append(TheoremCheck(name=name, passed=err <= tol,
                                   slack=tol - err, tolerance=tol,
                                   detail="|%.17g - %.17g| = %.3e"
                                          % (left, right, err)))

    def bound(name, value, floor_value, tol):
        slack = value - floor_value
        checks.append(TheoremCheck(name=name, passed=slack >= -tol,
                                   slack=slack, tolerance=tol,
                                   detail="%.17g >= %.17g" % (value, floor_value)))

    ident("disagreement-is-predicted-error", rep.dis, 1.0 - rep.pred_acc,
          EXACT_TOL)
    ident("test-error-complements-accuracy", rep.test_error, 1.0 - rep.acc,
          EXACT_TOL)
    ident("gap-equals-error-minus-disagreement", rep.gde_gap,
          abs(rep.test_error - rep.dis), EXACT_TOL)
    bound("cace-bounds-gap", rep.cace_exact, rep.gde_gap, INEQ_TOL)
    bound("cwce-bounds-cace", rep.cwce_exact, rep.cace_exact, INEQ_TOL)
    bound("cace-at-most-2", 2.0, rep.cace_exact, INEQ_TOL)
    bound("qweighted-levels-bound-gap", rep.cace_qweighted_exact, rep.gde_gap,
          INEQ_TOL)
    checks.append(check_tautology(world))
    ident("bald-forms-agree", rep.bald, rep.bald_kl, 1e-10)

    var_route = float(np.sum(px * (
        np.einsum("m,mxk->xk", wm, members * members)
        - marg * marg).sum(axis=1)))
    ident("approx-bald-forms-agree", rep.approx_bald, var_route, EXACT_TOL)

    ent = _entropy_table(marg, 0.0)
    ae = 1.0 - np.sum(marg * marg, axis=1)
    bound("approx-entropy-below-entropy",
          float((ent - ae).min()), 0.0, EXACT_TOL)

    ae_members = 1.0 - np.sum(members * members, axis=2)
    per_x_ab = ae - wm @ ae_members
    bound("approx-bald-below-approx-entropy",
          float((ae - per_x_ab).min()), 0.0, EXACT_TOL)
    bound("bald-nonnegative", rep.bald, 0.0, EXACT_TOL)
    bound("approx-bald-nonnegative", rep.approx_bald, 0.0, EXACT_TOL)

    bound("ecace-bounds-entropic-gap", rep.ecace_exact,
          rep.entropic_gde_gap / cfg.ic_top, INEQ_TOL)

    s_total = float(np.sum(rep.levelsets.label_masses))
    t_total = float(np.sum(rep.levelsets.self_masses))
    ident("label-level-masses-sum-to-1", s_total, 1.0, INEQ_TOL)
    ident("self-level-masses-sum-to-1", t_total, 1.0, INEQ_TOL)

    top_world = world_apply_top(world)
    top_rep = exact_report(top_world, cfg)
    top_marg = world_marginal(top_world)
    top_dis = float(np.sum(px * (1.0 - np.sum(top_marg * top_marg, axis=1))))
    ident("top-approx-bald-is-disagreement", top_rep.approx_bald, top_dis,
          EXACT_TOL)

    return TheoremReport(checks=tuple(checks))


def verify_dataset(ds: EnsembleDataset,
                   cfg: InfoConfig = InfoConfig()) -> TheoremReport:
    """Check the identities that hold on any finite prediction dump.

    Same shape of report as verify_theorems, but on empirical estimates:
    the disagreement routes, the two BALD forms, the two approximate
    BALD forms, single-bin collapses, the chained calibration bounds
    with shared equal-width bins, the argmax-transform identities, and
    the error bound from cross-entropy where the floor never binds.
    """
    from . import calibration as cal
    from . import core, info

    checks = []

    def ident(name, left, right, tol):
        err = abs(left - right)
        checks.append(TheoremCheck(name=name, passed=err <= tol,
                                   slack=tol - err, tolerance=tol,
                                   detail="|%.17g - %.17g| = %.3e"
                                          % (left, right, err)))

    def bound(name, value, floor_value, tol):
        slack = value - floor_value
        checks.append(TheoremCheck(name=name, passed=slack >= -tol,
                                   slack=slack, tolerance=tol,
                                   detail="%.17g >= %.17g" % (value, floor_value)))

    marg = core.marginal(ds)
    dis_marginal = core.expected_disagreement(ds, mode="marginal-identity")
    dis_ordered = core.expected_disagreement(ds, mode="ordered-pairs")
    ident("disagreement-routes-agree", dis_marginal, dis_ordered, EXACT_TOL)

    err = core.expected_test_error(ds)
    acc = core.per_sample_accuracy(marg, ds.labels)
    ident("test-error-complements-accuracy", err.mean,
          1.0 - float(np.mean(acc)), EXACT_TOL)

    gap = core.gde_gap(marg, ds.labels)
    scheme = cal.BinningScheme(kind="equal-width",
                               bin_count=cal.DEFAULT_BIN_COUNT)
    edges = cal.make_bins(scheme)
    cace_v = cal.cace(marg, ds.labels, edges=edges)
    cwce_v = cal.cwce(marg, ds.labels, edges=edges)
    bound("cwce-bounds-cace", cwce_v, cace_v, INEQ_TOL)
    bound("cace-bounds-gap", cal.cace_levelset(marg, ds.labels), gap, INEQ_TOL)
    bound("cace-at-most-2", 2.0, cace_v, INEQ_TOL)
    # exact only for unit-sum rows; float32-widened dumps carry row drift,
    # which bounds the single-bin residue by the worst row deviation
    row_dev = float(np.abs(marg.sum(axis=1) - 1.0).max())
    ident("single-bin-cace-collapses", cal.cace(marg, ds.labels,
          edges=np.array([0.0, 1.0])), 0.0, EXACT_TOL + row_dev)
    ident("single-bin-qweighted-is-gap",
          cal.cace_qweighted(marg, ds.labels, edges=np.array([0.0, 1.0])),
          gap, EXACT_TOL)

    bald_ed = info.bald(ds, cfg)
    bald_kl_v = info.bald_kl(ds, cfg)
    ident("bald-forms-agree", bald_ed.mean, bald_kl_v.mean, 1e-10)

    ab_var = info.approx_bald(ds, form="variance")
    ab_ent = info.approx_bald(ds, form="entropy-difference")
    ident("approx-bald-forms-agree",
          float(np.max(np.abs(ab_var.values - ab_ent.values))), 0.0,
          EXACT_TOL)

    top_ds = core.apply_top(ds)
    top_ab = info.approx_bald(top_ds, form="variance")
    top_dis_per = core.per_sample_disagreement(core.marginal(top_ds))
    ident("top-approx-bald-is-disagreement",
          float(np.max(np.abs(top_ab.values - top_dis_per))), 0.0, EXACT_TOL)
    if ds.member_count >= 2:
        m = ds.member_count
        top_ordered = core.expected_disagreement(top_ds, mode="ordered-pairs")
        top_distinct = core.expected_disagreement(top_ds, mode="distinct-pairs")
        ident("top-distinct-pair-rescale", top_distinct,
              top_ordered * m / (m - 1.0), EXACT_TOL)

    rep = info.info_report(ds, cfg)
    e_cal = cal.ecace_levelset(marg, ds.labels, ic_floor=cfg.prob_floor,
                               log_base=cfg.log_base)
    bound("ecace-bounds-entropic-gap", e_cal,
          rep.entropic_gde_gap / cfg.ic_top, INEQ_TOL)

    hit_probs = marg[np.arange(ds.sample_count), ds.labels]
    if float(hit_probs.min()) >= cfg.prob_floor:
        bound("cross-entropy-bounds-error", rep.test_error_upper_bound,
              1.0 - float(np.mean(acc)), INEQ_TOL)

    return TheoremReport(checks=tuple(checks))
