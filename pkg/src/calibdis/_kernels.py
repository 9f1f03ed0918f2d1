"""Numerical kernels, selectable between a numba fast path and a numpy fallback.

Every reduction that feeds a report goes through this module. The numba
backend runs sequential compensated (Kahan) summations in a fixed index
order, so results do not depend on chunking or thread count. The numpy
backend uses vectorized reductions (pairwise summation, einsum without
BLAS dispatch); it is also deterministic run-to-run, but its roundoff
differs from the numba path by O(1e-16) relative.

Backend selection, decided once at import time:

    CALIBDIS_BACKEND=auto    use numba if importable, else numpy (default)
    CALIBDIS_BACKEND=numba   require numba, raise if missing
    CALIBDIS_BACKEND=numpy   force the fallback

"""

import os

import numpy as np

_CHOICE = os.environ.get("CALIBDIS_BACKEND", "auto").strip().lower()
if _CHOICE not in ("auto", "numba", "numpy"):
    raise ValueError(
        "CALIBDIS_BACKEND must be one of auto|numba|numpy, got %r" % _CHOICE
    )

_numba = None
if _CHOICE in ("auto", "numba"):
    try:
        import numba as _numba
    except ImportError:
        if _CHOICE == "numba":
            raise ImportError("CALIBDIS_BACKEND=numba but numba is not importable")
        _numba = None

ACTIVE_BACKEND = "numba" if _numba is not None else "numpy"

_FNV_OFFSET = np.uint64(14695981039346656037)
_FNV_PRIME = np.uint64(1099511628211)


# ---------------------------------------------------------------------------
# Loop implementations. Plain Python functions; compiled below when the
# numba backend is active. No fastmath: IEEE order must be preserved or
# the compensation terms cancel out.
# ---------------------------------------------------------------------------


def _kahan_sum_loop(x):
    s = 0.0
    c = 0.0
    for i in range(x.shape[0]):
        y = x[i] - c
        t = s + y
        c = (t - s) - y
        s = t
    return s


def _row_square_sums_loop(p):
    # (N, K) -> (N,) of sum_k p[n, k]^2
    n_rows, n_cols = p.shape
    out = np.empty(n_rows)
    for i in range(n_rows):
        s = 0.0
        c = 0.0
        for j in range(n_cols):
            v = p[i, j] * p[i, j]
            y = v - c
            t = s + y
            c = (t - s) - y
            s = t
        out[i] = s
    return out


def _member_mean_loop(probs):
    # (M, N, K) -> (N, K) mean over members, compensated per cell.
    m_count, n_count, k_count = probs.shape
    sums = np.zeros((n_count, k_count))
    comps = np.zeros((n_count, k_count))
    for m in range(m_count):
        for n in range(n_count):
            for k in range(k_count):
                y = probs[m, n, k] - comps[n, k]
                t = sums[n, k] + y
                comps[n, k] = (t - sums[n, k]) - y
                sums[n, k] = t
    return sums / m_count


def _member_gather_means_loop(probs, labels):
    # (M, N, K), (N,) -> (M,) of mean_n probs[m, n, labels[n]]
    m_count, n_count = probs.shape[0], probs.shape[1]
    out = np.empty(m_count)
    for m in range(m_count):
        s = 0.0
        c = 0.0
        for n in range(n_count):
            y = probs[m, n, labels[n]] - c
            t = s + y
            c = (t - s) - y
            s = t
        out[m] = s / n_count
    return out


def _pairwise_agreement_loop(probs):
    # (M, M) matrix of mean_n sum_k probs[a, n, k] * probs[b, n, k]
    m_count, n_count, k_count = probs.shape
    out = np.empty((m_count, m_count))
    for a in range(m_count):
        for b in range(a, m_count):
            s = 0.0
            c = 0.0
            for n in range(n_count):
                for k in range(k_count):
                    v = probs[a, n, k] * probs[b, n, k]
                    y = v - c
                    t = s + y
                    c = (t - s) - y
                    s = t
            out[a, b] = s / n_count
            out[b, a] = out[a, b]
    return out


def _binned_sum_loop(idx, w, nbins):
    # Scatter-add with per-bin compensation, in point order.
    sums = np.zeros(nbins)
    comps = np.zeros(nbins)
    for i in range(idx.shape[0]):
        b = idx[i]
        y = w[i] - comps[b]
        t = sums[b] + y
        comps[b] = (t - sums[b]) - y
        sums[b] = t
    return sums


def _entropy_rows_loop(p, eps):
    # (N, K) -> (N,) of -sum_k p log max(p, eps); zero-mass terms drop out.
    # eps <= 0 means no floor (p = 0 still contributes nothing).
    n_rows, n_cols = p.shape
    out = np.empty(n_rows)
    for i in range(n_rows):
        s = 0.0
        c = 0.0
        for j in range(n_cols):
            v = p[i, j]
            if v > 0.0:
                f = v
                if eps > 0.0 and f < eps:
                    f = eps
                term = -v * np.log(f)
                y = term - c
                t = s + y
                c = (t - s) - y
                s = t
        out[i] = s
    return out


def _bald_kl_rows_loop(probs, marg, eps):
    # (N,) of (1/M) sum_m KL(member_row || marginal_row), floored logs.
    m_count, n_count, k_count = probs.shape
    out = np.empty(n_count)
    for n in range(n_count):
        s = 0.0
        c = 0.0
        for m in range(m_count):
            for k in range(k_count):
                v = probs[m, n, k]
                if v > 0.0:
                    fv = v
                    if eps > 0.0 and fv < eps:
                        fv = eps
                    g = marg[n, k]
                    if eps > 0.0 and g < eps:
                        g = eps
                    term = v * (np.log(fv) - np.log(g))
                    y = term - c
                    t = s + y
                    c = (t - s) - y
                    s = t
        out[n] = s / m_count
    return out


def _variance_rows_loop(probs):
    # (N,) of sum_k population-variance over members of probs[:, n, k].
    m_count, n_count, k_count = probs.shape
    out = np.empty(n_count)
    for n in range(n_count):
        s = 0.0
        c = 0.0
        for k in range(k_count):
            s1 = 0.0
            c1 = 0.0
            s2 = 0.0
            c2 = 0.0
            for m in range(m_count):
                v = probs[m, n, k]
                y = v - c1
                t = s1 + y
                c1 = (t - s1) - y
                s1 = t
                v2 = v * v
                y = v2 - c2
                t = s2 + y
                c2 = (t - s2) - y
                s2 = t
            mean1 = s1 / m_count
            term = s2 / m_count - mean1 * mean1
            y = term - c
            t = s + y
            c = (t - s) - y
            s = t
        out[n] = s
    return out


def _fnv1a64_loop(data):
    # FNV-1a over a uint8 view; 64-bit wraparound arithmetic.
    h = _FNV_OFFSET
    prime = _FNV_PRIME
    for i in range(data.shape[0]):
        h = (h ^ np.uint64(data[i])) * prime
    return h


# ---------------------------------------------------------------------------
# numpy implementations of the same contracts.
# ---------------------------------------------------------------------------


def _kahan_sum_np(x):
    return float(np.sum(x))


def _row_square_sums_np(p):
    return np.einsum("ij,ij->i", p, p)


def _member_mean_np(probs):
    return probs.mean(axis=0)


def _member_gather_means_np(probs, labels):
    n_count = probs.shape[1]
    return probs[:, np.arange(n_count), labels].mean(axis=1)


def _pairwise_agreement_np(probs):
    n_count = probs.shape[1]
    return np.einsum("ank,bnk->ab", probs, probs) / n_count


def _binned_sum_np(idx, w, nbins):
    return np.bincount(idx, weights=w, minlength=nbins)


def _entropy_rows_np(p, eps):
    floored = np.maximum(p, eps) if eps > 0.0 else p
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.log(floored)
    terms = np.where(p > 0.0, -p * logs, 0.0)
    return terms.sum(axis=1)


def _bald_kl_rows_np(probs, marg, eps):
    fp = np.maximum(probs, eps) if eps > 0.0 else probs
    fm = np.maximum(marg, eps) if eps > 0.0 else marg
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.log(fp) - np.log(fm)[None, :, :]
    terms = np.where(probs > 0.0, probs * ratio, 0.0)
    return terms.sum(axis=2).mean(axis=0)


def _variance_rows_np(probs):
    m_count = probs.shape[0]
    mean1 = probs.mean(axis=0)
    mean2 = np.einsum("mnk,mnk->nk", probs, probs) / m_count
    return (mean2 - mean1 * mean1).sum(axis=1)


def _fnv1a64_np(data):
    h = int(_FNV_OFFSET)
    prime = int(_FNV_PRIME)
    mask = 0xFFFFFFFFFFFFFFFF
    for b in data.tobytes():
        h = ((h ^ b) * prime) & mask
    return np.uint64(h)


if ACTIVE_BACKEND == "numba":
    _jit = _numba.njit(cache=True)
    _kahan_sum = _jit(_kahan_sum_loop)
    _row_square_sums = _jit(_row_square_sums_loop)
    _member_mean = _jit(_member_mean_loop)
    _member_gather_means = _jit(_member_gather_means_loop)
    _pairwise_agreement = _jit(_pairwise_agreement_loop)
    _binned_sum = _jit(_binned_sum_loop)
    _entropy_rows = _jit(_entropy_rows_loop)
    _bald_kl_rows = _jit(_bald_kl_rows_loop)
    _variance_rows = _jit(_variance_rows_loop)
    _fnv1a64 = _jit(_fnv1a64_loop)
else:
    _kahan_sum = _kahan_sum_np
    _row_square_sums = _row_square_sums_np
    _member_mean = _member_mean_np
    _member_gather_means = _member_gather_means_np
    _pairwise_agreement = _pairwise_agreement_np
    _binned_sum = _binned_sum_np
    _entropy_rows = _entropy_rows_np
    _bald_kl_rows = _bald_kl_rows_np
    _variance_rows = _variance_rows_np
    _fnv1a64 = _fnv1a64_np


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def kahan_sum(x) -> float:
    """Compensated sum of a 1-d array, in index order."""
    return float(_kahan_sum(_f64(np.ravel(x))))


def mean1d(x) -> float:
    """Compensated mean of a 1-d array. Empty input raises."""
    x = np.ravel(x)
    if x.size == 0:
        raise ValueError("mean of empty array")
    return kahan_sum(x) / x.size


def row_square_sums(p) -> np.ndarray:
    """Per-row sum of squares of a (N, K) matrix."""
    return np.asarray(_row_square_sums(_f64(p)))


def member_mean(probs) -> np.ndarray:
    """Mean over the leading (member) axis of a (M, N, K) tensor."""
    return np.asarray(_member_mean(_f64(probs)))


def member_gather_means(probs, labels) -> np.ndarray:
    """Per-member mean of probs[m, n, labels[n]] over n."""
    lab = np.ascontiguousarray(labels, dtype=np.int64)
    return np.asarray(_member_gather_means(_f64(probs), lab))


def pairwise_agreement(probs) -> np.ndarray:
    """(M, M) matrix of mean-over-samples inner products between members."""
    return np.asarray(_pairwise_agreement(_f64(probs)))


def binned_sum(idx, w, nbins: int) -> np.ndarray:
    """Sum weights w into nbins buckets given bucket indices idx."""
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    return np.asarray(_binned_sum(idx, _f64(w), nbins))


def entropy_rows(p, eps: float = 0.0) -> np.ndarray:
    """Per-row Shannon entropy (nats) of a (N, K) matrix.

    Zero entries contribute nothing; eps > 0 floors the argument of the
    log (not the weight) for entries in (0, eps).
    """
    return np.asarray(_entropy_rows(_f64(p), float(eps)))


def bald_kl_rows(probs, marg, eps: float = 0.0) -> np.ndarray:
    """Per-sample mean KL(member || marginal) over members, floored logs."""
    return np.asarray(_bald_kl_rows(_f64(probs), _f64(marg), float(eps)))


def variance_rows(probs) -> np.ndarray:
    """Per-sample sum over classes of the population variance across members."""
    return np.asarray(_variance_rows(_f64(probs)))


def fnv1a64(data) -> int:
    """FNV-1a 64-bit checksum of a bytes-like object or uint8 array."""
    if isinstance(data, (bytes, bytearray, memoryview)):
        arr = np.frombuffer(bytes(data), dtype=np.uint8)
    else:
        arr = np.ascontiguousarray(data, dtype=np.uint8)
    return int(_fnv1a64(arr))


def warmup() -> None:
    """Force compilation of every kernel so later calls are steady-state."""
    probs = np.full((2, 3, 2), 0.5)
    marg = member_mean(probs)
    kahan_sum(np.array([1.0, 2.0]))
    mean1d(np.array([1.0, 2.0]))
    row_square_sums(marg)
    member_gather_means(probs, np.zeros(3, dtype=np.int64))
    pairwise_agreement(probs)
    binned_sum(np.array([0, 1]), np.array([0.5, 0.5]), 2)
    entropy_rows(marg, 0.0)
    entropy_rows(marg, 1e-12)
    bald_kl_rows(probs, marg, 1e-12)
    variance_rows(probs)
    fnv1a64(b"\x00\x01")
