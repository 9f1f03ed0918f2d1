"""Turn saved prediction arrays into a calibdis dump.

Inputs are the artifacts an ML training run leaves behind: one N x K
array per ensemble member (``.npy``, or several members bundled in one
``.npz``) holding either probabilities or raw logits, plus a label
vector. Logits go through a numerically stable softmax; probability
rows are renormalized to unit sum. The dump stores float32, so the
conversion is applied here once and nothing downstream re-derives it.
"""

from dataclasses import dataclass

import numpy as np

from predexport import dumpio

INPUT_KINDS = ("probabilities", "logits")
OUTPUT_FORMATS = ("binary", "csv")


class ExportError(ValueError):
    """Raised when the input arrays cannot form a valid dump."""


@dataclass(frozen=True)
class ExportManifest:
    """Everything one export run needs.

    member_paths: .npy files (one member each) or .npz archives (one
    member per entry, in archive order), in the order members should
    appear in the dump.
    """

    member_paths: tuple
    labels_path: str
    input_kind: str
    out_path: str
    out_format: str = "binary"
    labels_out_path: str = ""

    def __post_init__(self):
        object.__setattr__(self, "member_paths", tuple(self.member_paths))
        if not self.member_paths:
            raise ExportError("at least one member array file is required")
        if self.input_kind not in INPUT_KINDS:
            raise ExportError("input_kind must be one of %s"
                              % (INPUT_KINDS,))
        if self.out_format not in OUTPUT_FORMATS:
            raise ExportError("output format must be one of %s"
                              % (OUTPUT_FORMATS,))


def _load_one(path: str):
    """All member matrices stored at path, as a list of 2-d arrays."""
    if path.endswith(".npz"):
        with np.load(path) as archive:
            return [(np.asarray(archive[name], dtype=np.float64),
                     "%s[%s]" % (path, name)) for name in archive.files]
    return [(np.asarray(np.load(path), dtype=np.float64), path)]


def load_member_stack(paths) -> np.ndarray:
    """(members, samples, classes) float64 stack from the given files."""
    arrays = []
    for path in paths:
        arrays.extend(_load_one(path))
    if not arrays:
        raise ExportError("member files contain no arrays")
    shape = None
    for arr, origin in arrays:
        if arr.ndim != 2:
            raise ExportError("%s is not a 2-d samples x classes array"
                              % origin)
        if shape is None:
            shape = arr.shape
        elif arr.shape != shape:
            raise ExportError("shape mismatch: %s has %s, expected %s"
                              % (origin, arr.shape, shape))
        if not np.isfinite(arr).all():
            raise ExportError("non-finite entries in %s" % origin)
    n, k = shape
    if n < 1:
        raise ExportError("arrays contain no samples")
    if k < 2:
        raise ExportError("at least two classes required, got %d" % k)
    return np.stack([arr for arr, _ in arrays])


def load_labels(path: str, sample_count: int, class_count: int) -> np.ndarray:
    if path.endswith(".npy"):
        raw = np.load(path)
    else:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh]
        try:
            raw = np.array([int(ln) for ln in lines if ln], dtype=np.int64)
        except ValueError:
            raise ExportError("labels file %s must hold one integer per line"
                              % path)
    raw = np.asarray(raw)
    if raw.ndim != 1:
        raise ExportError("labels must be a 1-d vector")
    if not np.issubdtype(raw.dtype, np.integer):
        raise ExportError("labels must be integers, got dtype %s" % raw.dtype)
    labels = raw.astype(np.int64)
    if labels.shape[0] != sample_count:
        raise ExportError("labels length %d does not match %d samples"
                          % (labels.shape[0], sample_count))
    if labels.size and (labels.min() < 0 or labels.max() >= class_count):
        raise ExportError("label outside [0, %d)" % class_count)
    return labels


def stable_softmax(rows: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shifted by the row max so exp cannot overflow."""
    shifted = rows - rows.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def normalize_probabilities(rows: np.ndarray) -> np.ndarray:
    if (rows < 0.0).any():
        raise ExportError("negative probabilities in input")
    sums = rows.sum(axis=-1, keepdims=True)
    if (sums <= 0.0).any():
        raise ExportError("a probability row sums to zero")
    return rows / sums


def build_probability_stack(manifest: ExportManifest):
    """(stack, labels): unit-sum float64 rows plus the label vector."""
    stack = load_member_stack(manifest.member_paths)
    if manifest.input_kind == "logits":
        stack = stable_softmax(stack)
    else:
        stack = normalize_probabilities(stack)
    m, n, k = stack.shape
    labels = load_labels(manifest.labels_path, n, k)
    return stack, labels


def export(manifest: ExportManifest):
    """Write the dump; returns the tuple of paths written."""
    stack, labels = build_probability_stack(manifest)
    if manifest.out_format == "binary":
        data = dumpio.write_binary_bytes(stack.astype(np.float32), labels)
        with open(manifest.out_path, "wb") as fh:
            fh.write(data)
        return (manifest.out_path,)
    dump_text, labels_text = dumpio.write_csv_texts(stack, labels)
    labels_out = manifest.labels_out_path or manifest.out_path + ".labels.csv"
    with open(manifest.out_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dump_text)
    with open(labels_out, "w", encoding="utf-8", newline="") as fh:
        fh.write(labels_text)
    return (manifest.out_path, labels_out)
