"""Bit-exact file formats for prediction dumps, labels, worlds, and reports.

Two dump formats carry the same data: a CSV for interchange (one row per
sample and member, 17-significant-digit decimals) and a binary format
for large dumps (float32 payload, trailing FNV-1a checksum). Labels ride
inside the binary format; CSV dumps pair with a separate labels CSV.
Worlds and metric reports serialize as line-oriented structured text
with a stable key order, so identical inputs always produce identical
bytes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import struct
from typing import Optional

import numpy as np

from . import core
from ._kernels import fnv1a64
from .core import EnsembleDataset, ValidationPolicy, fmt_float
from .worlds import FiniteWorld

MAGIC = b"CALIBDMP"
VERSION = 1
_HEADER = struct.Struct("<III")
_CHECKSUM = struct.Struct("<Q")


class DumpError(Exception):
    """A file that does not satisfy its format contract.

    Each failure class carries a stable machine-readable code.
    """

    code = "dump-error"

    def __init__(self, message: str):
        super().__init__("%s: %s" % (self.code, message))


class MalformedHeaderError(DumpError):
    code = "malformed-header"


class MalformedRowError(DumpError):
    code = "malformed-row"


class TruncatedDumpError(DumpError):
    code = "truncated"


class ChecksumError(DumpError):
    code = "checksum-mismatch"


class DuplicatePairError(DumpError):
    code = "duplicate-pair"


class MissingPairError(DumpError):
    code = "missing-pair"


class LabelRangeError(DumpError):
    code = "label-range"


class LabelMismatchError(DumpError):
    code = "label-mismatch"


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def dataset_digest(ds: EnsembleDataset) -> str:
    """Digest of the dataset's canonical binary serialization."""
    return "sha256:" + hashlib.sha256(write_dump_bytes(ds)).hexdigest()


# ---------------------------------------------------------------------------
# binary dump


def write_dump_bytes(ds: EnsembleDataset) -> bytes:
    m, n, k = ds.probs.shape
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(bytes([VERSION]))
    buf.write(_HEADER.pack(m, n, k))
    buf.write(np.ascontiguousarray(ds.probs, dtype="<f4").tobytes())
    buf.write(np.ascontiguousarray(ds.labels, dtype="<u4").tobytes())
    body = buf.getvalue()
    return body + _CHECKSUM.pack(fnv1a64(body))


def read_dump_bytes(data: bytes,
                    policy: Optional[ValidationPolicy] = None) -> EnsembleDataset:
    head_len = len(MAGIC) + 1 + _HEADER.size
    if len(data) < head_len + _CHECKSUM.size:
        raise TruncatedDumpError("file shorter than the fixed header")
    if data[:len(MAGIC)] != MAGIC:
        raise MalformedHeaderError("bad magic bytes")
    if data[len(MAGIC)] != VERSION:
        raise MalformedHeaderError("unsupported version %d" % data[len(MAGIC)])
    m, n, k = _HEADER.unpack_from(data, len(MAGIC) + 1)
    if m < 1 or n < 1 or k < 2:
        raise MalformedHeaderError("invalid shape M=%d N=%d K=%d" % (m, n, k))
    expected = head_len + 4 * m * n * k + 4 * n + _CHECKSUM.size
    if len(data) != expected:
        raise TruncatedDumpError("size %d does not match header (want %d)"
                                 % (len(data), expected))
    (stored,) = _CHECKSUM.unpack_from(data, expected - _CHECKSUM.size)
    actual = fnv1a64(data[:expected - _CHECKSUM.size])
    if stored != actual:
        raise ChecksumError("stored %016x != computed %016x" % (stored, actual))
    off = head_len
    probs = np.frombuffer(data, dtype="<f4", count=m * n * k,
                          offset=off).reshape(m, n, k).astype(np.float64)
    off += 4 * m * n * k
    labels = np.frombuffer(data, dtype="<u4", count=n, offset=off)
    if labels.size and int(labels.max()) >= k:
        raise LabelRangeError("label %d outside [0, %d)" % (int(labels.max()), k))
    ds = EnsembleDataset(probs, labels.astype(np.int64))
    return _validated(ds, policy)


def _validated(ds: EnsembleDataset, policy) -> EnsembleDataset:
    rep = core.validate_dataset(ds, policy or ValidationPolicy())
    if not rep.ok:
        raise core.ValidationError("; ".join(rep.messages) or "validation failed")
    return rep.dataset


# ---------------------------------------------------------------------------
# CSV dump + labels


def write_dump_csv_text(ds: EnsembleDataset) -> str:
    m, n, k = ds.probs.shape
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["sample_id", "member_id"] + ["p%d" % j for j in range(k)])
    for i in range(n):
        for mem in range(m):
            w.writerow([ds.sample_ids[i], str(mem)]
                       + [fmt_float(v) for v in ds.probs[mem, i]])
    return out.getvalue()


def _parse_csv_header(row) -> int:
    if row is None or len(row) < 3 or row[0] != "sample_id" or row[1] != "member_id":
        raise MalformedHeaderError("expected sample_id,member_id,p0,...")
    for j, name in enumerate(row[2:]):
        if name != "p%d" % j:
            raise MalformedHeaderError("probability column %d named %r" % (j, name))
    return len(row) - 2


def read_dump_csv_text(text: str, labels: Optional[dict] = None,
                       policy: Optional[ValidationPolicy] = None) -> EnsembleDataset:
    """Parse a CSV dump; labels map sample_id -> int and are required.

    Sample and member order follow first appearance in the file. Every
    (sample, member) pair must appear exactly once and every sample must
    cover the same member set.
    """
    rows = csv.reader(io.StringIO(text))
    k = _parse_csv_header(next(rows, None))
    sample_order = {}
    member_order = {}
    triples = {}
    for lineno, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != 2 + k:
            raise MalformedRowError("line %d has %d fields, want %d"
                                    % (lineno, len(row), 2 + k))
        sid, mid = row[0], row[1]
        try:
            vals = [float(v) for v in row[2:]]
        except ValueError:
            raise MalformedRowError("line %d has a non-numeric probability"
                                    % lineno)
        key = (sid, mid)
        if key in triples:
            raise DuplicatePairError("(%s, %s) appears twice" % key)
        triples[key] = vals
        sample_order.setdefault(sid, len(sample_order))
        member_order.setdefault(mid, len(member_order))
    n, m = len(sample_order), len(member_order)
    if n == 0 or m == 0:
        raise MalformedHeaderError("dump contains no data rows")
    if len(triples) != n * m:
        missing = next((s, mem) for s in sample_order for mem in member_order
                       if (s, mem) not in triples)
        raise MissingPairError("(%s, %s) absent" % missing)
    probs = np.empty((m, n, k))
    for (sid, mid), vals in triples.items():
        probs[member_order[mid], sample_order[sid]] = vals
    ids = tuple(sample_order)
    if labels is None:
        raise LabelMismatchError("CSV dumps carry no labels; provide a labels CSV")
    label_vec = _match_labels(ids, labels, k)
    ds = EnsembleDataset(probs, label_vec, ids)
    return _validated(ds, policy)


def _match_labels(ids, labels: dict, k: int) -> np.ndarray:
    if set(ids) != set(labels):
        extra = set(labels) - set(ids)
        gone = set(ids) - set(labels)
        raise LabelMismatchError(
            "label ids differ from dump ids (%d unmatched, %d missing)"
            % (len(extra), len(gone)))
    vec = np.array([labels[s] for s in ids], dtype=np.int64)
    if vec.min() < 0 or vec.max() >= k:
        raise LabelRangeError("label outside [0, %d)" % k)
    return vec


def write_labels_csv_text(ds: EnsembleDataset) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["sample_id", "label"])
    for sid, y in zip(ds.sample_ids, ds.labels):
        w.writerow([sid, str(int(y))])
    return out.getvalue()


def read_labels_csv_text(text: str) -> dict:
    rows = csv.reader(io.StringIO(text))
    head = next(rows, None)
    if head is None or head[:2] != ["sample_id", "label"]:
        raise MalformedHeaderError("expected sample_id,label")
    labels = {}
    for lineno, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != 2:
            raise MalformedRowError("line %d has %d fields, want 2"
                                    % (lineno, len(row)))
        sid, raw = row
        if sid in labels:
            raise DuplicatePairError("sample_id %s labeled twice" % sid)
        try:
            labels[sid] = int(raw)
        except ValueError:
            raise MalformedRowError("line %d has a non-integer label" % lineno)
    if not labels:
        raise MalformedHeaderError("labels file contains no rows")
    return labels


# ---------------------------------------------------------------------------
# path-level helpers


def detect_format(path: str) -> str:
    return "csv" if str(path).lower().endswith(".csv") else "binary"


def read_dump(path: str, fmt: Optional[str] = None,
              labels_path: Optional[str] = None,
              policy: Optional[ValidationPolicy] = None) -> EnsembleDataset:
    """Load a prediction dump, binary or CSV, into a validated dataset.

    Binary dumps embed labels; labels_path overrides them. CSV dumps
    require labels_path.
    """
    fmt = fmt or detect_format(path)
    if fmt == "binary":
        with open(path, "rb") as fh:
            ds = read_dump_bytes(fh.read(), policy)
        if labels_path is not None:
            labels = read_labels_csv_text(_read_text(labels_path))
            vec = _match_labels(ds.sample_ids, labels, ds.class_count)
            ds = EnsembleDataset(ds.probs, vec, ds.sample_ids)
        return ds
    if fmt != "csv":
        raise ValueError("format must be binary or csv")
    labels = read_labels_csv_text(_read_text(labels_path)) \
        if labels_path is not None else None
    return read_dump_csv_text(_read_text(path), labels, policy)


def write_dump(ds: EnsembleDataset, path: str, fmt: Optional[str] = None,
               labels_path: Optional[str] = None) -> None:
    """Write a dump; CSV form also writes the labels sidecar if asked."""
    fmt = fmt or detect_format(path)
    if fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(write_dump_bytes(ds))
    elif fmt == "csv":
        _write_text(path, write_dump_csv_text(ds))
        if labels_path is not None:
            _write_text(labels_path, write_labels_csv_text(ds))
    else:
        raise ValueError("format must be binary or csv")


def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return fh.read()


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# world spec text


def world_to_text(world: FiniteWorld) -> str:
    lines = ["calibdis-world v1",
             "name %s" % (world.name.replace(" ", "-") if world.name else "-"),
             "classes %d" % world.class_count,
             "xcount %d" % world.x_count,
             "members %d" % world.member_count,
             "x_masses %s" % " ".join(fmt_float(v) for v in world.x_masses)]
    for x in range(world.x_count):
        lines.append("label %d %s" % (
            x, " ".join(fmt_float(v) for v in world.label_table[x])))
    for m in range(world.member_count):
        for x in range(world.x_count):
            lines.append("member %d %d %s" % (
                m, x, " ".join(fmt_float(v) for v in world.member_tables[m, x])))
    lines.append("member_masses %s"
                 % " ".join(fmt_float(v) for v in world.member_masses))
    return "\n".join(lines) + "\n"


def world_from_text(text: str) -> FiniteWorld:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or lines[0] != "calibdis-world v1":
        raise MalformedHeaderError("expected a calibdis-world v1 file")
    fields = {}
    label_rows = {}
    member_rows = {}
    for ln in lines[1:]:
        parts = ln.split()
        key = parts[0]
        try:
            if key == "name":
                fields["name"] = "" if parts[1] == "-" else parts[1]
            elif key in ("classes", "xcount", "members"):
                fields[key] = int(parts[1])
            elif key == "x_masses":
                fields["x_masses"] = [float(v) for v in parts[1:]]
            elif key == "member_masses":
                fields["member_masses"] = [float(v) for v in parts[1:]]
            elif key == "label":
                label_rows[int(parts[1])] = [float(v) for v in parts[2:]]
            elif key == "member":
                member_rows[(int(parts[1]), int(parts[2]))] = \
                    [float(v) for v in parts[3:]]
            else:
                raise MalformedRowError("unknown world line %r" % key)
        except (ValueError, IndexError):
            raise MalformedRowError("cannot parse world line %r" % ln)
    try:
        k, x_count, m_count = fields["classes"], fields["xcount"], fields["members"]
        x_masses = np.array(fields["x_masses"])
        member_masses = np.array(fields["member_masses"])
        label_table = np.array([label_rows[x] for x in range(x_count)])
        member_tables = np.array([[member_rows[(m, x)] for x in range(x_count)]
                                  for m in range(m_count)])
    except KeyError as missing:
        raise MalformedRowError("world file lacks entry %s" % missing)
    if label_table.shape != (x_count, k) or member_tables.shape != (m_count, x_count, k):
        raise MalformedRowError("world tables do not match declared shape")
    try:
        return FiniteWorld(x_masses, label_table, member_tables, member_masses,
                           name=fields.get("name", ""))
    except ValueError as bad:
        raise MalformedRowError("world does not validate: %s" % bad)


def read_world(path: str) -> FiniteWorld:
    return world_from_text(_read_text(path))


def write_world(world: FiniteWorld, path: str) -> None:
    _write_text(path, world_to_text(world))


# ---------------------------------------------------------------------------
# structured-text reports


def render_report(kind: str, items) -> str:
    """Line-oriented report: fixed preamble then caller-ordered pairs."""
    from . import __version__
    lines = ["calibdis-report v1",
             "tool_version %s" % __version__,
             "kind %s" % kind]
    for key, value in items:
        lines.append("%s %s" % (key, value))
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> dict:
    """Inverse of render_report for tests; later duplicate keys win."""
    lines = text.splitlines()
    if not lines or lines[0] != "calibdis-report v1":
        raise MalformedHeaderError("expected a calibdis-report v1 file")
    out = {}
    for ln in lines[1:]:
        if not ln.strip():
            continue
        key, _, value = ln.partition(" ")
        out[key] = value
    return out


def diagram_csv_text(per_bin) -> str:
    """Reliability-diagram rows (one per confidence bin) as CSV."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["bin_index", "lower", "upper", "count",
                "hit_mass", "conf_mass", "mean_hit", "mean_conf"])
    for b in per_bin:
        empty = b.count == 0
        w.writerow([str(b.index), fmt_float(b.lower), fmt_float(b.upper),
                    str(b.count), fmt_float(b.hit_mass), fmt_float(b.conf_mass),
                    "" if empty else fmt_float(b.mean_hit),
                    "" if empty else fmt_float(b.mean_conf)])
    return out.getvalue()
