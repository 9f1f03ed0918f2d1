"""Writers for the calibdis dump formats.

These re-implement the published file layouts rather than importing the
analysis package: the byte format is the interface between the two
tools, and this side of it must stand alone.

Binary layout: magic ``CALIBDMP``, one version byte (1), little-endian
u32 member, sample, and class counts, float32 probabilities in
member-major order, u32 labels, and a trailing u64 FNV-1a checksum of
every preceding byte.

CSV layout: header ``sample_id,member_id,p0,...`` with one row per
(sample, member) pair, samples outermost, floats printed with %.17g.
Labels ride in a sidecar CSV with header ``sample_id,label``.
"""

import io
import struct

import numpy as np

MAGIC = b"CALIBDMP"
VERSION = 1
_HEADER = struct.Struct("<III")
_CHECKSUM = struct.Struct("<Q")

_FNV_OFFSET = 14695981039346656037
_FNV_PRIME = 1099511628211
_MASK = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK
    return h


def write_binary_bytes(probs: np.ndarray, labels: np.ndarray) -> bytes:
    """Serialize a (members, samples, classes) stack and its labels."""
    m, n, k = probs.shape
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(bytes([VERSION]))
    buf.write(_HEADER.pack(m, n, k))
    buf.write(np.ascontiguousarray(probs, dtype="<f4").tobytes())
    buf.write(np.ascontiguousarray(labels, dtype="<u4").tobytes())
    body = buf.getvalue()
    return body + _CHECKSUM.pack(fnv1a64(body))


def _fmt(x) -> str:
    return "%.17g" % float(x)


def write_csv_texts(probs: np.ndarray, labels: np.ndarray):
    """Dump CSV plus labels sidecar, as two strings.

    Probabilities are first narrowed to float32 so the text carries
    exactly what the binary format would, making the two outputs
    interchangeable downstream.
    """
    stored = np.ascontiguousarray(probs, dtype=np.float32)
    m, n, k = stored.shape
    dump = io.StringIO()
    dump.write(",".join(["sample_id", "member_id"]
                        + ["p%d" % j for j in range(k)]) + "\n")
    for i in range(n):
        for mem in range(m):
            row = [str(i), str(mem)] + [_fmt(v) for v in stored[mem, i]]
            dump.write(",".join(row) + "\n")
    side = io.StringIO()
    side.write("sample_id,label\n")
    for i in range(n):
        side.write("%d,%d\n" % (i, int(labels[i])))
    return dump.getvalue(), side.getvalue()
