"""Channel-set files, canonical report serialization, and atomic output.

Complex numbers travel as [re, im] pairs; matrices are row-major nested
arrays. Reports are serialized canonically (sorted keys, 17-significant-digit
floats) so a fixed seed yields byte-identical output.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np

from .channels import CompoundSet, make_kraus, verify_kind, TRACE_PRESERVING

SCHEMA_VERSION = 1
FILE_CPTP_ATOL = 1e-8


class ChannelSetError(ValueError):
    """Raised when a channel-set file violates the schema."""


def _require(cond: bool, path: str, message: str):
    if not cond:
        raise ChannelSetError(f"{path}: {message}")


def _parse_complex(entry, path: str) -> complex:
    _require(isinstance(entry, (list, tuple)) and len(entry) == 2, path,
             "complex entries must be [re, im] pairs")
    re_part, im_part = entry
    _require(isinstance(re_part, (int, float)) and isinstance(im_part, (int, float)),
             path, "complex parts must be numbers")
    return complex(float(re_part), float(im_part))


def _parse_matrix(rows, d_out: int, d_in: int, path: str) -> np.ndarray:
    _require(isinstance(rows, list) and len(rows) == d_out, path,
             f"matrix must have {d_out} rows")
    mat = np.zeros((d_out, d_in), dtype=complex)
    for r, row in enumerate(rows):
        _require(isinstance(row, list) and len(row) == d_in, f"{path}[{r}]",
                 f"row must have {d_in} entries")
        for c, entry in enumerate(row):
            mat[r, c] = _parse_complex(entry, f"{path}[{r}][{c}]")
    return mat


def parse_channel_set(path: str) -> CompoundSet:
    """Load and validate a schema-v1 channel-set file (trace-preserving only)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ChannelSetError(f"{path}: not valid JSON ({exc})") from exc

    _require(isinstance(doc, dict), "$", "document must be an object")
    _require(doc.get("schema_version") == SCHEMA_VERSION, "$.schema_version",
             f"must be {SCHEMA_VERSION}")
    _require(isinstance(doc.get("name"), str), "$.name", "must be a string")
    for key in ("dim_in", "dim_out"):
        _require(isinstance(doc.get(key), int) and doc[key] >= 1, f"$.{key}",
                 "must be a positive integer")
    d_in, d_out = doc["dim_in"], doc["dim_out"]
    channels_doc = doc.get("channels")
    _require(isinstance(channels_doc, list) and len(channels_doc) >= 1, "$.channels",
             "must be a nonempty list")

    channels = []
    for ci, ch in enumerate(channels_doc):
        base = f"$.channels[{ci}]"
        _require(isinstance(ch, dict), base, "must be an object")
        _require(isinstance(ch.get("name"), str), f"{base}.name", "must be a string")
        kraus_doc = ch.get("kraus")
        _require(isinstance(kraus_doc, list) and len(kraus_doc) >= 1, f"{base}.kraus",
                 "must be a nonempty list of matrices")
        ops = [
            _parse_matrix(m, d_out, d_in, f"{base}.kraus[{mi}]")
            for mi, m in enumerate(kraus_doc)
        ]
        kind, residual = verify_kind(ops, atol=FILE_CPTP_ATOL)
        _require(kind == TRACE_PRESERVING, f"{base}.kraus",
                 f"channel is not trace preserving (residual {residual:.3e} > {FILE_CPTP_ATOL:.1e})")
        channels.append(make_kraus(ops, expect=TRACE_PRESERVING, atol=FILE_CPTP_ATOL))
    return CompoundSet(doc["name"], tuple(channels))


def channel_set_document(cset: CompoundSet, names=None) -> dict:
    names = names or [f"channel_{j}" for j in range(cset.size)]
    return {
        "schema_version": SCHEMA_VERSION,
        "name": cset.name,
        "dim_in": cset.dim_in,
        "dim_out": cset.dim_out,
        "channels": [
            {
                "name": names[j],
                "kraus": [
                    [[[float(z.real), float(z.imag)] for z in row] for row in k]
                    for k in ch.kraus_ops
                ],
            }
            for j, ch in enumerate(cset.channels)
        ],
    }


def emit_channel_set(cset: CompoundSet, path: str, names=None):
    atomic_write(path, canonical_json(channel_set_document(cset, names)) + "\n")


# --- canonical serialization --------------------------------------------------


def _format_float(x: float) -> str:
    if x != x or x in (float("inf"), float("-inf")):
        raise ValueError(f"cannot serialize non-finite float {x}")
    return format(float(x), ".17g")


def canonical_json(obj) -> str:
    """Deterministic JSON text: sorted keys, 17-significant-digit floats,
    complex values as [re, im], no locale dependence."""
    if obj is None or obj is True or obj is False:
        return json.dumps(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=True)
    if isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        z = complex(obj)
        return f"[{_format_float(z.real)},{_format_float(z.imag)}]"
    if isinstance(obj, np.ndarray):
        return canonical_json(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(canonical_json(v) for v in obj) + "]"
    if isinstance(obj, dict):
        items = []
        for key in sorted(obj):
            if not isinstance(key, str):
                raise ValueError("report keys must be strings")
            items.append(json.dumps(key) + ":" + canonical_json(obj[key]))
        return "{" + ",".join(items) + "}"
    raise ValueError(f"cannot serialize object of type {type(obj)!r}")


def digest_files(paths) -> str:
    h = hashlib.sha256()
    for p in paths:
        with open(p, "rb") as fh:
            h.update(fh.read())
    return h.hexdigest()


def atomic_write(path: str, text: str):
    """Write via a temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".qcap-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def rows_to_csv(rows) -> str:
    """Flatten (section, l, channel, quantity, value) rows for plotting."""
    lines = ["section,l,channel,quantity,value"]
    for section, l, channel, quantity, value in rows:
        if isinstance(value, (float, np.floating)):
            value = _format_float(float(value))
        lines.append(f"{section},{l},{channel},{quantity},{value}")
    return "\n".join(lines) + "\n"
