"""Canonical file formats.

* Order flow: delimited text, one order per line,
  ``timestamp_ns,id,side,kind,price_ticks,volume,target_id`` with empty
  fields where a column does not apply; ``#`` lines carry metadata.
* Tensors (day series, window datasets): versioned binary with a
  self-describing header (magic, version, dims) and row-major little-endian
  float64 payload.
* Configs / sidecars: plain-text ``key = value`` lines under ``[section]``
  headers, order-preserving so canonical files round-trip byte-identically.
* Checkpoints: versioned binary of named arrays (model and Adam state).
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .book import Order
from .preprocess import FEATURE_WISE, GLOBAL, NormStats
from .synth import FlowStream

TENSOR_MAGIC = b"LOBT"
CHECKPOINT_MAGIC = b"LOBC"
FORMAT_VERSION = 1


class FormatError(Exception):
    """Malformed file; carries the byte offset and field name when known."""

    def __init__(self, msg: str, offset: int | None = None,
                 field: str | None = None):
        loc = ""
        if offset is not None:
            loc += f" at byte {offset}"
        if field is not None:
            loc += f" (field {field})"
        super().__init__(msg + loc)
        self.offset = offset
        self.field = field


# ---------------------------------------------------------------- order flow

_FLOW_COLUMNS = "timestamp_ns,id,side,kind,price_ticks,volume,target_id"


def write_flow(stream: FlowStream, path):
    lines = [
        f"# profile = {stream.profile}",
        f"# seed = {stream.seed}",
        f"# tick_size = {stream.tick_size!r}",
        f"# columns = {_FLOW_COLUMNS}",
    ]
    for o in stream.orders:
        lines.append(
            f"{o.timestamp},{o.id},{o.side},{o.kind},"
            f"{'' if o.price is None else o.price},"
            f"{'' if o.volume is None else o.volume},"
            f"{'' if o.target_id is None else o.target_id}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_flow(path) -> FlowStream:
    profile, seed, tick = "", 0, 0.01
    orders = []
    offset = 0
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            if "=" in line:
                key, _, val = line[1:].partition("=")
                key, val = key.strip(), val.strip()
                if key == "profile":
                    profile = val
                elif key == "seed":
                    seed = int(val)
                elif key == "tick_size":
                    tick = float(val)
            offset += len(line) + 1
            continue
        parts = line.split(",")
        if len(parts) != 7:
            raise FormatError(
                f"expected 7 fields, got {len(parts)}", offset=offset
            )
        try:
            orders.append(Order(
                timestamp=int(parts[0]),
                id=int(parts[1]),
                side=parts[2],
                kind=parts[3],
                price=int(parts[4]) if parts[4] else None,
                volume=int(parts[5]) if parts[5] else None,
                target_id=int(parts[6]) if parts[6] else None,
            ))
        except ValueError as exc:
            raise FormatError(str(exc), offset=offset) from exc
        offset += len(line) + 1
    return FlowStream(profile=profile, seed=seed, orders=orders,
                      tick_size=tick)


# ------------------------------------------------------------------- tensors

def save_tensor(path, array: np.ndarray):
    array = np.ascontiguousarray(array, dtype="<f8")
    with open(path, "wb") as f:
        f.write(TENSOR_MAGIC)
        f.write(struct.pack("<II", FORMAT_VERSION, array.ndim))
        f.write(struct.pack(f"<{array.ndim}I", *array.shape))
        f.write(array.tobytes())


def load_tensor(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != TENSOR_MAGIC:
        raise FormatError("bad tensor magic", offset=0, field="magic")
    version, ndim = struct.unpack_from("<II", raw, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}", offset=4,
                          field="version")
    dims = struct.unpack_from(f"<{ndim}I", raw, 12)
    start = 12 + 4 * ndim
    expected = int(np.prod(dims)) * 8
    if len(raw) - start != expected:
        raise FormatError(
            f"payload is {len(raw) - start} bytes, expected {expected}",
            offset=start, field="data",
        )
    return np.frombuffer(raw[start:], dtype="<f8").reshape(dims).copy()


# --------------------------------------------------------------- key / value

def write_kv(path, sections: dict):
    """sections: {section_name: {key: value}}; order preserved."""
    lines = []
    for name, entries in sections.items():
        lines.append(f"[{name}]")
        for key, val in entries.items():
            lines.append(f"{key} = {val}")
        lines.append("")
    Path(path).write_text("\n".join(lines))


def read_kv(path) -> dict:
    sections: dict = {}
    current = None
    for i, line in enumerate(Path(path).read_text().splitlines()):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            sections[current] = {}
        elif "=" in line:
            if current is None:
                raise FormatError(f"entry before any section (line {i + 1})")
            key, _, val = line.partition("=")
            sections[current][key.strip()] = val.strip()
        else:
            raise FormatError(f"unparseable line {i + 1}: {line!r}")
    return sections


def _floats(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def save_norm_stats(path, stats: NormStats):
    write_kv(path, {"norm": {
        "scheme": stats.scheme,
        "scope": stats.scope,
        "levels": stats.levels,
        "mu": _floats(stats.mu),
        "sigma": _floats(stats.sigma),
    }})


def load_norm_stats(path) -> NormStats:
    kv = read_kv(path)
    if "norm" not in kv:
        raise FormatError("missing [norm] section", field="norm")
    sec = kv["norm"]
    scheme = sec["scheme"]
    if scheme not in (FEATURE_WISE, GLOBAL):
        raise FormatError(f"unknown scheme {scheme!r}", field="scheme")
    return NormStats(
        scheme=scheme,
        mu=np.array([float(v) for v in sec["mu"].split(",")]),
        sigma=np.array([float(v) for v in sec["sigma"].split(",")]),
        scope=sec["scope"],
        levels=int(sec["levels"]),
    )


# --------------------------------------------------------------- checkpoints

def save_checkpoint(path, arrays: dict):
    """Named float64 arrays -> versioned binary, names sorted for stability."""
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<II", FORMAT_VERSION, len(arrays)))
        for name in sorted(arrays):
            arr = np.ascontiguousarray(arrays[name], dtype="<f8")
            encoded = name.encode("utf-8")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<B", arr.ndim))
            if arr.ndim:
                f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes())


def load_checkpoint(path) -> dict:
    raw = Path(path).read_bytes()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise FormatError("bad checkpoint magic", offset=0, field="magic")
    version, count = struct.unpack_from("<II", raw, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}", offset=4,
                          field="version")
    pos = 12
    arrays = {}
    for _ in range(count):
        (namelen,) = struct.unpack_from("<H", raw, pos)
        pos += 2
        name = raw[pos : pos + namelen].decode("utf-8")
        pos += namelen
        (ndim,) = struct.unpack_from("<B", raw, pos)
        pos += 1
        dims = struct.unpack_from(f"<{ndim}I", raw, pos) if ndim else ()
        pos += 4 * ndim
        n = int(np.prod(dims)) if ndim else 1
        arrays[name] = (
            np.frombuffer(raw[pos : pos + 8 * n], dtype="<f8")
            .reshape(dims)
            .copy()
        )
        pos += 8 * n
    if pos != len(raw):
        raise FormatError("trailing bytes", offset=pos, field="data")
    return arrays


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
