"""Snapshots of agent state and JSON Lines traces.

Snapshot layout: one header line ``SCHEMA-ENGINE-SNAPSHOT <version> <sha256>``
followed by a JSON body. The body is a tagged encoding of the agent object graph
(dataclasses, enums, arrays, tuples, sets, deques, the RNG state and ``SHARP``),
so restoring yields an agent that re-encodes to the same bytes.
"""
from __future__ import annotations

import dataclasses
import hashlib
import importlib
import json
from collections import deque
from enum import Enum
from typing import IO, Any, Dict, Iterable, Iterator, List, Tuple

import numpy as np

from .errors import SnapshotError, TraceFormatError
from .patterns import SHARP

SNAPSHOT_MAGIC = b"SCHEMA-ENGINE-SNAPSHOT"
SNAPSHOT_VERSION = 1
TRACE_FORMAT = "schema-engine-trace"
TRACE_VERSION = 1

_PACKAGE = __name__.rsplit(".", 1)[0]


def _qualname(obj) -> str:
    cls = type(obj)
    return f"{cls.__module__}:{cls.__qualname__}"


def _lookup(name: str):
    module, _, qual = name.partition(":")
    if not module.startswith(_PACKAGE):
        raise SnapshotError(f"refusing to restore foreign type {name!r}")
    try:
        obj = importlib.import_module(module)
        for part in qual.split("."):
            obj = getattr(obj, part)
    except (ImportError, AttributeError):
        raise SnapshotError(f"unknown type {name!r} in snapshot") from None
    return obj


def encode(obj: Any) -> Any:
    """JSON-ready tagged form of ``obj``."""
    if obj is SHARP:
        return {"__sharp__": True}
    if isinstance(obj, Enum):
        return {"__enum__": _qualname(obj), "value": obj.value}
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return {"__nd__": obj.tolist(), "shape": list(obj.shape), "dtype": str(obj.dtype)}
    if isinstance(obj, np.random.Generator):
        return {"__rng__": encode(obj.bit_generator.state)}
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {
            "__dc__": _qualname(obj),
            "fields": {f.name: encode(getattr(obj, f.name)) for f in dataclasses.fields(obj)},
        }
    if isinstance(obj, tuple):
        return {"__tuple__": [encode(v) for v in obj]}
    if isinstance(obj, list):
        return [encode(v) for v in obj]
    if isinstance(obj, deque):
        return {"__deque__": [encode(v) for v in obj], "maxlen": obj.maxlen}
    if isinstance(obj, (set, frozenset)):
        items = sorted((encode(v) for v in obj), key=lambda v: json.dumps(v, sort_keys=True))
        return {"__set__": items, "frozen": isinstance(obj, frozenset)}
    if isinstance(obj, dict):
        # pairs keep insertion order and allow non-string keys
        return {"__map__": [[encode(k), encode(v)] for k, v in obj.items()]}
    raise SnapshotError(f"cannot encode object of type {type(obj).__name__}")


def decode(obj: Any) -> Any:
    if isinstance(obj, list):
        return [decode(v) for v in obj]
    if not isinstance(obj, dict):
        return obj
    if "__sharp__" in obj:
        return SHARP
    if "__enum__" in obj:
        return _lookup(obj["__enum__"])(obj["value"])
    if "__nd__" in obj:
        return np.array(obj["__nd__"], dtype=obj["dtype"]).reshape(obj["shape"])
    if "__rng__" in obj:
        state = decode(obj["__rng__"])
        bitgen = getattr(np.random, state["bit_generator"])()
        bitgen.state = state
        return np.random.Generator(bitgen)
    if "__dc__" in obj:
        cls = _lookup(obj["__dc__"])
        inst = object.__new__(cls)
        for name, v in obj["fields"].items():
            object.__setattr__(inst, name, decode(v))
        return inst
    if "__tuple__" in obj:
        return tuple(decode(v) for v in obj["__tuple__"])
    if "__deque__" in obj:
        return deque((decode(v) for v in obj["__deque__"]), maxlen=obj["maxlen"])
    if "__set__" in obj:
        items = [decode(v) for v in obj["__set__"]]
        return frozenset(items) if obj["frozen"] else set(items)
    if "__map__" in obj:
        return {decode(k): decode(v) for k, v in obj["__map__"]}
    raise SnapshotError(f"unrecognised tagged object with keys {sorted(obj)}")


def _dumps(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False).encode()


def snapshot(agent) -> bytes:
    body = _dumps(encode(agent))
    digest = hashlib.sha256(body).hexdigest()
    return SNAPSHOT_MAGIC + b" %d %s\n" % (SNAPSHOT_VERSION, digest.encode()) + body


def restore(data: bytes):
    """Decode a snapshot; raises :class:`SnapshotError` without returning partial state."""
    head, sep, body = data.partition(b"\n")
    parts = head.split(b" ")
    if not sep or len(parts) != 3 or parts[0] != SNAPSHOT_MAGIC:
        raise SnapshotError("not a schema-engine snapshot (bad header)")
    try:
        version = int(parts[1])
    except ValueError:
        raise SnapshotError("bad snapshot version field") from None
    if version != SNAPSHOT_VERSION:
        raise SnapshotError(
            f"snapshot format version {version} is not supported (expected {SNAPSHOT_VERSION})"
        )
    if hashlib.sha256(body).hexdigest().encode() != parts[2]:
        raise SnapshotError("snapshot checksum mismatch (truncated or corrupted)")
    try:
        return decode(json.loads(body))
    except (ValueError, KeyError, TypeError) as exc:
        raise SnapshotError(f"snapshot body could not be decoded: {exc}") from None


# --- traces -------------------------------------------------------------------------

def trace_line(obj: Dict[str, Any]) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def trace_header(config_doc: Dict[str, Any], seed: int, horizon: int) -> Dict[str, Any]:
    return {"format": TRACE_FORMAT, "version": TRACE_VERSION, "config": config_doc,
            "seed": seed, "horizon": horizon}


class TraceWriter:
    """Append-only JSON Lines writer: a header line, then one record per tick."""

    def __init__(self, fh: IO[str], header: Dict[str, Any]):
        self.fh = fh
        fh.write(trace_line(header) + "\n")

    def __call__(self, record: Dict[str, Any]) -> None:
        self.fh.write(trace_line(record) + "\n")


def read_trace(lines: Iterable[str]) -> Tuple[Dict[str, Any], Iterator[Tuple[int, str]]]:
    """Parse the header and return it with an iterator of ``(tick, raw line)``."""
    it = iter(lines)
    try:
        header = json.loads(next(it))
    except StopIteration:
        raise TraceFormatError("empty trace") from None
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"trace header is not JSON: {exc}") from None
    if not isinstance(header, dict) or header.get("format") != TRACE_FORMAT:
        raise TraceFormatError("not a schema-engine trace (missing format tag)")
    if header.get("version") != TRACE_VERSION:
        raise TraceFormatError(
            f"trace format version {header.get('version')!r} is not supported"
            f" (expected {TRACE_VERSION})"
        )
    for key in ("config", "seed", "horizon"):
        if key not in header:
            raise TraceFormatError(f"trace header lacks {key!r}")

    def records():
        for n, line in enumerate(it):
            line = line.rstrip("\n")
            if line:
                yield n, line

    return header, records()


def first_divergence(recorded: Iterable[Tuple[int, str]], fresh: List[str]) -> int:
    """Index of the first differing tick record, or -1 when the streams agree."""
    rec = [line for _, line in recorded]
    for i, (a, b) in enumerate(zip(rec, fresh)):
        if a != b:
            try:
                return int(json.loads(a).get("tick", i))
            except (ValueError, AttributeError):
                return i
    if len(rec) != len(fresh):
        return min(len(rec), len(fresh))
    return -1
