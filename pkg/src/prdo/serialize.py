"""Versioned binary container for built oracles, plus a JSON summary export.

The payload is a tagged encoding of plain values, numpy arrays and objects of
this package.  Shared objects are written once and referenced afterwards, and
sets are written sorted, so equal builds give equal bytes.
"""
from __future__ import annotations

import importlib
import io
import json
import math
import struct

import numpy as np

from .graph import WeightedGraph

MAGIC = b"PRDO"
VERSION = 1
PACKAGE = __name__.split(".")[0]

# caches rebuilt on demand after loading
_SKIP = {"_apsp", "_index", "_graph"}


class FormatError(ValueError):
    pass


class _Writer:
    def __init__(self):
        self.buf = io.BytesIO()
        self.memo = {}

    def raw(self, b: bytes):
        self.buf.write(b)

    def tag(self, t: bytes):
        self.buf.write(t)

    def u64(self, x: int):
        self.buf.write(struct.pack("<Q", x))

    def string(self, s: str):
        b = s.encode()
        self.u64(len(b))
        self.buf.write(b)

    def value(self, x):
        if x is None:
            self.tag(b"N")
        elif x is True or x is False:
            self.tag(b"T" if x else b"F")
        elif isinstance(x, (int, np.integer)):
            x = int(x)
            if -(2 ** 63) <= x < 2 ** 63:
                self.tag(b"i")
                self.raw(struct.pack("<q", x))
            else:
                self.tag(b"I")
                self.string(str(x))
        elif isinstance(x, (float, np.floating)):
            self.tag(b"f")
            self.raw(struct.pack("<d", float(x)))
        elif isinstance(x, str):
            self.tag(b"s")
            self.string(x)
        elif isinstance(x, bytes):
            self.tag(b"b")
            self.u64(len(x))
            self.raw(x)
        elif isinstance(x, np.ndarray):
            self.tag(b"a")
            self.string(x.dtype.str)
            self.u64(x.ndim)
            for d in x.shape:
                self.u64(d)
            data = np.ascontiguousarray(x).tobytes()
            self.u64(len(data))
            self.raw(data)
        elif isinstance(x, (list, tuple)):
            self.tag(b"l" if isinstance(x, list) else b"t")
            self.u64(len(x))
            for y in x:
                self.value(y)
        elif isinstance(x, (set, frozenset)):
            self.tag(b"S" if isinstance(x, set) else b"Z")
            items = sorted(x, key=_sort_key)
            self.u64(len(items))
            for y in items:
                self.value(y)
        elif isinstance(x, dict):
            self.tag(b"d")
            self.u64(len(x))
            for k, v in x.items():
                self.value(k)
                self.value(v)
        else:
            self.obj(x)

    def obj(self, x):
        key = id(x)
        if key in self.memo:
            self.tag(b"r")
            self.u64(self.memo[key])
            return
        cls = type(x)
        if not cls.__module__.startswith(PACKAGE + "."):
            raise TypeError(f"cannot serialize {cls.__module__}.{cls.__qualname__}")
        self.memo[key] = len(self.memo)
        if isinstance(x, WeightedGraph):
            self.tag(b"G")
            self.u64(x.n)
            for arr in (x.eu, x.ev, x.ew):
                self.value(arr)
            return
        self.tag(b"o")
        self.string(f"{cls.__module__}:{cls.__qualname__}")
        state = {k: v for k, v in vars(x).items() if k not in _SKIP}
        self.value(state)


def _sort_key(x):
    if isinstance(x, tuple):
        return (1, tuple(_sort_key(y) for y in x))
    if isinstance(x, str):
        return (2, x)
    return (0, x)


class _Reader:
    def __init__(self, data: bytes):
        self.buf = memoryview(data)
        self.pos = 0
        self.memo = []

    def take(self, k: int) -> bytes:
        if self.pos + k > len(self.buf):
            raise FormatError("truncated payload")
        out = bytes(self.buf[self.pos:self.pos + k])
        self.pos += k
        return out

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def string(self) -> str:
        return self.take(self.u64()).decode()

    def value(self):
        t = self.take(1)
        if t == b"N":
            return None
        if t == b"T":
            return True
        if t == b"F":
            return False
        if t == b"i":
            return struct.unpack("<q", self.take(8))[0]
        if t == b"I":
            return int(self.string())
        if t == b"f":
            return struct.unpack("<d", self.take(8))[0]
        if t == b"s":
            return self.string()
        if t == b"b":
            return self.take(self.u64())
        if t == b"a":
            dt = np.dtype(self.string())
            shape = tuple(self.u64() for _ in range(self.u64()))
            data = self.take(self.u64())
            return np.frombuffer(data, dtype=dt).reshape(shape).copy()
        if t in (b"l", b"t"):
            items = [self.value() for _ in range(self.u64())]
            return items if t == b"l" else tuple(items)
        if t in (b"S", b"Z"):
            items = [self.value() for _ in range(self.u64())]
            return set(items) if t == b"S" else frozenset(items)
        if t == b"d":
            out = {}
            for _ in range(self.u64()):
                k = self.value()
                out[k] = self.value()
            return out
        if t == b"r":
            return self.memo[self.u64()]
        if t == b"G":
            slot = len(self.memo)
            self.memo.append(None)
            n = self.u64()
            eu, ev, ew = self.value(), self.value(), self.value()
            g = WeightedGraph(n, eu, ev, ew)
            self.memo[slot] = g
            return g
        if t == b"o":
            name = self.string()
            mod, qual = name.split(":")
            if not mod.startswith(PACKAGE + "."):
                raise FormatError(f"refusing class outside the package: {name}")
            cls = importlib.import_module(mod)
            for part in qual.split("."):
                cls = getattr(cls, part)
            x = object.__new__(cls)
            self.memo.append(x)
            x.__dict__.update(self.value())
            return x
        raise FormatError(f"unknown tag {t!r} at offset {self.pos - 1}")


def dumps(obj, kind: str = "oracle") -> bytes:
    w = _Writer()
    w.value(obj)
    payload = w.buf.getvalue()
    header = MAGIC + struct.pack("<H", VERSION)
    k = kind.encode()
    return header + struct.pack("<H", len(k)) + k + struct.pack("<Q", len(payload)) + payload


def loads(data: bytes):
    """Returns (kind, object)."""
    if data[:4] != MAGIC:
        raise FormatError("not an oracle file (bad magic)")
    (ver,) = struct.unpack("<H", data[4:6])
    if ver != VERSION:
        raise FormatError(f"unsupported container version {ver}")
    (kl,) = struct.unpack("<H", data[6:8])
    kind = data[8:8 + kl].decode()
    (plen,) = struct.unpack("<Q", data[8 + kl:16 + kl])
    payload = data[16 + kl:]
    if len(payload) != plen:
        raise FormatError("payload length mismatch")
    r = _Reader(payload)
    return kind, r.value()


def save(obj, path, kind: str = "oracle") -> int:
    data = dumps(obj, kind)
    with open(path, "wb") as fh:
        fh.write(data)
    return len(data)


def load(path):
    with open(path, "rb") as fh:
        return loads(fh.read())


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def to_json(d: dict) -> str:
    return json.dumps(_jsonable(d), indent=2, sort_keys=True)
