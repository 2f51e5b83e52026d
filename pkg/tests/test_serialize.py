import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prdo import serialize
from prdo.composer import build_preset
from prdo.generators import erdos_renyi
from prdo.graph import PathResult
from prdo.preservers import build_3eps_preserver

leaves = st.one_of(st.none(), st.booleans(), st.integers(-2 ** 70, 2 ** 70),
                   st.floats(allow_nan=False), st.text(max_size=8), st.binary(max_size=8))
values = st.recursive(leaves, lambda inner: st.one_of(
    st.lists(inner, max_size=4), st.tuples(inner, inner),
    st.dictionaries(st.text(max_size=4), inner, max_size=4),
    st.frozensets(st.integers(-50, 50), max_size=5)), max_leaves=20)


@settings(max_examples=150, deadline=None)
@given(values)
def test_roundtrip_plain_values(x):
    kind, y = serialize.loads(serialize.dumps(x, "plain"))
    assert kind == "plain"
    assert y == x


def test_roundtrip_arrays_and_objects():
    arrs = [np.arange(7, dtype=np.int64), np.eye(3), np.zeros((0, 4)), np.array([np.inf, -1.5])]
    out = serialize.loads(serialize.dumps(arrs))[1]
    for a, b in zip(arrs, out):
        assert a.dtype == b.dtype and np.array_equal(a, b)
    p = PathResult([1, 2], [5], 3.0)
    shared = {"a": p, "b": p}
    back = serialize.loads(serialize.dumps(shared))[1]
    assert back["a"] is back["b"] and back["a"] == p


def test_sets_are_written_sorted():
    a = serialize.dumps({3, 1, 2})
    b = serialize.dumps({2, 3, 1})
    assert a == b


@pytest.mark.parametrize("preset", ["thm6.1", "thm6.2", "ultra"])
def test_oracle_roundtrip_answers(preset):
    g = erdos_renyi(100, 0.05, seed=2)
    o = build_preset(g, 4, 0.5, preset, seed=1, strict=False)
    data = serialize.dumps(o)
    o2 = serialize.loads(data)[1]
    assert serialize.dumps(o2) == data
    for u, v in [(0, 99), (5, 6), (17, 80), (42, 42)]:
        assert o.query(u, v) == o2.query(u, v)


def test_preserver_roundtrip():
    g = erdos_renyi(80, 0.05, seed=3)
    p = build_3eps_preserver(g, 3, 0.5, [(0, 79), (3, 40)])
    q = serialize.loads(serialize.dumps(p))[1]
    assert q.query(0, 79) == p.query(0, 79)


def test_format_errors():
    good = serialize.dumps([1, 2])
    with pytest.raises(serialize.FormatError, match="magic"):
        serialize.loads(b"XXXX" + good[4:])
    with pytest.raises(serialize.FormatError, match="version"):
        serialize.loads(good[:4] + b"\x09\x00" + good[6:])
    with pytest.raises(serialize.FormatError, match="length"):
        serialize.loads(good[:-1])
    with pytest.raises(TypeError):
        serialize.dumps(object())


def test_refuses_foreign_classes():
    w = serialize._Writer()
    w.tag(b"o")
    w.string("os:system")
    w.value({})
    payload = w.buf.getvalue()
    data = b"PRDO\x01\x00\x01\x00x" + len(payload).to_bytes(8, "little") + payload
    with pytest.raises(serialize.FormatError, match="outside"):
        serialize.loads(data)


def test_to_json_handles_numpy_and_infinities():
    text = serialize.to_json({"a": np.int64(3), "b": math.inf, 1: np.array([1.5, 2.0])})
    assert json.loads(text) == {"a": 3, "b": "inf", "1": [1.5, 2.0]}
