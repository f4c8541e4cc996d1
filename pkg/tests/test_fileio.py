import json
import os

import numpy as np
import pytest

from qcap import channels as ch
from qcap import fileio


def test_emit_parse_roundtrip(tmp_path):
    path = str(tmp_path / "deph.json")
    cset = ch.CompoundSet("deph", (ch.dephasing_channel(0.3),))
    fileio.emit_channel_set(cset, path)
    back = fileio.parse_channel_set(path)
    assert back.name == "deph"
    assert back.size == 1
    for a, b in zip(cset.channels[0].kraus_ops, back.channels[0].kraus_ops):
        np.testing.assert_array_equal(a, b)  # bit-exact through 17g text

    # emitting the parsed set reproduces the file byte-for-byte
    path2 = str(tmp_path / "deph2.json")
    fileio.emit_channel_set(back, path2)
    assert open(path).read() == open(path2).read()


def test_parse_identity_minimal(tmp_path):
    path = str(tmp_path / "id.json")
    fileio.emit_channel_set(ch.CompoundSet("id", (ch.identity_channel(2),)), path)
    cset = fileio.parse_channel_set(path)
    assert cset.size == 1 and cset.channels[0].n_kraus == 1


def test_parse_rejects_non_tp(tmp_path):
    doc = {
        "schema_version": 1, "name": "bad", "dim_in": 2, "dim_out": 2,
        "channels": [{"name": "x", "kraus": [[[[1.1, 0], [0, 0]], [[0, 0], [1.1, 0]]]]}],
    }
    path = str(tmp_path / "bad.json")
    with open(path, "w") as fh:
        json.dump(doc, fh)
    with pytest.raises(fileio.ChannelSetError, match="trace preserving"):
        fileio.parse_channel_set(path)


def test_parse_error_names_field_path(tmp_path):
    doc = {"schema_version": 1, "name": "x", "dim_in": 2, "dim_out": 2,
           "channels": [{"name": "c", "kraus": [[[[1, 0]], [[0, 0], [1, 0]]]]}]}
    path = str(tmp_path / "bad2.json")
    with open(path, "w") as fh:
        json.dump(doc, fh)
    with pytest.raises(fileio.ChannelSetError, match=r"\$\.channels\[0\]\.kraus\[0\]\[0\]"):
        fileio.parse_channel_set(path)

    doc = {"schema_version": 3}
    with open(path, "w") as fh:
        json.dump(doc, fh)
    with pytest.raises(fileio.ChannelSetError, match=r"\$\.schema_version"):
        fileio.parse_channel_set(path)


def test_canonical_json_formatting():
    text = fileio.canonical_json({"b": 1.5, "a": [True, None, 2]})
    assert text == '{"a":[true,null,2],"b":1.5}'
    # 17 significant digits round-trip float64 exactly
    x = 0.1 + 0.2
    text = fileio.canonical_json({"x": x})
    assert json.loads(text)["x"] == x
    assert fileio.canonical_json(complex(1, -2)) == "[1,-2]"
    with pytest.raises(ValueError):
        fileio.canonical_json(float("nan"))


def test_canonical_json_sorted_keys_stable():
    d1 = {"z": 1, "a": 2, "m": {"q": 1.0, "b": 2.0}}
    d2 = {"a": 2, "m": {"b": 2.0, "q": 1.0}, "z": 1}
    assert fileio.canonical_json(d1) == fileio.canonical_json(d2)


def test_atomic_write(tmp_path):
    path = str(tmp_path / "out.json")
    fileio.atomic_write(path, "hello")
    assert open(path).read() == "hello"
    assert not [f for f in os.listdir(tmp_path) if f.endswith(".tmp")]


def test_rows_to_csv():
    text = fileio.rows_to_csv([("s", 2, 0, "mass", 0.5), ("s", 2, 1, "rank", 4)])
    lines = text.strip().split("\n")
    assert lines[0] == "section,l,channel,quantity,value"
    assert lines[1] == "s,2,0,mass,0.5"
