import json
import os

import pytest

from atomize import io as aio
from atomize.model import init_params


def test_write_atomic_replaces(tmp_path):
    p = tmp_path / "sub" / "a.txt"
    aio.write_atomic(p, "one")
    aio.write_atomic(p, "two")
    assert p.read_text() == "two"
    assert [f for f in os.listdir(p.parent)] == ["a.txt"]


def test_manifest_hash_ignores_timestamps():
    a = aio.build_manifest("x", {"k": 1}, ["o.csv"], started=1.0)
    b = aio.build_manifest("x", {"k": 1}, ["o.csv"], started=2.0)
    assert a["manifest_hash"] == b["manifest_hash"] == aio.manifest_hash(a)
    assert aio.build_manifest("x", {"k": 2}, ["o.csv"])["manifest_hash"] != a["manifest_hash"]


def test_finish_manifest_records_digests(tmp_path):
    out = tmp_path / "o.csv"
    out.write_text("a,b\n")
    m = aio.build_manifest("x", {}, [out])
    done = aio.finish_manifest(tmp_path / "m.json", m, [out])
    assert done["files"]["o.csv"] == aio.sha256_file(out)
    assert json.loads((tmp_path / "m.json").read_text())["manifest_hash"] == m["manifest_hash"]


def test_checkpoint_round_trip(tmp_path):
    p = init_params(3)
    path = tmp_path / "c.json"
    aio.save_checkpoint(path, p, "cfg", "data", "man", method="atom")
    q, raw = aio.load_checkpoint(path, "data")
    assert all(a.tobytes() == b.tobytes() for a, b in zip(p.arrays(), q.arrays()))
    assert raw["method"] == "atom" and raw["config_hash"] == "cfg"
    with pytest.raises(aio.HashMismatch):
        aio.load_checkpoint(path, "other")


def test_rows_to_csv_uses_repr():
    text = aio.rows_to_csv(["a", "b"], [{"a": 0.1 + 0.2, "b": 3}])
    assert text == "a,b\n0.30000000000000004,3\n"
