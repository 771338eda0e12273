# /tests/test_utilities.py

import json
from functools import partial

import numpy as np
import pytest

from bitflip import read_csv, write_csv, write_json
from bitflip.utilities import coordinate_bit, fit_line, replica_rng, run_replicas


def draw(size, index, rng):
    return index, rng.random(size).tolist()


def test_replica_streams_are_keyed():
    assert replica_rng(5, 1).random() == replica_rng(5, 1).random()
    assert replica_rng(5, 1).random() != replica_rng(5, 2).random()
    assert replica_rng(5, 1, 3).random() != replica_rng(5, 1).random()


def test_coordinate_bits_are_fair():
    bits = [coordinate_bit(9, 0, k) for k in range(4000)]
    assert set(bits) == {0, 1}
    assert abs(np.mean(bits) - 0.5) < 0.05
    assert bits == [coordinate_bit(9, 0, k) for k in range(4000)]


def test_run_replicas_order_and_workers():
    serial = run_replicas(partial(draw, 3), 25, seed=12, workers=1)
    parallel = run_replicas(partial(draw, 3), 25, seed=12, workers=3)
    assert [i for i, _ in serial] == list(range(25))
    assert serial == parallel


def test_run_replicas_empty():
    assert run_replicas(partial(draw, 3), 0, seed=1) == []


def test_fit_line():
    x = np.linspace(0.0, 10.0, 21)
    slope, intercept, stderr = fit_line(x, 3.0 - 0.5 * x)
    assert slope == pytest.approx(-0.5)
    assert intercept == pytest.approx(3.0)


# output files

def test_csv_header_and_cells(tmp_path):
    path = tmp_path / "out" / "rows.csv"
    write_csv(str(path), [(0, 0.1, True), (1, 2.5, False)], ["id", "x", "flag"], {"seed": 3})
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("# bitflip ")
    assert lines[-3:] == ["id,x,flag", "0,0.1,1", "1,2.5,0"]
    columns, data = read_csv(str(path))
    assert columns == ["id", "x", "flag"]
    assert data.tolist() == [[0.0, 0.1, 1.0], [1.0, 2.5, 0.0]]


def test_json_sorted_and_plain(tmp_path):
    path = tmp_path / "result.json"
    write_json(str(path), {"b": np.int64(2), "a": float("inf"), "c": (1, 2)}, {"seed": 1})
    text = path.read_text(encoding="utf-8")
    document = json.loads(text)
    assert document["result"] == {"a": "inf", "b": 2, "c": [1, 2]}
    assert document["config"] == {"seed": 1}
    assert text.index('"bitflip"') < text.index('"config"') < text.index('"result"')
