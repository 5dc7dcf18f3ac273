import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cul.errors import FormatError
from cul.objective import make_quadratic_pair
from cul.optimizer import ControlFunction, StepConfig, run
from cul.persistence import (
    HEADER,
    ResultRow,
    checkpoint_bytes,
    load_checkpoint,
    parse_checkpoint,
    read_results,
    results_text,
    rows_from_trajectory,
    save_checkpoint,
    write_results,
)
from cul.unlearn.model import init_model

finite = st.floats(allow_nan=False, allow_infinity=False)


def test_checkpoint_round_trip(tmp_path):
    model = init_model((16, 8, 4, 8, 16), seed=3)
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path)
    back = load_checkpoint(path)
    assert back.flatten().tobytes() == model.flatten().tobytes()
    assert back.layer_dims == model.layer_dims


def test_checkpoint_bytes_are_stable():
    model = init_model((4, 2, 4), seed=0)
    assert checkpoint_bytes(model) == checkpoint_bytes(init_model((4, 2, 4), seed=0))


def test_corrupt_magic():
    data = bytearray(checkpoint_bytes(init_model((4, 2, 4), seed=0)))
    data[0] ^= 0xFF
    with pytest.raises(FormatError) as info:
        parse_checkpoint(bytes(data))
    assert info.value.offset == 0


def test_version_mismatch():
    data = bytearray(checkpoint_bytes(init_model((4, 2, 4), seed=0)))
    data[8] = 99
    with pytest.raises(FormatError) as info:
        parse_checkpoint(bytes(data))
    assert info.value.offset == 8


def test_truncated_payload_reports_payload_boundary():
    data = checkpoint_bytes(init_model((4, 2, 4), seed=0))
    payload_start = 8 + 4 + 4 + 2 * 8
    with pytest.raises(FormatError) as info:
        parse_checkpoint(data[:-8])
    assert info.value.offset == payload_start
    with pytest.raises(FormatError):
        parse_checkpoint(data + b"\0" * 8)
    with pytest.raises(FormatError):
        parse_checkpoint(data[:14])


def test_empty_rows_give_header_only():
    assert results_text([], "csv") == ",".join(HEADER) + "\n"


def test_one_row_round_trips(tmp_path):
    row = ResultRow("sweep", 0.1, 7, 1 / 3, 2 / 3, 1e-300, 5e300, 0.0, -0.1, 12)
    path = tmp_path / "r.csv"
    write_results([row], path)
    with path.open() as fh:
        parsed = list(csv.reader(fh))
    assert tuple(parsed[0]) == HEADER
    assert float(parsed[1][3]) == 1 / 3
    assert read_results(path) == [row]


def test_missing_epsilon_is_empty_cell(tmp_path):
    row = ResultRow("boundary-high", None, 1, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0)
    assert results_text([row]).splitlines()[1].startswith("boundary-high,,1,")
    assert json.loads(results_text([row], "json"))[0]["epsilon"] is None


def test_json_matches_csv_for_long_trajectory(tmp_path):
    quad = make_quadratic_pair([0.0, 0.0], [1.0, 0.0])
    _, traj = run(quad, ControlFunction.phase1(), StepConfig(step_size=0.01, max_iters=100), [2.0, 1.0])
    rows = rows_from_trajectory(traj, "PhaseI")
    assert len(rows) == 100
    write_results(rows, tmp_path / "t.csv")
    write_results(rows, tmp_path / "t.json")
    via_csv = list(csv.DictReader(io.StringIO((tmp_path / "t.csv").read_text())))
    via_json = json.loads((tmp_path / "t.json").read_text())
    assert len(via_csv) == len(via_json) == 100
    for c, j in zip(via_csv, via_json):
        assert list(j) == list(HEADER)
        for k in HEADER[3:9]:
            assert float(c[k]) == j[k]
        assert int(c["iter"]) == j["iter"]


def test_write_error_names_path(tmp_path):
    bad = tmp_path / "missing" / "out.csv"
    with pytest.raises(OSError, match="missing"):
        write_results([], bad)


@settings(max_examples=200)
@given(st.lists(finite, min_size=6, max_size=6), st.one_of(st.none(), finite), st.integers(0, 10**9))
def test_csv_reals_round_trip_bitwise(vals, eps, it):
    row = ResultRow("p", eps, it, *vals, 3)
    cells = next(csv.reader(io.StringIO(results_text([row]).splitlines()[1])))
    for cell, v in zip(cells[3:9], vals):
        assert np.float64(float(cell)).tobytes() == np.float64(v).tobytes()
