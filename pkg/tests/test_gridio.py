import csv

import numpy as np
import pytest

from qevents.emfield import GridField
from qevents.gridio import MAGIC, export_csv, read_grid, write_grid


@pytest.mark.parametrize("complex_values", [False, True])
def test_binary_round_trip(tmp_path, complex_values):
    rng = np.random.default_rng(0)
    vals = rng.normal(size=(4, 5, 6, 3))
    if complex_values:
        vals = vals + 1j * rng.normal(size=vals.shape)
    g = GridField([0.5, -1.0, 2.0], [0.1, 0.2, 0.3], vals)
    path = tmp_path / "g.qgrid"
    write_grid(path, g)
    raw = path.read_bytes()
    assert raw[:8] == MAGIC
    back = read_grid(path)
    assert back.same_geometry(g)
    np.testing.assert_array_equal(back.values, g.values)
    assert np.iscomplexobj(back.values) == complex_values


def test_layout_is_row_major_with_component_fastest(tmp_path):
    vals = np.arange(4 * 4 * 2, dtype=float).reshape(4, 4, 2)
    path = tmp_path / "g.qgrid"
    write_grid(path, GridField([0, 0], [1, 1], vals))
    payload = np.frombuffer(path.read_bytes()[-vals.size * 8 :], dtype="<f8")
    np.testing.assert_array_equal(payload, np.arange(vals.size))


def test_corrupt_files_rejected(tmp_path):
    path = tmp_path / "bad.qgrid"
    path.write_bytes(b"NOTAGRID" + b"\0" * 40)
    with pytest.raises(ValueError):
        read_grid(path)
    g = GridField([0, 0], [1, 1], np.zeros((4, 4)))
    write_grid(path, g)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ValueError):
        read_grid(path)


def test_csv_export(tmp_path):
    g = GridField([0, 1], [0.5, 0.25], (np.arange(16) * (1 + 1j)).reshape(4, 4))
    path = tmp_path / "g.csv"
    export_csv(path, g, ["psi"])
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "x", "psi_re", "psi_im"]
    assert len(rows) == 17
    assert [float(v) for v in rows[6]] == [0.5, 1.25, 5.0, 5.0]
