import numpy as np
import pandas as pd
import pytest

from utils.table_writer import (
    MC_COLUMNS, matrix_frame, mc_frame, render, trajectory_frame, value_frame, verify_frame, write_table,
)
from utils.trajectory import Trajectory


def test_render_full_precision_and_meta():
    text = render(pd.DataFrame({'x': [1.0 / 3.0]}), {'N': 8, 'h': 0.125})
    lines = text.splitlines()
    assert lines[0] == "# meta N=8 h=0.125"
    assert lines[1] == "x"
    assert float(lines[2]) == 1.0 / 3.0


def test_value_frame_columns():
    df = value_frame([1.0 + 2.0j], [0.5 - 0.25j], alpha=0.5, beta=1.0)
    assert list(df.columns) == ['alpha', 'beta', 'z_re', 'z_im', 're', 'im']
    assert df.loc[0, 'im'] == -0.25


def test_matrix_frame_splits_complex_columns():
    assert list(matrix_frame(np.eye(2)).columns) == ['col_0', 'col_1']
    df = matrix_frame(np.array([[1.0, 1.0j], [0.0, 2.0]]))
    assert list(df.columns) == ['col_0_re', 'col_1_re', 'col_0_im', 'col_1_im']
    assert df.loc[0, 'col_1_im'] == 1.0


def test_trajectory_frame():
    traj = Trajectory(np.array([0.0, 0.5]), np.array([[1.0, 2.0], [3.0, 4.0]]))
    df = trajectory_frame(traj)
    assert list(df.columns) == ['t', 'component_0', 'component_1']
    assert df['component_1'].tolist() == [2.0, 4.0]


def test_mc_and_verify_frames():
    df = mc_frame(np.array([0.4]), np.array([0.01]), 1000, 2 ** 63)
    assert list(df.columns) == MC_COLUMNS
    assert int(df.loc[0, 'seed']) == 2 ** 63
    rows = verify_frame([{'criterion': 1, 'suite': 'specfun', 'description': 'd', 'value': 0.0,
                          'threshold': 1e-10, 'passed': True}])
    assert rows.loc[0, 'passed']


def test_write_table_to_file(tmp_path, capsys):
    out = tmp_path / "table.csv"
    write_table(pd.DataFrame({'a': [1.5]}), str(out))
    assert out.read_text() == "a\n1.5\n"
    assert capsys.readouterr().out == ""


def test_write_table_unwritable(tmp_path):
    with pytest.raises(OSError):
        write_table(pd.DataFrame({'a': [1.0]}), str(tmp_path))
