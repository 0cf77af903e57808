import io
import math

import numpy as np
import pandas as pd
import pytest

import main
from backend.database.models import VerificationRun
from utils.kernels import KERNEL_COLUMNS
from utils.verification import CheckOutcome


def read_csv(text):
    lines = [line for line in text.splitlines() if not line.startswith('#')]
    return pd.read_csv(io.StringIO("\n".join(lines)))


def run_cli(capsys, *argv):
    code = main.run(list(argv))
    return code, capsys.readouterr()


class TestValueCommands:
    def test_cosine_at_pi(self, capsys):
        code, out = run_cli(capsys, "ml", "--alpha", "2", "--beta", "1", "--z", "-9.8696044")
        assert code == 0
        df = read_csv(out.out)
        assert list(df.columns) == ['alpha', 'beta', 'z_re', 'z_im', 're', 'im']
        assert df.loc[0, 're'] == pytest.approx(-1.0, abs=1e-7)

    def test_complex_points(self, capsys):
        code, out = run_cli(capsys, "ml", "--alpha", "1", "--z", "0,1", "1")
        assert code == 0
        df = read_csv(out.out)
        assert df.loc[0, 're'] == pytest.approx(math.cos(1.0))
        assert df.loc[0, 'im'] == pytest.approx(math.sin(1.0))
        assert df.loc[1, 're'] == pytest.approx(math.e)

    def test_wright(self, capsys):
        code, out = run_cli(capsys, "wright", "--gamma", "0.5", "--z", "0")
        assert code == 0
        assert read_csv(out.out).loc[0, 're'] == pytest.approx(1.0 / math.sqrt(math.pi))

    def test_kernel_table(self, capsys):
        code, out = run_cli(capsys, "kernel", "--family", "half", "--alpha", "1", "--t", "1", "--s", "0.5,1,2")
        assert code == 0
        df = read_csv(out.out)
        assert list(df.columns) == KERNEL_COLUMNS
        assert len(df) == 3

    def test_kernel_laplace_rows(self, capsys):
        code, out = run_cli(capsys, "kernel", "--family", "p", "--alpha", "0.5", "--t", "1",
                            "--lambda", "0.5,1")
        assert code == 0
        df = read_csv(out.out)
        assert list(df.columns) == ['family', 't', 'lambda', 'residual']
        assert df['residual'].max() <= 1e-7


class TestMatrixCommands:
    def test_power(self, capsys, tmp_path):
        path = tmp_path / "a.txt"
        path.write_text("2\n1 0\n0 4\n")
        code, out = run_cli(capsys, "power", "--matrix", str(path), "--b", "0.5")
        assert code == 0
        np.testing.assert_allclose(read_csv(out.out).to_numpy(), [[1.0, 0.0], [0.0, 2.0]], atol=1e-8)

    def test_missing_matrix_file(self, capsys, tmp_path):
        code, out = run_cli(capsys, "power", "--matrix", str(tmp_path / "none.txt"), "--b", "0.5")
        assert code == 4
        assert "error" in out.err

    def test_solve_trajectory(self, capsys):
        code, out = run_cli(capsys, "solve", "--alpha", "0.5", "--t", "1", "--steps", "10")
        assert code == 0
        df = read_csv(out.out)
        assert list(df.columns) == ['t', 'component_0']
        assert len(df) == 11
        assert df['component_0'].iloc[0] == 1.0

    def test_diffusion_meta_line(self, capsys):
        code, out = run_cli(capsys, "diffusion", "--n", "8", "--alpha", "1", "--t", "0.1")
        assert code == 0
        first = out.out.splitlines()[0]
        assert first.startswith("# meta N=8 alpha=1 ")
        assert "discrepancy=" in first
        assert list(read_csv(out.out).columns) == ['x', 'u_subordination', 'u_l1']

    def test_monte_carlo(self, capsys):
        code, out = run_cli(capsys, "mc", "--alpha", "0.5", "--samples", "2000", "--seed", "3", "--lambda", "1")
        assert code == 0
        df = read_csv(out.out)
        assert df.loc[0, 'n'] == 2000 and df.loc[0, 'seed'] == 3
        assert 0.0 < df.loc[0, 'estimate'] < 1.0


class TestExitCodes:
    def test_unknown_flag(self, capsys):
        assert run_cli(capsys, "ml", "--bogus", "1")[0] == 2

    def test_unknown_command(self, capsys):
        assert run_cli(capsys, "integrate")[0] == 2

    def test_missing_parameter(self, capsys):
        assert run_cli(capsys, "ml", "--z", "1")[0] == 2

    def test_numerical_failure(self, capsys):
        assert run_cli(capsys, "ml", "--alpha", "2.5", "--z", "3")[0] == 3

    def test_help(self, capsys):
        assert run_cli(capsys, "--help")[0] == 0

    def test_out_file(self, capsys, tmp_path):
        target = tmp_path / "values.csv"
        code, out = run_cli(capsys, "ml", "--alpha", "1", "--z", "0", "--out", str(target))
        assert code == 0
        assert out.out == ""
        assert read_csv(target.read_text()).loc[0, 're'] == 1.0


class TestVerify:
    @staticmethod
    def fake_suite(passed):
        def run_suite(suite, cfg, tol):
            return [CheckOutcome(11, "subordination", "angle planner", 0.0, tol or 1e-15, passed)]
        return run_suite

    def test_passing_suite_is_recorded(self, capsys, monkeypatch, ledger):
        monkeypatch.setattr(main, "run_suite", self.fake_suite(True))
        code, out = run_cli(capsys, "verify", "--suite", "subordination")
        assert code == 0
        assert read_csv(out.out).loc[0, 'criterion'] == 11
        with ledger.get_session() as session:
            run = session.query(VerificationRun).one()
            assert run.status == "passed"
            assert run.suite == "subordination"

    def test_failing_suite_exits_three(self, capsys, monkeypatch, no_ledger):
        monkeypatch.setattr(main, "run_suite", self.fake_suite(False))
        assert run_cli(capsys, "verify", "--tol", "1e-3")[0] == 3
