import io

import numpy as np
import pytest

from fembem_uq import cli
from fembem_uq.coupling import solve_sample
from fembem_uq.fem import evaluate_qoi
from fembem_uq.mlqmc import halton_point, map_to_sample


def test_dof_table_rows():
    assert cli.cmd_dof_table(3) == "level,fe,be\n1,37,32\n2,129,64\n3,481,128\n"
    assert cli.cmd_dof_table(1).splitlines() == ["level,fe,be", "1,37,32"]


def test_level_out_of_range(capsys):
    with pytest.raises(cli.ConfigError, match="level out of range"):
        cli.cmd_dof_table(0)
    assert cli.main(["dof-table", "--level", "9"]) == 2
    assert "level out of range" in capsys.readouterr().err


def test_dof_table_to_file(tmp_path):
    out = tmp_path / "dofs.csv"
    assert cli.main(["dof-table", "--level", "8", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[-1] == "8,459777,4096"


def test_config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# estimate settings\nlevel = 0\nfine-samples=1  # one point\nschedule=quadratic\n")
    assert cli.read_config(path) == {"level": 0, "fine_samples": 1, "schedule": "quadratic"}
    path.write_text("bogus = 1\n")
    with pytest.raises(cli.ConfigError):
        cli.read_config(path)
    path.write_text("level = two\n")
    with pytest.raises(cli.ConfigError):
        cli.read_config(path)


def test_number_format():
    assert cli.fmt(3) == "3"
    assert cli.fmt(0.1) == "0.10000000000000001"


def test_estimate_level_zero_single_sample(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("level=0\nfine_samples=1\n")
    assert cli.main(["estimate", "--config", str(cfg), "--threads", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "level,samples,mean"
    value = float(lines[-1].split(",")[1])
    expected = evaluate_qoi(solve_sample(map_to_sample(halton_point(1)), 0))
    assert value == float(cli.fmt(expected))


def test_estimate_without_randomness_matches_fine_qoi():
    text = cli.cmd_estimate(2, 3, epsilon=0.0)
    value = float(text.splitlines()[-1].split(",")[1])
    exact = evaluate_qoi(solve_sample(np.zeros(129), 2))
    assert value == pytest.approx(exact, rel=1e-12)


def test_convergence_csv_is_deterministic(tmp_path):
    args = dict(L_max=2, N_L=2, reference="1e-4")
    a = cli.cmd_convergence(**args, threads=1)
    b = cli.cmd_convergence(**args, threads=3, out=str(tmp_path / "c.csv"))
    assert a == b == (tmp_path / "c.csv").read_text()
    header, *rows = a.splitlines()
    assert header == "level,estimate,error,guide_2,guide_4"
    assert [r.split(",")[0] for r in rows] == ["1", "2"]
    assert rows[0].split(",")[3:] == ["0.5", "0.25"]


def test_convergence_level_limit():
    with pytest.raises(cli.ConfigError, match="level out of range"):
        cli.cmd_convergence(7, 10, reference="0")


def test_identity_checks_detect_flipped_normal():
    good = cli.sigma_identities(2)
    bad = cli.sigma_identities(2, normal_sign=-1)
    assert good["double_layer"] < 1e-8
    assert bad["double_layer"] > 1e-2


def test_validate_reports_all_checks():
    stream = io.StringIO()
    assert cli.run_validation(stream=stream)
    lines = stream.getvalue().splitlines()
    assert all(line.startswith("PASS") for line in lines)
    assert any("manufactured" in line and "order" in line for line in lines)


def test_validate_fails_with_flipped_normal():
    stream = io.StringIO()
    assert not cli.run_validation(normal_sign=-1, stream=stream)
    assert any(line.startswith("FAIL double_layer-identity") for line in stream.getvalue().splitlines())


def test_default_estimate_regression_anchor():
    # first verified run of the default setup, L = 4, N_L = 10, linear schedule
    text = cli.cmd_estimate(4, 10, threads=1)
    value = float(text.splitlines()[-1].split(",")[1])
    assert value > 0
    assert value == pytest.approx(1.506231381695839e-04, rel=1e-12)
