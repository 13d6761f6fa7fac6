import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polystab import cli
from polystab import harness as hs


def test_bundled_configs():
    names = hs.bundled_configs()
    assert {"default", "quick", "taylor"} <= set(names)
    for name in names:
        cfg = hs.load_config(name)
        assert cfg.name == name
        assert cfg.h > 0 and cfg.rho == pytest.approx(cfg.rho_factor * cfg.h)


@pytest.mark.parametrize("name", ["default", "quick", "taylor"])
def test_config_round_trip(name):
    cfg = hs.load_config(name)
    again = hs.ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg


def test_config_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        hs.load_config("no-such-config")
    with pytest.raises(ValueError):
        hs.ExperimentConfig.from_dict({"unknown": 1})
    with pytest.raises(ValueError):
        hs.ExperimentConfig.from_dict({"prior": {"r0": 0.1, "colour": 3}})
    path = tmp_path / "mine.toml"
    path.write_text('name = "mine"\nh = "1/8"\n[prior]\ntheta0 = "pi/4"\n')
    cfg = hs.load_config(str(path))
    assert cfg.h == 0.125
    assert cfg.prior.theta0 == pytest.approx(np.pi / 4)


def test_fraction_strings():
    assert hs._number("1/24") == 1 / 24
    assert hs._number(0.5) == 0.5
    assert hs._angle("pi") == pytest.approx(np.pi)
    assert hs._angle("pi/6") == pytest.approx(np.pi / 6)


@given(st.lists(st.tuples(st.floats(allow_nan=False, allow_infinity=False), st.integers()), max_size=20))
def test_csv_is_exact_and_repeatable(tmp_path_factory, rows):
    d = tmp_path_factory.mktemp("csv")
    a = hs.write_csv(d / "a.csv", ("x", "n"), rows)
    b = hs.write_csv(d / "b.csv", ("x", "n"), rows)
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()[1:]
    back = [(float(l.split(",")[0]), int(l.split(",")[1])) for l in lines]
    assert back == [(float(x), n) for x, n in rows]


def test_derivative_check_gaps():
    chk = hs.DerivativeCheck(1.0, 1.02, 1.5, [], 2.0, {})
    assert chk.form_gap == pytest.approx(0.02)
    assert chk.swapped_gap == pytest.approx(0.5)


def test_probe_data_vanishes_off_the_open_face():
    x = np.array([[0.0, 0.3, 1.0], [1.0, 0.3, 1.0], [0.4, 0.0, 1.0], [0.4, 1.0, 1.0]])
    for fn in (hs.probe_data, hs.probe_data_tilted, hs.probe_data_odd):
        assert np.abs(fn(x)).max() <= 1e-15


def test_reconstruct_from_the_truth_stops_at_once():
    cfg = hs.load_config("quick")
    ctx = hs.Context.build(cfg)
    truth, target = hs.synthetic_target(cfg, ctx)
    res = hs.reconstruct(target, truth, cfg, ctx, truth)
    assert res.status == "objective_floor"
    assert len(res.trace) == 1
    assert res.trace[0][1] == 0.0 and res.trace[0][4] == 0.0


def test_iterate_admissibility_reasons():
    cfg = hs.load_config("quick")
    p0 = cfg.base.build()
    assert hs.iterate_admissible(p0, cfg) == ""
    assert hs.iterate_admissible(p0.translated([0, 0, 0.4]), cfg) == "inclusion"
    assert hs.iterate_admissible(hs.displaced_vertex(p0, 0, [0.2, 0.2, 0.2]), cfg) != ""


# ---------------------------------------------------------------- command line


def test_cli_validate(tmp_path, capsys):
    assert cli.main(["validate", "quick", "-o", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "validate.json").read_text())
    assert report["base"]["passed"] is True
    assert "base: pass" in capsys.readouterr().out


def test_cli_three_spheres(tmp_path):
    args = ["three-spheres", "quick", "-o", str(tmp_path), "--samples", "4", "--degree", "3"]
    assert cli.main(args) == 0
    first = (tmp_path / "three_spheres.csv").read_bytes()
    assert cli.main(args) == 0
    assert (tmp_path / "three_spheres.csv").read_bytes() == first


def test_cli_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["no-such-command"])
    assert exc.value.code == cli.EXIT_USAGE
    assert cli.main(["validate", "no-such-config", "-o", str(tmp_path)]) == cli.EXIT_USAGE
    assert "no-such-config" in capsys.readouterr().err


def test_cli_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "polystab.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "reconstruct" in proc.stdout
