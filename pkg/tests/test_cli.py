import json

import numpy as np
import pytest
import yaml

from wgdelay import cli
from wgdelay.errors import ConfigurationError, InputError
from wgdelay.observables import csv_columns, read_csv


def write(tmp_path, data, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data) if name.endswith(".yaml") else json.dumps(data))
    return path


def test_minimal_config_gets_defaults(tmp_path):
    cfg = cli.parse_config(write(tmp_path, {"N": 4, "eta": 0.4}))
    assert cfg.gamma_dt == 0.01 and cfg.chi_max == 128 and cfg.cutoff == 1e-10 and cfg.gamma_t_max == 16
    assert cfg.ell == 40
    assert not cfg.markovian
    assert cli.parse_config(write(tmp_path, {"N": 4, "eta": 0}, "m.json")).markovian


@pytest.mark.parametrize(
    "data, where",
    [
        ({"N": 4, "etta": 0.4}, "etta"),
        ({"chi_max": 0}, "chi_max"),
        ({"observables": ["photons", "bogus"]}, r"observables\[1\]"),
        ({"sweep": {"chi_max": [64, "x"]}}, r"sweep.chi_max\[1\]"),
        ({"sweep": {"spin": [1]}}, "sweep.spin"),
        ({"N": 3, "eta": 0.4}, "N"),
    ],
)
def test_invalid_configs_name_the_key(tmp_path, data, where):
    with pytest.raises(ConfigurationError, match=where):
        cli.parse_config(write(tmp_path, data))


def test_high_order_correlations_need_photon_levels(tmp_path):
    with pytest.raises(ConfigurationError, match="n_max: 3"):
        cli.parse_config(write(tmp_path, {"correlations": [3], "n_max": 1}))
    cfg = cli.parse_config(write(tmp_path, {"correlations": [2, 3], "n_max": 3}))
    assert "correlations" in cfg.observables


def test_missing_file():
    with pytest.raises(InputError):
        cli.parse_config("/nonexistent/cfg.yaml")


def small_config(tmp_path, **kw):
    base = dict(N=2, eta=0.04, gamma_dt=0.02, gamma_t_max=0.4, chi_max=16, output_dir=str(tmp_path / "out"))
    base.update(kw)
    return cli.config_from_mapping(base)


def test_run_writes_series_profiles_and_metadata(tmp_path):
    cfg = small_config(tmp_path, profile_times=[2.0], checkpoint=str(tmp_path / "state.bin"))
    files = cli.run_experiment(cfg)
    series = read_csv(files["series"])
    assert list(series) == csv_columns(2)
    assert len(series["t"]) == 21
    assert np.isnan(series["ps1"]).all()
    meta = json.loads(open(files["metadata"]).read())
    assert meta["config"] == cfg.to_dict()
    assert cli.config_from_mapping(meta["config"]) == cfg
    assert meta["solver"] == "collision" and meta["ell"] == 2
    assert set(k for k in files if k.startswith("profile")) == {"profile_4", "profile_20"}
    header = open(files["profile_20"]).readline().strip().split(",")
    assert header[:2] == ["x_over_d", "density"]


def test_runs_are_deterministic(tmp_path):
    a = cli.run_experiment(small_config(tmp_path / "a"))
    b = cli.run_experiment(small_config(tmp_path / "b"))
    assert open(a["series"]).read() == open(b["series"]).read()


def test_markov_route_and_comparison(tmp_path):
    m = cli.run_experiment(small_config(tmp_path, eta=0.0, output_dir=str(tmp_path / "m")))
    meta = json.loads(open(m["metadata"]).read())
    assert meta["solver"] == "markov"
    assert cli.compare(m["series"], m["series"]).max_rel == 0.0
    assert cli.main(["compare", m["series"], m["series"], "--tol", "0"]) == 0
    c = cli.run_experiment(small_config(tmp_path, output_dir=str(tmp_path / "c")))
    dev = cli.compare(c["series"], m["series"])
    assert dev.max_rel > 0
    assert cli.main(["compare", c["series"], m["series"], "--tol", "1e-12"]) == 1


def test_disjoint_grids_are_rejected():
    with pytest.raises(InputError):
        cli.relative_deviation([0, 1], [1, 1], [2, 3], [1, 1])


def test_sweep_runs_each_point_once(tmp_path):
    cfg = small_config(tmp_path, sweep={"chi_max": [2, 16]}, tolerance=0.5)
    summary = cli.sweep(cfg, workers=1)
    assert len(summary["points"]) == 2
    assert len({p["series"] for p in summary["points"]}) == 2
    assert summary["max_pairwise_deviation"] >= 0
    assert (tmp_path / "out" / "sweep_summary.json").exists()


def test_main_reports_config_errors(tmp_path, capsys):
    path = write(tmp_path, {"bogus": 1})
    assert cli.main(["run", str(path)]) == 2
    assert "bogus" in capsys.readouterr().err
