import csv
import dataclasses

import pytest
import yaml

from prionoc.cli import main
from prionoc.config import RunConfig, dump_config, load_config, parse_config
from prionoc.errors import FormatError


def write_cfg(tmp_path, data, name="cfg.yaml"):
    data = dict(data)
    data.setdefault("output", str(tmp_path / "out"))
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


def rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


SMALL_SIM = {"cycles": 100_000, "warmup": 1000, "seed": 3}


def test_analyze_ring(tmp_path):
    cfg = write_cfg(tmp_path, {"traffic": {"fraction": 0.5}})
    assert main(["analyze", "--config", str(cfg)]) == 0
    assert len(rows(tmp_path / "out" / "analytical.csv")) == 1 + 56


def test_analyze_unstable_exit_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"traffic": {"rate": 0.06}})
    assert main(["analyze", "--config", str(cfg)]) == 2
    assert "unstable" in capsys.readouterr().err


def test_analyze_mesh(tmp_path):
    cfg = write_cfg(tmp_path, {"topology": {"kind": "mesh", "width": 6, "height": 6}})
    assert main(["analyze", "--config", str(cfg)]) == 0
    assert len(rows(tmp_path / "out" / "analytical.csv")) == 1 + 1260


def test_simulate_is_reproducible(tmp_path):
    cfg = write_cfg(tmp_path, {"simulation": SMALL_SIM})
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "simulated.csv").read_bytes()
    assert a == (tmp_path / "b" / "simulated.csv").read_bytes()


def mean_sim(path):
    data = rows(path)[1:]
    return sum(float(r[4]) for r in data) / len(data)


@pytest.mark.slow
def test_seed_changes_within_noise(tmp_path):
    cfg = write_cfg(tmp_path, {"simulation": {"cycles": 1_000_000, "warmup": 5000}})
    assert main(["simulate", "--config", str(cfg), "--seed", "1", "--out", str(tmp_path / "a")]) == 0
    assert main(["simulate", "--config", str(cfg), "--seed", "2", "--out", str(tmp_path / "b")]) == 0
    a, b = (tmp_path / "a" / "simulated.csv"), (tmp_path / "b" / "simulated.csv")
    assert a.read_bytes() != b.read_bytes()
    assert mean_sim(a) == pytest.approx(mean_sim(b), rel=0.03)


def test_simulate_zero_traffic_header_only(tmp_path):
    cfg = write_cfg(tmp_path, {"traffic": {"rate": 0.0}, "simulation": SMALL_SIM})
    assert main(["simulate", "--config", str(cfg)]) == 0
    assert rows(tmp_path / "out" / "simulated.csv") == [
        ["source", "destination", "class", "analytical_latency", "sim_latency", "mape"]]


def test_sweep_analytical_only(tmp_path):
    cfg = write_cfg(tmp_path, {"sweep": {"simulate": False}})
    assert main(["sweep", "--config", str(cfg)]) == 0
    data = rows(tmp_path / "out" / "sweep.csv")
    assert data[0] == ["fraction_of_lambda_max", "analytical_mean", "sim_mean", "mape"]
    assert len(data) == 10
    means = [float(r[1]) for r in data[1:]]
    assert all(a < b for a, b in zip(means, means[1:]))
    assert all(r[2] == "" and r[3] == "" for r in data[1:])


def test_sweep_single_fraction_with_sim(tmp_path):
    cfg = write_cfg(tmp_path, {"sweep": {"fractions": [0.4]}, "simulation": SMALL_SIM})
    assert main(["sweep", "--config", str(cfg)]) == 0
    data = rows(tmp_path / "out" / "sweep.csv")
    assert len(data) == 2 and data[1][2] != "" and float(data[1][3]) < 5


def test_sweep_parallel_matches_serial(tmp_path):
    cfg = write_cfg(tmp_path, {"sweep": {"fractions": [0.2, 0.6]}, "simulation": SMALL_SIM})
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["sweep", "--config", str(cfg), "--jobs", "2", "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()


def test_compare(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"simulation": SMALL_SIM})
    out = tmp_path / "out"
    assert main(["analyze", "--config", str(cfg)]) == 0
    assert main(["simulate", "--config", str(cfg)]) == 0
    assert main(["compare", "--config", str(cfg), str(out / "analytical.csv"), str(out / "simulated.csv")]) == 0
    assert "mean MAPE" in capsys.readouterr().out
    data = rows(out / "comparison.csv")
    assert len(data) == 57 and all(r[5] for r in data[1:])


def test_compare_identical(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"simulation": SMALL_SIM})
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg)]) == 0
    sim = out / "simulated.csv"
    ana = out / "as_analytical.csv"
    lines = rows(sim)
    with open(ana, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(lines[0])
        for r in lines[1:]:
            w.writerow([r[0], r[1], r[2], r[4], "", ""])
    assert main(["compare", "--config", str(cfg), str(ana), str(sim)]) == 0
    assert "mean MAPE 0.0000%" in capsys.readouterr().out


def test_compare_missing_pair_exit_3(tmp_path):
    cfg = write_cfg(tmp_path, {})
    out = tmp_path / "out"
    assert main(["analyze", "--config", str(cfg)]) == 0
    full = (out / "analytical.csv").read_text().splitlines()
    cut = tmp_path / "cut.csv"
    cut.write_text("\n".join(full[:-1]) + "\n")
    assert main(["compare", "--config", str(cfg), str(out / "analytical.csv"), str(cut)]) == 3


def test_dump_config_round_trip(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"topology": {"kind": "mesh", "width": 4, "height": 3, "switch_latency": 2},
                               "sweep": {"fractions": [0.25, 0.5]}, "analysis": {"residual": "printed"}})
    assert main(["analyze", "--config", str(cfg), "--seed", "9", "--dump-config"]) == 0
    text = capsys.readouterr().out
    again = parse_config(yaml.safe_load(text))
    base = load_config(cfg)
    assert again == dataclasses.replace(base, simulation=dataclasses.replace(base.simulation, seed=9))
    assert parse_config(yaml.safe_load(dump_config(again))) == again


def test_default_config_round_trip():
    cfg = parse_config({})
    assert cfg == RunConfig()
    assert parse_config(yaml.safe_load(dump_config(cfg))) == cfg


@pytest.mark.parametrize("data", [
    {"topology": {"kind": "torus"}},
    {"topology": {"nodes": 1}},
    {"traffic": {"fraction": 1.5}},
    {"traffic": {"matrix": "missing.csv"}},
    {"sweep": {"fractions": []}},
    {"simulation": {"cycles": 10, "warmup": 10}},
    {"bogus": {}},
    {"topology": {"colour": "red"}},
    {"simulation": {"seed": "x"}},
])
def test_bad_config_rejected(tmp_path, data):
    with pytest.raises(FormatError):
        parse_config(data, tmp_path)
    path = write_cfg(tmp_path, data)
    assert main(["analyze", "--config", str(path)]) == 1


def test_usage_errors():
    assert main(["analyze", "--config", "/nonexistent.yaml"]) == 1
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == 1


def test_matrix_file_relative_to_config(tmp_path):
    (tmp_path / "m.csv").write_text("source,destination,rate\n0,3,0.05\n1.1,0.0,0.02\n")
    cfg = write_cfg(tmp_path, {"topology": {"kind": "mesh", "width": 3, "height": 3},
                               "traffic": {"matrix": "m.csv", "fraction": None, "scale": 2.0}})
    assert main(["analyze", "--config", str(cfg)]) == 0
    data = rows(tmp_path / "out" / "analytical.csv")
    assert [(r[0], r[1]) for r in data[1:]] == [("0", "3"), ("4", "0")]
