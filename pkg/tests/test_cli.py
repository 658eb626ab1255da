"""End-to-end runs of the command-line pipeline."""

import os

import numpy as np
import pytest

from qpsense import cli
from qpsense.config import config_from_kv, config_to_kv, default_config_text
from qpsense.estimation import ExperimentDataset, write_dataset_csv
from qpsense.kvconfig import load_kv, parse_kv


BASE_RECIPES = """
recipe.count = 3
recipe.0.label = 1.5%
recipe.0.dry_mass_g = 0.15
recipe.0.molar_mass_g_per_mol = 66430.0
recipe.0.solvent_volume_l = 0.01
recipe.0.injected_volume_l = 0.00013
recipe.0.cavity_volume_l = 0.0005
recipe.1.label = 1%
recipe.1.dry_mass_g = 0.1
recipe.1.molar_mass_g_per_mol = 66430.0
recipe.1.solvent_volume_l = 0.01
recipe.1.injected_volume_l = 0.00013
recipe.1.cavity_volume_l = 0.0005
recipe.2.label = 0.5%
recipe.2.dry_mass_g = 0.05
recipe.2.molar_mass_g_per_mol = 66430.0
recipe.2.solvent_volume_l = 0.01
recipe.2.injected_volume_l = 0.00013
recipe.2.cavity_volume_l = 0.0005
"""


def write_config(path, out_dir, **overrides):
    kv = {
        "run.seed": "3001",
        "run.out_dir": str(out_dir),
        "run.mode": "both",
        "sampling.nu": "150",
        "sampling.mu": "200",
        "sampling.bin_seconds": "6.0",
        "signal.source": "direct",
        "signal.probe": "quantum",
        "signal.baseline": "0.06",
        "signal.duration_s": "102.0",
        "kinetics.ka": "672.0",
        "kinetics.kd": "0.01",
        "kinetics.alpha": "18.9497",
        "bootstrap.m": "20",
        "bootstrap.p": "40",
        "estimation.steady_time_s": "99.0",
    }
    kv.update(parse_kv(BASE_RECIPES))
    kv.update({k: str(v) for k, v in overrides.items()})
    lines = [f"{k} = {v}" for k, v in kv.items()]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_default_config_round_trips():
    cfg = config_from_kv(parse_kv(default_config_text()))
    kv1 = config_to_kv(cfg, "x")
    kv2 = config_to_kv(config_from_kv(kv1), "x")
    assert kv1 == kv2
    assert cfg.seed == 20260823


def test_print_default_config(capsys):
    assert cli.main(["--print-default-config"]) == 0
    text = capsys.readouterr().out
    cfg = config_from_kv(parse_kv(text))
    assert cfg.plan.nu == 150 and cfg.plan.mu == 2000


def test_version_flag():
    with pytest.raises(SystemExit) as exc:
        cli.main(["--version"])
    assert exc.value.code == 0


def test_no_subcommand_is_config_error(capsys):
    assert cli.main([]) == 2
    assert "no subcommand" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    rc = cli.main(["simulate", "--config", str(tmp_path / "nope.txt")])
    assert rc == 2
    assert "config error" in capsys.readouterr().err


def test_missing_seed_key(tmp_path, capsys):
    path = tmp_path / "cfg.txt"
    path.write_text("run.out_dir = out\n")
    assert cli.main(["simulate", "--config", str(path)]) == 2
    assert "run.seed" in capsys.readouterr().err


def test_simulate_is_deterministic(tmp_path):
    cfg = write_config(tmp_path / "cfg.txt", tmp_path / "a",
                       **{"signal.duration_s": "30.0", "sampling.mu": "50",
                          "recipe.count": "1"})
    assert cli.main(["simulate", "--config", str(cfg)]) == 0
    assert cli.main(["simulate", "--config", str(cfg),
                     "--out", str(tmp_path / "b")]) == 0
    assert cli.main(["simulate", "--config", str(cfg), "--seed", "99",
                     "--out", str(tmp_path / "c")]) == 0
    first = read_bytes(tmp_path / "a" / "dataset_0.csv")
    assert first == read_bytes(tmp_path / "b" / "dataset_0.csv")
    assert first != read_bytes(tmp_path / "c" / "dataset_0.csv")


def test_simulate_zero_duration(tmp_path):
    cfg = write_config(tmp_path / "cfg.txt", tmp_path / "out",
                       **{"signal.duration_s": "0.0", "recipe.count": "1"})
    assert cli.main(["simulate", "--config", str(cfg)]) == 0
    lines = (tmp_path / "out" / "dataset_0.csv").read_text().splitlines()
    assert lines == ["time_s,set_index,T_i"]


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_simulate_then_estimate_via_manifest(tmp_path):
    # p=40 keeps the chain fast at the cost of a few convergence warnings
    cfg = write_config(tmp_path / "cfg.txt", tmp_path / "out")
    assert cli.main(["simulate", "--config", str(cfg)]) == 0
    manifest = tmp_path / "out" / "manifest.txt"
    kv = load_kv(manifest)
    assert kv["dataset.2.path"] == "dataset_2.csv"
    rc = cli.main(["estimate", "--config", str(manifest),
                   "--out", str(tmp_path / "est")])
    assert rc == 0
    rows = (tmp_path / "est" / "results.csv").read_text().splitlines()
    assert rows[0] == "parameter,mode,mean,std,n"
    names = {r.split(",")[0] for r in rows[1:]}
    assert {"ks[1.5%]", "ks[1%]", "ks[0.5%]", "affinity", "alpha",
            "ka", "kd"} <= names
    modes = {r.split(",")[1] for r in rows[1:]}
    assert modes == {"quantum", "classical"}
    # the manifest written by estimate reloads into the same configuration,
    # apart from the overridden output directory
    left = config_to_kv(config_from_kv(load_kv(tmp_path / "est"
                                               / "manifest.txt")), "x")
    right = config_to_kv(config_from_kv(load_kv(manifest)), "x")
    left.pop("run.out_dir")
    right.pop("run.out_dir")
    assert left == right


def test_estimate_mode_override_and_positional(tmp_path):
    cfg = write_config(tmp_path / "cfg.txt", tmp_path / "out",
                       **{"recipe.count": "1", "sampling.mu": "50",
                          "bootstrap.p": "20"})
    assert cli.main(["simulate", "--config", str(cfg)]) == 0
    rc = cli.main(["estimate", "--config", str(cfg), "--mode", "quantum",
                   "--out", str(tmp_path / "est"),
                   str(tmp_path / "out" / "dataset_0.csv")])
    assert rc == 0
    rows = (tmp_path / "est" / "results.csv").read_text().splitlines()[1:]
    assert rows and all(r.split(",")[1] == "quantum" for r in rows)


def test_estimate_more_paths_than_recipes(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.txt", tmp_path / "out",
                       **{"recipe.count": "1", "sampling.mu": "50"})
    assert cli.main(["simulate", "--config", str(cfg)]) == 0
    ds = str(tmp_path / "out" / "dataset_0.csv")
    assert cli.main(["estimate", "--config", str(cfg), ds, ds]) == 2
    assert "more dataset paths" in capsys.readouterr().err


def test_estimate_malformed_dataset(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.txt", tmp_path / "out",
                       **{"recipe.count": "1"})
    bad = tmp_path / "dataset_bad.csv"
    bad.write_text("time_s,set_index,T_i\n3.0,0,0.06\noops\n")
    rc = cli.main(["estimate", "--config", str(cfg), str(bad)])
    assert rc == 3
    assert "dataset_bad.csv:3" in capsys.readouterr().err


def test_estimate_all_discarded_is_estimation_failure(tmp_path, capsys):
    # decreasing sensorgrams fit fine but give non-positive amplitudes,
    # so every affinity repetition is discarded
    cfg = write_config(tmp_path / "cfg.txt", tmp_path / "est",
                       **{"sampling.mu": "8", "bootstrap.m": "4",
                          "bootstrap.p": "10", "run.mode": "quantum",
                          "estimation.steady_time_s": "99.0"})
    times = np.arange(17) * 6.0 + 3.0
    paths = []
    for i in range(3):
        values = 0.10 - 0.04 * (1.0 - np.exp(-0.05 * times))
        ds = ExperimentDataset(times=times,
                               samples=[np.full(8, v) for v in values],
                               nu=150)
        path = tmp_path / f"flat_{i}.csv"
        write_dataset_csv(str(path), ds)
        paths.append(str(path))
    rc = cli.main(["estimate", "--config", str(cfg)] + paths)
    assert rc == 4
    assert "estimation failed" in capsys.readouterr().err


def test_compare_classical_probe_near_unit_enhancement(tmp_path):
    cfg = write_config(tmp_path / "cfg.txt", tmp_path / "out",
                       **{"recipe.count": "1", "sampling.mu": "2000",
                          "signal.probe": "classical"})
    assert cli.main(["simulate", "--config", str(cfg)]) == 0
    rc = cli.main(["compare", "--config", str(cfg),
                   "--out", str(tmp_path / "cmp"),
                   str(tmp_path / "out" / "dataset_0.csv")])
    assert rc == 0
    table = np.genfromtxt(tmp_path / "cmp" / "compare_0.csv",
                          delimiter=",", skip_header=1)
    assert table.shape == (17, 5)
    enhancement = table[:, 4]
    assert np.all(np.abs(enhancement - 1.0) < 0.08)
    assert abs(enhancement.mean() - 1.0) < 0.02


def test_compare_quantum_probe_matches_binomial_noise(tmp_path):
    cfg = write_config(tmp_path / "cfg.txt", tmp_path / "out",
                       **{"recipe.count": "1", "sampling.mu": "2000"})
    assert cli.main(["simulate", "--config", str(cfg)]) == 0
    rc = cli.main(["compare", "--config", str(cfg),
                   "--out", str(tmp_path / "cmp"),
                   str(tmp_path / "out" / "dataset_0.csv")])
    assert rc == 0
    table = np.genfromtxt(tmp_path / "cmp" / "compare_0.csv",
                          delimiter=",", skip_header=1)
    measured, theory_q, theory_c = table[:, 1], table[:, 2], table[:, 3]
    rel = measured / theory_q - 1.0
    assert np.sqrt(np.mean(rel**2)) < 0.05
    assert np.all(theory_c > theory_q)
    assert np.all(table[:, 4] > 1.0)


def test_ingest_round_trips_simulated_timetags(tmp_path):
    cfg = write_config(tmp_path / "cfg.txt", tmp_path / "out",
                       **{"recipe.count": "1", "signal.duration_s": "12.0",
                          "timetag.enabled": "true",
                          "timetag.herald_rate_hz": "5000"})
    assert cli.main(["simulate", "--config", str(cfg)]) == 0
    tags = tmp_path / "out" / "timetags_0.csv"
    assert tags.exists()
    rc = cli.main(["ingest-timetags", "--config", str(cfg),
                   "--out", str(tmp_path / "ing"), str(tags)])
    assert rc == 0
    assert read_bytes(tmp_path / "out" / "dataset_0.csv") \
        == read_bytes(tmp_path / "ing" / "dataset_ingested.csv")


def test_ingest_missing_file_is_data_error(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.txt", tmp_path / "out",
                       **{"recipe.count": "1"})
    rc = cli.main(["ingest-timetags", "--config", str(cfg),
                   str(tmp_path / "missing.csv")])
    assert rc == 3
    assert "data error" in capsys.readouterr().err
