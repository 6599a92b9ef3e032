import json
from pathlib import Path

import pytest
import yaml

from percdrift.cli import main
from percdrift.errors import ConfigError
from percdrift.experiments import (
    ExperimentConfig,
    RunManifest,
    load_config,
    run,
    run_id_for,
    validate_config,
)


def _write_cfg(tmp_path, name="cfg.yaml", **overrides):
    cfg = {
        "experiment": "sample-bk",
        "env": {"d": 2, "p": 0.7, "seed": 11},
        "bias": {"lambda": 0.8, "direction": [1.0, 0.0]},
        "replicas": 200,
        "params": {"n_max": 10},
        "output": str(tmp_path / "out"),
    }
    cfg.update(overrides)
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return path


def test_validate_ok(tmp_path, capsys):
    path = _write_cfg(tmp_path)
    assert main(["validate", str(path)]) == 0
    assert "ok" in capsys.readouterr().out


def test_validate_zero_replicas(tmp_path, capsys):
    path = _write_cfg(tmp_path, replicas=0)
    assert main(["validate", str(path)]) == 1
    assert "replicas" in capsys.readouterr().out


def test_validate_dual_xi_needs_d2(tmp_path, capsys):
    path = _write_cfg(tmp_path, experiment="dual-xi",
                      env={"d": 3, "p": 0.7, "seed": 1},
                      bias={"lambda": 0.8, "direction": [1.0, 0.0, 0.0]},
                      params={"n_grid": [1, 2, 3]})
    assert main(["validate", str(path)]) == 1
    assert "dual lattice requires d=2" in capsys.readouterr().out


def test_validate_alpha_warning(tmp_path, capsys):
    path = _write_cfg(tmp_path, experiment="exit-stats",
                      params={"alpha": 0.8, "L_grid": [4, 6]})
    assert main(["validate", str(path)]) == 0
    out = capsys.readouterr().out
    assert "warning" in out and "alpha" in out and "d+3" in out


def test_validate_subcritical_warning(tmp_path, capsys):
    path = _write_cfg(tmp_path, env={"d": 2, "p": 0.4, "seed": 1})
    assert main(["validate", str(path)]) == 0
    assert "subcritical primal" in capsys.readouterr().out


def test_run_writes_outputs_and_manifest(tmp_path):
    path = _write_cfg(tmp_path, replicas=100)
    assert main(["run", str(path), "--workers", "1"]) == 0
    outdir = tmp_path / "out"
    report = json.loads((outdir / "report.json").read_text())
    assert report["experiment"] == "sample-bk"
    manifest = RunManifest.load(outdir / "manifest.json")
    assert len(manifest.replica_seeds) == 100
    listed = set(manifest.outputs)
    for f in listed:
        assert (outdir / f).exists()
    assert "samples.csv" in listed and "report.json" in listed
    # sample rows appear in replica order
    lines = (outdir / "samples.csv").read_text().splitlines()
    ids = [int(l.split(",")[0]) for l in lines[1:]]
    assert ids == sorted(ids)


def test_manifest_roundtrips_config(tmp_path):
    path = _write_cfg(tmp_path, replicas=50)
    cfg = load_config(path)
    manifest = run(cfg, workers=1)
    reloaded = RunManifest.load(Path(cfg.output) / "manifest.json")
    cfg2 = ExperimentConfig(**{k: v for k, v in reloaded.config.items()})
    assert cfg2.to_dict() == cfg.to_dict()
    assert run_id_for(cfg2) == manifest.run_id


def test_run_identical_configs_identical_bytes(tmp_path):
    p1 = _write_cfg(tmp_path, name="a.yaml", replicas=150,
                    output=str(tmp_path / "o1"))
    p2 = _write_cfg(tmp_path, name="b.yaml", replicas=150,
                    output=str(tmp_path / "o2"))
    m1 = run(load_config(p1), workers=1)
    m2 = run(load_config(p2), workers=2)
    assert m1.run_id == m2.run_id      # output dir does not enter the id
    a = (tmp_path / "o1" / "samples.csv").read_bytes()
    b = (tmp_path / "o2" / "samples.csv").read_bytes()
    assert a == b
    ra = json.loads((tmp_path / "o1" / "report.json").read_text())
    rb = json.loads((tmp_path / "o2" / "report.json").read_text())
    ra["config"].pop("output"); rb["config"].pop("output")
    assert ra == rb


def test_seed_override_changes_run(tmp_path):
    path = _write_cfg(tmp_path, replicas=60, output=str(tmp_path / "s1"))
    assert main(["run", str(path), "--workers", "1"]) == 0
    path2 = _write_cfg(tmp_path, name="c2.yaml", replicas=60,
                       output=str(tmp_path / "s2"))
    assert main(["run", str(path2), "--workers", "1", "--seed", "999"]) == 0
    a = (tmp_path / "s1" / "samples.csv").read_bytes()
    b = (tmp_path / "s2" / "samples.csv").read_bytes()
    assert a != b


def test_overlay_file_in_config(tmp_path):
    (tmp_path / "patch.txt").write_text("0 0 1 0\n0 0 2 0\n")
    path = _write_cfg(tmp_path, env={"d": 2, "p": 0.7, "seed": 3,
                                     "overlay_file": "patch.txt"}, replicas=20)
    cfg = load_config(path)
    assert len(cfg.env["overlays"]) == 2
    run(cfg, workers=1)


def test_run_rejects_invalid(tmp_path):
    path = _write_cfg(tmp_path, replicas=0)
    with pytest.raises(ConfigError):
        run(load_config(path), workers=1)


def test_missing_key_reported(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text(yaml.safe_dump({"env": {"d": 2}}))
    assert main(["validate", str(path)]) == 2
