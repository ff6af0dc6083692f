import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from liouvillian_eth import pipeline, runner
from liouvillian_eth.cli import main
from liouvillian_eth.config import ConfigError, load_config, parse_config
from liouvillian_eth.linalg import EigensolverError
from liouvillian_eth.runner import read_csv, run

PRESETS = Path(__file__).resolve().parents[1] / "presets"

GINIBRE = {"model": {"name": "ginibre_reference", "D": [60, 80]}, "n_realizations": [2, 1], "master_seed": 3,
           "analysis": [{"kind": "spectrum_stats"}, {"kind": "stripe_sweep", "n_grid": 8}]}

RANDOM_L = {"model": {"name": "random_liouvillian", "D": [4, 6], "r": 2, "beta": 2, "g_eff": 1.05},
            "n_realizations": 2, "master_seed": 1,
            "analysis": [{"kind": "eth_diag", "observable": "x_qubit", "omega_cutoff": 10,
                          "superoperators": ["coherent", "measurement"], "min_members": 2}]}

CHAIN = {"model": {"name": "xxz_chain", "N": [3], "J": 1, "gamma1_plus": 0.5, "gamma1_minus": 1.2,
                   "gammaN_plus": 1, "gammaN_minus": 0.8, "gamma_z": 1,
                   "variants": {"integrable": {"delta": 0, "h": 0}, "chaotic": {"delta": 0.8, "h": 1}}},
         "n_realizations": 1, "master_seed": 0,
         "analysis": [{"kind": "stripe_sweep", "n_grid": 8},
                      {"kind": "dynamics", "observable": "current", "initial_state": "all_up",
                       "time_grid": {"start": 0, "stop": 4, "num": 41}, "min_members": 2}]}


def _write(tmp_path, raw, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw))
    return path


@pytest.mark.parametrize("preset", sorted(p.name for p in PRESETS.glob("*.yaml")))
def test_presets_validate(preset, capsys):
    assert main(["validate", str(PRESETS / preset)]) == 0
    assert capsys.readouterr().out.startswith("ok:")


def test_validate_reports_location(tmp_path, capsys):
    raw = dict(GINIBRE, analysis=[{"kind": "stripe_sweep", "n_grid": -3}])
    assert main(["validate", str(_write(tmp_path, raw))]) == 2
    assert "analysis[0].n_grid" in capsys.readouterr().err


@pytest.mark.parametrize("mutate,location", [
    (lambda r: r["model"].update(name="unknown"), "model.name"),
    (lambda r: r["model"].pop("D"), "model.D"),
    (lambda r: r.update(n_realizations=[1, 2, 3]), "n_realizations"),
    (lambda r: r.update(extra=1), "<root>"),
    (lambda r: r["analysis"].append({"kind": "nope"}), "analysis[2].kind"),
])
def test_schema_errors(mutate, location):
    raw = json.loads(json.dumps(GINIBRE))
    mutate(raw)
    with pytest.raises(ConfigError) as err:
        parse_config(raw)
    assert err.value.location == location


def test_yaml_syntax_error_has_line(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("model:\n  name: [unclosed\n")
    with pytest.raises(ConfigError) as err:
        load_config(path)
    assert "line" in str(err.value)


def test_run_missing_file_exit_code(tmp_path):
    assert main(["run", str(tmp_path / "absent.yaml")]) == 2
    assert main(["run", str(_write(tmp_path, GINIBRE)), "--workers", "0"]) == 2


def test_empty_analysis_writes_manifest_only(tmp_path):
    raw = dict(GINIBRE, analysis=[])
    out = tmp_path / "run"
    assert main(["run", str(_write(tmp_path, raw)), "--output", str(out), "--workers", "1"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "complete"
    assert manifest["analyses"] == {}
    assert manifest["seeds"]["60"] == [[3, 0], [3, 1]]
    assert not (out / "cache").exists()


def test_ginibre_run_and_exports(tmp_path):
    out = tmp_path / "run"
    assert main(["run", str(_write(tmp_path, GINIBRE)), "--output", str(out), "--workers", "1"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["analyses"]["spectrum_stats"]["status"] == "complete"
    assert len(read_csv(out / "eigenvalues.csv")) == 60 * 2 + 80
    assert main(["export", str(out), "fig4c"]) == 0
    rows = read_csv(out / "figures" / "fig4c.csv")
    assert list(rows[0]) == ["d", "mean_r", "size"]
    assert {r["size"] for r in rows} == {"60", "80"}
    assert (out / "figures" / "fig4c.svg").exists()
    assert main(["export", str(out), "fig4ab"]) == 0
    # no ETH analysis in this run
    assert main(["export", str(out), "fig1a"]) == 2


def test_eth_run_and_fig1_exports(tmp_path):
    out = tmp_path / "run"
    manifest = run(parse_config(RANDOM_L), output=out, workers=1)
    summary = manifest["analyses"]["eth_diag"]
    assert set(summary["summary"]["_"]) == {"coherent", "measurement"}
    assert main(["export", str(out), "fig1a"]) == 0
    rows = read_csv(out / "figures" / "fig1a.csv")
    assert list(rows[0]) == ["omega", "value", "size_label"]
    assert all(abs(float(r["omega"])) < 10 for r in rows)
    assert main(["export", str(out), "fig1a_inset"]) == 0


def test_chain_dynamics_export(tmp_path):
    out = tmp_path / "run"
    run(parse_config(CHAIN), output=out, workers=1)
    assert main(["export", str(out), "fig3b"]) == 0
    rows = read_csv(out / "figures" / "fig3b.csv")
    assert list(rows[0]) == ["t", "integrable_value", "chaotic_value"]
    assert len(rows) == 41
    assert main(["export", str(out), "fig3a"]) == 0
    assert main(["export", str(out), "fig7c"]) == 2


def test_all_realizations_failing_exit_code(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise EigensolverError("forced")

    monkeypatch.setattr(pipeline, "eig_nonhermitian", boom)
    out = tmp_path / "run"
    assert main(["run", str(_write(tmp_path, RANDOM_L)), "--output", str(out), "--workers", "1"]) == 1
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "failed"
    assert manifest["realizations"]["4"]["failed"] == 2


def test_crashing_analysis_marks_manifest(tmp_path, monkeypatch):
    def crash(*args):
        raise RuntimeError("interrupted")

    monkeypatch.setitem(runner._HANDLERS, "stripe_sweep", crash)
    out = tmp_path / "run"
    with pytest.raises(RuntimeError):
        run(parse_config(GINIBRE), output=out, workers=1)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "failed"
    assert manifest["analyses"]["spectrum_stats"]["status"] == "complete"
    assert manifest["analyses"]["stripe_sweep"]["status"] == "failed"
    assert "interrupted" in manifest["analyses"]["stripe_sweep"]["error"]


def test_worker_count_does_not_change_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run(parse_config(RANDOM_L), output=a, workers=1)
    run(parse_config(RANDOM_L), output=b, workers=2)
    for name in ("eigenvalues.csv", "eth_diag_scatter.csv", "eth_variance.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_seed_override_and_keep_cache(tmp_path):
    out = tmp_path / "run"
    manifest = run(parse_config(RANDOM_L), output=out, workers=1, seed=11, keep_cache=True)
    assert manifest["master_seed"] == 11
    assert any((out / "cache").iterdir())
    other = run(parse_config(RANDOM_L), output=tmp_path / "other", workers=1)
    ev_a = np.array([float(r["re"]) for r in read_csv(out / "eigenvalues.csv")])
    ev_b = np.array([float(r["re"]) for r in read_csv(tmp_path / "other" / "eigenvalues.csv")])
    assert other["master_seed"] == 1
    assert not np.array_equal(ev_a, ev_b)
