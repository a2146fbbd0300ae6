import csv
import json
from pathlib import Path

import pytest

from recode.cli import main
from recode.config import ConfigError, load_config, parse_config
from recode.experiments import SCHEMAS

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.stem)
def test_shipped_configs_parse(path):
    cfg = load_config(path, SCHEMAS)
    assert cfg.experiment == path.stem
    assert len(cfg.digest()) == 64


def test_unknown_keys_rejected_with_line():
    text = "experiment: toy-density\nrecode:\n  capacity: 10\n  kapa: 0.1\n"
    with pytest.raises(ConfigError, match=r"line 4: unknown key recode.kapa"):
        parse_config(text, schemas=SCHEMAS)
    with pytest.raises(ConfigError, match=r"line 2: unknown key 'extra'"):
        parse_config("experiment: grad-check\nextra: 1\n", schemas=SCHEMAS)
    with pytest.raises(ConfigError, match=r"line 3: unknown key params.budget"):
        parse_config("experiment: disco-maze\nparams:\n  budget: 3\n", schemas=SCHEMAS)


def test_invalid_values_and_yaml():
    with pytest.raises(ConfigError, match="line 2: invalid recode"):
        parse_config("experiment: toy-density\nrecode: {gamma: 2.0}\n")
    with pytest.raises(ConfigError, match="malformed YAML"):
        parse_config("experiment: [toy\n")
    with pytest.raises(ConfigError, match="unknown experiment"):
        parse_config("experiment: nope\n")
    with pytest.raises(ConfigError, match="seeds"):
        parse_config("experiment: grad-check\nseeds: [-1]\n")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config("experiment: grad-check\nseeds: [1]\nseeds: [2]\n")


def test_digest_tracks_content():
    a = parse_config("experiment: grad-check\nseeds: [0]\n")
    b = parse_config("experiment: grad-check\nseeds: [1]\n")
    assert a.digest() != b.digest() and a.digest() == parse_config("experiment: grad-check\nseeds: [0]\n").digest()


def test_cli_run_writes_outputs_and_manifest(tmp_path, capsys):
    out = tmp_path / "o"
    rc = main(["tabular-oracle", "--config", str(CONFIGS / "tabular-oracle.yaml"), "--seed", "3", "--out", str(out)])
    assert rc == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["seeds"] == [3] and man["passed"] and len(man["config_sha256"]) == 64 and man["version"]
    rows = list(csv.reader(open(out / "summary.csv")))
    assert rows[0] == ["seed", "steps", "states_visited", "atoms", "mismatches"]
    assert rows[1] == ["3", "10000", "25", "25", "0"]


def test_cli_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("experiment: grad-check\nparams:\n  nope: 1\n")
    assert main(["grad-check", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "line 3" in capsys.readouterr().err
    assert main(["toy-density", "--config", str(CONFIGS / "grad-check.yaml"), "--out", str(tmp_path)]) == 2
    assert main(["grad-check", "--config", str(tmp_path / "missing.yaml")]) == 2


def test_cli_tabular_oracle_reports_divergence(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    # k = 1, tau = 1: a revisit sets the bandwidth to zero, so the next soft count is empty
    cfg.write_text("experiment: tabular-oracle\nrecode: {capacity: 25, gamma: 1.0, k: 1, tau: 1.0}\n"
                   "params: {steps: 200}\n")
    assert main(["tabular-oracle", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "first divergence" in capsys.readouterr().err
