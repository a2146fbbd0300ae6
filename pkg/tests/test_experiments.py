import csv
from pathlib import Path

import numpy as np
import pytest

from recode.config import parse_config
from recode.experiments import (
    SCHEMAS, derive_seed, expected_tabular_reward, quadrant_share, run_cluster_ages,
    run_disco_maze, run_removal_ablation, run_toy_density, spatial_cv, telescoped_total,
)


def cfg(text):
    return parse_config(text, schemas=SCHEMAS)


def read(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def atoms_from_csv(path):
    rows = read(path)
    pos = np.array([[float(r["x0"]), float(r["x1"])] for r in rows])
    return pos, np.array([float(r["count"]) for r in rows])


def test_helpers():
    assert telescoped_total(1.0, 5) == 5.0
    assert telescoped_total(0.5, 3) == 1.75
    assert derive_seed(1, 2) == derive_seed(1, 2) != derive_seed(1, 3)
    assert expected_tabular_reward(0, 0.01) == 100.0
    assert expected_tabular_reward(3, 0.01) == 1 / (2 + 0.01)
    pos = np.array([[1.0, 1.0], [9.0, 1.0], [1.0, 9.0]])
    assert quadrant_share(pos, np.array([2.0, 1.0, 1.0]), 5.0) == 0.5
    uniform = np.array([[x + 12.5, y + 12.5] for x in (0, 25, 50, 75) for y in (0, 25, 50, 75)])
    assert spatial_cv(uniform, None, 4, 100.0) == 0.0


def test_toy_density_files_and_conservation(tmp_path):
    c = cfg("experiment: toy-density\nseeds: [0, 1]\nrecode: {capacity: 40, k: 3}\n"
            "params: {gammas: [0.9, 1.0], horizon: 30}\n")
    res = run_toy_density(c, tmp_path)
    summary = read(tmp_path / "summary.csv")
    assert len(summary) == 4
    for row in summary:
        f = tmp_path / f"atoms_seed{row['seed']}_gamma{row['gamma']}.csv"
        pos, counts = atoms_from_csv(f)
        # recompute from the snapshot file
        assert float(row["total_count"]) == pytest.approx(counts.sum(), rel=1e-12)
        expected = telescoped_total(float(row["gamma_per_embedding"]), int(row["embeddings"]))
        assert counts.sum() == pytest.approx(expected, rel=1e-9)
        half = (1 + np.sqrt(30)) / 2
        assert float(row["bottom_left_share"]) == quadrant_share(pos, counts, half)
        assert (tmp_path / f.name.replace(".csv", ".svg")).exists()
    assert res["conserved"]


def test_removal_ablation_recomputable(tmp_path):
    c = cfg("experiment: removal-ablation\nseeds: [0]\nrecode: {capacity: 20, k: 3, gamma: 0.9999}\n"
            "params: {horizon: 150, min_wins: 1}\n")
    res = run_removal_ablation(c, tmp_path)
    assert res["all_full"]
    for row in read(tmp_path / "metrics.csv"):
        pos, counts = atoms_from_csv(tmp_path / f"atoms_seed0_{row['strategy']}.csv")
        assert len(pos) == 20 == int(row["atoms"])
        assert float(row["count_cv"]) == spatial_cv(pos, counts, 4, 100.0)
        assert float(row["center_cv"]) == spatial_cv(pos, None, 4, 100.0)


def test_disco_maze_small(tmp_path):
    c = cfg("experiment: disco-maze\nseeds: [0]\nrecode: {capacity: 32}\nenv: {size: 7, max_steps: 100}\n"
            "agent: {q_init: 10.0}\nparams: {step_budget: 3000, min_full_wins: 0}\n")
    res = run_disco_maze(c, tmp_path)
    summary = read(tmp_path / "summary.csv")
    assert {r["arm"] for r in summary} == {"position", "full", "optimism_only", "random"}
    for r in summary:
        assert int(r["steps"]) == 3000
        eps = read(tmp_path / f"episodes_seed0_{r['arm']}.csv")
        assert sum(int(e["length"]) for e in eps) == 3000 and len(eps) == int(r["episodes"])
    cov = read(tmp_path / "coverage_seed0.csv")
    for arm in ("position", "random"):
        series = [int(x["unique_states"]) for x in cov if x["arm"] == arm]
        assert series == sorted(series)
        assert series[-1] == res["results"][(0, arm)]["coverage"]
    assert (tmp_path / "atoms_seed0_position.svg").exists()


def test_cluster_ages_contract(tmp_path):
    c = cfg("experiment: cluster-ages\nseeds: [0]\nrecode: {capacity: 16}\nenv: {size: 7, max_steps: 100}\n"
            "agent: {q_init: 10.0}\nparams: {episodes: 200, bin_width: 100}\n")
    res = run_cluster_ages(c, tmp_path)
    ages = [int(r["age"]) for r in read(tmp_path / "ages_seed0.csv")]
    summary = read(tmp_path / "summary.csv")[0]
    assert all(0 <= a <= int(summary["memory_steps"]) for a in ages)
    hist = read(tmp_path / "histogram.csv")
    assert sum(int(h["atoms"]) for h in hist) == int(summary["atoms"]) == len(ages)
    assert all(int(h["episode_cap"]) == 100 for h in hist)
    assert float(summary["median_age"]) == res["medians"][0] == float(np.median(ages))


def test_unknown_params_rejected():
    c = cfg("experiment: toy-density\n")
    c.params = {"bogus": 1}
    with pytest.raises(ValueError):
        run_toy_density(c)
