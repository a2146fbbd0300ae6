"""The seven harness experiments.

Each ``run_*`` function takes an :class:`ExperimentConfig`, writes its CSVs
(and SVGs) into ``out`` when given, and returns an in-process result dict
whose ``passed`` entry is the experiment's own verdict. Every random stream is
derived from the run seed through :func:`derive_seed`, so a rerun with the
same config and seeds reproduces every CSV byte for byte.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from collections import Counter
from pathlib import Path

import numpy as np

from recode import svg
from recode.agent import (
    AgentConfig,
    EPISODE_CSV_HEADER,
    run_agent,
    run_random_baseline,
    write_episode_csv,
)
from recode.config import ExperimentConfig
from recode.embeddings import (
    APModel,
    Identity,
    RandomProjection,
    TransitionBatch,
    ap_gradients,
    ap_grad_check,
)
from recode.envs import (
    MOVES,
    Cause,
    DiscoMaze,
    DiscoMazeConfig,
    GridWorld,
    RenderMode,
    SquareKind,
    StreamSchedule,
    expanding_square_batch,
)
from recode.memory import RecodeConfig, RecodeMemory, RemovalStrategy
from recode.normalizer import RewardNormalizer
from recode.service import MemoryService, SchedulingMode, round_robin_order, spawn_actors

# stream tags for derive_seed
STREAM, MEMORY, AGENT, MAZE, ACTOR, PROBE = range(1, 7)


def derive_seed(seed: int, tag: int, *extra: int) -> int:
    return int(np.random.SeedSequence([seed, tag, *extra]).generate_state(1, np.uint64)[0])


def telescoped_total(gamma: float, m: int) -> float:
    """sum_{i=1..m} gamma^(m-i), accumulated the way the memory accumulates it."""
    s = 0.0
    for _ in range(m):
        s = gamma * s + 1.0
    return s


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _cell(v):
    # repr keeps doubles exact; numpy scalars are unwrapped first
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _fmt(x: float) -> str:
    return repr(float(x))


def _memory_rows(mem: RecodeMemory):
    for l in range(mem.size):
        yield [l, *map(float, mem.positions[l]), float(mem.counts[l]), int(mem.born[l])]


def _memory_header(dim: int):
    return ["atom", *[f"x{i}" for i in range(dim)], "count", "born"]


def _check_keys(section: dict, allowed: dict, name: str) -> dict:
    extra = set(section) - set(allowed)
    if extra:
        raise ValueError(f"unknown {name} keys: {sorted(extra)}")
    return {**allowed, **section}


# ---------------------------------------------------------------------------
# toy-density: expanding square with side 1 + sqrt(t), discount sweep
# ---------------------------------------------------------------------------

TOY_DENSITY_PARAMS = dict(gammas=[0.9, 0.99, 1.0], horizon=100, batch_size=64, gamma_per="step")


def quadrant_share(positions: np.ndarray, counts: np.ndarray, half: float) -> float:
    """Share of total count held by atoms with both coordinates below ``half``."""
    total = counts.sum()
    if total <= 0:
        return 0.0
    mask = (positions[:, 0] < half) & (positions[:, 1] < half)
    return float(counts[mask].sum() / total)


def run_toy_density(cfg: ExperimentConfig, out: Path | None = None) -> dict:
    p = _check_keys(cfg.params, TOY_DENSITY_PARAMS, "params")
    if p["gamma_per"] not in ("step", "embedding"):
        raise ValueError("gamma_per must be 'step' or 'embedding'")
    sched = StreamSchedule(SquareKind.SQRT, p["batch_size"], p["horizon"])
    half = sched.side(p["horizon"]) / 2
    rows, shares = [], {}
    for seed in cfg.seeds:
        for g in p["gammas"]:
            g_emb = g ** (1.0 / sched.batch_size) if p["gamma_per"] == "step" else g
            mem = RecodeMemory(2, dataclasses.replace(cfg.recode, gamma=g_emb,
                                                      seed=derive_seed(seed, MEMORY)))
            rng = np.random.default_rng(derive_seed(seed, STREAM))
            for t in range(p["horizon"] + 1):
                mem.process_batch(expanding_square_batch(t, sched, rng))
            share = quadrant_share(mem.atoms, mem.atom_counts, half)
            shares[(seed, g)] = share
            expected = telescoped_total(g_emb, mem.steps_processed)
            rows.append([seed, float(g), float(g_emb), mem.size, mem.steps_processed,
                         mem.total_count(), expected, share])
            if out is not None:
                _write_csv(out / f"atoms_seed{seed}_gamma{g}.csv", _memory_header(2), _memory_rows(mem))
                svg.scatter(out / f"atoms_seed{seed}_gamma{g}.svg", mem.atoms[:, 0], mem.atoms[:, 1],
                            mem.atom_counts, title=f"seed {seed}, gamma {g}",
                            xlim=(0, 2 * half), ylim=(0, 2 * half))
    if out is not None:
        _write_csv(out / "summary.csv", ["seed", "gamma", "gamma_per_embedding", "atoms", "embeddings",
                                         "total_count", "expected_total", "bottom_left_share"], rows)
    lo, hi = min(p["gammas"]), max(p["gammas"])
    wins = [shares[(s, hi)] > shares[(s, lo)] for s in cfg.seeds]
    conserved = all(abs(r[5] - r[6]) <= 1e-6 * r[6] for r in rows)
    return {"shares": shares, "wins": wins, "conserved": conserved,
            "passed": all(wins) and conserved, "rows": rows}


# ---------------------------------------------------------------------------
# removal-ablation: side min(100, t), compare removal strategies
# ---------------------------------------------------------------------------

REMOVAL_PARAMS = dict(
    horizon=2100,
    batch_size=64,
    bins=4,
    extent=100.0,
    strategies=[s.value for s in RemovalStrategy],
    min_wins=4,
)


def spatial_cv(positions: np.ndarray, weights: np.ndarray | None, bins: int, extent: float) -> float:
    """Coefficient of variation (population std / mean) over a bins x bins grid."""
    hist, _, _ = np.histogram2d(positions[:, 0], positions[:, 1], bins=bins,
                                range=[[0, extent], [0, extent]], weights=weights)
    m = hist.mean()
    return float(hist.std() / m) if m > 0 else math.inf


def run_removal_ablation(cfg: ExperimentConfig, out: Path | None = None) -> dict:
    p = _check_keys(cfg.params, REMOVAL_PARAMS, "params")
    sched = StreamSchedule(SquareKind.CAPPED, p["batch_size"], p["horizon"])
    strategies = [RemovalStrategy(s) for s in p["strategies"]]
    rows, metrics, full = [], {}, True
    for seed in cfg.seeds:
        for strat in strategies:
            mem = RecodeMemory(2, dataclasses.replace(cfg.recode, removal=strat,
                                                      seed=derive_seed(seed, MEMORY)))
            rng = np.random.default_rng(derive_seed(seed, STREAM))
            for t in range(p["horizon"] + 1):
                mem.process_batch(expanding_square_batch(t, sched, rng))
            count_cv = spatial_cv(mem.atoms, mem.atom_counts, p["bins"], p["extent"])
            center_cv = spatial_cv(mem.atoms, None, p["bins"], p["extent"])
            metrics[(seed, strat)] = (count_cv, center_cv)
            full &= mem.is_full
            rows.append([seed, strat.value, mem.size, mem.total_count(), count_cv, center_cv])
            if out is not None:
                _write_csv(out / f"atoms_seed{seed}_{strat.value}.csv", _memory_header(2),
                           _memory_rows(mem))
                svg.scatter(out / f"atoms_seed{seed}_{strat.value}.svg", mem.atoms[:, 0],
                            mem.atoms[:, 1], mem.atom_counts, title=f"seed {seed}, {strat.value}",
                            xlim=(0, p["extent"]), ylim=(0, p["extent"]))
    if out is not None:
        _write_csv(out / "metrics.csv", ["seed", "strategy", "atoms", "total_count", "count_cv",
                                         "center_cv"], rows)
    sq, mn = RemovalStrategy.INVERSE_COUNT_SQUARED, RemovalStrategy.MIN_COUNT
    wins = [metrics[(s, sq)][0] < metrics[(s, mn)][0] for s in cfg.seeds] \
        if sq in strategies and mn in strategies else []
    return {"metrics": metrics, "wins": wins, "all_full": full,
            "passed": bool(wins) and sum(wins) >= p["min_wins"] and full, "rows": rows}


# ---------------------------------------------------------------------------
# disco-maze: RECODE agents vs random walk
# ---------------------------------------------------------------------------

MAZE_ENV = dict(size=11, num_colors=5, max_steps=500)
MAZE_PARAMS = dict(step_budget=60_000, arms=["position", "full", "optimism_only", "random"],
                   full_projection_dim=0, min_full_wins=4)
ARMS = ("position", "full", "optimism_only", "random")


def _maze(env: dict, seed: int, mode) -> DiscoMaze:
    return DiscoMaze(DiscoMazeConfig(env["size"], env["num_colors"], env["max_steps"],
                                     seed=derive_seed(seed, MAZE)), mode)


def _arm_embed(arm: str, env: DiscoMaze, p: dict, seed: int):
    if arm == "full" and p["full_projection_dim"]:
        return RandomProjection(env.obs_dim, p["full_projection_dim"], derive_seed(seed, MAZE, 1))
    return Identity(env.obs_dim)


class _Tracker:
    """Coverage and goal bookkeeping fed by ``run_agent``'s episode callback."""

    def __init__(self, start_state: int):
        self.seen = {start_state}
        self.series = []  # (cumulative steps, coverage)
        self.goals = 0
        self.first_goal = None

    def __call__(self, ep, rec, steps):
        self.seen |= rec.states
        self.series.append((steps, len(self.seen)))
        if rec.cause is Cause.GOAL:
            self.goals += 1
            if self.first_goal is None:
                self.first_goal = steps


def run_maze_arm(arm: str, cfg: ExperimentConfig, seed: int, env_cfg: dict, p: dict) -> dict:
    mode = RenderMode.FULL if arm == "full" else RenderMode.POSITION
    env = _maze(env_cfg, seed, mode)
    env.reset()
    track = _Tracker(env.state_index())
    budget = p["step_budget"]
    agent_seed = derive_seed(seed, AGENT)
    big = 1 << 62  # episodes are bounded by the step budget instead
    memory = None
    if arm == "random":
        res = run_random_baseline(env, big, agent_seed, budget)
        records = res["records"]
        steps = 0
        for i, rec in enumerate(records):
            steps += rec.length
            track(i, rec, steps)
    else:
        acfg = dataclasses.replace(cfg.agent, seed=agent_seed, episodes=big)
        embed = None
        if arm == "optimism_only":
            acfg = dataclasses.replace(acfg, beta_im=0.0)
        else:
            embed = _arm_embed(arm, env, p, seed)
            memory = RecodeMemory(embed.dim, dataclasses.replace(cfg.recode,
                                                                 seed=derive_seed(seed, MEMORY)))
        records, _ = run_agent(env, embed or (lambda o: o), memory, RewardNormalizer(), acfg,
                               step_budget=budget, on_episode=track)
    return {"arm": arm, "env": env, "records": records, "tracker": track, "memory": memory,
            "steps": sum(r.length for r in records)}


def run_disco_maze(cfg: ExperimentConfig, out: Path | None = None) -> dict:
    env_cfg = _check_keys(cfg.env, MAZE_ENV, "env")
    p = _check_keys(cfg.params, MAZE_PARAMS, "params")
    for a in p["arms"]:
        if a not in ARMS:
            raise ValueError(f"unknown arm {a!r}")
    summary, results = [], {}
    for seed in cfg.seeds:
        series = {}
        for arm in p["arms"]:
            r = run_maze_arm(arm, cfg, seed, env_cfg, p)
            t = r["tracker"]
            results[(seed, arm)] = {"coverage": len(t.seen), "goals": t.goals,
                                    "first_goal": t.first_goal, "steps": r["steps"]}
            summary.append([seed, arm, r["steps"], len(r["records"]), len(t.seen), t.goals,
                            -1 if t.first_goal is None else t.first_goal])
            series[arm] = t.series
            if out is None:
                continue
            write_episode_csv(out / f"episodes_seed{seed}_{arm}.csv", r["records"])
            mem = r["memory"]
            if mem is not None and arm == "position":
                weights = mem.atom_counts @ mem.atoms
                svg.maze_overlay(out / f"atoms_seed{seed}_{arm}.svg", r["env"].layout, r["env"].start,
                                 r["env"].goal, weights, title=f"atom mass, seed {seed}")
        if out is not None:
            _write_csv(out / f"coverage_seed{seed}.csv", ["arm", "steps", "unique_states"],
                       [[arm, s, c] for arm, pts in series.items() for s, c in pts])
            svg.lines(out / f"coverage_seed{seed}.svg",
                      {a: ([s for s, _ in pts], [c for _, c in pts]) for a, pts in series.items()},
                      title=f"coverage, seed {seed}", xlabel="env steps", ylabel="unique cells")
    if out is not None:
        _write_csv(out / "summary.csv", ["seed", "arm", "steps", "episodes", "unique_states", "goals",
                                         "first_goal_step"], summary)
    verdict = maze_verdict(results, cfg.seeds, p)
    return {"results": results, **verdict, "rows": summary}


def maze_verdict(results: dict, seeds, p: dict) -> dict:
    def cov(s, a):
        return results[(s, a)]["coverage"]

    goal_every = all(results[(s, "position")]["goals"] > 0 for s in seeds)
    beats_random = all(cov(s, "position") > cov(s, "random") for s in seeds)
    full_wins = sum(cov(s, "full") <= cov(s, "position") for s in seeds) \
        if "full" in p["arms"] else 0
    return {"goal_every_seed": goal_every, "beats_random": beats_random, "full_wins": full_wins,
            "passed": goal_every and beats_random and full_wins >= p["min_full_wins"]}


# ---------------------------------------------------------------------------
# cluster-ages
# ---------------------------------------------------------------------------

AGES_PARAMS = dict(episodes=100, bin_width=500)


def run_cluster_ages(cfg: ExperimentConfig, out: Path | None = None) -> dict:
    env_cfg = _check_keys(cfg.env, MAZE_ENV, "env")
    p = _check_keys(cfg.params, AGES_PARAMS, "params")
    cap = env_cfg["max_steps"]
    rows, hist_rows, medians = [], [], {}
    for seed in cfg.seeds:
        env = _maze(env_cfg, seed, RenderMode.POSITION)
        embed = Identity(env.obs_dim)
        mem = RecodeMemory(embed.dim, dataclasses.replace(cfg.recode, seed=derive_seed(seed, MEMORY)))
        acfg = dataclasses.replace(cfg.agent, seed=derive_seed(seed, AGENT), episodes=p["episodes"])
        records, _ = run_agent(env, embed, mem, RewardNormalizer(), acfg)
        ages = mem.ages()
        med = float(np.median(ages))
        medians[seed] = med
        top = max(int(ages.max()), cap) + 1
        edges = np.arange(0, top + p["bin_width"], p["bin_width"])
        counts, _ = np.histogram(ages, bins=edges)
        for lo, hi, n in zip(edges[:-1], edges[1:], counts):
            hist_rows.append([seed, int(lo), int(hi), int(n), cap])
        rows.append([seed, len(records), mem.steps_processed, mem.size, med,
                     float(np.mean(ages > cap)), cap])
        if out is not None:
            _write_csv(out / f"ages_seed{seed}.csv", ["atom", "age", "count"],
                       [[l, int(a), float(c)] for l, (a, c) in enumerate(zip(ages, mem.atom_counts))])
            svg.bars(out / f"ages_seed{seed}.svg", edges, counts, title=f"atom ages, seed {seed}",
                     xlabel="age (memory steps)", ylabel="atoms", marker=cap)
    if out is not None:
        _write_csv(out / "histogram.csv", ["seed", "bin_lo", "bin_hi", "atoms", "episode_cap"], hist_rows)
        _write_csv(out / "summary.csv", ["seed", "episodes", "memory_steps", "atoms", "median_age",
                                         "frac_older_than_cap", "episode_cap"], rows)
    return {"medians": medians, "passed": all(m > cap for m in medians.values()), "rows": rows}


# ---------------------------------------------------------------------------
# tabular-oracle
# ---------------------------------------------------------------------------

ORACLE_ENV = dict(size=5, start=None)
ORACLE_PARAMS = dict(steps=10_000)


def expected_tabular_reward(prior_visits: int, n0: float) -> float:
    """Reward at a one-hot state seen ``prior_visits`` times before.

    First visits have an empty soft count. Later visits see exactly one atom
    inside the kernel radius, the state's own, at distance zero, so the soft
    count is 1 + its count, i.e. the visit count including the current one.
    """
    count = 0 if prior_visits == 0 else prior_visits + 1
    return 1.0 / (math.sqrt(count) + n0)


def run_tabular_oracle(cfg: ExperimentConfig, out: Path | None = None) -> dict:
    env_cfg = _check_keys(cfg.env, ORACLE_ENV, "env")
    p = _check_keys(cfg.params, ORACLE_PARAMS, "params")
    size = env_cfg["size"]
    start = tuple(env_cfg["start"]) if env_cfg["start"] is not None else (size // 2, size // 2)
    if cfg.recode.gamma != 1.0 or cfg.recode.capacity < size * size:
        raise ValueError("tabular oracle needs gamma = 1 and capacity >= number of states")
    mismatches, summary = [], []
    for seed in cfg.seeds:
        env = GridWorld(size, start=start)
        mem = RecodeMemory(size * size, dataclasses.replace(cfg.recode, seed=derive_seed(seed, MEMORY)))
        rng = np.random.default_rng(derive_seed(seed, AGENT))
        visits = Counter()
        obs = env.reset()
        n_bad = 0
        for t in range(p["steps"] + 1):
            if t > 0:
                obs = env.step(int(rng.integers(4))).observation
            s = env.state_index()
            got = mem.process(obs)
            want = expected_tabular_reward(visits[s], cfg.recode.n0)
            visits[s] += 1
            if got != want:
                n_bad += 1
                mismatches.append([seed, t, s, visits[s], _fmt(got), _fmt(want)])
        # final per-state counts: atom for state s holds its visit count
        for l in range(mem.size):
            s = int(np.argmax(mem.positions[l]))
            if mem.counts[l] != visits[s] or not np.array_equal(mem.positions[l], np.eye(size * size)[s]):
                n_bad += 1
                mismatches.append([seed, -1, s, visits[s], _fmt(mem.counts[l]), _fmt(visits[s])])
        if mem.size != len(visits):
            n_bad += 1
            mismatches.append([seed, -1, -1, len(visits), mem.size, len(visits)])
        summary.append([seed, p["steps"], len(visits), mem.size, n_bad])
    if out is not None:
        _write_csv(out / "summary.csv", ["seed", "steps", "states_visited", "atoms", "mismatches"], summary)
        _write_csv(out / "mismatches.csv", ["seed", "step", "state", "visits", "got", "expected"],
                   mismatches)
    return {"mismatches": mismatches, "passed": not mismatches, "rows": summary}


# ---------------------------------------------------------------------------
# grad-check
# ---------------------------------------------------------------------------

GRAD_ENV = dict(size=5)
GRAD_PARAMS = dict(transitions=50, num_samples=240, h=1e-5, threshold=1e-4, dim=16, hidden=64,
                   corrupt_block="cls_w1", corrupt_factor=2.0)


def gridworld_transitions(size: int, n: int, seed: int) -> TransitionBatch:
    """``n`` random non-bumping moves from the centre of an open grid."""
    rng = np.random.default_rng(seed)
    env = GridWorld(size, start=(size // 2, size // 2))
    obs = env.reset()
    triples = []
    while len(triples) < n:
        a = int(rng.integers(4))
        r, c = env.agent
        dr, dc = MOVES[a]
        if not (0 <= r + dr < size and 0 <= c + dc < size):
            continue
        nxt = env.step(a).observation
        triples.append((obs, a, nxt))
        obs = nxt
    return TransitionBatch.from_triples(triples)


def run_grad_check(cfg: ExperimentConfig, out: Path | None = None) -> dict:
    env_cfg = _check_keys(cfg.env, GRAD_ENV, "env")
    p = _check_keys(cfg.params, GRAD_PARAMS, "params")
    rows, errs, bad_errs = [], {}, {}
    for seed in cfg.seeds:
        batch = gridworld_transitions(env_cfg["size"], p["transitions"], derive_seed(seed, STREAM))
        model = APModel(env_cfg["size"] ** 2, 4, dim=p["dim"], hidden=p["hidden"],
                        seed=derive_seed(seed, MEMORY))
        err = ap_grad_check(model, batch, p["num_samples"], p["h"], seed=derive_seed(seed, PROBE))

        def corrupted(m, b):
            loss, g = ap_gradients(m, b)
            g[p["corrupt_block"]] = g[p["corrupt_block"]] * p["corrupt_factor"]
            return loss, g

        bad = ap_grad_check(model, batch, p["num_samples"], p["h"], seed=derive_seed(seed, PROBE),
                            grad_fn=corrupted)
        errs[seed], bad_errs[seed] = err, bad
        rows.append([seed, err, bad, p["threshold"], err < p["threshold"], bad >= p["threshold"]])
    if out is not None:
        _write_csv(out / "grad_check.csv", ["seed", "max_rel_error", "corrupted_max_rel_error",
                                            "threshold", "passed", "corruption_detected"], rows)
    passed = all(r[4] and r[5] for r in rows)
    return {"errors": errs, "corrupted": bad_errs, "passed": passed, "rows": rows}


# ---------------------------------------------------------------------------
# concurrency-check
# ---------------------------------------------------------------------------

CONC_PARAMS = dict(actors=4, submissions_per_actor=10_000, dim=8, free_running_actors=8,
                   free_running_submissions=2_000, clusters=32)


def actor_stream(seed: int, actor: int, n: int, dim: int, clusters: int) -> np.ndarray:
    """Noisy draws around a fixed set of centres; regenerated identically for replay."""
    centres = np.random.default_rng(derive_seed(seed, STREAM)).standard_normal((clusters, dim)) * 4
    rng = np.random.default_rng(derive_seed(seed, ACTOR, actor))
    which = rng.integers(clusters, size=n)
    return centres[which] + 0.5 * rng.standard_normal((n, dim))


def _fresh_service(cfg: ExperimentConfig, seed: int, dim: int) -> MemoryService:
    return MemoryService(RecodeMemory(dim, dataclasses.replace(cfg.recode, seed=derive_seed(seed, MEMORY))))


def _run_actors(service, streams, mode):
    def body(port, i):
        for e in streams[i]:
            port.submit(e)

    return spawn_actors(service, len(streams), body, mode)


def invariant_report(service: MemoryService) -> dict:
    """Checks that hold for any serialization of the submissions."""
    from recode.memory import soft_visitation_count
    mem = service.memory
    gamma = mem.config.gamma
    expected = telescoped_total(gamma, service.submissions)
    total = mem.total_count()
    conserved = abs(total - expected) <= 1e-6 * expected
    bounded = mem.size <= mem.config.capacity and bool(np.all(mem.atom_counts > 0))
    replay = RecodeMemory(mem.dim, mem.config)
    for e in service.log:
        replay.process(e)
    replayed = replay.snapshot() == mem.snapshot() if service._log is not None else None
    # assimilation monotonicity probes on copies of the final state
    rng = np.random.default_rng(derive_seed(mem.config.seed, PROBE))
    monotone = True
    for _ in range(200):
        probe = RecodeMemory.from_snapshot(mem.snapshot())
        i = int(rng.integers(mem.size))
        e = probe.atoms[i] + 0.05 * rng.standard_normal(mem.dim)
        before, after, branch = assimilation_probe(probe, e)
        if branch == "assimilate" and after < before:
            monotone = False
    return {"conserved": conserved, "bounded": bounded, "replayed": replayed, "monotone": monotone,
            "submissions": service.submissions, "expected_total": expected}


def assimilation_probe(mem: RecodeMemory, e) -> tuple[float, float, str]:
    """Run one update on ``mem`` step by step and report the soft count at ``e``
    right before and right after the cluster update, both at the updated bandwidth."""
    from recode import memory as M
    e = np.asarray(e, dtype=np.float64)
    M.update_bandwidth(mem, e)
    M.discount_counts(mem)
    before = M.soft_visitation_count(mem, e)
    star = M.nearest_atom(mem, e)
    d2 = float(np.sum((mem.positions[star] - e) ** 2))
    if d2 > mem.config.kappa * mem.d_ema_sq:
        return before, before, "far"
    M.assimilate(mem, e, star)
    return before, M.soft_visitation_count(mem, e), "assimilate"


def run_concurrency_check(cfg: ExperimentConfig, out: Path | None = None) -> dict:
    p = _check_keys(cfg.params, CONC_PARAMS, "params")
    rows, ok = [], True
    for seed in cfg.seeds:
        n, m = p["actors"], p["submissions_per_actor"]
        streams = [actor_stream(seed, i, m, p["dim"], p["clusters"]) for i in range(n)]
        svc = _fresh_service(cfg, seed, p["dim"])
        stats = _run_actors(svc, streams, SchedulingMode.ROUND_ROBIN)
        # replay oracle: regenerate the streams, interleave, process sequentially
        replay_streams = [list(actor_stream(seed, i, m, p["dim"], p["clusters"])) for i in range(n)]
        seq = _fresh_service(cfg, seed, p["dim"])
        for e in round_robin_order(replay_streams):
            seq.submit(e)
        identical = svc.memory.snapshot() == seq.memory.snapshot() and \
            svc.normalizer == seq.normalizer
        counter_ok = svc.submissions == n * m == sum(stats.per_actor)

        fn, fm = p["free_running_actors"], p["free_running_submissions"]
        free_streams = [actor_stream(seed, 100 + i, fm, p["dim"], p["clusters"]) for i in range(fn)]
        fsvc = _fresh_service(cfg, seed, p["dim"])
        fsvc.record()
        fstats = _run_actors(fsvc, free_streams, SchedulingMode.FREE_RUNNING)
        inv = invariant_report(fsvc)
        free_ok = (inv["conserved"] and inv["bounded"] and inv["replayed"] and inv["monotone"]
                   and fsvc.submissions == fn * fm == sum(fstats.per_actor))
        ok &= identical and counter_ok and free_ok
        rows.append([seed, n, svc.submissions, identical, counter_ok, fn, fsvc.submissions,
                     inv["conserved"], inv["bounded"], inv["replayed"], inv["monotone"]])
    if out is not None:
        _write_csv(out / "concurrency.csv",
                   ["seed", "actors", "submissions", "snapshot_identical", "counter_ok",
                    "free_actors", "free_submissions", "free_conserved", "free_bounded",
                    "free_replay_exact", "free_monotone"], rows)
    return {"passed": bool(ok), "rows": rows}


# ---------------------------------------------------------------------------

RUNNERS = {
    "toy-density": run_toy_density,
    "removal-ablation": run_removal_ablation,
    "disco-maze": run_disco_maze,
    "cluster-ages": run_cluster_ages,
    "tabular-oracle": run_tabular_oracle,
    "grad-check": run_grad_check,
    "concurrency-check": run_concurrency_check,
}

SCHEMAS = {
    "toy-density": {"env": set(), "params": set(TOY_DENSITY_PARAMS)},
    "removal-ablation": {"env": set(), "params": set(REMOVAL_PARAMS)},
    "disco-maze": {"env": set(MAZE_ENV), "params": set(MAZE_PARAMS)},
    "cluster-ages": {"env": set(MAZE_ENV), "params": set(AGES_PARAMS)},
    "tabular-oracle": {"env": set(ORACLE_ENV), "params": set(ORACLE_PARAMS)},
    "grad-check": {"env": set(GRAD_ENV), "params": set(GRAD_PARAMS)},
    "concurrency-check": {"env": set(), "params": set(CONC_PARAMS)},
}

__all__ = ["RUNNERS", "SCHEMAS", "derive_seed", "telescoped_total", "EPISODE_CSV_HEADER", "AgentConfig",
           "RecodeConfig"]
