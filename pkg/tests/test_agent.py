import math

import numpy as np
import pytest

from recode import RecodeConfig, RecodeMemory, RewardNormalizer
from recode.agent import (
    EPISODE_CSV_HEADER, AgentConfig, EpisodeAborted, QTable, q_update, run_agent, run_episode,
    run_random_baseline, select_action, write_episode_csv,
)
from recode.embeddings import Identity
from recode.envs import Cause, DiscoMaze, DiscoMazeConfig, GridWorld, RenderMode


def test_select_action_rules(rng):
    q = QTable()
    q.row(0)[:] = [0, 2, 1, 2]
    assert select_action(q, 0, 0.0, rng) == 1
    assert select_action(q, 99, 0.0, rng) == 0
    draws = np.bincount([select_action(q, 0, 1.0, rng) for _ in range(10_000)], minlength=4)
    sd = math.sqrt(10_000 * 0.25 * 0.75)
    assert np.all(np.abs(draws - 2500) < 3 * sd)


def test_unseen_states_read_init_value():
    assert np.array_equal(QTable()[5], np.zeros(4))
    q = QTable(init=2.0)
    assert np.array_equal(q[5], np.full(4, 2.0)) and 5 not in q
    q.row(5)[1] = 0.0
    assert list(q[5]) == [2.0, 0.0, 2.0, 2.0]


def test_q_update_examples():
    q = QTable()
    q_update(q, 0, 1, 1.0, 1, True, 0.5, 0.99)
    assert q[0][1] == 0.5
    q_update(q, 0, 1, 123.0, 1, False, 0.0, 0.99)
    assert q[0][1] == 0.5
    # fixed point: Q(0, 2) = r + gamma * max Q(1)
    q.row(1)[:] = [0.0, 4.0, 1.0, 0.0]
    q.row(0)[2] = 1.0 + 0.5 * 4.0
    q_update(q, 0, 2, 1.0, 1, False, 0.3, 0.5)
    assert q[0][2] == 3.0
    with pytest.raises(ValueError):
        q_update(q, 0, 0, float("inf"), 1, True, 0.1, 0.9)


def test_agent_config_validation():
    for bad in (dict(alpha=0), dict(epsilon=1.5), dict(gamma_rl=1.0), dict(beta_im=-1), dict(q_init=float("nan"))):
        with pytest.raises(ValueError):
            AgentConfig(**bad)


def test_single_state_reward_trace():
    # a 1x1 room: every step revisits the same cell
    env = GridWorld(1, max_steps=30)
    mem = RecodeMemory(1, RecodeConfig(gamma=1.0, tau=1e-12))
    mem.process([1.0])  # first visit: empty soft count
    mem.d_ema_sq = 1.0  # open the kernel; tiny tau keeps it open
    rec = run_episode(env, Identity(1), mem, RewardNormalizer(), QTable(), AgentConfig(), np.random.default_rng(0),
                      keep_trace=True)
    raws = [r for _, r in rec.trace]
    # visit n (counting the seeding visit as 1) sees soft count n
    expected = [1.0 / (math.sqrt(n) + 0.01) for n in range(2, 2 + len(raws))]
    assert raws == pytest.approx(expected, rel=1e-9)
    assert rec.length == 30 and rec.cause is Cause.TIMEOUT and rec.unique_states == 1


def test_identical_zero_bandwidth_stream_stays_maximal():
    # with the bandwidth at zero every soft count is empty: the reward is the 1/n0 cap
    env = GridWorld(1, max_steps=5)
    rec = run_episode(env, Identity(1), RecodeMemory(1, RecodeConfig()), None, QTable(), AgentConfig(),
                      np.random.default_rng(0), keep_trace=True)
    assert [r for _, r in rec.trace] == [100.0] * 6


def test_unique_states_recount():
    env = DiscoMaze(DiscoMazeConfig(size=9, seed=2), RenderMode.POSITION)
    mem = RecodeMemory(env.obs_dim, RecodeConfig(capacity=64, seed=0))
    q = QTable(init=1.0)
    rng = np.random.default_rng(0)
    for _ in range(30):
        rec = run_episode(env, Identity(env.obs_dim), mem, RewardNormalizer(), q, AgentConfig(q_init=1.0), rng,
                          keep_trace=True)
        assert rec.unique_states == len({s for s, _ in rec.trace})
        assert rec.length == len(rec.trace) - 1


def test_random_policy_matches_baseline_trajectories():
    # beta = 0, epsilon = 1: the intrinsic path cannot affect behaviour
    cfg = AgentConfig(epsilon=1.0, beta_im=0.0, episodes=40, seed=9)
    env = DiscoMaze(DiscoMazeConfig(size=9, seed=1), RenderMode.POSITION)
    mem = RecodeMemory(env.obs_dim, RecodeConfig(capacity=32))
    recs, _ = run_agent(env, Identity(env.obs_dim), mem, RewardNormalizer(), cfg)
    env2 = DiscoMaze(DiscoMazeConfig(size=9, seed=1), RenderMode.POSITION)
    base = run_random_baseline(env2, 40, seed=9)
    assert [r.states for r in recs] == [r.states for r in base["records"]]
    assert [r.length for r in recs] == [r.length for r in base["records"]]


def test_random_baseline_examples():
    g = GridWorld(2)
    assert run_random_baseline(g, 10, seed=0, step_budget=0)["unique_states"] == 1
    covs = [run_random_baseline(GridWorld(5, max_steps=20), 50, seed=3, step_budget=b)["unique_states"]
            for b in (0, 5, 50, 500)]
    assert covs == sorted(covs)
    assert run_random_baseline(GridWorld(2, max_steps=100), 5, seed=0)["unique_states"] == 4


def test_step_budget_is_exact():
    env = DiscoMaze(DiscoMazeConfig(size=9, seed=0), RenderMode.POSITION)
    recs, _ = run_agent(env, Identity(env.obs_dim), None, None, AgentConfig(episodes=10**9, epsilon=1.0),
                        step_budget=777)
    assert sum(r.length for r in recs) == 777


def test_extrinsic_only_learning_and_q_bound():
    # beta = 0: plain Q-learning still finds the goal of an open room
    env = GridWorld(4, goal=(3, 3), max_steps=100)
    cfg = AgentConfig(alpha=0.5, epsilon=0.5, gamma_rl=0.9, beta_im=0.0, episodes=300, seed=0)
    _, q = run_agent(env, Identity(16), None, None, cfg)
    greedy = run_episode(env, Identity(16), None, None, q, AgentConfig(epsilon=0.0), np.random.default_rng(0))
    assert greedy.cause is Cause.GOAL and greedy.length == 6
    assert q.max_abs() <= 1.0 / (1 - 0.9)


def test_q_values_bounded_with_novelty():
    env = DiscoMaze(DiscoMazeConfig(size=9, seed=0), RenderMode.POSITION)
    norm = RewardNormalizer()
    cfg = AgentConfig(episodes=200, seed=1, q_init=1.0)
    _, q = run_agent(env, Identity(env.obs_dim), RecodeMemory(env.obs_dim, RecodeConfig(capacity=64)), norm, cfg)
    r_max = 1.0 + norm.max_output
    assert q.max_abs() <= r_max / (1 - cfg.gamma_rl) + cfg.q_init


def test_bit_determinism():
    def go():
        env = DiscoMaze(DiscoMazeConfig(size=9, seed=4), RenderMode.POSITION)
        mem = RecodeMemory(env.obs_dim, RecodeConfig(capacity=64, seed=2))
        recs, q = run_agent(env, Identity(env.obs_dim), mem, RewardNormalizer(), AgentConfig(episodes=50, seed=3))
        return [(r.length, r.intrinsic_sum, r.cause) for r in recs], mem.snapshot()

    assert go() == go()


def test_component_failure_aborts_episode():
    env = GridWorld(3, max_steps=10)

    def broken(obs):
        if obs[4] == 1.0:
            return np.array([np.nan] * 9)
        return obs

    mem = RecodeMemory(9, RecodeConfig())
    with pytest.raises(EpisodeAborted, match="non-finite"):
        run_episode(GridWorld(3, start=(1, 1)), broken, mem, None, QTable(), AgentConfig(), np.random.default_rng(0))
    run_episode(env, broken, mem, None, QTable(), AgentConfig(epsilon=0.0), np.random.default_rng(0))


def test_episode_csv(tmp_path):
    env = GridWorld(3, goal=(2, 2), max_steps=20)
    recs, _ = run_agent(env, Identity(9), None, None, AgentConfig(episodes=3, epsilon=1.0))
    write_episode_csv(tmp_path / "e.csv", recs)
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == ",".join(EPISODE_CSV_HEADER)
    assert len(lines) == 4
