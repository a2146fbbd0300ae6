"""Tabular epsilon-greedy Q-learning driven by extrinsic plus novelty reward."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from recode.envs import NUM_ACTIONS, Cause
from recode.normalizer import RewardNormalizer, normalize_reward


@dataclass(frozen=True)
class AgentConfig:
    alpha: float = 0.1
    epsilon: float = 0.05
    gamma_rl: float = 0.99
    beta_im: float = 1.0
    episodes: int = 100
    seed: int = 0
    # value read for unseen states; 0 unless an experiment opts into optimism
    q_init: float = 0.0

    def __post_init__(self):
        vals = (self.alpha, self.epsilon, self.gamma_rl, self.beta_im, self.q_init)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("agent hyperparameters must be finite")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if not 0 <= self.epsilon <= 1:
            raise ValueError("epsilon must lie in [0, 1]")
        if not 0 <= self.gamma_rl < 1:
            raise ValueError("gamma_rl must lie in [0, 1)")
        if self.beta_im < 0:
            raise ValueError("beta_im must be >= 0")


class QTable:
    """state index -> action values; unseen states read as ``init`` (zero by default)."""

    def __init__(self, num_actions: int = NUM_ACTIONS, init: float = 0.0):
        self.num_actions = num_actions
        self.init = init
        self.table: dict[int, np.ndarray] = {}

    def __getitem__(self, s: int) -> np.ndarray:
        v = self.table.get(s)
        return v if v is not None else np.full(self.num_actions, self.init)

    def __contains__(self, s) -> bool:
        return s in self.table

    def __len__(self) -> int:
        return len(self.table)

    def row(self, s: int) -> np.ndarray:
        if s not in self.table:
            self.table[s] = np.full(self.num_actions, self.init)
        return self.table[s]

    def max_abs(self) -> float:
        return max((float(np.abs(v).max()) for v in self.table.values()), default=0.0)


def select_action(q: QTable, state: int, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy; greedy ties go to the lowest action index."""
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must lie in [0, 1]")
    if rng.random() < epsilon:
        return int(rng.integers(q.num_actions))
    return int(np.argmax(q[state]))


def q_update(q: QTable, s: int, a: int, r_total: float, s_next: int, terminal: bool,
             alpha: float, gamma_rl: float) -> None:
    if not math.isfinite(r_total):
        raise ValueError("reward must be finite")
    bootstrap = 0.0 if terminal else gamma_rl * float(np.max(q[s_next]))
    row = q.row(s)
    row[a] = row[a] + alpha * (r_total + bootstrap - row[a])


@dataclass
class EpisodeRecord:
    length: int
    extrinsic_return: float
    intrinsic_sum: float
    unique_states: int
    cause: Cause
    states: set = field(default_factory=set, repr=False)
    # (state, raw intrinsic) per processed embedding, reset observation included
    trace: list = field(default_factory=list, repr=False)


class EpisodeAborted(RuntimeError):
    pass


def _novelty(memory, normalizer):
    """Return a callable e -> (raw, normalized) for a memory or a shared service."""
    if memory is None:
        return lambda e: (0.0, 0.0)
    if hasattr(memory, "submit_raw"):
        return memory.submit_raw
    norm = normalizer if normalizer is not None else RewardNormalizer()

    def fn(e):
        raw = memory.process(e)
        return raw, normalize_reward(norm, raw)

    return fn


def run_episode(env, embed_fn, memory, normalizer, q: QTable, config: AgentConfig,
                rng: np.random.Generator, keep_trace: bool = False,
                step_limit: int | None = None) -> EpisodeRecord:
    """One episode: render, embed, score novelty, learn, act.

    The reset observation is also fed to the memory (it is a visit), but its
    reward trains nothing. ``memory`` may be a ``RecodeMemory``, a
    ``MemoryService`` or ``None`` (no intrinsic pathway). With ``step_limit``
    the episode is cut after that many steps; its cause is then ``none``.
    """
    novelty = _novelty(memory, normalizer)
    obs = env.reset()
    s = env.state_index()
    states = {s}
    trace = []
    try:
        raw, _ = novelty(embed_fn(obs))
    except Exception as exc:
        raise EpisodeAborted(f"novelty failed on reset observation: {exc!r}") from exc
    intrinsic_sum = raw
    if keep_trace:
        trace.append((s, raw))
    length, ext = 0, 0.0
    cause = Cause.NONE
    done = getattr(env, "done", False)
    while not done and (step_limit is None or length < step_limit):
        a = select_action(q, s, config.epsilon, rng)
        res = env.step(a)
        s_next = env.state_index()
        try:
            raw, r_int = novelty(embed_fn(res.observation))
        except Exception as exc:
            raise EpisodeAborted(f"novelty failed at step {length}: {exc!r}") from exc
        intrinsic_sum += raw
        if keep_trace:
            trace.append((s_next, raw))
        q_update(q, s, a, res.reward + config.beta_im * r_int, s_next, res.terminated,
                 config.alpha, config.gamma_rl)
        length += 1
        ext += res.reward
        states.add(s_next)
        s, done, cause = s_next, res.terminated, res.cause
    return EpisodeRecord(length, ext, intrinsic_sum, len(states), cause, states, trace)


def run_agent(env, embed_fn, memory, normalizer, config: AgentConfig, step_budget: int | None = None,
              q: QTable | None = None, on_episode=None) -> tuple[list[EpisodeRecord], QTable]:
    """Episodes until ``config.episodes`` are done or exactly ``step_budget`` env
    steps are spent (the last episode is truncated if needed)."""
    rng = np.random.default_rng(config.seed)
    q = q if q is not None else QTable(init=config.q_init)
    records, steps = [], 0
    for ep in range(config.episodes):
        if step_budget is not None and steps >= step_budget:
            break
        limit = None if step_budget is None else step_budget - steps
        rec = run_episode(env, embed_fn, memory, normalizer, q, config, rng, step_limit=limit)
        records.append(rec)
        steps += rec.length
        if on_episode is not None:
            on_episode(ep, rec, steps)
    return records, q


def run_random_baseline(env, episodes: int, seed: int, step_budget: int | None = None) -> dict:
    """Uniform-random policy. Uses the same draw sequence as ``run_episode`` with
    epsilon = 1, so matched seeds give matched trajectories."""
    config = AgentConfig(epsilon=1.0, beta_im=0.0, episodes=episodes, seed=seed)
    visited = set()
    env.reset()
    visited.add(env.state_index())
    records, steps = [], 0
    rng = np.random.default_rng(seed)
    q = QTable()
    for _ in range(episodes):
        if step_budget is not None and steps >= step_budget:
            break
        limit = None if step_budget is None else step_budget - steps
        rec = run_episode(env, _null_embed, None, None, q, config, rng, step_limit=limit)
        visited |= rec.states
        records.append(rec)
        steps += rec.length
    return {"unique_states": len(visited), "states": visited, "records": records, "steps": steps}


def _null_embed(obs):
    return obs


EPISODE_CSV_HEADER = ("episode", "length", "extrinsic_return", "intrinsic_sum", "unique_states", "cause")


def write_episode_csv(path, records, extra: dict | None = None) -> None:
    """One row per episode with the declared header (plus ``extra`` constant columns)."""
    extra = extra or {}
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*extra.keys(), *EPISODE_CSV_HEADER])
        for i, r in enumerate(records):
            w.writerow([*extra.values(), i, r.length, repr(float(r.extrinsic_return)),
                        repr(float(r.intrinsic_sum)), r.unique_states, Cause(r.cause).value])


def record_dict(r: EpisodeRecord) -> dict:
    d = asdict(r)
    d.pop("states")
    d.pop("trace")
    d["cause"] = Cause(r.cause).value
    return d
