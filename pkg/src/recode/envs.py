"""Toy environments and synthetic embedding streams."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field

import numpy as np

# actions: Up, Down, Left, Right as (drow, dcol); row 0 is the top of the grid
UP, DOWN, LEFT, RIGHT = range(4)
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))
NUM_ACTIONS = 4


class ContractViolation(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Expanding-square streams
# ---------------------------------------------------------------------------

class SquareKind(str, enum.Enum):
    CAPPED = "capped"  # side min(100, t)
    SQRT = "sqrt"  # side 1 + sqrt(t)


@dataclass(frozen=True)
class StreamSchedule:
    kind: SquareKind = SquareKind.SQRT
    batch_size: int = 64
    horizon: int = 100

    def __post_init__(self):
        object.__setattr__(self, "kind", SquareKind(self.kind))
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def side(self, t: int) -> float:
        if t < 0:
            raise ValueError("t must be >= 0")
        if self.kind is SquareKind.CAPPED:
            return float(min(100, t))
        return 1.0 + float(np.sqrt(t))


def expanding_square_batch(t: int, schedule: StreamSchedule, rng: np.random.Generator) -> np.ndarray:
    """``batch_size`` points drawn uniformly from ``[0, side(t)]^2``."""
    side = schedule.side(t)
    return rng.random((schedule.batch_size, 2)) * side


# ---------------------------------------------------------------------------
# Shared step contract
# ---------------------------------------------------------------------------

class Cause(str, enum.Enum):
    NONE = "none"
    WALL = "wall"
    GOAL = "goal"
    TIMEOUT = "timeout"


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    terminated: bool
    cause: Cause


class RenderMode(str, enum.Enum):
    FULL = "full"
    POSITION = "position"


# ---------------------------------------------------------------------------
# Random Disco Maze
# ---------------------------------------------------------------------------

OPEN, WALL = 0, 1


@dataclass(frozen=True)
class DiscoMazeConfig:
    size: int = 21
    num_colors: int = 5
    max_steps: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.size < 5 or self.size % 2 == 0:
            raise ValueError("maze size must be an odd integer >= 5")
        if self.num_colors < 1 or self.max_steps < 1:
            raise ValueError("num_colors and max_steps must be positive")


def carve_maze(size: int, rng: np.random.Generator) -> np.ndarray:
    """Perfect maze on the odd lattice by iterative recursive backtracking."""
    layout = np.full((size, size), WALL, dtype=np.int8)
    start = (size - 2, 1)
    layout[start] = OPEN
    stack = [start]
    while stack:
        r, c = stack[-1]
        nbrs = [
            (r + 2 * dr, c + 2 * dc, dr, dc)
            for dr, dc in MOVES
            if 0 < r + 2 * dr < size - 1 and 0 < c + 2 * dc < size - 1
            and layout[r + 2 * dr, c + 2 * dc] == WALL
        ]
        if not nbrs:
            stack.pop()
            continue
        nr, nc, dr, dc = nbrs[int(rng.integers(len(nbrs)))]
        layout[r + dr, c + dc] = OPEN
        layout[nr, nc] = OPEN
        stack.append((nr, nc))
    return layout


def bfs_distances(layout: np.ndarray, start: tuple[int, int]) -> np.ndarray:
    dist = np.full(layout.shape, -1, dtype=np.int64)
    dist[start] = 0
    queue = deque([start])
    while queue:
        r, c = queue.popleft()
        for dr, dc in MOVES:
            nr, nc = r + dr, c + dc
            if 0 <= nr < layout.shape[0] and 0 <= nc < layout.shape[1] \
                    and layout[nr, nc] == OPEN and dist[nr, nc] < 0:
                dist[nr, nc] = dist[r, c] + 1
                queue.append((nr, nc))
    return dist


@dataclass
class MazeState:
    layout: np.ndarray
    wall_colors: np.ndarray  # -1 on open cells
    agent: tuple[int, int]
    goal: tuple[int, int]
    step_count: int = 0
    done: bool = False


class DiscoMaze:
    """Fully observable maze whose wall colours are resampled every step.

    Walking into a wall ends the episode with reward 0; the goal gives 1.
    The layout is fixed for the lifetime of the instance; the colour stream
    comes from the instance's own generator.
    """

    def __init__(self, config: DiscoMazeConfig = DiscoMazeConfig(), mode: RenderMode = RenderMode.FULL):
        self.config = config
        self.mode = RenderMode(mode)
        self.rng = np.random.default_rng(config.seed)
        self.layout = carve_maze(config.size, self.rng)
        self.start = (config.size - 2, 1)
        dist = bfs_distances(self.layout, self.start)
        self.goal = tuple(int(x) for x in np.unravel_index(int(np.argmax(dist)), dist.shape))
        self.state: MazeState | None = None

    @property
    def num_states(self) -> int:
        return self.config.size**2

    @property
    def obs_dim(self) -> int:
        n = self.config.size**2
        return n * (self.config.num_colors + 3) if self.mode is RenderMode.FULL else n

    def state_index(self) -> int:
        r, c = self.state.agent
        return r * self.config.size + c

    def _resample_colors(self) -> np.ndarray:
        colors = self.rng.integers(self.config.num_colors, size=self.layout.shape)
        return np.where(self.layout == WALL, colors, -1)

    def reset(self) -> np.ndarray:
        self.state = MazeState(self.layout, self._resample_colors(), self.start, self.goal)
        return self.render()

    def step(self, action: int) -> StepResult:
        return maze_step(self, action)

    def render(self, mode: RenderMode | None = None) -> np.ndarray:
        return maze_render(self.state, self.config.num_colors, mode or self.mode)

    def to_text(self) -> str:
        return maze_to_text(self.layout, self.start, self.goal)


def maze_generate(config: DiscoMazeConfig) -> MazeState:
    env = DiscoMaze(config)
    env.reset()
    return env.state


def maze_step(env: DiscoMaze, action: int) -> StepResult:
    st = env.state
    if st is None or st.done:
        raise ContractViolation("step called on a finished episode; call reset()")
    if action not in range(NUM_ACTIONS):
        raise ValueError(f"invalid action {action}")
    dr, dc = MOVES[action]
    r, c = st.agent
    target = (r + dr, c + dc)
    st.step_count += 1
    cause = Cause.NONE
    if st.layout[target] == WALL:
        cause = Cause.WALL
    else:
        st.agent = target
        if target == st.goal:
            cause = Cause.GOAL
        elif st.step_count >= env.config.max_steps:
            cause = Cause.TIMEOUT
    st.wall_colors = env._resample_colors()
    st.done = cause is not Cause.NONE
    reward = 1.0 if cause is Cause.GOAL else 0.0
    return StepResult(env.render(), reward, st.done, cause)


def maze_render(state: MazeState, num_colors: int, mode: RenderMode) -> np.ndarray:
    """Full: per-cell one-hot over (open, wall colours..., agent, goal), row-major.
    PositionOnly: one-hot of the agent's cell."""
    size = state.layout.shape[0]
    if RenderMode(mode) is RenderMode.POSITION:
        obs = np.zeros(size * size)
        obs[state.agent[0] * size + state.agent[1]] = 1.0
        return obs
    cat = np.where(state.layout == WALL, state.wall_colors + 1, 0)
    cat[state.goal] = num_colors + 2
    cat[state.agent] = num_colors + 1
    obs = np.zeros((size * size, num_colors + 3))
    obs[np.arange(size * size), cat.ravel()] = 1.0
    return obs.ravel()


def maze_to_text(layout: np.ndarray, start, goal) -> str:
    rows = []
    for r in range(layout.shape[0]):
        line = []
        for c in range(layout.shape[1]):
            if (r, c) == tuple(start):
                line.append("S")
            elif (r, c) == tuple(goal):
                line.append("G")
            else:
                line.append("#" if layout[r, c] == WALL else ".")
        rows.append("".join(line))
    return "\n".join(rows) + "\n"


def maze_from_text(text: str) -> tuple[np.ndarray, tuple[int, int], tuple[int, int]]:
    rows = [r for r in text.splitlines() if r]
    layout = np.array([[WALL if ch == "#" else OPEN for ch in r] for r in rows], dtype=np.int8)
    start = goal = None
    for r, row in enumerate(rows):
        for c, ch in enumerate(row):
            if ch == "S":
                start = (r, c)
            elif ch == "G":
                goal = (r, c)
    return layout, start, goal


# ---------------------------------------------------------------------------
# Open gridworld
# ---------------------------------------------------------------------------

@dataclass
class GridWorld:
    """Open room without colour noise. Bumping the boundary is a no-op.

    ``goal=None`` gives a goal-free room (used by the tabular oracle). When
    ``start == goal`` the episode is over at reset: ``done`` is set and the
    episode has length 0.
    """

    size: int = 5
    goal: tuple[int, int] | None = None
    start: tuple[int, int] = (0, 0)
    max_steps: int | None = None
    agent: tuple[int, int] = field(init=False)
    step_count: int = field(init=False, default=0)
    done: bool = field(init=False, default=False)

    def __post_init__(self):
        for p in (self.start, self.goal):
            if p is not None and not (0 <= p[0] < self.size and 0 <= p[1] < self.size):
                raise ValueError(f"position {p} outside {self.size}x{self.size} grid")
        self.start = tuple(self.start)
        self.goal = tuple(self.goal) if self.goal is not None else None
        self.agent = self.start

    @property
    def num_states(self) -> int:
        return self.size**2

    @property
    def obs_dim(self) -> int:
        return self.size**2

    def state_index(self) -> int:
        return self.agent[0] * self.size + self.agent[1]

    def reset(self) -> np.ndarray:
        self.agent = self.start
        self.step_count = 0
        self.done = self.goal is not None and self.start == self.goal
        return self.render()

    def render(self, mode=None) -> np.ndarray:
        obs = np.zeros(self.size**2)
        obs[self.state_index()] = 1.0
        return obs

    def step(self, action: int) -> StepResult:
        if self.done:
            raise ContractViolation("step called on a finished episode; call reset()")
        dr, dc = MOVES[action]
        r, c = self.agent
        nr, nc = r + dr, c + dc
        if 0 <= nr < self.size and 0 <= nc < self.size:
            self.agent = (nr, nc)
        self.step_count += 1
        cause = Cause.NONE
        if self.goal is not None and self.agent == self.goal:
            cause = Cause.GOAL
        elif self.max_steps is not None and self.step_count >= self.max_steps:
            cause = Cause.TIMEOUT
        self.done = cause is not Cause.NONE
        return StepResult(self.render(), 1.0 if cause is Cause.GOAL else 0.0, self.done, cause)


def gridworld_env(size: int, goal=None, start=(0, 0), max_steps=None) -> GridWorld:
    return GridWorld(size=size, goal=goal, start=start, max_steps=max_steps)
