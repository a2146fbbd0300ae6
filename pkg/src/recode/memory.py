"""Fixed-capacity clustering memory that turns embeddings into novelty rewards.

The memory holds up to ``capacity`` atoms (cluster centres with soft visit
counts). Each call to :meth:`RecodeMemory.process` scores an embedding by its
kernel-weighted soft visitation count, then folds it into the memory either by
moving the nearest atom towards it or by spawning a new atom.

The module-level functions (``kernel_value``, ``knn``, ``update_bandwidth``...)
are the individual pieces of that update written in plain numpy. ``process``
runs the same sequence through a compiled kernel for speed.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from recode import _kernels

C_FLOOR = 1e-6
SNAPSHOT_FORMAT = "recode-memory/1"


class NonFiniteEmbedding(ValueError):
    """Raised when an embedding contains NaN or inf. The memory is left untouched."""


class RemovalStrategy(str, enum.Enum):
    INVERSE_COUNT_SQUARED = "inverse_count_squared"
    INVERSE_COUNT = "inverse_count"
    MIN_COUNT = "min_count"

    @property
    def code(self) -> int:
        return {
            RemovalStrategy.INVERSE_COUNT_SQUARED: _kernels.INV_COUNT_SQUARED,
            RemovalStrategy.INVERSE_COUNT: _kernels.INV_COUNT,
            RemovalStrategy.MIN_COUNT: _kernels.MIN_COUNT,
        }[self]


@dataclass(frozen=True)
class RecodeConfig:
    """Memory hyperparameters. Defaults follow the Atari settings."""

    capacity: int = 50_000
    k: int = 20
    kappa: float = 0.2
    tau: float = 0.9999
    gamma: float = 0.999
    eta: float = 0.05
    n0: float = 0.01
    epsilon: float = 1e-3
    removal: RemovalStrategy = RemovalStrategy.INVERSE_COUNT_SQUARED
    seed: int = 0
    # True: tau weights the fresh k-NN sample; False: tau weights the running average
    tau_weights_new: bool = True

    def __post_init__(self):
        object.__setattr__(self, "removal", RemovalStrategy(self.removal))
        if int(self.capacity) != self.capacity or self.capacity < 2:
            raise ValueError(f"capacity must be an integer >= 2, got {self.capacity}")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")
        for name in ("kappa", "tau", "gamma", "eta", "n0", "epsilon"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        if self.kappa <= 0 or self.n0 <= 0 or self.epsilon <= 0:
            raise ValueError("kappa, n0 and epsilon must be > 0")
        for name in ("tau", "gamma", "eta"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["removal"] = self.removal.value
        return d


@dataclass
class RecodeMemory:
    """Atom store plus the adaptive bandwidth and the PRNG driving coin flips.

    Not thread-safe; wrap it in :class:`recode.service.MemoryService` to share
    between actors.
    """

    dim: int
    config: RecodeConfig = field(default_factory=RecodeConfig)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        cap = self.config.capacity
        self.positions = np.zeros((cap, self.dim))
        self.counts = np.zeros(cap)
        self.born = np.zeros(cap, dtype=np.int64)
        self.size = 0
        self.d_ema_sq = 0.0
        self.steps_processed = 0
        self.rng = np.random.default_rng(self.config.seed)
        self.last_branch: str | None = None
        self.last_index: int | None = None

    # -- views -------------------------------------------------------------
    @property
    def atoms(self) -> np.ndarray:
        return self.positions[: self.size]

    @property
    def atom_counts(self) -> np.ndarray:
        return self.counts[: self.size]

    @property
    def is_full(self) -> bool:
        return self.size == self.config.capacity

    def total_count(self) -> float:
        return float(self.atom_counts.sum())

    def ages(self) -> np.ndarray:
        """Steps elapsed since each atom was inserted."""
        return self.steps_processed - self.born[: self.size]

    def __len__(self) -> int:
        return self.size

    # -- the update ----------------------------------------------------------
    def _check(self, e) -> np.ndarray:
        e = np.asarray(e, dtype=np.float64)
        if e.shape != (self.dim,):
            raise ValueError(f"expected embedding of shape ({self.dim},), got {e.shape}")
        if not np.all(np.isfinite(e)):
            raise NonFiniteEmbedding("embedding contains non-finite values")
        return e

    def _args(self):
        c = self.config
        return (c.k, c.kappa, c.tau, c.tau_weights_new, c.gamma, c.eta, c.n0,
                c.epsilon, c.removal.code, C_FLOOR)

    def process(self, e) -> float:
        """Score ``e`` and fold it into the memory; returns the raw reward."""
        e = self._check(e)
        k, kappa, tau, tnew, gamma, eta, n0, eps, strat, floor = self._args()
        u = self.rng.random(2)
        reward, n, d, branch, idx = _kernels.step(
            self.positions, self.counts, self.born, self.size, self.d_ema_sq, e,
            k, kappa, tau, tnew, gamma, eta, n0, eps, strat, floor,
            u[0], u[1], self.steps_processed,
        )
        self.size, self.d_ema_sq = int(n), float(d)
        self.steps_processed += 1
        self.last_branch = ("assimilate", "append", "replace")[branch]
        self.last_index = int(idx)
        return float(reward)

    def process_batch(self, es) -> np.ndarray:
        """Sequentially process the rows of ``es``; identical to a loop over ``process``."""
        es = np.ascontiguousarray(es, dtype=np.float64)
        if es.ndim != 2 or es.shape[1] != self.dim:
            raise ValueError(f"expected array of shape (m, {self.dim}), got {es.shape}")
        if not np.all(np.isfinite(es)):
            raise NonFiniteEmbedding("batch contains non-finite values")
        if len(es) == 0:
            return np.empty(0)
        k, kappa, tau, tnew, gamma, eta, n0, eps, strat, floor = self._args()
        us = self.rng.random((len(es), 2))
        rewards, branches, n, d = _kernels.step_batch(
            self.positions, self.counts, self.born, self.size, self.d_ema_sq, es,
            k, kappa, tau, tnew, gamma, eta, n0, eps, strat, floor, us, self.steps_processed,
        )
        self.size, self.d_ema_sq = int(n), float(d)
        self.steps_processed += len(es)
        self.last_branch = ("assimilate", "append", "replace")[branches[-1]]
        self.last_index = None
        return rewards

    # -- snapshot ------------------------------------------------------------
    def snapshot(self) -> dict:
        """JSON-compatible record sufficient for a bit-exact restore.

        Floats are written with ``repr`` semantics by :mod:`json`, which
        round-trips IEEE doubles exactly.
        """
        return {
            "format": SNAPSHOT_FORMAT,
            "dim": self.dim,
            "config": self.config.to_dict(),
            "d_ema_sq": self.d_ema_sq,
            "steps_processed": self.steps_processed,
            "atoms": [
                [*map(float, self.positions[l]), float(self.counts[l]), int(self.born[l])]
                for l in range(self.size)
            ],
            "rng": self.rng.bit_generator.state,
        }

    @classmethod
    def from_snapshot(cls, snap: dict) -> "RecodeMemory":
        if snap.get("format") != SNAPSHOT_FORMAT:
            raise ValueError(f"unsupported snapshot format {snap.get('format')!r}")
        mem = cls(int(snap["dim"]), RecodeConfig(**snap["config"]))
        rows = snap["atoms"]
        if len(rows) > mem.config.capacity:
            raise ValueError("snapshot holds more atoms than capacity")
        for l, row in enumerate(rows):
            if len(row) != mem.dim + 2:
                raise ValueError(f"atom row {l} has wrong length")
            mem.positions[l] = row[: mem.dim]
            mem.counts[l] = row[mem.dim]
            mem.born[l] = row[mem.dim + 1]
        mem.size = len(rows)
        mem.d_ema_sq = float(snap["d_ema_sq"])
        mem.steps_processed = int(snap["steps_processed"])
        mem.rng.bit_generator.state = snap["rng"]
        return mem

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.snapshot()))

    @classmethod
    def load(cls, path) -> "RecodeMemory":
        return cls.from_snapshot(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# Individual operations (plain numpy)
# ---------------------------------------------------------------------------

def _vec(e, dim=None) -> np.ndarray:
    e = np.asarray(e, dtype=np.float64)
    if dim is not None and e.shape != (dim,):
        raise ValueError(f"dimension mismatch: expected ({dim},), got {e.shape}")
    return e


def _sq_dists(memory: RecodeMemory, e) -> np.ndarray:
    e = _vec(e, memory.dim)
    # accumulate coordinate by coordinate: same summation order as the kernel
    d2 = np.zeros(memory.size)
    for i in range(memory.dim):
        diff = e[i] - memory.positions[: memory.size, i]
        d2 += diff * diff
    return d2


def kernel_value(m, e, d_ema_sq: float, epsilon: float) -> float:
    """Inverse-quadratic kernel truncated at squared radius ``d_ema_sq``."""
    m, e = _vec(m), _vec(e)
    if m.shape != e.shape:
        raise ValueError(f"dimension mismatch: {m.shape} vs {e.shape}")
    if d_ema_sq < 0 or epsilon <= 0:
        raise ValueError("need d_ema_sq >= 0 and epsilon > 0")
    d2 = 0.0
    for x in e - m:
        d2 += x * x
    if d_ema_sq > 0 and d2 < d_ema_sq:
        return 1.0 / (1.0 + d2 / (epsilon * d_ema_sq))
    return 0.0


def soft_visitation_count(memory: RecodeMemory, e) -> float:
    d2 = _sq_dists(memory, e)
    d, eps = memory.d_ema_sq, memory.config.epsilon
    total = 0.0
    if d <= 0:
        return total
    for l in range(memory.size):
        if d2[l] < d:
            total += (1.0 + memory.counts[l]) * (1.0 / (1.0 + d2[l] / (eps * d)))
    return float(total)


def intrinsic_reward_raw(n: float, n0: float) -> float:
    if n < 0:
        raise ValueError("soft count must be >= 0")
    return 1.0 / (math.sqrt(n) + n0)


def knn(memory: RecodeMemory, e, k: int) -> list[int]:
    """Indices of the ``min(k, size)`` nearest atoms, closest first, ties to lowest index."""
    if k < 1:
        raise ValueError("k must be >= 1")
    d2 = _sq_dists(memory, e)
    return [int(i) for i in np.argsort(d2, kind="stable")[:k]]


def update_bandwidth(memory: RecodeMemory, e) -> None:
    if memory.size == 0:
        return
    d2 = _sq_dists(memory, e)
    nbrs = np.sort(d2)[: memory.config.k]
    total = 0.0
    for x in nbrs:
        total += x
    kk = len(nbrs)
    tau = memory.config.tau
    if memory.config.tau_weights_new:
        memory.d_ema_sq = (1.0 - tau) * memory.d_ema_sq + (tau / kk) * total
    else:
        memory.d_ema_sq = tau * memory.d_ema_sq + ((1.0 - tau) / kk) * total


def discount_counts(memory: RecodeMemory) -> None:
    memory.counts[: memory.size] *= memory.config.gamma


def nearest_atom(memory: RecodeMemory, e) -> int | None:
    """Index of the closest atom, or None when the memory is empty."""
    if memory.size == 0:
        return None
    return int(np.argmin(_sq_dists(memory, e)))


def removal_probabilities(counts, strategy: RemovalStrategy) -> np.ndarray:
    c = np.maximum(np.asarray(counts, dtype=np.float64), C_FLOOR)
    strategy = RemovalStrategy(strategy)
    if strategy is RemovalStrategy.MIN_COUNT:
        p = np.zeros(len(c))
        p[int(np.argmin(c))] = 1.0
        return p
    w = 1.0 / c**2 if strategy is RemovalStrategy.INVERSE_COUNT_SQUARED else 1.0 / c
    return w / w.sum()


def sample_removal(memory: RecodeMemory, u: float | None = None) -> int:
    """Draw the index of the atom to evict.

    ``u`` is the uniform variate used for inverse-CDF sampling; drawn from the
    memory's PRNG when omitted.
    """
    if memory.size == 0:
        raise ValueError("cannot sample a removal from an empty memory")
    counts = memory.atom_counts
    strategy = memory.config.removal
    if strategy is RemovalStrategy.MIN_COUNT:
        return int(np.argmin(counts))
    if u is None:
        u = float(memory.rng.random())
    c = np.maximum(counts, C_FLOOR)
    w = 1.0 / c**2 if strategy is RemovalStrategy.INVERSE_COUNT_SQUARED else 1.0 / c
    cum = 0.0
    total = float(sum(w))
    for l, wl in enumerate(w):
        cum += wl
        if cum > u * total:
            return l
    return memory.size - 1


def nearest_other_atom(memory: RecodeMemory, j: int) -> int | None:
    if memory.size < 2:
        return None
    d2 = _sq_dists(memory, memory.positions[j])
    d2[j] = np.inf
    return int(np.argmin(d2))


def redistribute_count(memory: RecodeMemory, removed: int) -> None:
    """Hand the removed atom's count to its nearest neighbour, then delete it.

    A lone atom has no neighbour; its count is dropped.
    """
    if not 0 <= removed < memory.size:
        raise IndexError(removed)
    dagger = nearest_other_atom(memory, removed)
    if dagger is not None:
        memory.counts[dagger] = memory.counts[removed] + memory.counts[dagger]
    n = memory.size
    for arr in (memory.positions, memory.counts, memory.born):
        arr[removed : n - 1] = arr[removed + 1 : n]
        arr[n - 1] = 0
    memory.size -= 1


def assimilate(memory: RecodeMemory, e, target: int) -> None:
    """Move atom ``target`` to the count-weighted average with ``e``."""
    e = _vec(e, memory.dim)
    if not 0 <= target < memory.size:
        raise IndexError(target)
    c = memory.counts[target]
    m = memory.positions[target]
    memory.positions[target] = m + (1.0 / (c + 1.0)) * (e - m)
    memory.counts[target] = c + 1.0


def insert_atom(memory: RecodeMemory, e, index: int | None = None) -> int:
    """Place ``e`` with count 1, appending unless ``index`` names a slot to overwrite."""
    e = _vec(e, memory.dim)
    if index is None:
        if memory.is_full:
            raise ValueError("memory is full")
        index = memory.size
        memory.size += 1
    memory.positions[index] = e
    memory.counts[index] = 1.0
    memory.born[index] = memory.steps_processed
    return index


def process(memory: RecodeMemory, e) -> float:
    return memory.process(e)
