"""Embedding functions feeding the memory.

Fixed featurizers (one-hot, random projection, noise augmentation) for
controlled experiments, and a small numpy action-prediction model: an
encoder ``f`` and a classifier ``g`` trained so that ``g(f(o_t), f(o_t+1))``
predicts the action taken between the two observations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

import numpy as np


class EmbeddingFunction(Protocol):
    dim: int

    def __call__(self, obs: np.ndarray) -> np.ndarray: ...


def one_hot_embed(state_index: int, num_states: int) -> np.ndarray:
    if not 0 <= state_index < num_states:
        raise IndexError(f"state {state_index} out of range for {num_states} states")
    e = np.zeros(num_states)
    e[state_index] = 1.0
    return e


class Identity:
    """Pass observations through unchanged (e.g. already one-hot renders)."""

    def __init__(self, dim: int):
        self.dim = dim

    def __call__(self, obs):
        obs = np.asarray(obs, dtype=np.float64)
        if obs.shape != (self.dim,):
            raise ValueError(f"expected observation of shape ({self.dim},), got {obs.shape}")
        return obs


class RandomProjection:
    """Fixed Gaussian projection ``x -> A x`` with ``A`` drawn from ``seed``."""

    def __init__(self, in_dim: int, dim: int, seed: int = 0):
        self.in_dim, self.dim = in_dim, dim
        rng = np.random.default_rng(seed)
        self.matrix = rng.standard_normal((dim, in_dim)) / np.sqrt(dim)

    def __call__(self, obs):
        return random_projection_embed(obs, self.matrix)


def random_projection_embed(obs, matrix: np.ndarray) -> np.ndarray:
    obs = np.asarray(obs, dtype=np.float64)
    if obs.ndim != 1 or obs.shape[0] != matrix.shape[1]:
        raise ValueError(f"observation of shape {obs.shape} incompatible with {matrix.shape} projection")
    return matrix @ obs


def noise_augment(e, noise_dims: int, rng: np.random.Generator) -> np.ndarray:
    """Append ``noise_dims`` uniform coordinates spanning ``[min(e), max(e)]``.

    A constant embedding gets noise on ``[c, c + 1]``.
    """
    if noise_dims < 0:
        raise ValueError("noise_dims must be >= 0")
    e = np.asarray(e, dtype=np.float64)
    if noise_dims == 0:
        return e.copy()
    lo, hi = float(e.min()), float(e.max())
    if hi == lo:
        hi = lo + 1.0
    return np.concatenate([e, lo + (hi - lo) * rng.random(noise_dims)])


class NoiseAugmented:
    def __init__(self, base: EmbeddingFunction, noise_dims: int, seed: int = 0):
        self.base, self.noise_dims = base, noise_dims
        self.dim = base.dim + noise_dims
        self.rng = np.random.default_rng(seed)

    def __call__(self, obs):
        return noise_augment(self.base(obs), self.noise_dims, self.rng)


# ---------------------------------------------------------------------------
# Action prediction
# ---------------------------------------------------------------------------

PARAM_ORDER = ("enc_w1", "enc_b1", "enc_w2", "enc_b2", "cls_w1", "cls_b1", "cls_w2", "cls_b2")


@dataclass
class TransitionBatch:
    obs: np.ndarray  # (B, O)
    actions: np.ndarray  # (B,)
    next_obs: np.ndarray  # (B, O)

    def __post_init__(self):
        self.obs = np.atleast_2d(np.asarray(self.obs, dtype=np.float64))
        self.next_obs = np.atleast_2d(np.asarray(self.next_obs, dtype=np.float64))
        self.actions = np.asarray(self.actions, dtype=np.int64).reshape(-1)
        if len(self.actions) == 0:
            raise ValueError("empty transition batch")
        if not (len(self.obs) == len(self.next_obs) == len(self.actions)):
            raise ValueError("obs, actions and next_obs must have equal length")

    @classmethod
    def from_triples(cls, triples: Sequence[tuple]) -> "TransitionBatch":
        o, a, n = zip(*triples)
        return cls(np.stack(o), np.array(a), np.stack(n))

    def __len__(self):
        return len(self.actions)


@dataclass
class APModel:
    """Tanh encoder and tanh classifier over concatenated embeddings.

    Weights start uniform in ``[-init_scale, init_scale]``. Scales near 1e-2
    sit on the all-zero saddle, where the loss stays at log(num_actions).
    """

    obs_dim: int
    num_actions: int
    dim: int = 16
    hidden: int = 64
    cls_hidden: int = 64
    lr: float = 1e-2
    init_scale: float = 0.5
    seed: int = 0
    params: dict = field(default=None, repr=False)

    def __post_init__(self):
        if self.params is None:
            rng = np.random.default_rng(self.seed)
            shapes = self.shapes()
            self.params = {
                name: rng.uniform(-self.init_scale, self.init_scale, size=shapes[name])
                for name in PARAM_ORDER
            }

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {
            "enc_w1": (self.hidden, self.obs_dim),
            "enc_b1": (self.hidden,),
            "enc_w2": (self.dim, self.hidden),
            "enc_b2": (self.dim,),
            "cls_w1": (self.cls_hidden, 2 * self.dim),
            "cls_b1": (self.cls_hidden,),
            "cls_w2": (self.num_actions, self.cls_hidden),
            "cls_b2": (self.num_actions,),
        }

    # encoder only; this is what the memory sees
    def encode(self, obs):
        p = self.params
        obs = np.asarray(obs, dtype=np.float64)
        return np.tanh(obs @ p["enc_w1"].T + p["enc_b1"]) @ p["enc_w2"].T + p["enc_b2"]

    def __call__(self, obs):
        return self.encode(obs)

    def _forward(self, obs, next_obs):
        p = self.params
        a_t = np.tanh(obs @ p["enc_w1"].T + p["enc_b1"])
        a_n = np.tanh(next_obs @ p["enc_w1"].T + p["enc_b1"])
        z = np.concatenate([a_t @ p["enc_w2"].T + p["enc_b2"], a_n @ p["enc_w2"].T + p["enc_b2"]], axis=1)
        h = np.tanh(z @ p["cls_w1"].T + p["cls_b1"])
        logits = h @ p["cls_w2"].T + p["cls_b2"]
        logits = logits - logits.max(axis=1, keepdims=True)
        probs = np.exp(logits)
        probs /= probs.sum(axis=1, keepdims=True)
        return probs, (a_t, a_n, z, h)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.params[n].ravel() for n in PARAM_ORDER])

    def set_flat(self, vec: np.ndarray) -> None:
        i = 0
        for name, shape in self.shapes().items():
            size = int(np.prod(shape))
            self.params[name] = np.array(vec[i : i + size]).reshape(shape)
            i += size

    def save(self, path) -> None:
        save_model(self, path)


def ap_forward(model: APModel, o_t, o_next) -> np.ndarray:
    """Action probabilities; a single pair gives a 1-D vector, batches give (B, A)."""
    o_t, o_next = np.asarray(o_t, dtype=np.float64), np.asarray(o_next, dtype=np.float64)
    single = o_t.ndim == 1
    probs, _ = model._forward(np.atleast_2d(o_t), np.atleast_2d(o_next))
    return probs[0] if single else probs


def ap_loss(model: APModel, batch: TransitionBatch) -> float:
    probs, _ = model._forward(batch.obs, batch.next_obs)
    picked = probs[np.arange(len(batch)), batch.actions]
    return float(np.mean(-np.log(picked)))


def ap_gradients(model: APModel, batch: TransitionBatch) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and its gradient with respect to every parameter block."""
    p = model.params
    B = len(batch)
    probs, (a_t, a_n, z, h) = model._forward(batch.obs, batch.next_obs)
    loss = float(np.mean(-np.log(probs[np.arange(B), batch.actions])))

    d_logits = probs.copy()
    d_logits[np.arange(B), batch.actions] -= 1.0
    d_logits /= B
    g = {"cls_w2": d_logits.T @ h, "cls_b2": d_logits.sum(0)}
    d_hpre = (d_logits @ p["cls_w2"]) * (1.0 - h**2)
    g["cls_w1"] = d_hpre.T @ z
    g["cls_b1"] = d_hpre.sum(0)
    dz = d_hpre @ p["cls_w1"]
    D = model.dim
    g["enc_w2"] = np.zeros_like(p["enc_w2"])
    g["enc_b2"] = np.zeros_like(p["enc_b2"])
    g["enc_w1"] = np.zeros_like(p["enc_w1"])
    g["enc_b1"] = np.zeros_like(p["enc_b1"])
    for obs, act, dzi in ((batch.obs, a_t, dz[:, :D]), (batch.next_obs, a_n, dz[:, D:])):
        g["enc_w2"] += dzi.T @ act
        g["enc_b2"] += dzi.sum(0)
        d_apre = (dzi @ p["enc_w2"]) * (1.0 - act**2)
        g["enc_w1"] += d_apre.T @ obs
        g["enc_b1"] += d_apre.sum(0)
    return loss, g


class NonFiniteGradient(FloatingPointError):
    pass


def ap_train_step(model: APModel, batch: TransitionBatch) -> float:
    """One full-batch gradient descent step; returns the loss before the update."""
    loss, grads = ap_gradients(model, batch)
    if not all(np.all(np.isfinite(g)) for g in grads.values()):
        raise NonFiniteGradient("non-finite gradient; step skipped")
    for name, gr in grads.items():
        model.params[name] = model.params[name] - model.lr * gr
    return loss


GradFn = Callable[[APModel, TransitionBatch], tuple]


def ap_grad_check(
    model: APModel,
    batch: TransitionBatch,
    num_samples: int = 240,
    h: float = 1e-5,
    seed: int = 0,
    grad_fn: GradFn = ap_gradients,
) -> float:
    """Max relative error between ``grad_fn`` and central differences.

    Parameters are sampled evenly across the blocks (at least
    ``num_samples // 8`` from each) so a fault in any single block shows up.
    """
    rng = np.random.default_rng(seed)
    _, grads = grad_fn(model, batch)
    per_block = max(1, num_samples // len(PARAM_ORDER))
    worst = 0.0
    for name in PARAM_ORDER:
        block = model.params[name]
        idx = rng.choice(block.size, size=min(per_block, block.size), replace=False)
        flat = block.reshape(-1)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            up = ap_loss(model, batch)
            flat[i] = orig - h
            down = ap_loss(model, batch)
            flat[i] = orig
            numeric = (up - down) / (2 * h)
            analytic = grads[name].reshape(-1)[i]
            denom = max(abs(numeric), abs(analytic), 1e-8)
            worst = max(worst, abs(numeric - analytic) / denom)
    return worst


# ---------------------------------------------------------------------------
# Parameter file: text header with one "name shape" line per block, then values
# ---------------------------------------------------------------------------

MODEL_MAGIC = "# apmodel-params v1"


def save_model(model: APModel, path) -> None:
    lines = [MODEL_MAGIC]
    meta = dict(obs_dim=model.obs_dim, num_actions=model.num_actions, dim=model.dim,
                hidden=model.hidden, cls_hidden=model.cls_hidden, lr=model.lr,
                init_scale=model.init_scale, seed=model.seed)
    lines.append("# meta " + " ".join(f"{k}={v!r}" for k, v in meta.items()))
    for name in PARAM_ORDER:
        lines.append(f"# block {name} {'x'.join(map(str, model.params[name].shape))}")
    lines.extend(repr(float(x)) for x in model.flat())
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path) -> APModel:
    text = Path(path).read_text().splitlines()
    if not text or text[0] != MODEL_MAGIC:
        raise ValueError(f"{path}: not an apmodel parameter file")
    meta, shapes, values = {}, {}, []
    for line in text[1:]:
        if line.startswith("# meta "):
            for kv in line[len("# meta "):].split():
                k, v = kv.split("=")
                meta[k] = float(v) if k in ("lr", "init_scale") else int(v)
        elif line.startswith("# block "):
            _, _, name, shape = line.split()
            shapes[name] = tuple(int(s) for s in shape.split("x"))
        elif line:
            values.append(float(line))
    model = APModel(**meta)
    if shapes != {k: tuple(v) for k, v in model.shapes().items()}:
        raise ValueError(f"{path}: block shapes do not match header metadata")
    vec = np.array(values)
    if vec.size != model.flat().size:
        raise ValueError(f"{path}: expected {model.flat().size} values, found {vec.size}")
    model.set_flat(vec)
    return model
