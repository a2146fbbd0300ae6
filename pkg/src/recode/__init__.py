"""Clustering-based online density estimation for novelty rewards."""

from recode.memory import (
    NonFiniteEmbedding,
    RecodeConfig,
    RecodeMemory,
    RemovalStrategy,
)
from recode.normalizer import RewardNormalizer, normalize_reward

__all__ = [
    "NonFiniteEmbedding",
    "RecodeConfig",
    "RecodeMemory",
    "RemovalStrategy",
    "RewardNormalizer",
    "normalize_reward",
]
