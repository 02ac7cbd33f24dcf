"""
Seed handling. Every public API accepts an int, a SeedSequence or a Generator;
child streams are addressed by integer spawn keys so runs are reproducible.
"""
from typing import Union

import numpy as np

SeedLike = Union[None, int, np.random.SeedSequence, np.random.Generator]


def as_seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    """Normalize a seed to a SeedSequence"""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        # Draw entropy from the generator so the derived stream is still deterministic
        return np.random.SeedSequence(int(seed.integers(0, 2**63 - 1)))
    return np.random.SeedSequence(seed)


def make_rng(seed: SeedLike) -> np.random.Generator:
    """Return a PCG64 generator; Generators are passed through unchanged"""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(as_seed_sequence(seed)))


def derive_seed(seed: SeedLike, *keys: int) -> np.random.SeedSequence:
    """
    Child SeedSequence addressed by integer keys, e.g. (stream, holdout, model).
    The same root and keys always yield the same stream.
    """
    root = as_seed_sequence(seed)
    entropy = root.entropy if root.entropy is not None else 0
    return np.random.SeedSequence(entropy, spawn_key=tuple(root.spawn_key) + tuple(int(k) for k in keys))


def derive_int_seed(seed: SeedLike, *keys: int) -> int:
    """derive_seed collapsed to a plain integer, for configs and metadata files"""
    return int(derive_seed(seed, *keys).generate_state(1, dtype=np.uint64)[0])
