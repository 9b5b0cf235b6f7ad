"""
Seed Management
Per-task random streams derived from a single master seed
"""

from typing import Iterable

import numpy as np


def _keys(keys: Iterable[int]) -> tuple:
    normalized = tuple(int(k) for k in keys)
    if any(k < 0 for k in normalized):
        raise ValueError(f"Stream keys must be non-negative, got {normalized}")
    return normalized


def task_rng(master_seed: int, *keys: int) -> np.random.Generator:
    """
    Independent generator for the task identified by `keys`

    The stream depends only on (master_seed, keys), never on the order in
    which tasks are executed.

    Args:
        master_seed: Run-level seed
        keys: Task coordinates, e.g. (randomization index, purpose)

    Returns:
        numpy Generator
    """
    sequence = np.random.SeedSequence(entropy=int(master_seed), spawn_key=_keys(keys))
    return np.random.default_rng(sequence)


def derive_seed(master_seed: int, *keys: int) -> int:
    """Integer seed for a sub-task, usable as the master seed of a nested plan"""
    sequence = np.random.SeedSequence(entropy=int(master_seed), spawn_key=_keys(keys))
    return int(sequence.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
