"""
Seeded random streams

Every stream is numpy's Philox4x64 counter-based generator keyed by a
SeedSequence built from (seed, stream id), so identical seeds give identical
draws on every platform numpy supports.
"""

import numpy as np

ENVIRONMENT_STREAM = 0
POLICY_STREAM = 1
TRAJECTORY_STREAM = 2


def make_rng(seed, stream=ENVIRONMENT_STREAM):
    """
    Build an independent generator for one consumer of one run

    Args:
        seed: Non-negative run seed (64-bit)
        stream: Consumer id, keeps environment and policy draws apart

    Returns:
        numpy Generator backed by Philox
    """
    if seed < 0:
        raise ValueError(f"Seed must be non-negative, got {seed}")
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(sequence))
