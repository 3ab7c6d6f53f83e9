"""Deterministic random-number substreams.

Every stochastic stage derives its own counter-based generator from the run
seed and a stage label, so results are reproducible event-by-event and
independent of the order stages execute in.
"""

import hashlib

import numpy as np


def substream_key(seed: int, label: str) -> int:
    """128-bit Philox key derived from the run seed and a stage label."""
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:16], "little")


def substream(seed: int, label: str) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=substream_key(seed, label)))
