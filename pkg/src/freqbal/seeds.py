"""Named-stream seed derivation.

Every experiment draws all of its randomness from one master seed; each
consumer (data generation, parameter init, shuffling) gets its own child
stream so that changing one stage never perturbs the others.
"""

import hashlib

import numpy as np


def stream_seed(master: int, name: str) -> int:
    """Derive a 64-bit child seed for stream `name` from the master seed."""
    digest = hashlib.sha256(f"{master}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def stream_rng(master: int, name: str) -> np.random.Generator:
    return np.random.default_rng(stream_seed(master, name))
