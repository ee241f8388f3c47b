"""Reproducible random streams derived from a single master seed.

Every consumer gets its own counter-based stream keyed by
``(master_seed, component_name, index)``; the key is hashed into the
128-bit Philox key, so streams never collide and adding a new component
cannot perturb the randomness of an existing one.  Results are therefore
independent of how work is distributed over processes.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _philox_key(master_seed: int, component: str, index: int) -> int:
    payload = f"{int(master_seed)}/{component}/{int(index)}".encode()
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:16], "little")


def stream(master_seed: int, component: str, index: int = 0) -> np.random.Generator:
    """Return the generator for stream ``index`` of ``component``."""
    return np.random.Generator(np.random.Philox(key=_philox_key(master_seed, component, index)))


def substream_seed(master_seed: int, component: str, index: int = 0) -> int:
    """Stable 63-bit seed for handing to code that wants an integer seed."""
    return _philox_key(master_seed, component, index) % (2**63)
