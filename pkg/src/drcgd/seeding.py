"""
Derived random streams.

Every random draw in an experiment comes from a generator seeded by
``derive_seed(master, purpose, index)``: the first 8 bytes (little endian)
of BLAKE2b over the UTF-8 text ``"<master>/<purpose>/<index>"``. Adding
agents or purposes never perturbs existing streams, and the mapping is
fixed across releases.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master: int, purpose: str, index: int = 0) -> int:
    text = f"{int(master)}/{purpose}/{int(index)}".encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


def derived_rng(master: int, purpose: str, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, purpose, index))
