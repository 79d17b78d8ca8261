"""Stable seed derivation so that replicate streams do not depend on scheduling."""
import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(master_seed, label, index=0):
    """Child seed as a stable 64-bit hash of ``(master_seed, label, index)``."""
    payload = f"{int(master_seed) & _MASK64}:{label}:{int(index)}".encode()
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    return int.from_bytes(digest, "little")


def make_rng(seed, label=None, index=0):
    if label is not None:
        seed = derive_seed(seed, label, index)
    return np.random.default_rng(int(seed) & _MASK64)
