"""Counter-keyed random streams.

Every random variate is drawn from a generator whose key is the logical
identity of the draw (seed, sweep, role, indices), never a worker id, so
results do not depend on how work is split.
"""
import hashlib

import numpy as np

_ROLES = {}


def _role_code(role):
    # stable small integer per role name
    if role not in _ROLES:
        h = hashlib.blake2b(role.encode(), digest_size=4).digest()
        _ROLES[role] = int.from_bytes(h, "little")
    return _ROLES[role]


def key_words(seed, *key):
    words = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for k in key:
        words.append(_role_code(k) if isinstance(k, str) else int(k))
    return words


def stream(seed, *key) -> np.random.Generator:
    """Generator for the draw identity (seed, *key)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key_words(seed, *key))))


def beta1(u, c):
    """Beta(1, c) variates from uniforms by inverse CDF; stable for huge c."""
    return -np.expm1(np.log1p(-u) / c)
