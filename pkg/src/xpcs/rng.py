"""Deterministic random streams.

Every random draw in the package comes from a Philox (counter-based) bit
generator keyed by a 64-bit master seed plus an arbitrary tuple of integer
stream keys.  Streams with different keys are statistically independent and
do not depend on the order in which they are created, so Monte-Carlo trials
can run in any order or in parallel and still reproduce bit for bit.
"""

import hashlib
import json

import numpy as np

_MASK64 = (1 << 64) - 1


def _check_seed(seed):
    seed = int(seed)
    if seed < 0 or seed > _MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def stream(seed, *keys):
    """Return a generator for the sub-stream ``keys`` of master ``seed``."""
    keys = tuple(int(k) & _MASK64 for k in keys)
    ss = np.random.SeedSequence(_check_seed(seed), spawn_key=keys)
    return np.random.Generator(np.random.Philox(ss))


def point_key(point):
    """Stable 63-bit key for a sweep point given as a mapping of parameters.

    Python's ``hash`` is salted per process, so a digest of the canonical JSON
    is used instead.
    """
    blob = json.dumps(point, sort_keys=True, default=str).encode()
    return int.from_bytes(hashlib.blake2b(blob, digest_size=8).digest(), "little") >> 1


def as_generator(rng):
    """Accept a Generator, a seed, or None (fresh entropy) and return a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return np.random.Generator(np.random.Philox())
    return stream(rng)
