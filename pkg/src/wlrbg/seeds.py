import hashlib

import numpy as np


def make_seed(rng=None):
    rng = get_rng(rng)
    return int(rng.integers(0, 2**63 - 1))


def normalize_seed(seed):
    if isinstance(seed, (bool, np.bool_)):
        raise TypeError(f"Not a seed: {seed!r}")
    if isinstance(seed, (int, np.integer)):
        return int(seed) % 2**64
    digest = hashlib.md5(str(seed).encode("utf-8")).hexdigest()
    return int(digest[:16], 16)


def derive_seed(seed, key):
    """A seed for the named stream `key` under `seed`.

    Streams with different keys are independent; the same (seed, key)
    pair always gives the same stream.
    """
    if seed is None:
        return None
    elif isinstance(seed, np.random.Generator):
        seed = make_seed(seed)
    return normalize_seed(f"{seed}-{key}")


def get_rng(seed=None):
    if seed is None:
        return np.random.default_rng()
    elif isinstance(seed, np.random.Generator):
        return seed
    else:
        return np.random.default_rng(normalize_seed(seed))
