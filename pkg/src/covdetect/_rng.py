"""Seed handling.

Splitting rule: every random object is drawn from its own stream,
``SeedSequence(entropy=seed, spawn_key=key)``, where ``key`` is a tuple of
small non-negative integers naming the object (cell index, trial index, role).
Streams therefore depend only on ``(seed, key)`` and never on the order in
which tasks are scheduled.
"""

import numpy as np

# Stream roles used inside a Monte-Carlo trial.
ROLE_SEQUENCES = 0
ROLE_SUPPORT = 1
ROLE_SIGNAL = 2
ROLE_SOLVER = 3
ROLE_SAMPLER = 4


def make_rng(seed, *key):
    """Return a Generator for ``(seed, key)``.

    ``seed`` may be an int, a ``SeedSequence``, an existing ``Generator``
    (returned unchanged when no key is given) or ``None`` (fresh entropy).
    """
    if isinstance(seed, np.random.Generator):
        if key:
            raise TypeError("cannot derive keyed streams from a Generator; pass an int seed")
        return seed
    if isinstance(seed, np.random.SeedSequence):
        if not key:
            return np.random.default_rng(seed)
        seq = np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(key))
        return np.random.default_rng(seq)
    if seed is None:
        if key:
            raise TypeError("keyed streams need an explicit seed")
        return np.random.default_rng()
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def complex_normal(rng, shape, variance=1.0):
    """Circularly-symmetric complex normal draws with E|z|^2 = variance."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
