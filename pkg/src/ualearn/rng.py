"""Random-stream helpers.

Every stochastic entry point in the library accepts either a
``numpy.random.Generator`` or a plain integer seed. Sub-streams are always
derived with ``Generator.spawn`` so that results do not depend on the order
in which independent pieces of work are executed.
"""
from __future__ import annotations

import numpy as np

SeedLike = "int | np.random.Generator | None"


def as_generator(rng: "int | np.random.Generator | None") -> np.random.Generator:
    """Coerce a seed or generator into a ``numpy.random.Generator``."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def derive_seed(base_seed: int, tag: int) -> int:
    """Deterministically derive an independent integer seed from a base seed."""
    return int(np.random.default_rng([base_seed, tag]).integers(2**63))
