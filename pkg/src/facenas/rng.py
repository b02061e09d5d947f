"""Seed fan-out.

One global seed feeds every component through :func:`sub_seed`, which hashes
the component path (e.g. ``("search", "seed", 2)``) with SHA-256 and combines
it with the global seed via :class:`numpy.random.SeedSequence`. The mapping is
stable across processes and Python versions.
"""
import hashlib

import numpy as np


def _key_words(keys):
    text = "/".join(str(k) for k in keys).encode("utf-8")
    digest = hashlib.sha256(text).digest()
    return [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]


def sub_seed(seed: int, *keys) -> int:
    """A 32-bit child seed for the component named by ``keys``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *_key_words(keys)])
    return int(ss.generate_state(1)[0])


def make_rng(seed: int, *keys) -> np.random.Generator:
    return np.random.default_rng(sub_seed(seed, *keys) if keys else seed)
