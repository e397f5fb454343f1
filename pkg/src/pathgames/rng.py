"""Reproducible per-sample random streams.

Every Monte Carlo sample owns a Philox stream keyed by ``(seed, purpose)``
with the sample id in the high counter word, so results do not depend on how
samples are chunked across workers.
"""
import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_key(seed, purpose=""):
    """Fold a 64-bit seed and a purpose label into a Philox key."""
    digest = hashlib.sha256(f"{int(seed) & _MASK64}:{purpose}".encode()).digest()
    return np.frombuffer(digest[:16], dtype=np.uint64).copy()


def sample_generator(seed, sample_id, purpose=""):
    counter = np.zeros(4, dtype=np.uint64)
    counter[3] = np.uint64(sample_id)
    return np.random.Generator(np.random.Philox(key=derive_key(seed, purpose), counter=counter))


def standard_normals(seed, n_samples, shape, purpose="noise", first_sample=0):
    """Standard normal draws of shape ``(n_samples, *shape)``.

    Row ``i`` depends only on ``(seed, purpose, first_sample + i)``.
    """
    shape = tuple(int(s) for s in np.atleast_1d(shape))
    out = np.empty((n_samples,) + shape)
    for i in range(n_samples):
        out[i] = sample_generator(seed, first_sample + i, purpose).standard_normal(shape)
    return out


def child_seed(seed, label):
    """A new 64-bit seed derived from ``seed`` and a label."""
    digest = hashlib.sha256(f"{int(seed) & _MASK64}/{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def generator(seed, purpose=""):
    """A single stream for non-sample randomness (domains, random tests)."""
    return sample_generator(seed, 0, "single:" + purpose)
