"""Seeded corpora of sampled functions shared across test modules.

Two flavors:

* ``random_corpus`` — messy float values in [-10, 10] with a fraction of
  +inf sentinels; grids with arbitrary float endpoints.
* ``dyadic_corpus`` — grids and values chosen so every product x*y and
  difference x*y - f is exactly representable in float64 (endpoints and
  spacing are powers of two, values are multiples of 1/64).  On these
  inputs conjugation identities hold exactly and tests may assert bitwise
  equality.
"""

import numpy as np

from biconj import DualGrid, Grid, SampledFunction


def random_function(rng, nmax=512, inf_frac=0.10):
    n = int(rng.integers(3, nmax + 1))
    lo = float(rng.uniform(-8.0, -0.5))
    hi = float(rng.uniform(0.5, 8.0))
    vals = rng.uniform(-10.0, 10.0, size=n)
    mask = rng.random(n) < inf_frac
    if mask.all():
        mask[int(rng.integers(0, n))] = False
    vals[mask] = np.inf
    return SampledFunction(Grid(lo, hi, n), vals)


def random_corpus(seed, count, nmax=512, inf_frac=0.10):
    rng = np.random.default_rng(seed)
    return [random_function(rng, nmax=nmax, inf_frac=inf_frac) for _ in range(count)]


def dyadic_function(rng, with_inf=False):
    k = int(rng.integers(2, 7))
    n = 2**k + 1  # spacing = 2^(4-k), a power of two
    vals = rng.integers(-640, 641, size=n).astype(np.float64) / 64.0
    if with_inf:
        mask = rng.random(n) < 0.1
        if mask.all():
            mask[0] = False
        vals[mask] = np.inf
    return SampledFunction(Grid(-8.0, 8.0, n), vals)


def dyadic_corpus(seed, count, with_inf=False):
    rng = np.random.default_rng(seed)
    return [dyadic_function(rng, with_inf=with_inf) for _ in range(count)]


def dyadic_dual(m_exp=5):
    """Dual grid with power-of-two spacing, wide enough for dyadic corpora
    (slopes of values in [-10, 10] over spacing >= 1/4 stay within +-160)."""
    return DualGrid(-256.0, 256.0, 2**m_exp + 1)
