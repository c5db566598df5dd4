"""Counter-based random streams keyed by (seed, purpose, index).

Every Monte Carlo trial gets its own Philox stream derived from the run seed,
a purpose tag and the trial index.  Streams are independent of chunking and
worker count, so parallel runs reproduce serial runs bit-exactly.
"""

from __future__ import annotations

import numpy as np

# Purpose tags partition the key space so that e.g. the noise of trial 7 and
# the symbols of trial 7 never share a stream.
PURPOSE_H0 = 0
PURPOSE_H1 = 1
PURPOSE_SYMBOLS = 2
PURPOSE_COMM = 3
PURPOSE_MISC = 4

_MASK64 = (1 << 64) - 1


def substream(seed: int, purpose: int, index: int = 0) -> np.random.Generator:
    """Return the Generator for (seed, purpose, index)."""
    if index < 0 or index >= (1 << 56):
        raise ValueError(f"stream index out of range: {index}")
    key = np.array([seed & _MASK64, ((purpose & 0xFF) << 56) | index],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """i.i.d. unit-variance circular complex Gaussians."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) * np.sqrt(0.5)
