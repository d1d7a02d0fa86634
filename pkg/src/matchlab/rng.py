"""Reproducible random-number streams.

All randomness in matchlab flows through numpy's Philox bit generator, a
counter-based generator whose streams are cheap to key. A stream is keyed
by a user-facing 64-bit seed plus an optional integer path (for example
``(trial_index,)``), hashed through ``numpy.random.SeedSequence``. Streams
with distinct (seed, path) keys are statistically independent, so trials
can be farmed out to any number of workers and still reproduce bit-for-bit:
the stream depends only on its key, never on scheduling.
"""

from __future__ import annotations

from numpy.random import Generator, Philox, SeedSequence


def stream(seed: int, *path: int) -> Generator:
    """Return the Generator keyed by ``seed`` and an optional integer path."""
    return Generator(Philox(SeedSequence((int(seed),) + tuple(int(p) for p in path))))
