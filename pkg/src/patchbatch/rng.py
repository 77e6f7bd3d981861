"""Named, reproducible random streams derived from one integer seed."""
import zlib

import numpy as np


def _key(k):
    if isinstance(k, str):
        return zlib.crc32(k.encode("utf-8"))
    return int(k)


def substream(seed, *keys):
    """Generator for the sub-stream ``keys`` of ``seed``.

    The same ``(seed, keys)`` always yields the same stream, and distinct
    key paths give statistically independent streams.
    """
    return np.random.default_rng([int(seed)] + [_key(k) for k in keys])
