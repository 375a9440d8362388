"""Per-trajectory random streams.

Every trajectory owns a Philox4x64 stream keyed by ``(seed, stream_id)``.
Philox is counter-based, so distinct keys give independent streams without
any shared state, and a stream depends only on its key -- never on which
worker runs it or in which order.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def stream(seed, stream_id=0):
    """Return the generator for ``(seed, stream_id)``.

    Parameters
    ----------
    seed : int
        64-bit run seed.
    stream_id : int
        Non-negative stream index, typically the trajectory number.
    """
    if stream_id < 0:
        raise ValueError("stream_id must be non-negative")
    key = (int(seed) & _MASK64) | ((int(stream_id) & _MASK64) << 64)
    return np.random.Generator(np.random.Philox(key=key))
