"""Counter-based random streams.

Every random draw in the package comes from ``Philox4x64`` keyed by the
128-bit integer ``seed + 2**64 * stream``. Sample ``i`` of an ensemble uses
``stream = i + 1`` (stream 0 is reserved for global draws), so results do not
depend on evaluation order or on how samples are distributed over workers.
"""
import numpy as np

_MASK = (1 << 64) - 1


def generator(seed, stream=0):
    key = (int(seed) & _MASK) | ((int(stream) & _MASK) << 64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_generator(seed, index):
    return generator(seed, index + 1)
