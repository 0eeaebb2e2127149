"""Buffered uniform stream shared by the pure and compiled kernels.

Uniforms are consumed strictly one at a time, so a chain trajectory is
bit-identical regardless of which backend runs it and of how a run is split
across kernel calls (e.g. into tempering segments). Blocks grow geometrically
so that short runs do not pay for a large first block.
"""

import numpy as np

_FIRST_BLOCK = 1024
_MAX_BLOCK = 65536


class UniformStream:
    """Sequential float64 uniforms drawn in blocks from a numpy Generator."""

    __slots__ = ("generator", "buf", "pos", "_block")

    def __init__(self, generator):
        if not isinstance(generator, np.random.Generator):
            generator = np.random.default_rng(generator)
        self.generator = generator
        self._block = _FIRST_BLOCK
        self.buf = generator.random(self._block)
        self.pos = 0

    def refill(self):
        self._block = min(self._block * 4, _MAX_BLOCK)
        self.buf = self.generator.random(self._block)
        self.pos = 0

    def next(self):
        if self.pos >= self.buf.shape[0]:
            self.refill()
        u = self.buf[self.pos]
        self.pos += 1
        return float(u)


def as_stream(rng):
    """Wrap seeds and Generators; pass UniformStream instances through."""
    if isinstance(rng, UniformStream):
        return rng
    return UniformStream(rng)
