# relevation_lab/rng.py

# Counter-based uniform streams. The uniform at position i of replication r is a
# pure function of (master seed, r, i): Philox is keyed from the seed and the
# replication index occupies the high counter word, so no state is shared
# between replications or threads.

from typing import Iterator, Sequence

import numpy as np

from relevation_lab.errors import ConfigError

_LANES = 4  # Philox4x64 emits four words per counter step
_MANTISSA = 2.0 ** 52


def to_unit(raw: np.ndarray) -> np.ndarray:
    """Top 52 bits of each word, centred in its cell: (k + 1/2)/2⁵², strictly inside (0,1)."""
    return ((np.asarray(raw, dtype=np.uint64) >> np.uint64(12)).astype(np.float64) + 0.5) / _MANTISSA


class UniformStreams:
    def __init__(self, seed: int):
        if seed is None or int(seed) < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
        self.seed = int(seed)
        self._key = np.random.SeedSequence(self.seed).generate_state(2, dtype=np.uint64)

    def block(self, replication: int, start: int, size: int) -> np.ndarray:
        """Uniforms at positions start..start+size-1 of one replication's stream, strictly inside (0,1)."""
        if start % _LANES:
            raise ValueError(f"block start must be a multiple of {_LANES}, got {start}")
        counter = np.array([start // _LANES, 0, 0, replication], dtype=np.uint64)
        bitgen = np.random.Philox(key=self._key, counter=counter)
        raw = bitgen.random_raw(size)
        return to_unit(raw)

    def matrix(self, replications: Sequence[int], size: int, start: int = 0) -> np.ndarray:
        """Rows are replications, columns stream positions start..start+size-1."""
        out = np.empty((len(replications), size))
        for row, replication in enumerate(replications):
            out[row] = self.block(int(replication), start, size)
        return out

    def stream(self, replication: int, block_size: int = 64) -> Iterator[float]:
        """Endless uniform stream of one replication, drawn block by block."""
        start = 0
        while True:
            for u in self.block(replication, start, block_size):
                yield float(u)
            start += block_size
