"""Counter-based random streams.

Every random quantity in the package flows through a :class:`SeededStream`,
an immutable (root_seed, stream_id) pair backed by the Philox-4x64 counter
cipher. The same pair always produces the same byte sequence, on any
platform, so parallel execution order can never change results. Substreams
are derived by mixing an index into the stream id with a splitmix64
finalizer; callers hand one substream to each independent unit of work
(Monte Carlo sample, replicate, trial) and draw sequentially inside it.

Gaussian variates use Box-Muller on the raw counter output rather than a
library sampler: ziggurat-style samplers are not specified bitwise, the
transform below is.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SeededStream", "StreamDrawer"]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / (1 << 53)


def _splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def _mix(stream_id: int, index: int) -> int:
    # Avalanche both words so substream(0) differs from the parent stream.
    return _splitmix64(_splitmix64(stream_id) ^ ((index + 1) * _GOLDEN & _MASK64))


@dataclass(frozen=True)
class SeededStream:
    """Immutable identifier of one random substream.

    Parameters
    ----------
    root_seed : int
        64-bit experiment-level seed.
    stream_id : int
        64-bit substream label; distinct ids give statistically
        independent streams (they key separate Philox ciphers).
    """

    root_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("root_seed", "stream_id"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not (0 <= int(v) <= _MASK64):
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v!r}")

    def substream(self, index: int) -> "SeededStream":
        """Deterministic child stream for the given work-unit index."""
        if index < 0:
            raise ValueError("substream index must be nonnegative")
        return SeededStream(self.root_seed, _mix(int(self.stream_id), int(index)))

    def open(self) -> "StreamDrawer":
        """Stateful drawer over this stream, starting at counter zero."""
        return StreamDrawer(self)


class StreamDrawer:
    """Sequential variate generator over one :class:`SeededStream`.

    Not thread-safe; each thread must open its own substream.
    """

    def __init__(self, stream: SeededStream):
        key = np.array([stream.root_seed, stream.stream_id], dtype=np.uint64)
        self._bitgen = np.random.Philox(key=key)
        self.stream = stream

    def raw(self, size: int) -> np.ndarray:
        """`size` raw 64-bit counter outputs."""
        return self._bitgen.random_raw(size)

    def uniforms(self, size: int) -> np.ndarray:
        """Doubles in [0, 1) with 53-bit resolution."""
        return (self.raw(size) >> np.uint64(11)).astype(np.float64) * _INV_2_53

    def uniforms_open(self, size: int) -> np.ndarray:
        """Doubles in (0, 1], safe as log arguments."""
        return ((self.raw(size) >> np.uint64(11)) + np.uint64(1)).astype(np.float64) * _INV_2_53

    def gaussians(self, size: int) -> np.ndarray:
        """Standard normals via Box-Muller on counter output."""
        pairs = (size + 1) // 2
        u1 = self.uniforms_open(pairs)
        u2 = self.uniforms(pairs)
        r = np.sqrt(-2.0 * np.log(u1))
        ang = (2.0 * np.pi) * u2
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(ang)
        z[1::2] = r * np.sin(ang)
        return z[:size]

    def rademacher(self, size: int) -> np.ndarray:
        """+-1 variates from the top counter bit."""
        bits = self.raw(size) >> np.uint64(63)
        return 1.0 - 2.0 * bits.astype(np.float64)

    def categorical(self, probs: np.ndarray, size: int) -> np.ndarray:
        """`size` iid indices j with probability probs[j].

        probs must be nonnegative and sum to 1 within 1e-9; the final
        cumulative bin absorbs rounding so every uniform lands somewhere.
        """
        p = np.asarray(probs, dtype=np.float64)
        if p.ndim != 1 or p.size == 0 or np.any(p < -1e-12):
            raise ValueError("probs must be a nonnegative vector")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("probs must sum to 1")
        cum = np.cumsum(p)
        cum[-1] = 1.0
        u = self.uniforms(size)
        return np.searchsorted(cum, u, side="right").astype(np.int64)

    def choose_indices(self, population: int, k: int) -> np.ndarray:
        """k distinct indices from range(population), order-insensitive draw.

        Partial Fisher-Yates driven by stream uniforms; the 2^-53 floor
        bias is irrelevant at this resolution.
        """
        if not (0 <= k <= population):
            raise ValueError("need 0 <= k <= population")
        pool = np.arange(population, dtype=np.int64)
        u = self.uniforms(k)
        for i in range(k):
            j = i + int(u[i] * (population - i))
            pool[i], pool[j] = pool[j], pool[i]
        return np.sort(pool[:k])
