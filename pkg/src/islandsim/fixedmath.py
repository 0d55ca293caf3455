"""Deterministic arithmetic primitives.

Everything that feeds world generation or simulation state goes through
this module so that identical inputs produce bit-identical outputs on
every platform:

  * counter-based hashing (splitmix64) instead of stateful Mersenne RNGs,
  * Q16.16 fixed-point quantization for spatial state,
  * integer nano-units (1e-9) for the energy ledger, and
  * polynomial sin/cos that only use IEEE-754 add/mul (libm sin/cos are
    not reproducible across C libraries).
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

# Spatial fixed point: 1/65536 m grid, serialized as int32 (Q16.16).
Q16 = 1 << 16

# Energy ledger unit: 1e-9 energy ("nano"). All the paper's constants are
# short decimals, so rounding to this grid makes ledger math exact.
NANO = 10**9


def splitmix64(x: int) -> int:
    """One splitmix64 step; the core hash for all seeded randomness."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def hash_combine(*parts: int) -> int:
    """Hash a tuple of integers into one 64-bit value."""
    h = 0x8C2F9D1B4E6A3705
    for p in parts:
        h = splitmix64((h ^ (p & MASK64)) & MASK64)
    return h


def hash_grid_u64(seed: int, tag: int, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 over a grid of (y, x) cell coordinates."""
    base = np.uint64(hash_combine(seed, tag))
    with np.errstate(over="ignore"):
        x = base ^ (ys.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)) \
                 ^ (xs.astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F))
        x = x + np.uint64(0x9E3779B97F4A7C15)
        z = x
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


class Rng:
    """Counter-based deterministic random stream.

    A stream is identified by (seed, stream id); draws advance a counter.
    Streams never interact, so entity order and world generation stay
    reproducible however many streams a caller splits off.
    """

    __slots__ = ("_key", "_counter")

    def __init__(self, seed: int, *stream: int):
        self._key = hash_combine(seed, *stream)
        self._counter = 0

    def split(self, *stream: int) -> "Rng":
        return Rng(self._key, 0x5EED, *stream)

    def u64(self) -> int:
        self._counter += 1
        return splitmix64((self._key ^ self._counter) & MASK64)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        u = self.u64() >> 11  # 53 bits
        return lo + (hi - lo) * (u * (2.0 ** -53))

    def randint(self, lo: int, hi: int) -> int:
        """Inclusive integer draw on [lo, hi]."""
        if hi < lo:
            raise ValueError("empty range")
        return lo + self.u64() % (hi - lo + 1)

    def choice(self, seq):
        return seq[self.randint(0, len(seq) - 1)]

    def shuffle(self, seq: list) -> list:
        out = list(seq)
        for i in range(len(out) - 1, 0, -1):
            j = self.randint(0, i)
            out[i], out[j] = out[j], out[i]
        return out

    def state(self) -> tuple:
        return (self._key, self._counter)

    def set_state(self, state: tuple) -> None:
        self._key, self._counter = state


def quantize(x: float) -> float:
    """Snap a scalar to the Q16.16 grid (round half away from zero-free)."""
    return round(x * Q16) / Q16


def to_q16(x: float) -> int:
    return int(round(x * Q16))


def from_q16(i: int) -> float:
    return i / Q16


def to_nano(x: float) -> int:
    """Round an energy value onto the 1e-9 ledger grid."""
    return int(round(x * NANO))


def from_nano(i: int) -> float:
    return i / NANO


_PI = 3.141592653589793
_TWO_PI = 6.283185307179586
_HALF_PI = 1.5707963267948966

# Taylor coefficients; |x| <= pi/2 after reduction keeps the truncation
# error below 1e-9, and evaluation uses only add/mul.
_SIN_C = (
    1.0,
    -1.0 / 6.0,
    1.0 / 120.0,
    -1.0 / 5040.0,
    1.0 / 362880.0,
    -1.0 / 39916800.0,
    1.0 / 6227020800.0,
)
_COS_C = (
    1.0,
    -1.0 / 2.0,
    1.0 / 24.0,
    -1.0 / 720.0,
    1.0 / 40320.0,
    -1.0 / 3628800.0,
    1.0 / 479001600.0,
)


def _poly(x2: float, coeffs) -> float:
    acc = coeffs[-1]
    for c in reversed(coeffs[:-1]):
        acc = acc * x2 + c
    return acc


def _reduce(x: float):
    """Map x to (r, quadrant) with r in [-pi/4-ish, pi/4-ish]."""
    k = x / _HALF_PI
    n = int(k + (0.5 if k >= 0 else -0.5))
    r = x - n * _HALF_PI
    return r, n & 3


def det_sin(x: float) -> float:
    r, q = _reduce(x)
    r2 = r * r
    s = r * _poly(r2, _SIN_C)
    c = _poly(r2, _COS_C)
    if q == 0:
        return s
    if q == 1:
        return c
    if q == 2:
        return -s
    return -c


def det_cos(x: float) -> float:
    return det_sin(x + _HALF_PI)


# Polynomial atan on [-1, 1]; max error ~1e-5 rad, plenty for steering.
_ATAN_C = (0.99997726, -0.33262347, 0.19354346,
           -0.11643287, 0.05265332, -0.01172120)


def _atan_unit(t: float) -> float:
    c = t * t
    return t * _poly(c, _ATAN_C)


def det_atan2(y: float, x: float) -> float:
    if x == 0.0 and y == 0.0:
        return 0.0
    ax, ay = abs(x), abs(y)
    if ax >= ay:
        a = _atan_unit(ay / ax)
    else:
        a = _HALF_PI - _atan_unit(ax / ay)
    if x < 0.0:
        a = _PI - a
    return -a if y < 0.0 else a


def det_hypot(x: float, y: float) -> float:
    # sqrt is correctly rounded by IEEE-754; math.hypot is not guaranteed
    # to be bit-stable across libms.
    return (x * x + y * y) ** 0.5
