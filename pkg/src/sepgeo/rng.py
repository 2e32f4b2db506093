"""Counter-based random streams.

Every random quantity in a production run is a pure function of
(master seed, trial index, draw index), so any trial can be regenerated in
isolation and clock replays never need to store the streams they consume.
The per-draw generator is the splitmix64 output function applied to a
counter; keys for independent streams are derived by hashing salts together.

The stream function has one implementation per backend: numba uses wrapping
uint64 scalars, the pure lane uses masked python ints (numpy scalar overflow
would warn on every draw).  Both produce identical bits.
"""

from __future__ import annotations

import numpy as np

from .backend import USE_NUMBA

U64 = np.uint64
MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
_INV53 = 1.0 / 9007199254740992.0  # 2^-53

if USE_NUMBA:
    import numba

    _GOLDEN_U = U64(GOLDEN)
    _MIX1_U = U64(MIX1)
    _MIX2_U = U64(MIX2)

    @numba.njit(inline="always", cache=True)
    def stream_u64(key, i):
        """i-th draw of the stream with the given key (splitmix64)."""
        z = key + (U64(i) + U64(1)) * _GOLDEN_U
        z = (z ^ (z >> U64(30))) * _MIX1_U
        z = (z ^ (z >> U64(27))) * _MIX2_U
        return z ^ (z >> U64(31))

    @numba.njit(inline="always", cache=True)
    def u64_to_unit(z):
        """Map a u64 draw to a double in [0, 1)."""
        return float(z >> U64(11)) * _INV53

else:

    def stream_u64(key, i):
        z = (int(key) + (int(i) + 1) * GOLDEN) & MASK64
        z = ((z ^ (z >> 30)) * MIX1) & MASK64
        z = ((z ^ (z >> 27)) * MIX2) & MASK64
        return z ^ (z >> 31)

    def u64_to_unit(z):
        return float(int(z) >> 11) * _INV53


def mix64(z: int) -> int:
    """splitmix64 finalizer on a python int (for key derivation)."""
    z = (z + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def derive_key(master_seed: int, *salts: int) -> np.uint64:
    """Independent stream key from a master seed and integer salts."""
    k = mix64(master_seed & MASK64)
    for s in salts:
        k = mix64(k ^ ((s & MASK64) * 0xD1342543DE82EF95 & MASK64))
    return U64(k)


def trial_generator(master_seed: int, trial: int, purpose: int = 0) -> np.random.Generator:
    """numpy Generator for per-trial auxiliary draws (checkpoint event counts)."""
    key = int(derive_key(master_seed, trial, 0xA5A5 + purpose))
    return np.random.Generator(np.random.Philox(key=key))
