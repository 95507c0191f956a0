"""Points y of [0, 1] given exactly (rational) or as a seeded lazy bit stream."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import PrecisionError
from .torus import DEFAULT_GUARD_BITS, HPScalar

BLOCK_BITS = 512
BLOCK_BYTES = BLOCK_BITS // 8
MASK64 = (1 << 64) - 1


@lru_cache(maxsize=1 << 16)
def _block(seed: int, index: int) -> bytes:
    h = hashlib.blake2b(digest_size=BLOCK_BYTES, person=b"shrinktgt-bits")
    h.update((seed & ((1 << 128) - 1)).to_bytes(16, "little"))
    h.update(index.to_bytes(8, "little"))
    return h.digest()


@dataclass(frozen=True)
class FractionalOracle:
    """y = 0.b_1 b_2 b_3 ... in binary.

    Bit b_{i+1} (0-based stream index i) of a bitstream oracle is a pure function
    of (seed, i), so extending the stream never changes earlier bits.
    """

    kind: str
    p: int = 0
    q: int = 1
    seed: int = 0
    guard_bits: int = DEFAULT_GUARD_BITS
    bit_cap: int = 1 << 31

    def __post_init__(self):
        if self.kind not in ("rational", "bitstream"):
            raise ValueError(f"unknown oracle kind {self.kind!r}")
        if self.guard_bits < 20:
            raise ValueError("guard_bits must be >= 20")
        if self.kind == "rational":
            if self.q <= 0 or not 0 <= self.p <= self.q:
                raise ValueError("rational oracle needs 0 <= p/q <= 1")

    @classmethod
    def rational(cls, p: int, q: int = 1, **kw) -> FractionalOracle:
        f = Fraction(p, q)
        return cls("rational", p=f.numerator, q=f.denominator, **kw)

    @classmethod
    def bitstream(cls, seed: int, **kw) -> FractionalOracle:
        return cls("bitstream", seed=int(seed), **kw)

    @property
    def is_exact(self) -> bool:
        return self.kind == "rational"

    @property
    def exact_value(self) -> Fraction:
        if self.kind != "rational":
            raise TypeError("bitstream oracles have no exact value")
        return Fraction(self.p, self.q)

    def _check(self, stop: int):
        if stop > self.bit_cap:
            raise PrecisionError(f"needs {stop} bits of y, above the cap {self.bit_cap}",
                                 required_bits=stop)

    def bits(self, start: int, count: int) -> int:
        """Stream bits start .. start+count-1 as an integer, first bit most significant."""
        if count <= 0:
            return 0
        self._check(start + count)
        if self.kind == "rational":
            # floor(2^(start+count) y) mod 2^count
            return (self.p << (start + count)) // self.q & ((1 << count) - 1)
        b0, b1 = start // BLOCK_BITS, (start + count - 1) // BLOCK_BITS
        raw = b"".join(_block(self.seed, i) for i in range(b0, b1 + 1))
        total = (b1 - b0 + 1) * BLOCK_BITS
        off = start - b0 * BLOCK_BITS
        return (int.from_bytes(raw, "big") >> (total - off - count)) & ((1 << count) - 1)

    def prefix(self, k: int) -> int:
        """Y with Y / 2**k <= y < (Y + 1) / 2**k (Y = 2**k only when y = 1)."""
        if self.kind == "rational":
            self._check(k)
            return (self.p << k) // self.q
        return self.bits(0, k)

    def window64(self, pos: int) -> int:
        """floor(2**64 * {2**pos * y})."""
        if self.kind == "rational":
            self._check(pos + 64)
            r = (self.p * pow(2, pos, self.q)) % self.q
            return (r << 64) // self.q
        return self.bits(pos, 64)

    def bit_array(self, count: int) -> np.ndarray:
        self._check(count)
        if self.kind == "rational":
            y = min(self.prefix(count), (1 << count) - 1)
            shift = (-count) % 8
            raw = (y << shift).to_bytes((count + 7) // 8, "big")
            return np.unpackbits(np.frombuffer(raw, dtype=np.uint8))[:count]
        nblocks = -(-count // BLOCK_BITS)
        raw = b"".join(_block(self.seed, i) for i in range(nblocks))
        return np.unpackbits(np.frombuffer(raw, dtype=np.uint8))[:count]

    def byte_array(self, nbytes: int) -> np.ndarray:
        """The first ``nbytes`` bytes of the binary expansion (big-endian bit order)."""
        self._check(8 * nbytes)
        if self.kind == "rational":
            y = min(self.prefix(8 * nbytes), (1 << (8 * nbytes)) - 1)  # y = 1 is 0.111...
            return np.frombuffer(y.to_bytes(nbytes, "big"), dtype=np.uint8)
        nblocks = -(-nbytes // BLOCK_BYTES)
        raw = b"".join(_block(self.seed, i) for i in range(nblocks))
        return np.frombuffer(raw[:nbytes], dtype=np.uint8)

    def value(self, precision: int = 128) -> HPScalar:
        if self.kind == "rational":
            return HPScalar(Fraction(self.p, self.q), Fraction(0), precision)
        return HPScalar(Fraction(self.prefix(precision), 1 << precision),
                        Fraction(1, 1 << precision), precision)

    def uniform53(self) -> float:
        return self.bits(0, 53) / float(1 << 53)

    def to_json(self) -> dict:
        if self.kind == "rational":
            return {"kind": "rational", "p": self.p, "q": self.q}
        return {"kind": "bitstream", "seed": self.seed, "guard_bits": self.guard_bits}
