"""Arithmetic in GF(2^k) for the polynomial tag scheme.

Elements are ints in [0, 2^k). Addition is xor; multiplication reduces
modulo a fixed irreducible polynomial per k, so results are stable
across runs and platforms. Field sizes here are tiny (k <= 16), hence
the shift-and-xor multiply needs no tables.
"""

from __future__ import annotations

# Irreducible polynomials over GF(2), one per degree, in bitmask form
# (bit i is the coefficient of x^i). Standard published choices.
_IRREDUCIBLE = {
    1: 0b11,
    2: 0b111,
    3: 0b1011,
    4: 0b10011,
    5: 0b100101,
    6: 0b1000011,
    7: 0b10000011,
    8: 0b100011011,
    9: 0b1000010001,
    10: 0b10000001001,
    11: 0b100000000101,
    12: 0b1000001010011,
    13: 0b10000000011011,
    14: 0b100010001000011,
    15: 0b1000000000000011,
    16: 0b10001000000001011,
}


class GF2m:
    """The field with 2^k elements."""

    __slots__ = ("k", "q", "poly")

    def __init__(self, k: int):
        if k not in _IRREDUCIBLE:
            raise ValueError(f"no modulus on record for k={k}")
        self.k = k
        self.q = 1 << k
        self.poly = _IRREDUCIBLE[k]

    def add(self, a: int, b: int) -> int:
        return a ^ b

    def mul(self, a: int, b: int) -> int:
        self._check(a)
        self._check(b)
        acc = 0
        top = 1 << self.k
        while b:
            if b & 1:
                acc ^= a
            b >>= 1
            a <<= 1
            if a & top:
                a ^= self.poly
        return acc

    def eval_poly(self, coeffs: list[int], x: int) -> int:
        """Evaluate sum coeffs[i] x^i by Horner's rule."""
        acc = 0
        for coef in reversed(coeffs):
            acc = self.mul(acc, x) ^ coef
        return acc

    def _check(self, a: int) -> None:
        if not (0 <= a < self.q):
            raise ValueError(f"{a} is not an element of GF({self.q})")
