"""Arithmetic over GF(2^m).

Elements are plain ints in ``[0, 2**m)``. Addition is XOR, multiplication
goes through log/antilog tables built once per :class:`FieldSpec`. For
``m <= 8`` a full product table is also kept so that numpy code can do a
single fancy-index lookup per symbol array.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

DEFAULT_POLY = 0x11D  # x^8 + x^4 + x^3 + x^2 + 1
MAX_M = 16


def poly_degree(poly: int) -> int:
    return poly.bit_length() - 1


def _poly_mod(a: int, b: int) -> int:
    db = poly_degree(b)
    while a and poly_degree(a) >= db:
        a ^= b << (poly_degree(a) - db)
    return a


def is_irreducible(poly: int) -> bool:
    """True if ``poly`` has no factor of degree 1..deg/2 over GF(2)."""
    m = poly_degree(poly)
    if m < 1:
        return False
    for d in range(1, m // 2 + 1):
        for cand in range(1 << d, 1 << (d + 1)):
            if _poly_mod(poly, cand) == 0:
                return False
    return True


def _shift_mul(a: int, b: int, poly: int, m: int) -> int:
    # Russian-peasant multiply; also used to bootstrap the tables.
    top = 1 << m
    out = 0
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a <<= 1
        if a & top:
            a ^= poly
    return out


class FieldError(ValueError):
    """Raised for invalid field parameters or undefined field operations."""


@dataclass(frozen=True)
class FieldSpec:
    m: int = 8
    reduction_polynomial: int = DEFAULT_POLY

    def __post_init__(self):
        if not 1 <= self.m <= MAX_M:
            raise FieldError(f"m must be in [1, {MAX_M}], got {self.m}")
        if poly_degree(self.reduction_polynomial) != self.m:
            raise FieldError(
                f"polynomial {self.reduction_polynomial:#x} does not have degree {self.m}"
            )
        if not is_irreducible(self.reduction_polynomial):
            raise FieldError(f"polynomial {self.reduction_polynomial:#x} is reducible")

    @property
    def order(self) -> int:
        return 1 << self.m


# Lowest-weight irreducible polynomials for the non-default widths.
_DEFAULT_POLYS = {
    1: 0x3, 2: 0x7, 3: 0xB, 4: 0x13, 5: 0x25, 6: 0x43, 7: 0x83, 8: DEFAULT_POLY,
    9: 0x211, 10: 0x409, 11: 0x805, 12: 0x1053, 13: 0x201B, 14: 0x4443,
    15: 0x8003, 16: 0x1100B,
}


def default_spec(m: int = 8) -> FieldSpec:
    if m not in _DEFAULT_POLYS:
        raise FieldError(f"no default polynomial for m={m}")
    return FieldSpec(m, _DEFAULT_POLYS[m])


@dataclass(frozen=True, eq=False)
class GF:
    """Table-backed field. Build through :func:`field_for` to share tables."""

    spec: FieldSpec
    exp: np.ndarray = field(repr=False)
    log: np.ndarray = field(repr=False)
    generator: int
    mul_table: np.ndarray | None = field(repr=False, default=None)
    inv_table: np.ndarray | None = field(repr=False, default=None)

    @property
    def m(self) -> int:
        return self.spec.m

    @property
    def order(self) -> int:
        return self.spec.order

    @property
    def dtype(self):
        return np.uint8 if self.m <= 8 else np.uint16

    def _check(self, *vals: int) -> None:
        for v in vals:
            if not 0 <= v < self.order:
                raise FieldError(f"{v!r} is not an element of GF(2^{self.m})")

    def add(self, a: int, b: int) -> int:
        self._check(a, b)
        return a ^ b

    sub = add

    def mul(self, a: int, b: int) -> int:
        self._check(a, b)
        if a == 0 or b == 0:
            return 0
        return int(self.exp[int(self.log[a]) + int(self.log[b])])

    def inv(self, a: int) -> int:
        self._check(a)
        if a == 0:
            raise FieldError("zero has no multiplicative inverse")
        return int(self.exp[(self.order - 1) - int(self.log[a])])

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow(self, a: int, e: int) -> int:
        self._check(a)
        if a == 0:
            return 0 if e > 0 else 1
        return int(self.exp[(int(self.log[a]) * e) % (self.order - 1)])

    def vmul(self, a, b) -> np.ndarray:
        """Elementwise product of broadcastable integer arrays."""
        a = np.asarray(a)
        b = np.asarray(b)
        if self.mul_table is not None:
            return self.mul_table[a, b]
        la = self.log[a].astype(np.int64)
        lb = self.log[b].astype(np.int64)
        out = self.exp[la + lb].astype(self.dtype)
        return np.where((a == 0) | (b == 0), 0, out).astype(self.dtype)

    def vinv(self, a) -> np.ndarray:
        a = np.asarray(a)
        if np.any(a == 0):
            raise FieldError("zero has no multiplicative inverse")
        return self.exp[(self.order - 1) - self.log[a].astype(np.int64)].astype(self.dtype)


def _build(spec: FieldSpec) -> GF:
    q = spec.order
    poly, m = spec.reduction_polynomial, spec.m
    # The polynomial may be irreducible without x being primitive (0x11B), so
    # search for the smallest generator of the multiplicative group.
    for g in range(2, q) if q > 2 else [1]:
        exp = np.zeros(2 * q, dtype=np.int64)
        log = np.zeros(q, dtype=np.int64)
        x = 1
        ok = True
        for i in range(q - 1):
            if i > 0 and x == 1:
                ok = False
                break
            exp[i] = x
            log[x] = i
            x = _shift_mul(x, g, poly, m)
        if ok and x == 1:
            break
    else:  # pragma: no cover - irreducibility guarantees a generator
        raise FieldError("no primitive element found")
    # Doubled exp table so log[a] + log[b] needs no modulo.
    exp[q - 1: 2 * (q - 1)] = exp[: q - 1]
    dtype = np.uint8 if m <= 8 else np.uint16
    exp_t = exp.astype(dtype)
    mul_table = inv_table = None
    if m <= 8:
        a = np.arange(q)
        la = log[a][:, None] + log[a][None, :]
        mul_table = exp_t[la]
        mul_table[0, :] = 0
        mul_table[:, 0] = 0
        inv_table = np.zeros(q, dtype=dtype)
        inv_table[1:] = exp_t[(q - 1) - log[1:]]
    exp_t.setflags(write=False)
    log.setflags(write=False)
    if mul_table is not None:
        mul_table.setflags(write=False)
        inv_table.setflags(write=False)
    return GF(spec, exp_t, log, g, mul_table, inv_table)


@lru_cache(maxsize=None)
def field_for(spec: FieldSpec = FieldSpec()) -> GF:
    return _build(spec)


def gf_add(a: int, b: int, spec: FieldSpec = FieldSpec()) -> int:
    return field_for(spec).add(a, b)


def gf_mul(a: int, b: int, spec: FieldSpec = FieldSpec()) -> int:
    return field_for(spec).mul(a, b)


def gf_inv(a: int, spec: FieldSpec = FieldSpec()) -> int:
    return field_for(spec).inv(a)
