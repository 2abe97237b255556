"""Pairing-group arithmetic, BLS over an exponent-based bilinear hash, and
the symmetric primitives (hash, HMAC PRF, indexed PRG, document names).

Group layout on BLS12-381: signatures, bilinear hashes and proofs live in
G1; the public key lives in G2.  The verification equation
``e(sigma, g2) == e(g1^m, pk)`` is the symmetric one with each side moved to
the group it belongs to.

Scalars are plain ``int`` values in ``[0, Q)``.
"""

from __future__ import annotations

import hashlib
import hmac
import secrets
from dataclasses import dataclass
from typing import Protocol

from petrelic.multiplicative.pairing import (
    G1,
    G2,
    GT,
    G1Element,
    G2Element,
    GTElement,
)

from . import metrics
from .errors import DecodeError

__all__ = [
    "Q",
    "P",
    "LAMBDA_BYTES",
    "G1Element",
    "G2Element",
    "GTElement",
    "BlsKeyPair",
    "g1",
    "g2",
    "identity",
    "hash_to_scalar",
    "bilinear_hash",
    "pairing",
    "bls_gen",
    "bls_sign",
    "bls_verify",
    "prf",
    "prg_block",
    "doc_name",
    "random_key",
    "encode_scalar",
    "decode_scalar",
    "encode_g1",
    "decode_g1",
    "encode_g2",
    "decode_g2",
    "encode_gt",
    "decode_gt",
]

Q = int(G1.order())
P = 0x1A0111EA397FE69A4B1BA7B6434BACD764774B84F38512BF6730D2A0F6B0F6241EABFFFEB153FFFFB9FEFFFFFFFFAAAB

LAMBDA_BYTES = 32
SCALAR_BYTES = 32
G1_BYTES = 48
G2_BYTES = 96
GT_BYTES = 384

# domain-separation tags; never contain NUL so ``tag || 0x00 || data`` is prefix-free
TAG_H2S = b"h2s"
TAG_R = b"r"
TAG_LOC = b"loc"
TAG_CHAIN = b"chain"
TAG_MASK = b"mask"
TAG_DOCNAME = b"docname"


class Rng(Protocol):
    def randbytes(self, n: int) -> bytes: ...

    def randrange(self, stop: int) -> int: ...


_system_rng = secrets.SystemRandom()


def default_rng() -> Rng:
    return _system_rng


def g1() -> G1Element:
    return G1.generator()


def g2() -> G2Element:
    return G2.generator()


def identity() -> G1Element:
    return G1.neutral_element()


def _dsep(tag: bytes, data: bytes) -> bytes:
    return tag + b"\x00" + data


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def tagged_hash(tag: bytes, data: bytes) -> bytes:
    """32-byte domain-separated SHA-256."""
    return sha256(_dsep(tag, data))


def random_key(rng: Rng | None = None) -> bytes:
    return (rng or _system_rng).randbytes(LAMBDA_BYTES)


# -- scalars and the bilinear hash -------------------------------------------


def hash_to_scalar(msg: bytes) -> int:
    """SHA-512 of the tagged message, read big-endian and reduced mod Q."""
    wide = hashlib.sha512(_dsep(TAG_H2S, msg)).digest()
    return int.from_bytes(wide, "big") % Q


def bilinear_hash(msg: bytes) -> G1Element:
    return g1() ** hash_to_scalar(msg)


def pairing(a: G1Element, b: G2Element) -> GTElement:
    metrics.tick(metrics.PAIRING)
    return a.pair(b)


# -- BLS ------------------------------------------------------------------------


@dataclass(frozen=True)
class BlsKeyPair:
    sk: int
    pk: G2Element

    @classmethod
    def from_secret(cls, sk: int) -> "BlsKeyPair":
        """Build a key pair from a fixed secret. No degeneracy check."""
        sk %= Q
        return cls(sk, g2() ** sk)


def bls_gen(rng: Rng | None = None) -> BlsKeyPair:
    rng = rng or _system_rng
    while True:
        sk = rng.randrange(Q)
        # sk in {0, 1} gives pk = identity or pk = g2
        if sk > 1:
            return BlsKeyPair.from_secret(sk)


def bls_sign(sk: int, m: int) -> G1Element:
    return g1() ** (sk * m % Q)


def bls_verify(pk: G2Element, m: int, sigma: G1Element | bytes) -> bool:
    """Accept iff e(sigma, g2) == e(g1^m, pk).

    ``sigma`` may be passed as its encoding; a malformed encoding rejects.
    """
    if isinstance(sigma, (bytes, bytearray)):
        try:
            sigma = decode_g1(bytes(sigma))
        except DecodeError:
            return False
    return pairing(sigma, g2()) == pairing(g1() ** (m % Q), pk)


# -- symmetric primitives ---------------------------------------------------


def prf(key: bytes, data: bytes) -> bytes:
    return hmac.new(key, data, hashlib.sha256).digest()


def prg_block(seed: bytes, index: int) -> int:
    """The ``index``-th pseudo-random scalar of the stream seeded by ``seed``.

    Random access: two PRF blocks give 512 bits, reduced mod Q.
    """
    if index < 1:
        raise ValueError(f"prg index must be >= 1, got {index}")
    base = _dsep(TAG_R, index.to_bytes(8, "big"))
    wide = prf(seed, base + b"\x00") + prf(seed, base + b"\x01")
    return int.from_bytes(wide, "big") % Q


def doc_name(doc_id: bytes) -> bytes:
    return tagged_hash(TAG_DOCNAME, doc_id)


# -- canonical encodings ----------------------------------------------------


def encode_scalar(x: int) -> bytes:
    if not 0 <= x < Q:
        raise ValueError("scalar out of range")
    return x.to_bytes(SCALAR_BYTES, "big")


def decode_scalar(data: bytes) -> int:
    if len(data) != SCALAR_BYTES:
        raise DecodeError(f"scalar must be {SCALAR_BYTES} bytes, got {len(data)}")
    x = int.from_bytes(data, "big")
    if x >= Q:
        raise DecodeError("scalar not reduced mod Q")
    return x


def _fp_sqrt(a: int) -> int | None:
    y = pow(a, (P + 1) // 4, P)
    return y if y * y % P == a % P else None


def _fp2_mul(a: tuple[int, int], b: tuple[int, int]) -> tuple[int, int]:
    a0, a1 = a
    b0, b1 = b
    return ((a0 * b0 - a1 * b1) % P, (a0 * b1 + a1 * b0) % P)


def _fp2_pow(a: tuple[int, int], e: int) -> tuple[int, int]:
    out = (1, 0)
    while e:
        if e & 1:
            out = _fp2_mul(out, a)
        a = _fp2_mul(a, a)
        e >>= 1
    return out


def _fp2_sqrt(a: tuple[int, int]) -> tuple[int, int] | None:
    # p = 3 mod 4 square root in Fp[u]/(u^2 + 1)
    a1 = _fp2_pow(a, (P - 3) // 4)
    alpha = _fp2_mul(_fp2_mul(a1, a1), a)
    x0 = _fp2_mul(a1, a)
    if alpha == (P - 1, 0):
        x = (-x0[1] % P, x0[0])
    else:
        b = _fp2_pow(((1 + alpha[0]) % P, alpha[1]), (P - 1) // 2)
        x = _fp2_mul(b, x0)
    return x if _fp2_mul(x, x) == (a[0] % P, a[1] % P) else None


def _fp_larger(y: int) -> bool:
    return y > (P - y) % P


def _fp2_larger(y: tuple[int, int]) -> bool:
    return _fp_larger(y[1]) if y[1] else _fp_larger(y[0])


def _int48(b: bytes) -> int:
    return int.from_bytes(b, "big")


def _b48(x: int) -> bytes:
    return x.to_bytes(48, "big")


def _split_flags(data: bytes, size: int) -> tuple[bool, bool, bytes]:
    if len(data) != size:
        raise DecodeError(f"expected {size} bytes, got {len(data)}")
    flags = data[0] >> 5
    if not flags & 0b100:
        raise DecodeError("uncompressed form not accepted")
    infinity = bool(flags & 0b010)
    sign = bool(flags & 0b001)
    body = bytes([data[0] & 0x1F]) + data[1:]
    if infinity and (sign or any(body)):
        raise DecodeError("non-canonical point at infinity")
    return infinity, sign, body


def _in_subgroup(point, order_group) -> bool:
    return (point ** Q) == order_group.neutral_element()


def encode_g1(point: G1Element) -> bytes:
    """48-byte compressed encoding (BLS12-381 serialization convention)."""
    if point.is_neutral_element():
        return b"\xc0" + bytes(G1_BYTES - 1)
    raw = point.to_binary(compressed=False)
    x, y = raw[1:49], _int48(raw[49:97])
    out = bytearray(x)
    out[0] |= 0x80 | (0x20 if _fp_larger(y) else 0)
    return bytes(out)


def decode_g1(data: bytes) -> G1Element:
    infinity, sign, body = _split_flags(data, G1_BYTES)
    if infinity:
        return G1.neutral_element()
    x = _int48(body)
    if x >= P:
        raise DecodeError("x coordinate not reduced")
    y = _fp_sqrt((pow(x, 3, P) + 4) % P)
    if y is None:
        raise DecodeError("point not on curve")
    if _fp_larger(y) != sign:
        y = (P - y) % P
    point = G1Element.from_binary(b"\x04" + _b48(x) + _b48(y))
    if not point.is_valid() or not _in_subgroup(point, G1):
        raise DecodeError("point not in the prime-order subgroup")
    return point


def encode_g2(point: G2Element) -> bytes:
    """96-byte compressed encoding; x is written as (c1, c0)."""
    if point.is_neutral_element():
        return b"\xc0" + bytes(G2_BYTES - 1)
    raw = point.to_binary(compressed=False)
    x0, x1 = raw[1:49], raw[49:97]
    y = (_int48(raw[97:145]), _int48(raw[145:193]))
    out = bytearray(x1 + x0)
    out[0] |= 0x80 | (0x20 if _fp2_larger(y) else 0)
    return bytes(out)


def decode_g2(data: bytes) -> G2Element:
    infinity, sign, body = _split_flags(data, G2_BYTES)
    if infinity:
        return G2.neutral_element()
    x1, x0 = _int48(body[:48]), _int48(body[48:])
    if x0 >= P or x1 >= P:
        raise DecodeError("x coordinate not reduced")
    x = (x0, x1)
    x3 = _fp2_mul(_fp2_mul(x, x), x)
    y = _fp2_sqrt(((x3[0] + 4) % P, (x3[1] + 4) % P))
    if y is None:
        raise DecodeError("point not on curve")
    if _fp2_larger(y) != sign:
        y = ((P - y[0]) % P, (P - y[1]) % P)
    point = G2Element.from_binary(
        b"\x04" + _b48(x0) + _b48(x1) + _b48(y[0]) + _b48(y[1])
    )
    if not point.is_valid() or not _in_subgroup(point, G2):
        raise DecodeError("point not in the prime-order subgroup")
    return point


def encode_gt(elem: GTElement) -> bytes:
    return elem.to_binary()


def decode_gt(data: bytes) -> GTElement:
    if len(data) != GT_BYTES:
        raise DecodeError(f"expected {GT_BYTES} bytes, got {len(data)}")
    elem = GTElement.from_binary(data)
    if elem.to_binary() != data or not _in_subgroup(elem, GT):
        raise DecodeError("not a canonical target-group element")
    return elem
