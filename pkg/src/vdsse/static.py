"""Privately verifiable static SSE.

Each keyword's posting list gets one extra pseudo-posting: a MAC over the
concatenated ids, keyed with a per-keyword key ``k_w = prf(K', w)``.  Only
the owner can derive ``k_w``, so a result lifted from another keyword, or any
edit to the list, fails the check.  The tag rides inside the encrypted list
and looks like any other slot to the cloud.
"""

from __future__ import annotations

import hmac
from dataclasses import dataclass
from typing import Mapping, Sequence

from . import metrics
from .crypto import Rng, prf, random_key
from .errors import DecodeError, IncompleteIndexError
from .sse import (
    DOC_ID_BYTES,
    SLOT_BYTES,
    EncryptedIndex,
    PlainDb,
    StaticToken,
    keyword_bytes,
    static_build,
    static_search_slots,
    static_search_token,
    validate_db,
)


@dataclass(frozen=True)
class StaticVKeys:
    base_key: bytes
    tag_master: bytes


@dataclass(frozen=True)
class StaticVerdict:
    ids: list[bytes]
    accepted: bool
    reason: str | None = None


def vs_keygen(rng: Rng | None = None) -> StaticVKeys:
    return StaticVKeys(random_key(rng), random_key(rng))


def keyword_key(keys: StaticVKeys, w: str) -> bytes:
    return prf(keys.tag_master, keyword_bytes(w))


def keyword_tag(keys: StaticVKeys, w: str, ids: Sequence[bytes]) -> bytes:
    # fixed-width ids: plain concatenation is injective
    return prf(keyword_key(keys, w), b"".join(ids))


def vs_build(
    keys: StaticVKeys, db: PlainDb, rng: Rng | None = None
) -> tuple[EncryptedIndex, dict[str, int]]:
    """Returns the index and the per-keyword slot counts the owner keeps.

    Keywords with no postings are left out entirely.
    """
    validate_db(db)
    augmented = {
        w: [*ids, keyword_tag(keys, w, ids)] for w, ids in db.items() if ids
    }
    counts = {w: len(slots) for w, slots in augmented.items()}
    return static_build(keys.base_key, augmented, rng), counts


def vs_search_token(keys: StaticVKeys, w: str, counts: Mapping[str, int]) -> StaticToken:
    return static_search_token(keys.base_key, w, counts)


def vs_cloud_search(index: EncryptedIndex, token: StaticToken) -> list[bytes]:
    return static_search_slots(index, token)


def vs_verify(keys: StaticVKeys, w: str, slots: Sequence[bytes] | None) -> StaticVerdict:
    """Owner-side check of the slots returned for ``w``.

    ``None`` means the cloud could not answer (an incomplete index).
    """
    if slots is None:
        return StaticVerdict([], False, "incomplete-index")
    if not slots:
        return StaticVerdict([], False, "missing-tag")
    *body, tag = slots
    if any(len(s) != SLOT_BYTES or any(s[DOC_ID_BYTES:]) for s in body) or len(tag) != SLOT_BYTES:
        return StaticVerdict([], False, "malformed")
    ids = [s[:DOC_ID_BYTES] for s in body]
    metrics.tick(metrics.TAG_MAC)
    if not hmac.compare_digest(keyword_tag(keys, w, ids), tag):
        return StaticVerdict([], False, "tag-mismatch")
    return StaticVerdict(ids, True)


def vs_search(
    keys: StaticVKeys, w: str, index: EncryptedIndex, counts: Mapping[str, int]
) -> StaticVerdict:
    """Honest end-to-end search: token, cloud lookup, owner verification."""
    token = vs_search_token(keys, w, counts)
    if token.count == 0:
        return StaticVerdict([], True)
    try:
        slots = vs_cloud_search(index, token)
    except (IncompleteIndexError, DecodeError):
        slots = None
    return vs_verify(keys, w, slots)
