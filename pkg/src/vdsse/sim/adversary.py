"""Malicious-cloud strategies for the soundness game.

Every strategy sees the honest answer first and then decides what to send.
Each one is the strongest variant available to a cloud without ``sk``:

* DROP_ONE removes one id and divides its signature out of ``pf_c``, so
  the aggregate stays consistent with the shortened list.
* REPLAY_OTHER_KEYWORD replays the recorded answer of another keyword,
  preferring one with the same result size so the count check passes.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum

from ..crypto import G1Element, Q, g1
from ..errors import IncompleteIndexError, ProofUnavailableError
from ..forward import ADD, CloudResponder, CloudStructure, aggregate, position, vf_cloud_search
from ..sse import DOC_ID_BYTES, ChainSearchToken


class Strategy(str, Enum):
    HONEST = "HONEST"
    DROP_ONE = "DROP_ONE"
    REPLAY_OTHER_KEYWORD = "REPLAY_OTHER_KEYWORD"
    FLIP_ID_BIT = "FLIP_ID_BIT"
    FORGE_PROOF = "FORGE_PROOF"
    STALE_IGNORE_UPDATE = "STALE_IGNORE_UPDATE"


TAMPERING = tuple(s for s in Strategy if s is not Strategy.HONEST)

Results = list[tuple[bytes, int]]


@dataclass
class Answer:
    """What the cloud sends for one structure of one search."""

    results: Results | None
    pf_c: G1Element | None
    error: str | None = None
    tampered: bool = False


def honest_answer(store: CloudStructure, token: ChainSearchToken, tag: bytes) -> Answer:
    try:
        results, pf_c = vf_cloud_search(store.index, store.tsig, token, tag)
    except IncompleteIndexError:
        return Answer(None, None, "incomplete-index")
    except ProofUnavailableError:
        return Answer(None, None, "proof-unavailable")
    return Answer(results, pf_c)


@dataclass
class Adversary:
    strategy: Strategy = Strategy.HONEST
    seed: int = 0
    target: str = ADD
    _rng: random.Random = field(init=False, repr=False)
    _history: dict[bytes, Answer] = field(init=False, default_factory=dict, repr=False)
    _static_history: dict[bytes, list[bytes]] = field(init=False, default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self.strategy = Strategy(self.strategy)
        self._rng = random.Random(self.seed)

    def accept_update(self) -> bool:
        return self.strategy is not Strategy.STALE_IGNORE_UPDATE

    def respond(
        self,
        structure: str,
        store: CloudStructure,
        token: ChainSearchToken,
        tag: bytes,
        honest: Answer,
    ) -> Answer:
        answer = self._tamper(structure, store, tag, honest)
        if honest.error is None:
            self._history[tag] = honest
        return answer

    def _tamper(
        self, structure: str, store: CloudStructure, tag: bytes, honest: Answer
    ) -> Answer:
        s = self.strategy
        if s is Strategy.STALE_IGNORE_UPDATE and honest.error is not None:
            # best stale answer: what this tag returned before, else nothing
            old = self._history.get(tag)
            if old is None:
                return Answer([], g1() ** 0, tampered=True)
            return Answer(list(old.results), old.pf_c, tampered=True)
        if structure != self.target or honest.error is not None:
            return honest
        results = list(honest.results)
        if s is Strategy.DROP_ONE and results:
            results.pop(self._rng.randrange(len(results)))
            sigmas = [store.tsig.get(position(tag, d, i)) for d, i in results]
            return Answer(results, aggregate(sigmas), tampered=True)
        if s is Strategy.REPLAY_OTHER_KEYWORD:
            others = [a for t, a in self._history.items() if t != tag]
            if not others:
                return honest
            same = [a for a in others if len(a.results) == len(results)]
            pick = self._rng.choice(same or others)
            if pick.results == results:
                return honest
            return Answer(list(pick.results), pick.pf_c, tampered=True)
        if s is Strategy.FLIP_ID_BIT and results:
            j = self._rng.randrange(len(results))
            bit = self._rng.randrange(8 * DOC_ID_BYTES)
            doc_id, i = results[j]
            flipped = bytearray(doc_id)
            flipped[bit // 8] ^= 1 << (bit % 8)
            results[j] = (bytes(flipped), i)
            return Answer(results, honest.pf_c, tampered=True)
        if s is Strategy.FORGE_PROOF:
            if results:
                j = self._rng.randrange(len(results))
                results[j] = (self._rng.randbytes(DOC_ID_BYTES), results[j][1])
            forged = g1() ** self._rng.randrange(1, Q)
            return Answer(results, forged, tampered=True)
        return honest

    def respond_static(self, k1: bytes, honest: list[bytes]) -> list[bytes]:
        """Tamper with the decrypted slots of a static search.

        The last slot is the keyword tag; ids sit zero-padded in the others.
        ``k1`` identifies the keyword for replay purposes.
        """
        slots = list(honest)
        answer = self._tamper_static(k1, slots)
        self._static_history[k1] = list(honest)
        return answer

    def _tamper_static(self, k1: bytes, slots: list[bytes]) -> list[bytes]:
        s = self.strategy
        body = slots[:-1]
        if s is Strategy.DROP_ONE and body:
            slots.pop(self._rng.randrange(len(body)))
        elif s is Strategy.REPLAY_OTHER_KEYWORD:
            others = [v for t, v in self._static_history.items() if t != k1]
            if others:
                slots = list(self._rng.choice(others))
        elif s is Strategy.FLIP_ID_BIT and body:
            j = self._rng.randrange(len(body))
            bit = self._rng.randrange(8 * DOC_ID_BYTES)
            flipped = bytearray(slots[j])
            flipped[bit // 8] ^= 1 << (bit % 8)
            slots[j] = bytes(flipped)
        elif s is Strategy.FORGE_PROOF and slots:
            if body:
                j = self._rng.randrange(len(body))
                slots[j] = self._rng.randbytes(DOC_ID_BYTES) + slots[j][DOC_ID_BYTES:]
            slots[-1] = self._rng.randbytes(len(slots[-1]))
        return slots


_ERRORS = {"incomplete-index": IncompleteIndexError, "proof-unavailable": ProofUnavailableError}


def as_responder(adversary: Adversary) -> CloudResponder:
    """Wrap ``adversary`` for :func:`vdsse.forward.verified_search`."""

    def respond(structure, store, token, tag):
        answer = adversary.respond(structure, store, token, tag, honest_answer(store, token, tag))
        if answer.error is not None:
            raise _ERRORS[answer.error](answer.error)
        return answer.results, answer.pf_c

    return respond
