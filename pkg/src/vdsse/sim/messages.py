"""Wire messages exchanged by owner, cloud and auditor.

Payloads are plain JSON-able dicts whose byte strings travel as
``{"hex": "..."}``; group elements and scalars are always in their canonical
encodings, so a payload is exactly what a networked party would receive.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Any


class Kind(str, Enum):
    BUILD_UPLOAD = "BuildUpload"
    SEARCH_REQUEST = "SearchRequest"
    SEARCH_RESULT = "SearchResult"
    PROOF_CLOUD = "ProofCloud"
    PROOF_OWNER = "ProofOwner"
    VERDICT = "Verdict"
    UPDATE_UPLOAD = "UpdateUpload"


OWNER = "owner"
CLOUD = "cloud"
AUDITOR = "auditor"
ROLES = (OWNER, CLOUD, AUDITOR)

# who may send what to whom
ROUTES = {
    Kind.BUILD_UPLOAD: (OWNER, CLOUD),
    Kind.SEARCH_REQUEST: (OWNER, CLOUD),
    Kind.UPDATE_UPLOAD: (OWNER, CLOUD),
    Kind.SEARCH_RESULT: (CLOUD, OWNER),
    Kind.PROOF_CLOUD: (CLOUD, AUDITOR),
    Kind.PROOF_OWNER: (OWNER, AUDITOR),
    Kind.VERDICT: (AUDITOR, OWNER),
}


def to_jsonable(value: Any) -> Any:
    if isinstance(value, (bytes, bytearray)):
        return {"hex": bytes(value).hex()}
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, Enum):
        return value.value
    return value


def from_jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        if set(value) == {"hex"}:
            return bytes.fromhex(value["hex"])
        return {k: from_jsonable(v) for k, v in value.items()}
    if isinstance(value, list):
        return [from_jsonable(v) for v in value]
    return value


@dataclass(frozen=True)
class WireMessage:
    kind: Kind
    session: int
    payload: dict

    @property
    def sender(self) -> str:
        return ROUTES[self.kind][0]

    @property
    def receiver(self) -> str:
        return ROUTES[self.kind][1]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "session": self.session,
            "sender": self.sender,
            "receiver": self.receiver,
            "payload": to_jsonable(self.payload),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WireMessage":
        return cls(Kind(d["kind"]), int(d["session"]), from_jsonable(d["payload"]))

    def encode(self) -> bytes:
        return json.dumps(self.to_dict(), separators=(",", ":")).encode()

    @classmethod
    def decode(cls, data: bytes) -> "WireMessage":
        return cls.from_dict(json.loads(data))
