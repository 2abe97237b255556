"""Operation counters for the cost-shape checks.

Counting is off unless a caller opens a :func:`counting` block, so the hot
paths pay one context-variable lookup per event.
"""

from __future__ import annotations

from collections import Counter
from contextlib import contextmanager
from contextvars import ContextVar
from typing import Iterator

_active: ContextVar[Counter | None] = ContextVar("vdsse_counter", default=None)

PAIRING = "pairing"
SCALAR_MULADD = "scalar_muladd"
TSIG_LOOKUP = "tsig_lookup"
GROUP_MUL = "group_mul"
TAG_MAC = "tag_mac"


def tick(name: str, n: int = 1) -> None:
    counter = _active.get()
    if counter is not None:
        counter[name] += n


@contextmanager
def counting() -> Iterator[Counter]:
    """Collect operation counts for everything run inside the block.

    Nested blocks also report into the enclosing one.

    >>> with counting() as ops:
    ...     tick(PAIRING)
    >>> ops[PAIRING]
    1
    """
    outer = _active.get()
    counter: Counter = Counter()
    token = _active.set(counter)
    try:
        yield counter
    finally:
        _active.reset(token)
        if outer is not None:
            outer.update(counter)
