"""Shared hypothesis strategies and random generators for the suite."""

import random

from hypothesis import strategies as st

from vdsse.sse import DOC_ID_BYTES

doc_ids = st.binary(min_size=DOC_ID_BYTES, max_size=DOC_ID_BYTES)
keywords = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=12
).filter(lambda w: len(w.encode()) <= 256)


@st.composite
def plain_dbs(draw, max_keywords=6, max_ids=8):
    ws = draw(st.lists(keywords, unique=True, max_size=max_keywords))
    pool = draw(st.lists(doc_ids, unique=True, min_size=1, max_size=max_ids))
    return {w: draw(st.lists(st.sampled_from(pool), unique=True)) for w in ws}


def random_plain_db(rng: random.Random, max_keywords: int = 50, max_pairs: int = 500) -> dict:
    """Random inverted db within the given keyword and pair budgets."""
    n_kw = rng.randint(1, max_keywords)
    n_docs = rng.randint(1, 60)
    docs = [rng.randbytes(DOC_ID_BYTES) for _ in range(n_docs)]
    budget = rng.randint(0, max_pairs)
    db = {}
    for j in range(n_kw):
        k = min(rng.randint(0, n_docs), budget)
        budget -= k
        db[f"w{j}"] = rng.sample(docs, k)
    return db
