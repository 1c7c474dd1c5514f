"""Heuristic geolocation rules used for comparison."""
from __future__ import annotations

from typing import Sequence

from ..features import sentence_frequency
from ..preprocess import TreatedDocument

ACTION_VERB = "ACTION-VERB"


def dictionary_baseline(rows: Sequence) -> list[int]:
    """Every gazetteer hit is an event location."""
    return [1] * len(rows)


def nearest_verb_baseline(doc: TreatedDocument) -> str:
    """Location nearest (in token offset) to any action verb in the article.

    Offsets run across sentence boundaries. Ties and verb-less articles
    fall back to the earliest mention.
    """
    if not doc.mentions:
        raise ValueError(f"story {doc.story_id} has no location mentions")
    starts, offset = [], 0
    for sent in doc.sentences:
        starts.append(offset)
        offset += len(sent)
    verbs = [
        starts[s] + t
        for s, sent in enumerate(doc.sentences)
        for t, tok in enumerate(sent)
        if tok == ACTION_VERB
    ]
    best = None
    for m in doc.mentions:
        pos = starts[m.sentence_idx] + m.token_idx
        dist = min((abs(pos - v) for v in verbs), default=0)
        key = (dist, pos)
        if best is None or key < best[0]:
            best = (key, m.canonical)
    return best[1]


def focus_baseline(doc: TreatedDocument) -> str:
    """Most frequently mentioned location (by sentences), earliest on ties."""
    locations = doc.locations
    if not locations:
        raise ValueError(f"story {doc.story_id} has no location mentions")
    return max(locations, key=lambda loc: (sentence_frequency(doc, loc), -locations.index(loc)))


def single_choice_predictions(doc: TreatedDocument, chosen: str) -> dict[str, int]:
    return {loc: int(loc == chosen) for loc in doc.locations}
