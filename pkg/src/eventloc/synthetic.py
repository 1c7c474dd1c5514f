"""Synthetic protest articles with planted location collocation signatures.

Correct locations tend to appear as "... of <Province> province" and
incorrect ones as datelines ("<Province>, Dec 3 (AFP)") or in front of
actor nouns ("<Province> farmers"). Each mention draws its template from
the opposite pool with a small probability; articles with two true
locations are noisier than single-location ones.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .lexicon import SUBPROVINCE, load_location_lexicon
from .preprocess import Document

ACTORS = ["workers", "villagers", "farmers", "residents", "students", "retirees", "petitioners"]
MONTHS = ["Jan", "Feb", "March", "April", "June", "July", "Aug", "Sept", "Oct", "Nov", "Dec"]
DAYS = ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"]
SOURCES = ["AFP", "AP", "Reuters", "Xinhua"]
DIRECTIONS = ["northern", "southern", "eastern", "western", "central"]

CORRECT_PROVINCE = [
    "More than {n} {actor} protested outside the offices of {P} province on {day}.",
    "Thousands of {actor} blocked a highway in the capital of {P} province demanding unpaid wages.",
    "Police clashed with {actor} in the {dir} part of {P} province after the rally.",
    "Hundreds of angry {actor} staged a strike at a factory of {P} province.",
]
CORRECT_CITY = [
    "About {n} {actor} rallied near a factory in {C} city of {P} province.",
    "Riot police dispersed {actor} who blocked the main road of {C} county on {day}.",
    "The {actor} demonstrated outside a government building in {C} of {P} province.",
]
INCORRECT = [
    "{P}, {month} {d} ({source}) - ",
    "{P} {actor} were not involved in the dispute, a spokesman said.",
    "A government spokesman told reporters from {P} that the report was false.",
    "Officials travelled to {P} to attend a meeting in {month}.",
    "A similar case was reported in {P} in {month} last year.",
]
FILLER = [
    "The {actor} said they had not been paid for {n} months.",
    "Local officials declined to comment on the incident.",
    "A rights group said {n} people were detained.",
    "The dispute has dragged on for years, residents told reporters.",
    "Witnesses said the crowd dispersed later in the evening.",
]


@dataclass(frozen=True)
class Places:
    provinces: list[str]
    cities: dict[str, list[str]]


def default_lexicon_dir() -> Path:
    return Path(str(resources.files("eventloc") / "data" / "lexicons" / "china"))


def load_places(lexicon_dir=None) -> Places:
    lex = load_location_lexicon(Path(lexicon_dir or default_lexicon_dir()) / "locations.tsv")
    provinces = sorted({e.province for e in lex.entries.values()})
    cities: dict[str, list[str]] = {p: [] for p in provinces}
    for surface, entry in sorted(lex.entries.items()):
        if entry.level == SUBPROVINCE:
            cities[entry.province].append(surface)
    # single-token names keep the focal windows comparable across articles
    provinces = [p for p in provinces if " " not in p]
    return Places(provinces, cities)


def _fill(template: str, rng: random.Random, province: str, city: str | None) -> str:
    return template.format(
        P=province.title(),
        C=(city or province).title(),
        n=rng.choice([20, 50, 200, 300, 500, 1000, 2000]),
        d=rng.randint(1, 28),
        actor=rng.choice(ACTORS),
        month=rng.choice(MONTHS),
        day=rng.choice(DAYS),
        source=rng.choice(SOURCES),
        dir=rng.choice(DIRECTIONS),
    )


def _correct_sentence(rng, province, places):
    cities = places.cities.get(province, [])
    if cities and rng.random() < 0.4:
        return _fill(rng.choice(CORRECT_CITY), rng, province, rng.choice(cities))
    return _fill(rng.choice(CORRECT_PROVINCE), rng, province, None)


def _incorrect_sentence(rng, province, places):
    return _fill(rng.choice(INCORRECT[1:]), rng, province, None)


def generate_corpus(
    n_articles: int = 60,
    seed: int = 0,
    *,
    noise: float = 0.1,
    hard_noise: float = 0.4,
    multi_true_share: float = 0.3,
    lexicon_dir=None,
) -> tuple[list[Document], dict[str, dict[str, int]]]:
    """Return (documents, labels) for ``n_articles`` synthetic stories."""
    rng = random.Random(seed)
    places = load_places(lexicon_dir)
    docs: list[Document] = []
    labels: dict[str, dict[str, int]] = {}
    for a in range(n_articles):
        story_id = f"syn{a:04d}"
        hard = rng.random() < multi_true_share
        n_true = 2 if hard else 1
        n_false = rng.choice([1, 1, 2]) if not hard else rng.choice([1, 2])
        chosen = rng.sample(places.provinces, n_true + n_false)
        truth = {p: int(i < n_true) for i, p in enumerate(chosen)}
        flip = hard_noise if hard else noise

        parts: list[str] = []
        dateline = None
        false_locs = [p for p in chosen if not truth[p]]
        if rng.random() < 0.5:
            dateline = false_locs[0]
            parts.append(_fill(INCORRECT[0], rng, dateline, None))
        body: list[str] = []
        for p in chosen:
            if p == dateline:
                continue
            correct_style = truth[p] == 1
            if rng.random() < flip:
                correct_style = not correct_style
            make = _correct_sentence if correct_style else _incorrect_sentence
            for _ in range(rng.choice([1, 2]) if truth[p] else 1):
                body.append(make(rng, p, places))
        for _ in range(rng.randint(1, 3)):
            body.append(_fill(rng.choice(FILLER), rng, chosen[0], None))
        rng.shuffle(body)
        text = parts[0] + " ".join(body) if parts else " ".join(body)
        docs.append(Document(story_id, text))
        labels[story_id] = truth
    return docs, labels


def write_jsonl(path, docs, labels) -> None:
    with open(path, "w") as fh:
        for d in docs:
            fh.write(json.dumps({"story_id": d.story_id, "text": d.raw_text,
                                 "labels": labels.get(d.story_id, {})}, sort_keys=True) + "\n")
