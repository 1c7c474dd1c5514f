"""Collocation-pattern corpora and per-location covariates."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .lexicon import SUBPROVINCE
from .preprocess import TreatedDocument

LOCATION = "LOCATION"
SUB_LOCATION = "SUB-LOCATION"
N_VALUES = tuple(range(2, 8))
NEUTRAL_RATIO = 0.5

MATERIAL_TAGS = frozenset({"ACTION-VERB"})
IMMATERIAL_TAGS = frozenset({"NONTOPIC", "SOURCE"})

SCOPES = ("article", "data")

Labels = Mapping[str, Mapping[str, int]]


class FeatureError(ValueError):
    pass


def _focal_positions(doc: TreatedDocument, canonical: str) -> dict[int, dict[int, str]]:
    focal: dict[int, dict[int, str]] = {}
    for m in doc.mentions:
        if m.canonical == canonical:
            placeholder = SUB_LOCATION if m.level == SUBPROVINCE else LOCATION
            focal.setdefault(m.sentence_idx, {})[m.token_idx] = placeholder
    if not focal:
        raise FeatureError(f"{canonical!r} is not mentioned in story {doc.story_id}")
    return focal


def collocation_ngrams(doc: TreatedDocument, canonical: str, n: int) -> Counter:
    """Every n-token window touching a mention of ``canonical``.

    Windows stay inside one sentence. Mentions of ``canonical`` become
    LOCATION or SUB-LOCATION; everything else is kept literally.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    patterns: Counter = Counter()
    for s_idx, positions in _focal_positions(doc, canonical).items():
        tokens = list(doc.sentences[s_idx])
        for pos, placeholder in positions.items():
            tokens[pos] = placeholder
        starts = set()
        for pos in positions:
            starts.update(range(max(0, pos - n + 1), min(pos, len(tokens) - n) + 1))
        for start in sorted(starts):
            patterns[" ".join(tokens[start : start + n])] += 1
    return patterns


def _top_half(counts: Mapping[str, int]) -> frozenset[str]:
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    keep = math.ceil(len(ranked) / 2)
    return frozenset(p for p, _ in ranked[:keep])


@dataclass(frozen=True)
class PatternCorpora:
    """Correct/incorrect pattern counts per n, built from training stories."""

    correct: Mapping[int, Mapping[str, int]]
    incorrect: Mapping[int, Mapping[str, int]]
    stories: frozenset[str] = frozenset()
    _top: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @property
    def n_values(self) -> tuple[int, ...]:
        return tuple(sorted(self.correct))

    def top_correct(self, n: int) -> frozenset[str]:
        return self._top_set("correct", n)

    def top_incorrect(self, n: int) -> frozenset[str]:
        return self._top_set("incorrect", n)

    def _top_set(self, side: str, n: int) -> frozenset[str]:
        key = (side, n)
        if key not in self._top:
            self._top[key] = _top_half(getattr(self, side)[n])
        return self._top[key]

    def to_dict(self) -> dict:
        return {
            "stories": sorted(self.stories),
            "correct": {str(n): dict(sorted(c.items())) for n, c in sorted(self.correct.items())},
            "incorrect": {str(n): dict(sorted(c.items())) for n, c in sorted(self.incorrect.items())},
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "PatternCorpora":
        return cls(
            correct={int(n): dict(c) for n, c in data["correct"].items()},
            incorrect={int(n): dict(c) for n, c in data["incorrect"].items()},
            stories=frozenset(data.get("stories", ())),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def fingerprint(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()


def build_pattern_corpora(
    docs: Iterable[TreatedDocument],
    labels: Labels,
    n_values: Sequence[int] = N_VALUES,
) -> PatternCorpora:
    correct = {n: Counter() for n in n_values}
    incorrect = {n: Counter() for n in n_values}
    stories = set()
    for doc in docs:
        doc_labels = labels.get(doc.story_id, {})
        for canonical in doc.locations:
            if canonical not in doc_labels:
                raise FeatureError(
                    f"story {doc.story_id}: no label for location {canonical!r}"
                )
            target = correct if int(doc_labels[canonical]) == 1 else incorrect
            for n in n_values:
                target[n].update(collocation_ngrams(doc, canonical, n))
        stories.add(doc.story_id)
    return PatternCorpora(
        correct={n: dict(c) for n, c in correct.items()},
        incorrect={n: dict(c) for n, c in incorrect.items()},
        stories=frozenset(stories),
    )


def ngram_ratio(patterns: Mapping[str, int], corpora: PatternCorpora, n: int) -> float:
    """Share of corpus counts that come from the correct side."""
    good = corpora.correct[n]
    bad = corpora.incorrect[n]
    c = sum(good.get(p, 0) * k for p, k in patterns.items())
    i = sum(bad.get(p, 0) * k for p, k in patterns.items())
    if c + i == 0:
        return NEUTRAL_RATIO
    return c / (c + i)


def top_pattern_matches(
    patterns: Mapping[str, int], corpora: PatternCorpora, n: int
) -> tuple[int, int]:
    top_c = corpora.top_correct(n)
    top_i = corpora.top_incorrect(n)
    hits_c = sum(k for p, k in patterns.items() if p in top_c)
    hits_i = sum(k for p, k in patterns.items() if p in top_i)
    return hits_c, hits_i


def _location_sentences(doc: TreatedDocument, canonical: str) -> list[int]:
    found = sorted({m.sentence_idx for m in doc.mentions if m.canonical == canonical})
    if not found:
        raise FeatureError(f"{canonical!r} is not mentioned in story {doc.story_id}")
    return found


def sentence_frequency(doc: TreatedDocument, canonical: str) -> int:
    return len(_location_sentences(doc, canonical))


def materiality(doc: TreatedDocument, canonical: str) -> tuple[int, int]:
    """(relevant, irrelevant) tag counts over sentences naming ``canonical``."""
    material = immaterial = 0
    for s_idx in _location_sentences(doc, canonical):
        for tok in doc.sentences[s_idx]:
            if tok in MATERIAL_TAGS:
                material += 1
            elif tok in IMMATERIAL_TAGS:
                immaterial += 1
    return material, immaterial


@dataclass
class FeatureRow:
    story_id: str
    location: str
    label: int | None = None
    covariates: dict[str, float] = field(default_factory=dict)
    raw: dict[str, float] = field(default_factory=dict, repr=False)


def raw_columns(n_values: Sequence[int] = N_VALUES) -> list[str]:
    cols = []
    for n in n_values:
        cols += [f"ngram{n}_ratio", f"ngram{n}_top_correct", f"ngram{n}_top_incorrect"]
    return cols + ["freq", "material", "immaterial"]


def feature_names(n_values: Sequence[int] = N_VALUES) -> list[str]:
    return [f"{col}_{scope}" for col in raw_columns(n_values) for scope in SCOPES]


def normalize(rows: Sequence[FeatureRow], column: str, scope: str) -> Sequence[FeatureRow]:
    """Divide ``row.raw[column]`` by its group maximum, in place.

    Groups are stories for ``scope="article"`` and the whole row set for
    ``scope="data"``. Result lands in ``covariates[f"{column}_{scope}"]``.
    """
    if scope not in SCOPES:
        raise ValueError(f"unknown scope {scope!r}")
    groups: dict[str, list[FeatureRow]] = {}
    for row in rows:
        key = row.story_id if scope == "article" else ""
        groups.setdefault(key, []).append(row)
    name = f"{column}_{scope}"
    for members in groups.values():
        peak = max(r.raw[column] for r in members)
        for r in members:
            r.covariates[name] = r.raw[column] / peak if peak > 0 else 0.0
    return rows


@dataclass
class Dataset:
    rows: list[FeatureRow]
    feature_names: list[str]
    provenance: str = ""

    def __len__(self):
        return len(self.rows)

    def matrix(self, features: Sequence[str] | None = None) -> np.ndarray:
        names = list(features) if features is not None else self.feature_names
        if not self.rows:
            return np.zeros((0, len(names)))
        return np.array([[r.covariates[f] for f in names] for r in self.rows], dtype=float)

    def labels(self) -> np.ndarray:
        if any(r.label is None for r in self.rows):
            raise FeatureError("dataset contains unlabeled rows")
        return np.array([r.label for r in self.rows], dtype=int)

    def story_ids(self) -> list[str]:
        return [r.story_id for r in self.rows]

    def subset(self, indices: Iterable[int]) -> "Dataset":
        return Dataset([self.rows[i] for i in indices], list(self.feature_names), self.provenance)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["story_id", "location", "Y", *self.feature_names])
            for r in self.rows:
                writer.writerow(
                    [r.story_id, r.location, "" if r.label is None else r.label]
                    + [repr(r.covariates[f]) for f in self.feature_names]
                )


def _raw_values(doc: TreatedDocument, canonical: str, corpora: PatternCorpora) -> dict[str, float]:
    raw: dict[str, float] = {}
    for n in corpora.n_values:
        patterns = collocation_ngrams(doc, canonical, n)
        raw[f"ngram{n}_ratio"] = ngram_ratio(patterns, corpora, n)
        hits_c, hits_i = top_pattern_matches(patterns, corpora, n)
        raw[f"ngram{n}_top_correct"] = float(hits_c)
        raw[f"ngram{n}_top_incorrect"] = float(hits_i)
    raw["freq"] = float(sentence_frequency(doc, canonical))
    raw["material"], raw["immaterial"] = map(float, materiality(doc, canonical))
    return raw


def assemble_dataset(
    docs: Iterable[TreatedDocument],
    corpora: PatternCorpora,
    labels: Labels | None = None,
) -> Dataset:
    """One row per (story, location) with covariates normalized in both scopes."""
    labels = labels or {}
    rows: list[FeatureRow] = []
    seen: set[tuple[str, str]] = set()
    for doc in docs:
        doc_labels = labels.get(doc.story_id, {})
        mentioned = set(doc.locations)
        stray = sorted(set(doc_labels) - mentioned)
        if stray:
            raise FeatureError(
                f"story {doc.story_id}: labels for unmentioned locations {stray}"
            )
        for canonical in doc.locations:
            key = (doc.story_id, canonical)
            if key in seen:
                raise FeatureError(f"duplicate story/location pair {key}")
            seen.add(key)
            label = doc_labels.get(canonical)
            rows.append(
                FeatureRow(
                    story_id=doc.story_id,
                    location=canonical,
                    label=None if label is None else int(label),
                    raw=_raw_values(doc, canonical, corpora),
                )
            )
    for column in raw_columns(corpora.n_values):
        for scope in SCOPES:
            normalize(rows, column, scope)
    return Dataset(rows, feature_names(corpora.n_values), corpora.fingerprint())
