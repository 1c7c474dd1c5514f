"""Raw article -> treated token stream with location mentions.

Treatment order: clean, split sentences, drop stopwords, stem, homogenize
location names, generalize dictionary words to category tags.
"""
from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

from .lexicon import (
    MAX_PHRASE_TOKENS,
    SUBPROVINCE,
    CategoryLexicon,
    LexiconBundle,
    LocationLexicon,
    StemExceptionList,
    StopwordList,
    resolve_location,
)
from .stemming import stem

NUMERAL = "NUMERAL"
DATE = "DATE"
SUB_PREFIX = "sub-"

_ABBREVIATION = re.compile(r"\b(?:[^\W\d_]\.){2,}")
_DIGIT_SEPARATOR = re.compile(r"(?<=\d)[.,](?=\d)")
_JUNK = re.compile(r"[^\w.\s]|_")
_PERIODS = re.compile(r"\s*\.[\s.]*")


@dataclass(frozen=True)
class Document:
    story_id: str
    raw_text: str
    source_tag: str | None = None


@dataclass(frozen=True)
class LocationMention:
    canonical: str
    level: str
    sentence_idx: int
    token_idx: int
    surface: str


@dataclass
class TreatedDocument:
    story_id: str
    sentences: list[list[str]] = field(default_factory=list)
    mentions: list[LocationMention] = field(default_factory=list)

    @property
    def locations(self) -> list[str]:
        """Canonical locations in order of first appearance."""
        return list(dict.fromkeys(m.canonical for m in self.mentions))

    def text(self) -> str:
        return " ".join(" ".join(s) + "." for s in self.sentences)

    def to_dict(self) -> dict:
        return {
            "story_id": self.story_id,
            "sentences": self.sentences,
            "mentions": [asdict(m) for m in self.mentions],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "TreatedDocument":
        return cls(
            story_id=str(data["story_id"]),
            sentences=[list(s) for s in data["sentences"]],
            mentions=[LocationMention(**m) for m in data["mentions"]],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def location_token(canonical: str, level: str) -> str:
    token = canonical.replace(" ", "_")
    return SUB_PREFIX + token if level == SUBPROVINCE else token


def clean_text(raw: str) -> str:
    """Lowercase, keep letters, digits and sentence periods only.

    Abbreviation periods and digit separators are dropped so that every
    surviving period marks a sentence end.
    """
    text = raw.lower()
    text = _ABBREVIATION.sub(lambda m: m.group(0).replace(".", ""), text)
    text = _DIGIT_SEPARATOR.sub("", text)
    text = _JUNK.sub(" ", text)
    text = _PERIODS.sub(". ", text)
    text = " ".join(text.split())
    while text.startswith("."):
        text = text[1:].lstrip()
    return text


def split_sentences(text: str) -> list[list[str]]:
    sentences = (chunk.split() for chunk in text.split("."))
    return [s for s in sentences if s]


def remove_stopwords(tokens: Sequence[str], stoplist: StopwordList) -> list[str]:
    return [t for t in tokens if t not in stoplist]


def stem_tokens(tokens: Sequence[str], exceptions: StemExceptionList) -> list[str]:
    return [exceptions.apply(stem(t)) for t in tokens]


def homogenize_locations(
    sentences: Sequence[Sequence[str]],
    lexicon: LocationLexicon,
    surfaces: Sequence[Sequence[str]] | None = None,
) -> tuple[list[list[str]], list[LocationMention]]:
    """Collapse gazetteer phrases into ``<province>`` / ``sub-<province>``.

    ``surfaces`` optionally gives the pre-stemming tokens aligned with
    ``sentences``; they are recorded as each mention's surface string.
    """
    out: list[list[str]] = []
    mentions: list[LocationMention] = []
    for s_idx, tokens in enumerate(sentences):
        raw = surfaces[s_idx] if surfaces is not None else tokens
        new: list[str] = []
        i = 0
        while i < len(tokens):
            match = resolve_location(tokens, i, lexicon)
            if match is None:
                new.append(tokens[i])
                i += 1
                continue
            mentions.append(
                LocationMention(
                    canonical=match.province,
                    level=match.level,
                    sentence_idx=s_idx,
                    token_idx=len(new),
                    surface=" ".join(raw[i : i + match.span]),
                )
            )
            new.append(location_token(match.province, match.level))
            i += match.span
        out.append(new)
    return out, mentions


def _category_index(lexicons) -> dict[str, str]:
    index = {}
    for lex in lexicons:
        for term in lex.entries:
            index[term] = lex.category
    return index


def generalize_tokens(
    sentences: Sequence[Sequence[str]],
    lexicons: Sequence[CategoryLexicon] | Mapping[str, CategoryLexicon],
    mentions: Sequence[LocationMention],
) -> tuple[list[list[str]], list[LocationMention]]:
    """Replace dictionary words by category tags, leaving mentions alone.

    Digit runs become NUMERAL; a day number (1-31) directly followed by a
    month name collapses into DATE. Multi-word dictionary phrases collapse
    into a single tag, so mention positions are re-indexed and returned.
    """
    if isinstance(lexicons, Mapping):
        lexicons = list(lexicons.values())
    index = _category_index(lexicons)
    months = {t for lex in lexicons if lex.category == "MONTH" for t in lex.entries}
    at_mention: dict[tuple[int, int], LocationMention] = {
        (m.sentence_idx, m.token_idx): m for m in mentions
    }
    out: list[list[str]] = []
    moved: list[LocationMention] = []
    for s_idx, tokens in enumerate(sentences):
        blocked = [(s_idx, t) in at_mention for t in range(len(tokens))]
        new: list[str] = []
        i = 0
        while i < len(tokens):
            if blocked[i]:
                m = at_mention[(s_idx, i)]
                moved.append(
                    LocationMention(m.canonical, m.level, s_idx, len(new), m.surface)
                )
                new.append(tokens[i])
                i += 1
                continue
            tok = tokens[i]
            if tok.isdigit():
                nxt = i + 1
                if (
                    nxt < len(tokens)
                    and not blocked[nxt]
                    and tokens[nxt] in months
                    and 1 <= int(tok) <= 31
                ):
                    new.append(DATE)
                    i += 2
                else:
                    new.append(NUMERAL)
                    i += 1
                continue
            span, tag = _longest_category(tokens, i, blocked, index)
            if tag is None:
                new.append(tok)
                i += 1
            else:
                new.append(tag)
                i += span
        out.append(new)
    return out, moved


def _longest_category(tokens, i, blocked, index):
    longest = 0
    while (
        longest < MAX_PHRASE_TOKENS
        and i + longest < len(tokens)
        and not blocked[i + longest]
    ):
        longest += 1
    for span in range(longest, 0, -1):
        tag = index.get(" ".join(tokens[i : i + span]))
        if tag is not None:
            return span, tag
    return 0, None


def treat_document(doc: Document, bundle: LexiconBundle) -> TreatedDocument:
    cleaned = split_sentences(clean_text(doc.raw_text))
    kept = [remove_stopwords(s, bundle.stopwords) for s in cleaned]
    stemmed = [stem_tokens(s, bundle.exceptions) for s in kept]
    sentences, mentions = homogenize_locations(stemmed, bundle.match_lexicon, kept)
    sentences, mentions = generalize_tokens(sentences, bundle.categories, mentions)
    # stopword removal can empty a sentence
    keep = [i for i, s in enumerate(sentences) if s]
    if len(keep) != len(sentences):
        renumber = {old: new for new, old in enumerate(keep)}
        sentences = [sentences[i] for i in keep]
        mentions = [
            LocationMention(m.canonical, m.level, renumber[m.sentence_idx], m.token_idx, m.surface)
            for m in mentions
        ]
    return TreatedDocument(doc.story_id, sentences, mentions)
