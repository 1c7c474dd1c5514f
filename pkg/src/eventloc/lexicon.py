"""Gazetteer, category, stopword and stem-exception dictionaries."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, NamedTuple, Sequence

from .stemming import stem

PROVINCE = "province"
SUBPROVINCE = "subprovince"
LEVELS = (PROVINCE, SUBPROVINCE)

CATEGORIES = (
    "ACTOR",
    "ACTION-VERB",
    "NONTOPIC",
    "SOURCE",
    "DIRECTIONAL",
    "MONTH",
    "DAY",
    "ADMIN",
)

# file name (without suffix) used for each category inside a lexicon directory
CATEGORY_FILES = {tag: tag.lower().replace("-", "_") for tag in CATEGORIES}

MAX_PHRASE_TOKENS = 5

DEFAULT_PRESERVED = frozenset({"in", "at", "from", "of", "near", "to", "outside"})

_NON_WORD = re.compile(r"[\W_]+")


class LexiconError(ValueError):
    """Raised when a dictionary file fails validation."""


def normalize_phrase(text: str) -> str:
    """Lowercase and reduce to space-separated alphanumeric tokens."""
    return " ".join(_NON_WORD.sub(" ", text.lower()).split())


def _read_lines(path: Path) -> list[str]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise LexiconError(f"cannot read {path}: {exc}") from exc
    return raw.decode("utf-8").splitlines()


class LocationEntry(NamedTuple):
    province: str
    level: str


class LocationMatch(NamedTuple):
    province: str
    level: str
    span: int


@dataclass(frozen=True)
class LocationLexicon:
    """Surface form -> (canonical province, level)."""

    entries: Mapping[str, LocationEntry] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))

    def __len__(self):
        return len(self.entries)

    def __contains__(self, surface):
        return surface in self.entries

    def __getitem__(self, surface):
        return self.entries[surface]

    @property
    def provinces(self) -> frozenset[str]:
        return frozenset(e.province for e in self.entries.values())

    def with_variants(self, transform) -> "LocationLexicon":
        """Add a key for ``transform(tokens)`` of every surface form.

        ``transform`` maps a token list to the token list the treatment
        pipeline would produce for it (stopwords removed, stemmed).
        """
        merged = dict(self.entries)
        for surface, entry in self.entries.items():
            variant = " ".join(transform(surface.split()))
            if not variant:
                continue
            known = merged.get(variant)
            if known is not None and known.province != entry.province:
                raise LexiconError(
                    f"normalized form {variant!r} of {surface!r} maps to both "
                    f"{known.province!r} and {entry.province!r}"
                )
            if known is None:
                merged[variant] = entry
        return LocationLexicon(merged)


def build_location_lexicon(rows: Iterable[tuple[str, str, str | None]]) -> LocationLexicon:
    entries: dict[str, LocationEntry] = {}
    for surface, province, level in rows:
        key = normalize_phrase(surface)
        prov = province.strip().lower()
        if level is None:
            level = PROVINCE if key == normalize_phrase(prov) else SUBPROVINCE
        entry = LocationEntry(prov, level)
        known = entries.get(key)
        if known is not None and known.province != prov:
            raise LexiconError(
                f"surface form {key!r} assigned to both {known.province!r} and {prov!r}"
            )
        if known is None or level == PROVINCE:
            entries[key] = entry
    provinces = {e.province for e in entries.values() if e.level == PROVINCE}
    for key, entry in entries.items():
        if entry.level == SUBPROVINCE and entry.province not in provinces:
            raise LexiconError(
                f"subprovince {key!r} names unknown province {entry.province!r}"
            )
    return LocationLexicon(entries)


def load_location_lexicon(path) -> LocationLexicon:
    """Load a ``surface<TAB>province[<TAB>level]`` gazetteer file."""
    rows = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cols = [c.strip() for c in line.split("\t")]
        if len(cols) not in (2, 3) or not cols[0] or not cols[1]:
            raise LexiconError(f"{path}:{lineno}: malformed row {line!r}")
        key = normalize_phrase(cols[0])
        if not key:
            raise LexiconError(f"{path}:{lineno}: empty surface form")
        if len(key.split()) > MAX_PHRASE_TOKENS:
            raise LexiconError(
                f"{path}:{lineno}: {key!r} exceeds {MAX_PHRASE_TOKENS} tokens"
            )
        level = None
        if len(cols) == 3:
            level = cols[2].lower()
            if level not in LEVELS:
                raise LexiconError(f"{path}:{lineno}: unknown level {cols[2]!r}")
        rows.append((cols[0], cols[1], level))
    return build_location_lexicon(rows)


def resolve_location(
    tokens: Sequence[str], index: int, lexicon: LocationLexicon
) -> LocationMatch | None:
    """Longest gazetteer phrase starting at ``tokens[index]``."""
    if not 0 <= index < len(tokens):
        raise IndexError(index)
    longest = min(MAX_PHRASE_TOKENS, len(tokens) - index)
    for span in range(longest, 0, -1):
        entry = lexicon.entries.get(" ".join(tokens[index : index + span]))
        if entry is not None:
            return LocationMatch(entry.province, entry.level, span)
    return None


@dataclass(frozen=True)
class CategoryLexicon:
    category: str
    entries: frozenset[str]

    def __contains__(self, phrase):
        return phrase in self.entries


def build_category_lexicon(terms: Iterable[str], category: str) -> CategoryLexicon:
    if category not in CATEGORIES:
        raise LexiconError(f"unknown category {category!r}")
    entries = set()
    for term in terms:
        tokens = normalize_phrase(term).split()
        if tokens:
            entries.add(" ".join(stem(t) for t in tokens))
    return CategoryLexicon(category, frozenset(entries))


def load_category_lexicon(path, category: str) -> CategoryLexicon:
    if category not in CATEGORIES:
        raise LexiconError(f"unknown category {category!r}")
    terms = [
        line.strip()
        for line in _read_lines(path)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    return build_category_lexicon(terms, category)


@dataclass(frozen=True)
class StopwordList:
    words: frozenset[str]
    preserved: frozenset[str] = DEFAULT_PRESERVED

    def __post_init__(self):
        object.__setattr__(self, "words", frozenset(self.words) - self.preserved)

    def __contains__(self, token):
        return token in self.words


def load_stopwords(path, preserved: Iterable[str] = DEFAULT_PRESERVED) -> StopwordList:
    words = {
        line.strip().lower()
        for line in _read_lines(path)
        if line.strip() and not line.lstrip().startswith("#")
    }
    return StopwordList(frozenset(words), frozenset(preserved))


@dataclass(frozen=True)
class StemExceptionList:
    restore: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self,
            "restore",
            MappingProxyType({k.lower(): v.lower() for k, v in self.restore.items()}),
        )

    def apply(self, token: str) -> str:
        return self.restore.get(token, token)


def load_stem_exceptions(path) -> StemExceptionList:
    restore = {}
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cols = [c.strip() for c in line.split("\t")]
        if len(cols) != 2 or not all(cols):
            raise LexiconError(f"{path}:{lineno}: malformed row {line!r}")
        restore[cols[0]] = cols[1]
    return StemExceptionList(restore)


def check_disjoint(lexicons: Iterable[CategoryLexicon]) -> None:
    seen: dict[str, str] = {}
    clashes = []
    for lex in lexicons:
        for term in sorted(lex.entries):
            other = seen.setdefault(term, lex.category)
            if other != lex.category:
                clashes.append(f"{term} ({other}/{lex.category})")
    if clashes:
        raise LexiconError("terms in more than one category: " + ", ".join(clashes))


@dataclass(frozen=True)
class LexiconBundle:
    """Everything the treatment pipeline needs, validated together."""

    locations: LocationLexicon
    categories: Mapping[str, CategoryLexicon]
    stopwords: StopwordList
    exceptions: StemExceptionList = field(default_factory=StemExceptionList)

    def __post_init__(self):
        check_disjoint(self.categories.values())
        object.__setattr__(self, "categories", MappingProxyType(dict(self.categories)))
        object.__setattr__(
            self, "_match_lexicon", self.locations.with_variants(self.treat_tokens)
        )

    def treat_tokens(self, tokens: Sequence[str]) -> list[str]:
        """Stopword removal, stemming and exception restoring of a token list."""
        return [
            self.exceptions.apply(stem(t)) for t in tokens if t not in self.stopwords
        ]

    @property
    def match_lexicon(self) -> LocationLexicon:
        """Gazetteer keyed by raw and treated surface forms."""
        return self._match_lexicon


def load_bundle(directory) -> LexiconBundle:
    """Load a lexicon directory.

    Expected files: ``locations.tsv``, ``stopwords.txt``, one ``<category>.txt``
    per category tag (missing files mean empty categories) and an optional
    ``stem_exceptions.tsv``.
    """
    root = Path(directory)
    if not root.is_dir():
        raise LexiconError(f"lexicon directory not found: {root}")
    locations = load_location_lexicon(root / "locations.tsv")
    stop_path = root / "stopwords.txt"
    stopwords = load_stopwords(stop_path) if stop_path.exists() else StopwordList(frozenset())
    categories = {}
    for tag, name in CATEGORY_FILES.items():
        path = root / f"{name}.txt"
        if path.exists():
            categories[tag] = load_category_lexicon(path, tag)
        else:
            categories[tag] = CategoryLexicon(tag, frozenset())
    exc_path = root / "stem_exceptions.tsv"
    exceptions = load_stem_exceptions(exc_path) if exc_path.exists() else StemExceptionList()
    return LexiconBundle(locations, categories, stopwords, exceptions)
