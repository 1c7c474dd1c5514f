"""Porter stemming shared by lexicon loading and text treatment."""
from __future__ import annotations

from functools import lru_cache

from nltk.stem.porter import PorterStemmer

# The 1980 algorithm, without NLTK's extensions ("outside" -> "outsid").
_STEMMER = PorterStemmer(mode=PorterStemmer.ORIGINAL_ALGORITHM)


@lru_cache(maxsize=65536)
def stem(token: str) -> str:
    if not token or token.isdigit():
        return token
    return _STEMMER.stem(token)
