"""Classify location words in news articles as true or false event locations."""
from __future__ import annotations

from .corpus_io import read_corpus, read_treated, write_treated
from .evaluate import EvalReport, make_cv_plan, roc_points, run_cv
from .features import PatternCorpora, assemble_dataset, build_pattern_corpora, collocation_ngrams
from .lexicon import LexiconBundle, LexiconError, load_bundle
from .preprocess import Document, TreatedDocument, treat_document

__version__ = "0.1.0"

__all__ = [
    "Document",
    "EvalReport",
    "LexiconBundle",
    "LexiconError",
    "PatternCorpora",
    "TreatedDocument",
    "assemble_dataset",
    "build_pattern_corpora",
    "collocation_ngrams",
    "load_bundle",
    "make_cv_plan",
    "read_corpus",
    "read_treated",
    "roc_points",
    "run_cv",
    "treat_document",
    "write_treated",
]
