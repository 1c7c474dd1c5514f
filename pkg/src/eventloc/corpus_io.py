"""JSON-lines corpus files: raw articles in, treated articles out."""
from __future__ import annotations

import json
from pathlib import Path

from .preprocess import Document, TreatedDocument


class CorpusError(ValueError):
    pass


def read_corpus(path) -> tuple[list[Document], dict[str, dict[str, int]]]:
    """Read ``{"story_id", "text", "labels"?}`` lines."""
    docs, labels, seen = [], {}, set()
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise CorpusError(f"cannot read corpus {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            story_id = str(obj["story_id"])
            text = obj["text"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise CorpusError(f"{path}:{lineno}: bad corpus record ({exc})") from exc
        if story_id in seen:
            raise CorpusError(f"{path}:{lineno}: duplicate story_id {story_id!r}")
        seen.add(story_id)
        docs.append(Document(story_id, text, obj.get("source")))
        if "labels" in obj and obj["labels"] is not None:
            labels[story_id] = {str(k).lower(): int(v) for k, v in obj["labels"].items()}
    return docs, labels


def write_treated(path, docs, labels=None) -> None:
    labels = labels or {}
    with open(path, "w", encoding="utf-8") as fh:
        for d in docs:
            obj = d.to_dict()
            if d.story_id in labels:
                obj["labels"] = dict(sorted(labels[d.story_id].items()))
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def read_treated(path) -> tuple[list[TreatedDocument], dict[str, dict[str, int]]]:
    docs, labels = [], {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise CorpusError(f"cannot read treated corpus {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            doc = TreatedDocument.from_dict(obj)
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise CorpusError(f"{path}:{lineno}: bad treated record ({exc})") from exc
        docs.append(doc)
        if obj.get("labels") is not None:
            labels[doc.story_id] = {k: int(v) for k, v in obj["labels"].items()}
    return docs, labels
