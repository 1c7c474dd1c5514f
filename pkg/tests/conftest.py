from __future__ import annotations

from pathlib import Path

import pytest

from eventloc.lexicon import load_bundle
from eventloc.preprocess import Document, TreatedDocument, treat_document
from eventloc.synthetic import default_lexicon_dir

HERE = Path(__file__).parent
FIXTURES = HERE / "fixtures"
GOLDEN = HERE / "golden"


@pytest.fixture(scope="session")
def bundle():
    return load_bundle(default_lexicon_dir())


@pytest.fixture(scope="session")
def railway_raw() -> str:
    return (FIXTURES / "railway_raw.txt").read_text()


@pytest.fixture(scope="session")
def dateline_raw() -> str:
    return (FIXTURES / "dateline_raw.txt").read_text()


@pytest.fixture(scope="session")
def railway_doc(bundle, railway_raw) -> TreatedDocument:
    return treat_document(Document("railway", railway_raw), bundle)


def make_doc(story_id: str, sentences, mentions=()) -> TreatedDocument:
    """Build a treated document; mentions are (canonical, level, sentence, token)."""
    from eventloc.preprocess import LocationMention

    ms = [LocationMention(c, lvl, s, t, c) for c, lvl, s, t in mentions]
    return TreatedDocument(story_id, [list(s) for s in sentences], ms)


ACCEPTANCE_LINES: list[str] = []


def record_criterion(name: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
