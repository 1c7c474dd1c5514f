"""Repeated article-grouped cross-validation and report assembly."""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import learn
from .features import N_VALUES, assemble_dataset, build_pattern_corpora
from .learn.baselines import focus_baseline, nearest_verb_baseline
from .learn.common import THRESHOLD, assign_folds
from .lexicon import LexiconBundle
from .preprocess import Document, TreatedDocument, treat_document

BASELINES = ("dictionary", "nearest_verb", "focus")


class EvaluationError(RuntimeError):
    pass


@dataclass
class CvPlan:
    k: int
    repeats: int
    seed: int
    assignments: list[dict[str, int]]

    def folds(self):
        for r in range(self.repeats):
            for f in range(self.k):
                yield r, f

    def test_ids(self, repeat: int, fold: int) -> set[str]:
        return {s for s, k in self.assignments[repeat].items() if k == fold}


def make_cv_plan(story_ids: Sequence[str], k: int = 3, repeats: int = 3, seed: int = 0) -> CvPlan:
    ids = list(dict.fromkeys(story_ids))
    if len(ids) < k:
        raise ValueError(f"need at least k={k} stories, got {len(ids)}")
    assignments = [
        assign_folds(ids, k, np.random.default_rng([seed, r])) for r in range(repeats)
    ]
    return CvPlan(k, repeats, seed, assignments)


@dataclass(frozen=True)
class ClassifierSpec:
    name: str
    params: Mapping = field(default_factory=dict)


@dataclass
class Confusion:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @classmethod
    def from_predictions(cls, pred, y) -> "Confusion":
        pred, y = np.asarray(pred), np.asarray(y)
        return cls(
            int(np.sum((pred == 1) & (y == 1))),
            int(np.sum((pred == 1) & (y == 0))),
            int(np.sum((pred == 0) & (y == 0))),
            int(np.sum((pred == 0) & (y == 1))),
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else float("nan")


@dataclass
class FoldResult:
    repeat: int
    fold: int
    model: str
    confusion: Confusion
    accuracy: float
    article_accuracy: float
    single_location_accuracy: float


@dataclass
class Prediction:
    repeat: int
    fold: int
    story_id: str
    location: str
    label: int
    scores: dict[str, float]
    predicted: dict[str, int]


@dataclass
class FoldOutcome:
    repeat: int
    fold: int
    train_stories: list[str]
    corpora_fingerprint: str
    predictions: list[Prediction]


def roc_points(scores: Iterable[tuple[float, int]]) -> list[tuple[float, float]]:
    """(FPR, TPR) for every distinct threshold, from (0,0) to (1,1)."""
    pairs = sorted(((float(p), int(y)) for p, y in scores), key=lambda t: -t[0])
    pos = sum(y for _, y in pairs)
    neg = len(pairs) - pos
    if pos == 0 or neg == 0:
        raise ValueError("ROC needs both classes")
    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    while i < len(pairs):
        threshold = pairs[i][0]
        while i < len(pairs) and pairs[i][0] == threshold:
            tp += pairs[i][1]
            fp += 1 - pairs[i][1]
            i += 1
        points.append((fp / neg, tp / pos))
    return points


def auc(points: Sequence[tuple[float, float]]) -> float:
    return float(sum((x1 - x0) * (y0 + y1) / 2 for (x0, y0), (x1, y1) in zip(points, points[1:])))


@dataclass
class ProvinceAggregate:
    counts: dict[str, dict[str, int]]
    predictors: list[str]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["province", "ground_truth", *self.predictors])
            for prov in sorted(self.counts):
                c = self.counts[prov]
                writer.writerow([prov, c["ground_truth"], *(c[p] for p in self.predictors)])


def province_aggregate(rows: Sequence, predictions: Mapping[str, Sequence[int]]) -> ProvinceAggregate:
    """Positive counts per province for the ground truth and each predictor.

    ``rows`` need ``location`` and ``label`` attributes; every prediction
    list is aligned with ``rows``.
    """
    names = list(predictions)
    counts: dict[str, dict[str, int]] = {}
    for i, row in enumerate(rows):
        c = counts.setdefault(row.location, {"ground_truth": 0, **{n: 0 for n in names}})
        c["ground_truth"] += int(row.label == 1)
        for n in names:
            c[n] += int(predictions[n][i] == 1)
    return ProvinceAggregate(counts, names)


def single_location_subset_accuracy(rows: Sequence, predicted: Sequence[int]) -> float:
    """Accuracy over rows of articles with exactly one positive label."""
    positives: dict[str, int] = {}
    for r in rows:
        positives[r.story_id] = positives.get(r.story_id, 0) + int(r.label == 1)
    keep = [i for i, r in enumerate(rows) if positives[r.story_id] == 1]
    if not keep:
        return float("nan")
    return float(np.mean([int(predicted[i]) == rows[i].label for i in keep]))


def article_accuracy(rows: Sequence, predicted: Sequence[int]) -> float:
    """Share of articles whose every location is classified correctly."""
    ok: dict[str, bool] = {}
    for r, p in zip(rows, predicted):
        ok[r.story_id] = ok.get(r.story_id, True) and int(p) == r.label
    return float(np.mean(list(ok.values()))) if ok else float("nan")


def _fold_seed(seed: int, repeat: int, fold: int) -> int:
    return int(np.random.SeedSequence([seed, repeat, fold]).generate_state(1)[0])


def run_fold(docs, labels, classifiers, plan: CvPlan, repeat: int, fold: int,
             n_values=N_VALUES, threshold: float = THRESHOLD) -> FoldOutcome:
    assignment = plan.assignments[repeat]
    train_docs = [d for d in docs if assignment[d.story_id] != fold]
    test_docs = [d for d in docs if assignment[d.story_id] == fold]
    train_labels = {d.story_id: labels[d.story_id] for d in train_docs}
    corpora = build_pattern_corpora(train_docs, train_labels, n_values)
    train_ds = assemble_dataset(train_docs, corpora, train_labels)
    # test labels are attached to rows only for scoring
    test_ds = assemble_dataset(test_docs, corpora, {d.story_id: labels[d.story_id] for d in test_docs})

    scores: dict[str, np.ndarray] = {}
    predicted: dict[str, np.ndarray] = {}
    seed = _fold_seed(plan.seed, repeat, fold)
    for spec in classifiers:
        params = dict(spec.params)
        if spec.name in ("rforest", "mlp"):
            params.setdefault("seed", seed)
        try:
            model = learn.train(spec.name, train_ds, **params)
        except learn.TrainingError as exc:
            raise EvaluationError(f"repeat {repeat} fold {fold} model {spec.name}: {exc}") from exc
        proba, pred = learn.predict_rows(model, test_ds.rows, threshold)
        scores[spec.name], predicted[spec.name] = proba, pred

    n = len(test_ds.rows)
    predicted["dictionary"] = np.ones(n, dtype=int)
    scores["dictionary"] = np.ones(n)
    by_story = {d.story_id: d for d in test_docs}
    nv = {s: nearest_verb_baseline(d) for s, d in by_story.items() if d.mentions}
    fc = {s: focus_baseline(d) for s, d in by_story.items() if d.mentions}
    predicted["nearest_verb"] = np.array([int(nv[r.story_id] == r.location) for r in test_ds.rows], dtype=int)
    predicted["focus"] = np.array([int(fc[r.story_id] == r.location) for r in test_ds.rows], dtype=int)
    scores["nearest_verb"] = predicted["nearest_verb"].astype(float)
    scores["focus"] = predicted["focus"].astype(float)

    preds = [
        Prediction(
            repeat, fold, r.story_id, r.location, int(r.label),
            {m: float(scores[m][i]) for m in scores},
            {m: int(predicted[m][i]) for m in predicted},
        )
        for i, r in enumerate(test_ds.rows)
    ]
    return FoldOutcome(repeat, fold, sorted(corpora.stories), corpora.fingerprint(), preds)


def _run_fold_task(args):
    return run_fold(*args)


@dataclass
class EvalReport:
    models: list[str]
    plan: CvPlan
    outcomes: list[FoldOutcome]
    folds: list[FoldResult] = field(default_factory=list)

    def __post_init__(self):
        if not self.folds:
            self.folds = self._score_folds()

    @property
    def predictors(self) -> list[str]:
        return self.models + list(BASELINES)

    def _score_folds(self) -> list[FoldResult]:
        results = []
        for out in self.outcomes:
            for name in self.predictors:
                pred = [p.predicted[name] for p in out.predictions]
                y = [p.label for p in out.predictions]
                conf = Confusion.from_predictions(pred, y)
                results.append(FoldResult(
                    out.repeat, out.fold, name, conf, conf.accuracy,
                    article_accuracy(out.predictions, pred),
                    single_location_subset_accuracy(out.predictions, pred),
                ))
        return results

    def mean_accuracy(self, name: str, field_name: str = "accuracy") -> float:
        values = [getattr(f, field_name) for f in self.folds if f.model == name]
        values = [v for v in values if not math.isnan(v)]
        return float(np.mean(values)) if values else float("nan")

    def roc(self, name: str, repeat: int) -> list[tuple[float, float]]:
        pooled = [
            (p.scores[name], p.label)
            for out in self.outcomes if out.repeat == repeat
            for p in out.predictions
        ]
        return roc_points(pooled)

    def province_counts(self, repeat: int = 0) -> ProvinceAggregate:
        preds = [p for out in self.outcomes if out.repeat == repeat for p in out.predictions]
        preds.sort(key=lambda p: (p.story_id, p.location))
        return province_aggregate(preds, {n: [p.predicted[n] for p in preds] for n in self.predictors})

    def summary(self) -> dict:
        out = {}
        for name in self.predictors:
            entry = {
                "accuracy": self.mean_accuracy(name),
                "article_accuracy": self.mean_accuracy(name, "article_accuracy"),
                "single_location_accuracy": self.mean_accuracy(name, "single_location_accuracy"),
                "n_folds": sum(1 for f in self.folds if f.model == name),
            }
            if name in self.models:
                entry["auc"] = [auc(self.roc(name, r)) for r in range(self.plan.repeats)]
            out[name] = entry
        return out

    def to_dict(self) -> dict:
        return _json_safe({
            "plan": asdict(self.plan),
            "models": self.models,
            "summary": self.summary(),
            "folds": [asdict(f) for f in self.folds],
            "roc": {
                name: {str(r): self.roc(name, r) for r in range(self.plan.repeats)}
                for name in self.models
            },
            "outcomes": [asdict(o) for o in self.outcomes],
        })

    @classmethod
    def from_dict(cls, data: Mapping) -> "EvalReport":
        """Rebuild a report from ``to_dict`` output (fold scores are recomputed)."""
        plan = CvPlan(**data["plan"])
        outcomes = [
            FoldOutcome(
                o["repeat"], o["fold"], list(o["train_stories"]), o["corpora_fingerprint"],
                [Prediction(**p) for p in o["predictions"]],
            )
            for o in data["outcomes"]
        ]
        return cls(list(data["models"]), plan, outcomes)

    @classmethod
    def read(cls, path) -> "EvalReport":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / "report.json", out / "accuracy.csv", out / "roc.csv", out / "province_counts.csv"]
        paths[0].write_text(json.dumps(self.to_dict(), sort_keys=True, indent=1, allow_nan=False) + "\n")
        write_accuracy_csv(self, paths[1])
        write_roc_csv(self, paths[2])
        self.province_counts().write_csv(paths[3])
        return paths


def _json_safe(obj):
    """Replace NaN with None so the report is strict JSON."""
    if isinstance(obj, float):
        return None if math.isnan(obj) else obj
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def write_accuracy_csv(report: EvalReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "repeat", "fold", "accuracy", "tp", "fp", "tn", "fn",
                    "article_accuracy", "single_location_accuracy"])
        for f in report.folds:
            c = f.confusion
            w.writerow([f.model, f.repeat, f.fold, repr(f.accuracy), c.tp, c.fp, c.tn, c.fn,
                        repr(f.article_accuracy), repr(f.single_location_accuracy)])
        for name, s in report.summary().items():
            w.writerow([name, "mean", "mean", repr(s["accuracy"]), "", "", "", "",
                        repr(s["article_accuracy"]), repr(s["single_location_accuracy"])])


def write_roc_csv(report: EvalReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "repeat", "fpr", "tpr"])
        for name in report.models:
            for r in range(report.plan.repeats):
                for fpr, tpr in report.roc(name, r):
                    w.writerow([name, r, repr(fpr), repr(tpr)])


def treat_corpus(docs: Sequence[Document], bundle: LexiconBundle) -> list[TreatedDocument]:
    return [treat_document(d, bundle) for d in docs]


def run_cv(
    corpus: Sequence[Document | TreatedDocument],
    lexicons: LexiconBundle | None,
    classifiers: Sequence[ClassifierSpec],
    plan: CvPlan,
    labels: Mapping[str, Mapping[str, int]],
    *,
    n_values=N_VALUES,
    threshold: float = THRESHOLD,
    n_jobs: int = 1,
) -> EvalReport:
    """Train and score every classifier on every (repeat, fold) of ``plan``.

    Raw documents are treated with ``lexicons`` first. Pattern corpora and
    datasets are rebuilt per fold from training articles only.
    """
    docs = [
        d if isinstance(d, TreatedDocument) else treat_document(d, lexicons)
        for d in corpus
    ]
    missing = [d.story_id for d in docs if d.story_id not in plan.assignments[0]]
    if missing:
        raise EvaluationError(f"stories missing from the CV plan: {missing[:5]}")
    tasks = [
        (docs, labels, list(classifiers), plan, r, f, tuple(n_values), threshold)
        for r, f in plan.folds()
    ]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            outcomes = list(pool.map(_run_fold_task, tasks))
    else:
        outcomes = [_run_fold_task(t) for t in tasks]
    outcomes.sort(key=lambda o: (o.repeat, o.fold))
    return EvalReport([c.name for c in classifiers], plan, outcomes)
