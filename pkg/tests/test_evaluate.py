from __future__ import annotations

import json
from collections import Counter

import numpy as np
import pytest

from conftest import make_doc
from eventloc.evaluate import (
    ClassifierSpec,
    Confusion,
    EvalReport,
    auc,
    make_cv_plan,
    province_aggregate,
    roc_points,
    run_cv,
    single_location_subset_accuracy,
)
from eventloc.features import build_pattern_corpora
from eventloc.lexicon import PROVINCE
from eventloc.synthetic import generate_corpus


def sweep_oracle(pairs):
    """FPR/TPR for 'score >= t' at every distinct t, highest first, plus (0,0)."""
    pos = sum(y for _, y in pairs)
    neg = len(pairs) - pos
    points = [(0.0, 0.0)]
    for t in sorted({s for s, _ in pairs}, reverse=True):
        tp = sum(1 for s, y in pairs if s >= t and y == 1)
        fp = sum(1 for s, y in pairs if s >= t and y == 0)
        points.append((fp / neg, tp / pos))
    return points


class Row:
    def __init__(self, story_id, location, label):
        self.story_id, self.location, self.label = story_id, location, label


class TestCvPlan:
    @pytest.mark.parametrize("n,sizes", [(9, [3, 3, 3]), (10, [3, 3, 4])])
    def test_fold_sizes(self, n, sizes):
        plan = make_cv_plan([f"s{i}" for i in range(n)], k=3, repeats=2, seed=1)
        for r in range(2):
            assert sorted(Counter(plan.assignments[r].values()).values()) == sizes

    def test_deterministic(self):
        ids = [f"s{i}" for i in range(12)]
        assert make_cv_plan(ids, seed=4).assignments == make_cv_plan(ids, seed=4).assignments
        assert make_cv_plan(ids, seed=4).assignments != make_cv_plan(ids, seed=5).assignments

    def test_every_story_tested_once_per_repeat(self):
        ids = [f"s{i}" for i in range(14)]
        plan = make_cv_plan(ids, k=3, repeats=3, seed=0)
        for r in range(3):
            tested = [s for f in range(3) for s in plan.test_ids(r, f)]
            assert sorted(tested) == sorted(ids)

    def test_too_few(self):
        with pytest.raises(ValueError):
            make_cv_plan(["a", "b"], k=3)


class TestRoc:
    def test_perfect(self):
        points = roc_points([(0.9, 1), (0.1, 0)])
        assert (0.0, 1.0) in points and auc(points) == 1.0

    def test_all_equal(self):
        assert roc_points([(0.5, 1), (0.5, 0), (0.5, 1)]) == [(0.0, 0.0), (1.0, 1.0)]

    def test_single_class(self):
        with pytest.raises(ValueError):
            roc_points([(0.2, 1), (0.4, 1)])

    def test_matches_threshold_sweep(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            scores = rng.integers(0, 8, 20) / 8  # ties on purpose
            labels = rng.integers(0, 2, 20)
            labels[:2] = [0, 1]
            pairs = list(zip(scores.tolist(), labels.tolist()))
            points = roc_points(pairs)
            assert points == sweep_oracle(pairs)
            assert points[0] == (0.0, 0.0) and points[-1] == (1.0, 1.0)
            assert all(b[0] >= a[0] and b[1] >= a[1] for a, b in zip(points, points[1:]))
            assert 0.0 <= auc(points) <= 1.0


class TestScoring:
    def test_confusion_total(self):
        c = Confusion.from_predictions([1, 0, 1, 1], [1, 0, 0, 1])
        assert (c.tp, c.fp, c.tn, c.fn) == (2, 1, 1, 0)
        assert c.total == 4 and c.accuracy == 0.75

    def test_random_predictor(self):
        rng = np.random.default_rng(2)
        y = np.repeat([0, 1], 500)
        assert Confusion.from_predictions(rng.integers(0, 2, 1000), y).accuracy == pytest.approx(0.5, abs=0.1)

    def test_subset_equals_overall_when_all_single(self):
        rows = [Row("a", "x", 1), Row("a", "y", 0), Row("b", "x", 1)]
        pred = [1, 1, 0]
        assert single_location_subset_accuracy(rows, pred) == pytest.approx(1 / 3)

    def test_subset_skips_multi_true_articles(self):
        rows = [Row("a", "x", 1), Row("a", "y", 1), Row("b", "x", 1), Row("b", "z", 0)]
        assert single_location_subset_accuracy(rows, [0, 0, 1, 0]) == 1.0


class TestProvinceAggregate:
    def test_capital_over_predicted(self):
        rows = [Row(f"s{i}", loc, y) for i, (loc, y) in enumerate(
            [("beijing", 0), ("beijing", 1), ("beijing", 0), ("hubei", 1), ("hunan", 1)])]
        agg = province_aggregate(rows, {"dictionary": [1] * 5})
        assert agg.counts["beijing"]["dictionary"] > agg.counts["beijing"]["ground_truth"]

    def test_empty_predictions(self):
        rows = [Row("a", "x", 0), Row("b", "y", 0)]
        agg = province_aggregate(rows, {"m": [0, 0]})
        assert all(v == 0 for c in agg.counts.values() for v in c.values())

    def test_one_positive(self, tmp_path):
        agg = province_aggregate([Row("a", "hubei", 1)], {"m": [1]})
        assert agg.counts == {"hubei": {"ground_truth": 1, "m": 1}}
        agg.write_csv(tmp_path / "p.csv")
        assert (tmp_path / "p.csv").read_text() == "province,ground_truth,m\nhubei,1,1\n"


@pytest.fixture(scope="module")
def small_run(bundle):
    docs, labels = generate_corpus(12, seed=5)
    plan = make_cv_plan([d.story_id for d in docs], k=3, repeats=2, seed=3)
    specs = [ClassifierSpec("rforest", {"n_trees": 20}), ClassifierSpec("svm")]
    return docs, labels, plan, run_cv(docs, bundle, specs, plan, labels)


class TestRunCv:
    def test_fold_count_and_totals(self, small_run):
        docs, labels, plan, report = small_run
        assert len(report.outcomes) == 6
        for out in report.outcomes:
            n_rows = len(out.predictions)
            for f in report.folds:
                if (f.repeat, f.fold) == (out.repeat, out.fold):
                    assert f.confusion.total == n_rows

    def test_mean_is_mean_of_folds(self, small_run):
        report = small_run[3]
        for name in report.predictors:
            values = [f.accuracy for f in report.folds if f.model == name]
            assert len(values) == 6
            assert abs(report.mean_accuracy(name) - sum(values) / 6) < 1e-12

    def test_no_leakage(self, small_run, bundle):
        docs, labels, plan, report = small_run
        from eventloc.preprocess import treat_document

        treated = {d.story_id: treat_document(d, bundle) for d in docs}
        for out in report.outcomes:
            test_ids = plan.test_ids(out.repeat, out.fold)
            assert not test_ids & set(out.train_stories)
            assert {p.story_id for p in out.predictions} <= test_ids
            train = [treated[s] for s in sorted(treated) if s not in test_ids]
            expected = build_pattern_corpora(train, labels).fingerprint()
            assert out.corpora_fingerprint == expected

    def test_report_round_trip(self, small_run, tmp_path):
        report = small_run[3]
        paths = report.write(tmp_path)
        data = json.loads(paths[0].read_text())
        again = EvalReport.from_dict(data)
        assert again.summary() == report.summary()
        assert again.to_dict() == data

    def test_two_folds_on_four_stories(self, bundle):
        docs, labels = generate_corpus(4, seed=2)
        plan = make_cv_plan([d.story_id for d in docs], k=2, repeats=1, seed=0)
        report = run_cv(docs, bundle, [ClassifierSpec("svm")], plan, labels)
        assert len([f for f in report.folds if f.model == "svm"]) == 2

    def test_unknown_story(self, bundle):
        docs, labels = generate_corpus(4, seed=2)
        plan = make_cv_plan(["x", "y", "z"], k=3, repeats=1)
        with pytest.raises(Exception, match="missing"):
            run_cv(docs, bundle, [ClassifierSpec("svm")], plan, labels)

    def test_treated_docs_accepted(self):
        doc = make_doc("a", [["of", "hubei"]], [("hubei", PROVINCE, 0, 1)])
        doc2 = make_doc("b", [["hunan", "MONTH"]], [("hunan", PROVINCE, 0, 0)])
        doc3 = make_doc("c", [["of", "hubei"], ["hunan", "MONTH"]],
                        [("hubei", PROVINCE, 0, 1), ("hunan", PROVINCE, 1, 0)])
        labels = {"a": {"hubei": 1}, "b": {"hunan": 0}, "c": {"hubei": 1, "hunan": 0}}
        plan = make_cv_plan(["a", "b", "c"], k=3, repeats=1)
        report = run_cv([doc, doc2, doc3], None, [], plan, labels)
        assert report.mean_accuracy("dictionary") == pytest.approx(
            np.mean([f.accuracy for f in report.folds if f.model == "dictionary"]))
