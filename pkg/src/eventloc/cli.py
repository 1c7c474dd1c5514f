"""Command-line entry point: ``eventloc <command> [options]``.

Every command accepts ``--config FILE`` (flat ``key=value`` lines, keys
spelled like the long flags) and explicit flags override the file.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import learn
from .corpus_io import CorpusError, read_corpus, read_treated, write_treated
from .evaluate import (
    ClassifierSpec,
    EvalReport,
    EvaluationError,
    make_cv_plan,
    run_cv,
    write_accuracy_csv,
    write_roc_csv,
)
from .features import N_VALUES, FeatureError, PatternCorpora, assemble_dataset, build_pattern_corpora
from .learn.baselines import focus_baseline, nearest_verb_baseline
from .lexicon import LexiconError, load_bundle
from .preprocess import treat_document
from .synthetic import default_lexicon_dir, generate_corpus, write_jsonl

log = logging.getLogger("eventloc")

EXIT_OK, EXIT_INPUT, EXIT_TRAIN, EXIT_PREDICT, EXIT_EVAL = 0, 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def parse_ngram_range(text: str) -> tuple[int, ...]:
    """``"2-7"`` or ``"2,3,5"`` to a tuple; every n must lie in 2..7."""
    text = str(text).strip()
    try:
        if "-" in text:
            lo, hi = (int(x) for x in text.split("-", 1))
            values = tuple(range(lo, hi + 1))
        else:
            values = tuple(sorted({int(x) for x in text.split(",") if x.strip()}))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad n-gram range {text!r}") from None
    if not values or min(values) < 2 or max(values) > 7:
        raise argparse.ArgumentTypeError(f"n-gram range {text!r} must lie within 2..7")
    return values


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in str(text).split(",") if x.strip())


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in str(text).split(",") if x.strip())


def read_config(path) -> dict[str, str]:
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}", EXIT_INPUT) from exc
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key=value", EXIT_INPUT)
        key, value = line.split("=", 1)
        values[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return values


# ---------------------------------------------------------------- commands


def _bundle(args):
    lex_dir = Path(args.lexicons) if args.lexicons else default_lexicon_dir()
    if not lex_dir.is_dir():
        raise CliError(f"lexicon directory not found: {lex_dir}", EXIT_INPUT)
    return load_bundle(lex_dir)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require_seed(args):
    if args.seed is None:
        raise CliError(f"{args.command} needs --seed", EXIT_INPUT)


def _treat_all(docs, bundle, jobs: int):
    if jobs > 1 and len(docs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(treat_document, docs, [bundle] * len(docs)))
    return [treat_document(d, bundle) for d in docs]


def _load_treated_or_raw(args):
    """Treated corpus from ``--treated``, or treat ``--corpus`` on the fly."""
    if args.treated:
        return read_treated(args.treated)
    if args.corpus:
        docs, labels = read_corpus(args.corpus)
        return _treat_all(docs, _bundle(args), args.jobs), labels
    raise CliError(f"{args.command} needs --treated or --corpus", EXIT_INPUT)


def cmd_treat(args) -> int:
    if not args.corpus:
        raise CliError("treat needs --corpus", EXIT_INPUT)
    bundle = _bundle(args)
    docs, labels = read_corpus(args.corpus)
    treated = _treat_all(docs, bundle, args.jobs)
    out = _out_dir(args) / "treated.jsonl"
    write_treated(out, treated, labels)
    for doc in treated:
        for loc in doc.locations:
            n = len({m.sentence_idx for m in doc.mentions if m.canonical == loc})
            print(f"{doc.story_id}\t{loc}\t{n} sentence{'s' if n != 1 else ''}")
    log.info("wrote %d treated stories to %s", len(treated), out)
    return EXIT_OK


def _trainer_params(args, model_type: str) -> dict:
    if model_type == "rforest":
        params = {"n_trees": args.trees, "seed": args.seed, "n_jobs": args.jobs}
        if args.mtry:
            params["features_per_split"] = args.mtry
        return params
    if model_type == "svm":
        if args.kernel != "rbf":
            raise CliError(f"unsupported kernel {args.kernel!r}", EXIT_INPUT)
        return {"C": args.C, "gamma": args.gamma}
    if model_type == "mlp":
        return {"hidden": args.hidden, "decay": args.decay, "epochs": args.epochs, "seed": args.seed}
    raise CliError(f"unknown model {model_type!r}", EXIT_INPUT)


def cmd_train(args) -> int:
    _require_seed(args)
    docs, labels = _load_treated_or_raw(args)
    corpora = build_pattern_corpora(docs, labels, args.ngrams)
    data = assemble_dataset(docs, corpora, labels)
    out = _out_dir(args)
    params = _trainer_params(args, args.model)
    try:
        if args.rfe:
            subset = learn.rfe_select(data, seed=args.seed, n_trees=args.rfe_trees)
            params["features"] = subset.retained
            (out / "features.json").write_text(json.dumps(subset.to_dict(), sort_keys=True) + "\n")
        model = learn.train(args.model, data, **params)
    except learn.TrainingError as exc:
        raise CliError(f"training failed: {exc}", EXIT_TRAIN) from exc
    learn.save_model(model, out / "model.json")
    (out / "corpora.json").write_text(corpora.to_json() + "\n")
    log.info("trained %s on %d rows; wrote %s", args.model, len(data), out)
    return EXIT_OK


def cmd_predict(args) -> int:
    if not (args.model_file and args.corpora):
        raise CliError("predict needs --model-file and --corpora", EXIT_INPUT)
    try:
        model = learn.load_model(args.model_file)
        corpora = PatternCorpora.from_dict(json.loads(Path(args.corpora).read_text()))
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot load model or corpora: {exc}", EXIT_INPUT) from exc
    docs, _ = _load_treated_or_raw(args)
    data = assemble_dataset(docs, corpora)
    try:
        proba, pred = learn.predict_rows(model, data.rows, args.threshold)
    except learn.FeatureMismatchError as exc:
        raise CliError(f"prediction failed: {exc}", EXIT_PREDICT) from exc
    out = _out_dir(args) / "predictions.csv"
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["story_id", "location", "probability", "predicted"])
        for row, p, y in zip(data.rows, proba, pred):
            writer.writerow([row.story_id, row.location, repr(float(p)), int(y)])
    log.info("wrote %d predictions to %s", len(data.rows), out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    _require_seed(args)
    docs, labels = _load_treated_or_raw(args)
    specs = []
    for name in args.models.split(","):
        name = name.strip()
        params = _trainer_params(args, name)
        params.pop("seed", None)  # per-fold seeds come from the plan
        params.pop("n_jobs", None)
        specs.append(ClassifierSpec(name, params))
    try:
        plan = make_cv_plan([d.story_id for d in docs], args.k, args.repeats, args.seed)
        report = run_cv(docs, None, specs, plan, labels, n_values=args.ngrams,
                        threshold=args.threshold, n_jobs=args.jobs)
    except (EvaluationError, ValueError) as exc:
        if isinstance(exc, (FeatureError, LexiconError, CorpusError)):
            raise
        raise CliError(f"evaluation failed: {exc}", EXIT_EVAL) from exc
    report.write(_out_dir(args))
    for name, s in report.summary().items():
        print(f"{name}\taccuracy={s['accuracy']:.4f}\tsingle_location={s['single_location_accuracy']:.4f}")
    return EXIT_OK


def cmd_baselines(args) -> int:
    docs, labels = _load_treated_or_raw(args)
    out = _out_dir(args) / "baselines.csv"
    correct = {"dictionary": 0, "nearest_verb": 0, "focus": 0}
    n_labeled = 0
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["story_id", "location", "Y", "dictionary", "nearest_verb", "focus"])
        for doc in docs:
            if not doc.mentions:
                continue
            nv, fc = nearest_verb_baseline(doc), focus_baseline(doc)
            for loc in doc.locations:
                pred = {"dictionary": 1, "nearest_verb": int(loc == nv), "focus": int(loc == fc)}
                y = labels.get(doc.story_id, {}).get(loc)
                if y is not None:
                    n_labeled += 1
                    for k, v in pred.items():
                        correct[k] += int(v == y)
                writer.writerow([doc.story_id, loc, "" if y is None else y, *pred.values()])
    if n_labeled:
        for k, c in correct.items():
            print(f"{k}\taccuracy={c / n_labeled:.4f}")
    return EXIT_OK


def cmd_export_plots(args) -> int:
    if not args.report:
        raise CliError("export-plots needs --report", EXIT_INPUT)
    try:
        report = EvalReport.read(args.report)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CliError(f"cannot read report {args.report}: {exc}", EXIT_INPUT) from exc
    out = _out_dir(args)
    write_accuracy_csv(report, out / "accuracy.csv")
    write_roc_csv(report, out / "roc.csv")
    report.province_counts(args.repeat).write_csv(out / "province_counts.csv")
    return EXIT_OK


def cmd_generate(args) -> int:
    _require_seed(args)
    docs, labels = generate_corpus(args.articles, args.seed, lexicon_dir=args.lexicons)
    out = _out_dir(args) / "corpus.jsonl"
    write_jsonl(out, docs, labels)
    log.info("wrote %d synthetic stories to %s", len(docs), out)
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file; flags override it")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--out-dir", default="out")
    common.add_argument("--lexicons", default=None, help="lexicon directory (default: bundled)")
    common.add_argument("-v", "--verbose", action="store_true")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--corpus", help="raw JSON-lines corpus")
    data.add_argument("--treated", help="treated JSON-lines corpus")
    data.add_argument("--ngrams", type=parse_ngram_range, default=N_VALUES, help="e.g. 2-7")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--trees", type=int, default=1000)
    model.add_argument("--mtry", type=int, default=None, help="features tried per split")
    model.add_argument("--kernel", default="rbf", choices=["rbf"])
    model.add_argument("--C", type=float, default=1.0)
    model.add_argument("--gamma", type=float, default=None)
    model.add_argument("--hidden", type=_int_list, default=(3, 5, 7, 9))
    model.add_argument("--decay", type=_float_list, default=(0.0, 1e-3, 1e-2, 1e-1))
    model.add_argument("--epochs", type=int, default=2000)
    model.add_argument("--threshold", type=float, default=learn.THRESHOLD)

    parser = argparse.ArgumentParser(prog="eventloc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("treat", parents=[common], help="clean, stem and generalize raw articles")
    p.add_argument("--corpus")
    p.set_defaults(func=cmd_treat)

    p = sub.add_parser("train", parents=[common, data, model], help="fit one classifier")
    p.add_argument("--model", required=False, default="rforest", choices=sorted(learn.TRAINERS))
    p.add_argument("--rfe", action="store_true", help="select features before fitting")
    p.add_argument("--rfe-trees", type=int, default=100)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common, data], help="score locations with a saved model")
    p.add_argument("--model-file")
    p.add_argument("--corpora")
    p.add_argument("--threshold", type=float, default=learn.THRESHOLD)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", parents=[common, data, model], help="repeated k-fold CV")
    p.add_argument("--models", default="rforest,svm,mlp")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--repeats", type=int, default=3)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("baselines", parents=[common, data], help="heuristic baseline predictions")
    p.set_defaults(func=cmd_baselines)

    p = sub.add_parser("export-plots", parents=[common], help="plot-ready CSVs from report.json")
    p.add_argument("--report")
    p.add_argument("--repeat", type=int, default=0, help="repeat used for province counts")
    p.set_defaults(func=cmd_export_plots)

    p = sub.add_parser("generate", parents=[common], help="write a synthetic labeled corpus")
    p.add_argument("--articles", type=int, default=60)
    p.set_defaults(func=cmd_generate)
    return parser


def _parse(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    config = read_config(args.config)
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in subparser._actions}
    unknown = sorted(set(config) - known)
    if unknown:
        raise CliError(f"unknown config keys: {', '.join(unknown)}", EXIT_INPUT)
    # string defaults go through each option's type conversion
    subparser.set_defaults(**config)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _parse(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        return args.func(args)
    except CliError as exc:
        print(f"eventloc: error: {exc}", file=sys.stderr)
        return exc.code
    except (LexiconError, CorpusError, FeatureError) as exc:
        print(f"eventloc: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
