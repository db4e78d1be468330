"""Operator entry points: synth, train, eval, kb, ask, serve.

Exit codes: 0 success, 2 usage error (bad flags or missing input paths),
1 runtime failure. ``--json`` switches stdout to machine-readable JSON.
"""

from __future__ import annotations

import argparse
import json
import sys
from functools import partial
from pathlib import Path

from dsqa import classifier, kb, ner, serialize, synth
from dsqa.corpus import LabeledQuestion, load_corpus, save_corpus
from dsqa.dialog import DialogConfig, Pipeline, handle_turn, load_template_set
from dsqa.evaluation import cross_validate, span_f1, weighted_prf

USAGE_ERROR = 2
RUNTIME_ERROR = 1


class UsageError(Exception):
    pass


def _require_file(path: str, flag: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{flag}: no such file or directory: {path}")
    return p


def _emit(args, payload: dict, human: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print(human)


def cmd_synth(args) -> int:
    corpus = synth.generate_synthetic_corpus(
        synth.SynthConfig(size=args.size), seed=args.seed
    )
    save_corpus(corpus, args.out)
    _emit(
        args,
        {"written": args.out, "size": len(corpus), "seed": args.seed},
        f"wrote {len(corpus)} synthetic questions to {args.out} (seed {args.seed})",
    )
    return 0


def _load_train_config(args) -> dict:
    if args.config:
        return json.loads(_require_file(args.config, "--config").read_text())
    return {}


def cmd_train(args) -> int:
    _require_file(args.corpus, "--corpus")
    data = load_corpus(args.corpus)
    overrides = _load_train_config(args)
    if args.task == "classifier":
        kind = overrides.pop("model", "linear")
        config = classifier.TrainConfig(seed=args.seed, **overrides)
        if kind == "linear":
            model = classifier.train_linear(data, config)
        elif kind == "conv":
            model = classifier.train_conv(data, config)
        else:
            raise UsageError(f"--config model must be linear or conv, got {kind!r}")
    else:
        kind = overrides.pop("model", "crf")
        if kind == "crf":
            config = ner.CrfTrainConfig(seed=args.seed, **overrides)
            model = ner.train_crf(data, config)
        elif kind == "hmm":
            model = ner.train_hmm(data)
        else:
            raise UsageError(f"--config model must be crf or hmm, got {kind!r}")
    model.save(args.out)
    _emit(
        args,
        {"task": args.task, "model": kind, "out": args.out, "trained_on": len(data)},
        f"trained {kind} {args.task} on {len(data)} questions -> {args.out}",
    )
    return 0


def _train_classifier_fold(train, kind: str, overrides: dict, seed: int):
    config = classifier.TrainConfig(seed=seed, **overrides)
    if kind == "conv":
        return classifier.train_conv(train, config)
    return classifier.train_linear(train, config)


def _score_classifier_fold(model, test) -> dict[str, float]:
    gold = [q.qtype.value for q in test]
    predicted = [classifier.predict_qtype(model, q.text)[0].value for q in test]
    report = weighted_prf(gold, predicted)
    return {
        "weighted_precision": report.weighted_precision,
        "weighted_recall": report.weighted_recall,
        "weighted_f1": report.weighted_f1,
        "accuracy": report.accuracy,
    }


def _train_ner_fold(train, kind: str, overrides: dict, seed: int):
    if kind == "hmm":
        return ner.train_hmm(train)
    return ner.train_crf(train, ner.CrfTrainConfig(seed=seed, **overrides))


def _score_ner_fold(model, test) -> dict[str, float]:
    gold = [list(q.entities) for q in test]
    predicted = [ner.predict_entities(model, q.text) for q in test]
    report = span_f1(gold, predicted)
    return {
        "weighted_precision": report.weighted_precision,
        "weighted_recall": report.weighted_recall,
        "weighted_f1": report.weighted_f1,
        "accuracy": report.accuracy,
    }


def cmd_eval(args) -> int:
    _require_file(args.corpus, "--corpus")
    data = load_corpus(args.corpus)
    if args.model:
        _require_file(args.model, "--model")
        kind = serialize.peek_kind(args.model)
        if args.task == "classifier":
            model = (
                classifier.LinearModel.load(args.model)
                if kind == "linear"
                else classifier.ConvModel.load(args.model)
            )
            scores = _score_classifier_fold(model, data)
        else:
            model = (
                ner.CrfModel.load(args.model)
                if kind == "crf"
                else ner.HmmModel.load(args.model)
            )
            scores = _score_ner_fold(model, data)
        _emit(
            args,
            {"task": args.task, "model": args.model, "scores": scores},
            "\n".join(f"{k}: {v:.4f}" for k, v in sorted(scores.items())),
        )
        return 0

    overrides = _load_train_config(args)
    kind = overrides.pop("model", "linear" if args.task == "classifier" else "crf")
    if args.task == "classifier":
        trainer = partial(
            _train_classifier_fold, kind=kind, overrides=overrides, seed=args.seed
        )
        scorer = _score_classifier_fold
    else:
        trainer = partial(
            _train_ner_fold, kind=kind, overrides=overrides, seed=args.seed
        )
        scorer = _score_ner_fold
    result = cross_validate(
        data, args.k, trainer, scorer, seed=args.seed, jobs=args.jobs
    )
    lines = [f"{args.k}-fold cross-validation ({kind} {args.task}):"]
    for key in sorted(result.mean):
        lines.append(
            f"  {key}: mean {result.mean[key]:.4f} (std {result.std[key]:.4f})"
        )
    _emit(args, {"task": args.task, "model": kind, **result.as_dict()},
          "\n".join(lines))
    return 0


def cmd_kb(args) -> int:
    conso = _require_file(args.conso, "--conso")
    rel = _require_file(args.rel, "--rel")
    sat = _require_file(args.sat, "--sat") if args.sat else None
    concepts, relations, attributes = kb.parse_rrf(conso, rel, sat)
    index = kb.build_index(concepts, relations, attributes)
    files = kb.export_json(index, args.out)
    _emit(
        args,
        {
            "out": args.out,
            "concepts": len(concepts),
            "relations": len(relations),
            "attributes": len(attributes),
            "files": [str(f) for f in files],
        },
        f"parsed {len(concepts)} concepts, {len(relations)} relations, "
        f"{len(attributes)} attributes -> {len(files)} JSON files in {args.out}",
    )
    return 0


def cmd_ask(args) -> int:
    models_dir = _require_file(args.models, "--models")
    kb_dir = _require_file(args.kb, "--kb")
    from dsqa.service import load_classifier, load_tagger, turn_payload

    classifier_path = models_dir / "classifier.npz"
    ner_path = models_dir / "ner.npz"
    for p in (classifier_path, ner_path):
        if not p.exists():
            raise UsageError(f"--models: expected {p.name} in {models_dir}")
    pipeline = Pipeline(
        classifier=load_classifier(str(classifier_path)),
        ner=load_tagger(str(ner_path)),
        index=kb.import_json(kb_dir),
        templates=load_template_set(args.templates),
        config=DialogConfig(),
    )
    turn = handle_turn(pipeline, args.question)
    payload = turn_payload(turn)
    payload["trace"] = turn.trace.stages
    _emit(args, payload, turn.answer_text)
    return 0


def cmd_serve(args) -> int:
    from dsqa.service import load_service_config, serve

    _require_file(args.config, "--config")
    config = load_service_config(args.config)
    serve(config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dsqa",
        description="Dietary-supplement question answering toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a classifier or entity tagger")
    p.add_argument("--task", choices=("classifier", "ner"), required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON file of training options")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="k-fold cross-validation or scoring")
    p.add_argument("--task", choices=("classifier", "ner"), required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--model", help="score this saved model instead of running CV")
    p.add_argument("--config", help="JSON file of training options")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("kb", help="parse RRF files and export JSON indexes")
    p.add_argument("--conso", required=True)
    p.add_argument("--rel", required=True)
    p.add_argument("--sat")
    p.add_argument("--out", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_kb)

    p = sub.add_parser("ask", help="answer one question from the command line")
    p.add_argument("--models", required=True, help="directory with classifier.npz and ner.npz")
    p.add_argument("--kb", required=True, help="directory of exported KB JSON")
    p.add_argument("--templates", help="answer template JSON file")
    p.add_argument("question")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_ask)

    p = sub.add_parser("serve", help="run the HTTP chat service")
    p.add_argument("--config", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
