"""Command-line interface: train, annotate, evaluate, inspect, synth, lexicon.

Exit codes: 0 on success, 1 on usage errors, 2 on data errors.  Diagnostics
go to stderr; the log level is controlled by the LEMTAG_LOG environment
variable (e.g. LEMTAG_LOG=DEBUG).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .baselines import MostFrequentLemmatizer, TransducerLemmatizer
from .corpus import (
    ColumnMap,
    CorpusFormatError,
    Sentence,
    Token,
    corpus_vocabulary,
    default_spec,
    evaluate,
    generate_synthetic_corpus,
    joint_data,
    lemmatization_data,
    read_corpus,
    syncretic_spec,
    tagging_data,
    truncate_corpus,
    write_corpus,
)
from .edit_tree import render_tree
from .features import Lexicon, build_lexicon_from_text
from .joint import JointTaggerLemmatizer
from .lemmatizer import TreeLemmatizer
from .model_io import ModelFormatError, load_model, save_model
from .pipeline import MorphPipeline
from .tagger import CrfTagger

__all__ = ["main"]

logger = logging.getLogger(__name__)

MODEL_KINDS = ("simple", "jck", "lemmatizer", "tagger", "pipeline", "joint")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="lemtag", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_format(p):
        p.add_argument("--format", choices=["conll09", "tsv"], default="tsv")
        p.add_argument(
            "--columns",
            help="1-based column map for conll09, e.g. form=2,lemma=3,pos=5,feats=7",
        )

    train = sub.add_parser("train", help="train a model")
    train.add_argument("--model", choices=MODEL_KINDS, required=True)
    train.add_argument("--train", required=True, metavar="FILE")
    add_format(train)
    train.add_argument("-o", "--output", required=True, metavar="MODEL")
    train.add_argument("--pretrained-tagger", metavar="MODEL")
    train.add_argument("--no-pretrain", action="store_true",
                       help="joint only: start tag weights at zero")
    train.add_argument("--lexicon", action="append", default=[],
                       metavar="NAME=PATH")
    train.add_argument("--lemma-rewrite", action="append", default=[],
                       metavar="FORM=LEMMA")
    train.add_argument("--max-train-tokens", type=int)
    train.add_argument("--seed", type=int, default=42)
    train.add_argument("--min-pair-count", type=int, default=2)
    train.add_argument("--order", type=int, choices=[1, 2], default=2)
    train.add_argument("--epochs", type=int, default=10)
    train.add_argument("--max-iter", type=int, default=200)
    train.add_argument("--iterations", type=int, default=10,
                       help="jck perceptron iterations")

    annotate = sub.add_parser("annotate", help="fill lemma/tag columns")
    annotate.add_argument("-m", "--model", required=True, metavar="MODEL")
    annotate.add_argument("--input", required=True, metavar="FILE")
    annotate.add_argument("--output", required=True, metavar="FILE")
    add_format(annotate)

    ev = sub.add_parser("evaluate", help="score predictions against gold")
    ev.add_argument("--gold", required=True, metavar="FILE")
    ev.add_argument("--pred", required=True, metavar="FILE")
    ev.add_argument("--train-vocab", required=True, metavar="FILE",
                    help="training corpus; its forms define unknown tokens")
    add_format(ev)
    ev.add_argument("--json", action="store_true")

    inspect = sub.add_parser("inspect", help="dump model internals")
    inspect.add_argument("-m", "--model", required=True, metavar="MODEL")
    inspect.add_argument("--top-features", type=int, default=0, metavar="K")
    inspect.add_argument("--trees", action="store_true")

    synth = sub.add_parser("synth", help="generate a synthetic corpus")
    synth.add_argument("--seed", type=int, default=42)
    synth.add_argument("--out-dir", required=True)
    synth.add_argument("--preset", choices=["default", "syncretic"],
                       default="default")
    synth.add_argument("--train-tokens", type=int, default=5000)
    synth.add_argument("--dev-tokens", type=int, default=1000)
    synth.add_argument("--test-tokens", type=int, default=1000)
    synth.add_argument("--format", choices=["conll09", "tsv"], default="tsv")

    lex = sub.add_parser("lexicon", help="build a word list from raw text")
    lex.add_argument("--input", required=True, metavar="FILE")
    lex.add_argument("--min-count", type=int, default=1)
    lex.add_argument("-o", "--output", required=True, metavar="FILE")

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(
        level=os.environ.get("LEMTAG_LOG", "WARNING").upper(),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    try:
        command = {
            "train": cmd_train,
            "annotate": cmd_annotate,
            "evaluate": cmd_evaluate,
            "inspect": cmd_inspect,
            "synth": cmd_synth,
            "lexicon": cmd_lexicon,
        }[args.command]
        return command(args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except (CorpusFormatError, ModelFormatError, FileNotFoundError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


# ----------------------------------------------------------------------
# command implementations
# ----------------------------------------------------------------------


def _columns(args) -> Optional[ColumnMap]:
    if not getattr(args, "columns", None):
        return None
    fields = {}
    for part in args.columns.split(","):
        key, _, value = part.partition("=")
        if key not in ("form", "lemma", "pos", "feats") or not value.isdigit():
            raise UsageError(f"bad --columns entry {part!r}")
        fields[key] = int(value)
    return ColumnMap(**fields)


def _pairs(values: list[str], flag: str) -> dict[str, str]:
    table = {}
    for item in values:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise UsageError(f"bad {flag} entry {item!r}, expected KEY=VALUE")
        table[key] = value
    return table


def _read(args, path) -> list[Sentence]:
    rewrites = _pairs(getattr(args, "lemma_rewrite", []), "--lemma-rewrite")
    return read_corpus(path, format=args.format, columns=_columns(args),
                       lemma_rewrites=rewrites or None)


def _require_tags(sentences, what) -> None:
    if any(t.tag is None for s in sentences for t in s):
        raise ValueError(f"{what} requires a tag on every token")


def _require_lemmata(sentences, what) -> None:
    if any(t.lemma is None for s in sentences for t in s):
        raise ValueError(f"{what} requires a lemma on every token")


def cmd_train(args) -> int:
    sentences = truncate_corpus(_read(args, args.train), args.max_train_tokens)
    if not sentences:
        raise ValueError("training corpus is empty")
    lexicons = [
        Lexicon.load(path, name)
        for name, path in _pairs(args.lexicon, "--lexicon").items()
    ]
    kind = args.model
    if kind in ("simple", "jck", "lemmatizer", "pipeline", "joint"):
        _require_lemmata(sentences, f"training a {kind} model")
    if kind in ("simple", "jck", "lemmatizer", "tagger", "pipeline", "joint"):
        _require_tags(sentences, f"training a {kind} model")

    if kind == "simple":
        X, y = lemmatization_data(sentences)
        model = MostFrequentLemmatizer().fit(X, y)
    elif kind == "jck":
        X, y = lemmatization_data(sentences)
        model = TransducerLemmatizer(iterations=args.iterations, seed=args.seed)
        model.fit(X, y)
    elif kind == "lemmatizer":
        X, y = lemmatization_data(sentences)
        model = TreeLemmatizer(
            min_pair_count=args.min_pair_count,
            max_iter=args.max_iter,
            lexicons=lexicons,
        )
        model.fit(X, y)
    elif kind == "tagger":
        X, y = tagging_data(sentences)
        model = CrfTagger(order=args.order, epochs=args.epochs, seed=args.seed)
        model.fit(X, y)
    elif kind == "pipeline":
        X, y = joint_data(sentences)
        model = MorphPipeline(
            tagger_params={"order": args.order, "epochs": args.epochs},
            lemmatizer_params={
                "min_pair_count": args.min_pair_count,
                "max_iter": args.max_iter,
                "lexicons": lexicons,
            },
            seed=args.seed,
        )
        model.fit(X, y)
    else:  # joint
        pretrained = None
        if args.pretrained_tagger:
            loaded_kind, pretrained = load_model(args.pretrained_tagger)
            if loaded_kind != "tagger":
                raise ValueError(
                    f"--pretrained-tagger expects a tagger model, got {loaded_kind}"
                )
        X, y = joint_data(sentences)
        model = JointTaggerLemmatizer(
            pretrained_tagger=pretrained,
            pretrain=not args.no_pretrain,
            epochs=args.epochs,
            seed=args.seed,
            tagger_params={"order": args.order, "epochs": args.epochs},
            min_pair_count=args.min_pair_count,
            lexicons=lexicons,
        )
        model.fit(X, y)
        if args.pretrained_tagger:
            model.provenance_ = {"pretrained_tagger_path": args.pretrained_tagger}

    save_model(model, args.output, kind)
    print(f"saved {kind} model to {args.output}", file=sys.stderr)
    return 0


def _annotate_sentences(kind, model, sentences) -> list[Sentence]:
    out: list[Sentence] = []
    if kind in ("simple", "jck", "lemmatizer"):
        _require_tags(sentences, f"annotating with a {kind} model")
    for sentence in sentences:
        forms = [t.form for t in sentence]
        if kind == "tagger":
            tags = model.tag_sentence(forms)
            out.append([
                Token(t.form, t.lemma, tag) for t, tag in zip(sentence, tags)
            ])
        elif kind in ("pipeline", "joint"):
            decoded = model.decode(forms)
            out.append([
                Token(form, lemma, tag)
                for form, (tag, lemma) in zip(forms, decoded)
            ])
        elif kind == "lemmatizer":
            out.append([
                Token(t.form, model.predict_one(t.form, t.tag), t.tag)
                for t in sentence
            ])
        else:  # simple, jck
            out.append([
                Token(t.form, model.predict_one(t.form, t.tag), t.tag)
                for t in sentence
            ])
    return out


def cmd_annotate(args) -> int:
    kind, model = load_model(args.model)
    sentences = _read(args, args.input)
    annotated = _annotate_sentences(kind, model, sentences)
    write_corpus(annotated, args.output, format=args.format,
                 columns=_columns(args))
    return 0


def cmd_evaluate(args) -> int:
    gold = _read(args, args.gold)
    pred = _read(args, args.pred)
    vocab = corpus_vocabulary(_read(args, args.train_vocab))
    report = evaluate(gold, pred, vocab)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(report.table())
    return 0


def cmd_inspect(args) -> int:
    kind, model = load_model(args.model)
    print(f"kind: {kind}")
    if kind in ("lemmatizer", "joint"):
        print(f"lemma features: {len(model.dictionary_)}")
        print(f"edit trees: {len(model.inventory_)}")
        print(f"seen forms: {len(model.seen_)}")
    if kind in ("tagger",):
        print(f"tags: {len(model.tags_)}")
        print(f"tag features: {len(model.feat_dict_)}")
    if kind == "pipeline":
        print(f"tags: {len(model.tagger_.tags_)}")
        print(f"lemma features: {len(model.lemmatizer_.dictionary_)}")
        print(f"edit trees: {len(model.lemmatizer_.inventory_)}")
    if kind == "joint":
        print(f"tags: {len(model.tagger_.tags_)}")
    if kind == "jck":
        print(f"alphabet: {sorted(model.alphabet_)}")
        print(f"segments: {len(model.segment_options_)}")
    if kind == "simple":
        print(f"table entries: {len(model.table_)}")

    if args.trees:
        inventory = None
        if kind in ("lemmatizer", "joint"):
            inventory = model.inventory_
        elif kind == "pipeline":
            inventory = model.lemmatizer_.inventory_
        if inventory is None:
            raise ValueError(f"a {kind} model has no tree inventory")
        print("trees (count, rendering):")
        for tree in inventory.trees:
            print(f"  {inventory.counts[tree]:6d}  {render_tree(tree)}")

    if args.top_features:
        k = args.top_features
        if kind in ("lemmatizer", "joint"):
            theta = model.theta_
            names = model.dictionary_.names()
            order = np.argsort(-np.abs(theta))[:k]
            print(f"top {k} lemma features by |weight|:")
            for i in order:
                pretty = names[int(i)].replace("\t", "·")
                print(f"  {theta[int(i)]:+9.4f}  {pretty}")
        elif kind in ("tagger", "pipeline"):
            tagger = model if kind == "tagger" else model.tagger_
            flat = np.abs(tagger.W_).ravel()
            order = np.argsort(-flat)[:k]
            n_tags = len(tagger.tags_)
            print(f"top {k} tag features by |weight|:")
            for idx in order:
                f, t = divmod(int(idx), n_tags)
                pretty = tagger.feat_dict_.name(f).replace("\t", "·")
                print(f"  {tagger.W_[f, t]:+9.4f}  {pretty} & {tagger.tags_[t]}")
        else:
            raise ValueError(f"a {kind} model has no feature weights to rank")
    return 0


def cmd_synth(args) -> int:
    spec_factory = {"default": default_spec, "syncretic": syncretic_spec}[args.preset]
    spec = spec_factory(args.train_tokens, args.dev_tokens, args.test_tokens)
    corpus = generate_synthetic_corpus(args.seed, spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    suffix = "tsv" if args.format == "tsv" else "conll"
    for split in ("train", "dev", "test"):
        path = out / f"{split}.{suffix}"
        write_corpus(getattr(corpus, split), path, format=args.format)
        print(f"wrote {path}", file=sys.stderr)
    return 0


def cmd_lexicon(args) -> int:
    with open(args.input, encoding="utf-8") as fh:
        words = build_lexicon_from_text(fh, min_count=args.min_count)
    Path(args.output).write_text(
        "\n".join(words) + ("\n" if words else ""), encoding="utf-8"
    )
    print(f"wrote {len(words)} words to {args.output}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
