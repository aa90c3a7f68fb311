"""Command-line entry point.

Subcommands mirror the pipeline stages (scrape, clean, split,
train-classifier, predict, eval, train-lm, generate, grid, report)
plus `pipeline` for declarative end-to-end runs. Exit codes: 0
success, 1 validation error, 2 stage failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from . import ingest, reports
from .data import LabeledExample, encode_examples, split_corpus
from .langgen import (
    DecodeConfig,
    LmBundle,
    LmHyperparams,
    fine_tune_for_type,
    generate,
    loss_table,
)
from .metrics import load_predictions, metrics_report
from .model import (
    PRESETS,
    init_classifier,
    init_mlm,
    load_checkpoint,
    save_checkpoint,
)
from .pipeline import ConfigError, RunConfig, StageError, run_pipeline
from .preprocess import clean
from .tokenizer import Vocabulary, build_vocab
from .training import TrainHyperparams, predict, run_grid, train_classifier
from .types import InvalidTypeError, parse_type

FIXTURES_ENV = "MBTIKIT_FIXTURES"

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_STAGE = 2


def _fixtures_dir(arg: str | None) -> str | None:
    return arg or os.environ.get(FIXTURES_ENV)


def cmd_scrape(args) -> int:
    section = parse_type(args.section)
    fixtures = _fixtures_dir(args.fixtures)
    if fixtures:
        fetcher = ingest.FixtureFetcher(fixtures)
    elif args.base_url:
        fetcher = ingest.HttpFetcher(args.base_url, delay=args.delay)
    else:
        print("error: need --fixtures, $MBTIKIT_FIXTURES, or --base-url",
              file=sys.stderr)
        return EXIT_VALIDATION
    posts = ingest.scrape_section(
        fetcher, section, max_posts=args.max_posts, min_chars=args.min_chars
    )
    corpus = ingest.Corpus(posts=posts)
    ingest.save_corpus(corpus, args.out)
    n_posts, n_words = ingest.corpus_stats(corpus)
    print(f"{section}: {n_posts} posts, {n_words} words -> {args.out}")
    return EXIT_OK


def cmd_clean(args) -> int:
    corpus = ingest.load_corpus(args.infile)
    with open(args.out, "w", encoding="utf-8") as fh:
        for post in corpus.posts:
            doc = clean(post.body, preserve_case=args.preserve_case)
            fh.write(
                json.dumps(
                    {
                        "type": post.section_label.letters,
                        "body": post.body,
                        "idx": post.post_index,
                        "url": post.source_url,
                        "clean_body": doc.tokens_text,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    print(f"cleaned {corpus.post_count} posts -> {args.out}")
    return EXIT_OK


def _load_clean_jsonl(path: str | Path) -> list[LabeledExample]:
    examples = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            text = rec.get("clean_body") or rec.get("body", "")
            if text:
                examples.append(
                    LabeledExample(text=text, label=parse_type(rec["type"]))
                )
    return examples


def _save_examples(examples, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(
                json.dumps(
                    {"type": ex.label.letters, "clean_body": ex.text},
                    ensure_ascii=False,
                )
                + "\n"
            )


def cmd_split(args) -> int:
    examples = _load_clean_jsonl(args.infile)
    train, test = split_corpus(examples, args.train_fraction, seed=args.seed)
    _save_examples(train, args.train_out)
    _save_examples(test, args.test_out)
    print(f"split {len(examples)} -> {len(train)} train / {len(test)} test")
    return EXIT_OK


def _hyperparams_from_toml(path: str) -> tuple[dict, dict]:
    import tomli

    raw = tomli.loads(Path(path).read_text(encoding="utf-8"))
    return dict(raw.get("train", {})), dict(raw.get("run", {}))


def cmd_train_classifier(args) -> int:
    train_cfg, run_cfg = ({}, {})
    if args.config:
        train_cfg, run_cfg = _hyperparams_from_toml(args.config)
    hp = TrainHyperparams(**train_cfg)
    preset = run_cfg.get("preset", args.preset)
    examples = _load_clean_jsonl(args.train)
    vocab = build_vocab(
        [ex.text for ex in examples],
        size=int(run_cfg.get("vocab_size", args.vocab_size)),
    )
    cfg = PRESETS[preset](vocab_size=len(vocab))
    max_seq_len = min(hp.max_seq_len, cfg.max_seq_len)
    encoded = encode_examples(examples, vocab, max_seq_len)
    model = init_classifier(cfg, seed=hp.seed)
    history = train_classifier(model, encoded, hp)
    save_checkpoint(
        args.out, model, vocab,
        hyperparams=dataclasses.asdict(hp), loss_history=history,
    )
    print(f"trained {hp.epochs} epochs; final loss {history[-1]:.4f} -> {args.out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    model, vocab, meta = load_checkpoint(args.model)
    predicted, scores = predict(model, args.text, vocab)
    print(predicted)
    if args.scores:
        from .types import all_types

        for t, s in zip(all_types(), scores):
            print(f"{t} {s:.6f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    records = load_predictions(args.pred)
    report = metrics_report(records)
    md = "# Evaluation\n\n" + reports.metrics_sections(report) + "\n"
    Path(args.report).write_text(md, encoding="utf-8")
    if args.csv:
        Path(args.csv).write_text(reports.metrics_csv(report), encoding="utf-8")
    print(
        f"n={report.n_records} exact={report.exact_accuracy:.4f} "
        f"expected_matches={report.expected_matches:.4f}"
    )
    return EXIT_OK


def cmd_train_lm(args) -> int:
    type_label = parse_type(args.type)
    examples = [
        ex for ex in _load_clean_jsonl(args.corpus) if ex.label == type_label
    ]
    if not examples:
        print(f"error: no posts labeled {type_label} in {args.corpus}",
              file=sys.stderr)
        return EXIT_VALIDATION
    hp_kwargs = {}
    if args.config:
        import tomli

        hp_kwargs = dict(
            tomli.loads(Path(args.config).read_text()).get("train_lm", {})
        )
    hp = LmHyperparams(**hp_kwargs)
    vocab = build_vocab([ex.text for ex in examples], size=args.vocab_size)
    cfg = PRESETS[args.preset](vocab_size=len(vocab), case_sensitive=True)
    max_seq_len = min(hp.max_seq_len, cfg.max_seq_len)
    encoded = encode_examples(examples, vocab, max_seq_len)
    model = init_mlm(cfg, seed=hp.seed)
    bundle = fine_tune_for_type(type_label, model, encoded, vocab, hp)
    save_checkpoint(
        args.out, model, vocab,
        hyperparams=dataclasses.asdict(hp),
        loss_history=bundle.per_epoch_loss,
        extra={"type_label": type_label.letters},
    )
    print(
        f"{type_label}: {len(examples)} posts, final loss "
        f"{bundle.final_loss:.5f} -> {args.out}"
    )
    return EXIT_OK


def cmd_generate(args) -> int:
    model, vocab, meta = load_checkpoint(args.model)
    type_label = parse_type(meta.get("type_label", "INTJ"))
    bundle = LmBundle(
        type_label=type_label, model=model, vocab=vocab, per_epoch_loss=[0.0]
    )
    cfg = DecodeConfig(
        strategy=args.strategy,
        top_k=args.top_k,
        temperature=args.temperature,
        max_new_tokens=args.max_new_tokens,
        seed=args.seed,
    )
    print(generate(bundle, args.prompt, cfg))
    return EXIT_OK


def cmd_grid(args) -> int:
    import tomli

    raw = tomli.loads(Path(args.config).read_text(encoding="utf-8"))
    rows = raw.get("grid", [])
    if not rows:
        print("error: config has no [[grid]] rows", file=sys.stderr)
        return EXIT_VALIDATION
    base = dict(raw.get("train", {}))
    grid = [TrainHyperparams(**{**base, **row}) for row in rows]

    train_examples = _load_clean_jsonl(args.train)
    test_examples = _load_clean_jsonl(args.test)
    vocab = build_vocab(
        [ex.text for ex in train_examples], size=args.vocab_size
    )
    preset = raw.get("run", {}).get("preset", args.preset)
    cfg = PRESETS[preset](vocab_size=len(vocab))
    max_seq_len = min(max(hp.max_seq_len for hp in grid), cfg.max_seq_len)
    train_enc = encode_examples(train_examples, vocab, max_seq_len)
    test_enc = encode_examples(test_examples, vocab, max_seq_len)
    results = run_grid(grid, cfg, train_enc, test_enc)
    md = reports.grid_section(results) + "\n"
    Path(args.report).write_text(md, encoding="utf-8")
    Path(args.report).with_suffix(".csv").write_text(reports.grid_csv(results))
    for hp, acc in results:
        print(f"lr={hp.learning_rate:g} seq={hp.max_seq_len} "
              f"epochs={hp.epochs} acc={acc:.4f}")
    return EXIT_OK


def cmd_report(args) -> int:
    sections = []
    if args.pred:
        report = metrics_report(load_predictions(args.pred))
        sections.append(reports.metrics_sections(report))
    if args.lm_losses:
        raw = json.loads(Path(args.lm_losses).read_text())
        table = loss_table_from_json(raw)
        sections.append(reports.loss_table_section(table))
    if not sections:
        print("error: nothing to report (need --pred and/or --lm-losses)",
              file=sys.stderr)
        return EXIT_VALIDATION
    Path(args.out).write_text(
        "# Report\n\n" + "\n\n".join(sections) + "\n", encoding="utf-8"
    )
    print(f"wrote {args.out}")
    return EXIT_OK


def loss_table_from_json(raw: dict) -> dict:
    """Build the loss-table report payload from {"ENFJ": loss, ...}."""
    from .types import all_types

    rows = []
    for t in all_types():
        if t.letters not in raw:
            raise ValueError(f"missing loss for {t}")
        rows.append((t.letters, float(raw[t.letters])))
    if len(raw) != 16:
        raise ValueError("expected exactly 16 per-type losses")
    e = [loss for code, loss in rows if code.startswith("E")]
    i = [loss for code, loss in rows if code.startswith("I")]
    return {
        "rows": rows,
        "extrovert_mean_loss": sum(e) / len(e),
        "introvert_mean_loss": sum(i) / len(i),
    }


def cmd_pipeline(args) -> int:
    overrides = {}
    if args.out_dir:
        overrides["out_dir"] = args.out_dir
    if args.seed is not None:
        overrides["seed"] = args.seed
    config = RunConfig.from_toml(args.config, overrides)
    summary = run_pipeline(config)
    print(f"ran: {summary['ran'] or '-'}; skipped: {summary['skipped'] or '-'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mbtikit",
        description="MBTI forum-post classification and generation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scrape", help="ingest one forum section")
    p.add_argument("--section", required=True)
    p.add_argument("--max-posts", type=int, default=ingest.DEFAULT_POST_CAP)
    p.add_argument("--min-chars", type=int, default=ingest.DEFAULT_MIN_CHARS)
    p.add_argument("--out", required=True)
    p.add_argument("--fixtures", help=f"fixture dir (or ${FIXTURES_ENV})")
    p.add_argument("--base-url", help="live forum base URL")
    p.add_argument("--delay", type=float, default=1.0)
    p.set_defaults(func=cmd_scrape)

    p = sub.add_parser("clean", help="run the cleaning pipeline")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--preserve-case", action="store_true")
    p.set_defaults(func=cmd_clean)

    p = sub.add_parser("split", help="stratified train/test split")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--train-out", required=True)
    p.add_argument("--test-out", required=True)
    p.add_argument("--train-fraction", type=float, default=0.85)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train-classifier", help="fine-tune the classifier")
    p.add_argument("--config", help="TOML with [train] hyperparameters")
    p.add_argument("--train", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--preset", choices=sorted(PRESETS), default="tiny")
    p.add_argument("--vocab-size", type=int, default=400)
    p.set_defaults(func=cmd_train_classifier)

    p = sub.add_parser("predict", help="classify one text")
    p.add_argument("--model", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--scores", action="store_true")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="compute the metric family")
    p.add_argument("--pred", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("train-lm", help="fine-tune one per-type masked LM")
    p.add_argument("--type", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="TOML with [train_lm] hyperparameters")
    p.add_argument("--preset", choices=sorted(PRESETS), default="tiny")
    p.add_argument("--vocab-size", type=int, default=400)
    p.set_defaults(func=cmd_train_lm)

    p = sub.add_parser("generate", help="mask-fill continuation from a prompt")
    p.add_argument("--model", required=True)
    p.add_argument("--prompt", required=True)
    p.add_argument("--max-new-tokens", type=int, default=32)
    p.add_argument("--strategy", choices=["greedy", "top_k_sampling"],
                   default="greedy")
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("grid", help="hyperparameter grid run")
    p.add_argument("--config", required=True,
                   help="TOML with [train] base and [[grid]] rows")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--preset", choices=sorted(PRESETS), default="tiny")
    p.add_argument("--vocab-size", type=int, default=400)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("report", help="render report sections")
    p.add_argument("--pred")
    p.add_argument("--lm-losses", help="JSON map type -> final loss")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("pipeline", help="run stages from a declarative config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidTypeError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
