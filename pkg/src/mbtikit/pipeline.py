"""End-to-end orchestration from a declarative TOML run config.

Stages run in dependency order (scrape -> clean -> split -> train ->
eval -> report). Each stage is idempotent: its inputs and settings are
content-hashed and a rerun with unchanged inputs is skipped. Every run
writes a provenance snapshot (config, seeds, corpus hashes) next to
its outputs, and reports embed enough of it to be reproduced
bit-identically at the tiny preset.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import zlib
from pathlib import Path
from typing import Any

import tomli

from . import ingest, reports
from .data import LabeledExample, encode_examples, split_corpus
from .metrics import load_predictions, metrics_report, save_predictions
from .model import PRESETS, init_classifier, save_checkpoint, load_checkpoint
from .preprocess import clean
from .tokenizer import build_vocab
from .training import TrainHyperparams, predict_batch, train_classifier
from .types import all_types, parse_type

log = logging.getLogger(__name__)

STAGE_ORDER = ("scrape", "clean", "split", "train", "eval", "report")


class ConfigError(ValueError):
    """Run config fails pre-flight validation."""


class StageError(RuntimeError):
    """A pipeline stage failed; partial artifacts are preserved."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclasses.dataclass
class RunConfig:
    out_dir: Path
    seed: int = 0
    preset: str = "tiny"
    stages: tuple[str, ...] = STAGE_ORDER[1:]
    corpus_path: Path | None = None
    fixtures_dir: Path | None = None
    sections: tuple[str, ...] = ()
    max_posts: int = ingest.DEFAULT_POST_CAP
    min_chars: int = ingest.DEFAULT_MIN_CHARS
    preserve_case: bool = False
    train_fraction: float = 0.85
    vocab_size: int = 400
    train: dict[str, Any] = dataclasses.field(default_factory=dict)

    @classmethod
    def from_toml(cls, path: str | Path, overrides: dict | None = None) -> "RunConfig":
        raw = tomli.loads(Path(path).read_text(encoding="utf-8"))
        run = dict(raw.get("run", {}))
        corpus = dict(raw.get("corpus", {}))
        run.update(overrides or {})
        return cls(
            out_dir=Path(run.get("out_dir", "out")),
            seed=int(run.get("seed", 0)),
            preset=run.get("preset", "tiny"),
            stages=tuple(run.get("stages", list(STAGE_ORDER[1:]))),
            corpus_path=Path(corpus["path"]) if "path" in corpus else None,
            fixtures_dir=(
                Path(corpus["fixtures"]) if "fixtures" in corpus else None
            ),
            sections=tuple(corpus.get("sections", [])),
            max_posts=int(corpus.get("max_posts", ingest.DEFAULT_POST_CAP)),
            min_chars=int(corpus.get("min_chars", ingest.DEFAULT_MIN_CHARS)),
            preserve_case=bool(run.get("preserve_case", False)),
            train_fraction=float(run.get("train_fraction", 0.85)),
            vocab_size=int(raw.get("vocab", {}).get("size", 400)),
            train=dict(raw.get("train", {})),
        )

    def validate(self) -> None:
        if self.preset not in PRESETS:
            raise ConfigError(
                f"unknown preset {self.preset!r}; expected one of {sorted(PRESETS)}"
            )
        unknown = set(self.stages) - set(STAGE_ORDER)
        if unknown:
            raise ConfigError(f"unknown stages: {sorted(unknown)}")
        if "scrape" in self.stages:
            if self.fixtures_dir is None and not self.sections:
                raise ConfigError("scrape stage needs corpus.fixtures and sections")
            if self.fixtures_dir is not None and not self.fixtures_dir.is_dir():
                raise ConfigError(f"fixtures dir not found: {self.fixtures_dir}")
        elif "clean" in self.stages:
            if self.corpus_path is None or not self.corpus_path.exists():
                raise ConfigError(f"corpus file not found: {self.corpus_path}")

    def stage_seed(self, stage: str) -> int:
        """Deterministic fan-out of the global seed per stage."""
        return (self.seed + zlib.crc32(stage.encode())) % (2**31)

    def snapshot(self) -> dict:
        d = dataclasses.asdict(self)
        for key in ("out_dir", "corpus_path", "fixtures_dir"):
            if d[key] is not None:
                d[key] = str(d[key])
        d["stages"] = list(d["stages"])
        d["sections"] = list(d["sections"])
        d["stage_seeds"] = {s: self.stage_seed(s) for s in STAGE_ORDER}
        return d

    def config_hash(self) -> str:
        return _hash_obj(self.snapshot())


def _hash_obj(obj: Any) -> str:
    return hashlib.sha256(
        json.dumps(obj, sort_keys=True).encode()
    ).hexdigest()[:16]


def _hash_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:16]


class _StageCache:
    """Content-hash skip: a stage reruns only when its inputs or
    settings changed, or its outputs are missing."""

    def __init__(self, out_dir: Path):
        self.dir = out_dir / ".stage_hashes"
        self.dir.mkdir(parents=True, exist_ok=True)

    def fresh(self, stage: str, key: str, outputs: list[Path]) -> bool:
        marker = self.dir / f"{stage}.json"
        if not marker.exists():
            return False
        if json.loads(marker.read_text()).get("key") != key:
            return False
        return all(p.exists() for p in outputs)

    def record(self, stage: str, key: str) -> None:
        (self.dir / f"{stage}.json").write_text(json.dumps({"key": key}))


def run_pipeline(config: RunConfig) -> dict:
    """Execute the requested stages in dependency order; returns a
    summary of produced artifacts."""
    config.validate()
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    cache = _StageCache(out)

    paths = {
        "corpus": config.corpus_path or out / "corpus.jsonl",
        "clean": out / "clean.jsonl",
        "train": out / "train.jsonl",
        "test": out / "test.jsonl",
        "ckpt": out / "ckpt",
        "preds": out / "preds.jsonl",
        "report_md": out / "report.md",
        "report_csv": out / "report.csv",
    }

    summary: dict[str, Any] = {"skipped": [], "ran": []}
    requested = [s for s in STAGE_ORDER if s in config.stages]
    for stage in requested:
        runner = _STAGES[stage]
        try:
            key_parts: dict[str, Any] = {"config": config.snapshot()}
            for dep in _STAGE_INPUTS[stage]:
                p = paths[dep]
                if p.is_dir():
                    weights = p / "weights.pt"
                    key_parts[dep] = (
                        _hash_file(weights) if weights.is_file() else None
                    )
                else:
                    key_parts[dep] = _hash_file(p) if p.is_file() else None
            key = _hash_obj(key_parts)
            outputs = [paths[name] for name in _STAGE_OUTPUTS[stage]]
            if cache.fresh(stage, key, outputs):
                summary["skipped"].append(stage)
                continue
            runner(config, paths)
            cache.record(stage, key)
            summary["ran"].append(stage)
        except Exception as exc:
            raise StageError(stage, exc) from exc

    provenance = {
        "config": config.snapshot(),
        "config_hash": config.config_hash(),
        "corpus_hash": (
            _hash_file(paths["corpus"]) if paths["corpus"].is_file() else None
        ),
    }
    (out / "provenance.json").write_text(json.dumps(provenance, indent=2))
    summary["provenance"] = provenance
    return summary


def _stage_scrape(config: RunConfig, paths: dict) -> None:
    fetcher = ingest.FixtureFetcher(config.fixtures_dir)
    posts = []
    for letters in config.sections:
        posts.extend(
            ingest.scrape_section(
                fetcher,
                parse_type(letters),
                max_posts=config.max_posts,
                min_chars=config.min_chars,
            )
        )
    ingest.save_corpus(ingest.Corpus(posts=posts), paths["corpus"])


def _stage_clean(config: RunConfig, paths: dict) -> None:
    corpus = ingest.load_corpus(paths["corpus"])
    with paths["clean"].open("w", encoding="utf-8") as fh:
        for post in corpus.posts:
            doc = clean(post.body, preserve_case=config.preserve_case)
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


def _load_clean(path: Path) -> list[LabeledExample]:
    examples = []
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec["clean_body"]:
                examples.append(
                    LabeledExample(
                        text=rec["clean_body"], label=parse_type(rec["type"])
                    )
                )
    return examples


def _save_examples(examples: list[LabeledExample], path: Path) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(
                json.dumps(
                    {"type": ex.label.letters, "clean_body": ex.text},
                    ensure_ascii=False,
                )
                + "\n"
            )


def _stage_split(config: RunConfig, paths: dict) -> None:
    examples = _load_clean(paths["clean"])
    train, test = split_corpus(
        examples, config.train_fraction, seed=config.stage_seed("split")
    )
    _save_examples(train, paths["train"])
    _save_examples(test, paths["test"])


def _stage_train(config: RunConfig, paths: dict) -> None:
    train_examples = _load_clean(paths["train"])
    hp = TrainHyperparams(
        seed=config.stage_seed("train"), **config.train
    )
    vocab = build_vocab(
        [ex.text for ex in train_examples], size=config.vocab_size
    )
    cfg = PRESETS[config.preset](
        vocab_size=len(vocab), case_sensitive=config.preserve_case
    )
    max_seq_len = min(hp.max_seq_len, cfg.max_seq_len)
    encoded = encode_examples(train_examples, vocab, max_seq_len)
    model = init_classifier(cfg, seed=hp.seed)
    history = train_classifier(model, encoded, hp)
    save_checkpoint(
        paths["ckpt"],
        model,
        vocab,
        hyperparams=dataclasses.asdict(hp),
        loss_history=history,
    )


def _stage_eval(config: RunConfig, paths: dict) -> None:
    from .metrics import PredictionRecord

    model, vocab, meta = load_checkpoint(paths["ckpt"])
    max_seq_len = min(
        meta["hyperparams"].get("max_seq_len", model.cfg.max_seq_len),
        model.cfg.max_seq_len,
    )
    test_examples = _load_clean(paths["test"])
    encoded = encode_examples(test_examples, vocab, max_seq_len)
    preds = predict_batch(model, encoded)
    records = [
        PredictionRecord(predicted=p, actual=ex.label)
        for p, ex in zip(preds, test_examples)
    ]
    save_predictions(records, paths["preds"])


def _stage_report(config: RunConfig, paths: dict) -> None:
    records = load_predictions(paths["preds"])
    report = metrics_report(records)
    prov = {
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "preset": config.preset,
    }
    md = (
        "# Run report\n\n"
        + reports.metrics_sections(report)
        + reports.provenance_footer(prov)
        + "\n"
    )
    paths["report_md"].write_text(md, encoding="utf-8")
    paths["report_csv"].write_text(reports.metrics_csv(report), encoding="utf-8")


_STAGES = {
    "scrape": _stage_scrape,
    "clean": _stage_clean,
    "split": _stage_split,
    "train": _stage_train,
    "eval": _stage_eval,
    "report": _stage_report,
}

_STAGE_INPUTS = {
    "scrape": [],
    "clean": ["corpus"],
    "split": ["clean"],
    "train": ["train"],
    "eval": ["test", "ckpt"],
    "report": ["preds"],
}

_STAGE_OUTPUTS = {
    "scrape": ["corpus"],
    "clean": ["clean"],
    "split": ["train", "test"],
    "train": ["ckpt"],
    "eval": ["preds"],
    "report": ["report_md", "report_csv"],
}
