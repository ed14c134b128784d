"""Command-line pipeline: preprocess, split, tokenize, train, eval, predict.

Configuration lives in an INI file with typed sections; command-line flags
override file values, and the effective configuration is echoed into the
output directory for provenance.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import sys
from pathlib import Path

import numpy as np

from .corpus import (
    LabeledRecord,
    MoveLabel,
    clean_text,
    corpus_stats,
    load_dataset,
    save_dataset,
    segment_sentences,
    split_train_test,
)
from .encoder import EncoderConfig
from .evaluation import confusion, emit_report, metrics, predict_records, report_rows
from .model import MoveModel
from .splitter import parse_conllu, split_corpus
from .tokenizer import load_vocab, save_vocab, train_unigram
from .training import (
    Example,
    TrainConfig,
    encode_dataset,
    grad_check,
    load_checkpoint,
    save_checkpoint,
    train,
)


class ConfigError(ValueError):
    """Bad configuration file or values."""


_SCHEMA: dict[str, dict[str, tuple[type, object]]] = {
    "run": {
        "seed": (int, 0),
        "out_dir": (str, "epag-out"),
    },
    "corpus": {
        "dataset": (str, ""),
        "eval_dataset": (str, ""),
        "parses": (str, ""),
    },
    "splitter": {
        "use_split_data": (bool, False),
    },
    "tokenizer": {
        "vocab_size": (int, 4000),
        "em_rounds": (int, 2),
        "vocab": (str, ""),
    },
    "encoder": {
        "d_model": (int, 64),
        "n_heads": (int, 4),
        "n_layers": (int, 2),
        "d_ff": (int, 0),
        "k_rel": (int, 8),
        "mem_len": (int, 32),
        "max_seq_len": (int, 128),
        "rel_pos_enabled": (bool, True),
    },
    "classifier": {
        "d_hidden": (int, 64),
        "d_attn": (int, 0),
    },
    "training": {
        "learning_rate": (float, 1e-3),
        "batch_size": (int, 16),
        "epochs": (int, 10),
        "grad_clip_norm": (float, 1.0),
        "train_ratio": (float, 1.0),
    },
}

_BOOL_VALUES = {"true": True, "false": False, "1": True, "0": False,
                "yes": True, "no": False}


class RunConfig:
    """Typed view over the INI sections, with schema-checked keys."""

    def __init__(self, values: dict[str, dict[str, object]]):
        self.values = values

    def get(self, section: str, key: str):
        return self.values[section][key]

    def set(self, section: str, key: str, value) -> None:
        self.values[section][key] = value

    def echo(self, path: Path) -> None:
        parser = configparser.ConfigParser()
        for section, keys in self.values.items():
            parser[section] = {k: str(v) for k, v in keys.items()}
        with open(path, "w", encoding="utf-8") as fh:
            parser.write(fh)


def load_config(path: str | None) -> RunConfig:
    values = {
        section: {key: default for key, (_, default) in keys.items()}
        for section, keys in _SCHEMA.items()
    }
    if path is None:
        return RunConfig(values)
    parser = configparser.ConfigParser()
    read = parser.read(path, encoding="utf-8")
    if not read:
        raise ConfigError(f"config file not found: {path}")
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section: [{section}]")
        for key, raw in parser[section].items():
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown config key: [{section}] {key}")
            kind, _ = _SCHEMA[section][key]
            try:
                if kind is bool:
                    value = _BOOL_VALUES[raw.strip().lower()]
                else:
                    value = kind(raw)
            except (ValueError, KeyError):
                raise ConfigError(
                    f"bad value for [{section}] {key}: {raw!r}"
                ) from None
            values[section][key] = value
    return RunConfig(values)


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _require(value: str, what: str) -> str:
    if not value:
        raise ConfigError(f"missing required {what}")
    return value


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(str(cfg.get("run", "out_dir")))
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_preprocess(cfg: RunConfig, args) -> int:
    raw = Path(args.input).read_text(encoding="utf-8")
    sentences = []
    for line in raw.split("\n"):
        cleaned = clean_text(line)
        if cleaned:
            sentences.extend(segment_sentences(cleaned))
    with open(args.out, "w", encoding="utf-8") as fh:
        for sentence in sentences:
            fh.write(sentence + "\n")
    records = [
        LabeledRecord(str(i), s, MoveLabel.BACKGROUND) for i, s in enumerate(sentences)
    ]
    stats = corpus_stats(records)
    print(f"sentence_count\t{stats.sentence_count}")
    print(f"max_len\t{stats.max_len}")
    print(f"mean_len\t{stats.mean_len!r}")
    return 0


def cmd_split(cfg: RunConfig, args) -> int:
    records = load_dataset(args.dataset)
    parses = parse_conllu(Path(args.parses).read_text(encoding="utf-8"))
    out = split_corpus(records, parses)
    save_dataset(out, args.out)
    print(f"records_in\t{len(records)}")
    print(f"records_out\t{len(out)}")
    return 0


def cmd_train_tokenizer(cfg: RunConfig, args) -> int:
    if args.vocab_size is not None:
        cfg.set("tokenizer", "vocab_size", args.vocab_size)
    if args.rounds is not None:
        cfg.set("tokenizer", "em_rounds", args.rounds)
    dataset = args.dataset or str(cfg.get("corpus", "dataset"))
    _require(dataset, "dataset path")
    if args.plain:
        texts = [
            clean_text(line)
            for line in Path(dataset).read_text(encoding="utf-8").split("\n")
        ]
        texts = [t for t in texts if t]
    else:
        texts = [rec.text for rec in load_dataset(dataset)]
    vocab = train_unigram(
        texts,
        int(cfg.get("tokenizer", "vocab_size")),
        rounds=int(cfg.get("tokenizer", "em_rounds")),
    )
    out_path = Path(args.out) if args.out else _out_dir(cfg) / "vocab.txt"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_vocab(vocab, out_path)
    print(f"vocab_path\t{out_path}")
    print(f"vocab_size\t{vocab.size}")
    return 0


def _load_training_corpus(cfg: RunConfig) -> list[LabeledRecord]:
    dataset = _require(str(cfg.get("corpus", "dataset")), "corpus dataset path")
    records = load_dataset(dataset)
    if bool(cfg.get("splitter", "use_split_data")):
        parses_path = _require(
            str(cfg.get("corpus", "parses")), "parses path for split training"
        )
        parses = parse_conllu(Path(parses_path).read_text(encoding="utf-8"))
        records = split_corpus(records, parses)
    return records


def _emit_eval_outputs(model, vocab, records, out_dir: Path, prefix: str) -> None:
    from . import plots

    preds = predict_records(model, vocab, records)
    cm = confusion(preds, [int(r.label) for r in records])
    report = metrics(cm)
    emit_report(report, out_dir / f"{prefix}.tsv", "tsv")
    emit_report(report, out_dir / f"{prefix}.json", "json")
    plots.save_confusion_heatmap(cm, out_dir / f"{prefix}_confusion.png")
    plots.save_per_class_bars(report, out_dir / f"{prefix}_per_class.png")
    for name, value, is_pct in report_rows(report):
        if name in ("accuracy", "macro_precision", "macro_recall", "macro_f1"):
            print(f"{prefix}_{name}\t{100.0 * value:.2f}")


def cmd_train(cfg: RunConfig, args) -> int:
    from . import plots

    if args.dataset:
        cfg.set("corpus", "dataset", args.dataset)
    if args.parses:
        cfg.set("corpus", "parses", args.parses)
    if args.split_mode is not None:
        cfg.set("splitter", "use_split_data", args.split_mode)
    if args.no_rel_pos:
        cfg.set("encoder", "rel_pos_enabled", False)
    if args.mem_len is not None:
        cfg.set("encoder", "mem_len", args.mem_len)
    if args.epochs is not None:
        cfg.set("training", "epochs", args.epochs)
    if args.vocab:
        cfg.set("tokenizer", "vocab", args.vocab)

    out_dir = _out_dir(cfg)
    seed = int(cfg.get("run", "seed"))
    records = _load_training_corpus(cfg)

    ratio = float(cfg.get("training", "train_ratio"))
    if ratio == 1.0:
        train_records, holdout = records, []
    elif 0.0 < ratio < 1.0:
        train_records, holdout = split_train_test(records, ratio, seed)
    else:
        raise ConfigError(f"train_ratio must be in (0, 1]: got {ratio}")
    if not train_records:
        raise ConfigError("no training records after splitting")

    vocab_path = str(cfg.get("tokenizer", "vocab"))
    if vocab_path:
        vocab = load_vocab(vocab_path)
    else:
        vocab = train_unigram(
            [rec.text for rec in train_records],
            int(cfg.get("tokenizer", "vocab_size")),
            rounds=int(cfg.get("tokenizer", "em_rounds")),
        )
    vocab_out = out_dir / "vocab.txt"
    save_vocab(vocab, vocab_out)
    vocab_hash = _sha256_file(vocab_out)

    encoder_config = EncoderConfig(
        vocab_size=vocab.size,
        d_model=int(cfg.get("encoder", "d_model")),
        n_heads=int(cfg.get("encoder", "n_heads")),
        n_layers=int(cfg.get("encoder", "n_layers")),
        d_ff=int(cfg.get("encoder", "d_ff")),
        k_rel=int(cfg.get("encoder", "k_rel")),
        mem_len=int(cfg.get("encoder", "mem_len")),
        max_seq_len=int(cfg.get("encoder", "max_seq_len")),
        rel_pos_enabled=bool(cfg.get("encoder", "rel_pos_enabled")),
    )
    train_config = TrainConfig(
        learning_rate=float(cfg.get("training", "learning_rate")),
        batch_size=int(cfg.get("training", "batch_size")),
        epochs=int(cfg.get("training", "epochs")),
        seed=seed,
        grad_clip_norm=float(cfg.get("training", "grad_clip_norm")),
        use_split_data=bool(cfg.get("splitter", "use_split_data")),
    )
    model = MoveModel.create(
        encoder_config,
        d_hidden=int(cfg.get("classifier", "d_hidden")),
        d_attn=int(cfg.get("classifier", "d_attn")),
        seed=seed,
        metadata={
            "seed": seed,
            "vocab_sha256": vocab_hash,
            "use_split_data": bool(cfg.get("splitter", "use_split_data")),
            "rel_pos_enabled": encoder_config.rel_pos_enabled,
            "mem_len": encoder_config.mem_len,
            "epochs": train_config.epochs,
            "train_records": len(train_records),
        },
    )

    data = encode_dataset(vocab, train_records)
    model, history = train(model, data, train_config)

    checkpoint_path = out_dir / "checkpoint.epag"
    save_checkpoint(model, checkpoint_path)
    history_path = out_dir / "history.tsv"
    with open(history_path, "w", encoding="utf-8") as fh:
        fh.write("epoch\tmean_loss\taccuracy\n")
        for row in history:
            fh.write(f"{row.epoch}\t{row.mean_loss!r}\t{row.accuracy!r}\n")
    if history:
        plots.save_training_curves(history, out_dir / "training_curves.png")
    cfg.echo(out_dir / "config.effective.ini")

    print(f"checkpoint\t{checkpoint_path}")
    print(f"history\t{history_path}")
    if history:
        print(f"final_loss\t{history[-1].mean_loss:.6f}")
        print(f"final_accuracy\t{history[-1].accuracy:.4f}")
    if holdout:
        _emit_eval_outputs(model, vocab, holdout, out_dir, "holdout")
    eval_dataset = str(cfg.get("corpus", "eval_dataset"))
    if eval_dataset:
        _emit_eval_outputs(model, vocab, load_dataset(eval_dataset), out_dir, "eval")
    return 0


def _load_model_and_vocab(args):
    model = load_checkpoint(args.checkpoint)
    vocab = load_vocab(args.vocab)
    expected = model.metadata.get("vocab_sha256")
    actual = _sha256_file(Path(args.vocab))
    if expected and expected != actual:
        raise ConfigError(
            f"vocab hash mismatch: checkpoint expects {expected[:12]}..., "
            f"file is {actual[:12]}..."
        )
    return model, vocab


def cmd_eval(cfg: RunConfig, args) -> int:
    model, vocab = _load_model_and_vocab(args)
    records = load_dataset(args.dataset)
    if not records:
        raise ConfigError("evaluation dataset is empty")
    out_dir = _out_dir(cfg)
    _emit_eval_outputs(model, vocab, records, out_dir, "report")
    cfg.echo(out_dir / "config.effective.ini")
    return 0


def cmd_predict(cfg: RunConfig, args) -> int:
    from .classifier import predict_label
    from .tokenizer import encode as encode_text

    model, vocab = _load_model_and_vocab(args)
    text = clean_text(args.text)
    if not text:
        raise ConfigError("input text is empty after cleaning")
    probs = model.predict_probs(encode_text(vocab, text).ids)
    for label in MoveLabel:
        print(f"{label.display_name}\t{probs[int(label)]:.6f}")
    print(f"label\t{MoveLabel(predict_label(probs)).display_name}")
    return 0


def cmd_gradcheck(cfg: RunConfig, args) -> int:
    # A reduced model keeps the elementwise finite-difference sweep fast;
    # seed and tolerances honor the config/flags.
    seed = int(cfg.get("run", "seed"))
    config = EncoderConfig(
        vocab_size=20,
        d_model=8,
        n_heads=2,
        n_layers=1,
        k_rel=4,
        mem_len=0,
        max_seq_len=16,
        rel_pos_enabled=bool(cfg.get("encoder", "rel_pos_enabled")),
    )
    model = MoveModel.create(config, d_hidden=8, seed=seed)
    rng = np.random.default_rng(seed)
    data = [
        Example("g1", tuple(int(v) for v in rng.integers(4, 20, size=5)), 1),
        Example("g2", tuple(int(v) for v in rng.integers(4, 20, size=4)), 3),
    ]
    report = grad_check(model, data, eps=args.eps, tol=args.tol)
    for line in report.format_lines():
        print(line)
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epag",
        description="Move recognition for Chinese scientific abstracts.",
    )
    parser.add_argument("--config", help="INI configuration file")
    parser.add_argument("--seed", type=int, help="override the run seed")
    parser.add_argument("--out-dir", help="override the output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="clean and sentence-segment raw abstracts")
    p.add_argument("--input", required=True, help="raw abstracts, one per line")
    p.add_argument("--out", required=True, help="output sentence file")
    p.set_defaults(handler=cmd_preprocess)

    p = sub.add_parser("split", help="split complex sentences using parses")
    p.add_argument("--dataset", required=True, help="labeled TSV dataset")
    p.add_argument("--parses", required=True, help="dependency parse file")
    p.add_argument("--out", required=True, help="output TSV dataset")
    p.set_defaults(handler=cmd_split)

    p = sub.add_parser("train-tokenizer", help="train the subword vocabulary")
    p.add_argument("--dataset", help="labeled TSV dataset (default from config)")
    p.add_argument("--plain", action="store_true",
                   help="treat the dataset as raw text lines without labels")
    p.add_argument("--vocab-size", type=int, help="total vocabulary size")
    p.add_argument("--rounds", type=int, help="EM sweeps per pruning round")
    p.add_argument("--out", help="vocabulary output path")
    p.set_defaults(handler=cmd_train_tokenizer)

    p = sub.add_parser("train", help="train a move-recognition model")
    p.add_argument("--dataset", help="labeled TSV dataset (default from config)")
    p.add_argument("--parses", help="dependency parse file for splitting")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--split", dest="split_mode", action="store_const", const=True,
                      help="train on the split (single-move) corpus")
    mode.add_argument("--original", dest="split_mode", action="store_const",
                      const=False, help="train on the unsplit corpus")
    p.add_argument("--no-rel-pos", action="store_true",
                   help="disable relative-position attention terms")
    p.add_argument("--mem-len", type=int, help="segment-recurrence cache length")
    p.add_argument("--epochs", type=int, help="training epochs")
    p.add_argument("--vocab", help="use an existing vocabulary file")
    p.set_defaults(handler=cmd_train, split_mode=None)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--dataset", required=True)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("predict", help="classify one sentence")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("text", help="sentence to classify")
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p.add_argument("--eps", type=float, default=1e-5, help="central-difference step")
    p.add_argument("--tol", type=float, default=1e-4, help="relative error tolerance")
    p.set_defaults(handler=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.set("run", "seed", args.seed)
        if args.out_dir is not None:
            cfg.set("run", "out_dir", args.out_dir)
        return args.handler(cfg, args)
    except (ValueError, OSError) as exc:
        message = " ".join(str(exc).split())
        print(f"error: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
