"""Command-line surface: ingest | noise | train | normalize | evaluate | sweep.

Exit codes: 0 success, 2 usage or data error, 3 training failure. Logs go
to stderr; machine-readable results (stats JSON, normalized text, reports)
go to stdout or the requested files.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import corpus as corpus_mod
from .config import RunConfig, load_config
from .corpus import (CorpusError, build_vocab, deanonymize, extract_word_pairs,
                     load_corpus, load_lexnorm, make_self_targets, preprocess)
from .evaluation import (ScoreAlignmentError, SweepResult, error_analysis,
                         score, sweep_ngram, sweep_noise_ratio)
from .models.dictionaries import (build_lexicon, dict1_aligned, dict2_aligned,
                                  load_lexicon, save_lexicon_dir)
from .models.normalizers import (HybridModel, hybrid_aligned, load_hybrid,
                                 s2s_aligned, s2schar_aligned, s2sself_aligned,
                                 s2smulti_aligned, save_hybrid,
                                 train_char_model, tweet_to_chars)
from .models.seq2seq import load_model, save_model, train_seq2seq
from .neural.optim import TrainingDiverged
from .noise import generate_adversarial, load_word_pairs, save_word_pairs

MODES = ("hs2s", "s2s", "dict1", "dict2", "s2sself", "s2smulti", "s2schar")
TRAINABLE = ("word", "char", "self", "multi", "dict", "s2schar", "hybrid")


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _fail(message: str, code: int = 2) -> "NoReturn":
    _log(f"error: {message}")
    sys.exit(code)


# --- ingest ---

def cmd_ingest(args) -> None:
    pairs = load_lexnorm(args.input)
    if not pairs:
        _fail("empty corpus")
    stats = corpus_mod.corpus_stats(pairs)
    preprocessed = [preprocess(p) for p in pairs]
    corpus_mod.save_preprocessed(preprocessed, args.out)
    stats["vocab"] = len(build_vocab(preprocessed, min_frequency=1))
    print(json.dumps(stats))


# --- noise ---

def cmd_noise(args) -> None:
    cfg = load_config(args.config)
    noise_cfg = cfg.noise
    if args.ratio is not None:
        noise_cfg = replace(noise_cfg, ratio=args.ratio)
    if args.seed is not None:
        noise_cfg = replace(noise_cfg, seed=args.seed)
    pairs = extract_word_pairs(load_corpus(args.input))
    augmented = generate_adversarial(pairs, noise_cfg)
    save_word_pairs(augmented, args.out)
    print(json.dumps({
        "pairs": len(augmented),
        "synthetic": sum(1 for p in augmented if p.synthetic),
        "ratio": noise_cfg.ratio,
    }))


# --- train ---

def _training_logger(csv_path):
    fh = open(csv_path, "w", encoding="utf-8")
    fh.write("epoch,train_loss,val_loss\n")

    def log(entry):
        val = "" if entry["val_loss"] is None else f"{entry['val_loss']:.6f}"
        fh.write(f"{entry['epoch']},{entry['train_loss']:.6f},{val}\n")
        fh.flush()
        _log(f"epoch {entry['epoch']}: train_loss={entry['train_loss']:.4f}"
             + (f" val_loss={val}" if val else ""))

    return log, fh


def _char_training_pairs(cfg: RunConfig, train_corpus):
    if cfg.paths.word_pairs:
        return load_word_pairs(cfg.paths.word_pairs)
    return generate_adversarial(extract_word_pairs(train_corpus), cfg.noise)


def cmd_train(args) -> None:
    cfg = load_config(args.config)
    model_dir = Path(args.out or cfg.paths.model_dir or "")
    if not str(model_dir):
        _fail("no model directory: set --out or paths.model_dir in the config")
    if not cfg.paths.train:
        _fail("config lacks paths.train")
    train_corpus = load_corpus(cfg.paths.train)
    if not train_corpus:
        _fail("empty corpus")
    model_dir.mkdir(parents=True, exist_ok=True)
    cfg.save(model_dir / "config.json")
    log, fh = _training_logger(model_dir / "training_log.csv")
    try:
        if args.model == "dict":
            save_lexicon_dir(build_lexicon(train_corpus), model_dir)
        elif args.model == "word":
            checkpoint = lambda m: save_model(m, model_dir, view="plain")
            checkpoint(train_seq2seq(train_corpus, cfg.word, cfg.seed,
                                     log=log, on_epoch=checkpoint))
        elif args.model == "self":
            view = [make_self_targets(p) for p in train_corpus]
            checkpoint = lambda m: save_model(m, model_dir, view="self")
            checkpoint(train_seq2seq(view, cfg.word, cfg.seed, log=log,
                                     on_epoch=checkpoint))
        elif args.model == "multi":
            lexicon = build_lexicon(train_corpus)
            from .models.dictionaries import make_multi_view, save_lexicon
            save_lexicon(lexicon, model_dir / "lexicon.tsv")
            view = make_multi_view(train_corpus, lexicon)
            checkpoint = lambda m: save_model(m, model_dir, view="multi")
            checkpoint(train_seq2seq(view, cfg.word, cfg.seed, log=log,
                                     on_epoch=checkpoint))
        elif args.model == "char":
            pairs = _char_training_pairs(cfg, train_corpus)
            _log(f"char training pairs: {len(pairs)} "
                 f"({sum(1 for p in pairs if p.synthetic)} synthetic)")
            checkpoint = lambda m: save_model(m, model_dir, view="word_pairs")
            checkpoint(train_char_model(pairs, cfg.char, cfg.seed, log=log,
                                        on_epoch=checkpoint))
        elif args.model == "s2schar":
            view = [(tweet_to_chars(p.input), tweet_to_chars(p.output))
                    for p in train_corpus]
            checkpoint = lambda m: save_model(m, model_dir, view="char_tweets")
            checkpoint(train_seq2seq(view, cfg.s2schar, cfg.seed,
                                     granularity="char", log=log,
                                     on_epoch=checkpoint))
        elif args.model == "hybrid":
            word_ckpt = lambda m: save_model(m, model_dir / "word",
                                             view="plain")
            word_model = train_seq2seq(train_corpus, cfg.word, cfg.seed,
                                       log=log, on_epoch=word_ckpt)
            pairs = _char_training_pairs(cfg, train_corpus)
            char_ckpt = lambda m: save_model(m, model_dir / "char",
                                             view="word_pairs")
            char_model = train_char_model(pairs, cfg.char, cfg.seed, log=log,
                                          on_epoch=char_ckpt)
            save_hybrid(HybridModel(word_model=word_model,
                                    char_model=char_model, tau=cfg.tau),
                        model_dir)
    except TrainingDiverged as exc:
        _fail(f"training diverged: {exc}", code=3)
    finally:
        fh.close()
    _log(f"model written to {model_dir}")


# --- normalize ---

class Normalizer:
    """Loads the artifacts for one mode and normalizes preprocessed pairs.

    ``aligned(pair)`` returns one predicted string per aligned source
    token; ``flat(pair)`` the plain token sequence (both still anonymized).
    """

    def __init__(self, mode: str, model_dirs: list[str], tau: float | None,
                 seed: int, beam_width: int = 1):
        self.mode = mode
        self.seed = seed
        self.beam_width = beam_width
        if mode in ("dict1", "dict2"):
            self.lexicon = self._load_lexicon(model_dirs[0])
        elif mode == "s2smulti":
            root = Path(model_dirs[0])
            self.lexicon = load_lexicon(root / "lexicon.tsv")
            self.model = load_model(root)
        elif mode == "hs2s":
            if len(model_dirs) == 2:
                self.hybrid = HybridModel(word_model=load_model(model_dirs[0]),
                                          char_model=load_model(model_dirs[1]),
                                          tau=0.5 if tau is None else tau)
            else:
                self.hybrid = load_hybrid(model_dirs[0])
                if tau is not None:
                    self.hybrid.tau = tau
        else:
            self.model = load_model(model_dirs[0])

    @staticmethod
    def _load_lexicon(path):
        path = Path(path)
        if path.is_dir():
            return load_lexicon(path / "lexicon.tsv")
        return load_lexicon(path)

    def _tweet_rng(self, index: int) -> random.Random:
        return random.Random(self.seed * 1_000_003 + index)

    def aligned(self, pair, index: int = 0) -> list[str]:
        if self.mode == "dict1":
            return dict1_aligned(self.lexicon, pair)
        if self.mode == "dict2":
            return dict2_aligned(self.lexicon, pair, self._tweet_rng(index))
        if self.mode == "s2s":
            return s2s_aligned(self.model, pair, self.beam_width)
        if self.mode == "s2sself":
            return s2sself_aligned(self.model, pair, self.beam_width)
        if self.mode == "s2smulti":
            return s2smulti_aligned(self.lexicon, self.model, pair,
                                    self.beam_width)
        if self.mode == "s2schar":
            return s2schar_aligned(self.model, pair, self.beam_width)
        if self.mode == "hs2s":
            return hybrid_aligned(self.hybrid, pair, self.beam_width)
        raise ValueError(f"unknown mode {self.mode}")

    def flat(self, pair, index: int = 0) -> list[str]:
        preds = self.aligned(pair, index)
        return [w for pred in preds for w in pred.split()]


_WORKER: Normalizer | None = None


def _init_worker(mode, model_dirs, tau, seed, beam_width):
    global _WORKER
    _WORKER = Normalizer(mode, model_dirs, tau, seed, beam_width)


def _run_worker(payload):
    index, pair = payload
    return index, _WORKER.aligned(pair, index)


def _read_input_pairs(source: str):
    """LexNorm/ingested JSON or whitespace-tokenized text lines (stdin with
    '-'); returns preprocessed pairs."""
    if source == "-":
        lines = [line.rstrip("\n") for line in sys.stdin]
        tweets = [line.split() for line in lines if line.strip()]
        pairs = [corpus_mod.TweetPair(
            tid=str(i), input=tokens, output=list(tokens),
            alignment=[(k, (k, k + 1)) for k in range(len(tokens))])
            for i, tokens in enumerate(tweets)]
        return [preprocess(p) for p in pairs]
    if source.endswith(".json"):
        return load_corpus(source)
    with open(source, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh]
    tweets = [line.split() for line in lines if line.strip()]
    pairs = [corpus_mod.TweetPair(
        tid=str(i), input=tokens, output=list(tokens),
        alignment=[(k, (k, k + 1)) for k in range(len(tokens))])
        for i, tokens in enumerate(tweets)]
    return [preprocess(p) for p in pairs]


def _deanonymize_aligned(preds: list[str], record) -> list[str]:
    """Per-entry deanonymization: placeholders are restored left to right
    across the concatenated entry strings."""
    per_entry = [p.split() for p in preds]
    flat = [t for entry in per_entry for t in entry]
    restored = deanonymize(flat, record)
    out = []
    cursor = 0
    for entry in per_entry:
        out.append(" ".join(restored[cursor:cursor + len(entry)]))
        cursor += len(entry)
    return out


def cmd_normalize(args) -> None:
    if not args.model:
        _fail("normalize requires at least one --model")
    for directory in args.model:
        if not Path(directory).exists():
            _fail(f"missing model: {directory}")
    pairs = _read_input_pairs(args.input)
    if args.jobs > 1:
        with ProcessPoolExecutor(
                max_workers=args.jobs, initializer=_init_worker,
                initargs=(args.mode, args.model, args.tau, args.seed,
                          args.beam_width)) as pool:
            results = dict(pool.map(_run_worker, list(enumerate(pairs)),
                                    chunksize=8))
        aligned = [results[i] for i in range(len(pairs))]
    else:
        normalizer = Normalizer(args.mode, args.model, args.tau, args.seed,
                                args.beam_width)
        aligned = [normalizer.aligned(p, i) for i, p in enumerate(pairs)]

    out_fh = sys.stdout if args.output == "-" else open(args.output, "w",
                                                        encoding="utf-8")
    try:
        records = []
        for pair, preds in zip(pairs, aligned):
            restored = _deanonymize_aligned(preds, pair.anonymization_record)
            tokens = [t for pred in restored for t in pred.split()]
            out_fh.write(" ".join(tokens) + "\n")
            if args.json_out:
                records.append({
                    "tid": pair.tid,
                    "input": [pair.input[i] for i, _ in pair.content_entries()],
                    "output": restored,
                })
        if args.json_out:
            with open(args.json_out, "w", encoding="utf-8") as fh:
                json.dump(records, fh, ensure_ascii=False)
    finally:
        if out_fh is not sys.stdout:
            out_fh.close()


# --- evaluate ---

def _load_predictions(path, gold) -> list[list[str]]:
    with open(path, encoding="utf-8") as fh:
        records = json.load(fh)
    if len(records) != len(gold):
        raise ScoreAlignmentError(
            f"{len(records)} prediction records for {len(gold)} gold tweets")
    return [[str(t) for t in rec["output"]] for rec in records]


def cmd_evaluate(args) -> None:
    gold = load_lexnorm(args.gold)
    predictions = _load_predictions(args.pred, gold)
    result = score(predictions, gold)
    print(json.dumps(result.to_json()))
    _log(result.summary())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(result.to_json(), fh, indent=1)
    if args.errors:
        report = error_analysis(predictions, gold)
        with open(args.errors, "w", encoding="utf-8") as fh:
            json.dump({
                "correct": [vars(e) | {"targets": list(e.targets)}
                            for e in report.correct[:50]],
                "incorrect": [vars(e) | {"targets": list(e.targets)}
                              for e in report.incorrect[:50]],
            }, fh, ensure_ascii=False, indent=1)


# --- sweep ---

def _parse_ns(raw: str) -> list[int | None]:
    out: list[int | None] = []
    for part in raw.split(","):
        part = part.strip()
        out.append(None if part == "full" else int(part))
    return out


def cmd_sweep(args) -> None:
    cfg = load_config(args.config)
    if not cfg.paths.train or not cfg.paths.test:
        _fail("config needs paths.train and paths.test for sweeps")
    train_corpus = load_corpus(cfg.paths.train)
    test_corpus = load_corpus(cfg.paths.test)
    if args.what == "noise":
        ratios = [float(r) for r in args.ratios.split(",")]
        result = sweep_noise_ratio(train_corpus, test_corpus, ratios, cfg)
    else:
        result = sweep_ngram(train_corpus, test_corpus, _parse_ns(args.ns),
                             cfg)
    result.to_csv(f"{args.out}.csv")
    with open(f"{args.out}.json", "w", encoding="utf-8") as fh:
        json.dump(result.to_json(), fh, indent=1)
    for row in result.rows:
        knob = "full" if row.knob is None else row.knob
        _log(f"knob={knob}: {row.result.summary()}")
    _log(f"wrote {args.out}.csv and {args.out}.json")


# --- parser ---

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="textnorm",
        description="Social-media text normalization toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load + preprocess a LexNorm JSON file")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("noise", help="generate adversarial word pairs")
    p.add_argument("--input", required=True, help="corpus file")
    p.add_argument("--out", required=True, help="TSV output")
    p.add_argument("--ratio", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--config", required=True)
    p.add_argument("--model", required=True, choices=TRAINABLE)
    p.add_argument("--out", default=None, help="model directory override")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("normalize", help="normalize tweets")
    p.add_argument("--model", action="append", default=[],
                   help="model directory (repeat for hs2s word+char)")
    p.add_argument("--mode", required=True, choices=MODES)
    p.add_argument("--input", default="-", help="file or - for stdin")
    p.add_argument("--output", default="-", help="file or - for stdout")
    p.add_argument("--json-out", default=None,
                   help="aligned per-token predictions (for evaluate)")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--beam-width", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("evaluate", help="score aligned predictions")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--errors", default=None,
                   help="write an error-analysis report JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="noise-ratio or n-gram context sweep")
    p.add_argument("--what", required=True, choices=("noise", "ngram"))
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output path prefix")
    p.add_argument("--ratios", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")
    p.add_argument("--ns", default="1,2,3,full")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> None:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except TrainingDiverged as exc:
        _fail(str(exc), code=3)
    except (CorpusError, ScoreAlignmentError, FileNotFoundError,
            NotADirectoryError, ValueError) as exc:
        _fail(str(exc))


if __name__ == "__main__":
    main()
