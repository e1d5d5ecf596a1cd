"""Scoring, error analysis and the two sweep experiments.

Scoring follows the shared-task convention: per aligned source token, a
change is needed when the gold target differs from the source, proposed
when the prediction differs from the source, and correct when a proposed
change matches gold. All comparisons are lowercase exact-string, with
multi-word strings joined by single spaces.
"""

from __future__ import annotations

import csv
import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field

from .corpus import TweetPair


class ScoreAlignmentError(ValueError):
    """Predictions do not line up with the gold alignment."""


@dataclass(frozen=True)
class EvalResult:
    precision: float
    recall: float
    f1: float
    tp: int
    proposed: int
    needed: int

    @classmethod
    def from_counts(cls, tp: int, proposed: int, needed: int) -> "EvalResult":
        precision = tp / proposed if proposed else 1.0
        recall = tp / needed if needed else 1.0
        f1 = (2 * precision * recall / (precision + recall)
              if precision + recall > 0 else 0.0)
        return cls(precision=precision, recall=recall, f1=f1, tp=tp,
                   proposed=proposed, needed=needed)

    def to_json(self) -> dict:
        return {"precision": self.precision, "recall": self.recall,
                "f1": self.f1, "tp": self.tp, "proposed": self.proposed,
                "needed": self.needed}

    def summary(self) -> str:
        return (f"P={100 * self.precision:.2f} R={100 * self.recall:.2f} "
                f"F1={100 * self.f1:.2f} "
                f"(tp={self.tp} proposed={self.proposed} needed={self.needed})")


def _gold_entries(pair: TweetPair) -> list[tuple[str, str]]:
    """(source, gold target string) per content alignment entry,
    lowercased."""
    entries = (pair.content_entries() if hasattr(pair, "content_entries")
               else pair.alignment)
    out = []
    for i, (start, end) in entries:
        source = pair.input[i].lower()
        target = " ".join(t.lower() for t in pair.output[start:end])
        out.append((source, target))
    return out


def _normalize_pred(pred: str) -> str:
    return " ".join(pred.lower().split())


def score(predictions: list[list[str]], gold: list[TweetPair]) -> EvalResult:
    """predictions[i][k] is the predicted string for the k-th aligned
    source token of gold tweet i (multi-word predictions space-joined)."""
    if len(predictions) != len(gold):
        raise ScoreAlignmentError(
            f"{len(predictions)} prediction lists for {len(gold)} tweets")
    tp = proposed = needed = 0
    for preds, pair in zip(predictions, gold):
        entries = _gold_entries(pair)
        if len(preds) != len(entries):
            raise ScoreAlignmentError(
                f"tweet {pair.tid}: {len(preds)} predictions for "
                f"{len(entries)} aligned source tokens")
        for pred, (source, target) in zip(preds, entries):
            pred = _normalize_pred(pred)
            if target != source:
                needed += 1
            if pred != source:
                proposed += 1
                if pred == target:
                    tp += 1
    return EvalResult.from_counts(tp, proposed, needed)


@dataclass(frozen=True)
class ErrorEntry:
    source: str
    targets: tuple[str, ...]
    count: int
    source_frequency: int
    unchanged: int


@dataclass
class ErrorReport:
    """Most frequent correct and missed normalizations, ranked by count."""

    correct: list[ErrorEntry] = field(default_factory=list)
    incorrect: list[ErrorEntry] = field(default_factory=list)


def error_analysis(predictions: list[list[str]],
                   gold: list[TweetPair]) -> ErrorReport:
    """Per source token: how often the system normalized it correctly or
    missed a needed change, its source-side frequency, and how often the
    gold leaves it unchanged."""
    correct: Counter[str] = Counter()
    incorrect: Counter[str] = Counter()
    frequency: Counter[str] = Counter()
    unchanged: Counter[str] = Counter()
    targets: dict[str, set] = defaultdict(set)
    for preds, pair in zip(predictions, gold):
        entries = _gold_entries(pair)
        if len(preds) != len(entries):
            raise ScoreAlignmentError(
                f"tweet {pair.tid}: {len(preds)} predictions for "
                f"{len(entries)} aligned source tokens")
        for pred, (source, target) in zip(preds, entries):
            pred = _normalize_pred(pred)
            frequency[source] += 1
            targets[source].add(target)
            if target == source:
                unchanged[source] += 1
                continue
            if pred == target:
                correct[source] += 1
            else:
                incorrect[source] += 1

    def ranked(counter: Counter) -> list[ErrorEntry]:
        order = sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))
        return [ErrorEntry(source=s, targets=tuple(sorted(targets[s])),
                           count=c, source_frequency=frequency[s],
                           unchanged=unchanged[s])
                for s, c in order]

    return ErrorReport(correct=ranked(correct), incorrect=ranked(incorrect))


@dataclass(frozen=True)
class SweepRow:
    knob: float | None  # None encodes "full" (no n-gram splitting)
    result: EvalResult
    stats: dict


@dataclass
class SweepResult:
    rows: list[SweepRow]

    def __post_init__(self):
        knobs = [r.knob for r in self.rows if r.knob is not None]
        if any(b <= a for a, b in zip(knobs, knobs[1:])):
            raise ValueError(f"knob values must strictly increase: {knobs}")

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["knob", "precision", "recall", "f1",
                             "total_examples", "noise_examples"])
            for row in self.rows:
                writer.writerow([
                    "full" if row.knob is None else row.knob,
                    f"{row.result.precision:.6f}",
                    f"{row.result.recall:.6f}",
                    f"{row.result.f1:.6f}",
                    row.stats.get("total_examples", ""),
                    row.stats.get("noise_examples", ""),
                ])

    def to_json(self) -> list[dict]:
        return [{"knob": row.knob, **row.result.to_json(), **row.stats}
                for row in self.rows]


def sweep_noise_ratio(train_corpus, test_corpus, ratios: list[float],
                      config) -> SweepResult:
    """Retrain the character model per noise ratio, rebuild the hybrid
    with the word model held fixed, and score on the test corpus.

    All seeds and hyperparameters are identical across rows; each row
    retrains the character model from scratch.
    """
    from dataclasses import replace as dc_replace

    from .corpus import extract_word_pairs
    from .models.normalizers import HybridModel, hybrid_aligned, train_char_model
    from .models.seq2seq import train_seq2seq
    from .noise import generate_adversarial

    if any(not 0.0 < r <= 1.0 for r in ratios):
        raise ValueError(f"ratios must lie in (0, 1]: {ratios}")
    word_model = train_seq2seq(train_corpus, config.word, config.seed)
    base_pairs = extract_word_pairs(train_corpus)
    rows = []
    for ratio in ratios:
        noise_cfg = dc_replace(config.noise, ratio=ratio)
        pairs = generate_adversarial(base_pairs, noise_cfg)
        char_model = train_char_model(pairs, config.char, config.seed)
        hybrid = HybridModel(word_model=word_model, char_model=char_model,
                             tau=config.tau)
        predictions = [hybrid_aligned(hybrid, p) for p in test_corpus]
        result = score(predictions, test_corpus)
        stats = {"total_examples": len(pairs),
                 "noise_examples": sum(1 for p in pairs if p.synthetic)}
        rows.append(SweepRow(knob=ratio, result=result, stats=stats))
    return SweepResult(rows)


def sweep_ngram(train_corpus, test_corpus, ns: list[int | None],
                config) -> SweepResult:
    """Train a word model per context window size; at inference each test
    tweet is split with the same window so the model sees the same amount
    of context it was trained on. ``None`` means full context."""
    from .corpus import split_ngrams
    from .models.normalizers import s2s_aligned
    from .models.seq2seq import train_seq2seq

    numeric = [n for n in ns if n is not None]
    if any(n < 1 for n in numeric):
        raise ValueError(f"window sizes must be >= 1: {ns}")
    rows = []
    for n in ns:
        view = train_corpus if n is None else split_ngrams(train_corpus, n)
        model = train_seq2seq(view, config.word, config.seed)
        predictions = []
        for pair in test_corpus:
            if n is None:
                predictions.append(s2s_aligned(model, pair))
            else:
                windows = split_ngrams([pair], n)
                preds: list[str] = []
                for window in windows:
                    preds.extend(s2s_aligned(model, window))
                predictions.append(preds)
        result = score(predictions, test_corpus)
        rows.append(SweepRow(knob=n, result=result,
                             stats={"total_examples": len(view),
                                    "noise_examples": 0}))
    return SweepResult(rows)


def oov_accuracy(char_model, pairs) -> float:
    """Fraction of word pairs whose greedy decode exactly matches the
    target; meant for pairs whose source never occurs in training."""
    from .models.normalizers import char_normalize_word

    if not pairs:
        return 0.0
    hits = 0
    for pair in pairs:
        predicted, _ = char_normalize_word(char_model, pair.source)
        if predicted == pair.target:
            hits += 1
    return hits / len(pairs)


def write_eval_json(result: EvalResult, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(result.to_json(), fh, indent=1)
