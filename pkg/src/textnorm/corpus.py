"""LexNorm ingestion, preprocessing, vocabularies and training views.

Tweets arrive as token-aligned source/target pairs. Everything downstream
(dictionary baselines, seq2seq training views, scoring) works off the
per-source-token alignment built here.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field, replace

# Framing / placeholder symbols. PAD and UNK only ever appear inside the
# neural models; the remaining six can occur in token sequences.
PAD = "⟨pad⟩"
UNK = "⟨unk⟩"
BOS = "⟨s⟩"
EOS = "⟨/s⟩"
MENTION = "⟨mention⟩"
URL = "⟨url⟩"
HASHTAG = "⟨hash⟩"
SELF = "@self"

SPECIALS = (PAD, UNK, BOS, EOS, MENTION, URL, HASHTAG, SELF)
PLACEHOLDERS = {MENTION: "mention", URL: "url", HASHTAG: "hash"}
KIND_TO_PLACEHOLDER = {v: k for k, v in PLACEHOLDERS.items()}

_URL_RE = re.compile(r"^(https?://|ftp://|www\.)", re.IGNORECASE)

Span = tuple[int, int]  # half-open [start, end) into the target token list


class CorpusError(ValueError):
    """Malformed corpus file or record."""


class AlignmentError(CorpusError):
    """Source/target token arrays cannot be aligned."""


@dataclass(frozen=True)
class TweetPair:
    """Aligned source/target token sequences for one tweet.

    ``alignment`` holds one ``(source_index, span)`` entry per source token,
    in order. Spans are contiguous, non-overlapping, ordered half-open
    ranges into ``output``; an empty span means the source token maps to
    nothing (the N:1 continuation convention).
    """

    tid: str
    input: list[str]
    output: list[str]
    alignment: list[tuple[int, Span]]

    def target_tokens(self, i: int) -> list[str]:
        start, end = self.alignment[i][1]
        return self.output[start:end]


@dataclass(frozen=True)
class PreprocessedPair(TweetPair):
    """A lowercased, anonymized, ⟨s⟩/⟨/s⟩-framed TweetPair.

    ``anonymization_record`` lists ``(kind, original_token)`` for every
    placeholder in ``input``, left to right; kinds are "mention", "url",
    "hash". Originals are stored lowercased, matching the pipeline.
    """

    anonymization_record: list[tuple[str, str]] = field(default_factory=list)

    def content_entries(self) -> list[tuple[int, Span]]:
        """Alignment entries excluding the ⟨s⟩/⟨/s⟩ framing."""
        return [(i, span) for i, span in self.alignment
                if self.input[i] not in (BOS, EOS)]


@dataclass(frozen=True)
class WordPair:
    """A single source/target word pair; ``origin`` names the noise type
    for synthetic pairs and is "real" otherwise."""

    source: str
    target: str
    synthetic: bool = False
    origin: str = "real"


def token_kind(token: str) -> str | None:
    """Classify a token as "mention"/"url"/"hash", or None for plain text."""
    if token.startswith("@") and len(token) > 1 and token != SELF:
        return "mention"
    if token.startswith("#") and len(token) > 1:
        return "hash"
    if _URL_RE.match(token):
        return "url"
    return None


def load_lexnorm(path) -> list[TweetPair]:
    """Load a LexNorm-format JSON file into aligned TweetPairs.

    Each record is ``{"tid": str, "index": str, "input": [...], "output":
    [...]}`` with equal-length token arrays. A multi-word string in one
    output slot is a 1:N mapping; an empty output slot is an empty span.
    """
    with open(path, encoding="utf-8") as fh:
        try:
            records = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(records, list):
        raise CorpusError(f"{path}: expected a JSON array of records")
    pairs = []
    for idx, rec in enumerate(records):
        if not isinstance(rec, dict) or "input" not in rec or "output" not in rec:
            raise CorpusError(f"record {idx}: missing input/output fields")
        tid = str(rec.get("tid", idx))
        source = [str(t) for t in rec["input"]]
        slots = [str(t) for t in rec["output"]]
        if len(source) != len(slots):
            raise AlignmentError(
                f"tweet {tid}: input has {len(source)} tokens but output has "
                f"{len(slots)} slots")
        output: list[str] = []
        alignment: list[tuple[int, Span]] = []
        for i, slot in enumerate(slots):
            words = slot.split()
            alignment.append((i, (len(output), len(output) + len(words))))
            output.extend(words)
        pairs.append(TweetPair(tid=tid, input=source, output=output,
                               alignment=alignment))
    return pairs


def corpus_stats(pairs: list[TweetPair]) -> dict:
    return {"pairs": len(pairs), "tokens": sum(len(p.input) for p in pairs)}


def preprocess(pair: TweetPair) -> PreprocessedPair:
    """Lowercase, anonymize mentions/URLs/hashtags and frame with ⟨s⟩/⟨/s⟩.

    A placeholder substituted on the source side is substituted in the
    aligned target span as well, so both sides stay consistent.
    """
    record: list[tuple[str, str]] = []
    new_input = [BOS]
    new_output = [BOS]
    new_alignment: list[tuple[int, Span]] = [(0, (0, 1))]
    for i, span in pair.alignment:
        src = pair.input[i].lower()
        tgt = [t.lower() for t in pair.output[span[0]:span[1]]]
        kind = token_kind(src)
        if kind is not None:
            record.append((kind, src))
            placeholder = KIND_TO_PLACEHOLDER[kind]
            src = placeholder
            tgt = [placeholder if token_kind(t) == kind else t for t in tgt]
        start = len(new_output)
        new_output.extend(tgt)
        new_input.append(src)
        new_alignment.append((len(new_input) - 1, (start, len(new_output))))
    new_input.append(EOS)
    new_alignment.append((len(new_input) - 1, (len(new_output), len(new_output) + 1)))
    new_output.append(EOS)
    return PreprocessedPair(tid=pair.tid, input=new_input, output=new_output,
                            alignment=new_alignment, anonymization_record=record)


def deanonymize(tokens: list[str], record: list[tuple[str, str]]) -> list[str]:
    """Restore placeholder tokens from an anonymization record.

    The k-th placeholder of each kind becomes the k-th recorded original of
    that kind; surplus placeholders (model hallucinations) stay verbatim.
    ⟨s⟩/⟨/s⟩ framing is stripped.
    """
    originals: dict[str, list[str]] = {}
    for kind, original in record:
        originals.setdefault(kind, []).append(original)
    seen: Counter[str] = Counter()
    out = []
    for token in tokens:
        if token in (BOS, EOS):
            continue
        kind = PLACEHOLDERS.get(token)
        if kind is not None and seen[kind] < len(originals.get(kind, [])):
            out.append(originals[kind][seen[kind]])
            seen[kind] += 1
        else:
            out.append(token)
    return out


class Vocabulary:
    """Shared source/target token↔id map with reserved special symbols.

    Specials occupy ids 0..7 in SPECIALS order; remaining tokens are ranked
    by descending frequency with lexicographic tie-breaking, so two builds
    over the same corpus produce identical id maps.
    """

    def __init__(self, tokens: list[str], min_frequency: int = 1):
        self.min_frequency = min_frequency
        self.itos = list(SPECIALS) + [t for t in tokens if t not in SPECIALS]
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ValueError("duplicate tokens in vocabulary")
        self.pad_id = self.stoi[PAD]
        self.unk_id = self.stoi[UNK]
        self.bos_id = self.stoi[BOS]
        self.eos_id = self.stoi[EOS]

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def encode(self, tokens: list[str]) -> list[int]:
        return [self.stoi.get(t, self.unk_id) for t in tokens]

    def decode(self, ids: list[int]) -> list[str]:
        return [self.itos[i] for i in ids]


def build_vocab(corpus: list[PreprocessedPair], min_frequency: int = 1) -> Vocabulary:
    """One shared vocabulary over source∪target tokens with freq ≥ cutoff."""
    counts: Counter[str] = Counter()
    for pair in corpus:
        counts.update(t for t in pair.input if t not in SPECIALS)
        counts.update(t for t in pair.output if t not in SPECIALS)
    kept = [t for t, c in counts.items() if c >= min_frequency]
    kept.sort(key=lambda t: (-counts[t], t))
    return Vocabulary(kept, min_frequency=min_frequency)


def make_self_targets(pair: PreprocessedPair) -> PreprocessedPair:
    """Replace every target span that copies its source token with @self.

    Framing entries are kept verbatim so decode termination still works.
    """
    new_output: list[str] = []
    new_alignment: list[tuple[int, Span]] = []
    for i, span in pair.alignment:
        src = pair.input[i]
        tgt = pair.output[span[0]:span[1]]
        if src not in (BOS, EOS) and tgt == [src]:
            tgt = [SELF]
        new_alignment.append((i, (len(new_output), len(new_output) + len(tgt))))
        new_output.extend(tgt)
    return replace(pair, output=new_output, alignment=new_alignment)


def split_ngrams(corpus: list[PreprocessedPair], n: int) -> list[PreprocessedPair]:
    """Cut each pair into consecutive alignment-respecting windows of n
    source tokens; each window is re-framed with ⟨s⟩/⟨/s⟩.

    Trailing windows shorter than n are kept. Joining all windows in order
    reproduces the original content token sequences.
    """
    if n < 1:
        raise ValueError(f"window size must be >= 1, got {n}")
    out = []
    for pair in corpus:
        entries = pair.content_entries()
        if len(entries) <= n:
            out.append(pair)
            continue
        by_kind: dict[str, list[str]] = {}
        for kind, original in pair.anonymization_record:
            by_kind.setdefault(kind, []).append(original)
        consumed: Counter[str] = Counter()
        for w, start in enumerate(range(0, len(entries), n)):
            window = entries[start:start + n]
            new_input = [BOS]
            new_output = [BOS]
            new_alignment: list[tuple[int, Span]] = [(0, (0, 1))]
            record: list[tuple[str, str]] = []
            for i, span in window:
                src = pair.input[i]
                kind = PLACEHOLDERS.get(src)
                if kind is not None and consumed[kind] < len(by_kind.get(kind, [])):
                    record.append((kind, by_kind[kind][consumed[kind]]))
                    consumed[kind] += 1
                tgt = pair.output[span[0]:span[1]]
                s = len(new_output)
                new_output.extend(tgt)
                new_input.append(src)
                new_alignment.append((len(new_input) - 1, (s, len(new_output))))
            new_input.append(EOS)
            new_alignment.append((len(new_input) - 1,
                                  (len(new_output), len(new_output) + 1)))
            new_output.append(EOS)
            out.append(PreprocessedPair(
                tid=f"{pair.tid}#w{w}", input=new_input, output=new_output,
                alignment=new_alignment, anonymization_record=record))
    return out


def extract_word_pairs(corpus: list[PreprocessedPair]) -> list[WordPair]:
    """One WordPair per 1:1 alignment entry, placeholders and framing
    excluded. Unchanged pairs (source == target) are what the noise
    generator corrupts."""
    pairs = []
    for pair in corpus:
        for i, (start, end) in pair.content_entries():
            if end - start != 1:
                continue
            src, tgt = pair.input[i], pair.output[start]
            if src in SPECIALS or tgt in SPECIALS:
                continue
            pairs.append(WordPair(source=src, target=tgt))
    return pairs


# --- preprocessed-corpus file format (one JSON array, UTF-8) ---

def save_preprocessed(pairs: list[PreprocessedPair], path) -> None:
    records = [{
        "tid": p.tid,
        "input": p.input,
        "output": p.output,
        "alignment": [[i, list(span)] for i, span in p.alignment],
        "anonymization": [list(entry) for entry in p.anonymization_record],
    } for p in pairs]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(records, fh, ensure_ascii=False)


def load_preprocessed(path) -> list[PreprocessedPair]:
    with open(path, encoding="utf-8") as fh:
        try:
            records = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{path}: invalid JSON: {exc}") from exc
    pairs = []
    for idx, rec in enumerate(records):
        try:
            pairs.append(PreprocessedPair(
                tid=rec["tid"], input=rec["input"], output=rec["output"],
                alignment=[(i, (s, e)) for i, (s, e) in rec["alignment"]],
                anonymization_record=[(k, o) for k, o in rec["anonymization"]]))
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusError(f"record {idx}: {exc}") from exc
    return pairs


def load_corpus(path) -> list[PreprocessedPair]:
    """Load either a raw LexNorm file (preprocessing it) or an already
    ingested corpus file, based on record fields."""
    with open(path, encoding="utf-8") as fh:
        head = fh.read(4096)
    if '"alignment"' in head:
        return load_preprocessed(path)
    return [preprocess(p) for p in load_lexnorm(path)]
