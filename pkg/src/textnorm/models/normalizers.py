"""Inference paths: word-level seq2seq with copy fallback, the
confidence-gated hybrid, @self substitution, dictionary+seq2seq staging and
whole-tweet character decoding.

Free-running decoder output is re-aligned to source tokens through the
per-step attention argmax, which is also how OOV copy locates its source
token. Aligned (per-source-entry) predictions feed the scorer; the flat
variants are what the CLI prints.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..corpus import (BOS, EOS, PAD, PLACEHOLDERS, SELF, UNK, PreprocessedPair,
                      Vocabulary, WordPair, build_vocab)
from .dictionaries import DictLexicon, load_lexicon, save_lexicon_dir
from .seq2seq import (DecodeResult, Hyperparams, Seq2SeqModel, decode,
                      load_model, save_model, train_seq2seq)

FRAMING = (BOS, EOS, PAD)


def _content_positions(tokens: list[str]) -> list[int]:
    return [i for i, t in enumerate(tokens) if t not in (BOS, EOS)]


def _argmax_content(alpha: np.ndarray, content_pos: list[int]) -> int | None:
    if not content_pos:
        return None
    return content_pos[int(np.argmax(alpha[content_pos]))]


# --- character sequences ---

def word_to_chars(word: str) -> list[str]:
    """A word as a framed character sequence; placeholder tokens stay
    atomic."""
    if word in PLACEHOLDERS or word in (BOS, EOS, SELF):
        return [BOS, word, EOS]
    return [BOS, *word, EOS]


def word_pairs_to_sequences(pairs: list[WordPair]) -> list[tuple[list[str], list[str]]]:
    return [(word_to_chars(p.source), word_to_chars(p.target)) for p in pairs]


def tweet_to_chars(tokens: list[str]) -> list[str]:
    """A whole (framed) tweet as one character sequence with explicit
    space symbols between tokens; placeholders stay atomic."""
    out: list[str] = [BOS]
    first = True
    for token in tokens:
        if token in (BOS, EOS):
            continue
        if not first:
            out.append(" ")
        if token in PLACEHOLDERS:
            out.append(token)
        else:
            out.extend(token)
        first = False
    out.append(EOS)
    return out


def train_char_model(pairs: list[WordPair], hp: Hyperparams, seed: int,
                     log=None, on_epoch=None) -> Seq2SeqModel:
    """Train the secondary character model on (noised, clean) word pairs."""
    return train_seq2seq(word_pairs_to_sequences(pairs), hp, seed,
                         granularity="char", log=log, on_epoch=on_epoch)


def _decode_with_copy(model: Seq2SeqModel, tokens: list[str],
                      beam_width: int = 1, max_len: int | None = None
                      ) -> tuple[list[str], list[int], DecodeResult]:
    """Greedy/beam decode with every UNK emission replaced by the source
    token at that step's attention argmax (content positions only).

    Returns (output tokens, per-token source position, raw decode result).
    """
    ids = model.vocab.encode(tokens)
    result = decode(model, ids, max_len=max_len, beam_width=beam_width)
    content_pos = _content_positions(tokens)
    out: list[str] = []
    sources: list[int] = []
    for token, alpha in zip(result.tokens, result.attention):
        pos = _argmax_content(alpha, content_pos)
        if token == UNK:
            if pos is None:
                continue
            token = tokens[pos]
        if token in FRAMING:
            continue
        out.append(token)
        sources.append(-1 if pos is None else pos)
    return out, sources, result


def normalize_word_s2s(model: Seq2SeqModel, tokens: list[str],
                       beam_width: int = 1) -> list[str]:
    """Word seq2seq with OOV copy: UNK emissions are replaced by the source
    token under the attention argmax. Output is de-framed."""
    out, _, _ = _decode_with_copy(model, tokens, beam_width)
    return out


def char_normalize_word(model: Seq2SeqModel, word: str,
                        beam_width: int = 1) -> tuple[str, float]:
    """Run the character model on one word; returns (output, confidence)."""
    chars = word_to_chars(word)
    out, _, result = _decode_with_copy(model, chars, beam_width)
    return "".join(out), result.confidence


def char_eligible(word: str) -> bool:
    """Tokens the character model may rewrite: not placeholders, length
    at least 2, and containing something alphanumeric."""
    if word in PLACEHOLDERS or word in (BOS, EOS, SELF):
        return False
    if len(word) < 2:
        return False
    return any(c.isalnum() for c in word)


@dataclass
class HybridModel:
    """Word model with a confidence-gated character-model fallback for
    out-of-vocabulary tokens."""

    word_model: Seq2SeqModel
    char_model: Seq2SeqModel
    tau: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must be in [0,1], got {self.tau}")


def _hybrid_resolve(hybrid: HybridModel, word: str,
                    beam_width: int = 1) -> str:
    """Resolution of one OOV source token: char model if confident, else
    copy."""
    if word in hybrid.word_model.vocab:
        return word
    if not char_eligible(word):
        return word
    corrected, conf = char_normalize_word(hybrid.char_model, word, beam_width)
    if corrected and corrected != word and conf >= hybrid.tau:
        return corrected
    return word


def _decode_hybrid(hybrid: HybridModel, tokens: list[str],
                   beam_width: int = 1) -> tuple[list[str], list[int]]:
    model = hybrid.word_model
    ids = model.vocab.encode(tokens)
    result = decode(model, ids, beam_width=beam_width)
    content_pos = _content_positions(tokens)
    out: list[str] = []
    sources: list[int] = []
    for token, alpha in zip(result.tokens, result.attention):
        pos = _argmax_content(alpha, content_pos)
        if token == UNK:
            if pos is None:
                continue
            token = _hybrid_resolve(hybrid, tokens[pos], beam_width)
        if token in FRAMING:
            continue
        out.append(token)
        sources.append(-1 if pos is None else pos)
    return out, sources


def normalize_hybrid(hybrid: HybridModel, tokens: list[str],
                     beam_width: int = 1) -> list[str]:
    """Word model output with OOV tokens routed through the gated
    character model (copying the source when the gate rejects)."""
    out, _ = _decode_hybrid(hybrid, tokens, beam_width)
    return out


def s2sself_normalize(model: Seq2SeqModel, tokens: list[str],
                      beam_width: int = 1) -> list[str]:
    """Decode a @self-trained model and copy source tokens back in.

    When the decoded length matches the source content length the j-th
    emission substitutes the j-th source token; otherwise each @self copies
    its attention-argmax source token.
    """
    out, sources, _ = _decode_with_copy(model, tokens, beam_width)
    content = [tokens[i] for i in _content_positions(tokens)]
    resolved = []
    for j, token in enumerate(out):
        if token != SELF:
            resolved.append(token)
        elif len(out) == len(content):
            resolved.append(content[j])
        elif sources[j] >= 0:
            resolved.append(tokens[sources[j]])
        # an unlocatable @self emits nothing
    return resolved


def s2smulti_normalize(lexicon: DictLexicon, model: Seq2SeqModel,
                       tokens: list[str], beam_width: int = 1) -> list[str]:
    """Dict1 pass over the source, then the word seq2seq over the result."""
    expanded, _ = _dict1_expand(lexicon, tokens)
    return normalize_word_s2s(model, expanded, beam_width)


def _dict1_expand(lexicon: DictLexicon,
                  tokens: list[str]) -> tuple[list[str], list[int]]:
    """Replace unique-mapped tokens in a framed sequence; returns the new
    framed sequence plus, per position, the index of the originating
    content entry (-1 for framing)."""
    out: list[str] = []
    owner: list[int] = []
    entry = -1
    for token in tokens:
        if token in (BOS, EOS):
            out.append(token)
            owner.append(-1)
            continue
        entry += 1
        words = lexicon.unique.get(token, token).split() or [token]
        for w in words:
            out.append(w)
            owner.append(entry)
    return out, owner


def s2schar_normalize(model: Seq2SeqModel, tokens: list[str],
                      beam_width: int = 1) -> list[str]:
    """Whole-tweet character model: decode the character stream and split
    on the space symbol."""
    chars = tweet_to_chars(tokens)
    out, _, _ = _decode_with_copy(model, chars, beam_width)
    text = "".join(out)
    return [w for w in text.split(" ") if w]


# --- aligned (per-source-entry) predictions for the scorer ---

def _assign_to_entries(out: list[str], sources: list[int],
                       entry_of_pos: dict[int, int],
                       n_entries: int) -> list[str]:
    per_entry: list[list[str]] = [[] for _ in range(n_entries)]
    for token, pos in zip(out, sources):
        entry = entry_of_pos.get(pos)
        if entry is None:
            continue
        per_entry[entry].append(token)
    return [" ".join(ts) for ts in per_entry]


def _entry_map(pair: PreprocessedPair) -> tuple[dict[int, int], int]:
    entries = pair.content_entries()
    return {i: k for k, (i, _) in enumerate(entries)}, len(entries)


def s2s_aligned(model: Seq2SeqModel, pair: PreprocessedPair,
                beam_width: int = 1) -> list[str]:
    out, sources, _ = _decode_with_copy(model, pair.input, beam_width)
    entry_of_pos, n = _entry_map(pair)
    return _assign_to_entries(out, sources, entry_of_pos, n)


def hybrid_aligned(hybrid: HybridModel, pair: PreprocessedPair,
                   beam_width: int = 1) -> list[str]:
    out, sources = _decode_hybrid(hybrid, pair.input, beam_width)
    entry_of_pos, n = _entry_map(pair)
    return _assign_to_entries(out, sources, entry_of_pos, n)


def s2sself_aligned(model: Seq2SeqModel, pair: PreprocessedPair,
                    beam_width: int = 1) -> list[str]:
    out, sources, _ = _decode_with_copy(model, pair.input, beam_width)
    content_pos = _content_positions(pair.input)
    entry_of_pos, n = _entry_map(pair)
    per_entry: list[list[str]] = [[] for _ in range(n)]
    positional = len(out) == len(content_pos)
    for j, token in enumerate(out):
        if token == SELF:
            pos = content_pos[j] if positional else sources[j]
            if pos < 0:
                continue
            token = pair.input[pos]
        elif positional:
            pos = content_pos[j]
        else:
            pos = sources[j]
        entry = entry_of_pos.get(pos)
        if entry is not None:
            per_entry[entry].append(token)
    return [" ".join(ts) for ts in per_entry]


def s2smulti_aligned(lexicon: DictLexicon, model: Seq2SeqModel,
                     pair: PreprocessedPair, beam_width: int = 1) -> list[str]:
    expanded, owner = _dict1_expand(lexicon, pair.input)
    out, sources, _ = _decode_with_copy(model, expanded, beam_width)
    entry_of_pos = {i: e for i, e in enumerate(owner) if e >= 0}
    _, n = _entry_map(pair)
    return _assign_to_entries(out, sources, entry_of_pos, n)


def s2schar_aligned(model: Seq2SeqModel, pair: PreprocessedPair,
                    beam_width: int = 1) -> list[str]:
    """Align decoded words to entries positionally when counts match, else
    by majority vote over each word's per-character attention."""
    chars = tweet_to_chars(pair.input)
    out, sources, _ = _decode_with_copy(model, chars, beam_width)
    # source char position -> source content entry
    entries = pair.content_entries()
    pos_entry: dict[int, int] = {}
    cursor = 1  # skip BOS in the char sequence
    for k, (i, _) in enumerate(entries):
        token = pair.input[i]
        width = 1 if token in PLACEHOLDERS else len(token)
        for off in range(width):
            pos_entry[cursor + off] = k
        cursor += width + 1  # the separating space
    words: list[tuple[str, list[int]]] = [("", [])]
    for token, pos in zip(out, sources):
        if token == " ":
            words.append(("", []))
        else:
            text, votes = words[-1]
            words[-1] = (text + token, votes + [pos])
    words = [(w, v) for w, v in words if w]
    per_entry: list[list[str]] = [[] for _ in range(len(entries))]
    if len(words) == len(entries):
        for k, (w, _) in enumerate(words):
            per_entry[k].append(w)
    else:
        for w, votes in words:
            owners = [pos_entry[v] for v in votes if v in pos_entry]
            if not owners:
                continue
            values, counts = np.unique(owners, return_counts=True)
            per_entry[int(values[np.argmax(counts)])].append(w)
    return [" ".join(ts) for ts in per_entry]


# --- hybrid persistence ---

def save_hybrid(hybrid: HybridModel, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_model(hybrid.word_model, directory / "word", view="plain")
    save_model(hybrid.char_model, directory / "char", view="word_pairs")
    with open(directory / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump({"format_version": 1, "kind": "hybrid", "tau": hybrid.tau,
                   "word_model": "word", "char_model": "char"}, fh)


def load_hybrid(directory) -> HybridModel:
    directory = Path(directory)
    with open(directory / "manifest.json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("kind") != "hybrid":
        raise ValueError(f"{directory}: not a hybrid model directory")
    return HybridModel(
        word_model=load_model(directory / manifest["word_model"]),
        char_model=load_model(directory / manifest["char_model"]),
        tau=float(manifest["tau"]))
