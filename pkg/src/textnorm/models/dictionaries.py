"""Dictionary baselines built from training-data mappings."""

from __future__ import annotations

import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..corpus import BOS, EOS, PreprocessedPair, Span


@dataclass
class DictLexicon:
    """Observed source→target mappings from aligned training data.

    ``unique`` holds tokens with exactly one observed canonical string;
    ``multi`` maps the rest to their (canonical, count) alternatives.
    """

    unique: dict[str, str] = field(default_factory=dict)
    multi: dict[str, list[tuple[str, int]]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.unique) + len(self.multi)


def build_lexicon(corpus: list[PreprocessedPair]) -> DictLexicon:
    """Collect target strings (spans joined by spaces) per source token."""
    counts: dict[str, Counter] = defaultdict(Counter)
    for pair in corpus:
        for i, (start, end) in pair.content_entries():
            target = " ".join(pair.output[start:end])
            counts[pair.input[i]][target] += 1
    lexicon = DictLexicon()
    for source, targets in counts.items():
        if len(targets) == 1:
            lexicon.unique[source] = next(iter(targets))
        else:
            ranked = sorted(targets.items(), key=lambda kv: (-kv[1], kv[0]))
            lexicon.multi[source] = ranked
    return lexicon


def _content(tokens: list[str]) -> list[str]:
    return [t for t in tokens if t not in (BOS, EOS)]


def dict1_normalize(lexicon: DictLexicon, tokens: list[str]) -> list[str]:
    """Replace tokens that have a unique observed mapping; copy the rest."""
    out = []
    for token in _content(tokens):
        replacement = lexicon.unique.get(token, token)
        out.extend(replacement.split())
    return out


def dict2_normalize(lexicon: DictLexicon, tokens: list[str],
                    rng: random.Random) -> list[str]:
    """Dict1 plus a uniformly random choice among multiple mappings."""
    out = []
    for token in _content(tokens):
        if token in lexicon.unique:
            replacement = lexicon.unique[token]
        elif token in lexicon.multi:
            replacement = rng.choice([t for t, _ in lexicon.multi[token]])
        else:
            replacement = token
        out.extend(replacement.split())
    return out


def dict1_aligned(lexicon: DictLexicon, pair: PreprocessedPair) -> list[str]:
    """Per-content-entry Dict1 predictions (for scoring)."""
    return [lexicon.unique.get(pair.input[i], pair.input[i])
            for i, _ in pair.content_entries()]


def dict2_aligned(lexicon: DictLexicon, pair: PreprocessedPair,
                  rng: random.Random) -> list[str]:
    out = []
    for i, _ in pair.content_entries():
        token = pair.input[i]
        if token in lexicon.unique:
            out.append(lexicon.unique[token])
        elif token in lexicon.multi:
            out.append(rng.choice([t for t, _ in lexicon.multi[token]]))
        else:
            out.append(token)
    return out


def make_multi_view(corpus: list[PreprocessedPair],
                    lexicon: DictLexicon) -> list[PreprocessedPair]:
    """Training view with unique-mapped source tokens pre-replaced, so a
    model trained on it only has to learn the multiple mappings.

    A replacement that expands to k tokens keeps the gold span on its first
    token and gives the rest empty spans.
    """
    out = []
    for pair in corpus:
        new_input: list[str] = []
        new_output: list[str] = []
        new_alignment: list[tuple[int, Span]] = []
        for i, (start, end) in pair.alignment:
            src = pair.input[i]
            tgt = pair.output[start:end]
            words = ([src] if src in (BOS, EOS)
                     else lexicon.unique.get(src, src).split() or [src])
            s = len(new_output)
            new_output.extend(tgt)
            new_input.append(words[0])
            new_alignment.append((len(new_input) - 1, (s, len(new_output))))
            for extra in words[1:]:
                new_input.append(extra)
                new_alignment.append((len(new_input) - 1,
                                      (len(new_output), len(new_output))))
        out.append(replace(pair, input=new_input, output=new_output,
                           alignment=new_alignment))
    return out


# --- lexicon TSV: "source<TAB>target<TAB>count" ---

def save_lexicon(lexicon: DictLexicon, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for source in sorted(lexicon.unique):
            fh.write(f"{source}\t{lexicon.unique[source]}\t1\n")
        for source in sorted(lexicon.multi):
            for target, count in lexicon.multi[source]:
                fh.write(f"{source}\t{target}\t{count}\n")


def load_lexicon(path) -> DictLexicon:
    counts: dict[str, list[tuple[str, int]]] = defaultdict(list)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 fields")
            source, target, count = fields
            counts[source].append((target, int(count)))
    lexicon = DictLexicon()
    for source, targets in counts.items():
        if len(targets) == 1:
            lexicon.unique[source] = targets[0][0]
        else:
            lexicon.multi[source] = sorted(targets,
                                           key=lambda kv: (-kv[1], kv[0]))
    return lexicon


def save_lexicon_dir(lexicon: DictLexicon, directory) -> None:
    """A self-describing dictionary-model directory."""
    import json
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump({"format_version": 1, "kind": "dict",
                   "lexicon": "lexicon.tsv"}, fh)
    save_lexicon(lexicon, directory / "lexicon.tsv")
