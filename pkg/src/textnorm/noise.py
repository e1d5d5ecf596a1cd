"""Synthetic adversarial word-pair generation.

Six corruption types mimic errors common in user-generated text; applied to
words that the training data leaves unchanged, they supply the character
model with (noised, clean) supervision.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import Enum

from .corpus import WordPair

VOWELS = "aeiou"
LASTCHAR_FINALS = set("uysraoi")

# Rows of a US QWERTY board; the apostrophe closes the home row. A key at
# (row, i) neighbors (row, i±1) plus, one row down, columns i-1 and i —
# which encodes the standard half-key stagger in both directions.
QWERTY_ROWS = ("qwertyuiop", "asdfghjkl'", "zxcvbnm")


class NoiseType(Enum):
    DEL = "del"
    SWAP = "swap"
    LASTCHAR = "lastchar"
    PUNCT = "punct"
    KEYBOARD = "keyboard"
    ELONG = "elong"


class NoiseInapplicable(Exception):
    """The requested noise type has no valid site in this word."""


class KeyboardLayout:
    """Character adjacency on a physical keyboard (symmetric)."""

    def __init__(self, adjacency: dict[str, set[str]]):
        self.adjacency = {c: set(ns) for c, ns in adjacency.items()}
        for c, ns in self.adjacency.items():
            for n in ns:
                if c not in self.adjacency.get(n, set()):
                    raise ValueError(f"asymmetric adjacency: {c!r}->{n!r}")

    @classmethod
    def from_rows(cls, rows=QWERTY_ROWS) -> "KeyboardLayout":
        adjacency: dict[str, set[str]] = {c: set() for row in rows for c in row}
        for r, row in enumerate(rows):
            for i, c in enumerate(row):
                if i > 0:
                    adjacency[c].add(row[i - 1])
                if i + 1 < len(row):
                    adjacency[c].add(row[i + 1])
                if r + 1 < len(rows):
                    below = rows[r + 1]
                    for j in (i - 1, i):
                        if 0 <= j < len(below):
                            adjacency[c].add(below[j])
                            adjacency[below[j]].add(c)
        return cls(adjacency)

    @classmethod
    def from_json(cls, path) -> "KeyboardLayout":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls({c: set(ns) for c, ns in raw.items()})

    def neighbors(self, c: str) -> set[str]:
        return set(self.adjacency.get(c, set()))


QWERTY = KeyboardLayout.from_rows()


def keyboard_neighbors(c: str) -> set[str]:
    """QWERTY-adjacent characters of a lowercase letter; empty set for
    anything that is not a letter."""
    if len(c) == 1 and c.isascii() and c.islower() and c.isalpha():
        return QWERTY.neighbors(c)
    return set()


@dataclass(frozen=True)
class NoiseConfig:
    ratio: float = 0.1
    seed: int = 1
    k_max: int = 6
    layout: KeyboardLayout = field(default=QWERTY, repr=False, compare=False)

    def __post_init__(self):
        if not 0.0 <= self.ratio <= 1.0:
            raise ValueError(f"ratio must be in [0,1], got {self.ratio}")
        if self.k_max < 1:
            raise ValueError(f"k_max must be >= 1, got {self.k_max}")


def _del_char(word, rng, k_max, layout):
    if len(word) < 2:
        raise NoiseInapplicable("word too short to delete from")
    i = rng.randrange(len(word))
    return word[:i] + word[i + 1:]


def _swap_chars(word, rng, k_max, layout):
    sites = [i for i in range(len(word) - 1) if word[i] != word[i + 1]]
    if not sites:
        raise NoiseInapplicable("no unequal adjacent characters to swap")
    i = rng.choice(sites)
    return word[:i] + word[i + 1] + word[i] + word[i + 2:]


def _elongate_last(word, rng, k_max, layout):
    if word[-1] not in LASTCHAR_FINALS:
        raise NoiseInapplicable("final character not in {u,y,s,r,a,o,i}")
    k = rng.randint(1, k_max)
    return word + word[-1] * k


def _perturb_apostrophe(word, rng, k_max, layout):
    sites = [i for i, c in enumerate(word) if c == "'"]
    if not sites or len(word) - len(sites) == 0:
        raise NoiseInapplicable("no apostrophe to delete or displace")
    i = rng.choice(sites)
    base = word[:i] + word[i + 1:]
    # re-inserting at j == i reproduces the input
    targets = [j for j in range(1, len(base)) if j != i]
    actions = ["delete"] + (["displace"] if targets else [])
    if rng.choice(actions) == "delete":
        return base
    j = rng.choice(targets)
    return base[:j] + "'" + base[j:]


def _keyboard_slip(word, rng, k_max, layout):
    sites = [i for i, c in enumerate(word) if layout.neighbors(c)]
    if not sites:
        raise NoiseInapplicable("no character with keyboard neighbors")
    i = rng.choice(sites)
    replacement = rng.choice(sorted(layout.neighbors(word[i])))
    return word[:i] + replacement + word[i + 1:]


def _elongate_vowel(word, rng, k_max, layout):
    sites = [i for i, c in enumerate(word) if c in VOWELS]
    if not sites:
        raise NoiseInapplicable("no vowel to elongate")
    i = rng.choice(sites)
    k = rng.randint(1, k_max)
    return word[:i + 1] + word[i] * k + word[i + 1:]


_GENERATORS = {
    NoiseType.DEL: _del_char,
    NoiseType.SWAP: _swap_chars,
    NoiseType.LASTCHAR: _elongate_last,
    NoiseType.PUNCT: _perturb_apostrophe,
    NoiseType.KEYBOARD: _keyboard_slip,
    NoiseType.ELONG: _elongate_vowel,
}


def apply_noise(word: str, noise_type: NoiseType, rng: random.Random,
                k_max: int = 6, layout: KeyboardLayout = QWERTY) -> str:
    """Return a corrupted copy of ``word``; never returns the input itself.

    Raises NoiseInapplicable when the word offers no valid site for the
    requested type, so callers can skip that type for that word.
    """
    if not word:
        raise NoiseInapplicable("empty word")
    noised = _GENERATORS[noise_type](word, rng, k_max, layout)
    assert noised != word
    return noised


def applicable_types(word: str, k_max: int = 6,
                     layout: KeyboardLayout = QWERTY) -> list[NoiseType]:
    """Noise types that can corrupt this word."""
    out = []
    for noise_type in NoiseType:
        probe = random.Random(0)
        try:
            _GENERATORS[noise_type](word, probe, k_max, layout)
        except NoiseInapplicable:
            continue
        out.append(noise_type)
    return out


def generate_adversarial(pairs: list[WordPair],
                         config: NoiseConfig) -> list[WordPair]:
    """All input pairs plus synthetic corruptions of the unchanged-word set.

    The unchanged universe is the set of distinct words w with an identity
    pair (w, w); for each such word and each noise type independently, a
    synthetic (noised, w) pair is injected with probability ``ratio``.
    Deterministic given the seed.
    """
    rng = random.Random(config.seed)
    out = list(pairs)
    unchanged = dict.fromkeys(p.source for p in pairs if p.source == p.target)
    for word in unchanged:
        for noise_type in NoiseType:
            if rng.random() >= config.ratio:
                continue
            try:
                noised = apply_noise(word, noise_type, rng,
                                     k_max=config.k_max, layout=config.layout)
            except NoiseInapplicable:
                continue
            out.append(WordPair(source=noised, target=word, synthetic=True,
                                origin=noise_type.value))
    return out


# --- TSV word-pair files: "noised<TAB>clean<TAB>origin" ---

def save_word_pairs(pairs: list[WordPair], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(f"{p.source}\t{p.target}\t{p.origin}\n")


def load_word_pairs(path) -> list[WordPair]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 tab-separated "
                                 f"fields, got {len(fields)}")
            source, target, origin = fields
            pairs.append(WordPair(source=source, target=target,
                                  synthetic=origin != "real", origin=origin))
    return pairs
