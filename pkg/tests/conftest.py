import json
import os
import random
from pathlib import Path

import pytest

from textnorm.corpus import BOS, EOS, load_lexnorm, preprocess
from textnorm.models import Hyperparams, train_char_model, train_seq2seq
from textnorm.noise import NoiseConfig, generate_adversarial
from textnorm.corpus import extract_word_pairs

# A small hand-built LexNorm-format corpus: mentions/hashtags/urls, 1:N and
# N:1 mappings, identity tokens and a couple of noisy words.
TOY_RECORDS = [
    {"tid": "t1", "index": "1",
     "input": ["@Ann", "i", "see", ",", "u", "can", "come"],
     "output": ["@Ann", "i", "see", ",", "you", "can", "come"]},
    {"tid": "t2", "index": "2",
     "input": ["omw", "to", "the", "show"],
     "output": ["on my way", "to", "the", "show"]},
    {"tid": "t3", "index": "3",
     "input": ["see", "u", "soon", "#fun"],
     "output": ["see", "you", "soon", "#fun"]},
    {"tid": "t4", "index": "4",
     "input": ["check", "http://t.co/x", "NOW"],
     "output": ["check", "http://t.co/x", "now"]},
    {"tid": "t5", "index": "5",
     "input": ["dont", "worry", "b", "happy"],
     "output": ["don't", "worry", "be", "happy"]},
    {"tid": "t6", "index": "6",
     "input": ["gonna", "rain", "l8r"],
     "output": ["going to", "rain", "later"]},
    {"tid": "t7", "index": "7",
     "input": ["that", "is", "so", "cool"],
     "output": ["that", "is", "so", "cool"]},
    {"tid": "t8", "index": "8",
     "input": ["u", "r", "the", "best"],
     "output": ["you", "are", "the", "best"]},
]

# Vocabulary for synthesizing larger corpora with known gold mappings.
_NOISY_MAP = {"u": "you", "r": "are", "dont": "don't", "l8r": "later",
              "gonna": "going to", "omw": "on my way", "thx": "thanks",
              "pls": "please"}
_CLEAN = ["see", "soon", "the", "best", "come", "rain", "show", "now",
          "worry", "happy", "that", "is", "so", "cool", "to", "can", "i",
          "we", "go", "home", "good", "day", "night", "friend"]


def make_toy_records(n: int, seed: int = 0, mention_rate: float = 0.2):
    rng = random.Random(seed)
    records = []
    for k in range(n):
        length = rng.randint(3, 7)
        source, target = [], []
        if rng.random() < mention_rate:
            name = f"@user{rng.randint(1, 30)}"
            source.append(name)
            target.append(name)
        for _ in range(length):
            if rng.random() < 0.3:
                noisy = rng.choice(sorted(_NOISY_MAP))
                source.append(noisy)
                target.append(_NOISY_MAP[noisy])
            else:
                word = rng.choice(_CLEAN)
                source.append(word)
                target.append(word)
        records.append({"tid": f"g{k}", "index": str(k),
                        "input": source, "output": target})
    return records


def write_records(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(records, fh, ensure_ascii=False)
    return path


@pytest.fixture
def toy_lexnorm_file(tmp_path):
    return write_records(TOY_RECORDS, tmp_path / "toy.json")


@pytest.fixture(scope="session")
def toy_pairs():
    import tempfile
    with tempfile.TemporaryDirectory() as d:
        path = write_records(TOY_RECORDS, Path(d) / "toy.json")
        return load_lexnorm(path)


@pytest.fixture(scope="session")
def toy_corpus(toy_pairs):
    return [preprocess(p) for p in toy_pairs]


@pytest.fixture(scope="session")
def train_records():
    return make_toy_records(60, seed=1)


@pytest.fixture(scope="session")
def train_corpus(train_records):
    import tempfile
    with tempfile.TemporaryDirectory() as d:
        path = write_records(train_records, Path(d) / "train.json")
        return [preprocess(p) for p in load_lexnorm(path)]


def tiny_hp(**overrides) -> Hyperparams:
    base = dict(emb_dim=16, hidden_size=24, num_layers=1, dropout=0.0,
                learning_rate=0.01, batch_size=32, max_epochs=60,
                val_fraction=0.0, teacher_end=1.0)
    base.update(overrides)
    return Hyperparams(**base)


@pytest.fixture(scope="session")
def tiny_word_model(train_corpus):
    hp = tiny_hp(hidden_size=32, batch_size=8, max_epochs=120)
    return train_seq2seq(train_corpus, hp, seed=7)


@pytest.fixture(scope="session")
def copy_model():
    """Random-sequence copy task with singleton rare tokens: forces
    positional attention and teaches UNK emission, so the OOV copy
    fallback can be exercised end to end."""
    rnd = random.Random(3)
    vocab = [f"w{i}" for i in range(12)]
    pairs = []
    for _ in range(80):
        tokens = [rnd.choice(vocab) for _ in range(rnd.randint(3, 5))]
        pairs.append((tokens, list(tokens)))
    for i in range(40):
        tokens = [rnd.choice(vocab) for _ in range(rnd.randint(2, 4))]
        tokens.insert(rnd.randrange(len(tokens) + 1), f"rare{i}")
        pairs.append((tokens, list(tokens)))
    framed = [([BOS] + s + [EOS], [BOS] + t + [EOS]) for s, t in pairs]
    hp = tiny_hp(hidden_size=32, batch_size=8, max_epochs=150,
                 min_frequency=3)
    return train_seq2seq(framed, hp, seed=13)


@pytest.fixture(scope="session")
def tiny_char_model(train_corpus):
    pairs = generate_adversarial(extract_word_pairs(train_corpus),
                                 NoiseConfig(ratio=0.3, seed=5))
    hp = tiny_hp(emb_dim=16, hidden_size=32, max_epochs=60, batch_size=32,
                 learning_rate=0.005)
    return train_char_model(pairs, hp, seed=11)


# --- LexNorm dataset discovery for the quantitative acceptance tests ---

def dataset_dir() -> Path:
    return Path(os.environ.get("TEXTNORM_DATA_DIR",
                               Path(__file__).resolve().parent.parent / "data"))


def dataset_paths():
    d = dataset_dir()
    train, test = d / "train_data.json", d / "test_truth.json"
    if train.exists() and test.exists():
        return train, test
    return None


requires_dataset = pytest.mark.skipif(
    dataset_paths() is None,
    reason="LexNorm dataset not present (put train_data.json and "
           "test_truth.json in ./data or set TEXTNORM_DATA_DIR)")
