"""Run configuration: explicit JSON keys, defaults per the best-performing
hyperparameter settings, and a materialized (always persisted) seed."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, replace

from .models.seq2seq import (Hyperparams, char_defaults, s2schar_defaults,
                             word_defaults)
from .noise import NoiseConfig

SEED_ENV_VAR = "TEXTNORM_SEED"
DEFAULT_SEED = 1


@dataclass
class DecodeOptions:
    max_len: int | None = None  # None: twice the source length plus slack
    beam_width: int = 1


@dataclass
class Paths:
    train: str | None = None
    test: str | None = None
    model_dir: str | None = None
    word_pairs: str | None = None  # TSV for the secondary char model


@dataclass
class RunConfig:
    seed: int = DEFAULT_SEED
    paths: Paths = field(default_factory=Paths)
    word: Hyperparams = field(default_factory=word_defaults)
    char: Hyperparams = field(default_factory=char_defaults)
    s2schar: Hyperparams = field(default_factory=s2schar_defaults)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    tau: float = 0.5
    decode: DecodeOptions = field(default_factory=DecodeOptions)

    def to_json(self) -> dict:
        data = {
            "seed": self.seed,
            "paths": asdict(self.paths),
            "word": asdict(self.word),
            "char": asdict(self.char),
            "s2schar": asdict(self.s2schar),
            "noise": {"ratio": self.noise.ratio, "seed": self.noise.seed,
                      "k_max": self.noise.k_max},
            "tau": self.tau,
            "decode": asdict(self.decode),
        }
        return data

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=1)


def _merge(defaults, data: dict):
    known = {k: v for k, v in data.items() if k in defaults.__dataclass_fields__}
    unknown = set(data) - set(known)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return replace(defaults, **known)


def load_config(path: str | None = None) -> RunConfig:
    """Build a RunConfig from a JSON file (all keys optional), materialize
    the seed, and apply the TEXTNORM_SEED override if set."""
    data = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    cfg = RunConfig()
    if "seed" in data:
        cfg.seed = int(data["seed"])
    if "paths" in data:
        cfg.paths = _merge(Paths(), data["paths"])
    for key in ("word", "char", "s2schar"):
        if key in data:
            setattr(cfg, key, _merge(getattr(cfg, key), data[key]))
    if "noise" in data:
        noise = dict(data["noise"])
        cfg.noise = NoiseConfig(ratio=noise.pop("ratio", cfg.noise.ratio),
                                seed=noise.pop("seed", cfg.noise.seed),
                                k_max=noise.pop("k_max", cfg.noise.k_max))
        if noise:
            raise ValueError(f"unknown noise config keys: {sorted(noise)}")
    if "tau" in data:
        cfg.tau = float(data["tau"])
    if "decode" in data:
        cfg.decode = _merge(DecodeOptions(), data["decode"])
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed:
        cfg.seed = int(env_seed)
    return cfg
