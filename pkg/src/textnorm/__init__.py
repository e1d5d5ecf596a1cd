"""Social-media text normalization: hybrid word/character attention
encoder-decoder models, adversarial noise generation, dictionary baselines
and a shared-task-style evaluation harness."""

__version__ = "0.1.0"

from .corpus import (BOS, EOS, HASHTAG, MENTION, PAD, SELF, SPECIALS, UNK,
                     URL, PreprocessedPair, TweetPair, Vocabulary, WordPair,
                     build_vocab, deanonymize, extract_word_pairs,
                     load_lexnorm, make_self_targets, preprocess,
                     split_ngrams)
from .evaluation import (ErrorReport, EvalResult, SweepResult, error_analysis,
                         oov_accuracy, score, sweep_ngram, sweep_noise_ratio)
from .noise import (KeyboardLayout, NoiseConfig, NoiseInapplicable, NoiseType,
                    apply_noise, generate_adversarial, keyboard_neighbors)

__all__ = [
    "BOS", "EOS", "HASHTAG", "MENTION", "PAD", "SELF", "SPECIALS", "UNK",
    "URL", "ErrorReport", "EvalResult", "KeyboardLayout", "NoiseConfig",
    "NoiseInapplicable", "NoiseType", "PreprocessedPair", "SweepResult",
    "TweetPair", "Vocabulary", "WordPair", "apply_noise", "build_vocab",
    "deanonymize", "error_analysis", "extract_word_pairs",
    "generate_adversarial", "keyboard_neighbors", "load_lexnorm",
    "make_self_targets", "oov_accuracy", "preprocess", "score",
    "split_ngrams", "sweep_ngram", "sweep_noise_ratio",
]
