from .dictionaries import (DictLexicon, build_lexicon, dict1_normalize,
                           dict2_normalize, load_lexicon, make_multi_view,
                           save_lexicon)
from .normalizers import (HybridModel, char_eligible, char_normalize_word,
                          load_hybrid, normalize_hybrid, normalize_word_s2s,
                          s2schar_normalize, s2sself_normalize,
                          s2smulti_normalize, save_hybrid, train_char_model)
from .seq2seq import (DecodeResult, Hyperparams, Seq2SeqModel, beam_decode,
                      char_defaults, confidence, decode, greedy_decode,
                      load_model, s2schar_defaults, save_model,
                      teacher_forced_accuracy, train_seq2seq, word_defaults)

__all__ = [
    "DecodeResult", "DictLexicon", "HybridModel", "Hyperparams",
    "Seq2SeqModel", "beam_decode", "build_lexicon", "char_defaults",
    "char_eligible", "char_normalize_word", "confidence", "decode",
    "dict1_normalize", "dict2_normalize", "greedy_decode", "load_hybrid",
    "load_lexicon", "load_model", "make_multi_view", "normalize_hybrid",
    "normalize_word_s2s", "s2schar_defaults", "s2schar_normalize",
    "s2sself_normalize", "s2smulti_normalize", "save_hybrid", "save_lexicon",
    "save_model", "teacher_forced_accuracy", "train_char_model",
    "train_seq2seq", "word_defaults",
]
