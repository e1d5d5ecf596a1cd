import numpy as np
import pytest

from textnorm.corpus import BOS, EOS, build_vocab
from textnorm.models.seq2seq import (DecodeResult, Hyperparams, Seq2SeqModel,
                                     batch_loss, beam_decode, confidence,
                                     decode, greedy_decode, load_model,
                                     save_model, teacher_forced_accuracy,
                                     train_seq2seq)
from textnorm.neural.optim import TrainingDiverged

from conftest import tiny_hp

TOY_PAIRS = [
    ([BOS, "u", EOS], [BOS, "you", EOS]),
    ([BOS, "see", "u", EOS], [BOS, "see", "you", EOS]),
    ([BOS, "soon", EOS], [BOS, "soon", EOS]),
    ([BOS, "see", "u", "soon", EOS], [BOS, "see", "you", "soon", EOS]),
    ([BOS, "omw", EOS], [BOS, "on", "my", "way", EOS]),
    ([BOS, "b", "happy", EOS], [BOS, "be", "happy", EOS]),
    ([BOS, "dont", "go", EOS], [BOS, "don't", "go", EOS]),
    ([BOS, "go", "home", EOS], [BOS, "go", "home", EOS]),
] * 3


@pytest.fixture(scope="module")
def overfit_model():
    return train_seq2seq(TOY_PAIRS, tiny_hp(max_epochs=200), seed=3)


class TestTraining:
    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            train_seq2seq([], tiny_hp(), seed=0)

    def test_overfits_toy_corpus(self, overfit_model):
        assert teacher_forced_accuracy(overfit_model, TOY_PAIRS) >= 0.99

    def test_history_logged_per_epoch(self, overfit_model):
        assert len(overfit_model.history) == 200
        assert all("train_loss" in e for e in overfit_model.history)

    def test_loss_decreases(self, overfit_model):
        losses = [e["train_loss"] for e in overfit_model.history]
        assert losses[-1] < losses[0] / 5

    def test_bitwise_determinism(self):
        hp = tiny_hp(max_epochs=2, dropout=0.3, teacher_end=0.5)
        a = train_seq2seq(TOY_PAIRS, hp, seed=11)
        b = train_seq2seq(TOY_PAIRS, hp, seed=11)
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert pa.name == pb.name
            assert np.array_equal(pa.data, pb.data)

    def test_seeds_give_different_models(self):
        hp = tiny_hp(max_epochs=2)
        a = train_seq2seq(TOY_PAIRS, hp, seed=1)
        b = train_seq2seq(TOY_PAIRS, hp, seed=2)
        assert any(not np.array_equal(pa.data, pb.data)
                   for pa, pb in zip(a.parameters(), b.parameters()))

    def test_early_stopping_with_validation(self):
        hp = tiny_hp(max_epochs=50, val_fraction=0.25, patience=2)
        model = train_seq2seq(TOY_PAIRS, hp, seed=5)
        assert len(model.history) < 50
        assert all(e["val_loss"] is not None for e in model.history)

    def test_nan_parameters_make_nan_loss(self):
        model = train_seq2seq(TOY_PAIRS, tiny_hp(max_epochs=1), seed=0)
        model.embedding.data[...] = np.nan
        examples = [(model.vocab.encode(s), model.vocab.encode(t))
                    for s, t in TOY_PAIRS[:4]]
        loss, _, _ = batch_loss(model, examples, 1.0)
        assert not np.isfinite(loss.item())

    def test_divergence_aborts_with_epoch(self, monkeypatch):
        import textnorm.models.seq2seq as s2s

        def bad_loss(model, batch, p_teacher):
            from textnorm.neural.tensor import Tensor
            return Tensor(np.array(np.nan)), 0, 1

        monkeypatch.setattr(s2s, "batch_loss", bad_loss)
        with pytest.raises(TrainingDiverged, match="epoch 0"):
            train_seq2seq(TOY_PAIRS, tiny_hp(max_epochs=1), seed=0)

    def test_scheduled_sampling_path_trains(self):
        hp = tiny_hp(max_epochs=3, teacher_end=0.0)
        model = train_seq2seq(TOY_PAIRS, hp, seed=9)
        assert np.isfinite(model.history[-1]["train_loss"])

    def test_granularity_fixed_and_validated(self):
        with pytest.raises(ValueError, match="granularity"):
            Seq2SeqModel(build_vocab([]), tiny_hp(), 0, granularity="byte")


class TestDecode:
    def test_overfit_u_you(self, overfit_model):
        ids = overfit_model.vocab.encode([BOS, "u", EOS])
        result = greedy_decode(overfit_model, ids)
        assert result.tokens == ["you"]
        assert result.confidence > 0.9

    def test_max_len_zero(self, overfit_model):
        ids = overfit_model.vocab.encode([BOS, "u", EOS])
        result = greedy_decode(overfit_model, ids, max_len=0)
        assert result.tokens == []
        assert result.confidence == 1.0

    def test_records_are_consistent(self, overfit_model):
        ids = overfit_model.vocab.encode([BOS, "see", "u", "soon", EOS])
        result = greedy_decode(overfit_model, ids)
        assert len(result.tokens) == len(result.step_probs)
        assert len(result.tokens) == len(result.attention)
        for alpha in result.attention:
            assert alpha.shape == (len(ids),)
            assert abs(alpha.sum() - 1.0) < 1e-5
        assert all(0.0 < p <= 1.0 for p in result.step_probs)

    def test_max_len_caps_output(self, overfit_model):
        ids = overfit_model.vocab.encode([BOS, "omw", EOS])
        result = greedy_decode(overfit_model, ids, max_len=2)
        assert len(result.tokens) <= 2

    def test_inference_deterministic_with_dropout_model(self):
        hp = tiny_hp(max_epochs=5, dropout=0.5)
        model = train_seq2seq(TOY_PAIRS, hp, seed=4)
        ids = model.vocab.encode([BOS, "see", "u", EOS])
        a = greedy_decode(model, ids)
        b = greedy_decode(model, ids)
        assert a.tokens == b.tokens
        assert a.step_probs == b.step_probs

    def test_beam_width_one_equals_greedy(self, overfit_model):
        ids = overfit_model.vocab.encode([BOS, "see", "u", "soon", EOS])
        greedy = greedy_decode(overfit_model, ids)
        beam = decode(overfit_model, ids, beam_width=1)
        assert beam.tokens == greedy.tokens

    def test_beam_search_runs_and_scores(self, overfit_model):
        ids = overfit_model.vocab.encode([BOS, "omw", EOS])
        result = beam_decode(overfit_model, ids, beam_width=3)
        assert result.tokens == ["on", "my", "way"]
        assert len(result.step_probs) == 3
        assert len(result.attention) == 3


class TestConfidence:
    def test_all_ones(self):
        assert confidence([1.0, 1.0, 1.0]) == 1.0

    def test_geometric_mean(self):
        assert abs(confidence([0.25, 1.0]) - 0.5) < 1e-12

    def test_empty_convention(self):
        assert confidence([]) == 1.0

    def test_accepts_decode_result(self):
        result = DecodeResult(tokens=["a"], token_ids=[1], step_probs=[0.81])
        assert abs(confidence(result) - 0.81) < 1e-12
        assert abs(result.confidence - 0.81) < 1e-12


class TestPersistence:
    def test_roundtrip_identical_decisions(self, overfit_model, tmp_path):
        save_model(overfit_model, tmp_path / "m")
        loaded = load_model(tmp_path / "m")
        for a, b in zip(overfit_model.parameters(), loaded.parameters()):
            assert np.allclose(a.data, b.data, atol=1e-6)
        ids = overfit_model.vocab.encode([BOS, "see", "u", "soon", EOS])
        assert (greedy_decode(loaded, ids).tokens
                == greedy_decode(overfit_model, ids).tokens)
        assert loaded.vocab.itos == overfit_model.vocab.itos

    def test_tied_projection_after_load(self, overfit_model, tmp_path):
        save_model(overfit_model, tmp_path / "m")
        loaded = load_model(tmp_path / "m")
        assert loaded.projection.embedding is loaded.embedding

    def test_manifest_format(self, overfit_model, tmp_path):
        import json
        save_model(overfit_model, tmp_path / "m", view="plain")
        manifest = json.loads((tmp_path / "m" / "manifest.json").read_text())
        assert manifest["kind"] == "seq2seq"
        assert manifest["format_version"] == 1
        records = manifest["tensors"]
        assert records[0]["name"] == "embed.E"
        assert all(r["dtype"] == "f32" for r in records)
        offset = 0
        for r in records:
            assert r["byte_offset"] == offset
            offset += r["byte_length"]
        blob = (tmp_path / "m" / "weights.bin").read_bytes()
        assert len(blob) == offset

    def test_float64_model_serializes_as_f32(self, tmp_path):
        vocab = build_vocab([])
        model = Seq2SeqModel(vocab, tiny_hp(), seed=0, dtype=np.float64)
        save_model(model, tmp_path / "m64")
        loaded = load_model(tmp_path / "m64")
        assert loaded.embedding.data.dtype == np.float32

    def test_wrong_kind_rejected(self, tmp_path):
        import json
        d = tmp_path / "bad"
        d.mkdir()
        (d / "manifest.json").write_text(json.dumps(
            {"format_version": 1, "kind": "dict", "tensors": []}))
        (d / "weights.bin").write_bytes(b"")
        with pytest.raises(ValueError, match="seq2seq"):
            load_model(d)
