import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from textnorm.neural.layers import (EncoderParams, GRUCellParams,
                                    OutputProjection, attention,
                                    bidirectional_encode, decoder_step,
                                    gru_cell, init_param, nll_loss,
                                    scheduled_sample)
from textnorm.neural.tensor import Parameter, Tensor

rng = np.random.default_rng(5)


def zeroed_cell(n_in, n_h):
    cell = GRUCellParams.create(rng, n_in, n_h, "z", np.float64)
    for p in cell.parameters():
        p.data[...] = 0.0
    return cell


# --- straight-line scalar oracles ---

def scalar_sigmoid(v):
    return 1.0 / (1.0 + math.exp(-v))


def scalar_gru(x, h, cell):
    wz, bz = cell.w_update.data, cell.b_update.data
    wr, br = cell.w_reset.data, cell.b_reset.data
    wh, bh = cell.w_cand.data, cell.b_cand.data
    n_h = len(h)
    xh = list(x) + list(h)
    z = [scalar_sigmoid(sum(xh[i] * wz[i][j] for i in range(len(xh))) + bz[j])
         for j in range(n_h)]
    r = [scalar_sigmoid(sum(xh[i] * wr[i][j] for i in range(len(xh))) + br[j])
         for j in range(n_h)]
    xrh = list(x) + [r[j] * h[j] for j in range(n_h)]
    cand = [math.tanh(sum(xrh[i] * wh[i][j] for i in range(len(xrh))) + bh[j])
            for j in range(n_h)]
    return [(1.0 - z[j]) * h[j] + z[j] * cand[j] for j in range(n_h)]


class TestGRUCell:
    def test_zero_weights_closed_form(self):
        cell = zeroed_cell(2, 2)
        out = gru_cell(Tensor(np.zeros((1, 2))), Tensor(np.ones((1, 2))),
                       cell)
        assert np.allclose(out.data, [[0.5, 0.5]])

    def test_bias_only_closed_form(self):
        cell = zeroed_cell(2, 3)
        cell.b_update.data[...] = [0.3, -0.2, 1.0]
        cell.b_cand.data[...] = [0.5, 0.5, -1.5]
        out = gru_cell(Tensor(np.zeros((1, 2))), Tensor(np.zeros((1, 3))),
                       cell)
        z = 1 / (1 + np.exp(-cell.b_update.data))
        expected = z * np.tanh(cell.b_cand.data)
        assert np.allclose(out.data, expected[None, :])

    def test_matches_scalar_oracle(self):
        cell = GRUCellParams.create(rng, 3, 4, "o", np.float64)
        x = rng.normal(size=3)
        h = rng.normal(size=4)
        expected = scalar_gru(list(x), list(h), cell)
        out = gru_cell(Tensor(x[None, :]), Tensor(h[None, :]), cell)
        assert np.abs(out.data[0] - np.array(expected)).max() < 1e-12

    def test_shape_mismatch_raises(self):
        cell = GRUCellParams.create(rng, 3, 4, "m", np.float64)
        with pytest.raises(ValueError, match="gru_cell"):
            gru_cell(Tensor(np.zeros((1, 5))), Tensor(np.zeros((1, 4))), cell)


class TestBidirectionalEncode:
    def test_single_step_concatenates_directions(self):
        emb = init_param(rng, (7, 3), "E", np.float64)
        params = EncoderParams.create(rng, 3, 4, 1, "e", np.float64)
        states, final_fwd = bidirectional_encode(np.array([[2]]), emb, params)
        assert states.data.shape == (1, 1, 8)
        x = emb.data[2]
        fwd, bwd = params.layers[0]
        f = scalar_gru(list(x), [0.0] * 4, fwd)
        b = scalar_gru(list(x), [0.0] * 4, bwd)
        assert np.allclose(states.data[0, 0, :4], f)
        assert np.allclose(states.data[0, 0, 4:], b)
        assert np.allclose(final_fwd.data[0], f)

    def test_palindrome_with_tied_directions(self):
        emb = init_param(rng, (9, 3), "E", np.float64)
        cell = GRUCellParams.create(rng, 3, 5, "tied", np.float64)
        params = EncoderParams([(cell, cell)])
        ids = np.array([[1, 4, 7, 4, 1]])
        states, _ = bidirectional_encode(ids, emb, params)
        seq_len = ids.shape[1]
        for t in range(seq_len):
            fwd_half = states.data[t, 0, :5]
            bwd_half = states.data[seq_len - 1 - t, 0, 5:]
            assert np.allclose(fwd_half, bwd_half, atol=1e-12)

    def test_table_dims_shape(self):
        # 200 neurons, 3 layers -> T x 400 encoder states
        emb = init_param(rng, (11, 16), "E")
        params = EncoderParams.create(rng, 16, 200, 3, "e")
        states, final_fwd = bidirectional_encode(
            np.array([[1, 2, 3, 4, 5]]), emb, params)
        assert states.data.shape == (5, 1, 400)
        assert final_fwd.data.shape == (1, 200)

    def test_empty_sequence_rejected(self):
        emb = init_param(rng, (5, 3), "E")
        params = EncoderParams.create(rng, 3, 4, 1, "e")
        with pytest.raises(ValueError, match="empty"):
            bidirectional_encode(np.zeros((1, 0), dtype=int), emb, params)

    def test_padding_mask_freezes_final_state(self):
        # right-padded batch: final forward state equals the state of the
        # same sequence encoded without padding
        emb = init_param(rng, (9, 3), "E", np.float64)
        params = EncoderParams.create(rng, 3, 4, 2, "e", np.float64)
        plain, final_plain = bidirectional_encode(np.array([[3, 5]]), emb,
                                                  params)
        padded, final_padded = bidirectional_encode(
            np.array([[3, 5, 0, 0]]), emb, params,
            mask=np.array([[1.0, 1.0, 0.0, 0.0]]))
        assert np.allclose(final_plain.data, final_padded.data, atol=1e-12)
        assert np.allclose(plain.data[:2, 0], padded.data[:2, 0], atol=1e-12)


class TestAttention:
    def test_uniform_when_scores_equal(self):
        weight = Parameter(np.zeros((2, 3)), "W")
        states = Tensor(rng.normal(size=(4, 3)))
        alpha, context = attention(Tensor(np.array([1.0, -2.0])), states,
                                   weight)
        assert np.allclose(alpha.data, 0.25)
        assert np.allclose(context.data, states.data.mean(axis=0))

    def test_hand_softmax(self):
        weight = Parameter(np.eye(2), "W")
        states = Tensor(np.array([[10.0, 0.0], [0.0, 10.0]]))
        alpha, _ = attention(Tensor(np.array([1.0, 0.0])), states, weight)
        e = math.exp(10.0)
        assert np.allclose(alpha.data, [e / (e + 1), 1 / (e + 1)])
        assert abs(alpha.data[1] - 4.5398e-05) < 1e-8

    def test_single_state(self):
        weight = Parameter(rng.normal(size=(3, 4)), "W")
        states = Tensor(rng.normal(size=(1, 4)))
        alpha, context = attention(Tensor(rng.normal(size=3)), states, weight)
        assert np.allclose(alpha.data, [1.0])
        assert np.allclose(context.data, states.data[0])

    def test_mask_zeroes_padded_positions(self):
        weight = Parameter(rng.normal(size=(3, 4)), "W")
        states = Tensor(rng.normal(size=(5, 2, 4)))
        queries = Tensor(rng.normal(size=(2, 3)))
        mask = np.array([[1, 1, 1, 0, 0], [1, 1, 1, 1, 1]], dtype=float)
        alpha, _ = attention(queries, states, weight, mask=mask)
        assert np.allclose(alpha.data[0, 3:], 0.0)
        assert np.allclose(alpha.data.sum(axis=1), 1.0)

    @settings(max_examples=30)
    @given(st.integers(1, 8), st.integers(1, 5), st.integers(1, 5),
           st.integers(0, 2**30))
    def test_weights_simplex(self, seq_len, d, e, seed):
        local = np.random.default_rng(seed)
        weight = Parameter(local.normal(size=(d, e)), "W")
        alpha, _ = attention(Tensor(local.normal(size=d)),
                             Tensor(local.normal(size=(seq_len, e))), weight)
        assert np.all(alpha.data >= 0)
        assert abs(alpha.data.sum() - 1.0) < 1e-6


class TestDecoderStep:
    def test_tied_projection_is_embedding(self):
        emb = init_param(rng, (9, 4), "E", np.float64)
        proj = OutputProjection.create(rng, 6, emb, "out", np.float64)
        assert proj.embedding is emb

    def test_zero_state_uniform_distribution(self):
        emb = init_param(rng, (9, 4), "E", np.float64)
        proj = OutputProjection.create(rng, 6, emb, "out", np.float64)
        proj.bridge_w.data[...] = 0.0
        proj.bridge_b.data[...] = 0.0
        proj.bias.data[...] = 0.0
        cell = zeroed_cell(4 + 3, 6)
        _, logits = decoder_step(Tensor(np.zeros((1, 6))),
                                 Tensor(np.zeros((1, 4))),
                                 Tensor(np.zeros((1, 3))), cell, proj)
        assert np.allclose(logits.data, 0.0)
        probs = np.exp(logits.data[0]) / np.exp(logits.data[0]).sum()
        assert np.allclose(probs, 1.0 / 9)

    def test_matches_scalar_oracle(self):
        emb = init_param(rng, (5, 3), "E", np.float64)
        proj = OutputProjection.create(rng, 4, emb, "out", np.float64)
        cell = GRUCellParams.create(rng, 3 + 2, 4, "d", np.float64)
        s_prev = rng.normal(size=4)
        y_emb = rng.normal(size=3)
        context = rng.normal(size=2)
        s_next, logits = decoder_step(Tensor(s_prev[None, :]),
                                      Tensor(y_emb[None, :]),
                                      Tensor(context[None, :]), cell, proj)
        expected_s = scalar_gru(list(y_emb) + list(context), list(s_prev),
                                cell)
        assert np.abs(s_next.data[0] - expected_s).max() < 1e-12
        hidden = [sum(expected_s[i] * proj.bridge_w.data[i][j]
                      for i in range(4)) + proj.bridge_b.data[j]
                  for j in range(3)]
        expected_logits = [sum(hidden[j] * emb.data[v][j] for j in range(3))
                           + proj.bias.data[v] for v in range(5)]
        assert np.abs(logits.data[0] - expected_logits).max() < 1e-12


class TestNLLLoss:
    def test_perfect_prediction_near_zero(self):
        logits = np.full((1, 4), -50.0)
        logits[0, 2] = 50.0
        loss = nll_loss([Tensor(logits)], np.array([[2]]), pad_id=0)
        assert loss.item() < 1e-8

    def test_uniform_logits_log_vocab(self):
        loss = nll_loss([Tensor(np.zeros((1, 4)))], np.array([[3]]), pad_id=0)
        assert abs(loss.item() - math.log(4)) < 1e-9

    def test_padded_equals_unpadded_oracle(self):
        local = np.random.default_rng(3)
        vocab = 6
        steps = [local.normal(size=(2, vocab)) for _ in range(4)]
        targets = np.array([[1, 2, 3, 4], [5, 1, 0, 0]])  # pad_id 0
        loss = nll_loss([Tensor(s) for s in steps], targets, pad_id=0)

        def log_softmax(row):
            shifted = row - row.max()
            return shifted - math.log(np.exp(shifted).sum())

        per_token = []
        for b in range(2):
            for t in range(4):
                if targets[b, t] == 0:
                    continue
                per_token.append(-log_softmax(steps[t][b])[targets[b, t]])
        assert abs(loss.item() - np.mean(per_token)) < 1e-12

    def test_target_out_of_range(self):
        with pytest.raises(IndexError):
            nll_loss([Tensor(np.zeros((1, 4)))], np.array([[7]]), pad_id=0)


class TestScheduledSample:
    def test_teacher_forcing(self):
        gen = np.random.default_rng(0)
        assert all(scheduled_sample(3, 9, 1.0, gen) == 3 for _ in range(100))

    def test_model_rollout(self):
        gen = np.random.default_rng(0)
        assert all(scheduled_sample(3, 9, 0.0, gen) == 9 for _ in range(100))

    def test_monte_carlo_half(self):
        gen = np.random.default_rng(123)
        draws = [scheduled_sample(1, 0, 0.5, gen) for _ in range(10_000)]
        assert abs(sum(draws) / len(draws) - 0.5) < 0.02

    def test_invalid_probability(self):
        with pytest.raises(ValueError):
            scheduled_sample(1, 0, 1.5, np.random.default_rng(0))
