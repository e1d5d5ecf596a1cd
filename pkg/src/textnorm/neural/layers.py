"""Recurrent cells, bidirectional encoding, bilinear attention and the
decoder step that the sequence models assemble."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import (Parameter, Tensor, attn_context, attn_scores, concat,
                     cross_entropy_logits, dropout, embed, matmul, mul,
                     reshape, sigmoid, softmax, stack0, tanh, transpose2,
                     tsum)

INIT_SCALE = 0.08


def init_param(rng: np.random.Generator, shape, name: str,
               dtype=np.float32) -> Parameter:
    data = rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape).astype(dtype)
    return Parameter(data, name=name)


@dataclass
class GRUCellParams:
    """Gate weights acting on the concatenation [x; h]."""

    w_update: Parameter
    b_update: Parameter
    w_reset: Parameter
    b_reset: Parameter
    w_cand: Parameter
    b_cand: Parameter

    @classmethod
    def create(cls, rng, input_size: int, hidden_size: int, prefix: str,
               dtype=np.float32) -> "GRUCellParams":
        def p(tag, shape):
            return init_param(rng, shape, f"{prefix}.{tag}", dtype)
        return cls(
            w_update=p("w_update", (input_size + hidden_size, hidden_size)),
            b_update=p("b_update", (hidden_size,)),
            w_reset=p("w_reset", (input_size + hidden_size, hidden_size)),
            b_reset=p("b_reset", (hidden_size,)),
            w_cand=p("w_cand", (input_size + hidden_size, hidden_size)),
            b_cand=p("b_cand", (hidden_size,)),
        )

    def parameters(self) -> list[Parameter]:
        return [self.w_update, self.b_update, self.w_reset, self.b_reset,
                self.w_cand, self.b_cand]


def gru_cell(x: Tensor, h_prev: Tensor, params: GRUCellParams) -> Tensor:
    """One gated-recurrent update.

    z = σ(W_z[x;h]+b_z), r = σ(W_r[x;h]+b_r),
    h~ = tanh(W_h[x; r⊙h]+b_h), h' = (1−z)⊙h + z⊙h~.
    """
    if x.data.shape[-1] + h_prev.data.shape[-1] != params.w_update.data.shape[0]:
        raise ValueError(
            f"gru_cell: input {x.data.shape} + state {h_prev.data.shape} do "
            f"not match weights {params.w_update.data.shape}")
    xh = concat([x, h_prev], axis=-1)
    z = sigmoid(matmul(xh, params.w_update) + params.b_update)
    r = sigmoid(matmul(xh, params.w_reset) + params.b_reset)
    xrh = concat([x, mul(r, h_prev)], axis=-1)
    cand = tanh(matmul(xrh, params.w_cand) + params.b_cand)
    return (1.0 - z) * h_prev + mul(z, cand)


@dataclass
class EncoderParams:
    """Per-layer (forward, backward) cell pairs."""

    layers: list[tuple[GRUCellParams, GRUCellParams]]

    @classmethod
    def create(cls, rng, input_size, hidden_size, num_layers, prefix="enc",
               dtype=np.float32) -> "EncoderParams":
        layers = []
        for layer in range(num_layers):
            in_size = input_size if layer == 0 else 2 * hidden_size
            layers.append((
                GRUCellParams.create(rng, in_size, hidden_size,
                                     f"{prefix}.l{layer}.fwd", dtype),
                GRUCellParams.create(rng, in_size, hidden_size,
                                     f"{prefix}.l{layer}.bwd", dtype),
            ))
        return cls(layers)

    def parameters(self) -> list[Parameter]:
        return [p for fwd, bwd in self.layers
                for cell in (fwd, bwd) for p in cell.parameters()]


def _zero_state(batch: int, hidden: int, dtype) -> Tensor:
    return Tensor(np.zeros((batch, hidden), dtype=dtype))


def _run_direction(xs: list[Tensor], cell: GRUCellParams,
                   step_masks: list[np.ndarray] | None,
                   reverse: bool) -> tuple[list[Tensor], Tensor]:
    """Run one direction with carry masking: at padded steps the state
    passes through unchanged, so the final state is the state at each
    sequence's true end."""
    batch = xs[0].data.shape[0]
    hidden = cell.w_update.data.shape[1]
    h = _zero_state(batch, hidden, cell.w_update.data.dtype)
    order = range(len(xs) - 1, -1, -1) if reverse else range(len(xs))
    states: list[Tensor] = [None] * len(xs)
    for t in order:
        h_new = gru_cell(xs[t], h, cell)
        if step_masks is not None:
            m = step_masks[t]
            h = mul(h_new, m) + mul(h, 1.0 - m)
        else:
            h = h_new
        states[t] = h
    return states, h


def bidirectional_encode(ids: np.ndarray, embedding: Parameter,
                         params: EncoderParams, mask: np.ndarray | None = None,
                         dropout_p: float = 0.0,
                         rng: np.random.Generator | None = None,
                         training: bool = False) -> tuple[Tensor, Tensor]:
    """Encode a batch of id sequences with stacked bidirectional cells.

    ids: (B, T) int array; mask: (B, T) 1/0 floats for padded batches.
    Returns (states, final_forward) where states is (T, B, 2*hidden) — the
    forward and backward states concatenated per position — and
    final_forward is the top layer's forward state at each true sequence
    end, used to initialize the decoder.
    """
    ids = np.asarray(ids)
    if ids.ndim == 1:
        ids = ids[None, :]
        if mask is not None:
            mask = np.asarray(mask)[None, :]
    if ids.shape[1] == 0:
        raise ValueError("cannot encode an empty sequence")
    seq_len = ids.shape[1]
    dtype = embedding.data.dtype
    step_masks = None
    if mask is not None:
        mask = np.asarray(mask, dtype=dtype)
        step_masks = [mask[:, t:t + 1] for t in range(seq_len)]
    xs: list[Tensor] = [embed(embedding, ids[:, t]) for t in range(seq_len)]
    final_fwd = None
    for layer, (fwd_cell, bwd_cell) in enumerate(params.layers):
        if layer > 0 and training and dropout_p > 0.0:
            xs = [dropout(x, dropout_p, rng, training) for x in xs]
        fwd_states, final_fwd = _run_direction(xs, fwd_cell, step_masks,
                                               reverse=False)
        bwd_states, _ = _run_direction(xs, bwd_cell, step_masks, reverse=True)
        xs = [concat([f, b], axis=-1) for f, b in zip(fwd_states, bwd_states)]
    return stack0(xs), final_fwd


MASK_OFF = -1e9


def attention(s_prev, states, weight, mask: np.ndarray | None = None):
    """General bilinear attention: score(s, h) = sᵀ W h.

    Batched form: s_prev (B, d), states (T, B, e) -> (alpha (B, T),
    context (B, e)) with alpha ≥ 0 summing to 1 over real positions. A 1-D
    query with (T, e) states is treated as a single example and returns
    (alpha (T,), context (e,)).
    """
    if not isinstance(s_prev, Tensor):
        s_prev = Tensor(np.asarray(s_prev))
    if not isinstance(states, Tensor):
        states = Tensor(np.asarray(states))
    if s_prev.data.ndim == 1:
        seq_len, enc_dim = states.data.shape
        alpha, context = attention(
            reshape(s_prev, (1, -1)),
            reshape(states, (seq_len, 1, enc_dim)), weight,
            None if mask is None else np.asarray(mask)[None, :])
        return reshape(alpha, (seq_len,)), reshape(context, (enc_dim,))
    u = matmul(s_prev, weight)
    scores = attn_scores(u, states)
    if mask is not None:
        scores = scores + (np.asarray(mask, dtype=scores.data.dtype) - 1.0) * (-MASK_OFF)
    alpha = softmax(scores, axis=-1)
    context = attn_context(alpha, states)
    return alpha, context


@dataclass
class OutputProjection:
    """Affine bridge to embedding space followed by the tied (transposed)
    embedding table and a vocabulary bias."""

    bridge_w: Parameter
    bridge_b: Parameter
    embedding: Parameter  # shared with the model's input embedding
    bias: Parameter

    @classmethod
    def create(cls, rng, hidden_size, embedding: Parameter, prefix="out",
               dtype=np.float32) -> "OutputProjection":
        emb_dim, vocab_size = embedding.data.shape[1], embedding.data.shape[0]
        return cls(
            bridge_w=init_param(rng, (hidden_size, emb_dim),
                                f"{prefix}.bridge_w", dtype),
            bridge_b=init_param(rng, (emb_dim,), f"{prefix}.bridge_b", dtype),
            embedding=embedding,
            bias=init_param(rng, (vocab_size,), f"{prefix}.bias", dtype),
        )

    def parameters(self) -> list[Parameter]:
        # the embedding is owned (and listed) by the model itself
        return [self.bridge_w, self.bridge_b, self.bias]


def project_logits(state: Tensor, proj: OutputProjection) -> Tensor:
    hidden = matmul(state, proj.bridge_w) + proj.bridge_b
    return matmul(hidden, transpose2(proj.embedding)) + proj.bias


def decoder_step(s_prev: Tensor, y_prev_emb: Tensor, context: Tensor,
                 cell: GRUCellParams,
                 proj: OutputProjection) -> tuple[Tensor, Tensor]:
    """Single-layer decoder update: the cell consumes [emb(y_prev); c] and
    the new state is projected to vocabulary logits through the tied
    embedding."""
    x = concat([y_prev_emb, context], axis=-1)
    s_next = gru_cell(x, s_prev, cell)
    return s_next, project_logits(s_next, proj)


def nll_loss(logit_steps: list[Tensor], targets: np.ndarray,
             pad_id: int) -> Tensor:
    """Mean negative log-likelihood per non-pad target token.

    logit_steps: length-L list of (B, V) logits; targets: (B, L) ids.
    """
    targets = np.asarray(targets)
    vocab_size = logit_steps[0].data.shape[-1]
    if targets.min() < 0 or targets.max() >= vocab_size:
        raise IndexError(
            f"target id out of range [0, {vocab_size}): "
            f"[{targets.min()}, {targets.max()}]")
    dtype = logit_steps[0].data.dtype
    total = None
    count = 0
    for t, logits in enumerate(logit_steps):
        step_targets = targets[:, t]
        keep = (step_targets != pad_id).astype(dtype)
        count += int(keep.sum())
        masked = mul(cross_entropy_logits(logits, step_targets), keep)
        step_sum = tsum(masked)
        total = step_sum if total is None else total + step_sum
    if count == 0:
        raise ValueError("no non-pad targets to score")
    return mul(total, 1.0 / count)


def scheduled_sample(gold_id: int, predicted_id: int, p_teacher: float,
                     rng: np.random.Generator) -> int:
    """Gold token with probability p_teacher, else the model prediction."""
    if not 0.0 <= p_teacher <= 1.0:
        raise ValueError(f"p_teacher must be in [0,1], got {p_teacher}")
    return gold_id if rng.random() < p_teacher else predicted_id
