"""Attention-based encoder-decoder over a shared vocabulary with tied
decoder embeddings, plus training and decoding entry points."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..corpus import SPECIALS, Vocabulary, build_vocab
from ..neural.layers import (EncoderParams, GRUCellParams, OutputProjection,
                             attention, bidirectional_encode, dropout,
                             gru_cell, init_param, nll_loss, project_logits,
                             scheduled_sample)
from ..neural.optim import AdamState, TrainingDiverged, adam_step, clip_grad_norm
from ..neural.serialize import load_tensors, save_tensors
from ..neural.tensor import Parameter, Tensor, concat, embed, matmul, tanh


@dataclass
class Hyperparams:
    emb_dim: int = 100
    hidden_size: int = 200
    num_layers: int = 3
    dropout: float = 0.5
    learning_rate: float = 0.01
    batch_size: int = 32
    max_epochs: int = 30
    patience: int = 3
    val_fraction: float = 0.1
    clip_norm: float = 5.0
    teacher_start: float = 1.0
    teacher_end: float = 0.5
    min_frequency: int = 1


def word_defaults() -> Hyperparams:
    return Hyperparams()


def char_defaults() -> Hyperparams:
    """Secondary character model trained on word pairs."""
    return Hyperparams(emb_dim=256, hidden_size=500, num_layers=3,
                       dropout=0.5, learning_rate=0.001, batch_size=500)


def s2schar_defaults() -> Hyperparams:
    """Character model trained on whole tweets."""
    return Hyperparams(emb_dim=256, hidden_size=512, num_layers=3,
                       dropout=0.2, learning_rate=0.001, batch_size=32)


class Seq2SeqModel:
    """All learned tensors of one encoder-decoder, the vocabulary they are
    indexed by, and the hyperparameters they were built with.

    The output projection shares its weight matrix with the embedding
    table; ``granularity`` ("word" or "char") is fixed at construction.
    """

    def __init__(self, vocab: Vocabulary, hp: Hyperparams, seed: int,
                 granularity: str = "word", dtype=np.float32):
        if granularity not in ("word", "char"):
            raise ValueError(f"granularity must be word|char, got {granularity}")
        self.vocab = vocab
        self.hp = hp
        self.seed = seed
        self.granularity = granularity
        self.dtype = np.dtype(dtype)
        self.training = False
        self.history: list[dict] = []
        self.rng = np.random.default_rng(seed)

        h, e = hp.hidden_size, hp.emb_dim
        self.embedding = init_param(self.rng, (len(vocab), e), "embed.E", dtype)
        self.encoder = EncoderParams.create(self.rng, e, h, hp.num_layers,
                                            "enc", dtype)
        self.decoder: list[GRUCellParams] = []
        for layer in range(hp.num_layers):
            in_size = e + 2 * h if layer == 0 else h
            self.decoder.append(GRUCellParams.create(
                self.rng, in_size, h, f"dec.l{layer}", dtype))
        self.attn_w = init_param(self.rng, (h, 2 * h), "attn.W", dtype)
        self.init_w = [init_param(self.rng, (h, h), f"dec.init.l{i}.w", dtype)
                       for i in range(hp.num_layers)]
        self.init_b = [init_param(self.rng, (h,), f"dec.init.l{i}.b", dtype)
                       for i in range(hp.num_layers)]
        self.projection = OutputProjection.create(self.rng, h, self.embedding,
                                                  "out", dtype)

    def parameters(self) -> list[Parameter]:
        params = [self.embedding]
        params += self.encoder.parameters()
        for cell in self.decoder:
            params += cell.parameters()
        params.append(self.attn_w)
        for w, b in zip(self.init_w, self.init_b):
            params += [w, b]
        params += self.projection.parameters()
        return params

    def train(self, flag: bool = True) -> None:
        self.training = flag

    def eval(self) -> None:
        self.training = False

    # --- forward pieces ---

    def encode(self, ids: np.ndarray, mask: np.ndarray | None = None):
        return bidirectional_encode(ids, self.embedding, self.encoder,
                                    mask=mask, dropout_p=self.hp.dropout,
                                    rng=self.rng, training=self.training)

    def init_decoder_states(self, final_forward: Tensor) -> list[Tensor]:
        return [tanh(matmul(final_forward, w) + b)
                for w, b in zip(self.init_w, self.init_b)]

    def step(self, states: list[Tensor], y_prev_ids: np.ndarray,
             enc_states: Tensor, src_mask: np.ndarray | None = None):
        """One decode step: attention from the top previous state, then the
        stacked cells, then tied-projection logits.

        Returns (new_states, logits (B, V), alpha (B, T)).
        """
        y_emb = embed(self.embedding, np.asarray(y_prev_ids))
        alpha, context = attention(states[-1], enc_states, self.attn_w,
                                   mask=src_mask)
        x = concat([y_emb, context], axis=-1)
        new_states = []
        for layer, cell in enumerate(self.decoder):
            inp = x if layer == 0 else dropout(
                new_states[-1], self.hp.dropout, self.rng, self.training)
            new_states.append(gru_cell(inp, states[layer], cell))
        logits = project_logits(new_states[-1], self.projection)
        return new_states, logits, alpha


# --- training ---

def encode_pairs(pairs, vocab: Vocabulary) -> list[tuple[list[int], list[int]]]:
    """Turn PreprocessedPairs (or plain (src, tgt) token-list tuples) into
    id sequences."""
    out = []
    for p in pairs:
        src, tgt = (p.input, p.output) if hasattr(p, "input") else p
        out.append((vocab.encode(src), vocab.encode(tgt)))
    return out


def _pad_batch(seqs: list[list[int]], pad_id: int) -> np.ndarray:
    width = max(len(s) for s in seqs)
    out = np.full((len(seqs), width), pad_id, dtype=np.int64)
    for i, s in enumerate(seqs):
        out[i, :len(s)] = s
    return out


def batch_loss(model: Seq2SeqModel, batch, p_teacher: float):
    """Forward one padded batch and return (loss tensor, token counts)."""
    pad = model.vocab.pad_id
    src = _pad_batch([s for s, _ in batch], pad)
    tgt = _pad_batch([t for _, t in batch], pad)
    src_mask = (src != pad).astype(model.dtype)
    enc_states, final_fwd = model.encode(src, mask=src_mask)
    states = model.init_decoder_states(final_fwd)
    dec_in_gold = tgt[:, :-1]
    dec_targets = tgt[:, 1:]
    y_prev = dec_in_gold[:, 0].copy()
    logit_steps = []
    correct = total = 0
    for t in range(dec_targets.shape[1]):
        states, logits, _ = model.step(states, y_prev, enc_states, src_mask)
        logit_steps.append(logits)
        predicted = logits.data.argmax(axis=1)
        keep = dec_targets[:, t] != pad
        correct += int((predicted[keep] == dec_targets[:, t][keep]).sum())
        total += int(keep.sum())
        if t + 1 < dec_targets.shape[1]:
            gold_next = dec_in_gold[:, t + 1]
            if p_teacher >= 1.0:
                y_prev = gold_next
            else:
                use_gold = model.rng.random(len(batch)) < p_teacher
                y_prev = np.where(use_gold, gold_next, predicted)
    loss = nll_loss(logit_steps, dec_targets, pad)
    return loss, correct, total


def train_seq2seq(pairs, hp: Hyperparams, seed: int, granularity: str = "word",
                  vocab: Vocabulary | None = None,
                  log=None, on_epoch=None) -> Seq2SeqModel:
    """Train a model on a corpus view; early-stops on a validation-loss
    plateau and restores the best weights seen.

    ``pairs`` is a list of PreprocessedPairs or (source tokens, target
    tokens) tuples; sequences must already be framed with ⟨s⟩/⟨/s⟩.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("empty corpus")
    if vocab is None:
        view = [(p.input, p.output) if hasattr(p, "input") else p
                for p in pairs]
        vocab = build_vocab(
            [_SeqView(src, tgt) for src, tgt in view], hp.min_frequency)
    model = Seq2SeqModel(vocab, hp, seed, granularity)
    examples = encode_pairs(pairs, vocab)

    n_val = int(round(hp.val_fraction * len(examples)))
    if n_val > 0:
        order = model.rng.permutation(len(examples))
        val = [examples[i] for i in order[:n_val]]
        train = [examples[i] for i in order[n_val:]]
    else:
        val, train = [], examples
    if not train:
        raise ValueError("validation split leaves no training examples")

    params = model.parameters()
    state = AdamState(learning_rate=hp.learning_rate)
    best_val = math.inf
    best_snapshot = None
    stale = 0
    for epoch in range(hp.max_epochs):
        frac = epoch / max(hp.max_epochs - 1, 1)
        p_teacher = hp.teacher_start + (hp.teacher_end - hp.teacher_start) * frac
        model.train(True)
        order = model.rng.permutation(len(train))
        epoch_loss = 0.0
        epoch_tokens = 0
        correct = 0
        for start in range(0, len(train), hp.batch_size):
            batch = [train[i] for i in order[start:start + hp.batch_size]]
            for p in params:
                p.zero_grad()
            loss, batch_correct, batch_total = batch_loss(model, batch,
                                                           p_teacher)
            if not np.isfinite(loss.item()):
                raise TrainingDiverged(f"epoch {epoch}: non-finite loss")
            loss.backward()
            clip_grad_norm(params, hp.clip_norm)
            try:
                adam_step(params, state)
            except TrainingDiverged as exc:
                raise TrainingDiverged(f"epoch {epoch}: {exc}") from exc
            epoch_loss += loss.item() * batch_total
            epoch_tokens += batch_total
            correct += batch_correct
        train_loss = epoch_loss / max(epoch_tokens, 1)
        entry = {"epoch": epoch, "train_loss": train_loss,
                 "token_accuracy": correct / max(epoch_tokens, 1),
                 "p_teacher": p_teacher, "val_loss": None}
        if val:
            model.eval()
            val_loss, _, _ = evaluate_loss(model, val)
            entry["val_loss"] = val_loss
            if val_loss < best_val - 1e-6:
                best_val = val_loss
                best_snapshot = {p.name: p.data.copy() for p in params}
                stale = 0
            else:
                stale += 1
        model.history.append(entry)
        if log is not None:
            log(entry)
        if on_epoch is not None:
            on_epoch(model)
        if val and stale > hp.patience:
            break
    if best_snapshot is not None:
        for p in params:
            p.data[...] = best_snapshot[p.name]
    model.eval()
    return model


class _SeqView:
    """Adapter so build_vocab can count plain (src, tgt) tuples."""

    def __init__(self, src, tgt):
        self.input = src
        self.output = tgt


def evaluate_loss(model: Seq2SeqModel, examples) -> tuple[float, int, int]:
    """Teacher-forced loss and token accuracy over an example list."""
    was_training = model.training
    model.eval()
    total_loss = 0.0
    tokens = 0
    correct = 0
    for start in range(0, len(examples), model.hp.batch_size):
        batch = examples[start:start + model.hp.batch_size]
        loss, batch_correct, batch_total = batch_loss(model, batch, 1.0)
        total_loss += loss.item() * batch_total
        tokens += batch_total
        correct += batch_correct
    model.train(was_training)
    return total_loss / max(tokens, 1), correct, tokens


def teacher_forced_accuracy(model: Seq2SeqModel, pairs) -> float:
    examples = encode_pairs(pairs, model.vocab)
    _, correct, total = evaluate_loss(model, examples)
    return correct / max(total, 1)


# --- decoding ---

@dataclass
class DecodeResult:
    """Decoder output with per-step probabilities and attention weights."""

    tokens: list[str]
    token_ids: list[int]
    step_probs: list[float]
    attention: list[np.ndarray] = field(repr=False, default_factory=list)

    @property
    def confidence(self) -> float:
        return confidence(self.step_probs)


def confidence(step_probs) -> float:
    """Geometric mean of per-step probabilities; 1.0 for an empty decode."""
    if isinstance(step_probs, DecodeResult):
        step_probs = step_probs.step_probs
    probs = np.asarray(list(step_probs), dtype=np.float64)
    if probs.size == 0:
        return 1.0
    return float(np.exp(np.mean(np.log(np.maximum(probs, 1e-300)))))


def _softmax_np(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    ex = np.exp(shifted, dtype=np.float64)
    return ex / ex.sum()


def _detach(states: list[Tensor]) -> list[Tensor]:
    return [Tensor(s.data) for s in states]


def greedy_decode(model: Seq2SeqModel, source_ids: list[int],
                  max_len: int | None = None) -> DecodeResult:
    """Emit the argmax token per step until ⟨/s⟩ or max_len."""
    if max_len is None:
        max_len = 2 * len(source_ids) + 8
    model.eval()
    ids = np.asarray(source_ids, dtype=np.int64)[None, :]
    enc_states, final_fwd = model.encode(ids)
    enc_states = Tensor(enc_states.data)
    states = _detach(model.init_decoder_states(final_fwd))
    y_prev = np.asarray([model.vocab.bos_id])
    result = DecodeResult(tokens=[], token_ids=[], step_probs=[])
    for _ in range(max_len):
        states, logits, alpha = model.step(states, y_prev, enc_states)
        states = _detach(states)
        probs = _softmax_np(logits.data[0])
        token_id = int(probs.argmax())
        if token_id == model.vocab.eos_id:
            break
        result.token_ids.append(token_id)
        result.tokens.append(model.vocab.itos[token_id])
        result.step_probs.append(float(probs[token_id]))
        result.attention.append(alpha.data[0].copy())
        y_prev = np.asarray([token_id])
    return result


def beam_decode(model: Seq2SeqModel, source_ids: list[int], beam_width: int,
                max_len: int | None = None) -> DecodeResult:
    """Length-normalized beam search; equivalent to greedy at width 1."""
    if beam_width <= 1:
        return greedy_decode(model, source_ids, max_len)
    if max_len is None:
        max_len = 2 * len(source_ids) + 8
    if max_len == 0:
        return DecodeResult(tokens=[], token_ids=[], step_probs=[])
    model.eval()
    ids = np.asarray(source_ids, dtype=np.int64)[None, :]
    enc_states, final_fwd = model.encode(ids)
    enc_single = enc_states.data
    states0 = [s.data for s in model.init_decoder_states(final_fwd)]
    eos = model.vocab.eos_id

    beams = [{"states": states0, "ids": [], "probs": [], "alphas": [],
              "logp": 0.0, "prev": model.vocab.bos_id}]
    finished = []
    for _ in range(max_len):
        stacked = [Tensor(np.concatenate([b["states"][layer] for b in beams],
                                         axis=0))
                   for layer in range(len(states0))]
        enc_tiled = Tensor(np.repeat(enc_single, len(beams), axis=1))
        y_prev = np.asarray([b["prev"] for b in beams])
        new_states, logits, alpha = model.step(stacked, y_prev, enc_tiled)
        candidates = []
        for i, beam in enumerate(beams):
            probs = _softmax_np(logits.data[i])
            for token_id in np.argsort(probs)[::-1][:beam_width]:
                candidates.append((beam["logp"] + math.log(max(probs[token_id],
                                                               1e-300)),
                                   i, int(token_id), float(probs[token_id])))
        candidates.sort(key=lambda c: -c[0])
        next_beams = []
        for logp, i, token_id, prob in candidates:
            src = beams[i]
            if token_id == eos:
                finished.append({**src, "logp": logp})
                continue
            next_beams.append({
                "states": [new_states[layer].data[i:i + 1]
                           for layer in range(len(states0))],
                "ids": src["ids"] + [token_id],
                "probs": src["probs"] + [prob],
                "alphas": src["alphas"] + [alpha.data[i].copy()],
                "logp": logp,
                "prev": token_id,
            })
            if len(next_beams) >= beam_width:
                break
        beams = next_beams
        if not beams or len(finished) >= beam_width:
            break
    pool = finished or beams
    best = max(pool, key=lambda b: b["logp"] / max(len(b["ids"]), 1))
    return DecodeResult(tokens=[model.vocab.itos[i] for i in best["ids"]],
                        token_ids=best["ids"], step_probs=best["probs"],
                        attention=best["alphas"])


def decode(model: Seq2SeqModel, source_ids: list[int],
           max_len: int | None = None, beam_width: int = 1) -> DecodeResult:
    if beam_width <= 1:
        return greedy_decode(model, source_ids, max_len)
    return beam_decode(model, source_ids, beam_width, max_len)


# --- persistence ---

def save_model(model: Seq2SeqModel, directory, view: str = "plain") -> None:
    extra = {
        "kind": "seq2seq",
        "granularity": model.granularity,
        "view": view,
        "seed": model.seed,
        "hyperparameters": asdict(model.hp),
        "vocabulary": {"itos": model.vocab.itos,
                       "min_frequency": model.vocab.min_frequency},
    }
    save_tensors(directory, [(p.name, p.data) for p in model.parameters()],
                 extra=extra)


def load_model(directory) -> Seq2SeqModel:
    manifest, arrays = load_tensors(directory)
    if manifest.get("kind") != "seq2seq":
        raise ValueError(f"{directory}: not a seq2seq model directory "
                         f"(kind={manifest.get('kind')!r})")
    voc = manifest["vocabulary"]
    itos = voc["itos"]
    if tuple(itos[:len(SPECIALS)]) != SPECIALS:
        raise ValueError("vocabulary in manifest lacks the reserved specials")
    vocab = Vocabulary(itos[len(SPECIALS):],
                       min_frequency=voc.get("min_frequency", 1))
    hp = Hyperparams(**manifest["hyperparameters"])
    model = Seq2SeqModel(vocab, hp, seed=manifest.get("seed", 0),
                         granularity=manifest["granularity"])
    for p in model.parameters():
        if p.name not in arrays:
            raise ValueError(f"{directory}: missing tensor {p.name}")
        if tuple(arrays[p.name].shape) != p.data.shape:
            raise ValueError(f"{directory}: tensor {p.name} has shape "
                             f"{arrays[p.name].shape}, expected {p.data.shape}")
        p.data[...] = arrays[p.name]
    model.eval()
    return model
