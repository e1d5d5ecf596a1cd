import math

import numpy as np
import pytest

from textnorm.neural.gradcheck import finite_diff_check
from textnorm.neural.tensor import (Parameter, Tensor, add, attn_context,
                                    attn_scores, concat, cross_entropy_logits,
                                    dropout, embed, matmul, mul, reshape,
                                    sigmoid, softmax, stack0, tanh,
                                    transpose2, tsum)

rng = np.random.default_rng(12)


def make_param(shape, name):
    return Parameter(rng.normal(size=shape), name=name)


def check(loss_fn, params, tol=1e-4):
    err = finite_diff_check(loss_fn, params, max_coords_per_param=12)
    assert err < tol, f"max relative grad error {err}"


class TestOpGradients:
    def test_matmul(self):
        a, b = make_param((3, 4), "a"), make_param((4, 5), "b")
        check(lambda: tsum(mul(matmul(a, b), matmul(a, b))), [a, b])

    def test_add_broadcast_bias(self):
        x, b = make_param((4, 3), "x"), make_param((3,), "b")
        check(lambda: tsum(mul(add(x, b), add(x, b))), [x, b])

    def test_mul_broadcast_column(self):
        x, m = make_param((4, 3), "x"), make_param((4, 1), "m")
        check(lambda: tsum(mul(mul(x, m), mul(x, m))), [x, m])

    def test_sub_and_scalars(self):
        x = make_param((3, 3), "x")
        check(lambda: tsum(mul(1.0 - x, (x - 0.5) * 2.0)), [x])

    def test_sigmoid_tanh(self):
        x = make_param((5,), "x")
        check(lambda: tsum(mul(sigmoid(x), tanh(x))), [x])

    def test_concat(self):
        a, b = make_param((2, 3), "a"), make_param((2, 2), "b")
        check(lambda: tsum(mul(concat([a, b], axis=1),
                               concat([a, b], axis=1))), [a, b])

    def test_stack0(self):
        xs = [make_param((2, 3), f"x{i}") for i in range(4)]
        check(lambda: tsum(mul(stack0(xs), stack0(xs))), xs)

    def test_embed_scatter(self):
        table = make_param((6, 4), "E")
        ids = np.array([0, 2, 2, 5])
        check(lambda: tsum(mul(embed(table, ids), embed(table, ids))),
              [table])

    def test_softmax(self):
        x = make_param((3, 5), "x")
        w = Tensor(rng.normal(size=(3, 5)))
        check(lambda: tsum(mul(softmax(x, axis=-1), w)), [x])

    def test_cross_entropy(self):
        logits = make_param((4, 6), "logits")
        targets = np.array([1, 0, 5, 3])
        check(lambda: tsum(cross_entropy_logits(logits, targets)), [logits],
              tol=1e-6)

    def test_attention_ops(self):
        u = make_param((2, 4), "u")
        states = make_param((5, 2, 4), "H")
        check(lambda: tsum(mul(attn_scores(u, states),
                               attn_scores(u, states))), [u, states])
        alpha = make_param((2, 5), "alpha")
        check(lambda: tsum(mul(attn_context(alpha, states),
                               attn_context(alpha, states))),
              [alpha, states])

    def test_reshape_transpose(self):
        x = make_param((3, 4), "x")
        check(lambda: tsum(mul(reshape(x, (2, 6)), reshape(x, (2, 6)))), [x])
        check(lambda: tsum(mul(transpose2(x), transpose2(x))), [x])

    def test_shared_subexpression_diamond(self):
        # y = f(x); loss = y*y + y; gradient must accumulate once per use
        x = make_param((3,), "x")

        def loss_fn():
            y = tanh(x)
            return tsum(add(mul(y, y), y))

        check(loss_fn, [x])

    def test_softmax_nll_layer(self):
        # the fused classifier layer alone, checked to a tighter tolerance
        logits = make_param((5, 11), "logits")
        targets = np.array([0, 3, 10, 7, 7])
        err = finite_diff_check(
            lambda: mul(tsum(cross_entropy_logits(logits, targets)), 0.2),
            [logits], max_coords_per_param=25)
        assert err < 1e-6

    def test_quadratic_probe(self):
        x = Parameter(np.array([3.0]), "x")
        x.zero_grad()
        loss = mul(mul(x, x), 1.0)
        loss.backward()
        analytic = float(x.grad[0])
        eps = 1e-5
        numeric = (((3 + eps) ** 2) - ((3 - eps) ** 2)) / (2 * eps)
        assert abs(analytic - 6.0) < 1e-12
        assert abs(numeric - analytic) < 1e-8


class TestBackwardMechanics:
    def test_requires_grad_propagates(self):
        a = Parameter(np.ones((2, 2)), "a")
        b = Tensor(np.ones((2, 2)))
        out = matmul(a, b)
        assert out.requires_grad
        assert not matmul(b, b).requires_grad

    def test_backward_needs_scalar(self):
        a = Parameter(np.ones((2, 2)), "a")
        with pytest.raises(ValueError):
            matmul(a, a).backward()

    def test_constant_operands(self):
        a = Parameter(np.full((2,), 2.0), "a")
        a.zero_grad()
        tsum(mul(a, np.array([3.0, 4.0]))).backward()
        assert np.allclose(a.grad, [3.0, 4.0])

    def test_float32_preserved(self):
        a = Parameter(np.ones((2, 2), dtype=np.float32), "a")
        out = tanh(add(mul(a, 0.5), 1))
        assert out.dtype == np.float32

    def test_gradcheck_rejects_float32(self):
        a = Parameter(np.ones((2,), dtype=np.float32), "a")
        with pytest.raises(ValueError, match="float64"):
            finite_diff_check(lambda: tsum(a), [a])

    def test_dropout_train_vs_eval(self):
        x = Tensor(np.ones((100, 100)))
        gen = np.random.default_rng(0)
        kept = dropout(x, 0.5, gen, training=True)
        assert not np.allclose(kept.data, x.data)
        assert abs(kept.data.mean() - 1.0) < 0.05  # inverted scaling
        assert dropout(x, 0.5, gen, training=False) is x
