import math

import numpy as np
import pytest

from charlm import autodiff as ad
from charlm.autodiff import Tensor
from charlm.errors import NumericError


def rand(shape, seed):
    return np.random.default_rng(seed).normal(size=shape)


def check_grad(build, x_data, rtol=1e-4, eps=1e-5):
    """Analytic gradient vs central finite differences on a scalar function."""
    x = Tensor(x_data, requires_grad=True)
    build(x).backward()
    fd = ad.finite_diff_grad(build, Tensor(x_data), eps=eps)
    denom = np.maximum(np.abs(fd), 1e-6)
    assert np.max(np.abs(x.grad - fd) / denom) < rtol


class TestOps:
    def test_matmul_identity(self):
        a = Tensor([[1.0, 2.0], [3.0, 4.0]])
        out = ad.matmul(a, Tensor(np.eye(2)))
        np.testing.assert_array_equal(out.data, a.data)

    def test_sigmoid_zero(self):
        assert ad.sigmoid(Tensor([0.0])).data[0] == 0.5

    def test_add(self):
        np.testing.assert_array_equal(
            ad.add(Tensor([1.0, 2.0]), Tensor([3.0, 4.0])).data, [4.0, 6.0]
        )

    def test_bias_broadcast(self):
        out = ad.add(Tensor(np.zeros((2, 3))), Tensor([1.0, 2.0, 3.0]))
        np.testing.assert_array_equal(out.data, [[1, 2, 3], [1, 2, 3]])

    def test_shape_mismatch_message_names_both_shapes(self):
        with pytest.raises(NumericError, match=r"\(2, 3\).*\(4, 2\)"):
            ad.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 2))))
        with pytest.raises(NumericError, match=r"\(2,\).*\(3,\)"):
            ad.add(Tensor(np.zeros(2)), Tensor(np.zeros(3)))

    def test_concat_rows_and_slice_cols(self):
        a, b = Tensor(np.ones((2, 3))), Tensor(np.zeros((1, 3)))
        out = ad.concat_rows(a, b)
        assert out.data.shape == (3, 3)
        sl = ad.slice_cols(Tensor(np.arange(6.0).reshape(2, 3)), 1, 3)
        np.testing.assert_array_equal(sl.data, [[1, 2], [4, 5]])

    def test_nan_rejected(self):
        with pytest.raises(NumericError):
            Tensor([np.nan])
        with pytest.raises(NumericError):
            Tensor([np.inf])


class TestGradients:
    @pytest.mark.parametrize(
        "name,build",
        [
            ("sigmoid", lambda x: ad.sum_all(ad.sigmoid(x))),
            ("tanh", lambda x: ad.sum_all(ad.tanh(x))),
            ("transpose", lambda x: ad.sum_all(ad.mul(ad.transpose(x), ad.transpose(x)))),
            ("scale", lambda x: ad.sum_all(ad.scale(x, 2.5))),
            ("slice", lambda x: ad.sum_all(ad.mul(ad.slice_cols(x, 1, 3), ad.slice_cols(x, 0, 2)))),
        ],
    )
    def test_unary_chains(self, name, build):
        check_grad(build, rand((4, 5), seed=hash(name) % 2**32))

    def test_matmul_grad(self):
        b_const = Tensor(rand((5, 3), seed=10))

        def build(x):
            return ad.sum_all(ad.tanh(ad.matmul(x, b_const)))

        check_grad(build, rand((4, 5), seed=11))

    def test_bias_grad(self):
        a_const = Tensor(rand((4, 3), seed=12))

        def build(b):
            return ad.sum_all(ad.sigmoid(ad.add(a_const, b)))

        check_grad(build, rand((3,), seed=13))

    def test_concat_grad(self):
        other = Tensor(rand((2, 3), seed=14))

        def build(x):
            return ad.sum_all(ad.mul(ad.concat_rows(x, other), ad.concat_rows(x, other)))

        check_grad(build, rand((3, 3), seed=15))

    def test_sum_gives_ones(self):
        x = Tensor(rand((3, 4), seed=16), requires_grad=True)
        ad.sum_all(x).backward()
        np.testing.assert_array_equal(x.grad, np.ones((3, 4)))

    def test_square_gives_2x(self):
        data = rand((3, 4), seed=17)
        x = Tensor(data, requires_grad=True)
        ad.sum_all(ad.mul(x, x)).backward()
        np.testing.assert_allclose(x.grad, 2 * data, rtol=1e-12)

    def test_two_consumers_accumulate(self):
        data = rand((3,), seed=18)
        x = Tensor(data, requires_grad=True)
        # x feeds both sides: d/dx [sum(x*x) + sum(2x)] = 2x + 2
        loss = ad.add(ad.sum_all(ad.mul(x, x)), ad.sum_all(ad.scale(x, 2.0)))
        loss.backward()
        np.testing.assert_allclose(x.grad, 2 * data + 2.0, rtol=1e-12)

    def test_backward_requires_scalar(self):
        x = Tensor(rand((2, 2), seed=19), requires_grad=True)
        with pytest.raises(NumericError, match="scalar"):
            ad.mul(x, x).backward()


class TestSoftmaxCrossEntropy:
    def test_uniform_logits(self):
        logits = Tensor(np.zeros((3, 4)))
        loss = ad.softmax_cross_entropy(logits, [0, 1, 3])
        assert math.isclose(loss.item(), math.log(4), rel_tol=1e-12)

    def test_saturated_correct_class(self):
        logits = np.zeros((1, 4))
        logits[0, 2] = 1e3
        loss = ad.softmax_cross_entropy(Tensor(logits), [2])
        assert loss.item() < 1e-12

    def test_hand_case(self):
        # logits [0, ln 3], target 1: softmax = [1/4, 3/4], loss = -ln(3/4)
        loss = ad.softmax_cross_entropy(Tensor([[0.0, math.log(3.0)]]), [1])
        assert math.isclose(loss.item(), -math.log(0.75), rel_tol=1e-12)

    def test_shift_invariance(self):
        rng = np.random.default_rng(20)
        logits = rng.normal(size=(4, 6))
        targets = [0, 5, 2, 3]
        l1 = ad.softmax_cross_entropy(Tensor(logits), targets).item()
        l2 = ad.softmax_cross_entropy(Tensor(logits + 123.456), targets).item()
        assert abs(l1 - l2) < 1e-12

    def test_target_out_of_range(self):
        with pytest.raises(NumericError, match="out of range"):
            ad.softmax_cross_entropy(Tensor(np.zeros((1, 3))), [3])

    def test_mask_excludes_rows(self):
        rng = np.random.default_rng(21)
        logits = rng.normal(size=(3, 4))
        full = ad.softmax_cross_entropy(Tensor(logits[:2]), [1, 2]).item()
        masked = ad.softmax_cross_entropy(
            Tensor(logits), [1, 2, 0], mask=np.array([1.0, 1.0, 0.0])
        ).item()
        assert math.isclose(full, masked, rel_tol=1e-12)

    def test_gradient(self):
        targets = [1, 0, 3]

        def build(x):
            return ad.softmax_cross_entropy(x, targets)

        check_grad(build, rand((3, 4), seed=22))

    def test_sum_reduction_gradient(self):
        targets = [2, 2]
        mask = np.array([1.0, 0.0])

        def build(x):
            return ad.softmax_cross_entropy(x, targets, mask=mask, reduction="sum")

        check_grad(build, rand((2, 5), seed=23))


class TestFiniteDiff:
    def test_sum_is_ones(self):
        fd = ad.finite_diff_grad(ad.sum_all, Tensor(rand((2, 3), seed=24)))
        np.testing.assert_allclose(fd, np.ones((2, 3)), atol=1e-9)

    def test_square_at_three(self):
        fd = ad.finite_diff_grad(lambda t: ad.sum_all(ad.mul(t, t)), Tensor([3.0]))
        assert abs(fd[0] - 6.0) < 1e-8
