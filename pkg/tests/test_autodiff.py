import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from facenas.autodiff import (
    NonFiniteError,
    Tape,
    Tensor,
    add,
    conv2d,
    load_checkpoint,
    maxpool2,
    save_checkpoint,
    softmax_t,
    sum_all,
    upsample2x,
    weighted_sum,
)
from facenas.autodiff.checkpoint import CheckpointError
from facenas.autodiff.gradcheck import check_gradients
from facenas.autodiff.ops import count_flops, same_padding
from oracles import naive_conv2d, naive_maxpool2, naive_upsample2x

TOL = 1e-4


def t64(rng, *shape):
    return Tensor(rng.standard_normal(shape), requires_grad=True)


def random_readout(rng, shape):
    """Fixed random weights so the scalar loss has a non-trivial gradient everywhere."""
    return rng.standard_normal(shape)


class TestConv2d:
    def test_identity_1x1(self, rng):
        x = Tensor(rng.standard_normal((2, 1, 5, 7)))
        w = Tensor(np.ones((1, 1, 1, 1)))
        np.testing.assert_array_equal(conv2d(x, w).data, x.data)

    def test_same_padding_shape(self, rng):
        out = conv2d(Tensor(rng.standard_normal((1, 8, 16, 16))), Tensor(rng.standard_normal((8, 8, 3, 3))))
        assert out.shape == (1, 8, 16, 16)

    @pytest.mark.parametrize("h,w,stride", [(16, 16, 2), (15, 9, 2), (7, 7, 3), (5, 4, 1)])
    def test_strided_shape(self, rng, h, w, stride):
        out = conv2d(Tensor(rng.standard_normal((1, 2, h, w))), Tensor(rng.standard_normal((3, 2, 3, 3))), stride=stride)
        assert out.shape == (1, 3, math.ceil(h / stride), math.ceil(w / stride))

    def test_odd_padding_goes_bottom_right(self):
        assert same_padding(4, 2, 1, 1) == (4, 0, 1)
        assert same_padding(16, 3, 2, 1) == (8, 0, 1)

    @pytest.mark.parametrize("kh,kw,stride,dilation", [(3, 3, 1, 1), (3, 3, 1, 2), (1, 5, 1, 1), (5, 1, 1, 1),
                                                      (3, 3, 2, 1), (3, 3, 1, 3), (1, 1, 1, 1), (2, 2, 1, 1)])
    def test_matches_loop_oracle(self, rng, kh, kw, stride, dilation):
        x = rng.standard_normal((2, 3, 7, 6))
        w = rng.standard_normal((4, 3, kh, kw))
        b = rng.standard_normal(4)
        got = conv2d(Tensor(x), Tensor(w), Tensor(b), stride=stride, dilation=dilation).data
        np.testing.assert_allclose(got, naive_conv2d(x, w, b, stride, dilation), rtol=1e-10, atol=1e-10)

    def test_dilated_gradient_of_sum(self, rng):
        x, w = t64(rng, 1, 2, 5, 5), t64(rng, 2, 2, 3, 3)
        assert check_gradients(lambda: sum_all(conv2d(x, w, dilation=2)), [x, w]) < TOL

    @pytest.mark.parametrize("seed", range(10))
    def test_gradient_random_instances(self, seed):
        rng = np.random.default_rng(seed)
        kh, kw = rng.integers(1, 4, size=2)
        stride, dilation = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        x, w, b = t64(rng, 1, 2, 5, 6), t64(rng, 3, 2, kh, kw), t64(rng, 3)
        r = None

        def f():
            nonlocal r
            y = conv2d(x, w, b, stride=stride, dilation=dilation)
            if r is None:
                r = random_readout(rng, y.shape)
            return weighted_sum(y, r)

        assert check_gradients(f, [x, w, b]) < TOL

    def test_channel_mismatch(self, rng):
        with pytest.raises(ValueError, match="channel"):
            conv2d(Tensor(rng.standard_normal((1, 3, 4, 4))), Tensor(rng.standard_normal((2, 2, 3, 3))))

    def test_zero_spatial(self):
        with pytest.raises(ValueError, match="zero-sized"):
            conv2d(Tensor(np.zeros((1, 2, 0, 4))), Tensor(np.zeros((2, 2, 3, 3))))

    @given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_linearity(self, a, b, seed):
        rng = np.random.default_rng(seed)
        x, y = rng.standard_normal((1, 2, 5, 5)), rng.standard_normal((1, 2, 5, 5))
        k = Tensor(rng.standard_normal((3, 2, 3, 3)))
        lhs = conv2d(Tensor(a * x + b * y), k).data
        rhs = a * conv2d(Tensor(x), k).data + b * conv2d(Tensor(y), k).data
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    def test_flop_count_closed_form(self, rng):
        with count_flops() as c:
            conv2d(Tensor(rng.standard_normal((1, 4, 8, 8))), Tensor(rng.standard_normal((6, 4, 3, 3))))
        assert c.total == 2 * 9 * 4 * 6 * 8 * 8


class TestUpsample:
    def test_constant(self):
        out = upsample2x(Tensor(np.full((1, 2, 3, 4), 3.0)))
        assert out.shape == (1, 2, 6, 8)
        np.testing.assert_array_equal(out.data, 3.0)

    def test_row_midpoint(self):
        out = upsample2x(Tensor(np.array([[[[0.0, 1.0]]]])))
        np.testing.assert_allclose(out.data[0, 0, 0], [0.0, 0.25, 0.75, 1.0])
        # the sample halfway along the row (between output pixels 1 and 2) is 0.5
        assert out.data[0, 0, 0, 1:3].mean() == pytest.approx(0.5)

    def test_matches_formula(self, rng):
        x = rng.standard_normal((2, 3, 4, 5))
        np.testing.assert_allclose(upsample2x(Tensor(x)).data, naive_upsample2x(x), atol=1e-12)

    def test_convex_combination_bounds(self, rng):
        x = rng.standard_normal((1, 1, 5, 5))
        out = upsample2x(Tensor(x)).data
        assert out.min() >= x.min() - 1e-12 and out.max() <= x.max() + 1e-12

    @pytest.mark.parametrize("seed", range(10))
    def test_gradient(self, seed):
        rng = np.random.default_rng(seed)
        x = t64(rng, 1, 2, int(rng.integers(1, 5)), int(rng.integers(1, 5)))
        r = random_readout(rng, (1, 2, 2 * x.shape[2], 2 * x.shape[3]))
        assert check_gradients(lambda: weighted_sum(upsample2x(x), r), [x]) < TOL


class TestMaxpool:
    def test_constant(self):
        out = maxpool2(Tensor(np.full((1, 1, 4, 6), 2.0)))
        assert out.shape == (1, 1, 2, 3)
        np.testing.assert_array_equal(out.data, 2.0)

    def test_window_max_and_gradient(self):
        x = Tensor(np.array([[[[1.0, 2.0], [3.0, 4.0]]]]), requires_grad=True)
        with Tape() as tape:
            y = maxpool2(x)
            (g,) = tape.gradient(sum_all(y), [x])
        assert y.data.item() == 4.0
        np.testing.assert_array_equal(g, [[[[0, 0], [0, 1]]]])

    def test_tie_goes_to_first(self):
        x = Tensor(np.ones((1, 1, 2, 2)), requires_grad=True)
        with Tape() as tape:
            (g,) = tape.gradient(sum_all(maxpool2(x)), [x])
        np.testing.assert_array_equal(g, [[[[1, 0], [0, 0]]]])

    def test_odd_floor(self, rng):
        x = rng.standard_normal((1, 2, 5, 7))
        out = maxpool2(Tensor(x))
        assert out.shape == (1, 2, 2, 3)
        np.testing.assert_array_equal(out.data, naive_maxpool2(x))

    def test_too_small(self):
        with pytest.raises(ValueError):
            maxpool2(Tensor(np.zeros((1, 1, 1, 4))))

    @pytest.mark.parametrize("seed", range(10))
    def test_gradient(self, seed):
        rng = np.random.default_rng(seed)
        x = t64(rng, 1, 2, 4, 6)  # continuous values: no ties
        r = random_readout(rng, (1, 2, 2, 3))
        assert check_gradients(lambda: weighted_sum(maxpool2(x), r), [x]) < TOL


class TestSoftmax:
    @given(c=st.floats(-50, 50), tau=st.floats(0.01, 10))
    def test_uniform(self, c, tau):
        np.testing.assert_allclose(softmax_t(Tensor(np.full(3, c)), tau).data, [1 / 3] * 3, atol=1e-12)

    def test_closed_form(self):
        e = math.e
        np.testing.assert_allclose(softmax_t(Tensor(np.array([2.0, 1.0])), 1.0).data, [e / (e + 1), 1 / (e + 1)],
                                   rtol=1e-12)

    def test_low_temperature(self):
        assert softmax_t(Tensor(np.array([2.0, 1.0])), 0.05).data[0] > 0.999

    @given(logits=st.lists(st.floats(-30, 30), min_size=1, max_size=8), shift=st.floats(-100, 100),
           tau=st.floats(0.1, 20))
    def test_simplex_and_shift_invariance(self, logits, shift, tau):
        # logit spread / tau stays below 600 so every probability is representable in float64
        p = softmax_t(Tensor(np.array(logits)), tau).data
        assert np.all(p > 0) and abs(p.sum() - 1) < 1e-12
        np.testing.assert_allclose(softmax_t(Tensor(np.array(logits) + shift), tau).data, p, atol=1e-9)

    @pytest.mark.parametrize("tau", [0.0, -1.0])
    def test_bad_temperature(self, tau):
        with pytest.raises(ValueError):
            softmax_t(Tensor(np.ones(3)), tau)

    @pytest.mark.parametrize("seed", range(10))
    def test_gradient(self, seed):
        rng = np.random.default_rng(seed)
        z = t64(rng, 5)
        r = random_readout(rng, (5,))
        tau = float(rng.uniform(0.2, 3))
        assert check_gradients(lambda: weighted_sum(softmax_t(z, tau), r), [z]) < TOL


class TestBackward:
    def test_sum_gives_ones(self, rng):
        x = t64(rng, 2, 3, 4, 4)
        with Tape() as tape:
            (g,) = tape.gradient(sum_all(x), [x])
        np.testing.assert_array_equal(g, 1.0)

    def test_unused_parameter_zero(self, rng):
        x, unused = t64(rng, 1, 1, 2, 2), t64(rng, 3)
        with Tape() as tape:
            gx, gu = tape.gradient(sum_all(x), [x, unused])
        np.testing.assert_array_equal(gu, 0.0)
        assert gu.shape == (3,)

    def test_composite_graph(self, rng):
        x, w = t64(rng, 1, 2, 6, 6), t64(rng, 3, 2, 3, 3)
        r = random_readout(rng, (1, 3, 6, 6))
        assert check_gradients(lambda: weighted_sum(maxpool2(upsample2x(conv2d(x, w))), r), [x, w]) < TOL

    def test_shared_input_accumulates(self, rng):
        x = t64(rng, 4)
        with Tape() as tape:
            (g,) = tape.gradient(sum_all(add(x, x)), [x])
        np.testing.assert_array_equal(g, 2.0)

    def test_non_scalar_loss(self, rng):
        x = t64(rng, 3)
        with Tape() as tape:
            y = add(x, x)
            with pytest.raises(ValueError, match="scalar"):
                tape.gradient(y, [x])

    def test_nan_detected(self):
        x = Tensor(np.array([1.0, np.nan]), requires_grad=True)
        with Tape() as tape:
            with pytest.raises(NonFiniteError):
                tape.gradient(sum_all(x), [x])

    def test_tape_order_is_topological(self, rng):
        x, w = t64(rng, 1, 2, 4, 4), t64(rng, 2, 2, 3, 3)
        with Tape() as tape:
            conv2d(upsample2x(x), w)
            seen = {id(x), id(w)}
            for node in tape.nodes:
                assert all(id(t) in seen for t in node.inputs)
                seen.add(id(node.out))

    def test_no_tape_no_recording(self, rng):
        x = t64(rng, 3)
        assert not sum_all(x).requires_grad

    def test_forward_deterministic(self, rng):
        x, w = rng.standard_normal((2, 3, 8, 8)).astype(np.float32), rng.standard_normal((4, 3, 3, 3)).astype(np.float32)
        a = maxpool2(upsample2x(conv2d(Tensor(x), Tensor(w)))).data
        b = maxpool2(upsample2x(conv2d(Tensor(x), Tensor(w)))).data
        assert a.tobytes() == b.tobytes()


class TestCheckpoint:
    def test_round_trip(self, tmp_path, rng):
        params = {"a.w": Tensor(rng.standard_normal((2, 3, 1, 1)).astype(np.float32)),
                  "b": Tensor(rng.standard_normal(4))}
        save_checkpoint(tmp_path / "w.ckpt", params)
        back = load_checkpoint(tmp_path / "w.ckpt")
        assert set(back) == set(params)
        for k in params:
            assert back[k].dtype == params[k].data.dtype
            np.testing.assert_array_equal(back[k], params[k].data)

    def test_rejects_garbage(self, tmp_path):
        (tmp_path / "bad").write_bytes(b"nonsense")
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "bad")
