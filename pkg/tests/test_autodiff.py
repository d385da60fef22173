import numpy as np
import numpy.testing as npt
import pytest

from reidnet.autodiff import (RunningStats, ShapeError, Tape, Tensor, backward, batchnorm,
                              concat, conv2d, global_avg_pool, grad_check, linear, mul,
                              pairwise_distances, param, relu, sigmoid, split_channels,
                              sub_from_one, take, tensor_sum)
from reidnet.rng import Rng

from _oracles import broadcast_mul_oracle, conv2d_oracle, linear_oracle


class TestConv2d:
    def test_scalar_product(self):
        out = conv2d(Tensor([[[2.0]]]), Tensor([[[[3.0]]]]))
        npt.assert_array_equal(out.data, [[[6.0]]])

    def test_ones_3x3_padded(self):
        # hand-unrolled receptive-field sums: center sees 9 ones, corners 4
        x = Tensor(np.ones((1, 3, 3)))
        w = Tensor(np.ones((1, 1, 3, 3)))
        out = conv2d(x, w, pad=(1, 1)).data[0]
        assert out[1, 1] == 9.0
        assert out[0, 0] == out[0, 2] == out[2, 0] == out[2, 2] == 4.0

    def test_edge_filter_row(self):
        # brute-force sliding window over [1..5] with kernel [1,0,-1], width pad 1
        x = Tensor(np.array([[[1.0, 2.0, 3.0, 4.0, 5.0]]]))
        w = Tensor(np.array([[[[1.0, 0.0, -1.0]]]]))
        out = conv2d(x, w, pad=(0, 1)).data
        npt.assert_array_equal(out, [[[-2.0, -2.0, -2.0, -2.0, 4.0]]])

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_bruteforce(self, seed):
        rng = Rng(seed)
        shapes = [((2, 5, 6), (3, 2, 3, 3), (1, 1), (1, 1)),
                  ((3, 6, 4), (2, 3, 1, 3), (0, 1), (1, 1)),
                  ((2, 7, 7), (4, 2, 3, 3), (1, 1), (2, 2)),
                  ((1, 5, 5), (1, 1, 5, 1), (2, 0), (1, 1))]
        xs, ws, pad, stride = shapes[seed % len(shapes)]
        x = rng.normal(size=xs)
        w = rng.normal(size=ws)
        b = rng.normal(size=(ws[0],))
        out = conv2d(Tensor(x), Tensor(w), Tensor(b), pad=pad, stride=stride)
        npt.assert_allclose(out.data, conv2d_oracle(x, w, b, pad, stride), atol=1e-12)

    def test_batched_matches_per_image(self):
        rng = Rng(12)
        x = rng.normal(size=(3, 2, 4, 4))
        w = rng.normal(size=(3, 2, 3, 3))
        batched = conv2d(Tensor(x), Tensor(w), pad=(1, 1)).data
        for i in range(3):
            single = conv2d(Tensor(x[i]), Tensor(w), pad=(1, 1)).data
            npt.assert_array_equal(batched[i], single)

    def test_channel_mismatch_names_dimension(self):
        with pytest.raises(ShapeError, match="channels"):
            conv2d(Tensor(np.ones((2, 3, 3))), Tensor(np.ones((1, 3, 1, 1))))

    def test_zero_extent_rejected(self):
        with pytest.raises(ShapeError, match="zero-extent"):
            conv2d(Tensor(np.ones((2, 0, 3))), Tensor(np.ones((1, 2, 1, 1))))

    def test_oversized_kernel_rejected(self):
        with pytest.raises(ShapeError, match="kernel height"):
            conv2d(Tensor(np.ones((1, 2, 5))), Tensor(np.ones((1, 1, 4, 1))))


class TestLinear:
    def test_identity(self):
        x = np.arange(6.0).reshape(2, 3)
        out = linear(Tensor(x), Tensor(np.eye(3)), Tensor(np.zeros(3)))
        npt.assert_array_equal(out.data, x)

    def test_sum_row(self):
        out = linear(Tensor([[1.0, 1.0]]), Tensor([[1.0, 1.0]]), Tensor([0.0]))
        npt.assert_array_equal(out.data, [[2.0]])

    def test_matches_triple_loop(self):
        rng = Rng(4)
        x = rng.normal(size=(2, 3))
        w = rng.normal(size=(4, 3))
        b = rng.normal(size=(4,))
        npt.assert_allclose(linear(Tensor(x), Tensor(w), Tensor(b)).data,
                            linear_oracle(x, w, b), atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError, match="fan-in"):
            linear(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 5))))


class TestBatchnorm:
    def test_normalized_input_is_fixed_point(self):
        rng = Rng(5)
        x = rng.normal(size=(16, 4))
        x = (x - x.mean(axis=0)) / x.std(axis=0)
        run = RunningStats.create(4)
        out = batchnorm(Tensor(x), Tensor(np.ones(4)), Tensor(np.zeros(4)), "train", run)
        npt.assert_allclose(out.data, x, atol=1e-4)  # eps-bounded shrink only

    def test_gamma_zero_collapses_to_beta(self):
        rng = Rng(6)
        x = rng.normal(size=(8, 3))
        beta = np.array([1.5, -2.0, 0.25])
        out = batchnorm(Tensor(x), Tensor(np.zeros(3)), Tensor(beta), "train", RunningStats.create(3))
        npt.assert_allclose(out.data, np.broadcast_to(beta, (8, 3)), atol=0)

    def test_statistics_recomputed_independently(self):
        rng = Rng(7)
        x = rng.normal(size=(8, 4), std=3.0, mean=-1.0)
        out = batchnorm(Tensor(x), Tensor(np.ones(4)), Tensor(np.zeros(4)), "train",
                        RunningStats.create(4)).data
        assert np.abs(out.mean(axis=0)).max() < 1e-6
        assert np.abs(out.var(axis=0) - 1.0).max() < 1e-4

    def test_running_stats_ema_and_eval(self):
        rng = Rng(8)
        x = rng.normal(size=(32, 2), std=2.0, mean=1.0)
        run = RunningStats.create(2)
        batchnorm(Tensor(x), Tensor(np.ones(2)), Tensor(np.zeros(2)), "train", run)
        npt.assert_allclose(run.mean, 0.9 * 0.0 + 0.1 * x.mean(axis=0), atol=1e-12)
        npt.assert_allclose(run.var, 0.9 * 1.0 + 0.1 * x.var(axis=0), atol=1e-12)
        assert run.count == 1
        y = batchnorm(Tensor(x[:4]), Tensor(np.ones(2)), Tensor(np.zeros(2)), "eval", run)
        expected = (x[:4] - run.mean) / np.sqrt(run.var + 1e-5)
        npt.assert_allclose(y.data, expected, atol=1e-12)

    def test_single_element_batch_rejected(self):
        with pytest.raises(ValueError, match="single-element"):
            batchnorm(Tensor(np.ones((1, 3))), Tensor(np.ones(3)), Tensor(np.zeros(3)),
                      "train", RunningStats.create(3))

    def test_eval_before_train_rejected(self):
        with pytest.raises(ValueError, match="uninitialized"):
            batchnorm(Tensor(np.ones((2, 3))), Tensor(np.ones(3)), Tensor(np.zeros(3)),
                      "eval", RunningStats.create(3))

    def test_zero_variance_channel_is_fine(self):
        x = np.ones((4, 2))
        out = batchnorm(Tensor(x), Tensor(np.ones(2)), Tensor(np.zeros(2)), "train",
                        RunningStats.create(2))
        npt.assert_allclose(out.data, 0.0, atol=1e-12)


class TestGlobalAvgPool:
    def test_constant_channel(self):
        x = np.full((3, 4, 5), 7.0)
        out = global_avg_pool(Tensor(x))
        npt.assert_array_equal(out.data, np.full((3, 1, 1), 7.0))

    def test_degenerate_spatial_identity(self):
        x = np.arange(3.0).reshape(3, 1, 1)
        npt.assert_array_equal(global_avg_pool(Tensor(x)).data, x)

    def test_mean_value(self):
        out = global_avg_pool(Tensor(np.array([[[1.0, 2.0], [3.0, 4.0]]])))
        npt.assert_array_equal(out.data, [[[2.5]]])


class TestElementwise:
    def test_sigmoid_symmetry_point(self):
        assert sigmoid(Tensor(0.0)).item() == 0.5

    def test_complement_sums_to_one(self):
        rng = Rng(9)
        x = rng.normal(size=(50,), std=4.0)
        s = sigmoid(Tensor(x))
        total = s + sub_from_one(s)
        npt.assert_array_equal(total.data, np.ones(50))

    def test_broadcast_mul_matches_loop_oracle(self):
        rng = Rng(10)
        m = rng.normal(size=(4, 3, 5))
        channel_mask = rng.normal(size=(4, 1, 1))
        spatial_mask = rng.normal(size=(1, 3, 5))
        for mask in (channel_mask, spatial_mask):
            out = mul(Tensor(m), Tensor(mask))
            npt.assert_array_equal(out.data, broadcast_mul_oracle(mask, m))
            npt.assert_array_equal(out.data, mul(Tensor(mask), Tensor(m)).data)

    def test_incompatible_broadcast_lists_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(4, 5\)"):
            mul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 5))))

    def test_finite_outputs_on_extreme_inputs(self):
        x = Tensor(np.array([-1e6, -50.0, 0.0, 50.0, 1e6]))
        for op in (sigmoid, relu, sub_from_one):
            assert np.all(np.isfinite(op(x).data))


class TestSplitConcat:
    def test_split_8_into_4(self):
        x = Tensor(np.arange(8.0 * 2 * 2).reshape(8, 2, 2))
        parts = split_channels(x, 4)
        assert [p.shape for p in parts] == [(2, 2, 2)] * 4

    def test_round_trip_bitwise(self):
        rng = Rng(11)
        x = rng.normal(size=(12, 3, 4))
        for groups in (1, 2, 3, 4, 6, 12):
            parts = split_channels(Tensor(x), groups)
            npt.assert_array_equal(concat(parts, axis=0).data, x)

    def test_stage_width_concat(self):
        parts = [Tensor(np.zeros((2, c))) for c in (16, 32, 64, 128)]
        assert concat(parts, axis=1).shape == (2, 240)

    def test_indivisible_rejected(self):
        with pytest.raises(ShapeError, match="divisible"):
            split_channels(Tensor(np.ones((7, 2, 2))), 4)


class TestBackward:
    def test_sum_gives_ones(self):
        x = param(np.arange(12.0).reshape(3, 4))
        with Tape() as tape:
            loss = tensor_sum(x)
        backward(loss, tape)
        npt.assert_array_equal(x.grad, np.ones((3, 4)))

    def test_sigmoid_quarter_slope(self):
        w = param(np.zeros(()))
        c = 3.0
        with Tape() as tape:
            loss = sigmoid(w) * c
        backward(loss, tape)
        npt.assert_allclose(w.grad, 0.25 * c, atol=1e-15)

    def test_shared_use_accumulates(self):
        x = param(np.array([2.0]))
        with Tape() as tape:
            loss = tensor_sum(x + x)
        backward(loss, tape)
        npt.assert_array_equal(x.grad, [2.0])

    def test_non_scalar_loss_rejected(self):
        x = param(np.ones(3))
        with Tape() as tape:
            y = x + 1.0
        with pytest.raises(ValueError, match="scalar"):
            backward(y, tape)

    def test_empty_tape_rejected(self):
        with pytest.raises(ValueError, match="empty tape"):
            backward(Tensor(1.0), Tape())

    def test_no_recording_without_tape(self):
        x = param(np.ones(3))
        y = x + 1.0
        assert y.requires_grad is False


class TestTake:
    def test_gather_and_scatter(self):
        x = param(np.arange(6.0).reshape(2, 3))
        with Tape() as tape:
            picked = take(x, [0, 4, 4])
            loss = tensor_sum(picked)
        npt.assert_array_equal(picked.data, [0.0, 4.0, 4.0])
        backward(loss, tape)
        npt.assert_array_equal(x.grad, [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]])


class TestPairwiseDistances:
    def test_identical_rows_zero(self):
        e = Tensor(np.ones((3, 4)))
        npt.assert_array_equal(pairwise_distances(e).data, np.zeros((3, 3)))

    def test_pythagorean(self):
        e = Tensor(np.array([[0.0, 0.0], [3.0, 4.0]]))
        d = pairwise_distances(e).data
        assert d[0, 1] == 5.0 and d[1, 0] == 5.0

    def test_symmetry_exact(self):
        rng = Rng(13)
        e = rng.normal(size=(8, 5))
        d = pairwise_distances(Tensor(e)).data
        npt.assert_array_equal(d, d.T)
        npt.assert_array_equal(np.diag(d), np.zeros(8))

    def test_gradient_against_finite_differences(self):
        rng = Rng(14)
        e = Tensor(rng.normal(size=(5, 3)))
        proj = rng.normal(size=(5, 5))
        np.fill_diagonal(proj, 0.0)

        def f(pt):
            return tensor_sum(pairwise_distances(pt) * proj)

        report = grad_check(f, e, step=1e-5, tol=1e-6)
        assert report.passed, report.per_point


class TestGradCheck:
    def test_quadratic_tight(self):
        rng = Rng(15)
        x = Tensor(rng.normal(size=(6,)))
        report = grad_check(lambda t: tensor_sum(t * t), x, step=1e-5, tol=1e-6)
        assert report.passed
        assert report.max_rel_error < 1e-6

    def test_relu_away_from_kink(self):
        x = Tensor(np.array([1.0, -2.0, 3.0, -0.5]))
        report = grad_check(lambda t: tensor_sum(relu(t)), x, step=1e-5, tol=1e-6)
        assert report.passed

    @pytest.mark.parametrize("seed", range(10))
    def test_composite_block_many_seeds(self, seed):
        rng = Rng(seed)
        x = Tensor(rng.normal(size=(1, 2, 4, 4)))
        w = Tensor(rng.normal(size=(3, 2, 3, 3)))
        b = Tensor(rng.normal(size=(3,)))
        proj = rng.normal(size=(1, 3, 4, 4))

        def f(xt, wt, bt):
            h = conv2d(xt, wt, bt, pad=(1, 1))
            return tensor_sum(sigmoid(h) * proj)

        report = grad_check(f, [x, w, b], step=1e-5, tol=1e-4, names=["x", "w", "b"])
        assert report.passed, report.per_point

    @pytest.mark.filterwarnings("ignore:invalid value encountered")
    def test_nonfinite_reported_not_raised(self):
        from reidnet.autodiff import log
        x = Tensor(np.array([1e-7]))
        report = grad_check(lambda t: tensor_sum(log(t)), x, step=1e-5, tol=1e-4)
        assert not report.passed
        assert report.nonfinite  # log over a negative probe point


def test_forward_determinism_same_seed():
    def build(seed):
        rng = Rng(seed)
        x = Tensor(rng.normal(size=(2, 3, 5, 5)))
        w = Tensor(rng.normal(size=(4, 3, 3, 3)))
        return conv2d(x, w, pad=(1, 1)).data

    npt.assert_array_equal(build(21), build(21))
