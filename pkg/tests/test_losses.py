"""Loss-suite oracles: band rule, centers, attention weights, center loss."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vitalseq.autodiff import Tensor, grad_check
from vitalseq.errors import ConfigError, NonFiniteError, ShapeError
from vitalseq.losses import (
    ClassCenters, attention_from_gradient, cc_loss, clip, clip_bce,
    total_loss, update_centers,
)


class TestClip:
    def test_inside_band(self):
        assert clip(math.log(0.5)) == pytest.approx(math.log(0.5), abs=1e-15)

    def test_outside_band_zero(self):
        assert clip(math.log(0.9)) == 0.0
        assert clip(math.log(0.01)) == 0.0

    def test_boundaries_inclusive(self):
        assert clip(math.log(0.25)) == math.log(0.25)
        assert clip(math.log(0.75)) == math.log(0.75)

    def test_array_input(self):
        out = clip(np.log([0.5, 0.9, 0.25]))
        np.testing.assert_allclose(out, [math.log(0.5), 0.0, math.log(0.25)])


class TestClipBce:
    def test_all_half_any_labels(self):
        for labels in ([1, 0], [1, 1], [0, 0]):
            loss = clip_bce(labels, Tensor([0.5, 0.5]))
            assert loss.item() == pytest.approx(-math.log(0.5), abs=1e-12)

    def test_confident_correct_clipped_out(self):
        assert clip_bce([1], Tensor([0.99])).item() == 0.0

    def test_confident_wrong_also_clipped_out(self):
        # band rule, not clamping: log 0.01 falls outside and contributes 0
        assert clip_bce([1], Tensor([0.01])).item() == 0.0

    def test_equals_plain_bce_inside_band(self):
        rng = np.random.default_rng(0)
        p = rng.uniform(0.26, 0.74, size=40)
        y = rng.integers(0, 2, size=40)
        loss = clip_bce(y, Tensor(p)).item()
        plain = -np.mean(y * np.log(p) + (1 - y) * np.log(1 - p))
        assert loss == pytest.approx(plain, abs=1e-12)

    @given(st.integers(0, 10_000))
    @settings(max_examples=50, deadline=None)
    def test_band_property(self, seed):
        rng = np.random.default_rng(seed)
        p = rng.uniform(0.26, 0.74, size=16)
        y = rng.integers(0, 2, size=16)
        plain = -np.mean(y * np.log(p) + (1 - y) * np.log(1 - p))
        assert clip_bce(y, Tensor(p)).item() == pytest.approx(plain, abs=1e-12)

    def test_gradient_only_inside_band(self):
        p = Tensor([0.5, 0.9, 0.1], requires_grad=True)
        clip_bce([1, 1, 0], p).backward()
        assert p.grad[0] != 0.0
        assert p.grad[1] == 0.0 and p.grad[2] == 0.0

    def test_gradient_matches_finite_difference(self):
        rng = np.random.default_rng(1)
        p = Tensor(rng.uniform(0.3, 0.7, size=8), requires_grad=True)
        y = rng.integers(0, 2, size=8)
        report = grad_check(lambda t: clip_bce(y, t), [p])
        assert report.passed, report.summary()

    def test_empty_batch_rejected(self):
        with pytest.raises(ShapeError, match="empty"):
            clip_bce([], Tensor(np.empty(0)))

    def test_mixed_band_batch(self):
        # only the in-band sample contributes: -(log 0.6)/3
        loss = clip_bce([1, 1, 1], Tensor([0.6, 0.95, 0.02]))
        assert loss.item() == pytest.approx(-math.log(0.6) / 3, abs=1e-12)


class TestCenters:
    def test_warmup_batch_mean(self):
        centers = ClassCenters.zeros((3,))
        feats = np.array([[1.0, 2.0, 3.0], [3.0, 4.0, 5.0], [10.0, 10.0, 10.0]])
        out = update_centers(centers, feats, [1, 1, 0], iteration=0)
        np.testing.assert_allclose(out.m1, [2.0, 3.0, 4.0])
        np.testing.assert_allclose(out.m0, [10.0, 10.0, 10.0])

    def test_warmup_identical_features(self):
        centers = ClassCenters.zeros((2,))
        c = np.array([7.0, -1.0])
        out = update_centers(centers, np.stack([c, c]), [1, 1], iteration=5)
        np.testing.assert_allclose(out.m1, c)

    def test_warmup_absent_class_resets_to_zero(self):
        centers = ClassCenters(m0=np.ones(2), m1=np.ones(2))
        out = update_centers(centers, np.array([[4.0, 4.0]]), [0], iteration=3)
        np.testing.assert_allclose(out.m1, [0.0, 0.0])
        np.testing.assert_allclose(out.m0, [4.0, 4.0])

    def test_post_warmup_count_weighted(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(2, 4))   # class-1 batch, n=2
        b = rng.normal(size=(4, 4))   # class-1 batch, n=4
        centers = ClassCenters.zeros((4,))
        centers = update_centers(centers, a, [1, 1], iteration=100)
        centers = update_centers(centers, b, [1, 1, 1, 1], iteration=101)
        expect = (2 * a.mean(axis=0) + 4 * b.mean(axis=0)) / 6
        np.testing.assert_allclose(centers.m1, expect, atol=1e-12)

    def test_warmup_state_discarded_at_transition(self):
        centers = ClassCenters.zeros((2,))
        centers = update_centers(centers, np.array([[100.0, 100.0]]), [1],
                                 iteration=99)   # last warmup batch
        centers = update_centers(centers, np.array([[2.0, 2.0]]), [1],
                                 iteration=100)  # first counted batch
        np.testing.assert_allclose(centers.m1, [2.0, 2.0])

    def test_permuting_within_class_invariant(self):
        rng = np.random.default_rng(3)
        feats = rng.normal(size=(6, 3))
        labels = np.array([1, 0, 1, 0, 1, 0])
        centers = ClassCenters.zeros((3,))
        a = update_centers(centers, feats, labels, iteration=150)
        perm = np.array([4, 1, 2, 5, 0, 3])  # permutes within each class
        assert (labels[perm] == labels).all()
        b = update_centers(centers, feats[perm], labels[perm], iteration=150)
        np.testing.assert_allclose(a.m0, b.m0, atol=1e-12)
        np.testing.assert_allclose(a.m1, b.m1, atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError, match="update_centers"):
            update_centers(ClassCenters.zeros((2,)), np.zeros((3, 2)), [1, 0],
                           iteration=0)


class TestAttention:
    def test_minmax_oracle(self):
        G = attention_from_gradient(np.array([[1.0, 3.0, 5.0]]))
        np.testing.assert_allclose(G, [[0.0, 0.5, 1.0]])

    def test_constant_row_zeros(self):
        G = attention_from_gradient(np.array([[2.0, 2.0, 2.0]]))
        np.testing.assert_allclose(G, [[0.0, 0.0, 0.0]])

    def test_scale_invariance(self):
        rng = np.random.default_rng(4)
        g = rng.normal(size=(3, 7))
        np.testing.assert_allclose(attention_from_gradient(g),
                                   attention_from_gradient(5.0 * g), atol=1e-12)

    def test_per_sample_not_per_batch(self):
        g = np.array([[0.0, 1.0], [100.0, 200.0]])
        G = attention_from_gradient(g)
        np.testing.assert_allclose(G, [[0.0, 1.0], [0.0, 1.0]])

    def test_range_invariant(self):
        rng = np.random.default_rng(5)
        G = attention_from_gradient(rng.normal(size=(10, 20)))
        assert G.min() == 0.0 and G.max() == 1.0

    def test_batch_axis_required(self):
        with pytest.raises(ShapeError, match="batch"):
            attention_from_gradient(np.array([1.0, 2.0]))


class TestCcLoss:
    def centers(self, m0, m1):
        return ClassCenters(m0=np.asarray(m0, float), m1=np.asarray(m1, float))

    def test_features_at_center_zero(self):
        c = self.centers([1.0, 2.0], [3.0, 4.0])
        f = Tensor([[3.0, 4.0], [1.0, 2.0]])
        loss = cc_loss(f, [1, 0], c, np.ones((2, 2)))
        assert loss.item() == 0.0

    def test_zero_attention_annihilates(self):
        c = self.centers([0.0, 0.0], [0.0, 0.0])
        f = Tensor([[5.0, -7.0]])
        assert cc_loss(f, [1], c, np.zeros((1, 2))).item() == 0.0

    def test_hand_arithmetic(self):
        c = self.centers([0.0, 0.0], [1.0, 1.0])
        loss = cc_loss(Tensor([[2.0, 0.0]]), [1], c, np.array([[1.0, 0.5]]))
        assert loss.item() == pytest.approx(1.5, abs=1e-12)

    def test_nonnegative_property(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            f = Tensor(rng.normal(size=(4, 5)))
            c = self.centers(rng.normal(size=5), rng.normal(size=5))
            G = rng.uniform(size=(4, 5))
            assert cc_loss(f, rng.integers(0, 2, size=4), c, G).item() >= 0.0

    def test_gradient_matches_finite_difference_away_from_kinks(self):
        rng = np.random.default_rng(7)
        m0, m1 = rng.normal(size=4), rng.normal(size=4)
        c = self.centers(m0, m1)
        y = np.array([1, 0, 1])
        f_val = rng.normal(size=(3, 4))
        target = np.where((y == 1)[:, None], m1, m0)
        f_val += np.where(np.abs(f_val - target) < 1e-2, 0.05, 0.0)  # avoid kinks
        G = rng.uniform(0.1, 1.0, size=(3, 4))
        f = Tensor(f_val, requires_grad=True)
        report = grad_check(lambda t: cc_loss(t, y, c, G), [f])
        assert report.passed, report.summary()

    def test_centers_and_attention_are_constants(self):
        f = Tensor([[1.0, 2.0]], requires_grad=True)
        c = self.centers([0.0, 0.0], [0.5, 0.5])
        loss = cc_loss(f, [1], c, np.array([[1.0, 1.0]]))
        loss.backward()
        np.testing.assert_allclose(f.grad, [[1.0, 1.0]])  # sign(f - m) * G

    def test_attention_out_of_range_rejected(self):
        with pytest.raises(ConfigError, match="attention"):
            cc_loss(Tensor([[1.0]]), [1], self.centers([0.0], [0.0]),
                    np.array([[1.5]]))


class TestTotalLoss:
    def test_single_part(self):
        part = Tensor(0.7)
        total, breakdown = total_loss(part, None, None)
        assert total is part  # no extra graph nodes for disabled parts
        assert breakdown.total == 0.7
        assert breakdown.patchup == 0.0 and breakdown.cc == 0.0

    def test_sum_arithmetic(self):
        total, b = total_loss(Tensor(0.7), Tensor(0.2), Tensor(0.1))
        assert total.item() == pytest.approx(1.0, abs=1e-12)
        assert b.total == b.clip_bce + b.patchup + b.cc

    def test_all_zero(self):
        total, b = total_loss(Tensor(0.0), Tensor(0.0), Tensor(0.0))
        assert total.item() == 0.0 and b.total == 0.0

    def test_all_disabled_rejected(self):
        with pytest.raises(ConfigError, match="disabled"):
            total_loss(None, None, None)

    def test_nonfinite_part_rejected(self):
        bad = Tensor(1.0)
        bad.data[...] = np.inf
        with pytest.raises(NonFiniteError):
            total_loss(bad, None, None)
