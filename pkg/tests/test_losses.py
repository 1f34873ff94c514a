"""Detection-loss math: frozen hand values, reductions, gradient checks."""

import math

import numpy as np
import pytest

from fastray.losses import (
    AnchorBatch,
    LossWeights,
    detection_loss,
    focal_loss,
    focal_loss_grad,
    loss_gradient,
    smooth_l1,
    smooth_l1_grad,
)


def random_batch(rng, n_anchors=12, n_pos=4) -> AnchorBatch:
    return AnchorBatch(
        n_pos=n_pos,
        cls_probs=rng.uniform(0.05, 0.95, n_anchors),
        cls_targets=rng.integers(0, 2, n_anchors).astype(float),
        loc_residuals=rng.uniform(-2.0, 2.0, (n_pos, 9)),
        dir_logits=rng.uniform(-3.0, 3.0, n_pos),
        dir_targets=rng.integers(0, 2, n_pos).astype(float),
    )


class TestFocal:
    def test_confident_correct_approaches_zero(self):
        for eps in (1e-3, 1e-6, 1e-9):
            assert focal_loss(1.0 - eps, 1) < focal_loss(1.0 - eps * 10, 1) + 1e-30
        assert focal_loss(1.0 - 1e-9, 1) < 1e-8

    def test_gamma_zero_reduces_to_scaled_bce(self):
        rng = np.random.default_rng(239)
        for _ in range(100):
            p = float(rng.uniform(0.01, 0.99))
            y = int(rng.integers(0, 2))
            bce = -math.log(p) if y == 1 else -math.log(1.0 - p)
            got = focal_loss(p, y, alpha=0.5, gamma=0.0)
            assert got == pytest.approx(0.5 * bce, rel=1e-12)

    def test_hand_computed_value(self):
        # -0.25 * (1 - 0.5)^2 * ln(0.5) = 0.25 * 0.25 * ln 2
        expect = 0.25 * 0.25 * math.log(2.0)  # 0.04332169878499658
        assert focal_loss(0.5, 1, alpha=0.25, gamma=2.0) == pytest.approx(expect, abs=1e-15)

    def test_rejects_probability_bounds(self):
        with pytest.raises(ValueError, match="strictly inside"):
            focal_loss(1.0, 1)
        with pytest.raises(ValueError, match="strictly inside"):
            focal_loss(0.0, 0)

    def test_grad_matches_finite_differences(self):
        rng = np.random.default_rng(241)
        h = 1e-6
        for _ in range(100):
            p = float(rng.uniform(0.05, 0.95))
            y = int(rng.integers(0, 2))
            fd = (focal_loss(p + h, y) - focal_loss(p - h, y)) / (2 * h)
            assert focal_loss_grad(p, y) == pytest.approx(fd, rel=1e-6)

    def test_grad_gamma_zero_closed_form(self):
        rng = np.random.default_rng(251)
        for _ in range(50):
            p = float(rng.uniform(0.05, 0.95))
            assert focal_loss_grad(p, 1, alpha=0.3, gamma=0.0) == pytest.approx(-0.3 / p)
            assert focal_loss_grad(p, 0, alpha=0.3, gamma=0.0) == pytest.approx(0.7 / (1 - p))

    def test_non_negative_everywhere(self):
        rng = np.random.default_rng(253)
        ps = rng.uniform(1e-6, 1 - 1e-6, 500)
        ys = rng.integers(0, 2, 500).astype(float)
        assert np.all(focal_loss(ps, ys) >= 0.0)


class TestSmoothL1:
    def test_zero_residual(self):
        assert smooth_l1(0.0) == 0.0
        assert smooth_l1_grad(0.0) == 0.0

    def test_hand_values(self):
        assert smooth_l1(0.5, beta=1.0) == pytest.approx(0.125, abs=1e-15)
        assert smooth_l1(2.0, beta=1.0) == pytest.approx(1.5, abs=1e-15)

    def test_continuity_at_beta(self):
        for beta in (0.5, 1.0, 2.0):
            below = smooth_l1(beta - 1e-13, beta)
            above = smooth_l1(beta + 1e-13, beta)
            assert abs(below - above) < 1e-12
            assert abs(smooth_l1_grad(beta - 1e-13, beta) - smooth_l1_grad(beta + 1e-13, beta)) < 1e-12

    def test_rejects_non_positive_beta(self):
        with pytest.raises(ValueError, match="beta"):
            smooth_l1(1.0, beta=0.0)

    def test_non_negative_and_zero_only_at_zero(self):
        xs = np.linspace(-3, 3, 601)
        vals = smooth_l1(xs)
        assert vals.min() >= 0.0
        assert np.flatnonzero(vals == 0.0).tolist() == [300]


class TestDetectionLoss:
    def test_default_weights_match_configured_values(self):
        w = LossWeights()
        assert (w.beta_cls, w.beta_loc, w.beta_dir) == (1.0, 0.8, 0.8)
        assert w.target_weights == (1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.2, 0.2)

    def test_perfect_predictions_approach_zero(self):
        batch = AnchorBatch(
            n_pos=2,
            cls_probs=np.array([1 - 1e-12, 1e-12]),
            cls_targets=np.array([1.0, 0.0]),
            loc_residuals=np.zeros((2, 9)),
            dir_logits=np.array([30.0, -30.0]),
            dir_targets=np.array([1.0, 0.0]),
        )
        out = detection_loss(batch)
        assert out.total < 1e-10

    def test_single_anchor_hand_expansion(self):
        p, y = 0.7, 1.0
        residuals = np.array([[0.3, -0.6, 1.4, 0.1, 0.0, -2.0, 0.5, 1.1, -0.4]])
        z, t = 0.8, 1.0
        batch = AnchorBatch(
            n_pos=1,
            cls_probs=np.array([p]),
            cls_targets=np.array([y]),
            loc_residuals=residuals,
            dir_logits=np.array([z]),
            dir_targets=np.array([t]),
        )
        w = LossWeights()
        # fully expanded by hand, independent formulas
        l_cls = -0.25 * (1 - p) ** 2 * math.log(p)
        tw = (1, 1, 1, 1, 1, 1, 1, 0.2, 0.2)
        l_loc = 0.0
        for x, wt in zip(residuals[0], tw):
            term = 0.5 * x * x if abs(x) < 1.0 else abs(x) - 0.5
            l_loc += wt * term
        l_dir = math.log(1.0 + math.exp(-z))  # BCE with target 1
        expect_total = (1.0 * l_cls + 0.8 * l_loc + 0.8 * l_dir) / 1.0
        out = detection_loss(batch, w)
        assert out.cls == pytest.approx(l_cls, abs=1e-10)
        assert out.loc == pytest.approx(l_loc, abs=1e-10)
        assert out.dir == pytest.approx(l_dir, abs=1e-10)
        assert out.total == pytest.approx(expect_total, abs=1e-10)

    def test_zero_positives_defined_as_zero(self):
        batch = AnchorBatch(
            n_pos=0,
            cls_probs=np.array([0.5]),
            cls_targets=np.array([1.0]),
            loc_residuals=np.zeros((0, 9)),
            dir_logits=np.zeros(0),
            dir_targets=np.zeros(0),
        )
        out = detection_loss(batch)
        assert (out.total, out.cls, out.loc, out.dir) == (0.0, 0.0, 0.0, 0.0)

    def test_anchor_order_invariance(self):
        rng = np.random.default_rng(257)
        batch = random_batch(rng)
        perm_cls = rng.permutation(batch.cls_probs.size)
        perm_pos = rng.permutation(batch.n_pos)
        shuffled = AnchorBatch(
            n_pos=batch.n_pos,
            cls_probs=batch.cls_probs[perm_cls],
            cls_targets=batch.cls_targets[perm_cls],
            loc_residuals=batch.loc_residuals[perm_pos],
            dir_logits=batch.dir_logits[perm_pos],
            dir_targets=batch.dir_targets[perm_pos],
        )
        a = detection_loss(batch)
        b = detection_loss(shuffled)
        assert a.total == pytest.approx(b.total, rel=1e-12)

    def test_beta_scaling_scales_total(self):
        rng = np.random.default_rng(263)
        batch = random_batch(rng)
        w = LossWeights()
        scaled = LossWeights(3.0 * w.beta_cls, 3.0 * w.beta_loc, 3.0 * w.beta_dir)
        assert detection_loss(batch, scaled).total == pytest.approx(
            3.0 * detection_loss(batch, w).total, rel=1e-12
        )


class TestGradient:
    def test_matches_central_finite_differences(self):
        rng = np.random.default_rng(269)
        h = 1e-5
        worst = 0.0
        for _ in range(100):
            batch = random_batch(rng, n_anchors=int(rng.integers(2, 10)), n_pos=int(rng.integers(1, 5)))
            # keep residuals away from the |x| = beta kink, probs off the edges
            batch.loc_residuals[np.abs(np.abs(batch.loc_residuals) - 1.0) < 0.05] = 0.5
            grads = loss_gradient(batch)

            def total(b):
                return detection_loss(b).total

            # finite differences: classification probabilities
            for idx in range(batch.cls_probs.size):
                plus = batch.cls_probs.copy()
                minus = batch.cls_probs.copy()
                plus[idx] += h
                minus[idx] -= h
                fd = (
                    total(AnchorBatch(batch.n_pos, plus, batch.cls_targets,
                                      batch.loc_residuals, batch.dir_logits, batch.dir_targets))
                    - total(AnchorBatch(batch.n_pos, minus, batch.cls_targets,
                                        batch.loc_residuals, batch.dir_logits, batch.dir_targets))
                ) / (2 * h)
                rel = abs(grads.cls_probs[idx] - fd) / max(abs(fd), 1e-8)
                worst = max(worst, rel)
            # regression residuals
            flat = batch.loc_residuals.reshape(-1)
            for idx in range(flat.size):
                plus = flat.copy(); plus[idx] += h
                minus = flat.copy(); minus[idx] -= h
                fd = (
                    total(AnchorBatch(batch.n_pos, batch.cls_probs, batch.cls_targets,
                                      plus.reshape(batch.loc_residuals.shape),
                                      batch.dir_logits, batch.dir_targets))
                    - total(AnchorBatch(batch.n_pos, batch.cls_probs, batch.cls_targets,
                                        minus.reshape(batch.loc_residuals.shape),
                                        batch.dir_logits, batch.dir_targets))
                ) / (2 * h)
                rel = abs(grads.loc_residuals.reshape(-1)[idx] - fd) / max(abs(fd), 1e-8)
                worst = max(worst, rel)
            # direction logits
            for idx in range(batch.dir_logits.size):
                plus = batch.dir_logits.copy(); plus[idx] += h
                minus = batch.dir_logits.copy(); minus[idx] -= h
                fd = (
                    total(AnchorBatch(batch.n_pos, batch.cls_probs, batch.cls_targets,
                                      batch.loc_residuals, plus, batch.dir_targets))
                    - total(AnchorBatch(batch.n_pos, batch.cls_probs, batch.cls_targets,
                                        batch.loc_residuals, minus, batch.dir_targets))
                ) / (2 * h)
                rel = abs(grads.dir_logits[idx] - fd) / max(abs(fd), 1e-8)
                worst = max(worst, rel)
        assert worst <= 1e-4

    def test_zero_positive_gradient_is_zero(self):
        batch = AnchorBatch(
            n_pos=0,
            cls_probs=np.array([0.4]),
            cls_targets=np.array([0.0]),
            loc_residuals=np.zeros((0, 9)),
            dir_logits=np.zeros(0),
            dir_targets=np.zeros(0),
        )
        grads = loss_gradient(batch)
        assert not grads.cls_probs.any()
