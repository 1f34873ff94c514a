"""Detection loss terms as pure scalar/array math with analytic gradients.

Composite loss over a batch of anchors:

    total = (beta_cls * L_cls + beta_loc * L_loc + beta_dir * L_dir) / n_pos

where L_cls sums focal loss over classification probabilities, L_loc sums
per-target-weighted smooth-L1 over the positive anchors' regression
residuals, and L_dir sums binary cross-entropy over direction logits.
With no positive anchors the normalization is undefined; the total and all
components are defined as zero.

Gradients are hand-derived and checked against central finite differences
in the test suite; there is no autodiff or optimizer here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LossWeights",
    "AnchorBatch",
    "LossBreakdown",
    "LossGradients",
    "focal_loss",
    "focal_loss_grad",
    "smooth_l1",
    "smooth_l1_grad",
    "detection_loss",
    "loss_gradient",
]

# Per-regression-target weights for (x, y, z, w, h, l, yaw, vx, vy):
# geometry terms at full weight, velocity terms down-weighted.
DEFAULT_TARGET_WEIGHTS = (1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.2, 0.2)
N_REGRESSION_TARGETS = 9


@dataclass(frozen=True)
class LossWeights:
    """Loss-term mixing weights; defaults follow the PointPillars lineage."""

    beta_cls: float = 1.0
    beta_loc: float = 0.8
    beta_dir: float = 0.8
    target_weights: tuple[float, ...] = DEFAULT_TARGET_WEIGHTS

    def __post_init__(self):
        for name in ("beta_cls", "beta_loc", "beta_dir"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0.0:
                raise ValueError(f"{name} must be finite and non-negative, got {v}")
        tw = tuple(float(w) for w in self.target_weights)
        if len(tw) != N_REGRESSION_TARGETS:
            raise ValueError(
                f"expected {N_REGRESSION_TARGETS} target weights, got {len(tw)}"
            )
        if any(not math.isfinite(w) or w < 0.0 for w in tw):
            raise ValueError("target weights must be finite and non-negative")
        object.__setattr__(self, "target_weights", tw)


@dataclass
class AnchorBatch:
    """Predictions and targets for one batch of anchors.

    cls_probs/cls_targets cover every scored anchor; loc_residuals holds
    the 9 regression residuals (prediction minus target) per positive
    anchor; dir_logits/dir_targets are binary direction terms per positive
    anchor. n_pos is the positive count used for normalization.
    """

    n_pos: int
    cls_probs: np.ndarray
    cls_targets: np.ndarray
    loc_residuals: np.ndarray
    dir_logits: np.ndarray
    dir_targets: np.ndarray

    def __post_init__(self):
        self.cls_probs = np.asarray(self.cls_probs, dtype=np.float64)
        self.cls_targets = np.asarray(self.cls_targets, dtype=np.float64)
        self.loc_residuals = np.asarray(self.loc_residuals, dtype=np.float64)
        self.dir_logits = np.asarray(self.dir_logits, dtype=np.float64)
        self.dir_targets = np.asarray(self.dir_targets, dtype=np.float64)
        if self.n_pos < 0:
            raise ValueError(f"n_pos must be >= 0, got {self.n_pos}")
        if self.cls_probs.shape != self.cls_targets.shape:
            raise ValueError("cls_probs and cls_targets must have the same shape")
        if self.cls_probs.size and (
            self.cls_probs.min() <= 0.0 or self.cls_probs.max() >= 1.0
        ):
            raise ValueError("classification probabilities must lie in (0, 1)")
        if not np.all(np.isin(self.cls_targets, (0.0, 1.0))):
            raise ValueError("cls_targets must be 0 or 1")
        if self.loc_residuals.ndim != 2 or self.loc_residuals.shape[1] != N_REGRESSION_TARGETS:
            raise ValueError(
                f"loc_residuals must be (n_pos, {N_REGRESSION_TARGETS}), "
                f"got {self.loc_residuals.shape}"
            )
        if self.dir_logits.shape != self.dir_targets.shape:
            raise ValueError("dir_logits and dir_targets must have the same shape")
        if not np.all(np.isin(self.dir_targets, (0.0, 1.0))):
            raise ValueError("dir_targets must be 0 or 1")


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    cls: float
    loc: float
    dir: float


@dataclass(frozen=True)
class LossGradients:
    """Partials of the total loss w.r.t. each prediction array."""

    cls_probs: np.ndarray
    loc_residuals: np.ndarray
    dir_logits: np.ndarray


def focal_loss(p, y, alpha: float = 0.25, gamma: float = 2.0):
    """Focal term -alpha_t * (1 - p_t)^gamma * log(p_t) for binary targets.

    p is the predicted probability of the positive class, strictly inside
    (0, 1); y selects which side counts as correct. gamma = 0 reduces to
    alpha-weighted binary cross-entropy.
    """
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if p.size and (p.min() <= 0.0 or p.max() >= 1.0):
        raise ValueError("probabilities must lie strictly inside (0, 1)")
    p_t = np.where(y == 1.0, p, 1.0 - p)
    a_t = np.where(y == 1.0, alpha, 1.0 - alpha)
    out = -a_t * (1.0 - p_t) ** gamma * np.log(p_t)
    return float(out) if out.ndim == 0 else out


def focal_loss_grad(p, y, alpha: float = 0.25, gamma: float = 2.0):
    """d focal_loss / d p."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    p_t = np.where(y == 1.0, p, 1.0 - p)
    a_t = np.where(y == 1.0, alpha, 1.0 - alpha)
    # d/dp_t of the loss, times dp_t/dp (+1 for y=1, -1 for y=0)
    d_pt = a_t * (gamma * (1.0 - p_t) ** (gamma - 1.0) * np.log(p_t) - (1.0 - p_t) ** gamma / p_t)
    out = d_pt * np.where(y == 1.0, 1.0, -1.0)
    return float(out) if out.ndim == 0 else out


def smooth_l1(x, beta: float = 1.0):
    """Huber-style residual penalty: quadratic inside beta, linear outside."""
    if beta <= 0.0:
        raise ValueError(f"beta must be positive, got {beta}")
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    out = np.where(ax < beta, 0.5 * x * x / beta, ax - 0.5 * beta)
    return float(out) if out.ndim == 0 else out


def smooth_l1_grad(x, beta: float = 1.0):
    """d smooth_l1 / d x (x/beta inside, sign(x) outside)."""
    if beta <= 0.0:
        raise ValueError(f"beta must be positive, got {beta}")
    x = np.asarray(x, dtype=np.float64)
    out = np.where(np.abs(x) < beta, x / beta, np.sign(x))
    return float(out) if out.ndim == 0 else out


def _bce_with_logits(z: np.ndarray, y: np.ndarray) -> np.ndarray:
    # max(z,0) - z*y + log(1 + exp(-|z|)), the overflow-safe form
    return np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))


def detection_loss(
    batch: AnchorBatch,
    weights: LossWeights = LossWeights(),
    alpha: float = 0.25,
    gamma: float = 2.0,
    smooth_l1_beta: float = 1.0,
) -> LossBreakdown:
    """Composite detection loss, normalized by the positive-anchor count.

    Component values are the raw (unweighted, unnormalized) sums; the
    total applies the beta mixing weights and the 1/n_pos factor. A batch
    with n_pos = 0 yields all zeros.
    """
    if batch.n_pos == 0:
        return LossBreakdown(0.0, 0.0, 0.0, 0.0)
    l_cls = float(np.sum(focal_loss(batch.cls_probs, batch.cls_targets, alpha, gamma)))
    tw = np.asarray(weights.target_weights)
    per_target = smooth_l1(batch.loc_residuals, smooth_l1_beta) * tw
    l_loc = float(np.sum(per_target))
    l_dir = float(np.sum(_bce_with_logits(batch.dir_logits, batch.dir_targets)))
    total = (
        weights.beta_cls * l_cls + weights.beta_loc * l_loc + weights.beta_dir * l_dir
    ) / batch.n_pos
    return LossBreakdown(total, l_cls, l_loc, l_dir)


def loss_gradient(
    batch: AnchorBatch,
    weights: LossWeights = LossWeights(),
    alpha: float = 0.25,
    gamma: float = 2.0,
    smooth_l1_beta: float = 1.0,
) -> LossGradients:
    """Analytic partials of detection_loss(...).total w.r.t. predictions."""
    if batch.n_pos == 0:
        return LossGradients(
            np.zeros_like(batch.cls_probs),
            np.zeros_like(batch.loc_residuals),
            np.zeros_like(batch.dir_logits),
        )
    inv = 1.0 / batch.n_pos
    g_cls = (
        weights.beta_cls
        * inv
        * focal_loss_grad(batch.cls_probs, batch.cls_targets, alpha, gamma)
    )
    tw = np.asarray(weights.target_weights)
    g_loc = weights.beta_loc * inv * smooth_l1_grad(batch.loc_residuals, smooth_l1_beta) * tw
    sig = 1.0 / (1.0 + np.exp(-batch.dir_logits))
    g_dir = weights.beta_dir * inv * (sig - batch.dir_targets)
    return LossGradients(np.asarray(g_cls), np.asarray(g_loc), np.asarray(g_dir))
