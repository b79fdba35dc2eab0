"""Road likelihood via collaborative representation with Tikhonov biasing.

A test descriptor is reconstructed as a linear combination of training
descriptors, with each coefficient penalized by the distance between its
training sample and the test sample (a diagonal Tikhonov weighting). The
closed form is

    alpha = (X^T X + lambda * G^T G)^(-1) X^T x,   G_ii = ||x - x_i||_2.

Class likelihood comes from the per-class partial-reconstruction
residuals: p_road = R_nonroad / (R_road + R_nonroad). Per-object
likelihoods are broadcast to pixels and fused across segmentation scales
(max rule by default).

In code, sample matrices are stored row-wise: X has shape (n, d).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from . import features as feats_mod

_RESIDUAL_RTOL = 1e-8
_RIDGE = 1e-10


@dataclass(frozen=True)
class CrcParams:
    lam: float = 10.0

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValueError("lambda must be finite and >= 0")


@dataclass(frozen=True)
class TrainingSet:
    """Row-wise training descriptors with boolean road labels."""

    features: np.ndarray  # (n, d)
    labels: np.ndarray    # (n,) bool, True = road

    def __post_init__(self):
        if self.features.ndim != 2 or len(self.features) != len(self.labels):
            raise ValueError("features and labels must align")
        if len(self.features) < 2 or not (self.labels.any() and (~self.labels).any()):
            raise ValueError("need at least one sample per class")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("training features must be finite")

    @property
    def n1(self):
        return int(self.labels.sum())

    @property
    def n2(self):
        return int((~self.labels).sum())


def build_tikhonov(X, x_test) -> np.ndarray:
    """Diagonal distance-weighting matrix: G_ii = ||x_test - x_i||."""
    X = np.asarray(X, dtype=np.float64)
    x_test = np.asarray(x_test, dtype=np.float64)
    if X.shape[1] != x_test.shape[0]:
        raise ValueError("dimension mismatch between samples and test vector")
    return np.diag(np.linalg.norm(X - x_test, axis=1))


def crc_solve(X, x_test, params: CrcParams) -> np.ndarray:
    """Closed-form reconstruction coefficients for one test vector.

    Falls back to a tiny ridge (1e-10 on the diagonal) with a warning when
    the normal-equation system is singular or numerically unusable.
    """
    X = np.asarray(X, dtype=np.float64)
    x_test = np.asarray(x_test, dtype=np.float64)
    d2 = ((X - x_test) ** 2).sum(axis=1)
    a = X @ X.T + params.lam * np.diag(d2)
    b = X @ x_test
    alpha = None
    try:
        alpha = np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        pass
    bnorm = np.linalg.norm(b)
    if alpha is None or not np.all(np.isfinite(alpha)) or (
        np.linalg.norm(a @ alpha - b) > _RESIDUAL_RTOL * max(bnorm, 1e-300)
    ):
        warnings.warn("singular collaborative-representation system; solving with ridge fallback")
        alpha = np.linalg.solve(a + _RIDGE * np.eye(len(a)), b)
    return alpha


def class_residuals(X, labels, alpha, x_test) -> tuple:
    """Squared reconstruction residuals using only road / only nonroad columns."""
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    r_road = float(((alpha[labels] @ X[labels] - x_test) ** 2).sum())
    r_non = float(((alpha[~labels] @ X[~labels] - x_test) ** 2).sum())
    return r_road, r_non


def road_likelihood(r_road, r_nonroad) -> float:
    """p_road = R_nonroad / (R_road + R_nonroad); 0.5 when both residuals vanish."""
    if r_road < 0 or r_nonroad < 0:
        raise ValueError("residuals must be nonnegative")
    total = r_road + r_nonroad
    if total == 0:
        warnings.warn("degenerate zero residuals for both classes; returning 0.5")
        return 0.5
    return r_nonroad / total


def classify_objects(train: TrainingSet, descriptors, params: CrcParams, chunk=512) -> np.ndarray:
    """Road likelihood for a batch of descriptors.

    Features are z-scored with training-set statistics so the Tikhonov
    distances weigh all dimensions comparably.
    """
    mean = train.features.mean(axis=0)
    std = np.maximum(train.features.std(axis=0), 1e-12)
    s = (train.features - mean) / std
    z = (np.asarray(descriptors, dtype=np.float64) - mean) / std
    n = len(s)
    gram = s @ s.T
    eye = np.eye(n)
    road = train.labels
    out = np.empty(len(z))
    for lo in range(0, len(z), chunk):
        zz = z[lo : lo + chunk]
        d2 = cdist(zz, s, "sqeuclidean")
        a = gram[None, :, :] + params.lam * d2[:, :, None] * eye[None, :, :]
        b = zz @ s.T
        try:
            alpha = np.linalg.solve(a, b[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            warnings.warn("singular collaborative-representation batch; solving with ridge fallback")
            alpha = np.linalg.solve(a + _RIDGE * eye[None, :, :], b[:, :, None])[:, :, 0]
        r_road = ((alpha[:, road] @ s[road] - zz) ** 2).sum(axis=1)
        r_non = ((alpha[:, ~road] @ s[~road] - zz) ** 2).sum(axis=1)
        total = r_road + r_non
        out[lo : lo + chunk] = np.where(total > 0, r_non / np.maximum(total, 1e-300), 0.5)
    return out


def sample_training(image, labels, reference_mask, count_per_class=50, purity=0.8,
                    seed=0, neighbor_metric="hf", descriptors=None) -> TrainingSet:
    """Draw a balanced training set of sufficiently pure objects.

    An object qualifies for the road class when at least ``purity`` of its
    pixels are road in the reference mask (symmetrically for nonroad).
    Selection is uniform without replacement under the given seed.
    ``descriptors`` may pass precomputed contextual features to avoid
    recomputation.
    """
    k = labels.max() + 1
    area = np.bincount(labels.ravel(), minlength=k)
    road_px = np.bincount(labels.ravel()[reference_mask.ravel()], minlength=k)
    frac = road_px / area
    pools = {
        "road": np.flatnonzero(frac >= purity),
        "nonroad": np.flatnonzero(1.0 - frac >= purity),
    }
    for name, pool in pools.items():
        if len(pool) < count_per_class:
            raise ValueError(
                f"only {len(pool)} {name} objects meet purity {purity}, need {count_per_class}"
            )
    rng = np.random.default_rng(seed)
    chosen_road = np.sort(rng.choice(pools["road"], size=count_per_class, replace=False))
    chosen_non = np.sort(rng.choice(pools["nonroad"], size=count_per_class, replace=False))
    if descriptors is None:
        descriptors = feats_mod.contextual_features(image, labels, neighbor_metric)
    feat = np.concatenate([descriptors[chosen_road], descriptors[chosen_non]])
    lab = np.concatenate([np.ones(count_per_class, dtype=bool), np.zeros(count_per_class, dtype=bool)])
    return TrainingSet(features=feat, labels=lab)


_FUSIONS = {
    "max": lambda stack: stack.max(axis=0),
    "mean": lambda stack: stack.mean(axis=0),
    "median": lambda stack: np.median(stack, axis=0),
    "min": lambda stack: stack.min(axis=0),
}


def likelihood_field(image, label_maps, training_sets, params: CrcParams,
                     fusion="max", neighbor_metric="hf", descriptors_per_scale=None) -> np.ndarray:
    """Pixel road-likelihood field fused across segmentation scales.

    Every pixel inherits its object's likelihood at each scale; the fused
    value combines scales with the chosen rule (max by default).
    """
    if fusion not in _FUSIONS:
        raise ValueError(f"unknown fusion rule {fusion!r}")
    if len(label_maps) == 0 or len(label_maps) != len(training_sets):
        raise ValueError("need one training set per label map")
    fields = []
    for i, (labels, train) in enumerate(zip(label_maps, training_sets)):
        if descriptors_per_scale is not None:
            desc = descriptors_per_scale[i]
        else:
            desc = feats_mod.contextual_features(image, labels, neighbor_metric)
        p_obj = classify_objects(train, desc, params)
        fields.append(p_obj[labels])
    fused = _FUSIONS[fusion](np.stack(fields))
    return np.clip(fused, 0.0, 1.0)
