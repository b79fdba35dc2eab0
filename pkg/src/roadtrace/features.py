"""Per-object spectral, structural and contextual descriptors.

Each object (superpixel or component) gets a 5-dim hybrid feature:
mean R/G/B, shape index perimeter/(4*sqrt(area)), and the aspect ratio of
its minimum-area oriented bounding rectangle. The 15-dim contextual
descriptor stacks the object's hybrid feature with those of its two most
similar adjacent objects (Euclidean distance over z-scored features,
statistics taken over all objects at that scale; ties broken by the
smaller object id). Objects with fewer than two neighbors pad with their
own feature, keeping the dimension fixed at 15.

Extents of the oriented rectangle are measured on pixel centers and
widened by one pixel per axis, so a single pixel has extent 1x1 and an
axis-aligned 1x25 ribbon 25x1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import raster

_ANGLES = np.deg2rad(np.arange(0.0, 90.0, 1.0))


@dataclass(frozen=True)
class HybridFeature:
    sa_r: float
    sa_g: float
    sa_b: float
    si: float
    ar: float

    def as_array(self):
        return np.array([self.sa_r, self.sa_g, self.sa_b, self.si, self.ar])


def spectral_attribute(image, component) -> tuple:
    """Per-channel mean color over a component's pixels."""
    image = raster.as_image(image)
    px = component.pixels
    if len(px) == 0:
        raise ValueError("empty object has no spectral attribute")
    vals = image[px[:, 0], px[:, 1]].astype(np.float64)
    return tuple(vals.mean(axis=0))


def shape_index(component) -> float:
    """Boundary smoothness: perimeter / (4 * sqrt(area)); 1 for any solid square."""
    return component.perimeter / (4.0 * np.sqrt(component.area))


def oriented_extents(points) -> tuple:
    """(length, width) of the minimum-area oriented rectangle of pixel centers.

    Swept over 1-degree steps in [0, 90); extents include the one-pixel
    footprint. Exact enough for elongation ratios (cos of the angular
    quantization error ~ 1.5e-4).
    """
    pts = np.asarray(points, dtype=np.float64)
    r, c = pts[:, 0], pts[:, 1]
    u = c[:, None] * np.cos(_ANGLES) + r[:, None] * np.sin(_ANGLES)
    v = -c[:, None] * np.sin(_ANGLES) + r[:, None] * np.cos(_ANGLES)
    eu = u.max(axis=0) - u.min(axis=0) + 1.0
    ev = v.max(axis=0) - v.min(axis=0) + 1.0
    best = np.argmin(eu * ev)
    return (max(eu[best], ev[best]), min(eu[best], ev[best]))


def aspect_ratio(component) -> float:
    """Length/width of the minimum-area oriented bounding rectangle (>= 1)."""
    length, width = oriented_extents(component.pixels)
    return float(length / width)


def hybrid_feature(image, component) -> HybridFeature:
    sa = spectral_attribute(image, component)
    return HybridFeature(sa_r=sa[0], sa_g=sa[1], sa_b=sa[2], si=shape_index(component), ar=aspect_ratio(component))


# ---------------------------------------------------------------------------
# batch versions over a full label map
# ---------------------------------------------------------------------------

def label_areas(labels) -> np.ndarray:
    return np.bincount(labels.ravel(), minlength=labels.max() + 1)


def label_perimeters(labels) -> np.ndarray:
    """Exposed-edge count per label: edges to a different label or the border."""
    k = labels.max() + 1
    per = np.zeros(k, dtype=np.int64)
    for a, b in (((slice(None, -1), slice(None)), (slice(1, None), slice(None))),
                 ((slice(None), slice(None, -1)), (slice(None), slice(1, None)))):
        la, lb = labels[a], labels[b]
        diff = la != lb
        per += np.bincount(la[diff], minlength=k)
        per += np.bincount(lb[diff], minlength=k)
    for border in (labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]):
        per += np.bincount(border, minlength=k)
    return per


def _row_extreme_points(labels):
    """First/last pixel of every (label, row) run; hull vertices are a subset.

    Returns (points (M, 2) float, label per point, group start indices),
    points sorted by label.
    """
    flat = labels.ravel()
    order = np.argsort(flat, kind="stable")  # raster order within each label
    rows, cols = np.unravel_index(order, labels.shape)
    labs = flat[order]
    run = np.flatnonzero(np.diff(labs.astype(np.int64) * np.int64(labels.shape[0]) + rows, prepend=np.int64(-1)))
    ends = np.concatenate([run[1:] - 1, [labs.size - 1]])
    take = np.unique(np.concatenate([run, ends]))
    pts = np.stack([rows[take], cols[take]], axis=1).astype(np.float64)
    plabs = labs[take]
    starts = np.flatnonzero(np.diff(plabs, prepend=-1))
    return pts, plabs, starts


def label_aspect_ratios(labels) -> np.ndarray:
    """Oriented-rectangle aspect ratio for every label, vectorized."""
    pts, _, starts = _row_extreme_points(labels)
    r, c = pts[:, 0], pts[:, 1]
    k = labels.max() + 1
    best_area = np.full(k, np.inf)
    best_ratio = np.ones(k)
    for ang in _ANGLES:
        u = c * np.cos(ang) + r * np.sin(ang)
        v = -c * np.sin(ang) + r * np.cos(ang)
        eu = np.maximum.reduceat(u, starts) - np.minimum.reduceat(u, starts) + 1.0
        ev = np.maximum.reduceat(v, starts) - np.minimum.reduceat(v, starts) + 1.0
        area = eu * ev
        better = area < best_area
        best_area = np.where(better, area, best_area)
        ratio = np.maximum(eu, ev) / np.minimum(eu, ev)
        best_ratio = np.where(better, ratio, best_ratio)
    return best_ratio


def hybrid_features(image, labels) -> np.ndarray:
    """(K, 5) hybrid feature table for all labels of one over-segmentation."""
    image = raster.as_image(image)
    flat = labels.ravel()
    k = labels.max() + 1
    area = np.bincount(flat, minlength=k).astype(np.float64)
    if np.any(area == 0):
        raise ValueError("label map has empty labels; ids must be dense")
    out = np.empty((k, 5))
    for ch in range(3):
        out[:, ch] = np.bincount(flat, weights=image[..., ch].ravel().astype(np.float64), minlength=k) / area
    out[:, 3] = label_perimeters(labels) / (4.0 * np.sqrt(area))
    out[:, 4] = label_aspect_ratios(labels)
    return out


def label_adjacency(labels) -> np.ndarray:
    """Unique (i, j) pairs of 4-adjacent distinct labels, both directions."""
    pairs = []
    for a, b in (((slice(None, -1), slice(None)), (slice(1, None), slice(None))),
                 ((slice(None), slice(None, -1)), (slice(None), slice(1, None)))):
        la, lb = labels[a].ravel(), labels[b].ravel()
        diff = la != lb
        pairs.append(np.stack([la[diff], lb[diff]], axis=1))
    pairs = np.concatenate(pairs)
    pairs = np.concatenate([pairs, pairs[:, ::-1]])
    k = np.int64(labels.max() + 1)
    packed = np.unique(pairs[:, 0].astype(np.int64) * k + pairs[:, 1])
    return np.stack([packed // k, packed % k], axis=1)


def _zscore(table):
    mean = table.mean(axis=0)
    std = table.std(axis=0)
    return (table - mean) / np.maximum(std, 1e-12)


def rank_neighbors(hf, adjacency, neighbor_metric="hf"):
    """Two most similar neighbors per object (or -1 when unavailable).

    Similarity is Euclidean distance between z-scored features: all five
    dims for 'hf', the three spectral dims for 'sa'. Ties break toward the
    smaller neighbor id.
    """
    if neighbor_metric == "hf":
        z = _zscore(hf)
    elif neighbor_metric == "sa":
        z = _zscore(hf[:, :3])
    else:
        raise ValueError("neighbor_metric must be 'hf' or 'sa'")
    k = hf.shape[0]
    top = np.full((k, 2), -1, dtype=np.int64)
    if adjacency.size == 0:
        return top
    i, j = adjacency[:, 0], adjacency[:, 1]
    d2 = ((z[i] - z[j]) ** 2).sum(axis=1)
    order = np.lexsort((j, d2, i))
    i_sorted, j_sorted = i[order], j[order]
    firsts = np.flatnonzero(np.diff(i_sorted, prepend=-1))
    top[i_sorted[firsts], 0] = j_sorted[firsts]
    second = firsts + 1
    ok = (second < i_sorted.size) & (i_sorted[np.minimum(second, i_sorted.size - 1)] == i_sorted[firsts])
    top[i_sorted[firsts[ok]], 1] = j_sorted[second[ok]]
    return top


def contextual_features(image, labels, neighbor_metric="hf") -> np.ndarray:
    """(K, 15) stacked center + two ranked-neighbor hybrid features."""
    hf = hybrid_features(image, labels)
    top = rank_neighbors(hf, label_adjacency(labels), neighbor_metric)
    n1 = np.where(top[:, 0] >= 0, top[:, 0], np.arange(hf.shape[0]))
    n2 = np.where(top[:, 1] >= 0, top[:, 1], np.arange(hf.shape[0]))
    return np.concatenate([hf, hf[n1], hf[n2]], axis=1)


def contextual_feature(image, labels, object_id, neighbor_metric="hf") -> np.ndarray:
    """15-dim contextual descriptor of a single object."""
    k = labels.max() + 1
    if not (0 <= object_id < k):
        raise ValueError(f"object {object_id} not present in label map")
    return contextual_features(image, labels, neighbor_metric)[object_id]


def feature_records(image, labels, scale) -> list:
    """CSV-ready rows: object id, scale, and the 15 feature columns."""
    ssc = contextual_features(image, labels)
    return [
        {"object_id": int(i), "scale": int(scale), **{f"f{j}": float(v) for j, v in enumerate(row)}}
        for i, row in enumerate(ssc)
    ]
