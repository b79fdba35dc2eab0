"""SLIC over-segmentation at one or more scales.

The k-means core comes from scikit-image (CIELAB color distance, grid
seeding). Connectivity enforcement is done here instead of scikit-image's,
which merges so aggressively on noisy imagery that the superpixel count
collapses far below the requested k. The rule applied per raw label:

* the largest 4-connected fragment keeps the label,
* orphan fragments of at least a quarter of the mean superpixel area
  become superpixels of their own,
* smaller orphans are merged into the largest adjacent superpixel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from skimage import measure
from skimage.segmentation import slic as _skimage_slic

from . import raster


@dataclass(frozen=True)
class SlicParams:
    k: int
    compactness: float = 10.0
    max_iterations: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.compactness <= 0:
            raise ValueError("compactness must be > 0")


def slic_segment(image, params: SlicParams) -> np.ndarray:
    """Over-segment an RGB image into ~k superpixels.

    Returns an int64 label map with dense ids starting at 0, each label
    4-connected. Deterministic: seeding is a regular grid, so the result
    depends only on the image and params.
    """
    image = raster.as_image(image)
    h, w = image.shape[:2]
    if params.k > h * w:
        raise ValueError(f"k={params.k} exceeds pixel count {h * w}")
    raw = _skimage_slic(
        image,
        n_segments=params.k,
        compactness=params.compactness,
        max_num_iter=params.max_iterations,
        start_label=0,
        enforce_connectivity=False,
        channel_axis=-1,
    )
    labels = _enforce_connectivity(raw.astype(np.int64), params.k)
    return _relabel_raster_order(labels)


def multiscale_segment(image, ks, compactness=10.0, max_iterations=10, seed=0) -> list:
    """One label map per requested superpixel count."""
    ks = list(ks)
    if not ks:
        raise ValueError("ks must be nonempty")
    return [
        slic_segment(image, SlicParams(k=k, compactness=compactness, max_iterations=max_iterations, seed=seed))
        for k in ks
    ]


def _fragment_table(labels):
    """Connected fragments of a label partition (4-connectivity).

    Returns (fragment map 1..nf, sizes[nf+1], original label per fragment).
    """
    frags = measure.label(labels + 1, connectivity=1)  # shift: 0 would be background
    nf = int(frags.max())
    flat = frags.ravel()
    sizes = np.bincount(flat, minlength=nf + 1)
    first = np.full(nf + 1, flat.size, dtype=np.int64)
    np.minimum.at(first, flat, np.arange(flat.size))
    orig = np.full(nf + 1, -1, dtype=np.int64)
    orig[1:] = labels.ravel()[first[1:]]
    return frags, sizes, orig


def _fragment_adjacency(frags):
    """Unique ordered pairs of 4-adjacent distinct fragment ids."""
    pairs = []
    for a, b in (((slice(None, -1), slice(None)), (slice(1, None), slice(None))),
                 ((slice(None), slice(None, -1)), (slice(None), slice(1, None)))):
        fa = frags[a].ravel()
        fb = frags[b].ravel()
        diff = fa != fb
        pairs.append(np.stack([fa[diff], fb[diff]], axis=1))
    pairs = np.concatenate(pairs)
    return np.concatenate([pairs, pairs[:, ::-1]])


def _enforce_connectivity(labels, k):
    """Split disconnected labels and absorb small orphan fragments."""
    h, w = labels.shape
    frags, sizes, orig = _fragment_table(labels)
    nf = sizes.size - 1
    if nf == labels.max() + 1:
        return labels  # already one fragment per label

    # largest fragment per original label keeps it (ties: earlier fragment id)
    order = np.lexsort((np.arange(nf + 1), -sizes, orig))
    orig_sorted = orig[order]
    firsts = np.flatnonzero(np.diff(orig_sorted, prepend=np.int64(-2)))
    keep = np.zeros(nf + 1, dtype=bool)
    keep[order[firsts[orig_sorted[firsts] >= 0]]] = True

    min_size = max(1.0, (h * w / k) / 4.0)
    new_label_frags = np.flatnonzero(~keep & (sizes >= min_size) & (orig >= 0))
    group = np.full(nf + 1, -1, dtype=np.int64)
    group[keep] = orig[keep]
    next_id = int(labels.max()) + 1
    for f in new_label_frags:
        group[f] = next_id
        next_id += 1

    group_sizes = np.zeros(next_id, dtype=np.int64)
    assigned = group >= 0
    np.add.at(group_sizes, group[assigned], sizes[assigned])

    pairs = _fragment_adjacency(frags)
    # iteratively attach orphan fragments to the largest adjacent group
    while True:
        orphan = np.flatnonzero(group < 0)
        if orphan.size == 0:
            break
        cand = pairs[(group[pairs[:, 0]] < 0) & (group[pairs[:, 1]] >= 0)]
        if cand.size == 0:
            # isolated orphans (no assigned neighbor anywhere): promote them
            for f in orphan:
                group[f] = next_id
                next_id += 1
                group_sizes = np.append(group_sizes, sizes[f])
            break
        g = group[cand[:, 1]]
        # per orphan fragment pick the largest adjacent group, ties to smaller id
        sel = np.lexsort((g, -group_sizes[g], cand[:, 0]))
        cand, g = cand[sel], g[sel]
        firsts = np.flatnonzero(np.diff(cand[:, 0], prepend=-1))
        chosen_frag = cand[firsts, 0]
        chosen_group = g[firsts]
        group[chosen_frag] = chosen_group
        np.add.at(group_sizes, chosen_group, sizes[chosen_frag])

    return group[frags]


def _relabel_raster_order(labels):
    """Renumber labels densely by first raster occurrence."""
    flat = labels.ravel()
    _, first_idx = np.unique(flat, return_index=True)
    appearance = flat[np.sort(first_idx)]  # label values in raster-appearance order
    remap = np.empty(flat.max() + 1, dtype=np.int64)
    remap[appearance] = np.arange(appearance.size)
    return remap[labels]


def boundary_overlay(image, labels, color=(255, 64, 64)) -> np.ndarray:
    """Paint superpixel boundaries onto a copy of the image, for inspection."""
    image = raster.as_image(image)
    edge = np.zeros(labels.shape, dtype=bool)
    edge[:-1, :] |= labels[:-1, :] != labels[1:, :]
    edge[:, :-1] |= labels[:, :-1] != labels[:, 1:]
    out = image.copy()
    out[edge] = color
    return out
