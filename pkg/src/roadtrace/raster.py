"""Core raster types and geometry primitives shared by every stage.

Conventions used across the package:

* images are ``uint8`` arrays of shape ``(height, width, 3)`` (RGB),
* binary masks are ``bool`` arrays of shape ``(height, width)``,
* scalar fields are ``float64`` arrays of shape ``(height, width)``,
* all coordinates are ``(row, col)`` with the origin at the top-left.

Perimeters count exposed pixel edges (edges bordering a false pixel or
the image boundary), not boundary pixels, so they scale linearly with
ribbon length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage

FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def as_image(arr) -> np.ndarray:
    """Validate an RGB image array."""
    arr = np.asarray(arr)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise ValueError(f"expected (H, W, 3) uint8 image, got {arr.shape} {arr.dtype}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("image must have positive dimensions")
    return arr


def as_mask(arr) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.ndim != 2 or arr.dtype != np.bool_:
        raise ValueError(f"expected (H, W) bool mask, got {arr.shape} {arr.dtype}")
    return arr


def as_field(arr, unit_interval=False) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected (H, W) scalar field, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("scalar field contains non-finite values")
    if unit_interval and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError("likelihood field must lie in [0, 1]")
    return arr


def load_image(path) -> np.ndarray:
    """Load an 8-bit RGB PNG as a (H, W, 3) uint8 array."""
    with Image.open(path) as im:
        if im.mode != "RGB":
            raise ValueError(f"unsupported image mode {im.mode!r}; expected 8-bit RGB")
        arr = np.asarray(im, dtype=np.uint8)
    return as_image(arr)


def save_image(path, image) -> None:
    Image.fromarray(as_image(image), mode="RGB").save(path, format="PNG")


def load_mask(path) -> np.ndarray:
    """Load an 8-bit grayscale PNG as a bool mask; any nonzero pixel is true."""
    with Image.open(path) as im:
        if im.mode != "L":
            raise ValueError(f"unsupported mask mode {im.mode!r}; expected 8-bit grayscale")
        arr = np.asarray(im)
    return arr > 0


def save_mask(path, mask) -> None:
    mask = as_mask(mask)
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L").save(path, format="PNG")


def save_field_png16(path, field, lo=0.0, hi=1.0) -> None:
    """Save a scalar field as a 16-bit grayscale PNG, linearly mapped from [lo, hi]."""
    field = as_field(field)
    if hi <= lo:
        hi = lo + 1.0
    scaled = np.clip((field - lo) / (hi - lo), 0.0, 1.0)
    Image.fromarray(np.round(scaled * 65535.0).astype(np.uint16), mode="I;16").save(path, format="PNG")


def save_labels_png(path, labels) -> None:
    """Save a label map as a 32-bit integer grayscale PNG."""
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError("label map must be 2-D")
    Image.fromarray(labels.astype(np.int32), mode="I").save(path, format="PNG")


def load_labels_png(path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode != "I":
            raise ValueError(f"unsupported label mode {im.mode!r}; expected 32-bit integer")
        return np.asarray(im, dtype=np.int64)


@dataclass(frozen=True)
class Component:
    """One connected component of a binary mask.

    ``pixels`` is an (N, 2) array of (row, col) coordinates in raster scan
    order; ``perimeter`` counts exposed pixel edges.
    """

    id: int
    pixels: np.ndarray
    area: int
    perimeter: int
    bbox: tuple  # (row0, col0, row1, col1), half-open

    def __post_init__(self):
        if self.area != len(self.pixels) or self.area < 1:
            raise ValueError("component area must equal its pixel count and be >= 1")


_SHIFTS = ((-1, 0), (1, 0), (0, -1), (0, 1))


def exposed_edges(mask) -> np.ndarray:
    """Per-pixel count of edges bordering a false pixel or the image boundary."""
    mask = as_mask(mask)
    h, w = mask.shape
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1:-1, 1:-1] = mask
    count = np.zeros((h, w), dtype=np.int64)
    for dr, dc in _SHIFTS:
        count += mask & ~padded[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w]
    return count


def connected_components(mask, connectivity=8) -> list:
    """Split a mask into maximal connected components.

    Component ids follow the raster order of each component's first pixel,
    starting at 0. Returns an empty list for an empty mask.
    """
    mask = as_mask(mask)
    if connectivity == 4:
        structure = FOUR_CONNECTED
    elif connectivity == 8:
        structure = EIGHT_CONNECTED
    else:
        raise ValueError("connectivity must be 4 or 8")
    labels, n = ndimage.label(mask, structure=structure)
    if n == 0:
        return []
    edges = exposed_edges(mask)
    flat = labels.ravel()
    on = np.flatnonzero(flat)
    order = on[np.argsort(flat[on], kind="stable")]  # grouped by label, raster order kept
    rows, cols = np.unravel_index(order, mask.shape)
    counts = np.bincount(flat[on])[1:]
    perims = np.bincount(flat[on], weights=edges.ravel()[on]).astype(np.int64)[1:]
    bounds = np.concatenate([[0], np.cumsum(counts)])
    pieces = []
    for i in range(n):
        px = np.stack([rows[bounds[i] : bounds[i + 1]], cols[bounds[i] : bounds[i + 1]]], axis=1)
        pieces.append((px, int(counts[i]), int(perims[i])))
    # normalize ids by raster order of each component's first pixel
    pieces.sort(key=lambda p: (int(p[0][0, 0]), int(p[0][0, 1])))
    comps = []
    for i, (px, area, perim) in enumerate(pieces):
        bbox = (int(px[:, 0].min()), int(px[:, 1].min()), int(px[:, 0].max()) + 1, int(px[:, 1].max()) + 1)
        comps.append(Component(id=i, pixels=px, area=area, perimeter=perim, bbox=bbox))
    return comps


def components_to_records(components) -> list:
    """JSON-ready summaries of a component list."""
    return [
        {"id": c.id, "area": c.area, "perimeter": c.perimeter, "bbox": list(c.bbox)}
        for c in components
    ]


def line_pixels(p0, p1) -> np.ndarray:
    """8-connected digital straight segment between two pixels, inclusive.

    The pixel set is symmetric in the endpoints: the segment is always
    rasterized from the lexicographically smaller endpoint.
    """
    a = (int(p0[0]), int(p0[1]))
    b = (int(p1[0]), int(p1[1]))
    flipped = b < a
    if flipped:
        a, b = b, a
    r0, c0 = a
    r1, c1 = b
    dr = abs(r1 - r0)
    dc = abs(c1 - c0)
    sr = 1 if r1 >= r0 else -1
    sc = 1 if c1 >= c0 else -1
    n = max(dr, dc) + 1
    out = np.empty((n, 2), dtype=np.int64)
    err = dr - dc
    r, c = r0, c0
    for i in range(n):
        out[i] = (r, c)
        e2 = 2 * err
        if e2 > -dc:
            err -= dc
            r += sr
        if e2 < dr:
            err += dr
            c += sc
    return out[::-1] if flipped else out


def draw_segment(mask, p0, p1) -> np.ndarray:
    """Return a copy of the mask with a digital straight segment set true."""
    mask = as_mask(mask)
    h, w = mask.shape
    for p in (p0, p1):
        if not (0 <= int(p[0]) < h and 0 <= int(p[1]) < w):
            raise ValueError(f"endpoint {tuple(p)} out of bounds for {h}x{w} mask")
    out = mask.copy()
    px = line_pixels(p0, p1)
    out[px[:, 0], px[:, 1]] = True
    return out
