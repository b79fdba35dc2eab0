"""Removal of road-like blobs via area and elongation tests.

Each 8-connected component is matched with its second-moments ellipse
(axes = 4 * sqrt of the covariance eigenvalues of the pixel coordinates,
with a 1/12 diagonal term for the unit-pixel footprint, so a solid w x h
rectangle gets exactly the w/h axis ratio). A component survives when its
area reaches ``min_area`` and the ellipse length/width ratio reaches
``lfi_threshold``. The oriented-bounding-box ratio is exposed alongside
for comparison: on bent roads it saturates toward 1 much faster than the
ellipse ratio, which is why the filter uses the ellipse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import features, raster


@dataclass(frozen=True)
class ShapeParams:
    min_area: int = 300
    lfi_threshold: float = 3.0

    def __post_init__(self):
        if self.min_area < 0:
            raise ValueError("min_area must be >= 0")
        if self.lfi_threshold < 1:
            raise ValueError("lfi_threshold must be >= 1")


@dataclass(frozen=True)
class EquivalentEllipse:
    center: tuple       # (row, col)
    major_len: float
    minor_len: float
    orientation: float  # radians of the major axis, measured from the row axis

    def __post_init__(self):
        if not (self.major_len >= self.minor_len > 0):
            raise ValueError("ellipse axes must satisfy major >= minor > 0")


def _pixel_covariance(points):
    pts = np.asarray(points, dtype=np.float64)
    cov = np.cov(pts.T, bias=True).reshape(2, 2) if len(pts) > 1 else np.zeros((2, 2))
    return cov + np.eye(2) / 12.0  # unit-square pixel footprint


def equivalent_ellipse(component) -> EquivalentEllipse:
    """Second-moments ellipse of a component's pixels."""
    pts = np.asarray(component.pixels, dtype=np.float64)
    cov = _pixel_covariance(pts)
    evals, evecs = np.linalg.eigh(cov)
    minor, major = 4.0 * np.sqrt(np.maximum(evals, 1e-300))
    axis = evecs[:, 1]  # eigenvector of the larger eigenvalue, (row, col)
    center = tuple(pts.mean(axis=0))
    return EquivalentEllipse(
        center=center,
        major_len=float(major),
        minor_len=float(max(minor, 1.0)),
        orientation=float(np.arctan2(axis[1], axis[0]) % np.pi),
    )


def lfi_ellipse(component) -> float:
    """Elongation as major/minor axis of the equivalent ellipse (>= 1)."""
    ell = equivalent_ellipse(component)
    return ell.major_len / ell.minor_len


def lfi_box(component) -> float:
    """Elongation as length/width of the oriented bounding rectangle."""
    return features.aspect_ratio(component)


def filter_road_like(mask, params: ShapeParams = ShapeParams()) -> np.ndarray:
    """Keep only components that are large and elongated enough to be road."""
    mask = raster.as_mask(mask)
    out = np.zeros_like(mask)
    for comp in raster.connected_components(mask, connectivity=8):
        if comp.area >= params.min_area and lfi_ellipse(comp) >= params.lfi_threshold:
            out[comp.pixels[:, 0], comp.pixels[:, 1]] = True
    return out


def component_diagnostics(mask, params: ShapeParams = ShapeParams()) -> list:
    """Per-component shape measurements and the keep decision, CSV-ready."""
    rows = []
    for comp in raster.connected_components(mask, connectivity=8):
        ellipse_ratio = lfi_ellipse(comp)
        rows.append({
            "id": comp.id,
            "area": comp.area,
            "lfi_box": float(lfi_box(comp)),
            "lfi_ellipse": float(ellipse_ratio),
            "kept": bool(comp.area >= params.min_area and ellipse_ratio >= params.lfi_threshold),
        })
    return rows
