"""Synthetic road scenes with exact ground truth.

Scenes are built from polyline roads of known width on a flat background,
optionally with occluding rectangles (tree/car stand-ins painted over the
road) and road-colored distractor blobs (building/parking-lot stand-ins).
The rendered ground truth ignores occluders, so occluded scenes exercise
gap bridging in the centerline stages.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import raster


@dataclass(frozen=True)
class Road:
    polyline: tuple          # ((r, c), ...) vertices, in bounds
    width: float             # full width in pixels, >= 3


@dataclass(frozen=True)
class Occluder:
    rect: tuple              # (row0, col0, row1, col1), half-open
    color: tuple = (30, 60, 26)


@dataclass(frozen=True)
class Distractor:
    kind: str                # "disk" or "rect"
    center: tuple            # (row, col)
    size: tuple              # disk: (radius,); rect: (height, width)


@dataclass(frozen=True)
class SceneSpec:
    height: int
    width: int
    roads: tuple
    road_color: tuple = (96, 93, 99)
    bg_color: tuple = (62, 108, 58)
    noise_sigma: float = 0.0
    occluders: tuple = ()
    distractors: tuple = ()
    seed: int = 0

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError("canvas must have positive dimensions")
        for road in self.roads:
            if road.width < 3:
                raise ValueError("road width must be >= 3 px")
            for r, c in road.polyline:
                if not (0 <= r < self.height and 0 <= c < self.width):
                    raise ValueError(f"polyline vertex {(r, c)} out of bounds")


def _polyline_mask(spec, road):
    mask = np.zeros((spec.height, spec.width), dtype=bool)
    pts = [(int(round(r)), int(round(c))) for r, c in road.polyline]
    if len(pts) == 1:
        mask[pts[0]] = True
        return mask
    for a, b in zip(pts[:-1], pts[1:]):
        px = raster.line_pixels(a, b)
        mask[px[:, 0], px[:, 1]] = True
    return mask


def render(spec: SceneSpec):
    """Render a scene spec into (image, road_ref, centerline_ref).

    road_ref is the union of each polyline dilated to its road width
    (pixels within width/2 of the centerline); centerline_ref is the
    1-px polyline raster. Both ignore occluders. Rendering is
    deterministic for a fixed spec (noise comes from spec.seed).
    """
    h, w = spec.height, spec.width
    road_ref = np.zeros((h, w), dtype=bool)
    centerline_ref = np.zeros((h, w), dtype=bool)
    for road in spec.roads:
        line = _polyline_mask(spec, road)
        centerline_ref |= line
        dist = ndimage.distance_transform_edt(~line)
        road_ref |= dist <= road.width / 2.0

    image = np.empty((h, w, 3), dtype=np.float64)
    image[:] = spec.bg_color
    image[road_ref] = spec.road_color

    for d in spec.distractors:
        rr, cc = np.mgrid[0:h, 0:w]
        if d.kind == "disk":
            blob = (rr - d.center[0]) ** 2 + (cc - d.center[1]) ** 2 <= d.size[0] ** 2
        elif d.kind == "rect":
            hh, ww = d.size
            blob = (
                (rr >= d.center[0] - hh / 2) & (rr < d.center[0] + hh / 2)
                & (cc >= d.center[1] - ww / 2) & (cc < d.center[1] + ww / 2)
            )
        else:
            raise ValueError(f"unknown distractor kind {d.kind!r}")
        image[blob] = spec.road_color

    for occ in spec.occluders:
        r0, c0, r1, c1 = occ.rect
        if not (0 <= r0 <= r1 <= h and 0 <= c0 <= c1 <= w):
            raise ValueError(f"occluder rect {occ.rect} out of bounds")
        image[r0:r1, c0:c1] = occ.color

    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed)
        image = image + rng.normal(0.0, spec.noise_sigma, image.shape)

    return np.clip(np.round(image), 0, 255).astype(np.uint8), road_ref, centerline_ref


def scene_to_json(spec: SceneSpec, path) -> None:
    doc = {
        "height": spec.height,
        "width": spec.width,
        "roads": [{"polyline": [list(p) for p in r.polyline], "width": r.width} for r in spec.roads],
        "road_color": list(spec.road_color),
        "bg_color": list(spec.bg_color),
        "noise_sigma": spec.noise_sigma,
        "occluders": [{"rect": list(o.rect), "color": list(o.color)} for o in spec.occluders],
        "distractors": [{"kind": d.kind, "center": list(d.center), "size": list(d.size)} for d in spec.distractors],
        "seed": spec.seed,
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)


def scene_from_json(path) -> SceneSpec:
    with open(path) as f:
        doc = json.load(f)
    return SceneSpec(
        height=int(doc["height"]),
        width=int(doc["width"]),
        roads=tuple(Road(polyline=tuple(tuple(p) for p in r["polyline"]), width=float(r["width"])) for r in doc["roads"]),
        road_color=tuple(doc.get("road_color", (96, 93, 99))),
        bg_color=tuple(doc.get("bg_color", (62, 108, 58))),
        noise_sigma=float(doc.get("noise_sigma", 0.0)),
        occluders=tuple(Occluder(rect=tuple(o["rect"]), color=tuple(o.get("color", (30, 60, 26)))) for o in doc.get("occluders", ())),
        distractors=tuple(Distractor(kind=d["kind"], center=tuple(d["center"]), size=tuple(d["size"])) for d in doc.get("distractors", ())),
        seed=int(doc.get("seed", 0)),
    )
