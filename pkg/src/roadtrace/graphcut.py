"""Binary road/nonroad labeling by exact min-cut energy minimization.

The energy is a regional term (negative log of the clamped per-pixel road
or nonroad likelihood) plus a smoothness-weighted boundary term summed
over unordered 8-neighbor pairs with different labels, each pair weighted
by 1 / (RGB distance + epsilon).

The minimizer builds the standard two-terminal graph (t-link capacities
are the regional costs, n-links the pair weights) and solves max-flow
with scipy's Dinic implementation, which needs integer capacities: costs
are scaled so the largest edge maps to 2^31 and rounded. The returned
labeling is the exact optimum of the rounded energy; the rounding gap is
bounded by (#edges)/scale, far below the energy differences of distinct
labelings in practice (validated against exhaustive enumeration in the
test suite).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, maximum_flow

from . import raster

ROAD = "road"
NONROAD = "nonroad"

_NEIGHBOR_SHIFTS = ((0, 1), (1, 0), (1, 1), (1, -1))  # unordered 8-neighborhood


@dataclass(frozen=True)
class GcParams:
    smoothness_weight: float = 0.8
    epsilon: float = 0.001
    likelihood_clamp: float = 0.01

    def __post_init__(self):
        if self.smoothness_weight < 0 or not np.isfinite(self.smoothness_weight):
            raise ValueError("smoothness_weight must be finite and >= 0")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if not (0 < self.likelihood_clamp < 0.5):
            raise ValueError("likelihood_clamp must lie in (0, 0.5)")


@dataclass(frozen=True)
class EnergyBreakdown:
    regional: float
    boundary: float
    total: float


def regional_cost_fields(likelihood, params: GcParams):
    """Per-pixel costs of labeling road / nonroad: -log of the clamped likelihood."""
    p = np.clip(raster.as_field(likelihood, unit_interval=True),
                params.likelihood_clamp, 1.0 - params.likelihood_clamp)
    return -np.log(p), -np.log(1.0 - p)


def regional_cost(likelihood, label, pixel, params: GcParams = GcParams()) -> float:
    """Penalty of assigning one pixel the given label."""
    road_cost, nonroad_cost = regional_cost_fields(likelihood, params)
    r, c = pixel
    if label == ROAD:
        return float(road_cost[r, c])
    if label == NONROAD:
        return float(nonroad_cost[r, c])
    raise ValueError(f"label must be {ROAD!r} or {NONROAD!r}")


def _pair_weights(image, params: GcParams):
    """1/(RGB distance + eps) for each neighbor shift, as (weight, idx_a, idx_b)."""
    image = raster.as_image(image).astype(np.float64)
    h, w = image.shape[:2]
    idx = np.arange(h * w).reshape(h, w)
    out = []
    for dr, dc in _NEIGHBOR_SHIFTS:
        a = (slice(max(0, -dr), h - max(0, dr) or None), slice(max(0, -dc), w - max(0, dc) or None))
        b = (slice(max(0, dr), h + min(0, dr) or None), slice(max(0, dc), w + min(0, dc) or None))
        dist = np.sqrt(((image[a] - image[b]) ** 2).sum(axis=-1))
        out.append((1.0 / (dist + params.epsilon), idx[a], idx[b]))
    return out


def boundary_cost(image, labeling, params: GcParams = GcParams()) -> float:
    """Sum of pair weights over unordered 8-neighbor pairs with different labels."""
    labeling = raster.as_mask(labeling)
    total = 0.0
    for weight, ia, ib in _pair_weights(image, params):
        la = labeling.ravel()[ia.ravel()]
        lb = labeling.ravel()[ib.ravel()]
        total += weight.ravel()[la != lb].sum()
    return float(total)


def labeling_energy(image, likelihood, labeling, params: GcParams = GcParams()) -> EnergyBreakdown:
    """Energy of an arbitrary labeling (road = true)."""
    road_cost, nonroad_cost = regional_cost_fields(likelihood, params)
    labeling = raster.as_mask(labeling)
    regional = float(np.where(labeling, road_cost, nonroad_cost).sum())
    boundary = boundary_cost(image, labeling, params)
    return EnergyBreakdown(regional=regional, boundary=boundary,
                           total=regional + params.smoothness_weight * boundary)


def min_cut_segment(image, likelihood, params: GcParams = GcParams()):
    """Globally optimal binary labeling of the regional+boundary energy.

    Returns (road mask, energy breakdown recomputed from the mask).
    """
    image = raster.as_image(image)
    road_cost, nonroad_cost = regional_cost_fields(likelihood, params)
    h, w = road_cost.shape
    n = h * w

    # one-sided t-links: subtracting the per-pixel minimum shrinks the flow
    diff = (nonroad_cost - road_cost).ravel()
    src_cap = np.maximum(diff, 0.0)   # paid when pixel ends nonroad
    snk_cap = np.maximum(-diff, 0.0)  # paid when pixel ends road

    rows = [np.full(n, n), np.arange(n)]
    cols = [np.arange(n), np.full(n, n + 1)]
    caps = [src_cap, snk_cap]
    max_cost = max(src_cap.max(initial=0.0), snk_cap.max(initial=0.0))
    if params.smoothness_weight > 0:
        for weight, ia, ib in _pair_weights(image, params):
            wcap = params.smoothness_weight * weight.ravel()
            ia, ib = ia.ravel(), ib.ravel()
            rows.extend([ia, ib])
            cols.extend([ib, ia])
            caps.extend([wcap, wcap])
            max_cost = max(max_cost, wcap.max(initial=0.0))

    scale = (2.0 ** 31) / max(max_cost, 1e-30)
    cap_int = np.rint(np.concatenate(caps) * scale).astype(np.int64)
    graph = csr_matrix((cap_int, (np.concatenate(rows), np.concatenate(cols))), shape=(n + 2, n + 2))
    result = maximum_flow(graph, n, n + 1)

    residual = graph - result.flow
    residual.data = (residual.data > 0).astype(np.int64)
    residual.eliminate_zeros()
    reached = breadth_first_order(residual, n, directed=True, return_predecessors=False)
    mask = np.zeros(n + 2, dtype=bool)
    mask[reached] = True
    road = mask[:n].reshape(h, w)
    return road, labeling_energy(image, likelihood, road, params)
