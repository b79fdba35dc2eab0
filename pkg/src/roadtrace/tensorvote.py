"""2-D tensor voting over a binary token mask.

True pixels are encoded as unit ball tensors. A sparse token-to-token
pass accumulates distance-decayed ball votes, whose eigenstructure gives
every token an orientation estimate (the dominant eigenvector is the
local curve normal). A dense pass then casts stick votes from each token
to every pixel within the voting neighborhood: the vote received is a
stick tensor along the normal of the osculating circle through voter and
receiver, attenuated by

    exp(-(s^2 + c * kappa^2) / sigma^2)

with arc length s = l*theta/(2 sin theta) and curvature
kappa = 2 sin(theta)/l. Votes beyond the aperture angle (pi/4 by
default) are zero, and the neighborhood is truncated at radius 3*sigma
where the decay falls below e^-9. Receivers accumulate votes by plain
tensor addition, so the result is independent of voting order.

Tensors are stored as (sxx, sxy, syy) with x denoting the row axis and
y the column axis; eigenvectors are (row, col) unit vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.signal import oaconvolve

from . import raster

_ISO_STICK_FLOOR = 1e-6  # tokens below this stick saliency vote isotropically


def compute_c(sigma) -> float:
    """Curvature-decay constant as a function of the voting scale."""
    if sigma < 1:
        raise ValueError("sigma must be >= 1")
    return -16.0 * (sigma - 1.0) * math.log(0.1) / math.pi**2


@dataclass(frozen=True)
class VoteParams:
    sigma: float
    c: float | None = None            # override for the curvature decay constant
    max_angle: float = math.pi / 4.0

    def __post_init__(self):
        if self.sigma < 1:
            raise ValueError("sigma must be >= 1")
        if not (0 < self.max_angle < math.pi / 2):
            raise ValueError("max_angle must lie in (0, pi/2)")

    @property
    def curvature_decay(self) -> float:
        return compute_c(self.sigma) if self.c is None else self.c

    @property
    def radius(self) -> int:
        return int(math.ceil(3.0 * self.sigma))


@dataclass(frozen=True)
class Tensor2:
    """Symmetric 2x2 tensor; x is the row axis, y the column axis."""

    sxx: float
    sxy: float
    syy: float

    def as_matrix(self):
        return np.array([[self.sxx, self.sxy], [self.sxy, self.syy]])

    def __add__(self, other):
        return Tensor2(self.sxx + other.sxx, self.sxy + other.sxy, self.syy + other.syy)


@dataclass(frozen=True)
class TensorDecomp:
    lambda1: float
    lambda2: float
    e1: np.ndarray  # (row, col) unit eigenvector of lambda1
    e2: np.ndarray

    @property
    def stick_saliency(self):
        return self.lambda1 - self.lambda2

    @property
    def ball_saliency(self):
        return self.lambda2


def decay(l, theta, params: VoteParams) -> float:
    """Vote attenuation for a receiver at distance l and angle theta.

    theta is measured between the voter tangent and the voter-receiver
    line; votes outside the aperture return 0.
    """
    if l <= 0:
        raise ValueError("distance must be positive")
    theta = abs(float(theta))
    if theta > params.max_angle:
        return 0.0
    sigma2 = params.sigma**2
    if theta < 1e-15:
        s2, kappa2 = l * l, 0.0
    else:
        sin_t = math.sin(theta)
        s = l * theta / (2.0 * sin_t)
        kappa = 2.0 * sin_t / l
        s2, kappa2 = s * s, kappa * kappa
    return math.exp(-(s2 + params.curvature_decay * kappa2) / sigma2)


def cast_stick_vote(voter_pos, voter_normal, receiver_pos, params: VoteParams) -> Tensor2:
    """Second-order stick vote cast by an oriented voter at one receiver.

    ``voter_normal`` is the voter's curve normal (row, col). The returned
    tensor points along the osculating-circle normal at the receiver; it
    is the zero tensor outside the aperture.
    """
    dr = float(receiver_pos[0]) - float(voter_pos[0])
    dc = float(receiver_pos[1]) - float(voter_pos[1])
    l2 = dr * dr + dc * dc
    if l2 == 0:
        raise ValueError("receiver must differ from voter")
    nr, nc = float(voter_normal[0]), float(voter_normal[1])
    norm = math.hypot(nr, nc)
    nr, nc = nr / norm, nc / norm
    tr, tc = -nc, nr  # tangent, 90 deg from the normal
    u = dr * tr + dc * tc
    v = dr * nr + dc * nc
    if u < 0:
        u, v = -u, -v
    if abs(v) > u * math.tan(params.max_angle):
        return Tensor2(0.0, 0.0, 0.0)
    theta = math.atan2(v, u)
    w = decay(math.sqrt(l2), theta, params)
    sin2t = 2.0 * u * v / l2
    cos2t = (u * u - v * v) / l2
    mr = -sin2t * tr + cos2t * nr
    mc = -sin2t * tc + cos2t * nc
    return Tensor2(w * mr * mr, w * mr * mc, w * mc * mc)


def ball_vote_kernel(params: VoteParams) -> np.ndarray:
    """Vote field of one unoriented token, as a (2R+1, 2R+1, 3) kernel.

    Each offset receives a stick tensor perpendicular to the connecting
    line with weight exp(-l^2/sigma^2); the center holds the token's own
    unit ball encoding.
    """
    r = params.radius
    dr, dc = np.mgrid[-r : r + 1, -r : r + 1].astype(np.float64)
    l2 = dr * dr + dc * dc
    inside = (l2 > 0) & (l2 <= r * r)
    w = np.where(inside, np.exp(-l2 / params.sigma**2), 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        krr = np.where(inside, w * dc * dc / l2, 0.0)
        krc = np.where(inside, -w * dr * dc / l2, 0.0)
        kcc = np.where(inside, w * dr * dr / l2, 0.0)
    kernel = np.stack([krr, krc, kcc], axis=-1)
    kernel[r, r] = (1.0, 0.0, 1.0)
    return kernel


def sparse_vote(mask, params: VoteParams) -> np.ndarray:
    """Token-to-token ball voting pass (identical tokens make it a convolution)."""
    mask = raster.as_mask(mask)
    kernel = ball_vote_kernel(params)
    src = mask.astype(np.float64)
    out = np.empty(mask.shape + (3,))
    for ch in range(3):
        out[..., ch] = oaconvolve(src, kernel[..., ch], mode="same")
    return out


def decompose_field(field):
    """Eigendecomposition of a tensor field.

    Returns (lambda1, lambda2, e1) with lambda1 >= lambda2 >= 0 and e1 the
    (row, col) unit eigenvector of lambda1 (deterministic sign, row
    component nonnegative).
    """
    a, b, c = field[..., 0], field[..., 1], field[..., 2]
    half_tr = 0.5 * (a + c)
    disc = np.sqrt(np.maximum(0.25 * (a - c) ** 2 + b * b, 0.0))
    lambda1 = half_tr + disc
    lambda2 = np.maximum(half_tr - disc, 0.0)
    lambda2 = np.minimum(lambda2, lambda1)

    # eigenvector of lambda1: pick the better-conditioned formula per pixel
    use_first = np.abs(lambda1 - a) >= np.abs(lambda1 - c)
    er = np.where(use_first, b, lambda1 - c)
    ec = np.where(use_first, lambda1 - a, b)
    norm = np.hypot(er, ec)
    degenerate = norm < 1e-300
    er = np.where(degenerate, 1.0, er / np.where(degenerate, 1.0, norm))
    ec = np.where(degenerate, 0.0, ec / np.where(degenerate, 1.0, norm))
    flip = (er < 0) | ((er == 0) & (ec < 0))
    er, ec = np.where(flip, -er, er), np.where(flip, -ec, ec)
    return lambda1, lambda2, np.stack([er, ec], axis=-1)


def decompose(t: Tensor2) -> TensorDecomp:
    """Closed-form decomposition of one tensor."""
    field = np.array([[[t.sxx, t.sxy, t.syy]]])
    l1, l2, e1 = decompose_field(field)
    e1 = e1[0, 0]
    e2 = np.array([-e1[1], e1[0]])
    return TensorDecomp(lambda1=float(l1[0, 0]), lambda2=float(l2[0, 0]), e1=e1, e2=e2)


def token_orientations(sparse_field, mask):
    """Normal estimates for every token from the sparse pass.

    Returns (normals (N, 2), isotropic flags (N,)) in the raster order of
    the token pixels; tokens with negligible stick saliency are flagged
    isotropic and given an arbitrary unit normal.
    """
    l1, l2, e1 = decompose_field(sparse_field)
    rows, cols = np.nonzero(mask)
    stick = (l1 - l2)[rows, cols]
    normals = e1[rows, cols]
    iso = stick < _ISO_STICK_FLOOR
    return normals, iso


@njit(cache=True)
def _dense_vote_kernel(tok_r, tok_c, nrm_r, nrm_c, iso, off_r, off_c, off_l,
                       sigma, cdecay, tan_max, out):  # pragma: no cover - compiled
    h, w = out.shape[0], out.shape[1]
    sig2 = sigma * sigma
    for t in range(tok_r.size):
        r0 = tok_r[t]
        c0 = tok_c[t]
        nr = nrm_r[t]
        nc = nrm_c[t]
        tr = -nc
        tc = nr
        isotropic = iso[t]
        for i in range(off_r.size):
            rr = r0 + off_r[i]
            cc = c0 + off_c[i]
            if rr < 0 or rr >= h or cc < 0 or cc >= w:
                continue
            dr = float(off_r[i])
            dc = float(off_c[i])
            l = off_l[i]
            l2 = l * l
            if isotropic:
                wgt = math.exp(-l2 / sig2)
                mr = -dc / l
                mc = dr / l
            else:
                u = dr * tr + dc * tc
                v = dr * nr + dc * nc
                if u < 0:
                    u = -u
                    v = -v
                av = abs(v)
                if av > u * tan_max:
                    continue
                if av < 1e-12:
                    s2 = l2
                    kap2 = 0.0
                else:
                    theta = math.atan2(av, u)
                    s = theta * l2 / (2.0 * av)
                    s2 = s * s
                    kap = 2.0 * av / l2
                    kap2 = kap * kap
                wgt = math.exp(-(s2 + cdecay * kap2) / sig2)
                inv = 1.0 / l2
                sin2t = 2.0 * u * v * inv
                cos2t = (u * u - v * v) * inv
                mr = -sin2t * tr + cos2t * nr
                mc = -sin2t * tc + cos2t * nc
            out[rr, cc, 0] += wgt * mr * mr
            out[rr, cc, 1] += wgt * mr * mc
            out[rr, cc, 2] += wgt * mc * mc


def _neighborhood_offsets(radius):
    dr, dc = np.mgrid[-radius : radius + 1, -radius : radius + 1]
    l = np.hypot(dr, dc)
    inside = (l > 0) & (l <= radius)
    return dr[inside].astype(np.int64), dc[inside].astype(np.int64), l[inside]


def dense_vote(mask, normals, iso, params: VoteParams) -> np.ndarray:
    """Stick-vote accumulation from oriented tokens to all nearby pixels."""
    mask = raster.as_mask(mask)
    rows, cols = np.nonzero(mask)
    out = np.zeros(mask.shape + (3,))
    if rows.size == 0:
        return out
    off_r, off_c, off_l = _neighborhood_offsets(params.radius)
    _dense_vote_kernel(
        rows.astype(np.int64), cols.astype(np.int64),
        np.ascontiguousarray(normals[:, 0]), np.ascontiguousarray(normals[:, 1]),
        iso.astype(np.bool_), off_r, off_c, off_l,
        float(params.sigma), float(params.curvature_decay),
        math.tan(params.max_angle), out,
    )
    return out


def sparse_then_dense_vote(mask, params: VoteParams) -> np.ndarray:
    """Full voting pipeline: encode tokens, estimate orientations, vote densely."""
    mask = raster.as_mask(mask)
    if not mask.any():
        return np.zeros(mask.shape + (3,))
    sparse = sparse_vote(mask, params)
    normals, iso = token_orientations(sparse, mask)
    return dense_vote(mask, normals, iso, params)


@dataclass(frozen=True)
class ClassifyThresholds:
    stick_floor_frac: float = 0.05
    ball_floor_frac: float = 0.2
    ball_ratio: float = 0.6


def classify_points(field, mask, thresholds: ClassifyThresholds = ClassifyThresholds()):
    """Split pixels into curve and junction evidence by saliency.

    Curve pixels have dominant stick saliency above a floor relative to
    the field maximum; junction pixels have ball saliency both above its
    floor and comparable to lambda1. Everything else is an outlier.
    Classification covers the full field: junctions can emerge in gaps of
    the token mask.
    """
    if mask is not None and raster.as_mask(mask).shape != field.shape[:2]:
        raise ValueError("mask and field shapes differ")
    l1, l2, _ = decompose_field(field)
    stick = l1 - l2
    ball = l2
    stick_floor = thresholds.stick_floor_frac * stick.max()
    ball_floor = thresholds.ball_floor_frac * ball.max()
    curve = (stick > ball) & (stick >= stick_floor) & (stick > 0)
    junction = (ball >= ball_floor) & (ball >= thresholds.ball_ratio * l1) & (ball > 0)
    return curve, junction


def saliency_maps(field):
    """(stick, ball, e1) arrays of a tensor field."""
    l1, l2, e1 = decompose_field(field)
    return l1 - l2, l2, e1
