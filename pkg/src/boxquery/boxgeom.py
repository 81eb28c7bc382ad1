"""
Hard and Gumbel box geometry.

All functions broadcast over leading axes: a :class:`BoxTensor` holds
``mins`` and ``maxs`` arrays of shape ``(..., d)`` and volumes reduce over the
last axis.  The Gumbel versions are smooth surrogates; functions suffixed
``_grad`` return analytic partial derivatives alongside the value.

Temperatures: ``beta`` is the Gumbel scale used for intersections and
membership, ``tau`` is the softplus temperature of the volume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

EPS = 1e-6

# below this x/tau, log(log1p(exp(t))) == t to within 1e-13
_LOG_SOFTPLUS_TAIL = -30.0


@dataclass(frozen=True)
class BoxTensor:
    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        mins = np.asarray(self.mins, dtype=np.float64)
        maxs = np.asarray(self.maxs, dtype=np.float64)
        if mins.shape != maxs.shape:
            raise ValueError(f"corner shapes differ: {mins.shape} vs {maxs.shape}")
        if mins.ndim == 0:
            mins, maxs = mins.reshape(1), maxs.reshape(1)
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)

    @property
    def dim(self) -> int:
        return self.mins.shape[-1]

    def __getitem__(self, ix) -> "BoxTensor":
        return BoxTensor(self.mins[ix], self.maxs[ix])


@dataclass(frozen=True)
class GumbelParams:
    beta: float
    tau: float

    def __post_init__(self):
        if not (self.beta > 0 and self.tau > 0):
            raise ValueError(f"temperatures must be positive, got beta={self.beta}, tau={self.tau}")


def _check_dims(a: BoxTensor, b: BoxTensor):
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def softplus(x, tau: float):
    "``tau * log(1 + exp(x / tau))``, stable for large ``|x| / tau``."
    return tau * np.logaddexp(0.0, np.asarray(x, dtype=np.float64) / tau)


def log_softplus(x, tau: float):
    t = np.asarray(x, dtype=np.float64) / tau
    with np.errstate(divide="ignore"):
        body = np.log(np.logaddexp(0.0, np.maximum(t, _LOG_SOFTPLUS_TAIL)))
    return np.log(tau) + np.where(t < _LOG_SOFTPLUS_TAIL, t, body)


def log_softplus_grad(x, tau: float):
    "Derivative of :func:`log_softplus` with respect to ``x``."
    t = np.asarray(x, dtype=np.float64) / tau
    tc = np.maximum(t, _LOG_SOFTPLUS_TAIL)
    body = expit(tc) / np.logaddexp(0.0, tc)
    return np.where(t < _LOG_SOFTPLUS_TAIL, 1.0, body) / tau


def hard_volume(b: BoxTensor):
    return np.prod(np.maximum(0.0, b.maxs - b.mins), axis=-1)


def gumbel_volume(b: BoxTensor, p: GumbelParams):
    return np.prod(softplus(b.maxs - b.mins, p.tau), axis=-1)


def log_gumbel_volume(b: BoxTensor, p: GumbelParams):
    return np.sum(log_softplus(b.maxs - b.mins, p.tau), axis=-1)


def gumbel_volume_grad(b: BoxTensor, p: GumbelParams):
    """
    Volume and its partials ``(vol, dvol/dmins, dvol/dmaxs)``.

    Each side contributes ``vol * sigmoid(x/tau) / softplus(x)``, computed from
    the log-derivative so zero-volume factors stay finite.
    """
    vol = gumbel_volume(b, p)
    dmax = vol[..., None] * log_softplus_grad(b.maxs - b.mins, p.tau)
    return vol, -dmax, dmax


def intersect_hard(a: BoxTensor, b: BoxTensor) -> BoxTensor:
    _check_dims(a, b)
    return BoxTensor(np.maximum(a.mins, b.mins), np.minimum(a.maxs, b.maxs))


def intersect_gumbel(a: BoxTensor, b: BoxTensor, p: GumbelParams) -> BoxTensor:
    _check_dims(a, b)
    beta = p.beta
    mins = beta * np.logaddexp(a.mins / beta, b.mins / beta)
    maxs = -beta * np.logaddexp(-a.maxs / beta, -b.maxs / beta)
    return BoxTensor(mins, maxs)


def intersect_gumbel_grad(a: BoxTensor, b: BoxTensor, p: GumbelParams):
    """
    Intersection box plus the diagonal partials of its corners.

    Returns ``(box, dmin_da, dmin_db, dmax_da, dmax_db)``: the lower corner
    depends only on the lower corners of ``a`` and ``b`` (softmax weights) and
    the upper corner only on their upper corners.
    """
    box = intersect_gumbel(a, b, p)
    beta = p.beta
    dmin_da = expit((a.mins - b.mins) / beta)
    dmax_da = expit((b.maxs - a.maxs) / beta)
    return box, dmin_da, 1.0 - dmin_da, dmax_da, 1.0 - dmax_da


def intersect_gumbel_many(boxes: list[BoxTensor], p: GumbelParams) -> BoxTensor:
    "Left fold of :func:`intersect_gumbel`; the smooth max/min is associative."
    out = boxes[0]
    for b in boxes[1:]:
        out = intersect_gumbel(out, b, p)
    return out


def _log_containment(outer: BoxTensor, inner: BoxTensor, p: GumbelParams):
    return log_gumbel_volume(intersect_gumbel(outer, inner, p), p) - log_gumbel_volume(inner, p)


def containment_prob(outer: BoxTensor, inner: BoxTensor, p: GumbelParams, clamp: bool = True):
    """
    ``|outer ∩ inner| / |inner|`` under Gumbel intersection and softplus volume.

    The ratio is formed in log space so high-dimensional boxes neither
    underflow nor overflow; with ``clamp`` the result lies in ``[EPS, 1-EPS]``.
    """
    _check_dims(outer, inner)
    prob = np.exp(_log_containment(outer, inner, p))
    if clamp:
        prob = np.clip(prob, EPS, 1.0 - EPS)
    return prob


def containment_prob_grad(outer: BoxTensor, inner: BoxTensor, p: GumbelParams, clamp: bool = True):
    """
    Containment probability and partials with respect to all four corner sets.

    Returns ``(prob, d_outer_mins, d_outer_maxs, d_inner_mins, d_inner_maxs)``.
    Where clamping is active the partials are zero.
    """
    _check_dims(outer, inner)
    cap, dmin_do, dmin_di, dmax_do, dmax_di = intersect_gumbel_grad(outer, inner, p)
    g_cap = log_softplus_grad(cap.maxs - cap.mins, p.tau)
    g_inner = log_softplus_grad(inner.maxs - inner.mins, p.tau)
    raw = np.exp(log_gumbel_volume(cap, p) - log_gumbel_volume(inner, p))

    # d log P
    d_omin = -g_cap * dmin_do
    d_omax = g_cap * dmax_do
    d_imin = -g_cap * dmin_di + g_inner
    d_imax = g_cap * dmax_di - g_inner

    scale = raw[..., None]
    if clamp:
        active = (raw > EPS) & (raw < 1.0 - EPS)
        scale = np.where(active, raw, 0.0)[..., None]
        raw = np.clip(raw, EPS, 1.0 - EPS)
    return raw, scale * d_omin, scale * d_omax, scale * d_imin, scale * d_imax


def membership_prob(z, b: BoxTensor, p: GumbelParams):
    """
    Soft membership of point ``z`` in a Gumbel box.

    Lower corners are max-Gumbel with CDF ``exp(-exp(-(z - min)/beta))``, upper
    corners min-Gumbel with survival ``exp(-exp(-(max - z)/beta))``.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != b.dim:
        raise ValueError(f"dimension mismatch: {z.shape[-1]} vs {b.dim}")
    beta = p.beta
    with np.errstate(over="ignore"):
        log_lo = -np.exp(-(z - b.mins) / beta)
        log_hi = -np.exp(-(b.maxs - z) / beta)
    return np.exp(np.sum(log_lo + log_hi, axis=-1))
