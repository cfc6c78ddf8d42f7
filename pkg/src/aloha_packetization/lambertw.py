"""Principal branch W0 of the Lambert W function and exp(W0(x)).

Both functions accept a scalar or an array.  Each element is iterated
independently and frozen once it has converged, so the value returned for a
given ``x`` does not depend on what else is in the array.  The optimizer relies
on this to compare vectorized scans against single-point evaluations bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

BRANCH_POINT = -np.exp(-1.0)
TOL_DOMAIN = 1e-12
_MAX_ITER = 50
_STEP_TOL = 1e-14
_SERIES_CUTOFF = 1e-6


@dataclass(frozen=True)
class WEvaluation:
    x: float
    w: float
    exp_w: float


def _check_domain(x: np.ndarray) -> np.ndarray:
    if np.any(np.isnan(x)):
        raise DomainError("Lambert W argument is NaN")
    below = x < BRANCH_POINT - TOL_DOMAIN
    if np.any(below):
        bad = x[below].min()
        raise DomainError(f"W0 undefined for x={bad!r} < -1/e")
    return np.maximum(x, BRANCH_POINT)


def _initial_guess(x: np.ndarray) -> np.ndarray:
    w = np.empty_like(x)
    # series about the branch point, in p = sqrt(2(e*x + 1))
    near = x < -0.25
    p = np.sqrt(np.maximum(2.0 * (np.e * x[near] + 1.0), 0.0))
    w[near] = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    mid = (~near) & (x <= 3.0)
    w[mid] = np.log1p(x[mid])
    big = x > 3.0
    lx = np.log(x[big])
    w[big] = lx - np.log(lx)
    return w


def _w0(x: np.ndarray) -> np.ndarray:
    w = _initial_guess(x)
    active = np.ones(x.shape, dtype=bool)
    # exact values; Halley's denominator vanishes at the branch point
    at_branch = x == BRANCH_POINT
    w[at_branch] = -1.0
    w[x == 0.0] = 0.0
    active &= ~at_branch & (x != 0.0)
    for _ in range(_MAX_ITER):
        if not active.any():
            break
        wa = w[active]
        xa = x[active]
        ew = np.exp(wa)
        f = wa * ew - xa
        wp1 = wa + 1.0
        denom = ew * wp1 - (wa + 2.0) * f / (2.0 * wp1)
        step = np.where(denom != 0.0, f / denom, 0.0)
        w_new = wa - step
        w[active] = w_new
        done = np.abs(step) <= _STEP_TOL * (1.0 + np.abs(w_new))
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    return w


def lambert_w0(x):
    """W0(x) for x >= -1/e, returning the same shape as the input.

    Arguments less than ``TOL_DOMAIN`` below -1/e are clamped to the branch
    point. Anything further out raises DomainError.
    """
    arr = np.asarray(x, dtype=float)
    flat = _check_domain(np.atleast_1d(arr).ravel())
    out = _w0(flat).reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def exp_w0(x):
    """exp(W0(x)), evaluated as x / W0(x) with a series near zero."""
    arr = np.asarray(x, dtype=float)
    flat = _check_domain(np.atleast_1d(arr).ravel())
    small = np.abs(flat) < _SERIES_CUTOFF
    out = np.empty_like(flat)
    xs = flat[small]
    # exp(W(x)) = sum_k (1-k)^(k-1) x^k / k!
    out[small] = 1.0 + xs - xs ** 2 / 2.0 + 2.0 * xs ** 3 / 3.0
    xl = flat[~small]
    out[~small] = xl / _w0(xl)
    out = out.reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def evaluate(x: float) -> WEvaluation:
    return WEvaluation(x=float(x), w=lambert_w0(x), exp_w=exp_w0(x))
