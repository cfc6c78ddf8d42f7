"""Integer packet-size optimization and one-parameter sensitivity sweeps."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import InfeasibleError, NoFiniteDelayError
from .model import (
    DelayPoint,
    NetworkParams,
    Scheme,
    evaluate_curve,
    feasibility,
    min_packet_size,
)

DEFAULT_L_MAX = 10**8
SCAN_RATIO = 1.05
NEIGHBORHOOD = 8
# brackets up to this width are scanned exhaustively instead of ternary-searched
EXHAUSTIVE_WIDTH = 1 << 16

SWEEP_AXES = ("n", "lambda_b", "R", "delta_ack", "delta_cb_f")


@dataclass(frozen=True)
class OptimizationResult:
    l_star: int
    t_star: float
    l_min: int
    l_interior: int | None
    at_boundary: bool


@dataclass
class SweepResult:
    axis_name: str
    axis_values: list
    results_cf: list = field(default_factory=list)
    results_cb: list = field(default_factory=list)
    # reason string per point when the corresponding result is None
    notes_cf: list = field(default_factory=list)
    notes_cb: list = field(default_factory=list)


def _delays(p, s, ls) -> np.ndarray:
    t = evaluate_curve(p, s, ls).t_seconds
    return np.where(np.isnan(t), np.inf, t)


def _argmin_first(ls: np.ndarray, t: np.ndarray) -> tuple[int, float]:
    i = int(np.argmin(t))
    return int(ls[i]), float(t[i])


def _geometric_grid(lo: int, hi: int, ratio: float = SCAN_RATIO) -> np.ndarray:
    count = int(math.ceil(math.log(hi / lo) / math.log(ratio))) + 1 if hi > lo else 1
    grid = np.unique(np.round(lo * ratio ** np.arange(count)).astype(np.int64))
    grid = grid[grid <= hi]
    return np.unique(np.concatenate([[lo], grid, [hi]]))


def _ternary(p, s, lo: int, hi: int) -> tuple[int, int]:
    """Shrink [lo, hi] around a unimodal minimum until it is cheap to scan."""
    while hi - lo > EXHAUSTIVE_WIDTH:
        m1 = lo + (hi - lo) // 3
        m2 = hi - (hi - lo) // 3
        t1, t2 = _delays(p, s, [m1, m2])
        if t1 <= t2:
            hi = m2
        else:
            lo = m1
    return lo, hi


@lru_cache(maxsize=4096)
def _optimize_cached(p: NetworkParams, s: Scheme, l_max: int) -> OptimizationResult:
    feas = feasibility(p, s)
    if not feas:
        raise InfeasibleError(feas.reason)
    l_min = min_packet_size(p, s)
    if l_max < l_min:
        raise NoFiniteDelayError(f"l_max={l_max} is below L_min={l_min}")

    grid = _geometric_grid(l_min, l_max)
    t = _delays(p, s, grid)
    if not np.isfinite(t).any():
        raise NoFiniteDelayError(f"no unsaturated packet size in [{l_min}, {l_max}]")
    i = int(np.argmin(t))
    lo = int(grid[max(i - 1, 0)])
    hi = int(grid[min(i + 1, len(grid) - 1)])
    lo, hi = _ternary(p, s, lo, hi)

    cand = np.arange(lo, hi + 1, dtype=np.int64)
    best_l, best_t = _argmin_first(cand, _delays(p, s, cand))
    # guard against plateaus and ties at the bracket edge
    while True:
        near = np.arange(max(l_min, best_l - NEIGHBORHOOD), min(l_max, best_l + NEIGHBORHOOD) + 1)
        l2, t2 = _argmin_first(near, _delays(p, s, near))
        if l2 == best_l:
            break
        best_l, best_t = l2, t2

    at_boundary = best_l == l_min
    return OptimizationResult(
        l_star=best_l,
        t_star=best_t,
        l_min=l_min,
        l_interior=None if at_boundary else best_l,
        at_boundary=at_boundary,
    )


def optimize_packet_size(p: NetworkParams, s, l_max: int = DEFAULT_L_MAX) -> OptimizationResult:
    """Integer L >= L_min minimizing the mean delay in seconds.

    Ties go to the smaller packet size. Results are memoized per
    (params, scheme, l_max) because the threshold search re-optimizes the same
    operating point many times.
    """
    return _optimize_cached(p, Scheme.parse(s), int(l_max))


def exhaustive_optimum(p: NetworkParams, s, l_max: int) -> tuple[int, float]:
    """Reference optimum by scanning every integer in [L_min, l_max]."""
    s = Scheme.parse(s)
    l_min = min_packet_size(p, s)
    ls = np.arange(l_min, int(l_max) + 1, dtype=np.int64)
    t = _delays(p, s, ls)
    if not np.isfinite(t).any():
        raise NoFiniteDelayError("no unsaturated packet size in range")
    return _argmin_first(ls, t)


def delay_curve(p: NetworkParams, s, l_values) -> list[DelayPoint]:
    ls = list(l_values)
    if not ls:
        raise ValueError("l_values must be non-empty")
    arr = evaluate_curve(p, s, ls)
    return [arr.point(i) for i in range(len(ls))]


def apply_axis(base: NetworkParams, name: str, value) -> NetworkParams:
    """Set one sweep axis on ``base``.

    ``delta_ack`` moves the CF ACK and the CB ACK (delta_cb_s - delta_cb_f)
    together. ``delta_cb_f`` keeps the CB ACK duration fixed.
    """
    if name == "n":
        return base.replace(n=int(round(value)))
    if name == "lambda_b":
        return base.replace(lambda_b=float(value))
    if name == "R":
        return base.replace(R=float(value))
    if name == "delta_ack":
        return base.replace(delta_cf=float(value), delta_cb_s=base.delta_cb_f + float(value))
    if name == "delta_cb_f":
        return base.replace(delta_cb_f=float(value), delta_cb_s=float(value) + base.ack_cb)
    raise ValueError(f"unknown sweep axis {name!r}; expected one of {SWEEP_AXES}")


def parameter_sweep(base: NetworkParams, axis_name: str, values, l_max: int = DEFAULT_L_MAX) -> SweepResult:
    values = list(values)
    if axis_name not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis_name!r}; expected one of {SWEEP_AXES}")
    res = SweepResult(axis_name, values)
    for v in values:
        p = apply_axis(base, axis_name, v)
        for s, out, notes in ((Scheme.CF, res.results_cf, res.notes_cf),
                              (Scheme.CB, res.results_cb, res.notes_cb)):
            try:
                out.append(optimize_packet_size(p, s, l_max))
                notes.append("")
            except (InfeasibleError, NoFiniteDelayError) as exc:
                out.append(None)
                notes.append(str(exc))
    return res
