"""CF-vs-CB trade-off as a function of the overhead ratio delta_cf / delta_cb_f.

Three delay differences are tracked as functions of the ratio, with the
request duration delta_cb_f held fixed:

    f1 = T_CF(L = L*_CB) - T*_CB     (root xi1)
    f2 = T*_CF - T*_CB               (root xi2)
    f3 = T*_CF - T_CB(L = L*_CF)     (root xi3)

Their roots split the ratio axis into four advantage regions R_I..R_IV.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import BracketError, InfeasibleError, NoFiniteDelayError
from .model import NetworkParams, Scheme, mean_delay_seconds
from .optimizer import DEFAULT_L_MAX, apply_axis, optimize_packet_size

DEFAULT_BRACKET = (0.05, 50.0)
RATIO_TOL = 1e-3
MAX_BISECT = 60
SCAN_POINTS = 48
THRESHOLD_AXES = ("n", "lambda_b", "R", "delta_cb_f")


class RegionLabel(str, Enum):
    R_I = "R_I"
    R_II = "R_II"
    R_III = "R_III"
    R_IV = "R_IV"


@dataclass(frozen=True)
class CrossDelays:
    ratio: float
    t_cf_star: float
    t_cb_star: float
    t_cf_at_lcb: float
    t_cb_at_lcf: float
    l_cf_star: int
    l_cb_star: int

    def differences(self) -> tuple[float, float, float]:
        return (
            self.t_cf_at_lcb - self.t_cb_star,
            self.t_cf_star - self.t_cb_star,
            self.t_cf_star - self.t_cb_at_lcf,
        )


@dataclass
class ThresholdResult:
    xi1: float | None = None
    xi2: float | None = None
    xi3: float | None = None
    exists_flags: tuple = (False, False, False)
    multiple_flags: tuple = (False, False, False)
    ratio_lo: float = math.nan
    ratio_hi: float = math.nan
    note: str = ""
    extra_roots: dict = field(default_factory=dict)

    @property
    def values(self) -> tuple:
        return (self.xi1, self.xi2, self.xi3)


def params_at_ratio(base: NetworkParams, ratio: float, couple_ack: bool = False) -> NetworkParams:
    """Set delta_cf = ratio * delta_cb_f.

    With ``couple_ack`` the CB ACK follows the CF one, i.e.
    delta_cb_s = delta_cb_f + delta_cf. Otherwise delta_cb_s keeps its base value.
    """
    if not ratio > 0:
        raise ValueError("ratio must be positive")
    dcf = ratio * base.delta_cb_f
    if couple_ack:
        return base.replace(delta_cf=dcf, delta_cb_s=base.delta_cb_f + dcf)
    return base.replace(delta_cf=dcf)


def _t_or_inf(p, s, l) -> float:
    pt = mean_delay_seconds(p, s, l)
    return pt.t_seconds if pt.unsaturated else math.inf


def cross_delays(base: NetworkParams, ratio: float, couple_ack: bool = False,
                 l_max: int = DEFAULT_L_MAX) -> CrossDelays:
    p = params_at_ratio(base, ratio, couple_ack)
    cf = optimize_packet_size(p, Scheme.CF, l_max)
    cb = optimize_packet_size(p, Scheme.CB, l_max)
    return CrossDelays(
        ratio=ratio,
        t_cf_star=cf.t_star,
        t_cb_star=cb.t_star,
        t_cf_at_lcb=_t_or_inf(p, Scheme.CF, cb.l_star),
        t_cb_at_lcf=_t_or_inf(p, Scheme.CB, cf.l_star),
        l_cf_star=cf.l_star,
        l_cb_star=cb.l_star,
    )


def _sign(x: float) -> int:
    return int(x > 0) - int(x < 0)


def thresholds(base: NetworkParams, ratio_lo: float = DEFAULT_BRACKET[0],
               ratio_hi: float = DEFAULT_BRACKET[1], *, couple_ack: bool = False,
               clip_bracket: bool = True, scan_points: int = SCAN_POINTS,
               tol: float = RATIO_TOL, l_max: int = DEFAULT_L_MAX) -> ThresholdResult:
    """Locate xi1 <= xi2 <= xi3 by scan-then-bisect inside [ratio_lo, ratio_hi].

    Each root requires L*_CB > L*_CF. If that ordering breaks at a scanned
    ratio and ``clip_bracket`` is set, the bracket is truncated to the scan
    points below the first violation. Otherwise BracketError is raised.
    Ordering failures found during bisection always raise.
    """
    if not 0 < ratio_lo < ratio_hi:
        raise ValueError("need 0 < ratio_lo < ratio_hi")

    def evaluate(r: float) -> CrossDelays:
        cd = cross_delays(base, r, couple_ack, l_max)
        if not cd.l_cb_star > cd.l_cf_star:
            raise BracketError(
                f"L*_CB={cd.l_cb_star} <= L*_CF={cd.l_cf_star} at ratio {r:.6g}", ratio=r)
        return cd

    ratios = np.geomspace(ratio_lo, ratio_hi, scan_points)
    scanned: list[CrossDelays] = []
    note = ""
    for r in ratios:
        try:
            scanned.append(evaluate(float(r)))
        except BracketError as exc:
            if not clip_bracket or not scanned:
                raise
            note = f"bracket clipped: {exc}"
            break
    res = ThresholdResult(ratio_lo=ratio_lo, ratio_hi=scanned[-1].ratio, note=note)
    diffs = np.array([cd.differences() for cd in scanned])
    rs = [cd.ratio for cd in scanned]

    roots, exists, multiple = [], [], []
    for k in range(3):
        signs = [_sign(v) for v in diffs[:, k]]
        changes = [i for i in range(len(signs) - 1)
                   if signs[i] != 0 and signs[i + 1] != 0 and signs[i] != signs[i + 1]]
        zeros = [i for i, sg in enumerate(signs) if sg == 0]
        if zeros and (not changes or zeros[0] <= changes[0]):
            roots.append(rs[zeros[0]])
        elif changes:
            i = changes[0]
            roots.append(_bisect(lambda r: evaluate(r).differences()[k],
                                 rs[i], rs[i + 1], signs[i], tol))
        else:
            roots.append(None)
        exists.append(roots[-1] is not None)
        multiple.append(len(changes) + len(zeros) > 1)
        if multiple[-1]:
            res.extra_roots[f"xi{k + 1}"] = [rs[i] for i in changes[1:]]
    res.xi1, res.xi2, res.xi3 = roots
    res.exists_flags = tuple(exists)
    res.multiple_flags = tuple(multiple)
    return res


def _bisect(f, lo: float, hi: float, sign_lo: int, tol: float) -> float:
    for _ in range(MAX_BISECT):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        s = _sign(f(mid))
        if s == 0:
            return mid
        if s == sign_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def classify_region(base: NetworkParams, ratio: float, couple_ack: bool = False,
                    l_max: int = DEFAULT_L_MAX) -> RegionLabel:
    cd = cross_delays(base, ratio, couple_ack, l_max)
    if cd.t_cf_star < cd.t_cb_star:
        return RegionLabel.R_I if cd.t_cf_at_lcb < cd.t_cb_star else RegionLabel.R_II
    return RegionLabel.R_III if cd.t_cf_star < cd.t_cb_at_lcf else RegionLabel.R_IV


def region_from_thresholds(res: ThresholdResult, ratio: float) -> RegionLabel | None:
    """Interval lookup; None when the thresholds needed for the decision are missing."""
    xi1, xi2, xi3 = res.values
    if xi2 is None:
        return None
    if ratio < xi2:
        if xi1 is None:
            return RegionLabel.R_II
        return RegionLabel.R_I if ratio < xi1 else RegionLabel.R_II
    if xi3 is None:
        return None
    return RegionLabel.R_III if ratio < xi3 else RegionLabel.R_IV


def threshold_sweep(base: NetworkParams, axis_name: str, values, **kwargs) -> list[ThresholdResult]:
    if axis_name not in THRESHOLD_AXES:
        raise ValueError(f"unknown threshold axis {axis_name!r}; expected one of {THRESHOLD_AXES}")
    out = []
    for v in values:
        p = apply_axis(base, axis_name, v)
        try:
            out.append(thresholds(p, **kwargs))
        except (BracketError, InfeasibleError, NoFiniteDelayError) as exc:
            out.append(ThresholdResult(note=f"{type(exc).__name__}: {exc}"))
    return out
