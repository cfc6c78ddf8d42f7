"""Analytical mean queueing delay of connection-free and connection-based slotted Aloha.

The delay chain for a packet size ``L`` (bits) is

    bit rate -> packet arrival rate per slot -> service-time moments
             -> Geo/G/1 mean delay in slots -> delay in seconds.

Two schemes are covered.  In the connection-free (CF) scheme, data packets
contend directly and the slot lasts ``L/R + delta_cf``.  In the
connection-based (CB) scheme, short requests of length ``delta_cb_f`` contend
and a successful request holds the channel for ``L/R + delta_cb_s`` seconds in
total.

Scalar entry points raise on saturated operating points.  ``evaluate_curve``
is the vectorized workhorse used by the optimizer. It reports saturation
in-band and never raises for a particular ``L``.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, fields
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    DomainError,
    InfeasibleError,
    InvalidPacketSize,
    RateOverflow,
    SaturationError,
)
from .lambertw import BRANCH_POINT, TOL_DOMAIN, exp_w0

log = logging.getLogger(__name__)



class Scheme(str, Enum):
    CF = "cf"
    CB = "cb"

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, Scheme):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True)
class NetworkParams:
    """Scalar network inputs. Durations are in seconds and rates in bit/s."""

    n: int
    lambda_b: float
    R: float
    q: float
    delta_cf: float = 0.005
    delta_cb_f: float = 0.003
    delta_cb_s: float = 0.008

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        if not self.lambda_b > 0:
            raise ValueError("lambda_b must be positive")
        if not self.R > 0:
            raise ValueError("R must be positive")
        # q == 0 is admitted so that feasibility() can report it
        if not 0.0 <= self.q <= 1.0:
            raise ValueError("q must lie in [0, 1]")
        if not self.delta_cf > 0:
            raise ValueError("delta_cf must be positive")
        if not 0 < self.delta_cb_f < self.delta_cb_s:
            raise ValueError("need 0 < delta_cb_f < delta_cb_s")

    @property
    def ack_cb(self) -> float:
        """ACK part of a successful CB cycle, delta_cb_s - delta_cb_f."""
        return self.delta_cb_s - self.delta_cb_f

    def replace(self, **changes) -> "NetworkParams":
        data = asdict(self)
        data.update(changes)
        return NetworkParams(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkParams":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown parameter keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "NetworkParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class ServiceMoments:
    d1: float
    d2: float


@dataclass(frozen=True)
class CbSteadyState:
    tau_t: float
    p: float
    alpha_tilde: float


@dataclass(frozen=True)
class DelayPoint:
    l: int
    lam: float
    t_slots: float | None
    sigma: float
    t_seconds: float | None
    unsaturated: bool


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    reason: str

    def __bool__(self):
        return self.feasible


def _check_l(l) -> None:
    if not l >= 1:
        raise InvalidPacketSize(f"packet size must be >= 1 bit, got {l!r}")


def packet_arrival_rate(p: NetworkParams, s, l) -> float:
    """Per-node packet arrival probability per slot."""
    s = Scheme.parse(s)
    _check_l(l)
    if s is Scheme.CF:
        lam = p.lambda_b * (1.0 / p.R + p.delta_cf / l)
    else:
        lam = p.lambda_b * p.delta_cb_f / l
    if lam >= 1.0:
        raise RateOverflow(f"{lam:.6g} packets/slot at L={l}")
    return lam


def slot_duration(p: NetworkParams, s, l) -> float:
    s = Scheme.parse(s)
    _check_l(l)
    if s is Scheme.CF:
        return l / p.R + p.delta_cf
    return p.delta_cb_f


def _exp_w0_checked(x: float) -> float:
    try:
        return exp_w0(x)
    except DomainError as exc:
        raise SaturationError(f"Lambert argument {x:.6g} below -1/e") from exc


def _moments_from_success(g: float, tau_t: float = 1.0) -> tuple[float, float]:
    # g is the per-slot probability that a HOL request succeeds (q*e^W for CF,
    # p*alpha*q for CB); CF is the tau_t == 1 special case of the CB formulas.
    a = 1.0 / g
    d1 = tau_t - 1.0 + a
    d2 = 2.0 * a * (a + tau_t - 2.0) + (tau_t - 1.0) * (tau_t - 2.0) + d1
    return d1, d2


def service_moments_cf(p: NetworkParams, l) -> ServiceMoments:
    lam = packet_arrival_rate(p, Scheme.CF, l)
    ew = _exp_w0_checked(-p.n * lam)
    d1 = 1.0 / (p.q * ew)
    d2 = 2.0 / (p.q * p.q * ew * ew) - d1
    return ServiceMoments(d1, d2)


def cb_steady_state(p: NetworkParams, l) -> CbSteadyState:
    lam = packet_arrival_rate(p, Scheme.CB, l)
    tau_t = (l / p.R + p.delta_cb_s) / p.delta_cb_f
    busy = p.n * lam * (tau_t - 1.0)
    if busy >= 1.0:
        raise SaturationError(f"n*lambda*(tau_T-1) = {busy:.6g} >= 1")
    pr = _exp_w0_checked(-p.n * lam / (1.0 - busy))
    log_p = math.log(pr)
    alpha = 1.0 / ((1.0 - lam * (tau_t - 1.0)) * (1.0 - (tau_t - 1.0) * pr * log_p))
    return CbSteadyState(tau_t, pr, alpha)


def service_moments_cb(p: NetworkParams, l) -> ServiceMoments:
    st = cb_steady_state(p, l)
    d1, d2 = _moments_from_success(st.p * st.alpha_tilde * p.q, st.tau_t)
    if d2 < d1 * d1:
        log.warning("CB second moment below d1^2 at L=%s (tau_T=%.4g)", l, st.tau_t)
    return ServiceMoments(d1, d2)


def service_moments(p: NetworkParams, s, l) -> ServiceMoments:
    if Scheme.parse(s) is Scheme.CF:
        return service_moments_cf(p, l)
    return service_moments_cb(p, l)


def mean_delay_slots(lam: float, m: ServiceMoments) -> float:
    """Geo/G/1 mean queueing delay in slots."""
    rho = lam * m.d1
    if rho >= 1.0:
        raise SaturationError(f"load lambda*D = {rho:.6g} >= 1")
    return (lam * m.d2 - lam * m.d1) / (2.0 * (1.0 - rho)) + m.d1


def feasibility(p: NetworkParams, s) -> Feasibility:
    s = Scheme.parse(s)
    if s is Scheme.CF:
        lhs = p.q * p.R
        rhs = p.lambda_b * math.exp(p.n * p.q)
        if lhs > rhs:
            return Feasibility(True, f"q*R = {lhs:.6g} > lambda_b*e^(nq) = {rhs:.6g}")
        return Feasibility(False, f"violates q*R > lambda_b*e^(nq): {lhs:.6g} <= {rhs:.6g}")
    rhs = p.n * p.lambda_b
    if p.q <= 0.0:
        return Feasibility(False, "violates q > 0")
    if p.R > rhs:
        return Feasibility(True, f"R = {p.R:.6g} > n*lambda_b = {rhs:.6g}")
    return Feasibility(False, f"violates R > n*lambda_b: {p.R:.6g} <= {rhs:.6g}")


def min_packet_size(p: NetworkParams, s) -> int:
    """Smallest packet size for which the queue stays unsaturated."""
    s = Scheme.parse(s)
    feas = feasibility(p, s)
    if not feas:
        raise InfeasibleError(feas.reason)
    enq = math.exp(p.n * p.q)
    if s is Scheme.CF:
        value = p.delta_cf * p.lambda_b * p.R * enq / (p.q * p.R - p.lambda_b * enq)
    else:
        num = p.R * (p.lambda_b * p.delta_cb_f * enq + p.n * p.q * p.lambda_b * p.ack_cb)
        value = num / (p.q * (p.R - p.n * p.lambda_b))
    return max(1, math.ceil(value))


@dataclass(frozen=True)
class CurveArrays:
    """Column-oriented delay evaluation; entries where ``ok`` is False are NaN."""

    l: np.ndarray
    lam: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    t_slots: np.ndarray
    sigma: np.ndarray
    t_seconds: np.ndarray
    ok: np.ndarray

    def point(self, i: int) -> DelayPoint:
        ok = bool(self.ok[i])
        return DelayPoint(
            l=int(self.l[i]),
            lam=float(self.lam[i]),
            t_slots=float(self.t_slots[i]) if ok else None,
            sigma=float(self.sigma[i]),
            t_seconds=float(self.t_seconds[i]) if ok else None,
            unsaturated=ok,
        )


def evaluate_curve(p: NetworkParams, s, l_values) -> CurveArrays:
    """Vectorized delay evaluation over integer packet sizes.

    A point counts as unsaturated only if the scheme is feasible, ``L >= L_min``,
    every steady-state precondition holds and ``lambda*D1 < 1``.
    """
    s = Scheme.parse(s)
    L = np.asarray(l_values, dtype=float)
    if L.ndim != 1:
        L = L.ravel()
    if np.any(~(L >= 1)):
        raise InvalidPacketSize("all packet sizes must be >= 1 bit")
    nan = np.full(L.shape, np.nan)
    d1, d2, t_slots = nan.copy(), nan.copy(), nan.copy()
    feas = feasibility(p, s)
    l_min = min_packet_size(p, s) if feas else math.inf

    if s is Scheme.CF:
        lam = p.lambda_b * (1.0 / p.R + p.delta_cf / L)
        sigma = L / p.R + p.delta_cf
        x = -p.n * lam
        valid = (lam < 1.0) & (x >= BRANCH_POINT - TOL_DOMAIN) & (L >= l_min)
        if valid.any():
            ew = exp_w0(x[valid])
            a = 1.0 / (p.q * ew)
            d1[valid] = a
            d2[valid] = 2.0 * a * a - a
    else:
        lam = p.lambda_b * p.delta_cb_f / L
        sigma = np.full(L.shape, p.delta_cb_f)
        tau = (L / p.R + p.delta_cb_s) / p.delta_cb_f
        busy = p.n * lam * (tau - 1.0)
        valid = (lam < 1.0) & (busy < 1.0) & (L >= l_min)
        x = np.where(valid, -p.n * lam / np.where(valid, 1.0 - busy, 1.0), 0.0)
        valid &= x >= BRANCH_POINT - TOL_DOMAIN
        if valid.any():
            tv = tau[valid]
            pr = exp_w0(x[valid])
            alpha = 1.0 / ((1.0 - lam[valid] * (tv - 1.0)) * (1.0 - (tv - 1.0) * pr * np.log(pr)))
            m1, m2 = _moments_from_success(pr * alpha * p.q, tv)
            d1[valid] = m1
            d2[valid] = m2

    with np.errstate(invalid="ignore", divide="ignore"):
        rho = lam * d1
        ok = valid & (rho < 1.0)
        t = (lam * d2 - lam * d1) / (2.0 * (1.0 - rho)) + d1
    t_slots[ok] = t[ok]
    t_seconds = t_slots * sigma
    return CurveArrays(
        l=L.astype(np.int64), lam=lam, d1=d1, d2=d2, t_slots=t_slots,
        sigma=sigma, t_seconds=t_seconds, ok=ok,
    )


def mean_delay_seconds(p: NetworkParams, s, l) -> DelayPoint:
    """Mean queueing delay at one packet size; saturation is flagged, not raised."""
    _check_l(l)
    return evaluate_curve(p, s, [l]).point(0)
