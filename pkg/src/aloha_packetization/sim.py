"""Slot-level simulator of CF and CB slotted Aloha with per-node FIFO queues.

Per slot, in order:

1. Bernoulli(lambda) arrivals join each node's queue. A packet may be sent in
   its arrival slot.
2. Every node with a head-of-line packet transmits (CF) or requests (CB) with
   probability q.
3. A lone transmitter succeeds. In CF the packet leaves at the end of the slot.
   In CB the channel is then reserved for ``hold`` further slots, with no
   contention, and the packet leaves at the end of the reservation.

The delay of a packet is ``departure_slot - arrival_slot + 1`` slots, so the
minimum is ``1 + hold``.

Randomness comes from a counter-based SplitMix64 hash. Node ``k`` draws from
its own arrival and transmit streams keyed on ``(seed, k)``, so a run depends
only on the seed and not on iteration order. The kernel can also take forced
arrival and transmit matrices, which lets hand-built traces be checked slot
by slot.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .errors import ConfigError, PacketizationError
from .model import (
    NetworkParams,
    Scheme,
    evaluate_curve,
    min_packet_size,
)

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TWO_M53 = 1.0 / 9007199254740992.0
_NEVER = np.int64(2**62)

STREAM_ARRIVAL = 1
STREAM_TRANSMIT = 2


@nb.njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@nb.njit(cache=True)
def _stream_key(seed, node, stream):
    k = _mix(np.uint64(seed) + _GOLDEN * np.uint64(stream))
    return _mix(k + _GOLDEN * np.uint64(node + 1))


@nb.njit(cache=True, inline="always")
def _uniform(key, counter):
    # in [0, 1)
    return float(_mix(key + _GOLDEN * np.uint64(counter + 1)) >> _S11) * _TWO_M53


@nb.njit(cache=True)
def _geometric_gap(key, counter, log1m_lam):
    u = 1.0 - _uniform(key, counter)  # (0, 1]
    return np.int64(1 + math.floor(math.log(u) / log1m_lam))


@nb.njit(cache=True)
def _grow(buf, head, size):
    n, cap = buf.shape
    new = np.empty((n, 2 * cap), dtype=buf.dtype)
    for k in range(n):
        for j in range(size[k]):
            new[k, j] = buf[k, (head[k] + j) % cap]
    return new


@nb.njit(cache=True)
def _kernel(n, lam, q, hold, n_slots, warmup_slot, seed,
            forced_arr, forced_tx, use_forced, want_trace):
    arr_key = np.empty(n, dtype=np.uint64)
    tx_key = np.empty(n, dtype=np.uint64)
    for k in range(n):
        arr_key[k] = _stream_key(seed, k, STREAM_ARRIVAL)
        tx_key[k] = _stream_key(seed, k, STREAM_TRANSMIT)
    log1m_lam = math.log1p(-lam) if lam > 0.0 else -1.0

    cap = 16
    q_arr = np.empty((n, cap), dtype=np.int64)
    q_id = np.empty((n, cap), dtype=np.int64)
    head = np.zeros(n, dtype=np.int64)
    size = np.zeros(n, dtype=np.int64)
    arr_count = np.zeros(n, dtype=np.int64)
    next_arr = np.full(n, _NEVER, dtype=np.int64)

    # backlogged nodes as an unordered set with O(1) insert/remove
    active = np.empty(n, dtype=np.int64)
    pos = np.full(n, -1, dtype=np.int64)
    n_active = 0

    for k in range(n):
        if use_forced:
            for t in range(n_slots):
                if forced_arr[k, t]:
                    next_arr[k] = t
                    break
        elif lam > 0.0:
            next_arr[k] = _geometric_gap(arr_key[k], 0, log1m_lam) - 1
            arr_count[k] = 1
    next_any = _NEVER
    for k in range(n):
        if next_arr[k] < next_any:
            next_any = next_arr[k]

    tr_cap = 1024 if want_trace else 1
    tr = np.empty((tr_cap, 4), dtype=np.int64)
    tr_n = 0

    arrived = 0
    completed = 0
    measured = 0
    mean = 0.0
    m2 = 0.0
    backlog = 0
    max_backlog = 0
    min_delay = _NEVER
    t = np.int64(0)
    t_end = np.int64(n_slots)

    while t < n_slots:
        # arrivals up to and including slot t
        while next_any <= t:
            new_any = _NEVER
            for k in range(n):
                while next_arr[k] <= t:
                    if size[k] == q_arr.shape[1]:
                        q_arr = _grow(q_arr, head, size)
                        q_id = _grow(q_id, head, size)
                        head[:] = 0
                    c = q_arr.shape[1]
                    slot = (head[k] + size[k]) % c
                    q_arr[k, slot] = next_arr[k]
                    q_id[k, slot] = arrived
                    size[k] += 1
                    arrived += 1
                    backlog += 1
                    if pos[k] < 0:
                        pos[k] = n_active
                        active[n_active] = k
                        n_active += 1
                    nxt = _NEVER
                    if use_forced:
                        for s in range(next_arr[k] + 1, n_slots):
                            if forced_arr[k, s]:
                                nxt = s
                                break
                    else:
                        nxt = next_arr[k] + _geometric_gap(arr_key[k], arr_count[k], log1m_lam)
                        arr_count[k] += 1
                        if nxt >= n_slots:
                            nxt = _NEVER
                    next_arr[k] = nxt
                if next_arr[k] < new_any:
                    new_any = next_arr[k]
            next_any = new_any
        if backlog > max_backlog:
            max_backlog = backlog

        n_tx = 0
        winner = -1
        for i in range(n_active):
            k = active[i]
            if use_forced:
                go = forced_tx[k, t]
            else:
                go = _uniform(tx_key[k], t) < q
            if go:
                n_tx += 1
                winner = k
                if n_tx > 1:
                    break

        if n_tx == 1:
            k = winner
            c = q_arr.shape[1]
            a = q_arr[k, head[k]]
            pid = q_id[k, head[k]]
            head[k] = (head[k] + 1) % c
            size[k] -= 1
            backlog -= 1
            if size[k] == 0:
                i = pos[k]
                last = active[n_active - 1]
                active[i] = last
                pos[last] = i
                pos[k] = -1
                n_active -= 1
            dep = t + hold
            d = dep - a + 1
            completed += 1
            if d < min_delay:
                min_delay = d
            if a >= warmup_slot:
                measured += 1
                delta = d - mean
                mean += delta / measured
                m2 += delta * (d - mean)
            if want_trace:
                if tr_n == tr.shape[0]:
                    bigger = np.empty((2 * tr.shape[0], 4), dtype=np.int64)
                    bigger[:tr_n] = tr[:tr_n]
                    tr = bigger
                tr[tr_n, 0] = pid
                tr[tr_n, 1] = k
                tr[tr_n, 2] = a
                tr[tr_n, 3] = dep
                tr_n += 1
            t = dep + 1
            if t > t_end:
                t_end = t
        else:
            t += 1
            if t > t_end:
                t_end = t

    return (arrived, completed, measured, mean, m2, max_backlog, backlog,
            t_end, min_delay, tr[:tr_n])


_EMPTY = np.zeros((0, 0), dtype=np.bool_)


@dataclass(frozen=True)
class SimConfig:
    params: NetworkParams
    scheme: Scheme
    l: int
    duration_s: float
    seed: int = 0
    warmup_fraction: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        if not self.duration_s > 0:
            raise ConfigError("duration_s must be positive")
        if not self.l >= 1:
            raise ConfigError("packet size must be >= 1 bit")
        if not 0.0 <= self.warmup_fraction < 0.5:
            raise ConfigError("warmup_fraction must lie in [0, 0.5)")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must fit in 64 bits")

    @property
    def arrival_prob(self) -> float:
        p = self.params
        if self.scheme is Scheme.CF:
            return p.lambda_b * (1.0 / p.R + p.delta_cf / self.l)
        return p.lambda_b * p.delta_cb_f / self.l

    @property
    def slot_s(self) -> float:
        p = self.params
        return self.l / p.R + p.delta_cf if self.scheme is Scheme.CF else p.delta_cb_f

    @property
    def tau_t(self) -> float:
        p = self.params
        return (self.l / p.R + p.delta_cb_s) / p.delta_cb_f

    @property
    def hold_slots(self) -> int:
        """Reservation slots after a successful CB request (0 for CF)."""
        if self.scheme is Scheme.CF:
            return 0
        return max(1, int(round(self.tau_t)) - 1)

    @property
    def tau_residual(self) -> float:
        """Cycle length simulated minus the analytical tau_T (CB), in slots."""
        if self.scheme is Scheme.CF:
            return 0.0
        return (self.hold_slots + 1) - self.tau_t

    @property
    def n_slots(self) -> int:
        return int(math.ceil(self.duration_s / self.slot_s))


@dataclass
class SimStats:
    mean_delay_s: float
    jitter_s: float
    packets_completed: int
    packets_arrived: int
    max_backlog: int
    slots_simulated: int
    packets_measured: int = 0
    final_backlog: int = 0
    min_delay_slots: int = 0
    slot_s: float = 0.0
    tau_residual: float = 0.0
    trace: np.ndarray | None = field(default=None, repr=False)


@dataclass
class BatchStats:
    per_seed: list
    mean_of_means_s: float
    ci95_halfwidth_s: float
    near_saturation: bool = False


def _run(cfg: SimConfig, trace: bool = False) -> SimStats:
    lam = cfg.arrival_prob
    if not lam < 1.0:
        raise ConfigError(f"arrival probability {lam:.6g} per slot is not below 1")
    n_slots = cfg.n_slots
    warm = int(math.floor(cfg.warmup_fraction * n_slots))
    out = _kernel(cfg.params.n, lam, cfg.params.q, cfg.hold_slots, n_slots, warm,
                  np.uint64(int(cfg.seed)), _EMPTY, _EMPTY, False, trace)
    arrived, completed, measured, mean, m2, max_bl, bl, t_end, min_d, tr = out
    sigma = cfg.slot_s
    jitter = math.sqrt(m2 / (measured - 1)) * sigma if measured > 1 else 0.0
    return SimStats(
        mean_delay_s=mean * sigma if measured else math.nan,
        jitter_s=jitter,
        packets_completed=int(completed),
        packets_arrived=int(arrived),
        max_backlog=int(max_bl),
        slots_simulated=int(t_end),
        packets_measured=int(measured),
        final_backlog=int(bl),
        min_delay_slots=int(min_d) if completed else 0,
        slot_s=sigma,
        tau_residual=cfg.tau_residual,
        trace=tr if trace else None,
    )


def simulate(cfg: SimConfig, trace_path=None) -> SimStats:
    """Run one replication. ``trace_path`` writes one CSV row per completed packet."""
    stats = _run(cfg, trace=trace_path is not None)
    if trace_path is not None:
        write_trace(stats, trace_path)
    return stats


def write_trace(stats: SimStats, path) -> None:
    rows = stats.trace[np.argsort(stats.trace[:, 0], kind="stable")]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["packet_id", "node", "arrival_slot", "departure_slot",
                    "delay_slots", "delay_seconds"])
        for pid, node, a, d in rows:
            delay = int(d - a + 1)
            w.writerow([int(pid), int(node), int(a), int(d), delay,
                        f"{delay * stats.slot_s:.10g}"])


def run_forced(arrivals, transmits, hold: int = 0):
    """Run the kernel on forced decisions.

    ``arrivals[k, t]`` places a packet at node k in slot t. ``transmits[k, t]``
    is node k's transmit decision in slot t, consulted only while k is
    backlogged and the channel is free. Returns rows of
    ``(packet_id, node, arrival_slot, departure_slot)`` sorted by packet id,
    plus the final backlog.
    """
    arrivals = np.ascontiguousarray(arrivals, dtype=np.bool_)
    transmits = np.ascontiguousarray(transmits, dtype=np.bool_)
    if arrivals.shape != transmits.shape or arrivals.ndim != 2:
        raise ConfigError("arrivals and transmits must be equal-shape 2-D arrays")
    n, n_slots = arrivals.shape
    out = _kernel(n, 0.0, 0.0, int(hold), n_slots, 0, np.uint64(0),
                  arrivals, transmits, True, True)
    tr = out[-1]
    return tr[np.argsort(tr[:, 0], kind="stable")], int(out[6])


def child_seed(seed: int, i: int) -> int:
    """Seed of replication ``i`` in a batch rooted at ``seed``."""
    ss = np.random.SeedSequence([int(seed), int(i)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def batch_simulate(cfg: SimConfig, n_seeds: int) -> BatchStats:
    if n_seeds < 2:
        raise ConfigError("batch_simulate needs at least 2 seeds")
    per = []
    for i in range(n_seeds):
        sub = SimConfig(cfg.params, cfg.scheme, cfg.l, cfg.duration_s,
                        child_seed(cfg.seed, i), cfg.warmup_fraction)
        per.append(simulate(sub))
    means = np.array([s.mean_delay_s for s in per])
    ci = 1.96 * float(np.std(means, ddof=1)) / math.sqrt(n_seeds)
    pt = evaluate_curve(cfg.params, cfg.scheme, [cfg.l])
    load = float(pt.lam[0] * pt.d1[0]) if pt.ok[0] else math.inf
    return BatchStats(per, float(means.mean()), ci, near_saturation=load > 0.95)


@dataclass
class JitterPoint:
    l: int
    jitter_s: float | None
    mean_delay_s: float | None
    unsaturated: bool
    note: str = ""


def jitter_curve(params: NetworkParams, scheme, l_values, duration_s: float,
                 seed: int = 0, warmup_fraction: float = 0.1) -> list[JitterPoint]:
    """Simulated jitter and mean delay at each packet size.

    Packet sizes below L_min, or infeasible for the scheme, are flagged rather
    than simulated, because the queue would grow without bound.
    """
    scheme = Scheme.parse(scheme)
    try:
        l_min = min_packet_size(params, scheme)
    except PacketizationError:
        l_min = math.inf
    out = []
    for l in l_values:
        l = int(l)
        if l < l_min:
            out.append(JitterPoint(l, None, None, False, "below L_min or infeasible"))
            continue
        try:
            st = simulate(SimConfig(params, scheme, l, duration_s, seed, warmup_fraction))
        except ConfigError as exc:
            out.append(JitterPoint(l, None, None, False, str(exc)))
            continue
        out.append(JitterPoint(l, st.jitter_s, st.mean_delay_s, True))
    return out
