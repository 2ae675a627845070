"""Cycle-accurate reference simulator of the priority NoC.

The simulator is the verification oracle for the analytical models. It
shares nothing with them except the :class:`~prionoc.network.NocModel`
description of queues, servers and routes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..analysis import LatencyReport, PairLatency
from ..errors import DiagnosticsError, DomainError
from ..network import NocModel, TrafficClass, TrafficMatrix
from . import kernel
from .injection import InjectionSchedule

__all__ = [
    "SimConfig",
    "SimReport",
    "run",
    "measure_interarrival_cv",
    "littles_law_check",
    "DEFAULT_CYCLES",
    "DEFAULT_WARMUP",
]

DEFAULT_CYCLES = 1_000_000
DEFAULT_WARMUP = 5_000

CHUNK_CYCLES = 1 << 17
INITIAL_POOL = 1 << 14
MAX_POOL = 1 << 22
# a queue longer than this at the end of the run is reported as unstable
BACKLOG_LIMIT = 2_000


@dataclass(frozen=True)
class SimConfig:
    model: NocModel
    matrix: TrafficMatrix
    total_cycles: int = DEFAULT_CYCLES
    warmup_cycles: int = DEFAULT_WARMUP
    seed: int = 1
    trace: bool = False
    trace_capacity: int = 1_000_000
    injection: str = "bernoulli"
    injection_period: int | None = None

    def __post_init__(self):
        if self.total_cycles <= 0:
            raise DomainError("total_cycles must be positive")
        if not 0 <= self.warmup_cycles < self.total_cycles:
            raise DomainError("warmup_cycles must satisfy 0 <= warmup < total_cycles")
        for q in self.model.queues:
            T = q.service.mean_T
            if not q.service.is_deterministic or T != int(T):
                raise DomainError(f"simulator needs integer deterministic service, queue {q.name} has "
                                  f"mean {T}, cv2 {q.service.cv2_service}")


@dataclass
class SimReport:
    classes: tuple[TrafficClass, ...]
    measured_cycles: int
    # per class
    latency_mean: np.ndarray
    latency_var: np.ndarray
    latency_count: np.ndarray
    gap_count: np.ndarray
    gap_mean: np.ndarray
    gap_cv2: np.ndarray
    # per class hop (CSR over classes)
    hop_ptr: np.ndarray
    hop_queue: np.ndarray
    hop_server: np.ndarray
    hop_wait_mean: np.ndarray
    hop_wait_count: np.ndarray
    # per queue (measurement window)
    queue_arrivals: np.ndarray
    queue_grants: np.ndarray
    queue_wait_sum: np.ndarray
    queue_occupancy: np.ndarray
    queue_max_len: np.ndarray
    queue_final_len: np.ndarray
    # per server departures
    departure_count: np.ndarray
    departure_gap_mean: np.ndarray
    departure_gap_cv2: np.ndarray
    injected: int
    delivered: int
    in_flight: int
    dropped: int
    unstable_queues: tuple[int, ...]
    trace: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def pair_latency(self) -> dict[tuple[int, int], float]:
        """Mean latency per (source, destination) over measured flits."""
        out = {}
        for c in self.classes:
            if self.latency_count[c.class_id] > 0:
                out[(c.source, c.destination)] = float(self.latency_mean[c.class_id])
        return out

    def latency_report(self) -> LatencyReport:
        """Per-pair simulated latency in the analytical report schema."""
        pairs = tuple(PairLatency(c.source, c.destination, c.class_id, None,
                                  float(self.latency_mean[c.class_id]))
                      for c in self.classes if self.latency_count[c.class_id] > 0)
        return LatencyReport(pairs)

    def mean_latency(self) -> float:
        """Flit-weighted mean latency over all measured flits."""
        n = self.latency_count.sum()
        if n == 0:
            return math.nan
        return float((self.latency_mean * self.latency_count).sum() / n)

    def queue_class_wait(self) -> dict[tuple[int, int], float]:
        """Mean waiting time per (queue id, class id)."""
        out = {}
        for c in self.classes:
            lo, hi = self.hop_ptr[c.class_id], self.hop_ptr[c.class_id + 1]
            for h in range(lo, hi):
                if self.hop_wait_count[h] > 0:
                    out[(int(self.hop_queue[h]), c.class_id)] = float(self.hop_wait_mean[h])
        return out

    def class_wait(self, class_id: int, hop: int = 0) -> float:
        h = self.hop_ptr[class_id] + hop
        return float(self.hop_wait_mean[h])


def _flatten_routes(classes: Sequence[TrafficClass]):
    counts = np.array([len(c.route) for c in classes], dtype=np.int32)
    ptr = np.zeros(len(classes) + 1, dtype=np.int32)
    np.cumsum(counts, out=ptr[1:])
    hop_q = np.array([h.queue for c in classes for h in c.route], dtype=np.int32)
    hop_s = np.array([h.server for c in classes for h in c.route], dtype=np.int32)
    hop_d = np.array([h.delay for c in classes for h in c.route], dtype=np.int64)
    return ptr, hop_q, hop_s, hop_d


def _server_inputs(model: NocModel, hop_q, hop_s):
    """CSR of the queues feeding each server, ordered by level then id."""
    feeds = [set() for _ in range(model.n_servers)]
    for q, s in zip(hop_q.tolist(), hop_s.tolist()):
        feeds[s].add(q)
    ptr = np.zeros(model.n_servers + 1, dtype=np.int32)
    flat = []
    for s, qs in enumerate(feeds):
        ordered = sorted(qs, key=lambda q: (model.queues[q].level, q))
        flat.extend(ordered)
        ptr[s + 1] = len(flat)
    return ptr, np.array(flat, dtype=np.int32)


class _FlitPool:
    def __init__(self, size):
        self.f_cls = np.zeros(size, dtype=np.int32)
        self.f_hop = np.zeros(size, dtype=np.int32)
        self.f_ready = np.zeros(size, dtype=np.int64)
        self.f_inject = np.zeros(size, dtype=np.int64)
        self.f_next = np.full(size, -1, dtype=np.int32)
        self.f_uid = np.zeros(size, dtype=np.int64)
        self.free_list = np.arange(size - 1, -1, -1, dtype=np.int32)

    @property
    def size(self):
        return self.f_cls.shape[0]

    def grow(self, counters):
        old = self.size
        new = old * 2
        for name in ("f_cls", "f_hop", "f_ready", "f_inject", "f_uid"):
            arr = getattr(self, name)
            grown = np.zeros(new, dtype=arr.dtype)
            grown[:old] = arr
            setattr(self, name, grown)
        nxt = np.full(new, -1, dtype=np.int32)
        nxt[:old] = self.f_next
        self.f_next = nxt
        top = int(counters[kernel.C_FREE_TOP])
        free = np.empty(new, dtype=np.int32)
        free[:top] = self.free_list[:top]
        free[top:top + old] = np.arange(new - 1, old - 1, -1, dtype=np.int32)
        self.free_list = free
        counters[kernel.C_FREE_TOP] = top + old


def run(config: SimConfig, hold_port: bool = True) -> SimReport:
    """Simulate ``config`` and collect steady-state statistics.

    ``hold_port`` keeps a queue's read port busy for the whole transfer,
    so each queue serves one flit at a time.
    """
    model = config.model
    classes = model.bind(config.matrix)
    n_cls = len(classes)
    nq, ns = model.n_queues, model.n_servers
    warmup, total = config.warmup_cycles, config.total_cycles

    cls_ptr, hop_q, hop_s, hop_d = _flatten_routes(classes)
    srv_ptr, srv_queues = _server_inputs(model, hop_q, hop_s)
    q_level = np.array([q.level for q in model.queues], dtype=np.int32)
    q_service = np.array([int(q.service.mean_T) for q in model.queues], dtype=np.int64)
    q_hold = np.full(nq, 1 if hold_port else 0, dtype=np.int8)
    max_transit = int((q_service.max(initial=1)) + (hop_d.max(initial=0)))
    wheel = max_transit + 2

    pool = _FlitPool(INITIAL_POOL)
    q_head = np.full(nq, -1, dtype=np.int32)
    q_tail = np.full(nq, -1, dtype=np.int32)
    q_len = np.zeros(nq, dtype=np.int64)
    q_port_free = np.zeros(nq, dtype=np.int64)
    q_maxlen = np.zeros(nq, dtype=np.int64)
    s_busy = np.zeros(ns, dtype=np.int64)
    s_rr = np.zeros(ns, dtype=np.int32)
    w_head = np.full(wheel, -1, dtype=np.int32)
    w_tail = np.full(wheel, -1, dtype=np.int32)
    counters = np.zeros(8, dtype=np.int64)
    counters[kernel.C_FREE_TOP] = pool.size

    c_lat_sum = np.zeros(n_cls)
    c_lat_sq = np.zeros(n_cls)
    c_lat_cnt = np.zeros(n_cls, dtype=np.int64)
    n_hops = int(cls_ptr[-1])
    hop_wait_sum = np.zeros(n_hops)
    hop_wait_cnt = np.zeros(n_hops, dtype=np.int64)
    c_inj_last = np.full(n_cls, -1, dtype=np.int64)
    c_gap_n = np.zeros(n_cls, dtype=np.int64)
    c_gap_sum = np.zeros(n_cls)
    c_gap_sq = np.zeros(n_cls)
    s_last_dep = np.full(ns, -1, dtype=np.int64)
    s_gap_n = np.zeros(ns, dtype=np.int64)
    s_gap_sum = np.zeros(ns)
    s_gap_sq = np.zeros(ns)
    q_arrivals = np.zeros(nq, dtype=np.int64)
    q_occ = np.zeros(nq)
    q_grants = np.zeros(nq, dtype=np.int64)
    q_wait_sum = np.zeros(nq)
    trace = np.zeros((config.trace_capacity if config.trace else 1, 6), dtype=np.int64)

    schedule = InjectionSchedule(classes, config.seed, config.injection, config.injection_period)
    dropped = 0
    t = 0
    while t < total:
        t_end = min(total, t + CHUNK_CYCLES)
        ev_time, ev_cls = schedule.events(t, t_end)
        ev_pos = 0
        while t < t_end:
            status, t, ev_pos = kernel.run_chunk(
                t, t_end, warmup, ev_time, ev_cls, ev_pos,
                cls_ptr, hop_q, hop_s, hop_d, q_level, q_service, q_hold, srv_ptr, srv_queues,
                pool.f_cls, pool.f_hop, pool.f_ready, pool.f_inject, pool.f_next, pool.f_uid,
                pool.free_list,
                q_head, q_tail, q_len, q_port_free, q_maxlen, s_busy, s_rr, w_head, w_tail,
                counters, c_lat_sum, c_lat_sq, c_lat_cnt, hop_wait_sum, hop_wait_cnt,
                c_inj_last, c_gap_n, c_gap_sum, c_gap_sq, s_last_dep, s_gap_n, s_gap_sum, s_gap_sq,
                q_arrivals, q_occ, q_grants, q_wait_sum, trace, config.trace)
            if status == kernel.STATUS_POOL_EXHAUSTED:
                if pool.size >= MAX_POOL:
                    # saturated network: drop this cycle's injections and go on
                    while ev_pos < ev_time.size and ev_time[ev_pos] == t:
                        ev_pos += 1
                        dropped += 1
                    ev_time = ev_time[ev_pos:]
                    ev_cls = ev_cls[ev_pos:]
                    ev_pos = 0
                    status, t, ev_pos = kernel.run_chunk(
                        t, t + 1, warmup, ev_time[:0], ev_cls[:0], 0,
                        cls_ptr, hop_q, hop_s, hop_d, q_level, q_service, q_hold, srv_ptr,
                        srv_queues, pool.f_cls, pool.f_hop, pool.f_ready, pool.f_inject,
                        pool.f_next, pool.f_uid, pool.free_list,
                        q_head, q_tail, q_len, q_port_free, q_maxlen, s_busy, s_rr, w_head, w_tail,
                        counters, c_lat_sum, c_lat_sq, c_lat_cnt, hop_wait_sum, hop_wait_cnt,
                        c_inj_last, c_gap_n, c_gap_sum, c_gap_sq, s_last_dep, s_gap_n, s_gap_sum,
                        s_gap_sq, q_arrivals, q_occ, q_grants, q_wait_sum, trace, config.trace)
                else:
                    pool.grow(counters)

    with np.errstate(invalid="ignore", divide="ignore"):
        lat_mean = np.where(c_lat_cnt > 0, c_lat_sum / np.maximum(c_lat_cnt, 1), np.nan)
        lat_var = np.where(c_lat_cnt > 1, c_lat_sq / np.maximum(c_lat_cnt, 1) - lat_mean**2, np.nan)
        gap_mean = np.where(c_gap_n > 0, c_gap_sum / np.maximum(c_gap_n, 1), np.nan)
        gap_cv2 = (c_gap_sq / np.maximum(c_gap_n, 1) - gap_mean**2) / gap_mean**2
        hop_mean = np.where(hop_wait_cnt > 0, hop_wait_sum / np.maximum(hop_wait_cnt, 1), np.nan)
        dep_mean = np.where(s_gap_n > 0, s_gap_sum / np.maximum(s_gap_n, 1), np.nan)
        dep_cv2 = (s_gap_sq / np.maximum(s_gap_n, 1) - dep_mean**2) / dep_mean**2

    injected = int(counters[kernel.C_INJECTED])
    delivered = int(counters[kernel.C_DELIVERED])
    unstable = tuple(int(q) for q in np.nonzero(q_len > BACKLOG_LIMIT)[0])
    if dropped:
        unstable = tuple(sorted(set(unstable) | set(int(q) for q in np.argsort(q_len)[-1:])))
    trace_out = trace[: counters[kernel.C_TRACE_N]].copy() if config.trace else None
    return SimReport(
        classes=classes,
        measured_cycles=total - warmup,
        latency_mean=lat_mean,
        latency_var=lat_var,
        latency_count=c_lat_cnt,
        gap_count=c_gap_n,
        gap_mean=gap_mean,
        gap_cv2=gap_cv2,
        hop_ptr=cls_ptr,
        hop_queue=hop_q,
        hop_server=hop_s,
        hop_wait_mean=hop_mean,
        hop_wait_count=hop_wait_cnt,
        queue_arrivals=q_arrivals,
        queue_grants=q_grants,
        queue_wait_sum=q_wait_sum,
        queue_occupancy=q_occ,
        queue_max_len=q_maxlen,
        queue_final_len=q_len.copy(),
        departure_count=s_gap_n,
        departure_gap_mean=dep_mean,
        departure_gap_cv2=dep_cv2,
        injected=injected,
        delivered=delivered,
        in_flight=injected - delivered,
        dropped=dropped,
        unstable_queues=unstable,
        trace=trace_out,
        meta={"seed": config.seed, "total_cycles": total, "warmup_cycles": warmup,
              "hold_port": hold_port},
    )


def measure_interarrival_cv(report: SimReport, flow: int | tuple[int, int],
                            min_samples: int = 10_000) -> float:
    """Empirical squared CV of the inter-injection gaps of one flow.

    ``flow`` is a class id or a ``(source, destination)`` pair.
    """
    if isinstance(flow, tuple):
        matches = [c.class_id for c in report.classes if (c.source, c.destination) == flow]
        if not matches:
            raise DiagnosticsError(f"no flow {flow} in report")
        flow = matches[0]
    n = int(report.gap_count[flow])
    if n + 1 < min_samples:
        raise DiagnosticsError(f"flow {flow} has {n + 1} injections, need {min_samples}")
    return float(report.gap_cv2[flow])


def littles_law_check(report: SimReport, queue: int) -> float:
    """Relative mismatch ``|L - lambda*W| / (lambda*W)`` for one queue."""
    cycles = report.measured_cycles
    grants = report.queue_grants[queue]
    arrivals = report.queue_arrivals[queue]
    if arrivals == 0 or grants == 0:
        return 0.0
    occupancy = report.queue_occupancy[queue] / cycles
    lam = arrivals / cycles
    wait = report.queue_wait_sum[queue] / grants
    if lam * wait == 0.0:
        return 0.0 if occupancy == 0.0 else math.inf
    return float(abs(occupancy - lam * wait) / (lam * wait))
