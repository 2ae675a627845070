"""Network-wide queueing-time computation and end-to-end latency.

The network is analysed per *stream*: the flits of one queue that are
bound for one server. Streams at a server arbitrate by queue level, so a
stream sees every lower-numbered level as higher priority. Each stream's
arrival process is a merge of components, either fresh injections
(geometric) or the share of an upstream server's departures that turns
into this stream. Departure variability is propagated with the
merge/depart/split decomposition and iterated to a fixed point, since
ring traffic is cyclic.

Per stream the computation follows the two canonical transforms:

* a reference wait ``W_ref`` from the basic priority recursion, where a
  higher-priority stream contributes ``R_j + rho_j + rho_j * W_j``;
* when higher-priority streams exist, the blocking they impose stretches
  the stream's service to ``T* = T + dT`` and its residual becomes
  ``R* = (1 - rho*) (W_ref - dT)``;
* a queue holding several streams is a FIFO over their modified
  residuals and utilizations, and stream ``i`` waits
  ``sum R* / (1 - sum rho*) + dT_i``.

A queue with one stream reduces to ``W_ref`` exactly.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConsistencyError, DomainError, FormatError, StabilityError
from .network import NocModel, TrafficClass, TrafficMatrix
from .priority import STABILITY_LIMIT

__all__ = [
    "RESIDUAL_MODES",
    "PEER_POLICIES",
    "StreamResult",
    "ClassQueueingTimes",
    "PairLatency",
    "LatencyReport",
    "Comparison",
    "analyze",
    "end_to_end",
    "compare",
    "REPORT_HEADER",
    "read_report_csv",
]

# "geometric": every stream uses the Geo/G/1 residual (default).
# "printed": departure-fed streams use the split residual of the
# structural transform, which halves the residual of smooth streams and
# underestimates waits against the simulator.
RESIDUAL_MODES = ("geometric", "printed")
# Same-level streams at one server: "aggregate" counts their load in the
# denominator like a shared FIFO, "residual" counts only their residual.
PEER_POLICIES = ("aggregate", "residual")

CLAMP = 1e-12
_MIN_DEN = 1.0 - STABILITY_LIMIT


@dataclass(frozen=True)
class StreamResult:
    queue: int
    server: int
    level: int
    rate: float
    rho: float
    cv2_arrival: float
    residual: float
    w_ref: float
    delta_T: float
    T_star: float
    rho_star: float
    R_star: float
    wait: float


@dataclass(frozen=True)
class ClassQueueingTimes:
    """Waiting time and service stretch per (queue id, class id)."""

    classes: tuple[TrafficClass, ...]
    waiting: Mapping[tuple[int, int], float]
    delta_T: Mapping[tuple[int, int], float]
    streams: tuple[StreamResult, ...] = ()
    cv2_departure: np.ndarray | None = None
    hop_ptr: np.ndarray | None = field(default=None, repr=False)
    hop_latency: np.ndarray | None = field(default=None, repr=False)

    def class_total_wait(self, class_id: int) -> float:
        c = self.classes[class_id]
        return sum(self.waiting[h.queue, class_id] for h in c.route)


class _Flat:
    """Routes of all classes flattened into per-hop arrays."""

    def __init__(self, model: NocModel, classes: Sequence[TrafficClass]):
        counts = [len(c.route) for c in classes]
        self.ptr = np.zeros(len(classes) + 1, dtype=np.int64)
        np.cumsum(counts, out=self.ptr[1:])
        n = int(self.ptr[-1])
        self.cls = np.repeat(np.arange(len(classes), dtype=np.int64), counts)
        hops = [h for c in classes for h in c.route]
        self.q = np.fromiter((h.queue for h in hops), dtype=np.int64, count=n)
        self.s = np.fromiter((h.server for h in hops), dtype=np.int64, count=n)
        self.d = np.fromiter((h.delay for h in hops), dtype=np.float64, count=n)
        rates = np.array([c.rate for c in classes], dtype=np.float64)
        self.rate = rates[self.cls] if n else np.zeros(0)
        self.prev = np.full(n, -1, dtype=np.int64)
        if n:
            first = np.zeros(n, dtype=bool)
            first[self.ptr[:-1][np.array(counts) > 0]] = True
            self.prev[~first] = self.s[np.nonzero(~first)[0] - 1]


def analyze(model: NocModel, matrix: TrafficMatrix, *, residual: str = "geometric",
            peers: str = "aggregate", max_iter: int = 500, tol: float = 1e-12) -> ClassQueueingTimes:
    """Queueing time of every class at every queue on its route."""
    if residual not in RESIDUAL_MODES:
        raise DomainError(f"residual must be one of {RESIDUAL_MODES}, got {residual!r}")
    if peers not in PEER_POLICIES:
        raise DomainError(f"peers must be one of {PEER_POLICIES}, got {peers!r}")
    classes = model.bind(matrix)
    ns = model.n_servers
    if not classes:
        return ClassQueueingTimes((), {}, {}, (), np.ones(ns), np.zeros(1, dtype=np.int64), np.zeros(0))
    flat = _Flat(model, classes)

    q_T = np.array([q.service.mean_T for q in model.queues])
    q_T2 = np.array([q.service.second_moment_T2 for q in model.queues])
    q_cvB = np.array([q.service.cv2_service for q in model.queues])
    q_level = np.array([q.level for q in model.queues], dtype=np.int64)

    # streams: (queue, server)
    skey, h_stream = np.unique(flat.q * ns + flat.s, return_inverse=True)
    n_str = skey.size
    s_q = skey // ns
    s_o = skey % ns
    s_rate = np.bincount(h_stream, flat.rate, n_str)
    s_T = q_T[s_q]
    s_rho = s_rate * s_T
    s_level = q_level[s_q]

    # utilization checks: queue read ports and servers
    q_rho = np.bincount(s_q, s_rho, model.n_queues)
    o_rate = np.bincount(s_o, s_rate, ns)
    o_rho = np.bincount(s_o, s_rho, ns)
    for arr, kind, names in ((q_rho, "queue", model.queues), (o_rho, "server", model.servers)):
        worst = int(np.argmax(arr))
        if arr[worst] >= STABILITY_LIMIT:
            raise StabilityError(f"{kind} {names[worst].name} utilization {arr[worst]:.6g} >= 1",
                                 where=names[worst].name)

    # arrival components: (upstream server or -1, stream)
    ckey, h_comp = np.unique((flat.prev + 1) * n_str + h_stream, return_inverse=True)
    n_comp = ckey.size
    c_prev = ckey // n_str - 1
    c_stream = ckey % n_str
    c_rate = np.bincount(h_comp, flat.rate, n_comp)
    c_sq = np.bincount(h_comp, flat.rate ** 2, n_comp)
    fresh = c_prev < 0
    fresh_cv2 = 1.0 - c_sq / np.where(c_rate > 0, c_rate, 1.0)
    up = np.where(fresh, 0, c_prev)
    frac = np.where(fresh, 1.0, c_rate / np.where(o_rate[up] > 0, o_rate[up], 1.0))

    o_safe = np.where(o_rate > 0, o_rate, 1.0)
    o_T = np.where(o_rate > 0, o_rho / o_safe, 1.0)
    o_T2 = np.bincount(s_o, s_rate * q_T2[s_q], ns) / o_safe
    o_cvB = np.where(o_rate > 0, np.maximum(o_T2 / (o_T * o_T) - 1.0, 0.0), 0.0)
    c_o = s_o[c_stream]

    cd2 = np.ones(ns)
    comp_cv2 = fresh_cv2
    for _ in range(max_iter):
        comp_cv2 = np.where(fresh, fresh_cv2, 1.0 + frac * (cd2[up] - 1.0))
        ca2 = np.bincount(c_o, c_rate * comp_cv2, ns) / o_safe
        new = (1.0 - o_rho ** 2) * ca2 + o_rho ** 2 * o_cvB
        new = np.where(o_rate > 0, new, 1.0)
        delta = np.max(np.abs(new - cd2))
        cd2 = new
        if delta < tol:
            break
    comp_cv2 = np.where(fresh, fresh_cv2, 1.0 + frac * (cd2[up] - 1.0))

    c_T = s_T[c_stream]
    c_T2 = q_T2[s_q[c_stream]]
    geo = 0.5 * c_rate * (c_T2 - c_T)
    if residual == "printed":
        c_rho = c_rate * c_T
        split = 0.5 * (c_rho * c_T) * (0.5 * (comp_cv2 + q_cvB[s_q[c_stream]])) - 0.5 * c_rho / c_T
        c_R = np.where(fresh, geo, split)
    else:
        c_R = geo
    s_R = np.bincount(c_stream, c_R, n_str)
    s_cv2 = np.bincount(c_stream, c_rate * comp_cv2, n_str) / np.where(s_rate > 0, s_rate, 1.0)
    o_R = np.bincount(s_o, s_R, ns)

    # per-server stream lists
    by_server: dict[int, list[int]] = {}
    for k in range(n_str):
        by_server.setdefault(int(s_o[k]), []).append(k)

    w_ref = np.zeros(n_str)
    dT = np.zeros(n_str)
    for k in np.lexsort((np.arange(n_str), s_level)):
        o = int(s_o[k])
        lvl = s_level[k]
        num2 = o_R[o]
        den2 = 1.0 - s_rho[k]
        hp_rho = 0.0
        hp_rate = 0.0
        for j in by_server[o]:
            if j == k:
                continue
            if s_level[j] < lvl:
                num2 += s_rho[j] + s_rho[j] * w_ref[j]
                den2 -= s_rho[j]
                hp_rho += s_rho[j]
                hp_rate += s_rate[j]
            elif s_level[j] == lvl and peers == "aggregate":
                den2 -= s_rho[j]
        name = model.queues[s_q[k]].name
        if den2 <= _MIN_DEN:
            raise StabilityError(f"queue {name} toward {model.servers[o].name} is unstable "
                                 f"(denominator {den2:.6g})", where=name)
        w_ref[k] = num2 / den2
        if hp_rate > 0.0:
            p = hp_rho + hp_rate * s_R[k]
            if p >= STABILITY_LIMIT:
                raise StabilityError(f"queue {name}: blocking probability {p:.6g} >= 1", where=name)
            dT[k] = (hp_rho / hp_rate) * p / (1.0 - p)

    T_star = s_T + dT
    rho_star = s_rate * T_star
    R_star = (1.0 - rho_star) * (w_ref - dT)
    s_wait = w_ref.copy()
    q_streams: dict[int, list[int]] = {}
    for k in range(n_str):
        q_streams.setdefault(int(s_q[k]), []).append(k)
    for q, members in q_streams.items():
        if len(members) < 2:
            continue
        den1 = 1.0 - rho_star[members].sum()
        if den1 <= _MIN_DEN:
            raise StabilityError(f"queue {model.queues[q].name} is unstable after service "
                                 f"stretching (sum rho* = {1.0 - den1:.6g})", where=model.queues[q].name)
        base = R_star[members].sum() / den1
        for k in members:
            s_wait[k] = base + dT[k]
    s_wait = np.where(s_wait < CLAMP, 0.0, s_wait)

    hop_wait = s_wait[h_stream]
    hop_dT = dT[h_stream]
    keys = list(zip(flat.q.tolist(), flat.cls.tolist()))
    waiting = dict(zip(keys, hop_wait.tolist()))
    delta = dict(zip(keys, hop_dT.tolist()))
    streams = tuple(
        StreamResult(int(s_q[k]), int(s_o[k]), int(s_level[k]), float(s_rate[k]), float(s_rho[k]),
                     float(s_cv2[k]), float(s_R[k]), float(w_ref[k]), float(dT[k]), float(T_star[k]),
                     float(rho_star[k]), float(R_star[k]), float(s_wait[k]))
        for k in range(n_str))
    return ClassQueueingTimes(classes, waiting, delta, streams, cd2, flat.ptr,
                              hop_wait + q_T[flat.q] + flat.d)


@dataclass(frozen=True)
class PairLatency:
    source: int
    destination: int
    class_id: int
    analytical: float | None = None
    simulated: float | None = None

    @property
    def mape(self) -> float | None:
        if self.analytical is None or self.simulated is None or self.simulated == 0:
            return None
        return 100.0 * abs(self.simulated - self.analytical) / self.simulated


REPORT_HEADER = ("source", "destination", "class", "analytical_latency", "sim_latency", "mape")


@dataclass(frozen=True)
class LatencyReport:
    pairs: tuple[PairLatency, ...]

    def by_pair(self) -> dict[tuple[int, int], PairLatency]:
        return {(p.source, p.destination): p for p in self.pairs}

    def mean_latency(self, which: str = "analytical") -> float:
        vals = [getattr(p, which) for p in self.pairs if getattr(p, which) is not None]
        return float(np.mean(vals)) if vals else math.nan

    def weighted_mean(self, matrix: TrafficMatrix, which: str = "analytical") -> float:
        """Flit-weighted mean latency under ``matrix``."""
        num = den = 0.0
        entries = matrix.entries
        for p in self.pairs:
            val = getattr(p, which)
            rate = entries.get((p.source, p.destination), 0.0)
            if val is not None and rate > 0:
                num += rate * val
                den += rate
        return num / den if den else math.nan

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_HEADER)

        def fmt(x):
            return "" if x is None else f"{x:.6f}"

        for p in self.pairs:
            w.writerow([p.source, p.destination, p.class_id, fmt(p.analytical), fmt(p.simulated),
                        fmt(p.mape)])
        return buf.getvalue()

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def end_to_end(model: NocModel, matrix: TrafficMatrix, times: ClassQueueingTimes) -> LatencyReport:
    """Per-pair latency: sum over hops of wait + service + wire delay."""
    classes = model.bind(matrix)
    if times.hop_latency is not None and (times.classes is classes or times.classes == classes):
        totals = np.add.reduceat(times.hop_latency, times.hop_ptr[:-1]) if classes else np.zeros(0)
        return LatencyReport(tuple(PairLatency(c.source, c.destination, c.class_id, float(totals[c.class_id]))
                                   for c in classes))
    out = []
    for c in classes:
        total = 0.0
        for h in c.route:
            try:
                w = times.waiting[h.queue, c.class_id]
            except KeyError:
                raise ConsistencyError(f"no waiting time for class {c.class_id} at queue "
                                       f"{model.queues[h.queue].name}") from None
            total += w + model.queues[h.queue].service.mean_T + h.delay
        out.append(PairLatency(c.source, c.destination, c.class_id, total))
    return LatencyReport(tuple(out))


@dataclass(frozen=True)
class Comparison:
    report: LatencyReport
    mean_mape: float
    max_mape: float
    excluded: tuple[tuple[int, int], ...]


def compare(analytical: LatencyReport, simulated: LatencyReport) -> Comparison:
    """Per-pair and aggregate MAPE of analytical against simulated latency.

    Pairs whose simulated latency is zero or missing are excluded and
    listed in ``excluded``.
    """
    a = analytical.by_pair()
    s = simulated.by_pair()
    if set(a) != set(s):
        missing = sorted(set(a) ^ set(s))
        raise ConsistencyError(f"reports cover different pairs, e.g. {missing[:5]}")
    pairs, errors, excluded = [], [], []
    for key in sorted(a):
        pa, ps = a[key], s[key]
        merged = PairLatency(key[0], key[1], pa.class_id, pa.analytical, ps.simulated)
        pairs.append(merged)
        if merged.mape is None:
            excluded.append(key)
        else:
            errors.append(merged.mape)
    mean = float(np.mean(errors)) if errors else math.nan
    worst = float(np.max(errors)) if errors else math.nan
    return Comparison(LatencyReport(tuple(pairs)), mean, worst, tuple(excluded))


def read_report_csv(path: str | Path) -> LatencyReport:
    """Load a report written by :meth:`LatencyReport.to_csv`."""
    text = Path(path).read_text(encoding="utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != REPORT_HEADER:
        raise FormatError(f"{path}: expected header {','.join(REPORT_HEADER)}")

    def num(x):
        return float(x) if x.strip() else None

    pairs = []
    seen = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(REPORT_HEADER):
            raise FormatError(f"{path}:{lineno}: expected {len(REPORT_HEADER)} fields")
        try:
            p = PairLatency(int(row[0]), int(row[1]), int(row[2]), num(row[3]), num(row[4]))
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from None
        if (p.source, p.destination) in seen:
            raise FormatError(f"{path}:{lineno}: duplicate pair ({p.source}, {p.destination})")
        seen.add((p.source, p.destination))
        pairs.append(p)
    return LatencyReport(tuple(pairs))
