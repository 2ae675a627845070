"""Priority NoC topology, routing and traffic representation.

A model is a set of FIFO queues and a set of servers (output links).
Every flit hop is a (queue, server, delay) triple: the flit waits in the
queue, is transferred through the server for the queue's service time,
then spends ``delay`` cycles on the wire before it enters the next queue
or is delivered. Servers arbitrate by queue priority level; through
traffic (level 0) beats switch traffic (level 1) beats local injection
(level 2).

Rings are bidirectional with shortest-direction routing (clockwise on
ties). A mesh is one vertical ring per column plus one horizontal ring per
row; flits ride the vertical ring first, turn through a switch queue of
the destination row, then ride the horizontal ring (Y-X routing).

By default every router has one injection queue per output port. A
single shared injection FIFO (``shared_injection=True``) is available but
its head-of-line blocking saturates well below the link-utilization
limit.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, FormatError
from .moments import ServiceMoments, deterministic_service

__all__ = [
    "LEVEL_THROUGH",
    "LEVEL_SWITCH",
    "LEVEL_INJECTION",
    "NocTopology",
    "QueueSpec",
    "ServerSpec",
    "Hop",
    "TrafficClass",
    "TrafficMatrix",
    "NocModel",
    "build_ring",
    "build_mesh",
    "build_custom",
    "uniform_traffic",
    "load_traffic_matrix",
    "lambda_max",
    "unit_loads",
]

LEVEL_THROUGH = 0
LEVEL_SWITCH = 1
LEVEL_INJECTION = 2

DEFAULT_SERVICE = 2
DEFAULT_LINK_LATENCY = 1
SHARED_INJECTION = False


@dataclass(frozen=True)
class NocTopology:
    kind: str  # "ring" | "mesh" | "custom"
    dims: tuple[int, ...]
    link_latency: int = DEFAULT_LINK_LATENCY
    switch_latency: int = DEFAULT_LINK_LATENCY

    @property
    def n_nodes(self) -> int:
        return math.prod(self.dims) if self.dims else 0


@dataclass(frozen=True)
class QueueSpec:
    qid: int
    name: str
    router: int
    role: str  # "injection" | "through" | "switch"
    level: int
    service: ServiceMoments


@dataclass(frozen=True)
class ServerSpec:
    sid: int
    name: str
    router: int


@dataclass(frozen=True)
class Hop:
    queue: int
    server: int
    delay: int


@dataclass(frozen=True)
class TrafficClass:
    class_id: int
    source: int
    destination: int
    rate: float
    route: tuple[Hop, ...]


class TrafficMatrix:
    """Per (source, destination) injection rates in flits/cycle."""

    def __init__(self, entries: Mapping[tuple[int, int], float] | None = None):
        clean: dict[tuple[int, int], float] = {}
        for (src, dst), rate in (entries or {}).items():
            rate = float(rate)
            if not math.isfinite(rate) or rate < 0.0:
                raise DomainError(f"rate for ({src}, {dst}) must be finite and >= 0, got {rate!r}")
            clean[(int(src), int(dst))] = rate
        totals: dict[int, float] = {}
        for (src, _), rate in clean.items():
            totals[src] = totals.get(src, 0.0) + rate
        for src, total in totals.items():
            if total >= 1.0:
                raise DomainError(f"source {src} injects {total:.6g} flits/cycle (must be < 1)")
        self._entries = dict(sorted(clean.items()))

    @property
    def entries(self) -> dict[tuple[int, int], float]:
        return dict(self._entries)

    def items(self):
        return self._entries.items()

    def __len__(self):
        return len(self._entries)

    def __eq__(self, other):
        return isinstance(other, TrafficMatrix) and self._entries == other._entries

    def __repr__(self):
        return f"TrafficMatrix({len(self._entries)} entries, total={self.total_rate():.6g})"

    def total_rate(self) -> float:
        return float(sum(self._entries.values()))

    def source_totals(self) -> dict[int, float]:
        totals: dict[int, float] = {}
        for (src, _), rate in self._entries.items():
            totals[src] = totals.get(src, 0.0) + rate
        return totals

    def scaled(self, factor: float) -> "TrafficMatrix":
        return TrafficMatrix({k: v * factor for k, v in self._entries.items()})

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["source", "destination", "rate"])
        for (src, dst), rate in self._entries.items():
            writer.writerow([src, dst, repr(rate)])
        return buf.getvalue()


class NocModel:
    """Immutable queue/server graph plus its routing function."""

    def __init__(self, topology: NocTopology, queues: Sequence[QueueSpec],
                 servers: Sequence[ServerSpec], nodes: Sequence[int], router):
        self.topology = topology
        self.queues = tuple(queues)
        self.servers = tuple(servers)
        self.nodes = tuple(nodes)
        self._router = router
        self._routes: dict[tuple[int, int], tuple[Hop, ...]] = {}
        self._last_bind: tuple[tuple, tuple[TrafficClass, ...]] | None = None
        self._queue_by_name = {q.name: q.qid for q in self.queues}
        self._server_by_name = {s.name: s.sid for s in self.servers}

    def __repr__(self):
        return (f"NocModel({self.topology.kind}{list(self.topology.dims)}, "
                f"{len(self.queues)} queues, {len(self.servers)} servers)")

    @property
    def n_queues(self) -> int:
        return len(self.queues)

    @property
    def n_servers(self) -> int:
        return len(self.servers)

    def queue_id(self, name: str) -> int:
        return self._queue_by_name[name]

    def server_id(self, name: str) -> int:
        return self._server_by_name[name]

    def queues_with_role(self, role: str) -> list[QueueSpec]:
        return [q for q in self.queues if q.role == role]

    def route(self, source: int, destination: int) -> tuple[Hop, ...]:
        key = (source, destination)
        hops = self._routes.get(key)
        if hops is None:
            if source not in self.nodes or destination not in self.nodes:
                raise DomainError(f"unknown node in pair {key}")
            if source == destination:
                raise DomainError(f"source equals destination: {key}")
            hops = tuple(self._router(source, destination))
            if not hops:
                raise DomainError(f"no route for pair {key}")
            self._routes[key] = hops
        return hops

    def bind(self, matrix: TrafficMatrix) -> tuple[TrafficClass, ...]:
        """Instantiate one traffic class per positive-rate matrix entry.

        The most recent binding is cached, so analysis and report assembly
        on the same matrix share one tuple of classes.
        """
        key = tuple(matrix.items())
        if self._last_bind is not None and self._last_bind[0] == key:
            return self._last_bind[1]
        classes = []
        for (src, dst), rate in matrix.items():
            if rate <= 0.0:
                continue
            classes.append(TrafficClass(len(classes), src, dst, rate, self.route(src, dst)))
        classes = tuple(classes)
        self._last_bind = (key, classes)
        return classes

    def node_coords(self, node: int) -> tuple[int, ...]:
        if self.topology.kind == "mesh":
            width = self.topology.dims[0]
            return divmod(node, width)
        return (node,)


def _ring_direction(src: int, dst: int, n: int) -> tuple[int, int]:
    """Return (step, distance); +1 is clockwise and wins ties."""
    cw = (dst - src) % n
    ccw = (src - dst) % n
    return (1, cw) if cw <= ccw else (-1, ccw)


def build_ring(n: int, service: ServiceMoments | int = DEFAULT_SERVICE,
               link_latency: int = DEFAULT_LINK_LATENCY,
               shared_injection: bool = SHARED_INJECTION) -> NocModel:
    """Bidirectional ring of ``n`` routers.

    With ``shared_injection`` each router has a single injection FIFO
    feeding both output directions; otherwise it has one injection FIFO
    per output direction.
    """
    if n < 2:
        raise DomainError(f"a ring needs at least 2 nodes, got {n}")
    if link_latency < 0:
        raise DomainError("link latency must be >= 0")
    if not isinstance(service, ServiceMoments):
        service = deterministic_service(service)

    queues: list[QueueSpec] = []
    servers: list[ServerSpec] = []
    inj = {}
    through = {}
    out = {}
    for r in range(n):
        if shared_injection:
            inj[r, 1] = inj[r, -1] = len(queues)
            queues.append(QueueSpec(len(queues), f"inj{r}", r, "injection", LEVEL_INJECTION, service))
        for step, tag in ((1, "cw"), (-1, "ccw")):
            if not shared_injection:
                inj[r, step] = len(queues)
                queues.append(QueueSpec(len(queues), f"inj{r}_{tag}", r, "injection",
                                        LEVEL_INJECTION, service))
            through[r, step] = len(queues)
            queues.append(QueueSpec(len(queues), f"thr{r}_{tag}", r, "through", LEVEL_THROUGH, service))
            out[r, step] = len(servers)
            servers.append(ServerSpec(len(servers), f"out{r}_{tag}", r))

    def router(src, dst):
        step, dist = _ring_direction(src, dst, n)
        hops = [Hop(inj[src, step], out[src, step], link_latency)]
        node = src
        for _ in range(dist - 1):
            node = (node + step) % n
            hops.append(Hop(through[node, step], out[node, step], link_latency))
        return hops

    topo = NocTopology("ring", (n,), link_latency, link_latency)
    return NocModel(topo, queues, servers, range(n), router)


def build_mesh(width: int, height: int, service: ServiceMoments | int = DEFAULT_SERVICE,
               link_latency: int = DEFAULT_LINK_LATENCY,
               switch_latency: int | None = None,
               shared_injection: bool = SHARED_INJECTION) -> NocModel:
    """Mesh of ``height`` rows by ``width`` columns; node id = row*width + col.

    Every router has one switch FIFO per (vertical direction, horizontal
    direction) turn. ``shared_injection`` selects a single injection FIFO
    per router instead of one per output port.
    """
    if width < 2 or height < 2:
        raise DomainError(f"mesh dimensions must be >= 2, got {width}x{height}")
    if switch_latency is None:
        switch_latency = link_latency
    if link_latency < 0 or switch_latency < 0:
        raise DomainError("latencies must be >= 0")
    if not isinstance(service, ServiceMoments):
        service = deterministic_service(service)

    queues: list[QueueSpec] = []
    servers: list[ServerSpec] = []
    inj, switch, through, out = {}, {}, {}, {}

    def nid(row, col):
        return row * width + col

    for row in range(height):
        for col in range(width):
            node = nid(row, col)
            if shared_injection:
                shared = len(queues)
                queues.append(QueueSpec(shared, f"inj{node}", node, "injection", LEVEL_INJECTION, service))
            for vs, vt in ((1, "+"), (-1, "-")):
                for hs, ht in ((1, "+"), (-1, "-")):
                    switch[node, vs, hs] = len(queues)
                    queues.append(QueueSpec(len(queues), f"sw{node}_v{vt}h{ht}", node, "switch",
                                            LEVEL_SWITCH, service))
            for axis in ("v", "h"):
                for step, tag in ((1, "+"), (-1, "-")):
                    if shared_injection:
                        inj[node, axis, step] = shared
                    else:
                        inj[node, axis, step] = len(queues)
                        queues.append(QueueSpec(len(queues), f"inj{node}_{axis}{tag}", node, "injection",
                                                LEVEL_INJECTION, service))
                    through[node, axis, step] = len(queues)
                    queues.append(QueueSpec(len(queues), f"thr{node}_{axis}{tag}", node, "through",
                                            LEVEL_THROUGH, service))
                    out[node, axis, step] = len(servers)
                    servers.append(ServerSpec(len(servers), f"out{node}_{axis}{tag}", node))

    def router(src, dst):
        rs, cs = divmod(src, width)
        rd, cd = divmod(dst, width)
        hops: list[Hop] = []
        row = rs
        vstep = 0
        if rs != rd:
            step, dist = _ring_direction(rs, rd, height)
            vstep = step
            hops.append(Hop(inj[src, "v", step], out[src, "v", step], link_latency))
            for _ in range(dist - 1):
                row = (row + step) % height
                node = nid(row, cs)
                hops.append(Hop(through[node, "v", step], out[node, "v", step], link_latency))
            row = rd
        if cs != cd:
            step, dist = _ring_direction(cs, cd, width)
            turn = nid(rd, cs)
            if hops:
                last = hops[-1]
                hops[-1] = Hop(last.queue, last.server, last.delay + switch_latency)
                first_queue = switch[turn, vstep, step]
            else:
                first_queue = inj[src, "h", step]
            hops.append(Hop(first_queue, out[turn, "h", step], link_latency))
            col = cs
            for _ in range(dist - 1):
                col = (col + step) % width
                node = nid(rd, col)
                hops.append(Hop(through[node, "h", step], out[node, "h", step], link_latency))
        return hops

    topo = NocTopology("mesh", (width, height), link_latency, switch_latency)
    return NocModel(topo, queues, servers, range(width * height), router)


def build_custom(queues: Sequence[tuple[str, int, ServiceMoments | int]],
                 servers: Sequence[str],
                 routes: Mapping[tuple[int, int], Sequence[tuple[str, str, int]]],
                 ) -> NocModel:
    """Arbitrary queue/server graph with explicit per-pair routes.

    ``queues`` holds ``(name, level, service)``; ``routes`` maps a
    ``(source, destination)`` pair to ``(queue_name, server_name, delay)``
    hops. Used for the canonical single-router fixtures.
    """
    qspecs = []
    for name, level, svc in queues:
        if not isinstance(svc, ServiceMoments):
            svc = deterministic_service(svc)
        qspecs.append(QueueSpec(len(qspecs), name, -1, "custom", int(level), svc))
    sspecs = [ServerSpec(k, name, -1) for k, name in enumerate(servers)]
    qid = {q.name: q.qid for q in qspecs}
    sid = {s.name: s.sid for s in sspecs}
    table = {}
    for pair, hops in routes.items():
        try:
            table[tuple(pair)] = [Hop(qid[q], sid[s], int(d)) for q, s, d in hops]
        except KeyError as exc:
            raise DomainError(f"route for {pair} names unknown element {exc}") from None
    nodes = sorted({n for pair in table for n in pair})

    def router(src, dst):
        if (src, dst) not in table:
            raise DomainError(f"unroutable pair ({src}, {dst})")
        return table[src, dst]

    topo = NocTopology("custom", (len(nodes),), 0, 0)
    return NocModel(topo, qspecs, sspecs, nodes, router)


def uniform_traffic(model: NocModel, rate_per_pair: float) -> TrafficMatrix:
    return TrafficMatrix({(s, d): rate_per_pair for s in model.nodes for d in model.nodes if s != d})


def _parse_node(token: str, model: NocModel | None, line: int) -> int:
    token = token.strip()
    if "." in token:
        if model is None or model.topology.kind != "mesh":
            raise FormatError(f"line {line}: row.col node id {token!r} only valid for a mesh")
        row_s, col_s = token.split(".", 1)
        try:
            row, col = int(row_s), int(col_s)
        except ValueError:
            raise FormatError(f"line {line}: bad node id {token!r}") from None
        width, height = model.topology.dims
        if not (0 <= row < height and 0 <= col < width):
            raise FormatError(f"line {line}: node {token!r} outside {width}x{height} mesh")
        return row * width + col
    try:
        node = int(token)
    except ValueError:
        raise FormatError(f"line {line}: bad node id {token!r}") from None
    if model is not None and node not in model.nodes:
        raise FormatError(f"line {line}: unknown node id {node}")
    return node


def load_traffic_matrix(source: str | Path | Iterable[Sequence], model: NocModel | None = None
                        ) -> TrafficMatrix:
    """Read ``source,destination,rate`` rows from a CSV path or an iterable of rows."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["source", "destination", "rate"]:
            raise FormatError("traffic matrix header must be 'source,destination,rate'")
        rows = rows[1:]
        first_line = 2
    else:
        rows = [list(map(str, r)) for r in source]
        first_line = 1
    entries: dict[tuple[int, int], float] = {}
    for k, row in enumerate(rows):
        line = first_line + k
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise FormatError(f"line {line}: expected 3 fields, got {len(row)}")
        src = _parse_node(row[0], model, line)
        dst = _parse_node(row[1], model, line)
        try:
            rate = float(row[2])
        except ValueError:
            raise FormatError(f"line {line}: bad rate {row[2]!r}") from None
        if (src, dst) in entries:
            raise FormatError(f"line {line}: duplicate pair ({src}, {dst})")
        if src == dst:
            raise FormatError(f"line {line}: source equals destination")
        entries[(src, dst)] = rate
    return TrafficMatrix(entries)


def unit_loads(model: NocModel, classes: Sequence[TrafficClass]) -> tuple[np.ndarray, np.ndarray]:
    """Utilization of every queue read port and every server."""
    q_load = np.zeros(model.n_queues)
    s_load = np.zeros(model.n_servers)
    for c in classes:
        for hop in c.route:
            t = model.queues[hop.queue].service.mean_T
            q_load[hop.queue] += c.rate * t
            s_load[hop.server] += c.rate * t
    return q_load, s_load


def lambda_max(model: NocModel, matrix_shape: TrafficMatrix) -> float:
    """Largest scale factor keeping every queue and server below full load.

    Returns ``math.inf`` when the matrix carries no traffic.
    """
    q_load, s_load = unit_loads(model, model.bind(matrix_shape))
    peak = max(q_load.max(initial=0.0), s_load.max(initial=0.0))
    if peak <= 0.0:
        return math.inf
    return 1.0 / peak
