"""Event traces and the replay oracles that audit them.

A trace is an ``(n, 6)`` int64 array of ``[cycle, event, queue, class,
flit_id, server]`` rows in the order the kernel produced them. The text
form drops the server column and writes ``cycle,event,queue,class,flit_id``
lines with event names.

:func:`replay` rebuilds every queue from the enqueue and grant events
and, cycle by cycle and server by server, checks that

* a grant always goes to an eligible queue of the highest waiting
  priority level (priority correctness);
* an idle server never skips a cycle while some queue has an eligible
  head flit for it (work conservation);
* flits of one class are delivered in injection order (FIFO).
"""

from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np

from ..errors import FormatError
from ..network import NocModel, TrafficClass
from .kernel import EV_DELIVER, EV_ENQUEUE, EV_GRANT, EV_INJECT

EVENT_NAMES = {EV_INJECT: "inject", EV_ENQUEUE: "enqueue", EV_GRANT: "grant", EV_DELIVER: "deliver"}
EVENT_CODES = {v: k for k, v in EVENT_NAMES.items()}
TRACE_HEADER = ("cycle", "event", "queue", "class", "flit_id")


def write_trace(trace: np.ndarray, out: str | Path | TextIO) -> None:
    rows = ((int(r[0]), EVENT_NAMES[int(r[1])], int(r[2]), int(r[3]), int(r[4])) for r in trace)
    if isinstance(out, (str, Path)):
        with open(out, "w", encoding="utf-8", newline="") as fh:
            _write_rows(fh, rows)
    else:
        _write_rows(out, rows)


def _write_rows(fh, rows):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    w.writerows(rows)


def read_trace(source: str | Path | TextIO) -> np.ndarray:
    """Parse a text trace; the server column comes back as -1."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != TRACE_HEADER:
        raise FormatError(f"trace header must be {','.join(TRACE_HEADER)}")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            rows.append((int(row[0]), EVENT_CODES[row[1]], int(row[2]), int(row[3]), int(row[4]), -1))
        except (KeyError, ValueError, IndexError):
            raise FormatError(f"trace line {lineno}: cannot parse {row!r}") from None
    return np.array(rows, dtype=np.int64).reshape(-1, 6)


@dataclass
class TraceAudit:
    cycles_checked: int = 0
    grants_checked: int = 0
    priority_violations: list[str] = field(default_factory=list)
    idle_violations: list[str] = field(default_factory=list)
    fifo_violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.priority_violations or self.idle_violations or self.fifo_violations)


def replay(trace: np.ndarray, model: NocModel, classes: Sequence[TrafficClass],
           hold_port: bool = True, max_reports: int = 20) -> TraceAudit:
    """Audit a kernel trace against the arbitration rules."""
    audit = TraceAudit()
    service = [int(q.service.mean_T) for q in model.queues]
    level = [q.level for q in model.queues]
    feeds: list[set[int]] = [set() for _ in range(model.n_servers)]
    for c in classes:
        for h in c.route:
            feeds[h.server].add(h.queue)

    queues = [deque() for _ in range(model.n_queues)]  # (uid, class, server wanted)
    hop_of: dict[int, int] = {}
    port_free = [0] * model.n_queues
    busy_until = [0] * model.n_servers

    def note(bucket, msg):
        if len(bucket) < max_reports:
            bucket.append(msg)

    def eligible(o, t):
        return [q for q in feeds[o] if queues[q] and queues[q][0][2] == o and port_free[q] <= t]

    rows = trace[trace[:, 1] != EV_DELIVER]
    n = rows.shape[0]
    i = 0
    last = int(rows[-1, 0]) if n else -1
    for t in range(int(rows[0, 0]) if n else 0, last + 1):
        # phase 1: arrivals
        while i < n and rows[i, 0] == t and rows[i, 1] == EV_ENQUEUE:
            _, _, q, c, uid, _ = (int(x) for x in rows[i])
            hop = hop_of.get(uid, 0)
            hop_of[uid] = hop
            queues[q].append((uid, c, classes[c].route[hop].server))
            i += 1
        # phase 2: grants, in server order
        grants = {}
        while i < n and rows[i, 0] == t and rows[i, 1] == EV_GRANT:
            _, _, q, c, uid, srv = (int(x) for x in rows[i])
            if srv < 0:
                srv = classes[c].route[hop_of[uid]].server
            grants[srv] = (q, uid)
            i += 1
        for o in range(model.n_servers):
            if busy_until[o] > t:
                if o in grants:
                    note(audit.priority_violations, f"cycle {t}: server {o} granted while busy")
                continue
            cand = eligible(o, t)
            if o not in grants:
                if cand:
                    note(audit.idle_violations,
                         f"cycle {t}: server {o} idle with eligible queues {sorted(cand)}")
                continue
            q, uid = grants.pop(o)
            audit.grants_checked += 1
            if q not in cand:
                note(audit.priority_violations, f"cycle {t}: server {o} granted ineligible queue {q}")
            elif level[q] > min(level[k] for k in cand):
                note(audit.priority_violations,
                     f"cycle {t}: server {o} granted level {level[q]} over level "
                     f"{min(level[k] for k in cand)}")
            if queues[q] and queues[q][0][0] == uid:
                queues[q].popleft()
            else:
                note(audit.priority_violations, f"cycle {t}: flit {uid} granted out of FIFO order")
                queues[q] = deque(e for e in queues[q] if e[0] != uid)
            hop_of[uid] += 1
            busy_until[o] = t + service[q]
            port_free[q] = t + service[q] if hold_port else t + 1
        for o in grants:
            note(audit.priority_violations, f"cycle {t}: grant at unknown server {o}")
        # phase 3: injections carry no queue state
        while i < n and rows[i, 0] == t and rows[i, 1] == EV_INJECT:
            i += 1
        if i < n and rows[i, 0] <= t:
            raise FormatError(f"cycle {t}: events out of kernel order")
        audit.cycles_checked += 1

    deliveries = trace[trace[:, 1] == EV_DELIVER]
    order = np.argsort(deliveries[:, 0], kind="stable")
    last_uid: dict[int, int] = {}
    for r in deliveries[order]:
        c, uid = int(r[3]), int(r[4])
        if uid < last_uid.get(c, -1):
            note(audit.fifo_violations, f"class {c}: flit {uid} delivered after flit {last_uid[c]}")
        last_uid[c] = max(uid, last_uid.get(c, -1))
    return audit
