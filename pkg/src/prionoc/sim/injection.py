"""Per-flow injection streams.

Every traffic class owns an independent PCG64 stream derived from the run
seed and the class's (source, destination) pair, so adding or removing a
flow never shifts another flow's draws. A Bernoulli(rate) process is
generated through its geometric gaps, which keeps the cost proportional
to the number of flits rather than the number of cycles.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..network import TrafficClass


def flow_generator(seed: int, source: int, destination: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF,
                                spawn_key=(int(source), int(destination)))
    return np.random.Generator(np.random.PCG64(ss))


class InjectionSchedule:
    """Produces sorted ``(cycle, class)`` injection events chunk by chunk.

    ``mode="periodic"`` is a deterministic test hook: every class injects
    once every ``period`` cycles starting at ``phase``.
    """

    def __init__(self, classes: Sequence[TrafficClass], seed: int,
                 mode: str = "bernoulli", period: int | None = None, phase: int = 0):
        if mode not in ("bernoulli", "periodic"):
            raise ValueError(f"unknown injection mode {mode!r}")
        if mode == "periodic" and (period is None or period < 1):
            raise ValueError("periodic injection needs a period >= 1")
        self.mode = mode
        self.period = period
        self.phase = phase
        self.rates = np.array([c.rate for c in classes], dtype=np.float64)
        self._rngs = [flow_generator(seed, c.source, c.destination) for c in classes]
        self._pending = [np.empty(0, dtype=np.int64) for _ in classes]
        self._last = np.full(len(classes), -1, dtype=np.int64)

    def _bernoulli(self, k: int, t_end: int) -> np.ndarray:
        rate = self.rates[k]
        buf = self._pending[k]
        while buf.size == 0 or buf[-1] < t_end:
            last = buf[-1] if buf.size else self._last[k]
            n = int(rate * (t_end - last) * 1.1) + 16
            gaps = self._rngs[k].geometric(rate, size=n)
            buf = np.concatenate((buf, last + np.cumsum(gaps, dtype=np.int64)))
        cut = np.searchsorted(buf, t_end)
        self._pending[k] = buf[cut:]
        self._last[k] = buf[cut - 1] if cut else self._last[k]
        return buf[:cut]

    def events(self, t_start: int, t_end: int) -> tuple[np.ndarray, np.ndarray]:
        times, owners = [], []
        for k in range(len(self.rates)):
            if self.mode == "periodic":
                first = self.phase + max(0, -(-(t_start - self.phase) // self.period)) * self.period
                t = np.arange(first, t_end, self.period, dtype=np.int64)
            else:
                if self.rates[k] <= 0.0:
                    continue
                t = self._bernoulli(k, t_end)
            times.append(t)
            owners.append(np.full(t.size, k, dtype=np.int32))
        if not times:
            return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int32)
        times = np.concatenate(times)
        owners = np.concatenate(owners)
        order = np.lexsort((owners, times))
        return times[order], owners[order]
