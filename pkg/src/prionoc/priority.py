"""Non-preemptive strict-priority Geo/G/1 waiting times.

N classes, each in its own queue, share one server; class rank 1 is
served first whenever more than one head flit is waiting.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

from .errors import DomainError, StabilityError
from .moments import ArrivalFlow, ServiceMoments, residual_geo_g1, utilization

__all__ = [
    "STABILITY_LIMIT",
    "PriorityClassParams",
    "PriorityQueueSystem",
    "effective_residual",
    "waiting_times_basic",
]

# analysis refuses any cumulative utilization at or above this value
STABILITY_LIMIT = 0.999


@dataclass(frozen=True)
class PriorityClassParams:
    class_id: Hashable
    flow: ArrivalFlow
    svc: ServiceMoments
    priority_rank: int

    @property
    def rho(self) -> float:
        return utilization(self.flow, self.svc)

    @property
    def residual(self) -> float:
        return residual_geo_g1(self.flow, self.svc)


@dataclass(frozen=True)
class PriorityQueueSystem:
    classes: tuple[PriorityClassParams, ...]

    def __init__(self, classes: Sequence[PriorityClassParams]):
        ordered = tuple(sorted(classes, key=lambda c: c.priority_rank))
        ranks = [c.priority_rank for c in ordered]
        if ranks != list(range(1, len(ranks) + 1)):
            raise DomainError(f"priority ranks must be distinct and contiguous from 1, got {ranks}")
        object.__setattr__(self, "classes", ordered)

    @classmethod
    def from_rates(cls, rates: Sequence[float], svc: ServiceMoments | Sequence[ServiceMoments]):
        """Geometric arrivals at ``rates``; rank follows list order."""
        from .moments import geometric_arrival

        if isinstance(svc, ServiceMoments):
            svc = [svc] * len(rates)
        params = []
        for k, (rate, s) in enumerate(zip(rates, svc)):
            flow = geometric_arrival(rate) if rate > 0 else ArrivalFlow(0.0, 1.0)
            params.append(PriorityClassParams(k + 1, flow, s, k + 1))
        return cls(params)

    def __len__(self):
        return len(self.classes)


def effective_residual(system: PriorityQueueSystem, i: int) -> float:
    """Residual time seen by an arriving class-``i`` flit.

    Every class leaves its own residual behind; a higher-priority flit
    arriving in the same cycle is additionally served first, which adds
    its full mean service, i.e. its utilization.
    """
    n = len(system.classes)
    if not 1 <= i <= n:
        raise DomainError(f"rank {i} out of range 1..{n}")
    total = sum(c.residual for c in system.classes)
    return total + sum(c.rho for c in system.classes[: i - 1])


def waiting_times_basic(system: PriorityQueueSystem) -> list[float]:
    """Mean queueing delay (service excluded) for each rank, highest first."""
    residual_sum = sum(c.residual for c in system.classes)
    waits: list[float] = []
    carried = 0.0  # sum over higher ranks of rho_k * (1 + W_k)
    cumulative_rho = 0.0
    for c in system.classes:
        cumulative_rho += c.rho
        if cumulative_rho >= STABILITY_LIMIT:
            raise StabilityError(
                f"cumulative utilization {cumulative_rho:.6g} reaches saturation at rank "
                f"{c.priority_rank}",
                where=c.priority_rank,
            )
        w = (residual_sum + carried) / (1.0 - cumulative_rho)
        waits.append(w)
        carried += c.rho * (1.0 + w)
    return waits
