"""Merge / serve / split propagation of flow variability.

These are the usual queueing-network-analyzer approximations: merged
flows take the rate-weighted squared CV, a single server mixes the
arrival and service variability according to its load, and a random
split thins a flow towards a memoryless one.
"""

from __future__ import annotations

from typing import Sequence

from .errors import DomainError, StabilityError
from .moments import ArrivalFlow, ServiceMoments

__all__ = ["merge_flows", "departure_cv2", "split_flow"]


def merge_flows(flows: Sequence[ArrivalFlow]) -> ArrivalFlow:
    flows = list(flows)
    if not flows:
        raise DomainError("cannot merge an empty set of flows")
    if len(flows) == 1:
        return flows[0]
    total = sum(f.rate for f in flows)
    if total >= 1.0:
        raise DomainError(f"merged rate {total!r} must stay below 1 flit/cycle")
    if total == 0.0:
        return ArrivalFlow(0.0, sum(f.cv2_arrival for f in flows) / len(flows))
    cv2 = sum(f.rate * f.cv2_arrival for f in flows) / total
    return ArrivalFlow(total, cv2)


def departure_cv2(merged: ArrivalFlow, svc: ServiceMoments, rho: float) -> float:
    if rho < 0.0:
        raise DomainError(f"utilization must be >= 0, got {rho!r}")
    if rho >= 1.0:
        raise StabilityError(f"server utilization {rho!r} >= 1", where="departure")
    r2 = rho * rho
    return (1.0 - r2) * merged.cv2_arrival + r2 * svc.cv2_service


def split_flow(cv2_departure: float, fraction: float) -> float:
    if not (0.0 < fraction <= 1.0):
        raise DomainError(f"split fraction must lie in (0, 1], got {fraction!r}")
    if fraction == 1.0:
        return cv2_departure
    return 1.0 + fraction * (cv2_departure - 1.0)
