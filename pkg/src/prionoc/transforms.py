"""Closed forms for the two canonical split structures.

Split at the high-priority queue (structural transform): classes 1 and 2
share an upstream queue and server; afterwards class 2 leaves and class 1
contends with newly injected class 3 at a downstream server. Class 1's
arrival process at the contention point is characterised from the
upstream departures, turning the bottom half into a basic priority pair.

Split at the low-priority queue (service-rate transform): class 1 has its
own high-priority queue; classes 2 and 3 share a low-priority FIFO, but
only class 3 contends with class 1. Blocking by class 1 is folded into an
inflated class-3 service time and a matching residual.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Mapping

from .decomposition import departure_cv2, merge_flows, split_flow
from .errors import StabilityError
from .moments import ArrivalFlow, ServiceMoments, residual_geo_g1, utilization
from .priority import STABILITY_LIMIT

__all__ = [
    "ClassSpec",
    "SplitHighInput",
    "SplitLowInput",
    "TransformResult",
    "mixture_service",
    "split_residual",
    "structural_transform",
    "service_rate_transform",
]


@dataclass(frozen=True)
class ClassSpec:
    flow: ArrivalFlow
    svc: ServiceMoments

    @property
    def rho(self) -> float:
        return utilization(self.flow, self.svc)

    @property
    def residual(self) -> float:
        return residual_geo_g1(self.flow, self.svc)


@dataclass(frozen=True)
class SplitHighInput:
    class1: ClassSpec  # in-network, continues to the shared server
    class2: ClassSpec  # in-network, leaves after the upstream server
    class3: ClassSpec  # injected, low priority at the shared server


@dataclass(frozen=True)
class SplitLowInput:
    class1: ClassSpec  # high-priority queue
    class2: ClassSpec  # low-priority queue, separate output
    class3: ClassSpec  # low-priority queue, contends with class 1


@dataclass(frozen=True)
class TransformResult:
    waiting_times: Mapping[Hashable, float]
    modified_service: Mapping[Hashable, ServiceMoments] | None = None
    diagnostics: Mapping[str, float] = field(default_factory=dict)


def _guard(denominator: float, what: str) -> float:
    if denominator <= 1.0 - STABILITY_LIMIT:
        raise StabilityError(f"{what}: denominator {denominator:.6g} is not positive", where=what)
    return denominator


def mixture_service(parts: list[tuple[float, ServiceMoments]]) -> ServiceMoments:
    """Service moments of a rate-weighted mixture of classes."""
    total = sum(rate for rate, _ in parts)
    if total == 0.0:
        return parts[0][1]
    mean = sum(rate * s.mean_T for rate, s in parts) / total
    second = sum(rate * s.second_moment_T2 for rate, s in parts) / total
    return ServiceMoments(mean, max(second, mean * mean))


def split_residual(rate: float, svc: ServiceMoments, cv2_arrival: float) -> float:
    """Residual of a flow whose arrivals are a split-off departure stream.

    ``rho/mu * (C_D^2 + C_B^2)/4 - rho*mu/2`` with ``mu = 1/E[T]``; can be
    negative for very smooth streams.
    """
    rho = rate * svc.mean_T
    mu = 1.0 / svc.mean_T
    return 0.5 * (rho / mu) * (0.5 * (cv2_arrival + svc.cv2_service)) - 0.5 * rho * mu


def structural_transform(inp: SplitHighInput) -> TransformResult:
    c1, c2, c3 = inp.class1, inp.class2, inp.class3
    rho1, rho2, rho3 = c1.rho, c2.rho, c3.rho
    lam1, lam2 = c1.flow.rate, c2.flow.rate

    rho_high = rho1 + rho2
    if rho_high >= STABILITY_LIMIT:
        raise StabilityError(f"upstream server utilization {rho_high:.6g} >= 1", where="Q_high")
    merged = merge_flows([c1.flow, c2.flow])
    mix = mixture_service([(lam1, c1.svc), (lam2, c2.svc)])
    cd2 = departure_cv2(merged, mix, rho_high)
    fraction = lam1 / (lam1 + lam2) if lam1 > 0 else 1.0
    cd1 = split_flow(cd2, fraction)

    r1_split = split_residual(lam1, c1.svc, cd1)
    r1, r2, r3 = c1.residual, c2.residual, c3.residual

    w1_split = (r1_split + r3) / _guard(1.0 - rho1, "1 - rho1")
    w3 = (r1_split + r3 + rho1 + rho1 * w1_split) / _guard(1.0 - rho1 - rho3, "1 - rho1 - rho3")
    w2 = (r2 + r1) / _guard(1.0 - rho2, "1 - rho2")

    diagnostics = {
        "cv2_merged": merged.cv2_arrival,
        "cv2_departure": cd2,
        "cv2_departure_class1": cd1,
        "split_fraction": fraction,
        "R1_split": r1_split,
        "W1_split": w1_split,
        "R1": r1,
        "R2": r2,
        "R3": r3,
    }
    waits = {1: max(w1_split, 0.0), 2: max(w2, 0.0), 3: max(w3, 0.0)}
    return TransformResult(waits, None, diagnostics)


def blocking_extension(p: float, blocker_T: float) -> float:
    """Extra head-of-line time when each attempt is blocked with probability ``p``."""
    if p >= 1.0:
        raise StabilityError(f"blocking probability {p:.6g} >= 1", where="p")
    return blocker_T * p / (1.0 - p)


def service_rate_transform(inp: SplitLowInput) -> TransformResult:
    c1, c2, c3 = inp.class1, inp.class2, inp.class3
    lam1, lam3 = c1.flow.rate, c3.flow.rate
    rho1, rho2, rho3 = c1.rho, c2.rho, c3.rho
    r1, r2, r3 = c1.residual, c2.residual, c3.residual

    w1 = (r1 + r3) / _guard(1.0 - rho1, "1 - rho1")
    w3_ref = (r1 + r3 + rho1 + rho1 * w1) / _guard(1.0 - rho1 - rho3, "1 - rho1 - rho3")

    p = rho1 + lam1 * r3
    delta_t3 = blocking_extension(p, c1.svc.mean_T)
    t3_star = c3.svc.mean_T + delta_t3
    rho3_star = lam3 * t3_star
    r3_star = (1.0 - rho3_star) * (w3_ref - delta_t3)

    if lam1 == 0.0:
        # nothing to fold in: classes 2 and 3 form one shared Geo/G/1 FIFO
        r3_star = r3
        base = (r2 + r3) / _guard(1.0 - rho2 - rho3, "1 - rho2 - rho3")
    else:
        base = (r3_star + r2) / _guard(1.0 - rho3_star - rho2, "1 - rho3* - rho2")
    w2 = base
    w3 = base + delta_t3

    # the inflated service keeps the original variance
    var3 = c3.svc.second_moment_T2 - c3.svc.mean_T**2
    modified = {3: ServiceMoments(t3_star, var3 + t3_star**2)}
    diagnostics = {
        "W1": w1,
        "W3_ref": w3_ref,
        "p": p,
        "delta_T3": delta_t3,
        "T3_star": t3_star,
        "rho3_star": rho3_star,
        "R3_star": r3_star,
        "R1": r1,
        "R2": r2,
        "R3": r3,
    }
    waits = {1: max(w1, 0.0), 2: max(w2, 0.0), 3: max(w3, 0.0)}
    return TransformResult(waits, modified, diagnostics)
