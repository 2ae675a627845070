"""Moment and coefficient-of-variation arithmetic for discrete-time flows.

Inter-arrival times are geometric on ``{1, 2, ...}`` with success
probability equal to the rate, i.e. one Bernoulli trial per cycle.
Service times are described by their first two moments only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DomainError

__all__ = [
    "ServiceMoments",
    "ArrivalFlow",
    "geometric_arrival",
    "deterministic_service",
    "general_service",
    "residual_geo_g1",
    "utilization",
]

# relative slack when checking E[T^2] >= E[T]^2 on float inputs
_MOMENT_RTOL = 1e-12


@dataclass(frozen=True)
class ServiceMoments:
    """First and second moment of a service time, in cycles."""

    mean_T: float
    second_moment_T2: float
    cv2_service: float = field(init=False)

    def __post_init__(self):
        mean = float(self.mean_T)
        second = float(self.second_moment_T2)
        if not math.isfinite(mean) or mean < 1.0:
            raise DomainError(f"mean service time must be >= 1 cycle, got {self.mean_T!r}")
        if not math.isfinite(second) or second < mean * mean * (1.0 - _MOMENT_RTOL):
            raise DomainError(
                f"second moment {self.second_moment_T2!r} is below mean^2 = {mean * mean!r}"
            )
        second = max(second, mean * mean)
        object.__setattr__(self, "mean_T", mean)
        object.__setattr__(self, "second_moment_T2", second)
        object.__setattr__(self, "cv2_service", (second - mean * mean) / (mean * mean))

    @property
    def is_deterministic(self) -> bool:
        return self.cv2_service == 0.0


@dataclass(frozen=True)
class ArrivalFlow:
    """Rate (flits/cycle) and squared CV of the inter-arrival time of one flow."""

    rate: float
    cv2_arrival: float

    def __post_init__(self):
        rate = float(self.rate)
        cv2 = float(self.cv2_arrival)
        if not (0.0 <= rate < 1.0) or not math.isfinite(rate):
            raise DomainError(f"arrival rate must lie in [0, 1), got {self.rate!r}")
        if cv2 < 0.0 or not math.isfinite(cv2):
            raise DomainError(f"squared CV must be >= 0, got {self.cv2_arrival!r}")
        object.__setattr__(self, "rate", rate)
        object.__setattr__(self, "cv2_arrival", cv2)


def geometric_arrival(rate: float) -> ArrivalFlow:
    """Bernoulli injection at ``rate`` flits/cycle.

    The inter-arrival time is geometric with mean ``1/rate`` and variance
    ``(1 - rate)/rate**2``, so its squared CV is ``1 - rate``.
    """
    rate = float(rate)
    if not (0.0 < rate < 1.0):
        raise DomainError(f"geometric arrival rate must lie in (0, 1), got {rate!r}")
    return ArrivalFlow(rate, 1.0 - rate)


def deterministic_service(T: int) -> ServiceMoments:
    if isinstance(T, bool) or int(T) != T:
        raise DomainError(f"deterministic service time must be an integer, got {T!r}")
    if T < 1:
        raise DomainError(f"deterministic service time must be >= 1 cycle, got {T!r}")
    T = int(T)
    return ServiceMoments(float(T), float(T * T))


def general_service(mean_T: float, second_moment_T2: float) -> ServiceMoments:
    return ServiceMoments(mean_T, second_moment_T2)


def residual_geo_g1(flow: ArrivalFlow, svc: ServiceMoments) -> float:
    """Mean residual service contributed by one flow at a Geo/G/1 server.

    A service of ``T`` cycles leaves residuals ``T-1, ..., 0`` behind it,
    so the time average is ``rate * E[T(T-1)] / 2``.
    """
    return 0.5 * flow.rate * (svc.second_moment_T2 - svc.mean_T)


def utilization(flow: ArrivalFlow, svc: ServiceMoments) -> float:
    return flow.rate * svc.mean_T
