"""The two canonical three-class structures as simulatable models.

Split at the high-priority queue: classes 1 and 2 are in the network and
share an upstream link (queue ``up``, server ``U``). Class 2 leaves after
that link; class 1 continues into the through queue ``hi`` and contends at
server ``X`` with class 3, which is injected into the low-priority queue
``lo``.

Split at the low-priority queue: class 1 owns the through queue ``hi`` and
uses server ``X``. Classes 2 and 3 share the injection FIFO ``lo``; class 2
leaves through server ``Y`` while class 3 contends with class 1 at ``X``.

Node ids only label the flows. Class numbers 1 to 3 follow the transforms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .errors import DomainError
from .moments import ArrivalFlow, ServiceMoments, deterministic_service, geometric_arrival
from .network import LEVEL_INJECTION, LEVEL_THROUGH, NocModel, TrafficMatrix, build_custom
from .transforms import ClassSpec, SplitHighInput, SplitLowInput

__all__ = ["Fixture", "split_high_fixture", "split_low_fixture", "split_high_input", "split_low_input"]


@dataclass(frozen=True)
class Fixture:
    model: NocModel
    pairs: Mapping[int, tuple[int, int]]
    # queue where each class's waiting time is observed
    queues: Mapping[int, str]
    service: ServiceMoments

    def matrix(self, rates: Mapping[int, float]) -> TrafficMatrix:
        return TrafficMatrix({self.pairs[k]: r for k, r in rates.items() if r > 0})

    def class_id(self, k: int, matrix: TrafficMatrix) -> int:
        for c in self.model.bind(matrix):
            if (c.source, c.destination) == self.pairs[k]:
                return c.class_id
        raise DomainError(f"class {k} carries no traffic")

    def queue_id(self, k: int) -> int:
        return self.model.queue_id(self.queues[k])

    def specs(self, rates: Mapping[int, float]) -> tuple[ClassSpec, ClassSpec, ClassSpec]:
        def spec(rate):
            flow = geometric_arrival(rate) if rate > 0 else ArrivalFlow(0.0, 1.0)
            return ClassSpec(flow, self.service)

        return spec(rates[1]), spec(rates[2]), spec(rates[3])


def split_high_fixture(service: int = 2, link_latency: int = 1) -> Fixture:
    svc = deterministic_service(service)
    model = build_custom(
        queues=[("up", LEVEL_THROUGH, svc), ("hi", LEVEL_THROUGH, svc), ("lo", LEVEL_INJECTION, svc)],
        servers=["U", "X"],
        routes={
            (0, 1): [("up", "U", link_latency), ("hi", "X", link_latency)],
            (0, 2): [("up", "U", link_latency)],
            (3, 1): [("lo", "X", link_latency)],
        },
    )
    return Fixture(model, {1: (0, 1), 2: (0, 2), 3: (3, 1)}, {1: "hi", 2: "up", 3: "lo"}, svc)


def split_low_fixture(service: int = 2, link_latency: int = 1) -> Fixture:
    svc = deterministic_service(service)
    model = build_custom(
        queues=[("hi", LEVEL_THROUGH, svc), ("lo", LEVEL_INJECTION, svc)],
        servers=["X", "Y"],
        routes={
            (0, 1): [("hi", "X", link_latency)],
            (2, 3): [("lo", "Y", link_latency)],
            (2, 1): [("lo", "X", link_latency)],
        },
    )
    return Fixture(model, {1: (0, 1), 2: (2, 3), 3: (2, 1)}, {1: "hi", 2: "lo", 3: "lo"}, svc)


def split_high_input(fx: Fixture, rates: Mapping[int, float]) -> SplitHighInput:
    return SplitHighInput(*fx.specs(rates))


def split_low_input(fx: Fixture, rates: Mapping[int, float]) -> SplitLowInput:
    return SplitLowInput(*fx.specs(rates))
