import pytest
from hypothesis import given, settings, strategies as st

from prionoc.decomposition import departure_cv2, merge_flows, split_flow
from prionoc.errors import DomainError, StabilityError
from prionoc.moments import ArrivalFlow, deterministic_service, general_service, geometric_arrival


def test_merge_examples():
    m = merge_flows([geometric_arrival(0.2), geometric_arrival(0.2)])
    assert (m.rate, m.cv2_arrival) == pytest.approx((0.4, 0.8))
    single = geometric_arrival(0.3)
    assert merge_flows([single]) == single
    m = merge_flows([geometric_arrival(0.1), geometric_arrival(0.3)])
    assert (m.rate, m.cv2_arrival) == pytest.approx((0.4, 0.75))


def test_merge_empty():
    with pytest.raises(DomainError):
        merge_flows([])


def test_departure_examples():
    svc = deterministic_service(2)
    assert departure_cv2(ArrivalFlow(0.4, 0.8), svc, 0.8) == pytest.approx(0.288)
    assert departure_cv2(ArrivalFlow(0.4, 0.8), svc, 0.0) == 0.8
    assert departure_cv2(ArrivalFlow(0.4, 0.8), svc, 0.99999) < 1e-4
    with pytest.raises(StabilityError):
        departure_cv2(ArrivalFlow(0.4, 0.8), svc, 1.0)


def test_split_examples():
    assert split_flow(0.288, 1.0) == 0.288
    assert split_flow(0.288, 0.5) == pytest.approx(0.644)
    assert split_flow(0.288, 1e-9) == pytest.approx(1.0)
    for bad in (0.0, 1.5):
        with pytest.raises(DomainError):
            split_flow(0.5, bad)


@settings(max_examples=300)
@given(st.lists(st.tuples(st.floats(1e-4, 0.2), st.floats(0, 3)), min_size=1, max_size=4))
def test_merge_preserves_rate(parts):
    flows = [ArrivalFlow(r, c) for r, c in parts]
    assert merge_flows(flows).rate == pytest.approx(sum(r for r, _ in parts), rel=1e-12)


@settings(max_examples=300)
@given(st.floats(0, 3), st.floats(0, 3), st.floats(0, 0.999))
def test_departure_between_inputs(ca, extra, rho):
    svc = general_service(2.0, 4.0 * (1 + extra))
    cd = departure_cv2(ArrivalFlow(0.1, ca), svc, rho)
    lo, hi = sorted((ca, svc.cv2_service))
    assert lo - 1e-12 <= cd <= hi + 1e-12


@settings(max_examples=300)
@given(st.floats(0, 3), st.floats(0.01, 1), st.floats(0.01, 1))
def test_split_monotone(cd, f1, f2):
    a, b = sorted((f1, f2))
    if cd < 1:
        assert split_flow(cd, a) >= split_flow(cd, b)
    elif cd > 1:
        assert split_flow(cd, a) <= split_flow(cd, b)


@pytest.mark.slow
def test_departure_cv2_against_simulator():
    from prionoc.network import TrafficMatrix, build_custom
    from prionoc.sim import SimConfig, run

    model = build_custom([("q", 0, 2)], ["s"], {(0, 1): [("q", "s", 1)]})
    rep = run(SimConfig(model, TrafficMatrix({(0, 1): 0.4}), 3_000_000, 5000, seed=3))
    assert rep.departure_count[0] >= 1_000_000
    flow = geometric_arrival(0.4)
    predicted = departure_cv2(flow, deterministic_service(2), 0.8)
    assert abs(rep.departure_gap_cv2[0] - predicted) <= 0.1
