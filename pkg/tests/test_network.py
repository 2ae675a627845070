import math
from collections import defaultdict

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prionoc.errors import DomainError, FormatError
from prionoc.network import (LEVEL_INJECTION, LEVEL_SWITCH, LEVEL_THROUGH, TrafficMatrix, build_custom,
                             build_mesh, build_ring, lambda_max, load_traffic_matrix, unit_loads,
                             uniform_traffic)


def roles(model):
    out = defaultdict(int)
    for q in model.queues:
        out[q.role] += 1
    return dict(out)


def test_ring_counts_shared_injection():
    model = build_ring(8, shared_injection=True)
    assert roles(model) == {"injection": 8, "through": 16}
    assert model.n_servers == 16


def test_ring_counts_default():
    assert roles(build_ring(8)) == {"injection": 16, "through": 16}


def test_ring_levels():
    for q in build_ring(4).queues:
        assert q.level == (LEVEL_INJECTION if q.role == "injection" else LEVEL_THROUGH)
    assert LEVEL_THROUGH < LEVEL_SWITCH < LEVEL_INJECTION


def test_two_ring_is_one_hop():
    model = build_ring(2)
    assert len(model.route(0, 1)) == 1 and len(model.route(1, 0)) == 1


def test_ring_tie_break_is_clockwise():
    model = build_ring(4)
    route = model.route(0, 2)
    assert [model.servers[h.server].name for h in route] == ["out0_cw", "out1_cw"]


def test_ring_rejects_small():
    with pytest.raises(DomainError):
        build_ring(1)


def server_router_dir(model, hop):
    s = model.servers[hop.server]
    return s.router, s.name.split("_")[1]


@pytest.mark.parametrize("n", range(2, 11))
def test_ring_routes_shrink_distance(n):
    model = build_ring(n)
    for s in range(n):
        for d in range(n):
            if s == d:
                continue
            route = model.route(s, d)
            nodes = [model.servers[h.server].router for h in route]
            dist = [min((d - x) % n, (x - d) % n) for x in nodes]
            assert nodes[0] == s
            assert all(a > b for a, b in zip(dist, dist[1:]))
            assert len(route) == min((d - s) % n, (s - d) % n)
            assert model.queues[route[0].queue].role == "injection"
            assert all(model.queues[h.queue].role == "through" for h in route[1:])


def coords(node, width):
    return divmod(node, width)


@pytest.mark.parametrize("w,h", [(2, 2), (3, 4), (5, 3), (6, 6), (8, 8)])
def test_mesh_routes_are_y_then_x(w, h):
    model = build_mesh(w, h)
    for s in range(w * h):
        for d in range(w * h):
            if s == d:
                continue
            route = model.route(s, d)
            axes = [model.servers[x.server].name.split("_")[1][0] for x in route]
            assert axes == sorted(axes, key=lambda a: a != "v")
            (rs, cs), (rd, cd) = coords(s, w), coords(d, w)
            nv = min((rd - rs) % h, (rs - rd) % h)
            nh = min((cd - cs) % w, (cs - cd) % w)
            assert axes.count("v") == nv and axes.count("h") == nh
            kinds = [model.queues[x.queue].role for x in route]
            if nv and nh:
                assert kinds[nv] == "switch"
            assert kinds.count("switch") == (1 if nv and nh else 0)


def test_mesh_same_row_has_no_switch():
    model = build_mesh(6, 6)
    route = model.route(0, 3)
    assert [model.queues[h.queue].role for h in route] == ["injection", "through", "through"]
    assert all(h.delay == 1 for h in route)


def test_mesh_turn_example():
    model = build_mesh(6, 6, switch_latency=3)
    route = model.route(0, 2 * 6 + 3)
    names = [model.servers[h.server].name for h in route]
    assert names == ["out0_v+", "out6_v+", "out12_h+", "out13_h+", "out14_h+"]
    assert model.queues[route[2].queue].role == "switch"
    assert route[1].delay == 1 + 3


def test_mesh_rejects_small():
    with pytest.raises(DomainError):
        build_mesh(1, 4)


def test_mesh_uniform_loads_are_symmetric():
    model = build_mesh(6, 6)
    q_load, _ = unit_loads(model, model.bind(uniform_traffic(model, 0.001)))
    by_kind = defaultdict(set)
    for q in model.queues:
        kind = (q.role, q.name.split("_")[-1])
        by_kind[kind].add(round(q_load[q.qid], 12))
    for kind, values in by_kind.items():
        assert len(values) == 1, kind


def test_ring_uniform_loads_are_symmetric():
    model = build_ring(8)
    q_load, _ = unit_loads(model, model.bind(uniform_traffic(model, 0.01)))
    for tag in ("cw", "ccw"):
        vals = {round(q_load[q.qid], 12) for q in model.queues if q.role == "through" and q.name.split("_")[1] == tag}
        assert len(vals) == 1


@settings(max_examples=100)
@given(st.integers(3, 7), st.dictionaries(st.tuples(st.integers(0, 6), st.integers(0, 6)),
                                          st.floats(0.0, 0.1), max_size=20))
def test_load_conservation(n, raw):
    model = build_ring(n)
    entries = {(s % n, d % n): r for (s, d), r in raw.items() if s % n != d % n}
    classes = model.bind(TrafficMatrix(entries))
    inflow = defaultdict(float)
    outflow = defaultdict(float)
    for c in classes:
        for h in c.route:
            inflow[h.queue] += c.rate
            outflow[h.queue] += c.rate
    delivered = sum(c.rate for c in classes)
    assert sum(inflow[q.qid] for q in model.queues if q.role == "injection") == pytest.approx(delivered)
    for q in inflow:
        assert inflow[q] == pytest.approx(outflow[q])


def test_uniform_traffic_classes():
    model = build_ring(8)
    classes = model.bind(uniform_traffic(model, 0.01))
    assert len(classes) == 56
    assert {c.rate for c in classes} == {0.01}


def test_empty_matrix():
    assert build_ring(8).bind(TrafficMatrix()) == ()


def test_per_source_total_checked():
    model = build_ring(8)
    with pytest.raises(DomainError):
        uniform_traffic(model, 0.15)


def test_csv_row(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("source,destination,rate\n3,5,0.01\n")
    m = load_traffic_matrix(p, build_ring(8))
    assert m.entries == {(3, 5): 0.01}


def test_csv_mesh_row_col(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("source,destination,rate\n1.2,0.0,0.02\n")
    assert load_traffic_matrix(p, build_mesh(4, 3)).entries == {(6, 0): 0.02}


@pytest.mark.parametrize("body,match", [
    ("3,5,0.01\n3,5,0.02\n", "duplicate"),
    ("3,9,0.01\n", "unknown node"),
    ("3,x,0.01\n", "bad node"),
    ("3,5\n", "expected 3"),
    ("3,5,abc\n", "bad rate"),
    ("1.1,2,0.1\n", "only valid for a mesh"),
])
def test_csv_errors(tmp_path, body, match):
    p = tmp_path / "m.csv"
    p.write_text("source,destination,rate\n" + body)
    with pytest.raises(FormatError, match=match):
        load_traffic_matrix(p, build_ring(8))


def test_csv_bad_header(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("src,dst,rate\n1,2,0.1\n")
    with pytest.raises(FormatError):
        load_traffic_matrix(p)


def test_csv_round_trip(tmp_path):
    model = build_ring(5)
    m = uniform_traffic(model, 0.0123)
    p = tmp_path / "m.csv"
    p.write_text(m.to_csv())
    assert load_traffic_matrix(p, model) == m


def test_lambda_max_single_queue():
    model = build_custom([("q", 0, 2)], ["s"], {(0, 1): [("q", "s", 1)]})
    assert lambda_max(model, TrafficMatrix({(0, 1): 1.0 - 1e-9})) * (1 - 1e-9) == pytest.approx(0.5)


def utilizations(model, shape, scale):
    """Peak queue or server utilization with every rate multiplied by ``scale``."""
    load = defaultdict(float)
    for (src, dst), rate in shape.items():
        for h in model.route(src, dst):
            T = model.queues[h.queue].service.mean_T
            load["q", h.queue] += scale * rate * T
            load["s", h.server] += scale * rate * T
    return max(load.values())


@pytest.mark.parametrize("model", [build_ring(8), build_ring(8, shared_injection=True), build_mesh(6, 6)])
def test_lambda_max_bisection_oracle(model):
    shape = uniform_traffic(model, 1e-6)
    s = lambda_max(model, shape)
    assert utilizations(model, shape, s * 0.999) < 1
    assert utilizations(model, shape, s * 1.001) >= 1
    lo, hi = 0.0, 1e7
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if utilizations(model, shape, mid) < 1:
            lo = mid
        else:
            hi = mid
    assert s == pytest.approx(lo, rel=1e-9)


def test_lambda_max_known_values():
    ring = build_ring(8)
    assert 1e-6 * lambda_max(ring, uniform_traffic(ring, 1e-6)) == pytest.approx(0.05)
    mesh = build_mesh(6, 6)
    assert 1e-6 * lambda_max(mesh, uniform_traffic(mesh, 1e-6)) == pytest.approx(1 / 72)


def test_lambda_max_zero_traffic():
    assert lambda_max(build_ring(4), TrafficMatrix()) == math.inf


def test_custom_unknown_element():
    with pytest.raises(DomainError):
        build_custom([("q", 0, 2)], ["s"], {(0, 1): [("nope", "s", 1)]})


def test_model_is_shareable():
    model = build_mesh(4, 4)
    a = model.route(0, 15)
    assert model.route(0, 15) is a
    assert np.all([h.delay >= 0 for h in a])
