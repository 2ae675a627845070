"""Run configuration for the command-line tool.

Configs are YAML documents with up to six sections. Every key is
optional and falls back to the defaults below::

    topology:
      kind: ring              # ring | mesh
      nodes: 8                # ring size
      width: 6                # mesh columns
      height: 6               # mesh rows
      service: 2              # deterministic service time, cycles
      link_latency: 1
      switch_latency: null    # mesh only; null means link_latency
      shared_injection: false # one injection FIFO per router
    traffic:
      rate: null              # uniform all-to-all rate per pair
      fraction: 0.5           # or a fraction of lambda_max
      matrix: null            # CSV source,destination,rate; scaled by `scale`
      scale: 1.0
    sweep:
      fractions: [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
      simulate: true
    simulation:
      cycles: 1000000
      warmup: 5000
      seed: 1
    analysis:
      residual: geometric     # geometric | printed
      peers: aggregate        # aggregate | residual
    output: out

Exactly one of ``traffic.rate`` and ``traffic.fraction`` is used: an
explicit rate wins. With a matrix file, ``fraction`` scales the matrix
to that share of its own lambda_max and ``rate`` is ignored; without
``fraction`` the matrix is used as written times ``scale``. Relative
matrix paths are resolved against the config file's directory.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .analysis import PEER_POLICIES, RESIDUAL_MODES
from .errors import FormatError
from .network import (DEFAULT_LINK_LATENCY, DEFAULT_SERVICE, NocModel, TrafficMatrix, build_mesh,
                      build_ring, lambda_max, load_traffic_matrix, uniform_traffic)
from .sim.simulator import DEFAULT_CYCLES, DEFAULT_WARMUP

__all__ = ["TopologySpec", "TrafficSpec", "SweepSpec", "SimulationSpec", "AnalysisSpec", "RunConfig",
           "load_config", "parse_config", "dump_config"]

# shape used to measure lambda_max for uniform traffic
_UNIT = 1e-6


@dataclass(frozen=True)
class TopologySpec:
    kind: str = "ring"
    nodes: int = 8
    width: int = 6
    height: int = 6
    service: int = DEFAULT_SERVICE
    link_latency: int = DEFAULT_LINK_LATENCY
    switch_latency: int | None = None
    shared_injection: bool = False

    def build(self) -> NocModel:
        if self.kind == "ring":
            return build_ring(self.nodes, self.service, self.link_latency, self.shared_injection)
        return build_mesh(self.width, self.height, self.service, self.link_latency, self.switch_latency,
                          self.shared_injection)


@dataclass(frozen=True)
class TrafficSpec:
    rate: float | None = None
    fraction: float | None = 0.5
    matrix: str | None = None
    scale: float = 1.0


@dataclass(frozen=True)
class SweepSpec:
    fractions: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    simulate: bool = True


@dataclass(frozen=True)
class SimulationSpec:
    cycles: int = DEFAULT_CYCLES
    warmup: int = DEFAULT_WARMUP
    seed: int = 1


@dataclass(frozen=True)
class AnalysisSpec:
    residual: str = RESIDUAL_MODES[0]
    peers: str = PEER_POLICIES[0]


@dataclass(frozen=True)
class RunConfig:
    topology: TopologySpec = field(default_factory=TopologySpec)
    traffic: TrafficSpec = field(default_factory=TrafficSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    simulation: SimulationSpec = field(default_factory=SimulationSpec)
    analysis: AnalysisSpec = field(default_factory=AnalysisSpec)
    output: str = "out"

    def model(self) -> NocModel:
        return self.topology.build()

    def traffic_shape(self, model: NocModel) -> TrafficMatrix:
        """The matrix whose scaling defines the sweep axis."""
        if self.traffic.matrix:
            return load_traffic_matrix(self.traffic.matrix, model)
        return uniform_traffic(model, _UNIT)

    def matrix_at(self, model: NocModel, fraction: float) -> TrafficMatrix:
        shape = self.traffic_shape(model)
        return shape.scaled(fraction * lambda_max(model, shape))

    def matrix(self, model: NocModel) -> TrafficMatrix:
        """Traffic for single-point analyze/simulate runs."""
        t = self.traffic
        if t.matrix:
            if t.fraction is not None:
                return self.matrix_at(model, t.fraction)
            return load_traffic_matrix(t.matrix, model).scaled(t.scale)
        if t.rate is not None:
            return uniform_traffic(model, t.rate)
        return self.matrix_at(model, t.fraction)


_SECTIONS = {
    "topology": TopologySpec,
    "traffic": TrafficSpec,
    "sweep": SweepSpec,
    "simulation": SimulationSpec,
    "analysis": AnalysisSpec,
}


def _coerce(cls, section: str, raw: Any):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise FormatError(f"section {section!r} must be a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(raw) - set(known)
    if unknown:
        raise FormatError(f"unknown key(s) in {section!r}: {', '.join(sorted(unknown))}")
    values = {}
    for name, value in raw.items():
        kind = known[name].type
        if value is None:
            if "None" not in kind:
                raise FormatError(f"{section}.{name} may not be null")
            values[name] = None
            continue
        try:
            if kind.startswith("bool"):
                if not isinstance(value, bool):
                    raise TypeError
            elif kind.startswith("tuple"):
                value = tuple(float(v) for v in value)
            elif kind.startswith("int"):
                if isinstance(value, bool) or float(value) != int(value):
                    raise TypeError
                value = int(value)
            elif kind.startswith("float"):
                if isinstance(value, bool):
                    raise TypeError
                value = float(value)
            elif not isinstance(value, str):
                raise TypeError
        except (TypeError, ValueError):
            raise FormatError(f"{section}.{name}: invalid value {value!r}") from None
        values[name] = value
    return cls(**values)


def _validate(cfg: RunConfig) -> None:
    t = cfg.topology
    if t.kind not in ("ring", "mesh"):
        raise FormatError(f"topology.kind must be ring or mesh, got {t.kind!r}")
    for name in ("nodes", "width", "height"):
        if getattr(t, name) < 2:
            raise FormatError(f"topology.{name} must be >= 2")
    if t.service < 1 or t.link_latency < 0 or (t.switch_latency is not None and t.switch_latency < 0):
        raise FormatError("topology: service must be >= 1 and latencies >= 0")
    tr = cfg.traffic
    if tr.rate is not None and not 0.0 <= tr.rate < 1.0:
        raise FormatError("traffic.rate must be in [0, 1)")
    if tr.fraction is not None and not 0.0 < tr.fraction < 1.0:
        raise FormatError("traffic.fraction must be in (0, 1)")
    if tr.rate is None and tr.fraction is None and not tr.matrix:
        raise FormatError("traffic needs a rate, a fraction or a matrix")
    if tr.matrix and not Path(tr.matrix).is_file():
        raise FormatError(f"traffic.matrix: no such file {tr.matrix}")
    if tr.scale <= 0:
        raise FormatError("traffic.scale must be positive")
    if not cfg.sweep.fractions or any(not 0.0 < f < 1.0 for f in cfg.sweep.fractions):
        raise FormatError("sweep.fractions must be a non-empty list of values in (0, 1)")
    s = cfg.simulation
    if s.cycles <= 0 or not 0 <= s.warmup < s.cycles:
        raise FormatError("simulation: need cycles > 0 and 0 <= warmup < cycles")
    if cfg.analysis.residual not in RESIDUAL_MODES:
        raise FormatError(f"analysis.residual must be one of {', '.join(RESIDUAL_MODES)}")
    if cfg.analysis.peers not in PEER_POLICIES:
        raise FormatError(f"analysis.peers must be one of {', '.join(PEER_POLICIES)}")


def parse_config(data: Any, base_dir: str | Path = ".") -> RunConfig:
    """Build a validated :class:`RunConfig` from a parsed YAML mapping."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise FormatError("config must be a mapping")
    unknown = set(data) - set(_SECTIONS) - {"output"}
    if unknown:
        raise FormatError(f"unknown config section(s): {', '.join(sorted(unknown))}")
    parts = {name: _coerce(cls, name, data.get(name)) for name, cls in _SECTIONS.items()}
    if parts["traffic"].matrix:
        path = Path(parts["traffic"].matrix)
        if not path.is_absolute():
            path = Path(base_dir) / path
        parts["traffic"] = dataclasses.replace(parts["traffic"], matrix=str(path.resolve()))
    cfg = RunConfig(**parts, output=str(data.get("output", "out")))
    _validate(cfg)
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return parse_config({})
    p = Path(path)
    try:
        data = yaml.safe_load(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise FormatError(f"cannot read config {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise FormatError(f"{path}: invalid YAML ({exc})") from None
    return parse_config(data, p.parent)


def to_mapping(cfg: RunConfig) -> dict:
    out = {}
    for name in _SECTIONS:
        section = dataclasses.asdict(getattr(cfg, name))
        out[name] = {k: list(v) if isinstance(v, tuple) else v for k, v in section.items()}
    out["output"] = cfg.output
    return out


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(to_mapping(cfg), sort_keys=False)
