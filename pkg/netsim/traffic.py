#!/usr/bin/env python3
"""
Fluid-Flow Traffic Model
========================

Offered load per WPP service class, flash-event bursts, routing of flows
onto switch paths, and the per-tick traffic matrix: link utilization, path
latency, congestion and thermal packet loss.

Features:
- Service catalog for turbine, control, protection, condition monitoring,
  meteorological and bulk maintenance traffic
- Poisson flash-event schedule driven by an explicit numpy Generator
- Link/flow incidence matrices for vectorized per-tick evaluation
- M/M/1-style queueing delay with utilization clamp plus fluid backlog
- Priority-ordered congestion loss (best-effort dropped first) and
  per-switch thermal loss

Usage:
    from netsim.traffic import default_flow_roster, compute_traffic_matrix

    flows = default_flow_roster(graph)
    tm = compute_traffic_matrix(graph, routing, flows, offered)
"""

import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from netsim.topology import NetworkGraph

logger = logging.getLogger(__name__)

MTU_BYTES = 1500
DEFAULT_LOSS_COEFF = 0.002
LATENCY_RHO_CLAMP = 0.95

HostPair = Tuple[str, str]
SwitchPath = Tuple[str, ...]


class MissingRouteError(LookupError):
    """Raised when a flow (or monitored pair) has no assigned path."""


class ServiceClass(str, Enum):
    TIME_SENSITIVE = "critical-time-sensitive"
    DELAY_TOLERANT = "critical-delay-tolerant"
    BEST_EFFORT = "best-effort"

    @property
    def priority(self) -> int:
        return SERVICE_PRIORITY[self]


SERVICE_PRIORITY: Dict[ServiceClass, int] = {
    ServiceClass.TIME_SENSITIVE: 0,
    ServiceClass.DELAY_TOLERANT: 1,
    ServiceClass.BEST_EFFORT: 2,
}

CLASSES_BY_PRIORITY: Tuple[ServiceClass, ...] = tuple(
    sorted(ServiceClass, key=lambda c: SERVICE_PRIORITY[c]))


@dataclass(frozen=True)
class ServiceProfile:
    name: str
    service_class: ServiceClass
    sample_rate_hz: float
    message_bytes: int

    @property
    def nominal_rate(self) -> float:
        return self.sample_rate_hz * self.message_bytes * 8


# Message sizes: SV frames 126 B, GOOSE 200 B, MQTT telemetry 512 B.
SERVICE_CATALOG: Dict[str, ServiceProfile] = {
    'turbine_operational': ServiceProfile('turbine_operational', ServiceClass.TIME_SENSITIVE, 1000.0, 512),
    'control': ServiceProfile('control', ServiceClass.TIME_SENSITIVE, 4800.0, 200),
    'protection': ServiceProfile('protection', ServiceClass.TIME_SENSITIVE, 9600.0, 126),
    'condition_monitoring': ServiceProfile('condition_monitoring', ServiceClass.DELAY_TOLERANT, 1000.0, 512),
    'meteorological': ServiceProfile('meteorological', ServiceClass.BEST_EFFORT, 1.0, 512),
    # 25 Mb/s expressed as 1 message/s of 3.125 MB (firmware pushes, log uploads)
    'bulk_maintenance': ServiceProfile('bulk_maintenance', ServiceClass.BEST_EFFORT, 1.0, 3_125_000),
}


@dataclass(frozen=True)
class FlowSpec:
    id: str
    src: str
    dst: str
    service_class: ServiceClass
    nominal_rate: float
    service: str = "custom"

    def __post_init__(self):
        if not self.nominal_rate > 0:
            raise ValueError(f"Flow {self.id}: nominal_rate must be > 0, got {self.nominal_rate}")
        if not isinstance(self.service_class, ServiceClass):
            object.__setattr__(self, 'service_class', ServiceClass(self.service_class))

    @property
    def priority(self) -> int:
        return self.service_class.priority

    @property
    def pair(self) -> HostPair:
        return self.src, self.dst

    def to_dict(self) -> Dict:
        return {'id': self.id, 'src': self.src, 'dst': self.dst,
                'service_class': self.service_class.value,
                'nominal_rate': self.nominal_rate, 'service': self.service}


@dataclass(frozen=True)
class FlashEventConfig:
    """
    Benign burst parameters.

    classes lists the service classes whose flows are multiplied while an
    event is active; target_utilization is the peak link utilization the
    simulator calibrates burst_multiplier to.
    """
    arrival_rate: float = 0.0
    burst_multiplier: float = 1.0
    duration: float = 10.0
    target_utilization: Optional[float] = None
    classes: Tuple[ServiceClass, ...] = (ServiceClass.BEST_EFFORT,)

    def __post_init__(self):
        if self.arrival_rate < 0:
            raise ValueError(f"arrival_rate must be >= 0, got {self.arrival_rate}")
        if self.burst_multiplier < 1:
            raise ValueError(f"burst_multiplier must be >= 1, got {self.burst_multiplier}")
        if not self.duration > 0:
            raise ValueError(f"duration must be > 0, got {self.duration}")
        object.__setattr__(self, 'classes', tuple(ServiceClass(c) for c in self.classes))

    def to_dict(self) -> Dict:
        return {'arrival_rate': self.arrival_rate, 'burst_multiplier': self.burst_multiplier,
                'duration': self.duration, 'target_utilization': self.target_utilization,
                'classes': [c.value for c in self.classes]}

    @classmethod
    def from_dict(cls, data: Mapping) -> 'FlashEventConfig':
        return cls(arrival_rate=float(data.get('arrival_rate', 0.0)),
                   burst_multiplier=float(data.get('burst_multiplier', 1.0)),
                   duration=float(data.get('duration', 10.0)),
                   target_utilization=data.get('target_utilization'),
                   classes=tuple(data.get('classes', (ServiceClass.BEST_EFFORT.value,))))


class FlashSchedule:
    """
    Flash-event windows over simulated time.

    Poisson arrivals are drawn lazily from rng as time advances, so equal
    seeds and equal advance() sequences give equal windows. An optional
    scheduled event starts at `onset`.
    """

    def __init__(self, flash: FlashEventConfig, rng: np.random.Generator,
                 onset: Optional[float] = None):
        self.flash = flash
        self.rng = rng
        self.windows: List[Tuple[float, float]] = []
        if onset is not None:
            self.windows.append((onset, onset + flash.duration))
        self._next_arrival = self._draw_gap(0.0)
        self._horizon = 0.0

    def _draw_gap(self, start: float) -> float:
        if self.flash.arrival_rate <= 0:
            return float('inf')
        return start + float(self.rng.exponential(1.0 / self.flash.arrival_rate))

    def advance(self, t: float) -> None:
        while self._next_arrival <= t:
            start = self._next_arrival
            self.windows.append((start, start + self.flash.duration))
            logger.debug(f"Flash event arrival at t={start:.3f}s")
            self._next_arrival = self._draw_gap(start)
        self._horizon = max(self._horizon, t)

    def active(self, t: float) -> bool:
        return any(start <= t < end for start, end in self.windows)


def generate_offered_load(flows: Sequence[FlowSpec], flash: FlashEventConfig, t: float,
                          rng: Optional[np.random.Generator] = None,
                          schedule: Optional[FlashSchedule] = None,
                          throttle: Optional[Mapping[ServiceClass, float]] = None) -> np.ndarray:
    """
    Per-flow offered rate at time t, in bits/s, aligned with `flows`.

    Args:
        flows: Flow roster
        flash: Flash-event configuration
        t: Simulated time (s)
        rng: Generator for Poisson arrivals when no schedule is supplied
        schedule: Running flash schedule (the simulator keeps one per run)
        throttle: Optional per-class rate factor in (0, 1]

    Returns:
        numpy array of offered rates
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if schedule is None and rng is not None and flash.arrival_rate > 0:
        schedule = FlashSchedule(flash, rng)
    active = False
    if schedule is not None:
        schedule.advance(t)
        active = schedule.active(t)

    rates = np.array([f.nominal_rate for f in flows], dtype=float)
    if active and flash.burst_multiplier != 1.0:
        mask = np.array([f.service_class in flash.classes for f in flows], dtype=bool)
        rates[mask] *= flash.burst_multiplier
    if throttle:
        factors = np.array([throttle.get(f.service_class, 1.0) for f in flows], dtype=float)
        rates *= factors
    return rates


@dataclass(frozen=True)
class Routing:
    """
    Path assignment for flows.

    flow_paths holds the per-flow (ECMP) assignment; pair_paths holds
    explicit overrides installed for a host pair and wins over flow_paths
    for every flow of that pair.
    """
    flow_paths: Mapping[str, SwitchPath] = field(default_factory=dict)
    pair_paths: Mapping[HostPair, SwitchPath] = field(default_factory=dict)

    def path_for(self, flow: FlowSpec) -> SwitchPath:
        path = self.pair_paths.get(flow.pair)
        if path is None:
            path = self.flow_paths.get(flow.id)
        if path is None:
            raise MissingRouteError(f"No route for flow {flow.id} ({flow.src}->{flow.dst})")
        return path

    def with_pair_path(self, pair: HostPair, path: SwitchPath) -> 'Routing':
        pair_paths = dict(self.pair_paths)
        pair_paths[pair] = tuple(path)
        return replace(self, pair_paths=pair_paths)

    def pair_path(self, pair: HostPair, flows: Sequence[FlowSpec]) -> SwitchPath:
        """Path carrying a pair: the override, else its highest-priority flow's path."""
        if pair in self.pair_paths:
            return self.pair_paths[pair]
        members = sorted((f for f in flows if f.pair == pair), key=lambda f: (f.priority, f.id))
        if not members:
            raise MissingRouteError(f"No flow or override routes pair {pair[0]}->{pair[1]}")
        return self.path_for(members[0])


@dataclass
class TrafficMatrix:
    link_ids: Tuple[str, ...]
    utilization: np.ndarray
    pairs: Tuple[HostPair, ...]
    latency: np.ndarray

    def utilization_of(self, link: str) -> float:
        return float(self.utilization[self.link_ids.index(link)])

    def latency_of(self, pair: HostPair) -> float:
        return float(self.latency[self.pairs.index(pair)])


def flow_incidence(g: NetworkGraph, routing: Routing, flows: Sequence[FlowSpec]) -> np.ndarray:
    """Boolean matrix [flow, link]: True where the flow's path uses the link."""
    inc = np.zeros((len(flows), len(g.link_ids)), dtype=bool)
    for i, flow in enumerate(flows):
        for lid in g.path_links(routing.path_for(flow)):
            inc[i, g.link_index[lid]] = True
    return inc


def path_incidence(g: NetworkGraph, paths: Sequence[SwitchPath]) -> np.ndarray:
    inc = np.zeros((len(paths), len(g.link_ids)), dtype=bool)
    for i, path in enumerate(paths):
        for lid in g.path_links(path):
            inc[i, g.link_index[lid]] = True
    return inc


def switch_incidence(g: NetworkGraph, paths: Sequence[SwitchPath]) -> np.ndarray:
    inc = np.zeros((len(paths), len(g.switch_ids)), dtype=bool)
    for i, path in enumerate(paths):
        for sid in path:
            inc[i, g.switch_index[sid]] = True
    return inc


def link_arrays(g: NetworkGraph) -> Tuple[np.ndarray, np.ndarray]:
    """(capacity, propagation_delay) arrays in g.link_ids order."""
    caps = np.array([g.links_by_id[lid].capacity for lid in g.link_ids], dtype=float)
    prop = np.array([g.links_by_id[lid].propagation_delay for lid in g.link_ids], dtype=float)
    return caps, prop


def link_delays(utilization: np.ndarray, capacity: np.ndarray, propagation: np.ndarray,
                backlog: Optional[np.ndarray] = None, mtu_bytes: int = MTU_BYTES) -> np.ndarray:
    """Per-link one-way delay: propagation + clamped queueing + backlog drain time."""
    service_time = mtu_bytes * 8 / capacity
    rho = np.minimum(np.maximum(utilization, 0.0), LATENCY_RHO_CLAMP)
    delay = propagation + service_time * rho / (1.0 - rho)
    if backlog is not None:
        delay = delay + backlog / capacity
    return delay


def _utilization_vector(g: NetworkGraph, utilization: Union[np.ndarray, Mapping[str, float]]) -> np.ndarray:
    if isinstance(utilization, Mapping):
        return np.array([float(utilization.get(lid, 0.0)) for lid in g.link_ids])
    return np.asarray(utilization, dtype=float)


def path_latency(g: NetworkGraph, path: Sequence[str],
                 utilization: Union[np.ndarray, Mapping[str, float]],
                 backlog: Optional[np.ndarray] = None, mtu_bytes: int = MTU_BYTES) -> float:
    """
    End-to-end latency of a switch path in seconds.

    Args:
        g: Topology
        path: Switch sequence
        utilization: Per-link utilization (array in g.link_ids order, or id mapping)
        backlog: Optional per-link queued bits
        mtu_bytes: Frame size for the service time

    Returns:
        Sum over links of propagation + service_time * rho/(1 - rho), rho clamped at 0.95
    """
    links = g.path_links(path)
    if not links:
        return 0.0
    util = _utilization_vector(g, utilization)
    caps, prop = link_arrays(g)
    idx = [g.link_index[lid] for lid in links]
    per_link = link_delays(util[idx], caps[idx], prop[idx],
                           None if backlog is None else np.asarray(backlog)[idx], mtu_bytes)
    return float(per_link.sum())


def compute_traffic_matrix(g: NetworkGraph, routing: Routing, flows: Sequence[FlowSpec],
                           offered: Sequence[float], pairs: Optional[Sequence[HostPair]] = None,
                           backlog: Optional[np.ndarray] = None,
                           mtu_bytes: int = MTU_BYTES) -> TrafficMatrix:
    """
    Build the traffic matrix for one instant.

    Raises:
        MissingRouteError: If a flow or monitored pair has no assigned path
    """
    offered = np.asarray(offered, dtype=float)
    caps, prop = link_arrays(g)
    inc = flow_incidence(g, routing, flows)
    utilization = (offered @ inc) / caps

    if pairs is None:
        pairs = sorted({f.pair for f in flows})
    pairs = tuple(pairs)
    delays = link_delays(utilization, caps, prop, backlog, mtu_bytes)
    pair_inc = path_incidence(g, [routing.pair_path(p, flows) for p in pairs])
    latency = pair_inc.astype(float) @ delays if pairs else np.zeros(0)
    return TrafficMatrix(g.link_ids, utilization, pairs, latency)


@dataclass
class LossReport:
    per_flow: np.ndarray
    aggregate: float
    link_drop: np.ndarray
    delivered: np.ndarray


def class_drop_fractions(loads_by_class: np.ndarray, capacity: np.ndarray) -> np.ndarray:
    """
    Per-class, per-link drop fraction under strict priority.

    Args:
        loads_by_class: Array [class (priority order), link] of offered bits/s
        capacity: Link capacities

    Returns:
        Array of the same shape; capacity is granted to classes in priority
        order so lower-priority classes lose first
    """
    remaining = capacity.astype(float).copy()
    fractions = np.zeros_like(loads_by_class, dtype=float)
    for c in range(loads_by_class.shape[0]):
        load = loads_by_class[c]
        admitted = np.minimum(load, remaining)
        with np.errstate(divide='ignore', invalid='ignore'):
            fractions[c] = np.where(load > 0, 1.0 - admitted / np.where(load > 0, load, 1.0), 0.0)
        remaining = remaining - admitted
    return np.clip(fractions, 0.0, 1.0)


def loss_from_incidence(offered: np.ndarray, class_index: np.ndarray, link_inc: np.ndarray,
                        switch_inc: np.ndarray, capacity: np.ndarray,
                        switch_loss: np.ndarray) -> LossReport:
    """Vectorized loss evaluation over precomputed incidence matrices."""
    n_classes = len(CLASSES_BY_PRIORITY)
    loads = np.zeros((n_classes, link_inc.shape[1]))
    for c in range(n_classes):
        mask = class_index == c
        if mask.any():
            loads[c] = offered[mask] @ link_inc[mask]
    fractions = class_drop_fractions(loads, capacity)
    total = loads.sum(axis=0)
    with np.errstate(divide='ignore', invalid='ignore'):
        link_drop = np.where(total > capacity, 1.0 - capacity / np.where(total > 0, total, 1.0), 0.0)

    link_keep = np.where(link_inc, 1.0 - fractions[class_index], 1.0).prod(axis=1)
    switch_keep = np.where(switch_inc, 1.0 - switch_loss[np.newaxis, :], 1.0).prod(axis=1)
    survival = link_keep * switch_keep
    per_flow = 1.0 - survival
    delivered = offered * survival
    offered_total = offered.sum()
    aggregate = float(1.0 - delivered.sum() / offered_total) if offered_total > 0 else 0.0
    return LossReport(per_flow=np.clip(per_flow, 0.0, 1.0), aggregate=min(max(aggregate, 0.0), 1.0),
                      link_drop=link_drop, delivered=delivered)


def packet_loss(g: NetworkGraph, routing: Routing, flows: Sequence[FlowSpec],
                offered: Sequence[float], thermal_excess: Optional[np.ndarray] = None,
                loss_coeff: float = DEFAULT_LOSS_COEFF) -> LossReport:
    """
    Congestion and thermal loss per flow.

    Args:
        g: Topology
        routing: Current routing
        flows: Flow roster
        offered: Per-flow offered rates aligned with flows
        thermal_excess: Per-switch max(0, tau_internal - tau_thr_max) in g.switch_ids order
        loss_coeff: Thermal loss fraction per degree C of excess

    Returns:
        LossReport with per-flow fractions, rate-weighted aggregate,
        per-link congestion drop fraction and delivered rates
    """
    offered = np.asarray(offered, dtype=float)
    caps, _ = link_arrays(g)
    paths = [routing.path_for(f) for f in flows]
    class_index = np.array([f.priority for f in flows], dtype=int)
    if thermal_excess is None:
        thermal_excess = np.zeros(len(g.switch_ids))
    switch_loss = np.minimum(1.0, loss_coeff * np.maximum(0.0, np.asarray(thermal_excess, dtype=float)))
    return loss_from_incidence(offered, class_index, path_incidence(g, paths),
                               switch_incidence(g, paths), caps, switch_loss)


CRITICAL_TEMPLATES: Tuple[Tuple[str, str, int, str, int], ...] = (
    ('turbine_operational', 'LDAQ', 0, 'ECP', 0),
    ('condition_monitoring', 'LDAQ', 0, 'ECP', 0),
    ('protection', 'MU', 0, 'vIED', 0),
    ('control', 'vIED', 0, 'MU', 0),
    ('turbine_operational', 'LDAQ', 1, 'ECP', 1),
    ('condition_monitoring', 'LDAQ', 2, 'ECP', 1),
    ('protection', 'MU', 1, 'vIED', 1),
)


def default_flow_roster(g: NetworkGraph) -> List[FlowSpec]:
    """
    Deterministic flow roster derived from host roles.

    Critical flows follow CRITICAL_TEMPLATES (role indices wrap around the
    available hosts); every LDAQ also sends meteorological data to one ECP
    and a bulk maintenance transfer to the next one. Pairs on the same host
    or the same leaf are skipped.
    """
    roles = g.hosts_by_role()
    flows: List[FlowSpec] = []

    def add(service: str, src, dst) -> None:
        if src.id == dst.id or src.leaf == dst.leaf:
            return
        profile = SERVICE_CATALOG[service]
        flows.append(FlowSpec(f"f{len(flows):03d}-{service}", src.id, dst.id,
                              profile.service_class, profile.nominal_rate, service))

    for service, src_role, src_i, dst_role, dst_i in CRITICAL_TEMPLATES:
        sources, sinks = roles.get(src_role, []), roles.get(dst_role, [])
        if sources and sinks:
            add(service, sources[src_i % len(sources)], sinks[dst_i % len(sinks)])

    ldaq, ecp = roles.get('LDAQ', []), roles.get('ECP', [])
    if ecp:
        for i, src in enumerate(ldaq):
            add('meteorological', src, ecp[i % len(ecp)])
            add('bulk_maintenance', src, ecp[(i + 1) % len(ecp)])

    logger.debug(f"Flow roster: {len(flows)} flows over {len({f.pair for f in flows})} host pairs")
    return flows


def critical_pairs(flows: Sequence[FlowSpec]) -> Tuple[HostPair, ...]:
    """Host pairs carrying at least one critical flow, sorted."""
    return tuple(sorted({f.pair for f in flows if f.service_class != ServiceClass.BEST_EFFORT}))


def save_flow_roster(flows: Sequence[FlowSpec], path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps([f.to_dict() for f in flows], indent=2, sort_keys=True))


def load_flow_roster(path: Union[str, Path]) -> List[FlowSpec]:
    data = json.loads(Path(path).read_text())
    return [FlowSpec(d['id'], d['src'], d['dst'], ServiceClass(d['service_class']),
                     float(d['nominal_rate']), d.get('service', 'custom')) for d in data]
