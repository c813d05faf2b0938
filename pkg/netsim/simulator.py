#!/usr/bin/env python3
"""
Tick-Driven Network Simulator
=============================

In-process stand-in for the emulated SDN testbed. Each tick executes due
actuation events, applies the scenario's disruption onset, advances the
flash-event schedule, evaluates offered load, link utilization, queue
backlog, latency and loss, and integrates the switch thermal model.

Features:
- Vectorized incidence matrices, rebuilt only when routing changes
- Independent random streams (traffic, actuation, policy) spawned from one seed
- Flash multiplier calibration to a target peak link utilization
- Compounding per-class throttle with automatic release
- Column-oriented TickTrace for metrics and JSONL export

Usage:
    from netsim.simulator import NetworkSimulator, SimulationSettings

    sim = NetworkSimulator(graph, flows, intents, thermal_params, seed=42)
    trace = sim.run(duration=5.0)
"""

import heapq
import itertools
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from netsim.actuation import ActionKind, ActuationEvent, ActuationLog, ActuationSettings
from netsim.baseline import ecmp_assign
from netsim.knowledge import NetworkState, QoSIntents, ViolationReport, check_violations
from netsim.thermal import (ThermalMode, ThermalParams, ThermalState, advance, apply_cooling,
                            set_exogenous)
from netsim.topology import NetworkGraph, PathInventory, build_path_inventory
from netsim.traffic import (FlashEventConfig, FlashSchedule, FlowSpec, Routing, ServiceClass,
                            TrafficMatrix, critical_pairs, flow_incidence, generate_offered_load,
                            link_arrays, link_delays, loss_from_incidence, path_incidence,
                            switch_incidence)

logger = logging.getLogger(__name__)

# Parameters of the first TC row; used when no scenario supplies its own.
DEFAULT_THERMAL_PARAMS = ThermalParams(300.0, 200.0, 0.80, 1.20, 5.0, 12.0)


class SimulationDivergenceError(RuntimeError):
    """Raised when a temperature becomes non-finite."""


@dataclass(frozen=True)
class SimulationSettings:
    tick: float = 0.001
    buffer_bytes: int = 750_000
    loss_coeff: float = 0.002
    mtu_bytes: int = 1500
    k_paths: int = 4
    thermal_mode: str = ThermalMode.FIRST_ORDER_CORRECTED.value
    gain_scale: Optional[float] = None
    fast_forward_tick: float = 0.1

    def __post_init__(self):
        if not self.tick > 0:
            raise ValueError(f"tick must be > 0, got {self.tick}")
        if self.buffer_bytes < 0:
            raise ValueError(f"buffer_bytes must be >= 0, got {self.buffer_bytes}")
        if self.k_paths < 1:
            raise ValueError(f"k_paths must be >= 1, got {self.k_paths}")
        ThermalMode(self.thermal_mode)


@dataclass(frozen=True)
class DisruptionPlan:
    """Scenario onset: room temperature, rack load and cooling change; optional flash event."""
    onset: float
    tau_env: float = 22.0
    hvac_level: float = 1.0
    rack_load: float = 0.5
    flash_at_onset: bool = True


@dataclass
class TickRecord:
    t: float
    disrupted: bool
    violation: bool
    thermal_violation: bool
    y: float
    latency_mean: float
    latency_max: float
    loss: float
    offered: float
    delivered: float
    utilization_max: float
    utilization_mean: float
    flash_active: bool
    events_applied: int = 0
    utilization: Optional[np.ndarray] = field(default=None, repr=False)
    latency: Optional[np.ndarray] = field(default=None, repr=False)
    tau_ambient: Optional[np.ndarray] = field(default=None, repr=False)
    tau_internal: Optional[np.ndarray] = field(default=None, repr=False)
    c_hvac: Optional[np.ndarray] = field(default=None, repr=False)

    SCALARS = ('t', 'disrupted', 'violation', 'thermal_violation', 'y', 'latency_mean',
               'latency_max', 'loss', 'offered', 'delivered', 'utilization_max',
               'utilization_mean', 'flash_active', 'events_applied')

    def to_dict(self, detail: bool = False) -> Dict:
        data = {}
        for name in self.SCALARS:
            value = getattr(self, name)
            data[name] = round(value, 12) if isinstance(value, float) else value
        if detail:
            for name in ('utilization', 'latency', 'tau_ambient', 'tau_internal', 'c_hvac'):
                value = getattr(self, name)
                if value is not None:
                    data[name] = [round(float(v), 9) for v in value]
        return data


class TickTrace:
    """Column store of tick records plus the disruption marker and actuation events."""

    COLUMNS = TickRecord.SCALARS

    def __init__(self, t_D: Optional[float] = None, tick: Optional[float] = None):
        self.t_D = t_D
        self.tick = tick
        self.columns: Dict[str, List] = {name: [] for name in self.COLUMNS}
        self.events: List[Dict] = []
        self.meta: Dict = {}

    def append(self, record: TickRecord) -> None:
        for name in self.COLUMNS:
            self.columns[name].append(getattr(record, name))

    def append_dict(self, data: Mapping) -> None:
        for name in self.COLUMNS:
            self.columns[name].append(data[name])

    def __len__(self) -> int:
        return len(self.columns['t'])

    def array(self, name: str) -> np.ndarray:
        return np.asarray(self.columns[name])

    def to_records(self) -> List[Dict]:
        return [{name: self.columns[name][i] for name in self.COLUMNS} for i in range(len(self))]

    @classmethod
    def from_series(cls, t: Sequence[float], y: Sequence[float], violation: Sequence[bool],
                    t_D: Optional[float] = None, **extra: Sequence) -> 'TickTrace':
        """Trace from a few columns; the others default to zero/False."""
        trace = cls(t_D=t_D)
        n = len(t)
        for name in cls.COLUMNS:
            if name == 't':
                values = list(t)
            elif name == 'y':
                values = list(y)
            elif name == 'violation':
                values = [bool(v) for v in violation]
            elif name in extra:
                values = list(extra[name])
            elif name in ('disrupted', 'thermal_violation', 'flash_active'):
                values = [False] * n
            else:
                values = [0] * n if name == 'events_applied' else [0.0] * n
            trace.columns[name] = values
        if t_D is not None and 'disrupted' not in extra:
            trace.columns['disrupted'] = [ti >= t_D for ti in t]
        return trace


class NetworkSimulator:
    """
    Single-threaded simulation of one scenario run.

    Controllers interact through observe() (netsim.knowledge), the latest
    ViolationReport in `report`, schedule() for delayed actions and
    install_routing() for immediate route replacement.
    """

    def __init__(self, graph: NetworkGraph, flows: Sequence[FlowSpec],
                 intents: Optional[QoSIntents] = None,
                 thermal_params: Optional[ThermalParams] = None,
                 settings: Optional[SimulationSettings] = None,
                 flash: Optional[FlashEventConfig] = None,
                 seed: int = 42,
                 disruption: Optional[DisruptionPlan] = None,
                 monitored_pairs: Optional[Sequence[Tuple[str, str]]] = None,
                 routing: Optional[Routing] = None,
                 actuation: Optional[ActuationSettings] = None,
                 horizon: Optional[float] = None):
        self.graph = graph
        self.flows: List[FlowSpec] = sorted(flows, key=lambda f: f.id)
        self.intents = intents or QoSIntents()
        self.settings = settings or SimulationSettings()
        params = thermal_params or DEFAULT_THERMAL_PARAMS
        if self.settings.gain_scale is not None:
            params = replace(params, gain_scale=self.settings.gain_scale)
        self.thermal_params = params
        self.thermal_mode = ThermalMode(self.settings.thermal_mode)
        self.actuation = actuation or ActuationSettings()
        self.disruption = disruption
        self.horizon = horizon
        self.seed = seed

        traffic_seq, actuation_seq, policy_seq = np.random.SeedSequence(seed).spawn(3)
        self.rng_traffic = np.random.default_rng(traffic_seq)
        self.rng_actuation = np.random.default_rng(actuation_seq)
        self.rng_policy = np.random.default_rng(policy_seq)

        self.pairs: Tuple[Tuple[str, str], ...] = tuple(
            sorted(monitored_pairs if monitored_pairs is not None else critical_pairs(self.flows)))
        self.host_leaf = {h.id: h.leaf for h in graph.hosts}
        leaf_pairs = [(self.host_leaf[s], self.host_leaf[d]) for s, d in self.pairs]
        self.inventory: PathInventory = build_path_inventory(graph, leaf_pairs, self.settings.k_paths)

        self.routing = routing if routing is not None else ecmp_assign(graph, self.flows)
        self._caps, self._prop = link_arrays(graph)
        self._buffer_bits = self.settings.buffer_bytes * 8.0
        self._nominal = np.array([f.nominal_rate for f in self.flows], dtype=float)
        self._class_index = np.array([f.priority for f in self.flows], dtype=int)
        self._switch_links = self._build_switch_link_matrix()

        self.flash = flash or FlashEventConfig()
        self._flash_mask = np.array([f.service_class in self.flash.classes for f in self.flows], dtype=bool)
        self._rebuild_incidence()
        if self.flash.target_utilization is not None:
            self.flash = replace(self.flash,
                                 burst_multiplier=self._calibrate_flash(self.flash.target_utilization))
        onset = disruption.onset if disruption is not None and disruption.flash_at_onset else None
        self.flash_schedule = FlashSchedule(self.flash, self.rng_traffic, onset=onset)

        self.throttle: Dict[ServiceClass, float] = {c: 1.0 for c in ServiceClass}
        self._clean_throttled_ticks = 0
        self.backlog = np.zeros(len(graph.link_ids))
        self.t = 0.0
        self.tick_index = 0
        self.onset_applied = False
        self._events: List[Tuple[float, int, ActuationEvent]] = []
        self._event_seq = itertools.count()
        self.log = ActuationLog()

        self.stats = {
            'ticks': 0,
            'offered_bits': 0.0,
            'delivered_bits': 0.0,
            'lost_bits': 0.0,
            'retransmissions': 0.0,
            'events_applied': 0,
            'stale_events': 0,
            'route_changes': 0,
        }

        demand, offered = self._offered(0.0)
        utilization = (offered @ self._link_inc) / self._caps
        self.thermal_state = ThermalState.at_steady_state(
            graph.switch_ids, params, utilization=self._switch_utilization(utilization))
        latency = self._pair_inc @ link_delays(utilization, self._caps, self._prop, self.backlog,
                                               self.settings.mtu_bytes)
        self.traffic_matrix = TrafficMatrix(graph.link_ids, utilization, self.pairs, latency)
        self.report: ViolationReport = check_violations(self.network_state(), self.intents,
                                                        self.pair_links)
        logger.debug(f"Simulator ready: {len(self.flows)} flows, {len(self.pairs)} monitored pairs, "
                     f"eta={self.eta}, seed={seed}")

    # -- structure ---------------------------------------------------------

    @property
    def eta(self) -> int:
        return len(self.graph.link_ids) + len(self.pairs) + len(self.graph.switch_ids)

    def _build_switch_link_matrix(self) -> np.ndarray:
        g = self.graph
        mat = np.zeros((len(g.switch_ids), len(g.link_ids)))
        for lid in g.link_ids:
            link = g.links_by_id[lid]
            mat[g.switch_index[link.a], g.link_index[lid]] = 1.0
            mat[g.switch_index[link.b], g.link_index[lid]] = 1.0
        degree = mat.sum(axis=1, keepdims=True)
        return mat / np.where(degree > 0, degree, 1.0)

    def _switch_utilization(self, utilization: np.ndarray) -> np.ndarray:
        return np.clip(self._switch_links @ utilization, 0.0, 1.0)

    def _rebuild_incidence(self) -> None:
        paths = [self.routing.path_for(f) for f in self.flows]
        self._link_inc = flow_incidence(self.graph, self.routing, self.flows).astype(float)
        self._link_inc_bool = self._link_inc > 0
        self._switch_inc = switch_incidence(self.graph, paths)
        self.pair_paths = {p: self.routing.pair_path(p, self.flows) for p in self.pairs}
        self._pair_inc = path_incidence(self.graph, [self.pair_paths[p] for p in self.pairs]).astype(float)
        self.pair_links = {p: tuple(self.graph.path_links(path)) for p, path in self.pair_paths.items()}

    def _calibrate_flash(self, target: float) -> float:
        flash_load = (self._nominal * self._flash_mask) @ self._link_inc
        other_load = (self._nominal * ~self._flash_mask) @ self._link_inc
        carrying = flash_load > 0
        if not carrying.any():
            logger.warning("No flash-class traffic to calibrate; burst multiplier left at 1")
            return 1.0
        multipliers = (target * self._caps[carrying] - other_load[carrying]) / flash_load[carrying]
        multiplier = max(1.0, float(multipliers.min()))
        logger.info(f"Flash multiplier calibrated to {multiplier:.2f} for peak utilization {target:.2f}")
        return multiplier

    def network_state(self) -> NetworkState:
        tm = self.traffic_matrix
        return NetworkState(tm.link_ids, tm.utilization, tm.pairs, tm.latency,
                            self.thermal_state.switch_ids, self.thermal_state.tau_internal, self.t)

    # -- control interface -------------------------------------------------

    def schedule(self, event: ActuationEvent) -> None:
        if not event.t_effective > event.t_decide:
            raise ValueError("Actuation must take effect after the decision time")
        heapq.heappush(self._events, (event.t_effective, next(self._event_seq), event))
        self.log.append(event)

    @property
    def pending_events(self) -> int:
        return len(self._events)

    def install_routing(self, routing: Routing, event: Optional[ActuationEvent] = None) -> None:
        self.routing = routing
        self._rebuild_incidence()
        self.stats['route_changes'] += 1
        if event is not None:
            event.applied = True
            self.log.append(event)

    def _execute(self, event: ActuationEvent) -> None:
        action = event.action
        report = self.report
        if action.kind is ActionKind.PATH:
            event.stale = action.pair not in report.affected_pairs
            self.routing = self.routing.with_pair_path(action.pair, action.path)
            self._rebuild_incidence()
            self.stats['route_changes'] += 1
        elif action.kind is ActionKind.THROTTLE:
            event.stale = not report.trigger
            cls = action.service_class
            self.throttle[cls] = max(self.actuation.throttle_floor,
                                     self.throttle[cls] * self.actuation.throttle_factor)
            self._clean_throttled_ticks = 0
        elif action.kind is ActionKind.COOLING:
            event.stale = not report.hot
            self.thermal_state = apply_cooling(self.thermal_state, action.switches, 1.0)
        else:
            event.stale = not report.trigger
        event.applied = True
        self.stats['events_applied'] += 1
        if event.stale:
            self.stats['stale_events'] += 1
            logger.debug(f"t={self.t:.4f}s stale action applied: {action.describe()}")

    def _execute_due(self, t_end: float) -> int:
        count = 0
        while self._events and self._events[0][0] <= t_end:
            _, _, event = heapq.heappop(self._events)
            self._execute(event)
            count += 1
        return count

    # -- dynamics ----------------------------------------------------------

    def _offered(self, t: float) -> Tuple[np.ndarray, np.ndarray]:
        """(demand, offered): demand ignores throttling, offered applies it."""
        demand = generate_offered_load(self.flows, self.flash, t, schedule=self.flash_schedule)
        offered = generate_offered_load(self.flows, self.flash, t, schedule=self.flash_schedule,
                                        throttle=self.throttle)
        return demand, offered

    def _apply_onset(self) -> None:
        plan = self.disruption
        self.thermal_state = set_exogenous(self.thermal_state, tau_env=plan.tau_env,
                                           p_rack=plan.rack_load, c_hvac=plan.hvac_level)
        self.onset_applied = True
        logger.debug(f"Disruption onset at t={plan.onset:.3f}s: tau_env={plan.tau_env}, "
                     f"C_hvac={plan.hvac_level}, P_rack={plan.rack_load}")

    def _update_throttle(self, demand: np.ndarray) -> None:
        if all(v == 1.0 for v in self.throttle.values()):
            return
        if self.report.trigger:
            self._clean_throttled_ticks = 0
            return
        self._clean_throttled_ticks += 1
        if self._clean_throttled_ticks < self.actuation.unthrottle_after_ticks:
            return
        what_if = (demand @ self._link_inc) / self._caps
        if what_if.max(initial=0.0) <= self.intents.u_thr:
            self.throttle = {c: 1.0 for c in ServiceClass}
            self._clean_throttled_ticks = 0
            logger.debug(f"t={self.t:.3f}s throttle released")

    def step(self, dt: Optional[float] = None, detail: bool = False) -> TickRecord:
        """Advance one tick and return its record."""
        dt = self.settings.tick if dt is None else dt
        t_end = round(self.t + dt, 9)
        applied = self._execute_due(t_end)

        if self.disruption is not None and not self.onset_applied and self.disruption.onset <= t_end:
            self._apply_onset()

        demand, offered = self._offered(t_end)
        load = offered @ self._link_inc
        utilization = load / self._caps
        self.backlog = np.clip(self.backlog + (load - self._caps) * dt, 0.0, self._buffer_bits)
        delays = link_delays(utilization, self._caps, self._prop, self.backlog, self.settings.mtu_bytes)
        latency = self._pair_inc @ delays

        excess = np.maximum(0.0, self.thermal_state.tau_internal - self.intents.tau_thr_max)
        switch_loss = np.minimum(1.0, self.settings.loss_coeff * excess)
        loss = loss_from_incidence(offered, self._class_index, self._link_inc_bool, self._switch_inc,
                                   self._caps, switch_loss)

        self.thermal_state = advance(self.thermal_state, self.thermal_params,
                                     self._switch_utilization(utilization), dt, self.thermal_mode)
        if not self.thermal_state.finite:
            logger.error(f"Non-finite switch temperature at t={t_end:.4f}s")
            raise SimulationDivergenceError(f"Non-finite temperature at t={t_end:.4f}s")

        self.t = t_end
        self.tick_index += 1
        self.traffic_matrix = TrafficMatrix(self.graph.link_ids, utilization, self.pairs, latency)
        self.report = check_violations(self.network_state(), self.intents, self.pair_links)

        offered_total = float(offered.sum())
        delivered_total = float(loss.delivered.sum())
        demand_total = float(demand.sum())
        lost_bits = (offered_total - delivered_total) * dt
        self.stats['ticks'] += 1
        self.stats['offered_bits'] += offered_total * dt
        self.stats['delivered_bits'] += delivered_total * dt
        self.stats['lost_bits'] += lost_bits
        self.stats['retransmissions'] += lost_bits / (self.settings.mtu_bytes * 8)
        self._update_throttle(demand)

        record = TickRecord(
            t=t_end,
            disrupted=self.onset_applied,
            violation=self.report.trigger,
            thermal_violation=self.report.thermal_violation,
            y=delivered_total / demand_total if demand_total > 0 else 1.0,
            latency_mean=float(latency.mean()) if latency.size else 0.0,
            latency_max=float(latency.max()) if latency.size else 0.0,
            loss=loss.aggregate,
            offered=offered_total,
            delivered=delivered_total,
            utilization_max=float(utilization.max(initial=0.0)),
            utilization_mean=float(utilization.mean()) if utilization.size else 0.0,
            flash_active=self.flash_schedule.active(t_end),
            events_applied=applied,
        )
        if detail:
            record.utilization = utilization.copy()
            record.latency = latency.copy()
            record.tau_ambient = self.thermal_state.tau_ambient.copy()
            record.tau_internal = self.thermal_state.tau_internal.copy()
            record.c_hvac = self.thermal_state.c_hvac.copy()
        return record

    def fast_forward(self, until: float) -> None:
        """
        Advance with coarse ticks up to `until` without recording.

        Only allowed while no actuation is pending; the fine tick resumes
        once the remaining gap is shorter than the coarse tick.
        """
        if self._events:
            raise RuntimeError("Cannot fast-forward with pending actuation events")
        coarse = max(self.settings.fast_forward_tick, self.settings.tick)
        while self.t + coarse <= until - self.settings.tick:
            if self.disruption is not None and not self.onset_applied \
                    and self.disruption.onset <= self.t + coarse:
                break
            self.step(coarse)

    def run(self, duration: Optional[float] = None, controller=None, writer=None,
            progress: bool = False) -> TickTrace:
        """
        Advance for `duration` simulated seconds (default: up to the horizon).

        Args:
            duration: Simulated seconds
            controller: Object with on_tick(sim, record), called after every tick
            writer: Optional TraceWriter receiving every record (with detail)
            progress: Show a tqdm bar over ticks

        Returns:
            TickTrace of the recorded ticks
        """
        if duration is None:
            duration = (self.horizon or 0.0) - self.t
        n_ticks = max(0, int(round(duration / self.settings.tick)))
        trace = TickTrace(t_D=self.disruption.onset if self.disruption else None,
                          tick=self.settings.tick)
        ticks: Iterable[int] = range(n_ticks)
        if progress:
            ticks = tqdm(ticks, desc="Simulating", unit="tick", unit_scale=True, leave=False)
        detail = writer is not None
        for _ in ticks:
            record = self.step(detail=detail)
            if controller is not None:
                controller.on_tick(self, record)
            trace.append(record)
            if writer is not None:
                writer.write_tick(record)
        trace.events = self.log.to_records()
        return trace
