"""
Observation, knowledge base and intent checks.

NetworkState is the agent's observation: link utilizations, monitored pair
latencies and switch internal temperatures, flattened in a frozen order
(links, pairs, switches; each id-sorted). check_violations compares a state
against the operator's QoS intents and decides whether the control loop
wakes up.
"""

import json
import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Deque, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

HostPair = Tuple[str, str]

DEFAULT_KB_CAPACITY = 100_000


class KnowledgeOrderError(ValueError):
    """Raised when a state is recorded with a timestamp older than the latest record."""


@dataclass
class NetworkState:
    link_ids: Tuple[str, ...]
    utilization: np.ndarray
    pairs: Tuple[HostPair, ...]
    latency: np.ndarray
    switch_ids: Tuple[str, ...]
    temps: np.ndarray
    t: float = 0.0

    @property
    def eta(self) -> int:
        return len(self.link_ids) + len(self.pairs) + len(self.switch_ids)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.utilization, self.latency, self.temps]).astype(float)


@dataclass(frozen=True)
class QoSIntents:
    """Operator thresholds; l_thr is in seconds."""
    u_thr: float = 0.8
    l_thr: float = 0.003
    tau_thr_min: float = 18.0
    tau_thr_max: float = 55.0

    def __post_init__(self):
        if not 0 < self.u_thr <= 1:
            raise ValueError(f"u_thr must lie in (0, 1], got {self.u_thr}")
        if not self.l_thr > 0:
            raise ValueError(f"l_thr must be > 0, got {self.l_thr}")
        if not self.tau_thr_min < self.tau_thr_max:
            raise ValueError(f"tau_thr_min ({self.tau_thr_min}) must be below tau_thr_max ({self.tau_thr_max})")

    def to_dict(self) -> Dict[str, float]:
        return {'u_thr': self.u_thr, 'l_thr_ms': self.l_thr * 1000.0,
                'temp_min_c': self.tau_thr_min, 'temp_max_c': self.tau_thr_max}

    @classmethod
    def from_dict(cls, data: Mapping) -> 'QoSIntents':
        unknown = set(data) - {'u_thr', 'l_thr_ms', 'temp_min_c', 'temp_max_c'}
        if unknown:
            raise ValueError(f"Unknown intent keys: {', '.join(sorted(unknown))}")
        defaults = cls()
        return cls(u_thr=float(data.get('u_thr', defaults.u_thr)),
                   l_thr=float(data.get('l_thr_ms', defaults.l_thr * 1000.0)) / 1000.0,
                   tau_thr_min=float(data.get('temp_min_c', defaults.tau_thr_min)),
                   tau_thr_max=float(data.get('temp_max_c', defaults.tau_thr_max)))

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> 'QoSIntents':
        """Load {u_thr, l_thr_ms, temp_min_c, temp_max_c} from a JSON intents file."""
        intents = cls.from_dict(json.loads(Path(path).read_text()))
        logger.info(f"Loaded intents from {path}: u_thr={intents.u_thr}, "
                    f"l_thr={intents.l_thr * 1000:.2f} ms, "
                    f"temp=[{intents.tau_thr_min}, {intents.tau_thr_max}] C")
        return intents


class KnowledgeBase:
    """Bounded, time-ordered store of observed states; oldest records are evicted first."""

    def __init__(self, capacity: int = DEFAULT_KB_CAPACITY):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._records: Deque[NetworkState] = deque(maxlen=capacity)

    def record(self, state: NetworkState) -> None:
        if self._records and state.t < self._records[-1].t:
            logger.error(f"Out-of-order state t={state.t} after t={self._records[-1].t}")
            raise KnowledgeOrderError(
                f"State at t={state.t} is older than latest record t={self._records[-1].t}")
        self._records.append(state)

    def latest(self) -> Optional[NetworkState]:
        return self._records[-1] if self._records else None

    def window(self, t0: float, t1: float) -> List[NetworkState]:
        return [s for s in self._records if t0 <= s.t <= t1]

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self):
        return iter(self._records)


def observe(sim) -> NetworkState:
    """
    Read the simulator's current traffic matrix and temperatures.

    Pure read: the simulator is not advanced or mutated, and the returned
    arrays are copies.
    """
    tm = sim.traffic_matrix
    thermal = sim.thermal_state
    return NetworkState(link_ids=tm.link_ids, utilization=tm.utilization.copy(),
                        pairs=tm.pairs, latency=tm.latency.copy(),
                        switch_ids=thermal.switch_ids, temps=thermal.tau_internal.copy(),
                        t=sim.t)


@dataclass
class ViolationReport:
    violated_links: Tuple[str, ...] = ()
    violated_pairs: Tuple[HostPair, ...] = ()
    pair_excess: Dict[HostPair, float] = field(default_factory=dict)
    hot: Tuple[str, ...] = ()
    cold: Tuple[str, ...] = ()
    trigger: bool = False

    @property
    def thermal_violation(self) -> bool:
        return bool(self.hot or self.cold)

    @property
    def any_violation(self) -> bool:
        return self.trigger or self.thermal_violation

    @property
    def affected_pairs(self) -> Tuple[HostPair, ...]:
        return tuple(sorted(p for p, excess in self.pair_excess.items() if excess > 0))

    @property
    def worst_pair(self) -> Optional[HostPair]:
        """Pair with the largest relative excess; ties go to the lexicographically smallest."""
        affected = self.affected_pairs
        if not affected:
            return None
        return min(affected, key=lambda p: (-self.pair_excess[p], p))


def check_violations(state: NetworkState, intents: QoSIntents,
                     pair_links: Optional[Mapping[HostPair, Sequence[str]]] = None) -> ViolationReport:
    """
    Compare a state with the intents.

    The trigger fires iff some link utilization exceeds u_thr or some pair
    latency exceeds l_thr. A pair's relative excess is the larger of its
    latency excess and the utilization excess of the links it currently
    uses (pair_links); temperatures only populate the hot and cold sets.
    """
    util_excess = state.utilization / intents.u_thr - 1.0
    lat_excess = state.latency / intents.l_thr - 1.0
    link_over = state.utilization > intents.u_thr
    pair_over = state.latency > intents.l_thr

    violated_links = tuple(lid for lid, over in zip(state.link_ids, link_over) if over)
    violated_pairs = tuple(p for p, over in zip(state.pairs, pair_over) if over)

    link_excess = dict(zip(state.link_ids, util_excess))
    pair_excess: Dict[HostPair, float] = {}
    for i, pair in enumerate(state.pairs):
        excess = float(lat_excess[i])
        if pair_links is not None:
            for lid in pair_links.get(pair, ()):
                excess = max(excess, float(link_excess.get(lid, -1.0)))
        pair_excess[pair] = excess

    hot = tuple(s for s, temp in zip(state.switch_ids, state.temps) if temp >= intents.tau_thr_max)
    cold = tuple(s for s, temp in zip(state.switch_ids, state.temps) if temp <= intents.tau_thr_min)
    trigger = bool(violated_links or violated_pairs)
    if trigger:
        logger.debug(f"t={state.t:.4f}s violation: {len(violated_links)} link(s), "
                     f"{len(violated_pairs)} pair(s)")
    return ViolationReport(violated_links, violated_pairs, pair_excess, hot, cold, trigger)


@dataclass(frozen=True)
class NormalizationBounds:
    u_max: float = 1.5
    l_max: float = 0.010
    tau_min: float = 0.0
    tau_max: float = 80.0


def normalize_state(state: NetworkState, bounds: NormalizationBounds = NormalizationBounds()) -> np.ndarray:
    """Affine map of each field class onto [0, 1], clamped."""
    u = state.utilization / bounds.u_max
    lat = state.latency / bounds.l_max
    temps = (state.temps - bounds.tau_min) / (bounds.tau_max - bounds.tau_min)
    return np.clip(np.concatenate([u, lat, temps]), 0.0, 1.0)
