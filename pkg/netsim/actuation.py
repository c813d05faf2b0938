"""
Flow-rule actuation with installation delay.

apply_action turns a decision into an ActuationEvent whose effect lands on
the simulator after a delay drawn uniformly from [1.0, 7.8] ms. The
simulator executes due events at the start of the tick that contains their
effective time.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from netsim.traffic import ServiceClass

logger = logging.getLogger(__name__)

HostPair = Tuple[str, str]


class ActionKind(str, Enum):
    PATH = "path"
    THROTTLE = "throttle"
    COOLING = "cooling"
    NOOP = "noop"
    RECOMPUTE = "recompute"


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    index: int = -1
    pair: Optional[HostPair] = None
    path: Optional[Tuple[str, ...]] = None
    service_class: Optional[ServiceClass] = None
    switches: Tuple[str, ...] = ()

    def describe(self) -> str:
        if self.kind is ActionKind.PATH:
            return f"path {self.pair[0]}->{self.pair[1]} via {'-'.join(self.path)}"
        if self.kind is ActionKind.THROTTLE:
            return f"throttle {self.service_class.value}"
        if self.kind is ActionKind.COOLING:
            return f"cooling on {len(self.switches)} switch(es)"
        return self.kind.value

    def to_dict(self) -> Dict:
        data: Dict = {'kind': self.kind.value, 'index': self.index}
        if self.pair is not None:
            data['pair'] = list(self.pair)
        if self.path is not None:
            data['path'] = list(self.path)
        if self.service_class is not None:
            data['service_class'] = self.service_class.value
        if self.switches:
            data['switches'] = list(self.switches)
        return data


@dataclass
class ActuationEvent:
    t_decide: float
    action: Action
    t_effective: float
    delay: float
    stale: bool = False
    applied: bool = False
    # Extra routing payload for controller recomputations
    payload: Optional[object] = field(default=None, repr=False, compare=False)

    def to_dict(self) -> Dict:
        return {'t_decide': round(self.t_decide, 9), 'action': self.action.to_dict(),
                't_effective': round(self.t_effective, 9), 'stale': self.stale}


@dataclass(frozen=True)
class ActuationSettings:
    delay_min: float = 0.001
    delay_max: float = 0.0078
    throttle_factor: float = 0.5
    throttle_floor: float = 0.125
    unthrottle_after_ticks: int = 10

    def __post_init__(self):
        if not 0 < self.delay_min <= self.delay_max:
            raise ValueError(f"Need 0 < delay_min <= delay_max, got [{self.delay_min}, {self.delay_max}]")
        if not 0 < self.throttle_factor <= 1:
            raise ValueError(f"throttle_factor must lie in (0, 1], got {self.throttle_factor}")
        if not 0 < self.throttle_floor <= 1:
            raise ValueError(f"throttle_floor must lie in (0, 1], got {self.throttle_floor}")


def sample_delay(settings: ActuationSettings, rng: np.random.Generator) -> float:
    return float(rng.uniform(settings.delay_min, settings.delay_max))


def apply_action(sim, action: Action, rng: np.random.Generator) -> ActuationEvent:
    """
    Schedule an action on the simulator.

    Args:
        sim: NetworkSimulator
        action: Path, throttle, cooling or no-op action
        rng: Generator for the installation delay

    Returns:
        The scheduled ActuationEvent (effective strictly after the decision)
    """
    delay = sample_delay(sim.actuation, rng)
    event = ActuationEvent(t_decide=sim.t, action=action, t_effective=sim.t + delay, delay=delay)
    sim.schedule(event)
    logger.debug(f"t={sim.t:.4f}s scheduled {action.describe()} effective at {event.t_effective:.4f}s")
    return event


class ActuationLog:
    """Append-only record of actuation events, written as JSONL."""

    def __init__(self):
        self.events: List[ActuationEvent] = []

    def append(self, event: ActuationEvent) -> None:
        self.events.append(event)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def to_records(self) -> List[Dict]:
        return [e.to_dict() for e in self.events]

    @property
    def stale_count(self) -> int:
        return sum(1 for e in self.events if e.stale)
