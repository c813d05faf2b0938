"""
Single-run orchestration: policy construction, simulation and metrics.
"""

import logging
import math
from dataclasses import asdict, dataclass, fields
from enum import Enum
from pathlib import Path
from typing import Dict, Mapping, Optional, Tuple, Union

import numpy as np

from agent.dqn import DQNConfig, make_networks
from agent.network import QNetwork
from agent.trainer import SelfHealingAgent
from harness.resilience import EmptyTraceError, resilience_metrics
from harness.scenarios import ScenarioConfig
from netsim.actuation import ActionKind
from netsim.baseline import DEFAULT_DETECTION_DELAY_S, BaselineController
from netsim.simulator import NetworkSimulator, TickTrace

logger = logging.getLogger(__name__)


class MissingWeightsError(FileNotFoundError):
    """Raised when a trained-agent run is requested without a weights file."""


class Policy(str, Enum):
    BASELINE = "baseline"
    TTDQSHA = "ttdqsha"
    UNTRAINED = "untrained"


@dataclass
class MetricsRecord:
    policy: str
    tc: str
    seed: int
    latency_ms: float
    loss_pct: float
    throughput_mbps: float
    reaction_s: float
    recovery_s: float
    dy: float
    recovery_class: str
    utilization_mean: float = 0.0
    retransmissions: float = 0.0
    decisions: int = 0
    sla_adherence: float = 1.0
    actuation_events: int = 0
    stale_actions: int = 0

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> 'MetricsRecord':
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


def make_controller(policy: Union[str, Policy], sim: NetworkSimulator,
                    dqn_cfg: Optional[DQNConfig] = None,
                    weights: Optional[Union[str, Path]] = None,
                    detection_delay: float = DEFAULT_DETECTION_DELAY_S):
    """
    Controller for a policy.

    Raises:
        MissingWeightsError: For the trained agent without an existing weights file
    """
    policy = Policy(policy)
    cfg = dqn_cfg or DQNConfig()
    if policy is Policy.BASELINE:
        return BaselineController(detection_delay)
    if policy is Policy.TTDQSHA:
        if weights is None or not Path(weights).exists():
            raise MissingWeightsError(f"Trained agent needs a weights file (got {weights})")
        net, _ = QNetwork.load(weights, expected_eta=sim.eta, expected_actions=cfg.n_actions)
    else:
        net, _, _ = make_networks(sim.eta, cfg)
    return SelfHealingAgent(net, cfg, learning=False, epsilon=0.0)


def reaction_time(trace: TickTrace, sim: NetworkSimulator) -> float:
    """Time from the first violation after t_D to the effect of the first response; NaN if none."""
    t = trace.array('t')
    violation = trace.array('violation').astype(bool)
    after = violation & (t >= (trace.t_D if trace.t_D is not None else 0.0))
    if not after.any():
        return math.nan
    t_violation = float(t[np.argmax(after)])
    responses = [e for e in sim.log.events
                 if e.t_decide >= t_violation and e.applied and e.action.kind is not ActionKind.COOLING]
    if not responses:
        return math.nan
    first = min(responses, key=lambda e: e.t_decide)
    return first.t_effective - t_violation


def run_episode(sim: NetworkSimulator, policy: Union[str, Policy], scenario: ScenarioConfig, seed: int,
                dqn_cfg: Optional[DQNConfig] = None, weights: Optional[Union[str, Path]] = None,
                detection_delay: float = DEFAULT_DETECTION_DELAY_S,
                duration: Optional[float] = None, writer=None,
                progress: bool = False) -> Tuple[MetricsRecord, TickTrace]:
    """
    Simulate one (scenario, seed, policy) run and compute its metrics.

    Args:
        sim: Freshly built simulator for the scenario and seed
        policy: baseline, ttdqsha or untrained
        scenario: Scenario preset (for labelling)
        seed: Seed the simulator was built with
        dqn_cfg: Agent hyperparameters
        weights: Trained weights (ttdqsha only)
        detection_delay: Baseline polling delay
        duration: Simulated seconds (default: the simulator horizon)
        writer: Optional TraceWriter
        progress: Show a tqdm bar over ticks

    Raises:
        EmptyTraceError: If the run produces no ticks
        MissingWeightsError: If ttdqsha is requested without weights
        SimulationDivergenceError: If a temperature becomes non-finite
    """
    policy = Policy(policy)
    controller = make_controller(policy, sim, dqn_cfg, weights, detection_delay)
    trace = sim.run(duration, controller=controller, writer=writer, progress=progress)
    if len(trace) == 0:
        raise EmptyTraceError(f"{scenario.id}/{policy.value}/seed {seed}: zero-duration run")

    res = resilience_metrics(trace, (dqn_cfg or DQNConfig()).recovery_ticks)
    latency_max = trace.array('latency_max')
    t = trace.array('t')
    sla_from = res.t_R if res.t_R is not None else (trace.t_D or 0.0)
    window = t >= sla_from
    sla = float(np.mean(latency_max[window] <= sim.intents.l_thr)) if window.any() else 1.0

    stats = sim.stats
    loss_pct = 100.0 * stats['lost_bits'] / stats['offered_bits'] if stats['offered_bits'] > 0 else 0.0
    record = MetricsRecord(
        policy=policy.value,
        tc=scenario.id,
        seed=seed,
        latency_ms=float(trace.array('latency_mean').mean() * 1000.0),
        loss_pct=float(loss_pct),
        throughput_mbps=float(trace.array('delivered').mean() / 1e6),
        reaction_s=reaction_time(trace, sim),
        recovery_s=res.dt,
        dy=res.dy,
        recovery_class=res.recovery_class,
        utilization_mean=float(trace.array('utilization_mean').mean()),
        retransmissions=float(stats['retransmissions']),
        decisions=int(controller.decisions),
        sla_adherence=sla,
        actuation_events=len(sim.log),
        stale_actions=sim.log.stale_count,
    )
    logger.info(f"{scenario.id} {policy.value} seed={seed}: latency={record.latency_ms:.3f} ms, "
                f"loss={record.loss_pct:.3f}%, recovery={record.recovery_s:.3f}s ({record.recovery_class})")
    return record, trace
