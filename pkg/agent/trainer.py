#!/usr/bin/env python3
"""
Threshold-Triggered Self-Healing Agent and Training Loop
========================================================

Control loop that sleeps while the network meets its intents and wakes up
when a utilization or latency threshold is crossed: it observes, builds the
thermal-filtered action space, picks an action epsilon-greedily, schedules
it through the actuation layer, and, once the effect is visible, stores the
transition and trains on a replay minibatch.

Features:
- Same-tick detection, one outstanding decision at a time
- Transition closes when the violation recurs after the effect (done=False)
  or after a clean recovery window (done=True)
- Proactive cooling when switches run hot without a traffic violation
- Target sync every N gradient steps, or every N episodes on request
- Per-episode reward / epsilon / loss curves with a tqdm progress bar

Usage:
    from agent.trainer import TrainingEnvironment, train

    env = TrainingEnvironment(graph, flows, [load_scenario("TC5")], duration=30.0)
    result = train(env, DQNConfig(episodes=100))
    result.net.save("weights.bin")
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from agent.dqn import (DQNConfig, build_action_space, epsilon_schedule, make_networks,
                       select_action, state_reward, sync_target, train_step)
from agent.network import AdamOptimizer, QNetwork
from agent.replay import ReplayBuffer, Transition
from harness.scenarios import ScenarioConfig, build_simulator
from netsim.actuation import Action, ActionKind, ActuationEvent, ActuationSettings, apply_action
from netsim.knowledge import (KnowledgeBase, NormalizationBounds, QoSIntents, normalize_state,
                              observe)
from netsim.simulator import NetworkSimulator, SimulationDivergenceError, SimulationSettings
from netsim.topology import NetworkGraph
from netsim.traffic import FlowSpec, critical_pairs

logger = logging.getLogger(__name__)

TRAINING_EPISODE_S = 30.0


class EnvironmentFault(RuntimeError):
    """Raised when the simulator fails during a training episode."""

    def __init__(self, episode: int, message: str = ""):
        self.episode = episode
        super().__init__(f"Environment fault in episode {episode}" + (f": {message}" if message else ""))


@dataclass
class _Pending:
    state: np.ndarray
    action_index: int
    event: ActuationEvent
    clean_ticks: int = 0


class SelfHealingAgent:
    """
    Threshold-triggered controller around a Q-network.

    With learning=False (evaluation) no transitions are stored and no
    gradient steps are taken; epsilon is then usually 0.
    """

    name = "ttdqsha"

    def __init__(self, net: QNetwork, cfg: Optional[DQNConfig] = None,
                 target_net: Optional[QNetwork] = None,
                 optimizer: Optional[AdamOptimizer] = None,
                 bounds: NormalizationBounds = NormalizationBounds(),
                 learning: bool = False, epsilon: float = 0.0,
                 proactive_cooling: bool = True,
                 rng: Optional[np.random.Generator] = None,
                 knowledge: Optional[KnowledgeBase] = None):
        self.cfg = cfg or DQNConfig()
        self.net = net
        self.target_net = target_net if target_net is not None else net.copy()
        self.optimizer = optimizer or AdamOptimizer(self.cfg.learning_rate, self.cfg.adam_beta1,
                                                    self.cfg.adam_beta2, self.cfg.adam_eps)
        self.buffer = ReplayBuffer(self.cfg.buffer_capacity)
        self.bounds = bounds
        self.learning = learning
        self.epsilon = epsilon
        self.proactive_cooling = proactive_cooling
        self.rng = rng if rng is not None else np.random.default_rng(self.cfg.seed)
        self.knowledge = knowledge if knowledge is not None else KnowledgeBase()

        self.grad_steps = 0
        self.transitions_stored = 0
        self.reset_episode()

    def reset_episode(self) -> None:
        self._pending: Optional[_Pending] = None
        self._cooling_event: Optional[ActuationEvent] = None
        self.decisions = 0
        self.cooling_actions = 0
        self.episode_reward = 0.0
        self.losses: List[float] = []
        self.recovered = False
        # simulated time restarts with every episode
        self.knowledge = KnowledgeBase(self.knowledge.capacity)

    @property
    def pending(self) -> bool:
        return self._pending is not None

    def on_tick(self, sim: NetworkSimulator, record=None) -> None:
        report = sim.report
        pending = self._pending
        if pending is not None:
            if not pending.event.applied:
                return
            if report.trigger:
                self._finalize(sim, done=False)
            else:
                pending.clean_ticks += 1
                if pending.clean_ticks >= self.cfg.recovery_ticks:
                    self._finalize(sim, done=True)
                return

        if not report.trigger:
            if self.proactive_cooling and report.hot:
                self._cool(sim, report.hot)
            return
        if self.decisions >= self.cfg.max_decisions:
            return
        self._decide(sim, report)

    def _decide(self, sim: NetworkSimulator, report) -> None:
        state = observe(sim)
        self.knowledge.record(state)
        vector = normalize_state(state, self.bounds)
        space = build_action_space(report, sim.inventory, sim.thermal_state, sim.intents,
                                   sim.host_leaf, self.cfg.k_paths)
        choice = select_action(self.net, vector, self.epsilon, sim.rng_policy,
                               space.mask, space.noop_index)
        if choice.fallback:
            logger.warning(f"t={sim.t:.4f}s no eligible action; falling back to no-op")
        action = space[choice.index]
        event = apply_action(sim, action, sim.rng_actuation)
        self._pending = _Pending(vector, choice.index, event)
        self.decisions += 1
        logger.debug(f"t={sim.t:.4f}s decision {self.decisions}: {action.describe()} "
                     f"({'explore' if choice.explored else 'greedy'})")

    def _cool(self, sim: NetworkSimulator, hot: Sequence[str]) -> None:
        if self._cooling_event is not None and not self._cooling_event.applied:
            return
        state = sim.thermal_state
        targets = tuple(s for s in hot if state.c_hvac[state.index_of(s)] < 1.0)
        if not targets:
            return
        self._cooling_event = apply_action(sim, Action(ActionKind.COOLING, switches=targets),
                                           sim.rng_actuation)
        self.cooling_actions += 1
        logger.debug(f"t={sim.t:.4f}s proactive cooling on {len(targets)} hot switch(es)")

    def _finalize(self, sim: NetworkSimulator, done: bool) -> None:
        pending = self._pending
        self._pending = None
        state = observe(sim)
        r = state_reward(state, self.bounds, self.cfg)
        self.episode_reward += r
        if done:
            self.recovered = True
        if not self.learning:
            return
        self.buffer.push(Transition(pending.state, pending.action_index, r,
                                    normalize_state(state, self.bounds), done))
        self.transitions_stored += 1
        self._learn()

    def _learn(self) -> None:
        batch = self.buffer.sample(self.cfg.batch_size, self.rng)
        if batch is None:
            return
        loss = train_step(self.net, self.target_net, batch, self.optimizer, self.cfg.gamma)
        self.grad_steps += 1
        self.losses.append(loss)
        if self.cfg.sync_per_episodes is None and self.grad_steps % self.cfg.target_sync_steps == 0:
            sync_target(self.net, self.target_net)
            logger.info(f"Target network synchronized at gradient step {self.grad_steps}")


class TrainingEnvironment:
    """Builds one simulator per training episode, cycling through a scenario mix."""

    def __init__(self, graph: NetworkGraph, flows: Sequence[FlowSpec],
                 scenarios: Sequence[ScenarioConfig],
                 intents: Optional[QoSIntents] = None,
                 settings: Optional[SimulationSettings] = None,
                 actuation: Optional[ActuationSettings] = None,
                 duration: float = TRAINING_EPISODE_S, seed: int = 42):
        if not scenarios:
            raise ValueError("Training needs at least one scenario")
        self.graph = graph
        self.flows = list(flows)
        self.scenarios = list(scenarios)
        self.intents = intents or QoSIntents()
        self.settings = settings or SimulationSettings()
        self.actuation = actuation
        self.duration = duration
        self.seed = seed

    @property
    def eta(self) -> int:
        return len(self.graph.link_ids) + len(critical_pairs(self.flows)) + len(self.graph.switch_ids)

    def episode_seed(self, episode: int) -> int:
        return int(np.random.SeedSequence([self.seed, episode]).generate_state(1)[0])

    def make(self, episode: int) -> NetworkSimulator:
        scenario = self.scenarios[episode % len(self.scenarios)]
        return build_simulator(self.graph, self.flows, scenario, self.intents, self.settings,
                               seed=self.episode_seed(episode), duration=self.duration,
                               actuation=self.actuation)


@dataclass
class EpisodeCurve:
    episode: int
    reward: float
    epsilon: float
    mean_loss: float
    decisions: int
    recovered: bool


@dataclass
class TrainingResult:
    net: QNetwork
    target_net: QNetwork
    curves: List[EpisodeCurve] = field(default_factory=list)
    grad_steps: int = 0
    transitions_stored: int = 0


def run_training_episode(env: TrainingEnvironment, agent: SelfHealingAgent, episode: int) -> NetworkSimulator:
    """
    One disruption-to-recovery episode.

    The pre-disruption segment is fast-forwarded; the episode ends on
    recovery, when the decision cap is reached with nothing pending, or at
    the episode duration.
    """
    sim = env.make(episode)
    if sim.disruption is not None:
        sim.fast_forward(sim.disruption.onset)
    tick = sim.settings.tick
    while sim.t < env.duration - tick / 2:
        record = sim.step()
        agent.on_tick(sim, record)
        if agent.recovered:
            break
        if agent.decisions >= agent.cfg.max_decisions and not agent.pending:
            break
    return sim


def train(env: TrainingEnvironment, cfg: Optional[DQNConfig] = None, episodes: Optional[int] = None,
          progress: bool = True) -> TrainingResult:
    """
    Train a Q-network on the environment.

    Args:
        env: Episode factory
        cfg: Hyperparameters
        episodes: Override for cfg.episodes
        progress: Show a tqdm bar

    Returns:
        TrainingResult with the online network, target network and curves

    Raises:
        EnvironmentFault: If the simulator diverges (carries the episode index)
        TrainingDivergenceError: If the TD loss becomes non-finite
    """
    cfg = cfg or DQNConfig()
    episodes = cfg.episodes if episodes is None else episodes
    net, target, optimizer = make_networks(env.eta, cfg)
    agent = SelfHealingAgent(net, cfg, target_net=target, optimizer=optimizer, learning=True,
                             rng=np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(3)[2]))
    result = TrainingResult(net=net, target_net=target)
    logger.info(f"Training for {episodes} episodes: eta={env.eta}, |A|={cfg.n_actions}, seed={cfg.seed}")

    bar = tqdm(range(episodes), desc="Training", unit="ep", disable=not progress)
    for k in bar:
        agent.epsilon = epsilon_schedule(k, cfg)
        agent.reset_episode()
        try:
            run_training_episode(env, agent, k)
        except SimulationDivergenceError as e:
            logger.error(f"Simulator diverged in episode {k}: {e}")
            raise EnvironmentFault(k, str(e)) from e
        if cfg.sync_per_episodes is not None and (k + 1) % cfg.sync_per_episodes == 0:
            sync_target(agent.net, agent.target_net)
            logger.info(f"Target network synchronized after episode {k}")

        mean_loss = float(np.mean(agent.losses)) if agent.losses else math.nan
        result.curves.append(EpisodeCurve(k, agent.episode_reward, agent.epsilon, mean_loss,
                                          agent.decisions, agent.recovered))
        bar.set_postfix(eps=f"{agent.epsilon:.3f}", reward=f"{agent.episode_reward:.3f}",
                        buffer=len(agent.buffer))

    result.grad_steps = agent.grad_steps
    result.transitions_stored = agent.transitions_stored
    logger.info(f"Training finished: {result.grad_steps} gradient steps, "
                f"{result.transitions_stored} transitions stored")
    return result
