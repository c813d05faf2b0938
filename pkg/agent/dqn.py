"""
DQN core: configuration, action space, policy, reward and learning step.

The action vector has a fixed width of K + 4:

    0 .. K-1   route the worst-violating monitored pair over inventory path i
    K          throttle best-effort traffic
    K + 1      throttle critical delay-tolerant traffic
    K + 2      cooling (raise C_hvac to 1 on hot switches)
    K + 3      no-op

Path slots beyond the available paths, and paths crossing a hot or cold
switch, are ineligible for that decision.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from agent.network import AdamOptimizer, QNetwork
from agent.replay import Transition, stack_batch
from netsim.actuation import Action, ActionKind
from netsim.knowledge import NetworkState, NormalizationBounds, QoSIntents, ViolationReport
from netsim.thermal import ThermalState
from netsim.topology import PathInventory
from netsim.traffic import ServiceClass

logger = logging.getLogger(__name__)


class TrainingDivergenceError(RuntimeError):
    """Raised when the TD loss becomes non-finite."""


@dataclass(frozen=True)
class DQNConfig:
    gamma: float = 0.995
    learning_rate: float = 0.001
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    epsilon_start: float = 1.0
    epsilon_min: float = 0.01
    epsilon_decay: float = 0.995
    batch_size: int = 32
    buffer_capacity: int = 2000
    target_sync_steps: int = 300
    sync_per_episodes: Optional[int] = None
    episodes: int = 1500
    alpha: float = 0.657
    beta: float = 0.345
    reward_c: float = 1.0
    hidden: Tuple[int, ...] = (24, 24)
    seeds: Tuple[int, ...] = (23, 37, 49, 71)
    seed: int = 42
    max_decisions: int = 200
    recovery_ticks: int = 10
    k_paths: int = 4

    def __post_init__(self):
        if not 0 <= self.gamma < 1:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not 0 <= self.alpha < 1 or not 0 <= self.beta < 1:
            raise ValueError(f"alpha and beta must lie in [0, 1), got {self.alpha}, {self.beta}")
        if not 0 < self.epsilon_min <= self.epsilon_start <= 1:
            raise ValueError("Need 0 < epsilon_min <= epsilon_start <= 1")
        if not 0 < self.epsilon_decay <= 1:
            raise ValueError(f"epsilon_decay must lie in (0, 1], got {self.epsilon_decay}")
        if self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise ValueError("Need 1 <= batch_size <= buffer_capacity")
        if self.target_sync_steps < 1:
            raise ValueError(f"target_sync_steps must be >= 1, got {self.target_sync_steps}")
        if self.sync_per_episodes is not None and self.sync_per_episodes < 1:
            raise ValueError(f"sync_per_episodes must be >= 1, got {self.sync_per_episodes}")
        object.__setattr__(self, 'hidden', tuple(int(h) for h in self.hidden))
        object.__setattr__(self, 'seeds', tuple(int(s) for s in self.seeds))

    @property
    def n_actions(self) -> int:
        return action_width(self.k_paths)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['hidden'] = list(self.hidden)
        data['seeds'] = list(self.seeds)
        return data


def action_width(k: int) -> int:
    return k + 4


def epsilon_schedule(episode: int, cfg: Optional[DQNConfig] = None) -> float:
    """Exploration rate for an episode index: max(eps_min, eps_start * decay**k)."""
    cfg = cfg or DQNConfig()
    return max(cfg.epsilon_min, cfg.epsilon_start * cfg.epsilon_decay ** episode)


def epsilon_floor_episode(cfg: Optional[DQNConfig] = None) -> int:
    """First episode index at which the schedule sits on its floor."""
    cfg = cfg or DQNConfig()
    if cfg.epsilon_decay >= 1.0:
        return 0 if cfg.epsilon_start <= cfg.epsilon_min else -1
    return max(0, math.ceil(math.log(cfg.epsilon_min / cfg.epsilon_start) / math.log(cfg.epsilon_decay)))


@dataclass(frozen=True)
class ActionSpace:
    k: int
    actions: Tuple[Action, ...]
    eligible: Tuple[bool, ...]

    @property
    def size(self) -> int:
        return len(self.actions)

    @property
    def mask(self) -> np.ndarray:
        return np.array(self.eligible, dtype=bool)

    @property
    def eligible_indices(self) -> List[int]:
        return [i for i, ok in enumerate(self.eligible) if ok]

    @property
    def throttle_best_effort_index(self) -> int:
        return self.k

    @property
    def throttle_delay_tolerant_index(self) -> int:
        return self.k + 1

    @property
    def cooling_index(self) -> int:
        return self.k + 2

    @property
    def noop_index(self) -> int:
        return self.k + 3

    def __getitem__(self, index: int) -> Action:
        return self.actions[index]


def thermal_sets(thermal_state: ThermalState, intents: QoSIntents) -> Tuple[Tuple[str, ...], Tuple[str, ...]]:
    temps = thermal_state.tau_internal
    hot = tuple(s for s, t in zip(thermal_state.switch_ids, temps) if t >= intents.tau_thr_max)
    cold = tuple(s for s, t in zip(thermal_state.switch_ids, temps) if t <= intents.tau_thr_min)
    return hot, cold


def build_action_space(report: ViolationReport, inventory: PathInventory, thermal_state: ThermalState,
                       intents: QoSIntents, host_leaf: Mapping[str, str],
                       k: Optional[int] = None) -> ActionSpace:
    """
    Candidate actions for the current violation.

    Args:
        report: Current violation report (its worst pair receives path actions)
        inventory: Pre-computed leaf-to-leaf paths
        thermal_state: Current temperatures for the thermal filter
        intents: Temperature thresholds
        host_leaf: Host id to leaf switch
        k: Path slots (default: the inventory's K)

    Returns:
        ActionSpace of width k + 4 with an eligibility mask
    """
    k = inventory.k if k is None else k
    hot, cold = thermal_sets(thermal_state, intents)
    blocked = set(hot) | set(cold)
    pair = report.worst_pair
    paths = inventory.paths_for(host_leaf[pair[0]], host_leaf[pair[1]]) if pair else ()

    actions: List[Action] = []
    eligible: List[bool] = []
    for i in range(k):
        if i < len(paths):
            path = paths[i]
            actions.append(Action(ActionKind.PATH, i, pair=pair, path=path))
            eligible.append(not (blocked & set(path)))
        else:
            actions.append(Action(ActionKind.PATH, i, pair=pair))
            eligible.append(False)
    actions.append(Action(ActionKind.THROTTLE, k, service_class=ServiceClass.BEST_EFFORT))
    actions.append(Action(ActionKind.THROTTLE, k + 1, service_class=ServiceClass.DELAY_TOLERANT))
    actions.append(Action(ActionKind.COOLING, k + 2, switches=hot))
    actions.append(Action(ActionKind.NOOP, k + 3))
    eligible.extend([True, True, True, True])
    if blocked and any(a.kind is ActionKind.PATH and a.path and not ok for a, ok in zip(actions, eligible)):
        logger.debug(f"Thermal filter removed path actions ({len(hot)} hot, {len(cold)} cold switches)")
    return ActionSpace(k, tuple(actions), tuple(eligible))


@dataclass(frozen=True)
class ActionChoice:
    index: int
    explored: bool
    fallback: bool = False


def select_action(net: QNetwork, state: np.ndarray, epsilon: float, rng: np.random.Generator,
                  eligible: Optional[np.ndarray] = None, noop_index: Optional[int] = None) -> ActionChoice:
    """
    Epsilon-greedy choice among eligible actions.

    A uniform draw xi <= epsilon explores uniformly over the eligible set;
    otherwise the eligible action with the largest Q-value wins, ties going
    to the lowest index. An empty eligible set yields the no-op with
    fallback=True.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    n = net.n_actions
    mask = np.ones(n, dtype=bool) if eligible is None else np.asarray(eligible, dtype=bool)
    noop = n - 1 if noop_index is None else noop_index
    candidates = np.flatnonzero(mask)
    if candidates.size == 0:
        return ActionChoice(noop, explored=False, fallback=True)
    xi = rng.random()
    if xi <= epsilon:
        return ActionChoice(int(rng.choice(candidates)), explored=True)
    q = net.forward(state)
    masked = np.where(mask, q, -np.inf)
    return ActionChoice(int(np.argmax(masked)), explored=False)


def reward(l_bar: float, u_bar: float, cfg: Optional[DQNConfig] = None) -> float:
    """R = C - (alpha * mean normalized latency + beta * mean normalized utilization)."""
    cfg = cfg or DQNConfig()
    return cfg.reward_c - (cfg.alpha * l_bar + cfg.beta * u_bar)


def state_reward(state: NetworkState, bounds: NormalizationBounds, cfg: Optional[DQNConfig] = None) -> float:
    """Reward of a state, with means over monitored pairs and links."""
    l_bar = float(np.clip(state.latency / bounds.l_max, 0.0, 1.0).mean()) if len(state.pairs) else 0.0
    u_bar = float(np.clip(state.utilization / bounds.u_max, 0.0, 1.0).mean()) if len(state.link_ids) else 0.0
    return reward(l_bar, u_bar, cfg)


def td_targets(batch: Sequence[Transition], target_net: QNetwork, gamma: float) -> np.ndarray:
    """y_i = r_i for terminal transitions, else r_i + gamma * max_a' Q_target(s'_i, a')."""
    if not batch:
        raise ValueError("td_targets needs a non-empty batch")
    _, _, rewards, next_states, dones = stack_batch(batch)
    best_next = target_net.forward(next_states).max(axis=1)
    return rewards + gamma * np.where(dones, 0.0, best_next)


def train_step(net: QNetwork, target_net: QNetwork, batch: Sequence[Transition],
               optimizer: AdamOptimizer, gamma: float) -> float:
    """
    One gradient step on the squared TD error.

    Returns:
        The loss before the update

    Raises:
        TrainingDivergenceError: If the loss is not finite
    """
    states, actions, _, _, _ = stack_batch(batch)
    targets = td_targets(batch, target_net, gamma)
    loss, grads = net.loss_and_gradients(states, actions, targets)
    if not math.isfinite(loss):
        logger.error(f"Non-finite TD loss ({loss}) on batch of {len(batch)}")
        raise TrainingDivergenceError(f"Non-finite TD loss: {loss}")
    optimizer.step(net.params, grads)
    return loss


def sync_target(net: QNetwork, target_net: QNetwork) -> None:
    target_net.set_params(net.get_params())


def make_networks(eta: int, cfg: DQNConfig, seed: Optional[int] = None) -> Tuple[QNetwork, QNetwork, AdamOptimizer]:
    """Online and independently initialized target network plus optimizer."""
    online_seq, target_seq = np.random.SeedSequence(cfg.seed if seed is None else seed).spawn(2)
    net = QNetwork(eta, cfg.n_actions, cfg.hidden, np.random.default_rng(online_seq))
    target = QNetwork(eta, cfg.n_actions, cfg.hidden, np.random.default_rng(target_seq))
    optimizer = AdamOptimizer(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    return net, target, optimizer
