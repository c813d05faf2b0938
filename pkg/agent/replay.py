"""Bounded experience replay."""

import logging
from collections import deque
from dataclasses import dataclass
from typing import Deque, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_CAPACITY = 2000


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool


class ReplayBuffer:
    """FIFO store of transitions; the oldest entry is evicted once full."""

    def __init__(self, capacity: int = DEFAULT_CAPACITY):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._items: Deque[Transition] = deque(maxlen=capacity)

    def push(self, transition: Transition) -> None:
        self._items.append(transition)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Optional[List[Transition]]:
        """
        Uniform sample without replacement.

        Returns:
            The batch, or None when fewer than batch_size transitions are stored
        """
        if len(self._items) < batch_size:
            return None
        indices = rng.choice(len(self._items), size=batch_size, replace=False)
        return [self._items[int(i)] for i in indices]

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)


def stack_batch(batch: Sequence[Transition]) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(states, actions, rewards, next_states, dones) as arrays."""
    states = np.stack([t.state for t in batch])
    actions = np.array([t.action for t in batch], dtype=int)
    rewards = np.array([t.reward for t in batch], dtype=float)
    next_states = np.stack([t.next_state for t in batch])
    dones = np.array([t.done for t in batch], dtype=bool)
    return states, actions, rewards, next_states, dones
