"""
Q-network and optimizer in plain numpy.

Fully connected ReLU network with a linear output layer, manual
backpropagation for the squared TD error on the chosen action, and an Adam
optimizer. Weights are stored in an ``.npz`` container with a JSON metadata
blob so a file trained for one topology is rejected on another.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

WEIGHTS_FORMAT_VERSION = 1
DEFAULT_HIDDEN = (24, 24)


class DimensionError(ValueError):
    """Raised when an input vector does not match the network's input width."""


class WeightsMismatchError(ValueError):
    """Raised when a weights file does not fit the requested topology or action width."""


class QNetwork:
    """
    Dense network [input -> hidden... -> n_actions].

    Parameters are kept as a flat list [W0, b0, W1, b1, ...] with W of shape
    (fan_in, fan_out); activations are row vectors.
    """

    def __init__(self, input_dim: int, n_actions: int, hidden: Sequence[int] = DEFAULT_HIDDEN,
                 rng: Optional[np.random.Generator] = None):
        if input_dim < 1 or n_actions < 1:
            raise ValueError(f"Network needs input_dim >= 1 and n_actions >= 1, got {input_dim}, {n_actions}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.layer_sizes: Tuple[int, ...] = (int(input_dim), *(int(h) for h in hidden), int(n_actions))
        self.params: List[np.ndarray] = []
        for fan_in, fan_out in zip(self.layer_sizes, self.layer_sizes[1:]):
            # He-normal initialization for ReLU layers
            self.params.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
            self.params.append(np.zeros(fan_out))

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_actions(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    def _as_batch(self, x: np.ndarray) -> Tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        batch = x[np.newaxis, :] if single else x
        if batch.ndim != 2 or batch.shape[1] != self.input_dim:
            raise DimensionError(f"Expected input width {self.input_dim}, got shape {x.shape}")
        return batch, single

    def forward_cache(self, x: np.ndarray) -> Tuple[np.ndarray, List[Tuple[np.ndarray, np.ndarray]]]:
        """Forward pass returning (q batch, per-layer (input, pre-activation) cache)."""
        a, _ = self._as_batch(x)
        cache = []
        for i in range(self.n_layers):
            w, b = self.params[2 * i], self.params[2 * i + 1]
            z = a @ w + b
            cache.append((a, z))
            a = z if i == self.n_layers - 1 else np.maximum(z, 0.0)
        return a, cache

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Q-values for one state (1-D in, 1-D out) or a batch (2-D in, 2-D out)."""
        _, single = self._as_batch(x)
        q, _ = self.forward_cache(x)
        return q[0] if single else q

    def backward(self, cache: List[Tuple[np.ndarray, np.ndarray]], dq: np.ndarray) -> List[np.ndarray]:
        """Gradients of a scalar loss w.r.t. params given dLoss/dq."""
        grads: List[np.ndarray] = [np.empty(0)] * len(self.params)
        delta = dq
        for i in reversed(range(self.n_layers)):
            a_in, _ = cache[i]
            grads[2 * i] = a_in.T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            if i > 0:
                _, z_prev = cache[i - 1]
                delta = (delta @ self.params[2 * i].T) * (z_prev > 0)
        return grads

    def loss_and_gradients(self, states: np.ndarray, actions: np.ndarray,
                           targets: np.ndarray) -> Tuple[float, List[np.ndarray]]:
        """
        Mean squared TD error on the chosen actions and its gradients.

        Only the output unit of each sample's action receives gradient.
        """
        q, cache = self.forward_cache(states)
        n = q.shape[0]
        rows = np.arange(n)
        actions = np.asarray(actions, dtype=int)
        diff = q[rows, actions] - np.asarray(targets, dtype=float)
        loss = float(np.mean(diff ** 2))
        dq = np.zeros_like(q)
        dq[rows, actions] = 2.0 * diff / n
        return loss, self.backward(cache, dq)

    def get_params(self) -> List[np.ndarray]:
        return [p.copy() for p in self.params]

    def set_params(self, params: Sequence[np.ndarray]) -> None:
        if len(params) != len(self.params):
            raise DimensionError(f"Expected {len(self.params)} parameter arrays, got {len(params)}")
        for own, new in zip(self.params, params):
            if own.shape != np.shape(new):
                raise DimensionError(f"Parameter shape {np.shape(new)} does not match {own.shape}")
        self.params = [np.array(p, dtype=float, copy=True) for p in params]

    def copy(self) -> 'QNetwork':
        clone = QNetwork.__new__(QNetwork)
        clone.layer_sizes = self.layer_sizes
        clone.params = self.get_params()
        return clone

    def save(self, path: Union[str, Path], meta: Optional[Dict] = None) -> None:
        """Write params and metadata; the path is used verbatim (no suffix added)."""
        blob = {'format_version': WEIGHTS_FORMAT_VERSION, 'eta': self.input_dim,
                'n_actions': self.n_actions, 'layer_sizes': list(self.layer_sizes)}
        blob.update(meta or {})
        arrays = {f"p{i}": p for i, p in enumerate(self.params)}
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'wb') as fh:
            np.savez(fh, meta=np.array(json.dumps(blob, sort_keys=True)), **arrays)
        logger.info(f"Saved weights to {path} (eta={self.input_dim}, |A|={self.n_actions})")

    @classmethod
    def load(cls, path: Union[str, Path], expected_eta: Optional[int] = None,
             expected_actions: Optional[int] = None) -> Tuple['QNetwork', Dict]:
        """
        Read a weights file.

        Returns:
            (network, metadata)

        Raises:
            FileNotFoundError: If the file does not exist
            WeightsMismatchError: On format version, eta or |A| mismatch
        """
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Weights file not found: {path}")
        with open(path, 'rb') as fh, np.load(fh, allow_pickle=False) as data:
            meta = json.loads(str(data['meta']))
            n_arrays = 2 * (len(meta['layer_sizes']) - 1)
            params = [data[f"p{i}"] for i in range(n_arrays)]
        if meta.get('format_version') != WEIGHTS_FORMAT_VERSION:
            raise WeightsMismatchError(f"Unsupported weights format {meta.get('format_version')}")
        if expected_eta is not None and meta['eta'] != expected_eta:
            raise WeightsMismatchError(f"Weights expect eta={meta['eta']}, environment has {expected_eta}")
        if expected_actions is not None and meta['n_actions'] != expected_actions:
            raise WeightsMismatchError(
                f"Weights expect |A|={meta['n_actions']}, environment has {expected_actions}")
        sizes = meta['layer_sizes']
        net = cls(sizes[0], sizes[-1], hidden=sizes[1:-1])
        net.set_params(params)
        return net, meta


class AdamOptimizer:
    """Adaptive-moment optimizer updating a parameter list in place."""

    def __init__(self, lr: float = 0.001, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: Optional[List[np.ndarray]] = None
        self.v: Optional[List[np.ndarray]] = None

    def step(self, params: List[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)
