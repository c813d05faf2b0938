"""
Dijkstra + ECMP comparator.

Shortest-path routing over propagation delay with equal-cost multipath
hashing of flows, and a slow reactive controller that recomputes routes
with utilization-inflated weights only after a polling delay. The baseline
never looks at temperatures.
"""

import hashlib
import heapq
import logging
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from netsim.actuation import Action, ActionKind, ActuationEvent
from netsim.topology import NetworkGraph, link_id
from netsim.traffic import FlowSpec, Routing

logger = logging.getLogger(__name__)

DEFAULT_DETECTION_DELAY_S = 2.0

SwitchPath = Tuple[str, ...]


def _weight_map(g: NetworkGraph, weights: Optional[Mapping[str, float]]) -> Dict[str, float]:
    if weights is None:
        return {lid: g.links_by_id[lid].propagation_delay for lid in g.link_ids}
    return dict(weights)


def _tolerance(value: float) -> float:
    return 1e-12 * max(1.0, abs(value))


def shortest_path_dag(g: NetworkGraph, src: str, weights: Optional[Mapping[str, float]] = None
                      ) -> Tuple[Dict[str, float], Dict[str, List[str]]]:
    """
    Single-source Dijkstra over positive link weights.

    Leaves other than src are reached but never expanded, so no path uses a
    leaf as a transit hop.

    Returns:
        (dist, preds): minimum weight per reached switch, and for each switch
        every neighbour that lies on some minimum-weight path to it
    """
    if src not in g:
        raise ValueError(f"Unknown switch: {src}")
    w = _weight_map(g, weights)
    dist: Dict[str, float] = {src: 0.0}
    preds: Dict[str, List[str]] = {src: []}
    heap: List[Tuple[float, str]] = [(0.0, src)]
    settled = set()
    while heap:
        d, node = heapq.heappop(heap)
        if node in settled:
            continue
        settled.add(node)
        if node != src and g.is_leaf(node):
            continue
        for nbr in sorted(g.graph.neighbors(node)):
            if nbr in settled:
                continue
            nd = d + w[link_id(node, nbr)]
            best = dist.get(nbr)
            if best is None or nd < best - _tolerance(best):
                dist[nbr] = nd
                preds[nbr] = [node]
                heapq.heappush(heap, (nd, nbr))
            elif abs(nd - best) <= _tolerance(best):
                preds[nbr].append(node)
    return dist, preds


def _dag_paths(preds: Mapping[str, List[str]], src: str, node: str) -> List[SwitchPath]:
    if node == src:
        return [(src,)]
    return [head + (node,) for p in preds[node] for head in _dag_paths(preds, src, p)]


def dijkstra(g: NetworkGraph, src: str, dst: str,
             weights: Optional[Mapping[str, float]] = None) -> Optional[SwitchPath]:
    """
    Minimum-weight path from src to dst.

    Leaves are never used as transit hops. Among equal-weight paths the
    lexicographically smallest switch sequence wins.

    Args:
        g: Topology
        src: Source switch
        dst: Destination switch
        weights: Per-link weight by link id (default: propagation delay)

    Returns:
        Switch tuple, or None if dst is unreachable
    """
    paths = ecmp_paths(g, src, dst, weights)
    return paths[0] if paths else None


def ecmp_paths(g: NetworkGraph, src: str, dst: str,
               weights: Optional[Mapping[str, float]] = None) -> List[SwitchPath]:
    """All equal-minimum-weight paths, sorted; [] if unreachable."""
    if src not in g or dst not in g:
        raise ValueError(f"Unknown switch in pair ({src}, {dst})")
    if src == dst:
        return [(src,)]
    dist, preds = shortest_path_dag(g, src, weights)
    if dst not in dist:
        return []
    return sorted(set(_dag_paths(preds, src, dst)))


def stable_hash(key: str) -> int:
    return int(hashlib.sha256(key.encode('utf-8')).hexdigest(), 16)


def ecmp_assign(g: NetworkGraph, flows: Sequence[FlowSpec],
                weights: Optional[Mapping[str, float]] = None) -> Routing:
    """
    Hash each flow onto one of the equal-cost paths between its leaves.

    The choice depends only on the flow id and the equal-cost set, so
    permuting the roster does not change any flow's path.
    """
    cache: Dict[Tuple[str, str], List[SwitchPath]] = {}
    flow_paths: Dict[str, SwitchPath] = {}
    for flow in flows:
        leaves = (g.leaf_of(flow.src), g.leaf_of(flow.dst))
        if leaves not in cache:
            cache[leaves] = ecmp_paths(g, leaves[0], leaves[1], weights)
        candidates = cache[leaves]
        if not candidates:
            logger.warning(f"Flow {flow.id} has no path between {leaves[0]} and {leaves[1]}")
            continue
        flow_paths[flow.id] = candidates[stable_hash(flow.id) % len(candidates)]
    return Routing(flow_paths=flow_paths)


def inflated_weights(g: NetworkGraph, utilization: np.ndarray) -> Dict[str, float]:
    """Propagation delay scaled by (1 + rho) per link."""
    return {lid: g.links_by_id[lid].propagation_delay * (1.0 + max(0.0, float(utilization[i])))
            for i, lid in enumerate(g.link_ids)}


class BaselineController:
    """
    Reactive recomputation after a polling delay.

    While a traffic violation persists, routes are recomputed every
    detection_delay seconds, starting detection_delay after the violation
    began. Recomputation takes effect immediately.
    """

    name = "baseline"

    def __init__(self, detection_delay: float = DEFAULT_DETECTION_DELAY_S):
        if detection_delay < 0:
            raise ValueError(f"detection_delay must be >= 0, got {detection_delay}")
        self.detection_delay = detection_delay
        self._violation_since: Optional[float] = None
        self._last_recompute: Optional[float] = None
        self.recomputations = 0

    @property
    def decisions(self) -> int:
        return self.recomputations

    def on_tick(self, sim, record=None) -> None:
        report = sim.report
        if not report.trigger:
            self._violation_since = None
            self._last_recompute = None
            return
        if self._violation_since is None:
            self._violation_since = sim.t
        anchor = self._last_recompute if self._last_recompute is not None else self._violation_since
        if sim.t - anchor < self.detection_delay:
            return

        weights = inflated_weights(sim.graph, sim.traffic_matrix.utilization)
        routing = ecmp_assign(sim.graph, sim.flows, weights)
        event = ActuationEvent(t_decide=self._violation_since, action=Action(ActionKind.RECOMPUTE),
                               t_effective=sim.t, delay=sim.t - self._violation_since)
        sim.install_routing(routing, event)
        self._last_recompute = sim.t
        self.recomputations += 1
        logger.debug(f"t={sim.t:.3f}s baseline recomputed routes "
                     f"(violation since {self._violation_since:.3f}s)")


def baseline_react(sim, detection_delay: float = DEFAULT_DETECTION_DELAY_S,
                   duration: Optional[float] = None):
    """
    Run the simulator under the baseline controller.

    Args:
        sim: NetworkSimulator
        detection_delay: Polling delay before recomputation (s)
        duration: Simulated seconds to run (default: until the simulator's horizon)

    Returns:
        The recorded TickTrace
    """
    controller = BaselineController(detection_delay)
    return sim.run(duration, controller=controller)
