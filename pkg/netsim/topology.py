#!/usr/bin/env python3
"""
Spine-Leaf Topology Module
==========================

Builds, validates and serializes the super-spine/spine/leaf switch fabric of
a wind power plant (WPP) substation network and precomputes the redundant
path inventory the self-healing agent reroutes over.

Features:
- Deterministic spine-leaf generator with optional pods and spine peer links
- Frozen "wpp" (40 switches, 78 links, 60 hosts) and "small" presets
- Host attachment by role (LDAQ, ECP, MU, vIED), round-robin over leaves
- k-shortest loop-free paths ranked by hop count, propagation delay, ids
- Validation report for connectivity, capacities and host attachment
- JSON round trip for custom topologies

Leaf switches never carry transit traffic: every intermediate hop of a
computed path is a spine or super-spine.

Usage:
    from netsim.topology import load_topology, build_path_inventory

    graph = load_topology("wpp")
    inventory = build_path_inventory(graph, [("lf01", "lf02")], k=4)
    print(inventory.paths_for("lf01", "lf02"))
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import networkx as nx

logger = logging.getLogger(__name__)

DEFAULT_CAPACITY_BPS = 1e9
DEFAULT_PROPAGATION_DELAY_S = 0.25e-3
DEFAULT_K_PATHS = 4

HOST_ROLES = ("LDAQ", "ECP", "MU", "vIED")

Path_ = Tuple[str, ...]


class TopologyError(ValueError):
    """Raised for invalid topology specs, unknown presets or malformed files."""


class Tier(str, Enum):
    SUPER_SPINE = "super-spine"
    SPINE = "spine"
    LEAF = "leaf"


@dataclass(frozen=True)
class Switch:
    id: str
    tier: Tier


@dataclass(frozen=True)
class Link:
    """Undirected switch-to-switch link; endpoints are stored id-sorted."""
    a: str
    b: str
    capacity: float = DEFAULT_CAPACITY_BPS
    propagation_delay: float = DEFAULT_PROPAGATION_DELAY_S

    @property
    def id(self) -> str:
        return link_id(self.a, self.b)


@dataclass(frozen=True)
class Host:
    id: str
    role: str
    leaf: str


def link_id(u: str, v: str) -> str:
    a, b = sorted((u, v))
    return f"{a}|{b}"


@dataclass(frozen=True)
class NetworkGraph:
    """
    Capacity-annotated switch/link/host topology.

    The object is immutable once built; derived lookups (networkx graph,
    index maps) are cached on first access and safe to share read-only.
    """
    switches: Tuple[Switch, ...]
    links: Tuple[Link, ...]
    hosts: Tuple[Host, ...]
    name: str = "custom"

    @cached_property
    def switch_ids(self) -> Tuple[str, ...]:
        return tuple(sorted(s.id for s in self.switches))

    @cached_property
    def link_ids(self) -> Tuple[str, ...]:
        return tuple(sorted(link.id for link in self.links))

    @cached_property
    def host_ids(self) -> Tuple[str, ...]:
        return tuple(sorted(h.id for h in self.hosts))

    @cached_property
    def tiers(self) -> Dict[str, Tier]:
        return {s.id: s.tier for s in self.switches}

    @cached_property
    def links_by_id(self) -> Dict[str, Link]:
        return {link.id: link for link in self.links}

    @cached_property
    def link_index(self) -> Dict[str, int]:
        return {lid: i for i, lid in enumerate(self.link_ids)}

    @cached_property
    def switch_index(self) -> Dict[str, int]:
        return {sid: i for i, sid in enumerate(self.switch_ids)}

    @cached_property
    def hosts_by_id(self) -> Dict[str, Host]:
        return {h.id: h for h in self.hosts}

    @cached_property
    def graph(self) -> nx.Graph:
        """networkx view of the switch fabric (hosts are not nodes)."""
        g = nx.Graph()
        for s in self.switches:
            g.add_node(s.id, tier=s.tier.value)
        for link in self.links:
            g.add_edge(link.a, link.b, capacity=link.capacity,
                       delay=link.propagation_delay, id=link.id)
        return g

    def __contains__(self, switch_id: str) -> bool:
        return switch_id in self.tiers

    def is_leaf(self, switch_id: str) -> bool:
        return self.tiers.get(switch_id) == Tier.LEAF

    def leaf_of(self, host_id: str) -> str:
        try:
            return self.hosts_by_id[host_id].leaf
        except KeyError:
            raise TopologyError(f"Unknown host: {host_id}") from None

    def path_links(self, path: Sequence[str]) -> List[str]:
        """Link ids traversed by a switch sequence."""
        return [link_id(u, v) for u, v in zip(path, path[1:])]

    def path_delay(self, path: Sequence[str]) -> float:
        return sum(self.links_by_id[lid].propagation_delay for lid in self.path_links(path))

    def hosts_by_role(self) -> Dict[str, List[Host]]:
        roles: Dict[str, List[Host]] = {role: [] for role in HOST_ROLES}
        for host in sorted(self.hosts, key=lambda h: h.id):
            roles.setdefault(host.role, []).append(host)
        return roles

    def to_dict(self) -> Dict:
        return {
            'name': self.name,
            'switches': [{'id': s.id, 'tier': s.tier.value}
                         for s in sorted(self.switches, key=lambda s: s.id)],
            'links': [{'a': l.a, 'b': l.b, 'capacity': l.capacity,
                       'propagation_delay': l.propagation_delay}
                      for l in sorted(self.links, key=lambda l: l.id)],
            'hosts': [{'id': h.id, 'role': h.role, 'leaf': h.leaf}
                      for h in sorted(self.hosts, key=lambda h: h.id)],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: Dict) -> 'NetworkGraph':
        try:
            switches = tuple(Switch(s['id'], Tier(s['tier'])) for s in data['switches'])
            links = []
            for l in data['links']:
                a, b = sorted((l['a'], l['b']))
                links.append(Link(a, b,
                                  float(l.get('capacity', DEFAULT_CAPACITY_BPS)),
                                  float(l.get('propagation_delay', DEFAULT_PROPAGATION_DELAY_S))))
            hosts = tuple(Host(h['id'], h['role'], h['leaf']) for h in data.get('hosts', []))
        except (KeyError, TypeError, ValueError) as e:
            raise TopologyError(f"Malformed topology document: {e}") from e
        return cls(switches, tuple(links), hosts, name=data.get('name', 'custom'))

    @classmethod
    def from_json(cls, text: str) -> 'NetworkGraph':
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise TopologyError(f"Topology file is not valid JSON: {e}") from e
        return cls.from_dict(data)


@dataclass(frozen=True)
class TopologySpec:
    """
    Generator input for build_spine_leaf.

    spines and leaves are totals; with pods > 1 they are split evenly and each
    leaf is wired only to the spines of its pod. superspines=0 means no
    super-spine tier. host_count, when set, overrides hosts_per_leaf.
    """
    superspines: int = 0
    spines: int = 2
    leaves: int = 4
    hosts_per_leaf: int = 2
    capacity: float = DEFAULT_CAPACITY_BPS
    propagation_delay: float = DEFAULT_PROPAGATION_DELAY_S
    pods: int = 1
    spine_peer_links: bool = False
    host_count: Optional[int] = None
    name: str = "custom"


PRESETS: Dict[str, TopologySpec] = {
    # 2 + 4 + 34 = 40 switches; 2 pods x (2 spines x 17 leaves) = 68,
    # super-spines x spines = 8, one peer link per pod = 2 -> 78 links.
    'wpp': TopologySpec(superspines=2, spines=4, leaves=34, hosts_per_leaf=2,
                        pods=2, spine_peer_links=True, host_count=60, name='wpp'),
    'small': TopologySpec(superspines=0, spines=2, leaves=4, hosts_per_leaf=2, name='small'),
}


def _ids(prefix: str, count: int) -> List[str]:
    width = max(2, len(str(count)))
    return [f"{prefix}{i:0{width}d}" for i in range(1, count + 1)]


def build_spine_leaf(spec: TopologySpec) -> NetworkGraph:
    """
    Build a spine-leaf fabric from a spec.

    Args:
        spec: Tier counts, host attachment and link parameters

    Returns:
        NetworkGraph; equal specs give identical graphs

    Raises:
        TopologyError: On zero/negative counts or non-positive capacity
    """
    if spec.superspines < 0:
        raise TopologyError(f"superspines must be >= 0, got {spec.superspines}")
    for name in ('spines', 'leaves', 'pods'):
        value = getattr(spec, name)
        if value < 1:
            raise TopologyError(f"{name} must be >= 1, got {value}")
    if spec.host_count is None and spec.hosts_per_leaf < 1:
        raise TopologyError(f"hosts_per_leaf must be >= 1, got {spec.hosts_per_leaf}")
    if spec.host_count is not None and spec.host_count < 1:
        raise TopologyError(f"host_count must be >= 1, got {spec.host_count}")
    if spec.capacity <= 0:
        raise TopologyError(f"capacity must be > 0, got {spec.capacity}")
    if spec.propagation_delay < 0:
        raise TopologyError(f"propagation_delay must be >= 0, got {spec.propagation_delay}")
    if spec.spines % spec.pods or spec.leaves % spec.pods:
        raise TopologyError(f"spines ({spec.spines}) and leaves ({spec.leaves}) "
                            f"must divide evenly into {spec.pods} pods")

    superspine_ids = _ids('ss', spec.superspines) if spec.superspines else []
    spine_ids = _ids('sp', spec.spines)
    leaf_ids = _ids('lf', spec.leaves)

    switches = ([Switch(s, Tier.SUPER_SPINE) for s in superspine_ids]
                + [Switch(s, Tier.SPINE) for s in spine_ids]
                + [Switch(s, Tier.LEAF) for s in leaf_ids])

    def make_link(u: str, v: str) -> Link:
        a, b = sorted((u, v))
        return Link(a, b, spec.capacity, spec.propagation_delay)

    links: List[Link] = []
    spines_per_pod = spec.spines // spec.pods
    leaves_per_pod = spec.leaves // spec.pods
    for pod in range(spec.pods):
        pod_spines = spine_ids[pod * spines_per_pod:(pod + 1) * spines_per_pod]
        pod_leaves = leaf_ids[pod * leaves_per_pod:(pod + 1) * leaves_per_pod]
        for spine in pod_spines:
            for leaf in pod_leaves:
                links.append(make_link(spine, leaf))
        if spec.spine_peer_links:
            for u, v in zip(pod_spines, pod_spines[1:]):
                links.append(make_link(u, v))
    for superspine in superspine_ids:
        for spine in spine_ids:
            links.append(make_link(superspine, spine))

    n_hosts = spec.host_count if spec.host_count is not None else spec.hosts_per_leaf * spec.leaves
    hosts = [Host(host_id, HOST_ROLES[i % len(HOST_ROLES)], leaf_ids[i % len(leaf_ids)])
             for i, host_id in enumerate(_ids('h', n_hosts))]

    graph = NetworkGraph(tuple(switches), tuple(sorted(links, key=lambda l: l.id)),
                         tuple(hosts), name=spec.name)
    logger.debug(f"Built topology '{spec.name}': {len(switches)} switches, "
                 f"{len(links)} links, {len(hosts)} hosts")
    return graph


def load_topology(selector: str) -> NetworkGraph:
    """
    Resolve a --topology argument: a preset name or custom:<file>.

    Raises:
        TopologyError: Unknown preset, missing or malformed file
    """
    if selector.startswith('custom:'):
        path = Path(selector[len('custom:'):])
        if not path.exists():
            raise TopologyError(f"Topology file not found: {path}")
        graph = NetworkGraph.from_json(path.read_text())
        logger.info(f"Loaded custom topology from {path}")
        return graph
    if selector not in PRESETS:
        raise TopologyError(f"Unknown topology preset: {selector}. "
                            f"Valid presets: {', '.join(sorted(PRESETS))}")
    return build_spine_leaf(PRESETS[selector])


def _transit_view(g: NetworkGraph, src: str, dst: str) -> nx.Graph:
    nodes = [s for s in g.switch_ids if not g.is_leaf(s) or s in (src, dst)]
    return g.graph.subgraph(nodes)


def path_rank_key(g: NetworkGraph, path: Sequence[str]) -> Tuple[int, float, Tuple[str, ...]]:
    """Total order on paths: hop count, then propagation delay, then ids."""
    return len(path) - 1, round(g.path_delay(path), 12), tuple(path)


def k_shortest_paths(g: NetworkGraph, src: str, dst: str, k: int = DEFAULT_K_PATHS) -> List[Path_]:
    """
    Return up to k simple paths from src to dst in rank order.

    Paths are generated in nondecreasing hop count; every path whose hop count
    ties with the k-th one is collected before ranking, so truncation is
    exact under the full (hops, delay, ids) order.

    Args:
        g: Topology
        src: Source switch id
        dst: Destination switch id
        k: Maximum number of paths

    Returns:
        Ranked list of switch-id tuples; empty if dst is unreachable

    Raises:
        ValueError: If src == dst, k < 1, or an endpoint is not in g
    """
    if src == dst:
        raise ValueError(f"k_shortest_paths needs distinct endpoints, got {src} twice")
    if src not in g or dst not in g:
        raise ValueError(f"Unknown switch in pair ({src}, {dst})")
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")

    view = _transit_view(g, src, dst)
    if not nx.has_path(view, src, dst):
        return []

    collected: List[List[str]] = []
    hop_limit: Optional[int] = None
    for path in nx.shortest_simple_paths(view, src, dst):
        hops = len(path) - 1
        if hop_limit is not None and hops > hop_limit:
            break
        collected.append(path)
        if hop_limit is None and len(collected) == k:
            hop_limit = hops

    ranked = sorted(collected, key=lambda p: path_rank_key(g, p))
    return [tuple(p) for p in ranked[:k]]


@dataclass(frozen=True)
class PathInventory:
    """Pre-configured redundant paths per ordered (src, dst) switch pair."""
    k: int
    paths: Dict[Tuple[str, str], Tuple[Path_, ...]] = field(default_factory=dict)

    def paths_for(self, src: str, dst: str) -> Tuple[Path_, ...]:
        return self.paths.get((src, dst), ())

    def __len__(self) -> int:
        return len(self.paths)


def build_path_inventory(g: NetworkGraph, pairs: Iterable[Tuple[str, str]],
                         k: int = DEFAULT_K_PATHS) -> PathInventory:
    """
    Precompute k ranked paths for each switch pair.

    A pair whose endpoints coincide (both hosts on one leaf) gets the single
    trivial path (leaf,).

    Raises:
        TopologyError: If a pair has no path at all
    """
    paths: Dict[Tuple[str, str], Tuple[Path_, ...]] = {}
    for src, dst in sorted(set(pairs)):
        if src == dst:
            paths[(src, dst)] = ((src,),)
            continue
        found = k_shortest_paths(g, src, dst, k)
        if not found:
            raise TopologyError(f"No path between monitored switches {src} and {dst}")
        if len(found) < k:
            logger.debug(f"Only {len(found)} of {k} paths available for {src}->{dst}")
        paths[(src, dst)] = tuple(found)
    return PathInventory(k=k, paths=paths)


@dataclass
class ValidationReport:
    connected: bool = True
    capacities_positive: bool = True
    hosts_attached: bool = True
    no_self_loops: bool = True
    no_parallel_links: bool = True
    findings: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return (self.connected and self.capacities_positive and self.hosts_attached
                and self.no_self_loops and self.no_parallel_links)


def validate_graph(g: NetworkGraph) -> ValidationReport:
    """
    Check the NetworkGraph invariants and report every finding.

    Never raises; a graph violating its invariants yields passed == False.
    """
    report = ValidationReport()
    switch_set = set(s.id for s in g.switches)

    seen_pairs = set()
    for link in g.links:
        if link.a == link.b:
            report.no_self_loops = False
            report.findings.append(f"Self-loop on {link.a}")
        pair = frozenset((link.a, link.b))
        if pair in seen_pairs:
            report.no_parallel_links = False
            report.findings.append(f"Parallel link {link.id}")
        seen_pairs.add(pair)
        if not link.capacity > 0:
            report.capacities_positive = False
            report.findings.append(f"Non-positive capacity {link.capacity} on {link.id}")
        for end in (link.a, link.b):
            if end not in switch_set:
                report.connected = False
                report.findings.append(f"Link {link.id} references unknown switch {end}")

    fabric = nx.Graph()
    fabric.add_nodes_from(switch_set)
    fabric.add_edges_from((l.a, l.b) for l in g.links if l.a in switch_set and l.b in switch_set)
    if not switch_set or not nx.is_connected(fabric):
        report.connected = False
        isolated = sorted(n for n in fabric.nodes if fabric.degree(n) == 0)
        report.findings.append(
            f"Switch graph is not connected (isolated: {', '.join(isolated) or 'none'})")

    host_ids = [h.id for h in g.hosts]
    if len(host_ids) != len(set(host_ids)):
        report.hosts_attached = False
        report.findings.append("Duplicate host ids")
    for host in g.hosts:
        if g.tiers.get(host.leaf) != Tier.LEAF:
            report.hosts_attached = False
            report.findings.append(f"Host {host.id} attaches to non-leaf {host.leaf}")

    if report.passed:
        logger.debug(f"Topology '{g.name}' passed validation")
    else:
        logger.warning(f"Topology '{g.name}' failed validation: {len(report.findings)} finding(s)")
    return report
