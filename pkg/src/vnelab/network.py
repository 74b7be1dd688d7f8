"""Substrate and virtual network models with integer resource accounting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

LinkKey = tuple[int, int]

# Delay and security grades share one three-step scale.
LEVELS = (1, 2, 3)


class ConstraintViolation(Exception):
    """An allocation would break a capacity, delay, or security constraint."""


class UnknownRequest(KeyError):
    """Release was asked for a request id with no active allocation."""


def link_key(a: int, b: int) -> LinkKey:
    """Canonical undirected endpoint pair, smaller id first."""
    return (a, b) if a < b else (b, a)


@dataclass
class SubstrateNode:
    """Physical node: CPU capacity plus fixed delay and security levels.

    ``cpu_remaining`` tracks what is left after active allocations; it
    defaults to the full capacity for a fresh node.
    """

    id: int
    cpu_initial: int
    delay_level: int
    security_level: int
    cpu_remaining: int | None = None

    def __post_init__(self):
        if self.cpu_remaining is None:
            self.cpu_remaining = self.cpu_initial
        if self.cpu_initial < 0 or not 0 <= self.cpu_remaining <= self.cpu_initial:
            raise ValueError(f"node {self.id}: bad cpu {self.cpu_remaining}/{self.cpu_initial}")
        if self.delay_level not in LEVELS or self.security_level not in LEVELS:
            raise ValueError(f"node {self.id}: levels must be one of {LEVELS}")


@dataclass
class SubstrateLink:
    """Physical link: bandwidth capacity plus a fixed delay level."""

    endpoints: LinkKey
    bw_initial: int
    delay_level: int
    bw_remaining: int | None = None

    def __post_init__(self):
        a, b = self.endpoints
        if a == b:
            raise ValueError(f"self-loop at node {a}")
        self.endpoints = link_key(a, b)
        if self.bw_remaining is None:
            self.bw_remaining = self.bw_initial
        if self.bw_initial < 0 or not 0 <= self.bw_remaining <= self.bw_initial:
            raise ValueError(f"link {self.endpoints}: bad bw {self.bw_remaining}/{self.bw_initial}")
        if self.delay_level not in LEVELS:
            raise ValueError(f"link {self.endpoints}: levels must be one of {LEVELS}")


@dataclass
class VirtualNode:
    """Requested node: CPU demand plus delay and security requirements.

    The delay requirement is an upper bound on the host's delay level; the
    security requirement is a lower bound on the host's security level.
    """

    id: int
    cpu_demand: int
    delay_requirement: int
    security_requirement: int

    def __post_init__(self):
        if self.cpu_demand < 1:
            raise ValueError(f"virtual node {self.id}: demand must be positive")
        if self.delay_requirement not in LEVELS or self.security_requirement not in LEVELS:
            raise ValueError(f"virtual node {self.id}: levels must be one of {LEVELS}")


@dataclass
class VirtualLink:
    """Requested link: bandwidth demand plus a per-hop delay requirement."""

    endpoints: tuple[int, int]
    bw_demand: int
    delay_requirement: int

    def __post_init__(self):
        a, b = self.endpoints
        if a == b:
            raise ValueError(f"virtual self-loop at node {a}")
        self.endpoints = link_key(a, b)
        if self.bw_demand < 1:
            raise ValueError(f"virtual link {self.endpoints}: demand must be positive")
        if self.delay_requirement not in LEVELS:
            raise ValueError(f"virtual link {self.endpoints}: levels must be one of {LEVELS}")


@dataclass
class VirtualNetworkRequest:
    """A connected virtual network arriving at a point in time.

    Node and link ids are local to the request. The request occupies
    substrate resources from its arrival until arrival + lifetime.
    """

    id: int
    nodes: list[VirtualNode]
    links: list[VirtualLink]
    arrival_time: float
    lifetime: float

    def __post_init__(self):
        ids = [vn.id for vn in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError(f"request {self.id}: duplicate virtual node ids")
        self._by_id = {vn.id: vn for vn in self.nodes}
        seen = set()
        for vl in self.links:
            a, b = vl.endpoints
            if a not in self._by_id or b not in self._by_id:
                raise ValueError(f"request {self.id}: link {vl.endpoints} references a missing node")
            if vl.endpoints in seen:
                raise ValueError(f"request {self.id}: duplicate link {vl.endpoints}")
            seen.add(vl.endpoints)
        if self.lifetime <= 0:
            raise ValueError(f"request {self.id}: lifetime must be positive")
        if not self._connected():
            raise ValueError(f"request {self.id}: virtual graph is not connected")

    def _connected(self) -> bool:
        if len(self.nodes) <= 1:
            return True
        adjacency: dict[int, list[int]] = {vn.id: [] for vn in self.nodes}
        for vl in self.links:
            a, b = vl.endpoints
            adjacency[a].append(b)
            adjacency[b].append(a)
        frontier = [self.nodes[0].id]
        seen = {self.nodes[0].id}
        while frontier:
            current = frontier.pop()
            for other in adjacency[current]:
                if other not in seen:
                    seen.add(other)
                    frontier.append(other)
        return len(seen) == len(self.nodes)

    def node(self, node_id: int) -> VirtualNode:
        return self._by_id[node_id]


@dataclass
class Embedding:
    """A complete mapping of one request onto the substrate.

    ``node_assignment`` maps virtual node id to substrate node id.
    ``link_assignment`` maps virtual link endpoints to the ordered substrate
    path walked from the host of the first endpoint to the host of the
    second.
    """

    node_assignment: dict[int, int]
    link_assignment: dict[LinkKey, list[LinkKey]]


@dataclass
class ActiveAllocation:
    """Ledger entry: a request currently holding substrate resources."""

    vnr: VirtualNetworkRequest
    embedding: Embedding


def node_embeddable(vn: VirtualNode, sn: SubstrateNode) -> bool:
    """True when the CPU fits and the host meets both level requirements."""
    return (
        vn.cpu_demand <= sn.cpu_remaining
        and vn.delay_requirement >= sn.delay_level
        and vn.security_requirement <= sn.security_level
    )


def link_embeddable(vl: VirtualLink, path: Sequence[SubstrateLink]) -> bool:
    """True when bandwidth fits and the delay bound holds on every hop.

    An empty path is vacuously embeddable.
    """
    return all(
        vl.bw_demand <= ln.bw_remaining and vl.delay_requirement >= ln.delay_level
        for ln in path
    )


def path_node_sequence(start: int, path: Sequence[LinkKey]) -> list[int]:
    """Node ids visited walking ``path`` from ``start``.

    Raises ValueError when consecutive links do not chain.
    """
    sequence = [start]
    current = start
    for a, b in path:
        if current == a:
            current = b
        elif current == b:
            current = a
        else:
            raise ValueError(f"link ({a}, {b}) does not continue from node {current}")
        sequence.append(current)
    return sequence


class SubstrateNetwork:
    """Substrate graph with live resource state and an allocation ledger.

    Nodes and links keep their remaining capacities up to date; the ledger
    remembers which request holds what so departures can return resources
    exactly.
    """

    def __init__(self, nodes: Iterable[SubstrateNode], links: Iterable[SubstrateLink]):
        self.nodes: dict[int, SubstrateNode] = {}
        for node in nodes:
            if node.id in self.nodes:
                raise ValueError(f"duplicate node id {node.id}")
            self.nodes[node.id] = node
        self.links: dict[LinkKey, SubstrateLink] = {}
        self.adjacency: dict[int, list[int]] = {nid: [] for nid in self.nodes}
        for ln in links:
            a, b = ln.endpoints
            if a not in self.nodes or b not in self.nodes:
                raise ValueError(f"link {ln.endpoints} references a missing node")
            if ln.endpoints in self.links:
                raise ValueError(f"duplicate link {ln.endpoints}")
            self.links[ln.endpoints] = ln
            self.adjacency[a].append(b)
            self.adjacency[b].append(a)
        for nid in self.adjacency:
            self.adjacency[nid].sort()
        self.allocations: dict[int, ActiveAllocation] = {}

    def __eq__(self, other):
        if not isinstance(other, SubstrateNetwork):
            return NotImplemented
        return (
            self.nodes == other.nodes
            and self.links == other.links
            and self.allocations == other.allocations
        )

    def neighbors(self, node_id: int) -> list[int]:
        """Neighbor ids in ascending order."""
        return self.adjacency[node_id]

    def link(self, a: int, b: int) -> SubstrateLink:
        return self.links[link_key(a, b)]

    def copy(self) -> "SubstrateNetwork":
        """Independent copy of the current state, ledger included.

        Ledger entries are shared (requests and embeddings are never
        mutated once allocated), resource counters are not.
        """
        twin = SubstrateNetwork.__new__(SubstrateNetwork)
        twin.nodes = {
            nid: SubstrateNode(n.id, n.cpu_initial, n.delay_level, n.security_level, n.cpu_remaining)
            for nid, n in self.nodes.items()
        }
        twin.links = {
            key: SubstrateLink(ln.endpoints, ln.bw_initial, ln.delay_level, ln.bw_remaining)
            for key, ln in self.links.items()
        }
        twin.adjacency = {nid: list(adj) for nid, adj in self.adjacency.items()}
        twin.allocations = dict(self.allocations)
        return twin

    def remaining_cpu(self, node_id: int) -> int:
        """Initial CPU minus demands of all active virtual nodes hosted here.

        Recomputed from the ledger; always equals the stored
        ``cpu_remaining`` of the node.
        """
        used = 0
        for alloc in self.allocations.values():
            for vn in alloc.vnr.nodes:
                if alloc.embedding.node_assignment[vn.id] == node_id:
                    used += vn.cpu_demand
        return self.nodes[node_id].cpu_initial - used

    def remaining_bw(self, a: int, b: int) -> int:
        """Initial bandwidth minus demands of all active paths crossing the link."""
        key = link_key(a, b)
        used = 0
        for alloc in self.allocations.values():
            for vl in alloc.vnr.links:
                path = alloc.embedding.link_assignment[vl.endpoints]
                used += vl.bw_demand * path.count(key)
        return self.links[key].bw_initial - used

    def allocate(self, vnr: VirtualNetworkRequest, embedding: Embedding) -> None:
        """Atomically reserve every resource the embedding needs.

        Constraints are checked cumulatively first (several virtual links
        sharing one substrate link cannot overcommit it), so either the
        whole request is applied or the state is left untouched.

        Raises ConstraintViolation when anything does not fit.
        """
        if vnr.id in self.allocations:
            raise ConstraintViolation(f"request {vnr.id} is already embedded")
        problems = embedding_violations(vnr, embedding, self)
        if problems:
            raise ConstraintViolation("; ".join(problems))
        for vn in vnr.nodes:
            self.nodes[embedding.node_assignment[vn.id]].cpu_remaining -= vn.cpu_demand
        for vl in vnr.links:
            for key in embedding.link_assignment[vl.endpoints]:
                self.links[key].bw_remaining -= vl.bw_demand
        self.allocations[vnr.id] = ActiveAllocation(vnr, embedding)

    def release(self, vnr_id: int) -> None:
        """Return every resource held by the request and drop its ledger entry.

        Raises UnknownRequest when no such allocation exists.
        """
        alloc = self.allocations.pop(vnr_id, None)
        if alloc is None:
            raise UnknownRequest(vnr_id)
        for vn in alloc.vnr.nodes:
            self.nodes[alloc.embedding.node_assignment[vn.id]].cpu_remaining += vn.cpu_demand
        for vl in alloc.vnr.links:
            for key in alloc.embedding.link_assignment[vl.endpoints]:
                self.links[key].bw_remaining += vl.bw_demand

    def audit(self) -> list[str]:
        """Full rescan of every state invariant.

        Returns human-readable problems; an empty list means the stored
        counters, the ledger, and every active embedding are consistent.
        """
        problems: list[str] = []
        expected_cpu = {nid: 0 for nid in self.nodes}
        expected_bw = {key: 0 for key in self.links}
        for rid, alloc in self.allocations.items():
            assignment = alloc.embedding.node_assignment
            used_hosts: set[int] = set()
            for vn in alloc.vnr.nodes:
                host_id = assignment.get(vn.id)
                if host_id is None or host_id not in self.nodes:
                    problems.append(f"request {rid}: virtual node {vn.id} has no valid host")
                    continue
                if host_id in used_hosts:
                    problems.append(f"request {rid}: two virtual nodes share host {host_id}")
                used_hosts.add(host_id)
                host = self.nodes[host_id]
                if vn.delay_requirement < host.delay_level:
                    problems.append(f"request {rid}: node {vn.id} delay bound broken on host {host_id}")
                if vn.security_requirement > host.security_level:
                    problems.append(f"request {rid}: node {vn.id} security bound broken on host {host_id}")
                expected_cpu[host_id] += vn.cpu_demand
            for vl in alloc.vnr.links:
                path = alloc.embedding.link_assignment.get(vl.endpoints)
                if path is None:
                    problems.append(f"request {rid}: virtual link {vl.endpoints} has no path")
                    continue
                a, b = vl.endpoints
                try:
                    sequence = path_node_sequence(assignment[a], path)
                except (KeyError, ValueError):
                    problems.append(f"request {rid}: path for {vl.endpoints} is broken")
                    continue
                if sequence[-1] != assignment.get(b):
                    problems.append(f"request {rid}: path for {vl.endpoints} misses its far host")
                if len(set(sequence)) != len(sequence):
                    problems.append(f"request {rid}: path for {vl.endpoints} revisits a node")
                for key in path:
                    ln = self.links.get(key)
                    if ln is None:
                        problems.append(f"request {rid}: path for {vl.endpoints} uses missing link {key}")
                        continue
                    if vl.delay_requirement < ln.delay_level:
                        problems.append(f"request {rid}: link {vl.endpoints} delay bound broken on {key}")
                    expected_bw[key] += vl.bw_demand
        for nid, node in self.nodes.items():
            if not 0 <= node.cpu_remaining <= node.cpu_initial:
                problems.append(f"node {nid}: cpu {node.cpu_remaining} outside [0, {node.cpu_initial}]")
            if node.cpu_initial - node.cpu_remaining != expected_cpu[nid]:
                problems.append(f"node {nid}: cpu ledger mismatch")
        for key, ln in self.links.items():
            if not 0 <= ln.bw_remaining <= ln.bw_initial:
                problems.append(f"link {key}: bw {ln.bw_remaining} outside [0, {ln.bw_initial}]")
            if ln.bw_initial - ln.bw_remaining != expected_bw[key]:
                problems.append(f"link {key}: bw ledger mismatch")
        return problems


def embedding_violations(
    vnr: VirtualNetworkRequest, embedding: Embedding, net: SubstrateNetwork
) -> list[str]:
    """Why the embedding could not be allocated on the current state.

    Checks completeness, host injectivity, every node and per-hop link
    constraint, and cumulative demand against remaining capacities. Empty
    result means ``net.allocate(vnr, embedding)`` would succeed.
    """
    problems: list[str] = []
    used_hosts: set[int] = set()
    cpu_load: dict[int, int] = {}
    for vn in vnr.nodes:
        host_id = embedding.node_assignment.get(vn.id)
        if host_id is None:
            problems.append(f"virtual node {vn.id} is unassigned")
            continue
        if host_id not in net.nodes:
            problems.append(f"virtual node {vn.id} assigned to missing host {host_id}")
            continue
        if host_id in used_hosts:
            problems.append(f"host {host_id} assigned to two virtual nodes")
        used_hosts.add(host_id)
        host = net.nodes[host_id]
        if vn.delay_requirement < host.delay_level:
            problems.append(f"virtual node {vn.id}: host {host_id} delay level too high")
        if vn.security_requirement > host.security_level:
            problems.append(f"virtual node {vn.id}: host {host_id} security level too low")
        cpu_load[host_id] = cpu_load.get(host_id, 0) + vn.cpu_demand
    for host_id, load in cpu_load.items():
        if load > net.nodes[host_id].cpu_remaining:
            problems.append(f"host {host_id}: cpu demand {load} exceeds remaining "
                            f"{net.nodes[host_id].cpu_remaining}")
    bw_load: dict[LinkKey, int] = {}
    for vl in vnr.links:
        path = embedding.link_assignment.get(vl.endpoints)
        if path is None:
            problems.append(f"virtual link {vl.endpoints} is unrouted")
            continue
        a, b = vl.endpoints
        start = embedding.node_assignment.get(a)
        end = embedding.node_assignment.get(b)
        if start is None or end is None:
            continue  # already reported above
        try:
            sequence = path_node_sequence(start, path)
        except ValueError as exc:
            problems.append(f"virtual link {vl.endpoints}: {exc}")
            continue
        if sequence[-1] != end:
            problems.append(f"virtual link {vl.endpoints}: path ends at node "
                            f"{sequence[-1]}, not host {end}")
        if len(set(sequence)) != len(sequence):
            problems.append(f"virtual link {vl.endpoints}: path revisits a node")
        for key in path:
            ln = net.links.get(key)
            if ln is None:
                problems.append(f"virtual link {vl.endpoints}: no substrate link {key}")
                continue
            if vl.delay_requirement < ln.delay_level:
                problems.append(f"virtual link {vl.endpoints}: delay level of {key} too high")
            bw_load[key] = bw_load.get(key, 0) + vl.bw_demand
    for key, load in bw_load.items():
        if load > net.links[key].bw_remaining:
            problems.append(f"link {key}: bw demand {load} exceeds remaining "
                            f"{net.links[key].bw_remaining}")
    return problems


def substrate_to_dict(net: SubstrateNetwork) -> dict:
    """JSON-ready capture of the substrate's initial capacities."""
    return {
        "nodes": [
            {"id": n.id, "cpu": n.cpu_initial, "delay": n.delay_level, "security": n.security_level}
            for n in sorted(net.nodes.values(), key=lambda n: n.id)
        ],
        "links": [
            {"endpoints": list(key), "bw": ln.bw_initial, "delay": ln.delay_level}
            for key, ln in sorted(net.links.items())
        ],
    }


def substrate_from_dict(data: dict) -> SubstrateNetwork:
    """Fresh substrate (full capacities) from its JSON form."""
    nodes = [
        SubstrateNode(item["id"], item["cpu"], item["delay"], item["security"])
        for item in data["nodes"]
    ]
    links = [
        SubstrateLink(tuple(item["endpoints"]), item["bw"], item["delay"])
        for item in data["links"]
    ]
    return SubstrateNetwork(nodes, links)


def vnr_to_dict(vnr: VirtualNetworkRequest) -> dict:
    return {
        "id": vnr.id,
        "arrival_time": vnr.arrival_time,
        "lifetime": vnr.lifetime,
        "nodes": [
            {"id": vn.id, "cpu": vn.cpu_demand, "delay": vn.delay_requirement,
             "security": vn.security_requirement}
            for vn in vnr.nodes
        ],
        "links": [
            {"endpoints": list(vl.endpoints), "bw": vl.bw_demand, "delay": vl.delay_requirement}
            for vl in vnr.links
        ],
    }


def vnr_from_dict(data: dict) -> VirtualNetworkRequest:
    return VirtualNetworkRequest(
        id=data["id"],
        nodes=[
            VirtualNode(item["id"], item["cpu"], item["delay"], item["security"])
            for item in data["nodes"]
        ],
        links=[
            VirtualLink(tuple(item["endpoints"]), item["bw"], item["delay"])
            for item in data["links"]
        ],
        arrival_time=data["arrival_time"],
        lifetime=data["lifetime"],
    )
