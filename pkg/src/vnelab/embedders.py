"""Embedding engines: node mapping strategies plus shared BFS link routing."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .features import FeatureMatrix, extract_features, sum_adjacent_bw
from .metrics import cost, revenue
from .network import (
    Embedding,
    LinkKey,
    SubstrateNetwork,
    VirtualNetworkRequest,
    VirtualNode,
    link_key,
    node_embeddable,
)
from .policy import (
    PolicyNetwork,
    accumulate_gradient,
    apply_reward_update,
    argmax_action,
    clear_gradients,
    cross_entropy_loss,
    forward,
    sample_action,
)

ENGINE_NAMES = ("qs-drl", "baseline", "bl-vne", "cnl-vne")


class NoFeasiblePath(Exception):
    """BFS found no admissible route for some virtual link."""


class UnknownEngine(ValueError):
    """An engine name outside ENGINE_NAMES was requested."""


def _node_order(vnr: VirtualNetworkRequest) -> list[VirtualNode]:
    """Virtual nodes by descending CPU demand, ties by ascending id."""
    return sorted(vnr.nodes, key=lambda vn: (-vn.cpu_demand, vn.id))


def _link_order(vnr: VirtualNetworkRequest):
    """Virtual links by descending bandwidth demand, ties by ascending endpoints."""
    return sorted(vnr.links, key=lambda vl: (-vl.bw_demand, vl.endpoints))


def _shortest_admissible_path(
    net: SubstrateNetwork,
    start: int,
    goal: int,
    demand: int,
    delay_bound: int,
    reserved: dict[LinkKey, int],
) -> list[LinkKey] | None:
    """Fewest-hop path whose every hop admits the demand; None when cut off.

    A hop is admissible when its remaining bandwidth minus prior
    reservations covers the demand and its delay level respects the bound.
    Neighbors expand in ascending id order, so equal-length routes resolve
    deterministically.
    """
    if start == goal:
        return []
    parents = {start: start}
    queue = deque([start])
    while queue:
        current = queue.popleft()
        for neighbor in net.neighbors(current):
            if neighbor in parents:
                continue
            ln = net.link(current, neighbor)
            if demand > ln.bw_remaining - reserved.get(ln.endpoints, 0):
                continue
            if delay_bound < ln.delay_level:
                continue
            parents[neighbor] = current
            if neighbor == goal:
                path = []
                node = goal
                while node != start:
                    path.append(link_key(parents[node], node))
                    node = parents[node]
                path.reverse()
                return path
            queue.append(neighbor)
    return None


def bfs_link_map(
    vnr: VirtualNetworkRequest,
    node_assignment: dict[int, int],
    net: SubstrateNetwork,
) -> dict[LinkKey, list[LinkKey]]:
    """Route every virtual link on a hop-count shortest admissible path.

    Links are handled in descending demand order; bandwidth granted to
    earlier links of the same request is provisionally reserved so later
    links see reduced residuals. The substrate is never mutated.

    Raises NoFeasiblePath when some link cannot be routed.
    """
    reserved: dict[LinkKey, int] = {}
    routed: dict[LinkKey, list[LinkKey]] = {}
    for vl in _link_order(vnr):
        start = node_assignment[vl.endpoints[0]]
        goal = node_assignment[vl.endpoints[1]]
        path = _shortest_admissible_path(
            net, start, goal, vl.bw_demand, vl.delay_requirement, reserved
        )
        if path is None:
            raise NoFeasiblePath(
                f"virtual link {vl.endpoints}: no admissible route {start} -> {goal}"
            )
        for key in path:
            reserved[key] = reserved.get(key, 0) + vl.bw_demand
        routed[vl.endpoints] = path
    return routed


def _feasible_mask(
    vn: VirtualNode, matrix: FeatureMatrix, net: SubstrateNetwork, used: set[int]
) -> np.ndarray:
    """Feasibility of each feature row as a host for the virtual node."""
    mask = np.zeros(len(matrix.node_ids), dtype=bool)
    for row, nid in enumerate(matrix.node_ids):
        mask[row] = nid not in used and node_embeddable(vn, net.nodes[nid])
    return mask


@dataclass
class TrainStepResult:
    """Outcome of one training-mode embedding attempt."""

    embedding: Embedding | None
    losses: list[float]
    reward: float | None


def drl_embed_train(
    vnr: VirtualNetworkRequest,
    net: SubstrateNetwork,
    policy: PolicyNetwork,
    rng: np.random.Generator,
    learning_rate: float,
) -> TrainStepResult:
    """Embed one request while training the policy on its own decisions.

    Hosts are sampled from the policy over features recomputed after every
    placement, so each decision sees the CPU already claimed by earlier
    virtual nodes of this request. Links then go through bfs_link_map. On
    full success the allocation commits and the accumulated gradients are
    applied scaled by the request's revenue-to-cost ratio; on any failure
    the request is rejected and the gradients are discarded.
    """
    scratch = net.copy()
    assignment: dict[int, int] = {}
    used: set[int] = set()
    losses: list[float] = []
    for vn in _node_order(vnr):
        matrix = extract_features(scratch)
        mask = _feasible_mask(vn, matrix, scratch, used)
        if not mask.any():
            clear_gradients(policy)
            return TrainStepResult(None, losses, None)
        dist = forward(policy, matrix, mask)
        row = sample_action(dist, rng)
        losses.append(cross_entropy_loss(dist, row))
        accumulate_gradient(policy, matrix, mask, row, dist)
        host = matrix.node_ids[row]
        scratch.nodes[host].cpu_remaining -= vn.cpu_demand
        used.add(host)
        assignment[vn.id] = host
    try:
        routed = bfs_link_map(vnr, assignment, scratch)
    except NoFeasiblePath:
        clear_gradients(policy)
        return TrainStepResult(None, losses, None)
    embedding = Embedding(assignment, routed)
    net.allocate(vnr, embedding)
    if policy.decision_count == 0:
        return TrainStepResult(embedding, losses, None)
    reward = revenue(vnr) / cost(vnr, embedding)
    apply_reward_update(policy, reward, learning_rate)
    return TrainStepResult(embedding, losses, reward)


def drl_embed_test(
    vnr: VirtualNetworkRequest, net: SubstrateNetwork, policy: PolicyNetwork
) -> Embedding | None:
    """Embed one request with the trained policy left untouched.

    Same pipeline as training, but every virtual node takes the most
    probable feasible host and no gradients are recorded.
    """
    scratch = net.copy()
    assignment: dict[int, int] = {}
    used: set[int] = set()
    for vn in _node_order(vnr):
        matrix = extract_features(scratch)
        mask = _feasible_mask(vn, matrix, scratch, used)
        if not mask.any():
            return None
        row = argmax_action(forward(policy, matrix, mask))
        host = matrix.node_ids[row]
        scratch.nodes[host].cpu_remaining -= vn.cpu_demand
        used.add(host)
        assignment[vn.id] = host
    try:
        routed = bfs_link_map(vnr, assignment, scratch)
    except NoFeasiblePath:
        return None
    embedding = Embedding(assignment, routed)
    net.allocate(vnr, embedding)
    return embedding


def _rank_and_route(
    vnr: VirtualNetworkRequest,
    net: SubstrateNetwork,
    candidates_for: Callable[[VirtualNode], Iterable[int]],
) -> Embedding | None:
    """Shared skeleton of the ranking engines: place every virtual node on
    the first admissible candidate, then route links and commit."""
    assignment: dict[int, int] = {}
    used: set[int] = set()
    for vn in _node_order(vnr):
        host = next(
            (nid for nid in candidates_for(vn)
             if nid not in used and node_embeddable(vn, net.nodes[nid])),
            None,
        )
        if host is None:
            return None
        used.add(host)
        assignment[vn.id] = host
    try:
        routed = bfs_link_map(vnr, assignment, net)
    except NoFeasiblePath:
        return None
    embedding = Embedding(assignment, routed)
    net.allocate(vnr, embedding)
    return embedding


def baseline_embed(vnr: VirtualNetworkRequest, net: SubstrateNetwork) -> Embedding | None:
    """Rank hosts once by remaining CPU times adjacent remaining bandwidth.

    Each virtual node (largest demand first) takes the best-ranked unused
    host that satisfies all of its constraints; ranking ties go to the
    lower node id.
    """
    ranked = sorted(
        net.nodes,
        key=lambda nid: (-(net.nodes[nid].cpu_remaining * sum_adjacent_bw(net, nid)), nid),
    )
    return _rank_and_route(vnr, net, lambda vn: ranked)


def greedy_embed(vnr: VirtualNetworkRequest, net: SubstrateNetwork) -> Embedding | None:
    """Rank hosts once by remaining CPU alone, then route shortest paths."""
    ranked = sorted(net.nodes, key=lambda nid: (-net.nodes[nid].cpu_remaining, nid))
    return _rank_and_route(vnr, net, lambda vn: ranked)


def secure_embed(vnr: VirtualNetworkRequest, net: SubstrateNetwork) -> Embedding | None:
    """Security-first placement.

    For each virtual node only hosts meeting its security bound are
    considered, ranked by remaining CPU times adjacent remaining
    bandwidth.
    """
    def candidates(vn: VirtualNode) -> list[int]:
        eligible = [
            nid for nid in net.nodes
            if net.nodes[nid].security_level >= vn.security_requirement
        ]
        eligible.sort(
            key=lambda nid: (-(net.nodes[nid].cpu_remaining * sum_adjacent_bw(net, nid)), nid)
        )
        return eligible

    return _rank_and_route(vnr, net, candidates)


def make_engine(name: str, *, policy: PolicyNetwork | None = None):
    """Callable ``(vnr, net) -> Embedding | None`` for a test-mode engine.

    qs-drl needs a trained policy. Unknown names raise UnknownEngine with
    the valid choices listed.
    """
    if name not in ENGINE_NAMES:
        raise UnknownEngine(f"unknown engine {name!r}; valid engines: {', '.join(ENGINE_NAMES)}")
    if name == "qs-drl":
        if policy is None:
            raise UnknownEngine("engine 'qs-drl' needs a policy checkpoint")
        return lambda vnr, net: drl_embed_test(vnr, net, policy)
    if name == "baseline":
        return baseline_embed
    if name == "bl-vne":
        return greedy_embed
    return secure_embed
