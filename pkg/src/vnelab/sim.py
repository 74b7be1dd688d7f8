"""Scenario configuration, random generation, and the event simulation."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from heapq import heappop, heappush
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from .embedders import drl_embed_train
from .metrics import MetricsLedger, cost, csv_cell, revenue
from .network import (
    SubstrateLink,
    SubstrateNetwork,
    SubstrateNode,
    VirtualLink,
    VirtualNetworkRequest,
    VirtualNode,
    link_key,
)
from .policy import PolicyNetwork

log = logging.getLogger(__name__)


class InvalidConfig(ValueError):
    """A scenario configuration that cannot be realized."""


class ScenarioConfig(BaseModel):
    """Everything needed to generate a scenario and drive the experiments.

    Unknown keys are rejected so a typo in a config file fails loudly
    instead of silently running defaults. Capacity and demand ranges are
    inclusive integer bounds; levels are always drawn uniformly from
    {1, 2, 3}.
    """

    model_config = ConfigDict(extra="forbid")

    substrate_nodes: int = 100
    substrate_links: int = 570
    cpu_capacity: tuple[int, int] = (50, 100)
    bw_capacity: tuple[int, int] = (50, 100)
    vnr_count: int = 2000
    training_count: int = 1000
    vnr_nodes: tuple[int, int] = (2, 10)
    edge_probability: float = 0.5
    cpu_demand: tuple[int, int] = (1, 50)
    bw_demand: tuple[int, int] = (1, 50)
    arrival_rate: float = 0.04
    mean_lifetime: float = 500.0
    epochs: int = 100
    learning_rate: float = 0.005
    batch_size: int = 100
    window: float = 100.0
    master_seed: int = 1

    @model_validator(mode="after")
    def _realizable(self):
        n = self.substrate_nodes
        if n < 2:
            raise ValueError("substrate_nodes: need at least 2")
        if not n - 1 <= self.substrate_links <= n * (n - 1) // 2:
            raise ValueError(
                f"substrate_links: a connected simple graph on {n} nodes "
                f"needs {n - 1}..{n * (n - 1) // 2} links"
            )
        for field in ("cpu_capacity", "bw_capacity"):
            lo, hi = getattr(self, field)
            if not 0 <= lo <= hi:
                raise ValueError(f"{field}: bounds must satisfy 0 <= low <= high")
        for field in ("cpu_demand", "bw_demand"):
            lo, hi = getattr(self, field)
            if not 1 <= lo <= hi:
                raise ValueError(f"{field}: bounds must satisfy 1 <= low <= high")
        lo, hi = self.vnr_nodes
        if not 1 <= lo <= hi:
            raise ValueError("vnr_nodes: bounds must satisfy 1 <= low <= high")
        if self.vnr_count < 0:
            raise ValueError("vnr_count: must be non-negative")
        if not 0 <= self.training_count <= self.vnr_count:
            raise ValueError("training_count: must be between 0 and vnr_count")
        if not 0.0 <= self.edge_probability <= 1.0:
            raise ValueError("edge_probability: must lie in [0, 1]")
        if self.arrival_rate <= 0:
            raise ValueError("arrival_rate: must be positive")
        if self.mean_lifetime <= 0:
            raise ValueError("mean_lifetime: must be positive")
        if self.window <= 0:
            raise ValueError("window: must be positive")
        if self.epochs < 0:
            raise ValueError("epochs: must be non-negative")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate: must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size: must be at least 1")
        if self.master_seed < 0:
            raise ValueError("master_seed: must be non-negative")
        return self

    @classmethod
    def from_dict(cls, data) -> "ScenarioConfig":
        try:
            return cls.model_validate(data)
        except ValidationError as exc:
            details = "; ".join(
                f"{'.'.join(str(part) for part in err['loc'])}: {err['msg']}"
                if err["loc"] else err["msg"]
                for err in exc.errors()
            )
            raise InvalidConfig(details) from exc

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"{path}: {exc}") from exc
        if not isinstance(data, dict):
            raise InvalidConfig(f"{path}: top level must be an object")
        return cls.from_dict(data)


# Sub-stream tags under the master seed. Every random purpose draws from
# its own generator, so changing one experimental factor leaves the other
# draws untouched.
STREAM_TOPOLOGY = 0
STREAM_VNR = 1
STREAM_ARRIVAL = 2
STREAM_POLICY = 3
STREAM_SAMPLING = 4


def stream_rng(master_seed: int, stream: int, *extra: int) -> np.random.Generator:
    """Deterministic generator for one named random stream."""
    return np.random.default_rng(np.random.SeedSequence([master_seed, stream, *extra]))


def generate_substrate(config: ScenarioConfig, rng: np.random.Generator) -> SubstrateNetwork:
    """Random connected substrate of the configured size.

    A random spanning tree guarantees connectivity, then the remaining
    links are drawn uniformly from the unused node pairs. Node attributes
    are drawn in id order before any link attribute, link attributes in
    canonical link order, so equal seeds give equal networks.
    """
    n = config.substrate_nodes
    m = config.substrate_links
    max_links = n * (n - 1) // 2
    if not n - 1 <= m <= max_links:
        raise InvalidConfig(f"{m} links impossible for {n} nodes (need {n - 1}..{max_links})")
    cpu_lo, cpu_hi = config.cpu_capacity
    nodes = [
        SubstrateNode(
            i,
            int(rng.integers(cpu_lo, cpu_hi + 1)),
            int(rng.integers(1, 4)),
            int(rng.integers(1, 4)),
        )
        for i in range(n)
    ]
    order = [int(x) for x in rng.permutation(n)]
    edges: set[tuple[int, int]] = set()
    for position in range(1, n):
        anchor = order[int(rng.integers(0, position))]
        edges.add(link_key(order[position], anchor))
    missing = m - len(edges)
    if missing > 0:
        pool = [
            (a, b) for a in range(n) for b in range(a + 1, n) if (a, b) not in edges
        ]
        for index in rng.choice(len(pool), size=missing, replace=False):
            edges.add(pool[int(index)])
    bw_lo, bw_hi = config.bw_capacity
    links = [
        SubstrateLink(key, int(rng.integers(bw_lo, bw_hi + 1)), int(rng.integers(1, 4)))
        for key in sorted(edges)
    ]
    return SubstrateNetwork(nodes, links)


def _components(size: int, edges: set[tuple[int, int]]) -> list[list[int]]:
    """Connected components as sorted lists, ordered by smallest member."""
    adjacency: dict[int, list[int]] = {i: [] for i in range(size)}
    for a, b in edges:
        adjacency[a].append(b)
        adjacency[b].append(a)
    seen: set[int] = set()
    components = []
    for start in range(size):
        if start in seen:
            continue
        group = [start]
        seen.add(start)
        frontier = [start]
        while frontier:
            current = frontier.pop()
            for neighbor in adjacency[current]:
                if neighbor not in seen:
                    seen.add(neighbor)
                    group.append(neighbor)
                    frontier.append(neighbor)
        components.append(sorted(group))
    return components


def _repair_connectivity(
    size: int, edges: set[tuple[int, int]], rng: np.random.Generator
) -> set[tuple[int, int]]:
    """Bridge components with random edges until the graph is connected."""
    while size > 1:
        components = _components(size, edges)
        if len(components) == 1:
            break
        first, second = components[0], components[1]
        a = first[int(rng.integers(0, len(first)))]
        b = second[int(rng.integers(0, len(second)))]
        edges.add(link_key(a, b))
    return edges


def generate_vnrs(
    config: ScenarioConfig,
    structure_rng: np.random.Generator,
    timing_rng: np.random.Generator,
) -> list[VirtualNetworkRequest]:
    """The full request stream: graphs, demands, arrivals, lifetimes.

    Within each request every node pair carries an edge with the
    configured probability and the graph is then repaired to
    connectivity. Demands are drawn after the edge set is final, in
    canonical edge order.
    Arrival gaps are exponential with mean 1/arrival_rate, lifetimes
    exponential with the configured mean; both come from the timing
    stream, interleaved per request.
    """
    requests = []
    time = 0.0
    size_lo, size_hi = config.vnr_nodes
    cpu_lo, cpu_hi = config.cpu_demand
    bw_lo, bw_hi = config.bw_demand
    for rid in range(config.vnr_count):
        size = int(structure_rng.integers(size_lo, size_hi + 1))
        nodes = [
            VirtualNode(
                i,
                int(structure_rng.integers(cpu_lo, cpu_hi + 1)),
                int(structure_rng.integers(1, 4)),
                int(structure_rng.integers(1, 4)),
            )
            for i in range(size)
        ]
        edges: set[tuple[int, int]] = set()
        for a in range(size):
            for b in range(a + 1, size):
                if structure_rng.random() < config.edge_probability:
                    edges.add((a, b))
        edges = _repair_connectivity(size, edges, structure_rng)
        links = [
            VirtualLink(
                key,
                int(structure_rng.integers(bw_lo, bw_hi + 1)),
                int(structure_rng.integers(1, 4)),
            )
            for key in sorted(edges)
        ]
        time += float(timing_rng.exponential(1.0 / config.arrival_rate))
        lifetime = float(timing_rng.exponential(config.mean_lifetime))
        requests.append(VirtualNetworkRequest(rid, nodes, links, time, lifetime))
    return requests


def split_requests(
    config: ScenarioConfig, requests: Sequence[VirtualNetworkRequest]
) -> tuple[list[VirtualNetworkRequest], list[VirtualNetworkRequest]]:
    """Training prefix and rebased test remainder.

    Test arrivals are shifted back by the last training arrival so the
    test clock starts near zero while every inter-arrival gap survives.
    """
    training = list(requests[: config.training_count])
    trailing = requests[config.training_count :]
    base = training[-1].arrival_time if training else 0.0
    test = [
        VirtualNetworkRequest(vnr.id, vnr.nodes, vnr.links, vnr.arrival_time - base, vnr.lifetime)
        for vnr in trailing
    ]
    return training, test


# Departures sort before arrivals at equal times.
_DEPARTURE = 0
_ARRIVAL = 1


def simulate(
    net: SubstrateNetwork,
    requests: Sequence[VirtualNetworkRequest],
    embed: Callable[[VirtualNetworkRequest, SubstrateNetwork], object],
    ledger: MetricsLedger,
    *,
    window: float | None = None,
    audit: bool = False,
) -> None:
    """Drive one pass of the event simulation over ``net``.

    ``embed`` is called once per arrival and returns an Embedding (already
    committed to the network) or None for a rejection; acceptances book
    revenue and cost and schedule the departure that returns the
    resources. With ``window`` set, cumulative metrics are snapshotted at
    every window boundary up to and including one final boundary at or
    after the last event. With ``audit`` on, every event is followed by a
    full consistency rescan (slow; for tests and debugging).
    """
    events: list[tuple[float, int, int, VirtualNetworkRequest | None]] = []
    for vnr in requests:
        heappush(events, (vnr.arrival_time, _ARRIVAL, vnr.id, vnr))
    if not events:
        return
    boundary = window or 0.0
    last_time = 0.0
    while events:
        time, kind, rid, vnr = heappop(events)
        while window is not None and time > boundary:
            ledger.snapshot(boundary)
            boundary += window
        last_time = time
        if kind == _DEPARTURE:
            net.release(rid)
        else:
            ledger.record_arrival(time)
            embedding = embed(vnr, net)
            if embedding is not None:
                ledger.record_acceptance(time, revenue(vnr), cost(vnr, embedding))
                heappush(events, (time + vnr.lifetime, _DEPARTURE, rid, None))
        if audit:
            problems = net.audit()
            if problems:
                raise RuntimeError("state audit failed: " + "; ".join(problems))
    if window is not None:
        while boundary < last_time:
            ledger.snapshot(boundary)
            boundary += window
        ledger.snapshot(boundary)


@dataclass
class EpochRecord:
    """Training bookkeeping for one epoch.

    The ratios are cumulative over the epoch's replay; mean_loss averages
    the cross-entropy of every node decision made during the epoch.
    """

    epoch: int
    avg_revenue: float | None
    rc_ratio: float | None
    acceptance_rate: float | None
    mean_loss: float | None


@dataclass
class TrainingResult:
    policy: PolicyNetwork
    epochs: list[EpochRecord]


def run_training(
    config: ScenarioConfig,
    substrate: SubstrateNetwork,
    requests: Sequence[VirtualNetworkRequest],
    *,
    policy: PolicyNetwork | None = None,
    seed: int | None = None,
    start_epoch: int = 0,
) -> TrainingResult:
    """Train the node-mapping policy by replaying the request stream.

    Every epoch replays the same stream against a fresh copy of the
    substrate. The action-sampling generator is derived from the seed and
    the epoch index, so training resumed from epoch N continues exactly
    where an uninterrupted run would be. ``requests`` should be the
    training slice of the scenario.
    """
    train_seed = config.master_seed if seed is None else seed
    if policy is None:
        policy = PolicyNetwork.initialize(stream_rng(train_seed, STREAM_POLICY))
    records: list[EpochRecord] = []
    for epoch in range(start_epoch, config.epochs):
        sampling = stream_rng(train_seed, STREAM_SAMPLING, epoch)
        fresh = substrate.copy()
        ledger = MetricsLedger()
        losses: list[float] = []
        handled = 0

        def embed(vnr, net):
            nonlocal handled
            outcome = drl_embed_train(vnr, net, policy, sampling, config.learning_rate)
            losses.extend(outcome.losses)
            handled += 1
            if handled % config.batch_size == 0:
                log.debug("epoch %d: %d requests handled", epoch, handled)
            return outcome.embedding

        simulate(fresh, requests, embed, ledger)
        record = EpochRecord(
            epoch=epoch,
            avg_revenue=ledger.average_revenue(),
            rc_ratio=ledger.rc_ratio(),
            acceptance_rate=ledger.acceptance_rate(),
            mean_loss=sum(losses) / len(losses) if losses else None,
        )
        records.append(record)
        log.info(
            "epoch %d: acceptance=%s rc=%s loss=%s",
            epoch, record.acceptance_rate, record.rc_ratio, record.mean_loss,
        )
    return TrainingResult(policy, records)


def run_test(
    config: ScenarioConfig,
    substrate: SubstrateNetwork,
    requests: Sequence[VirtualNetworkRequest],
    engine: Callable[[VirtualNetworkRequest, SubstrateNetwork], object],
    *,
    window: float | None = None,
    audit: bool = False,
) -> MetricsLedger:
    """Replay a request stream on a fresh substrate copy with one engine."""
    ledger = MetricsLedger()
    simulate(
        substrate.copy(),
        requests,
        engine,
        ledger,
        window=config.window if window is None else window,
        audit=audit,
    )
    return ledger


TRAINING_COLUMNS = ("epoch", "avg_revenue", "rc_ratio", "acceptance_rate", "mean_loss")


def write_training_csv(
    records: Sequence[EpochRecord], path: str | Path, manifest_hash: str | None = None
) -> None:
    """One row per epoch; a manifest hash goes into a leading comment."""
    with open(path, "w", newline="") as fh:
        if manifest_hash is not None:
            fh.write(f"# manifest={manifest_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(TRAINING_COLUMNS)
        for record in records:
            writer.writerow([
                csv_cell(record.epoch),
                csv_cell(record.avg_revenue),
                csv_cell(record.rc_ratio),
                csv_cell(record.acceptance_rate),
                csv_cell(record.mean_loss),
            ])
