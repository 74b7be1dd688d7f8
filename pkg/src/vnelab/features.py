"""Substrate node feature extraction for the node-mapping policy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import LEVELS, SubstrateNetwork

FEATURE_COUNT = 4
TOP_LEVEL = float(max(LEVELS))


@dataclass
class FeatureMatrix:
    """One feature row per substrate node, ordered by ascending node id.

    Columns: remaining CPU, summed adjacent remaining bandwidth, delay
    level, security level.
    """

    values: np.ndarray
    node_ids: list[int]

    def row_of(self, node_id: int) -> int:
        return self.node_ids.index(node_id)


def sum_adjacent_bw(net: SubstrateNetwork, node_id: int) -> int:
    """Remaining bandwidth summed over every link touching the node."""
    return sum(net.link(node_id, other).bw_remaining for other in net.neighbors(node_id))


def extract_features(net: SubstrateNetwork, normalize: bool = True) -> FeatureMatrix:
    """Build the feature matrix from live substrate state.

    CPU and bandwidth columns are scaled by their current maximum across
    nodes (a zero maximum leaves the column at zero), level columns by the
    top level. Set ``normalize=False`` to keep raw values.
    """
    node_ids = sorted(net.nodes)
    values = np.empty((len(node_ids), FEATURE_COUNT), dtype=float)
    for row, nid in enumerate(node_ids):
        node = net.nodes[nid]
        values[row, 0] = node.cpu_remaining
        values[row, 1] = sum_adjacent_bw(net, nid)
        values[row, 2] = node.delay_level
        values[row, 3] = node.security_level
    if normalize and node_ids:
        for column in (0, 1):
            top = values[:, column].max()
            if top > 0:
                values[:, column] /= top
        values[:, 2] /= TOP_LEVEL
        values[:, 3] /= TOP_LEVEL
    return FeatureMatrix(values, node_ids)
