"""Single-layer softmax policy over candidate substrate nodes."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .features import FEATURE_COUNT, FeatureMatrix

# Fresh parameters are drawn uniformly from [-INIT_SPAN, INIT_SPAN].
INIT_SPAN = 0.1

CHECKPOINT_FORMAT = "vnelab-policy/1"


class NoFeasibleNode(Exception):
    """Every candidate row is masked out."""


class InfeasibleLabel(Exception):
    """The labeled row carries zero probability."""


class EmptyAccumulator(Exception):
    """An update was requested before any gradient was accumulated."""


@dataclass
class ActionDistribution:
    """Forward result: raw scores and masked softmax probabilities."""

    scores: np.ndarray
    probabilities: np.ndarray
    mask: np.ndarray


class PolicyNetwork:
    """Affine scoring of feature rows followed by a masked softmax.

    Gradient accumulators let several node decisions of one request fold
    into a single reward-scaled update.
    """

    def __init__(self, kernel, bias: float):
        self.kernel = np.array(kernel, dtype=float)
        if self.kernel.shape != (FEATURE_COUNT,):
            raise ValueError(f"kernel must have {FEATURE_COUNT} weights")
        self.bias = float(bias)
        self.grad_kernel = np.zeros(FEATURE_COUNT)
        self.grad_bias = 0.0
        self.decision_count = 0

    @classmethod
    def initialize(cls, rng: np.random.Generator) -> "PolicyNetwork":
        params = rng.uniform(-INIT_SPAN, INIT_SPAN, size=FEATURE_COUNT + 1)
        return cls(params[:FEATURE_COUNT], params[FEATURE_COUNT])


def forward(policy: PolicyNetwork, matrix: FeatureMatrix, mask) -> ActionDistribution:
    """Score every row and softmax over the feasible ones.

    The mask is applied before the softmax, so infeasible rows never
    receive probability. The feasible maximum is subtracted before
    exponentiation, keeping large scores from overflowing.

    Raises NoFeasibleNode when the mask admits nothing.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (matrix.values.shape[0],):
        raise ValueError("mask length must match the number of feature rows")
    if not mask.any():
        raise NoFeasibleNode("no feasible candidate node")
    scores = matrix.values @ policy.kernel + policy.bias
    feasible = np.exp(scores[mask] - scores[mask].max())
    probabilities = np.zeros_like(scores)
    probabilities[mask] = feasible / feasible.sum()
    return ActionDistribution(scores=scores, probabilities=probabilities, mask=mask)


def cross_entropy_loss(dist: ActionDistribution, label_row: int) -> float:
    """Negative log probability of the labeled row.

    Raises InfeasibleLabel when that row was masked out.
    """
    p = dist.probabilities[label_row]
    if p <= 0.0:
        raise InfeasibleLabel(f"row {label_row} has zero probability")
    return float(-np.log(p))


def accumulate_gradient(
    policy: PolicyNetwork,
    matrix: FeatureMatrix,
    mask,
    label_row: int,
    dist: ActionDistribution | None = None,
) -> None:
    """Add one decision's cross-entropy gradient to the accumulators.

    In score space the gradient of -log p[label] is p - onehot(label),
    zero on masked rows; parameters receive its pullback through the
    affine map. Pass ``dist`` to reuse an already-computed forward pass.
    """
    if dist is None:
        dist = forward(policy, matrix, mask)
    if dist.probabilities[label_row] <= 0.0:
        raise InfeasibleLabel(f"row {label_row} has zero probability")
    d_scores = dist.probabilities.copy()
    d_scores[label_row] -= 1.0
    policy.grad_kernel += matrix.values.T @ d_scores
    policy.grad_bias += float(d_scores.sum())
    policy.decision_count += 1


def apply_reward_update(policy: PolicyNetwork, reward: float, learning_rate: float) -> None:
    """Descend the reward-scaled accumulated gradient, then clear.

    Raises EmptyAccumulator when nothing was accumulated.
    """
    if policy.decision_count == 0:
        raise EmptyAccumulator("no decisions accumulated")
    policy.kernel -= learning_rate * reward * policy.grad_kernel
    policy.bias -= learning_rate * reward * policy.grad_bias
    clear_gradients(policy)


def clear_gradients(policy: PolicyNetwork) -> None:
    """Zero the accumulators; parameters stay untouched."""
    policy.grad_kernel = np.zeros(FEATURE_COUNT)
    policy.grad_bias = 0.0
    policy.decision_count = 0


def sample_action(dist: ActionDistribution, rng: np.random.Generator) -> int:
    """Draw a row index according to the distribution."""
    p = dist.probabilities
    return int(rng.choice(len(p), p=p / p.sum()))


def argmax_action(dist: ActionDistribution) -> int:
    """Most probable row; ties go to the lowest index."""
    return int(np.argmax(dist.probabilities))


def save_policy(
    policy: PolicyNetwork,
    path: str | Path,
    *,
    seed: int | None = None,
    epochs: int = 0,
    manifest_hash: str | None = None,
) -> None:
    """Write a JSON checkpoint carrying everything needed to resume."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "kernel": policy.kernel.tolist(),
        "bias": policy.bias,
        "seed": seed,
        "epochs": epochs,
    }
    if manifest_hash is not None:
        payload["manifest"] = manifest_hash
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_policy(path: str | Path) -> tuple[PolicyNetwork, dict]:
    """Read a checkpoint back; returns the policy and the metadata dict."""
    data = json.loads(Path(path).read_text())
    if data.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a policy checkpoint: {path}")
    return PolicyNetwork(data["kernel"], data["bias"]), data
