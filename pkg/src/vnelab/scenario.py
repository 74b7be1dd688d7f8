"""Scenario files: a config plus the substrate and request stream it generated."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .network import (
    SubstrateNetwork,
    VirtualNetworkRequest,
    substrate_from_dict,
    substrate_to_dict,
    vnr_from_dict,
    vnr_to_dict,
)
from .sim import (
    STREAM_ARRIVAL,
    STREAM_TOPOLOGY,
    STREAM_VNR,
    InvalidConfig,
    ScenarioConfig,
    generate_substrate,
    generate_vnrs,
    stream_rng,
)

SCENARIO_FORMAT = "vnelab-scenario/1"


@dataclass
class Scenario:
    """A reproducible experiment instance.

    The substrate is stored at full capacity; runs always work on copies.
    """

    config: ScenarioConfig
    substrate: SubstrateNetwork
    requests: list[VirtualNetworkRequest]


def build_scenario(config: ScenarioConfig) -> Scenario:
    """Generate substrate and requests from the config's own seed streams."""
    substrate = generate_substrate(config, stream_rng(config.master_seed, STREAM_TOPOLOGY))
    requests = generate_vnrs(
        config,
        stream_rng(config.master_seed, STREAM_VNR),
        stream_rng(config.master_seed, STREAM_ARRIVAL),
    )
    return Scenario(config, substrate, requests)


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "format": SCENARIO_FORMAT,
        "config": scenario.config.model_dump(mode="json"),
        "substrate": substrate_to_dict(scenario.substrate),
        "requests": [vnr_to_dict(vnr) for vnr in scenario.requests],
    }


def scenario_from_dict(data: dict) -> Scenario:
    if not isinstance(data, dict) or data.get("format") != SCENARIO_FORMAT:
        raise InvalidConfig(f"not a scenario file (expected format {SCENARIO_FORMAT!r})")
    try:
        config = ScenarioConfig.from_dict(data["config"])
        substrate = substrate_from_dict(data["substrate"])
        requests = [vnr_from_dict(item) for item in data["requests"]]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidConfig):
            raise
        raise InvalidConfig(f"malformed scenario: {exc}") from exc
    return Scenario(config, substrate, requests)


def write_scenario(scenario: Scenario, path: str | Path, manifest_hash: str | None = None) -> None:
    payload = scenario_to_dict(scenario)
    if manifest_hash is not None:
        payload["manifest"] = manifest_hash
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def read_scenario(path: str | Path) -> Scenario:
    """Load a scenario file.

    Raises InvalidConfig for malformed content; missing files surface as
    the usual OSError.
    """
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"{path}: {exc}") from exc
    return scenario_from_dict(data)
