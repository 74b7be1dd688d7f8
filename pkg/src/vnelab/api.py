"""Service surface: pydantic request/response models and the run handlers.

The HTTP routes are a thin layer over the handler functions; the CLI calls
the same handlers directly, so both surfaces behave identically.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .embedders import ENGINE_NAMES, UnknownEngine, make_engine
from .manifest import build_manifest, file_fingerprint, write_manifest
from .metrics import MetricsLedger, write_compare_csv, write_window_csv
from .policy import load_policy, save_policy
from .scenario import build_scenario, read_scenario, write_scenario
from .sim import (
    InvalidConfig,
    ScenarioConfig,
    run_test,
    run_training,
    split_requests,
    write_training_csv,
)


class GenerateRequest(BaseModel):
    config: ScenarioConfig = Field(default_factory=ScenarioConfig)
    seed: int | None = None
    name: str = "scenario"
    out_dir: str = "."


class GenerateResponse(BaseModel):
    scenario_path: str
    manifest_path: str
    manifest_hash: str
    substrate_nodes: int
    substrate_links: int
    requests: int


class TrainRequest(BaseModel):
    scenario: str
    out_dir: str = "."
    name: str = "policy"
    epochs: int | None = None
    learning_rate: float | None = None
    seed: int | None = None
    resume_from: str | None = None


class TrainResponse(BaseModel):
    checkpoint_path: str
    training_csv_path: str
    manifest_path: str
    manifest_hash: str
    epochs_completed: int
    final_mean_loss: float | None


class RunSummary(BaseModel):
    """Cumulative metrics at the end of one test run."""

    time: float
    cum_revenue: int
    cum_cost: int
    avg_revenue: float | None
    rc_ratio: float | None
    acceptance_rate: float | None
    arrivals: int
    acceptances: int


class TestRequest(BaseModel):
    scenario: str
    engine: str
    checkpoint: str | None = None
    window: float | None = None
    out_dir: str = "."
    name: str | None = None


class TestResponse(BaseModel):
    metrics_csv_path: str
    manifest_path: str
    manifest_hash: str
    summary: RunSummary


class CompareRequest(BaseModel):
    scenario: str
    seeds: list[int]
    engines: list[str] = Field(default_factory=lambda: list(ENGINE_NAMES))
    checkpoint: str | None = None
    window: float | None = None
    out_dir: str = "."
    name: str = "compare"


class EngineSeedSummary(BaseModel):
    engine: str
    seed: int
    acceptance_rate: float | None
    rc_ratio: float | None
    avg_revenue: float | None


class CompareResponse(BaseModel):
    csv_path: str
    manifest_path: str
    manifest_hash: str
    rows: int
    summaries: list[EngineSeedSummary]


def _prepare_out_dir(value: str) -> Path:
    out_dir = Path(value)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _summary(ledger: MetricsLedger) -> RunSummary:
    time = ledger.windows[-1].time if ledger.windows else ledger.horizon
    return RunSummary(
        time=time,
        cum_revenue=ledger.total_revenue,
        cum_cost=ledger.total_cost,
        avg_revenue=ledger.average_revenue(time) if time > 0 else None,
        rc_ratio=ledger.rc_ratio(),
        acceptance_rate=ledger.acceptance_rate(),
        arrivals=ledger.arrivals,
        acceptances=ledger.acceptances,
    )


def generate_run(request: GenerateRequest) -> GenerateResponse:
    """Build a scenario from the config and write it next to its manifest."""
    config = request.config
    if request.seed is not None:
        config = ScenarioConfig.from_dict(
            {**config.model_dump(), "master_seed": request.seed}
        )
    scenario = build_scenario(config)
    out_dir = _prepare_out_dir(request.out_dir)
    scenario_path = out_dir / f"{request.name}.json"
    manifest = build_manifest(
        "generate",
        config=config.model_dump(mode="json"),
        outputs={"scenario": scenario_path.name},
    )
    digest = write_manifest(manifest, out_dir / f"{request.name}.manifest.json")
    write_scenario(scenario, scenario_path, manifest_hash=digest)
    return GenerateResponse(
        scenario_path=str(scenario_path),
        manifest_path=str(out_dir / f"{request.name}.manifest.json"),
        manifest_hash=digest,
        substrate_nodes=len(scenario.substrate.nodes),
        substrate_links=len(scenario.substrate.links),
        requests=len(scenario.requests),
    )


def train_run(request: TrainRequest) -> TrainResponse:
    """Train the policy on a scenario's training slice and write a checkpoint."""
    scenario = read_scenario(request.scenario)
    config = scenario.config
    overrides = {}
    if request.epochs is not None:
        overrides["epochs"] = request.epochs
    if request.learning_rate is not None:
        overrides["learning_rate"] = request.learning_rate
    if overrides:
        config = ScenarioConfig.from_dict({**config.model_dump(), **overrides})
    seed = request.seed
    policy = None
    start_epoch = 0
    if request.resume_from:
        policy, meta = load_policy(request.resume_from)
        start_epoch = int(meta.get("epochs") or 0)
        if seed is None:
            seed = meta.get("seed")
    if seed is None:
        seed = config.master_seed
    training, _ = split_requests(config, scenario.requests)
    result = run_training(
        config, scenario.substrate, training,
        policy=policy, seed=seed, start_epoch=start_epoch,
    )
    out_dir = _prepare_out_dir(request.out_dir)
    checkpoint_path = out_dir / f"{request.name}.json"
    csv_path = out_dir / f"{request.name}-training.csv"
    manifest = build_manifest(
        "train",
        config=config.model_dump(mode="json"),
        scenario_sha256=file_fingerprint(request.scenario),
        seed=seed,
        resume_from_sha256=(
            file_fingerprint(request.resume_from) if request.resume_from else None
        ),
        outputs={"checkpoint": checkpoint_path.name, "training": csv_path.name},
    )
    digest = write_manifest(manifest, out_dir / f"{request.name}.manifest.json")
    epochs_completed = max(config.epochs, start_epoch)
    save_policy(
        result.policy, checkpoint_path,
        seed=seed, epochs=epochs_completed, manifest_hash=digest,
    )
    write_training_csv(result.epochs, csv_path, digest)
    final_loss = result.epochs[-1].mean_loss if result.epochs else None
    return TrainResponse(
        checkpoint_path=str(checkpoint_path),
        training_csv_path=str(csv_path),
        manifest_path=str(out_dir / f"{request.name}.manifest.json"),
        manifest_hash=digest,
        epochs_completed=epochs_completed,
        final_mean_loss=final_loss,
    )


def test_run(request: TestRequest) -> TestResponse:
    """Replay a scenario's test slice with one engine and write the series."""
    scenario = read_scenario(request.scenario)
    config = scenario.config
    policy = None
    if request.checkpoint:
        policy, _ = load_policy(request.checkpoint)
    engine = make_engine(request.engine, policy=policy)
    _, test_requests = split_requests(config, scenario.requests)
    window = request.window if request.window is not None else config.window
    if window <= 0:
        raise InvalidConfig("window: must be positive")
    name = request.name or f"test-{request.engine}"
    out_dir = _prepare_out_dir(request.out_dir)
    csv_path = out_dir / f"{name}.csv"
    manifest = build_manifest(
        "test",
        config=config.model_dump(mode="json"),
        scenario_sha256=file_fingerprint(request.scenario),
        engine=request.engine,
        checkpoint_sha256=(
            file_fingerprint(request.checkpoint) if request.checkpoint else None
        ),
        window=window,
        outputs={"metrics": csv_path.name},
    )
    digest = write_manifest(manifest, out_dir / f"{name}.manifest.json")
    ledger = run_test(config, scenario.substrate, test_requests, engine, window=window)
    write_window_csv(ledger.windows, csv_path, digest)
    return TestResponse(
        metrics_csv_path=str(csv_path),
        manifest_path=str(out_dir / f"{name}.manifest.json"),
        manifest_hash=digest,
        summary=_summary(ledger),
    )


def compare_run(request: CompareRequest) -> CompareResponse:
    """Run several engines over per-seed regenerated instances of one scenario.

    Each seed regenerates substrate and request stream from the scenario's
    config with that master seed, so every engine faces the same set of
    instances; a qs-drl checkpoint is shared across all of them.
    """
    scenario = read_scenario(request.scenario)
    if not request.seeds:
        raise InvalidConfig("seeds: need at least one")
    policy = None
    if request.checkpoint:
        policy, _ = load_policy(request.checkpoint)
    engines = {name: make_engine(name, policy=policy) for name in request.engines}
    window = request.window if request.window is not None else scenario.config.window
    if window <= 0:
        raise InvalidConfig("window: must be positive")
    out_dir = _prepare_out_dir(request.out_dir)
    csv_path = out_dir / f"{request.name}.csv"
    manifest = build_manifest(
        "compare",
        config=scenario.config.model_dump(mode="json"),
        scenario_sha256=file_fingerprint(request.scenario),
        engines=list(request.engines),
        seeds=list(request.seeds),
        checkpoint_sha256=(
            file_fingerprint(request.checkpoint) if request.checkpoint else None
        ),
        window=window,
        outputs={"metrics": csv_path.name},
    )
    digest = write_manifest(manifest, out_dir / f"{request.name}.manifest.json")
    instances = {}
    for seed in request.seeds:
        seed_config = ScenarioConfig.from_dict(
            {**scenario.config.model_dump(), "master_seed": seed}
        )
        instance = build_scenario(seed_config)
        _, test_requests = split_requests(seed_config, instance.requests)
        instances[seed] = (seed_config, instance.substrate, test_requests)
    rows = []
    summaries = []
    for name in request.engines:
        for seed in request.seeds:
            seed_config, substrate, test_requests = instances[seed]
            ledger = run_test(seed_config, substrate, test_requests, engines[name], window=window)
            rows.extend((name, seed, record) for record in ledger.windows)
            summaries.append(EngineSeedSummary(
                engine=name,
                seed=seed,
                acceptance_rate=ledger.acceptance_rate(),
                rc_ratio=ledger.rc_ratio(),
                avg_revenue=ledger.average_revenue(),
            ))
    write_compare_csv(rows, csv_path, digest)
    return CompareResponse(
        csv_path=str(csv_path),
        manifest_path=str(out_dir / f"{request.name}.manifest.json"),
        manifest_hash=digest,
        rows=len(rows),
        summaries=summaries,
    )


app = FastAPI(title="vnelab", version=__version__)


def _guarded(handler, request):
    try:
        return handler(request)
    except FileNotFoundError as exc:
        raise HTTPException(status_code=404, detail=str(exc)) from exc
    except (InvalidConfig, UnknownEngine) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.get("/engines")
def engines():
    return {"engines": list(ENGINE_NAMES)}


@app.post("/generate", response_model=GenerateResponse)
def generate_endpoint(request: GenerateRequest) -> GenerateResponse:
    return _guarded(generate_run, request)


@app.post("/train", response_model=TrainResponse)
def train_endpoint(request: TrainRequest) -> TrainResponse:
    return _guarded(train_run, request)


@app.post("/test", response_model=TestResponse)
def test_endpoint(request: TestRequest) -> TestResponse:
    return _guarded(test_run, request)


@app.post("/compare", response_model=CompareResponse)
def compare_endpoint(request: CompareRequest) -> CompareResponse:
    return _guarded(compare_run, request)
