"""Command-line client for the embedding laboratory.

Thin wrapper over the handlers in vnelab.api: subcommands build the same
request models the HTTP service accepts and print where the outputs went.
Exit codes: 0 success, 2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .api import (
    CompareRequest,
    GenerateRequest,
    TestRequest,
    TrainRequest,
    compare_run,
    generate_run,
    test_run,
    train_run,
)
from .embedders import ENGINE_NAMES
from .sim import InvalidConfig, ScenarioConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3


def _fail(kind: str, code: int, exc) -> int:
    message = " ".join(str(exc).split()) or exc.__class__.__name__
    print(f"vnelab: error[{kind}]: {message}", file=sys.stderr)
    return code


def _ratio(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.4f}"


def _int_list(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise InvalidConfig(f"seeds: expected comma-separated integers, got {text!r}") from None
    if not values:
        raise InvalidConfig("seeds: need at least one")
    return values


def _cmd_generate(args) -> int:
    config = ScenarioConfig.from_file(args.config) if args.config else ScenarioConfig()
    response = generate_run(GenerateRequest(
        config=config, seed=args.seed, name=args.name, out_dir=args.out_dir,
    ))
    print(f"scenario: {response.scenario_path}")
    print(f"  substrate: {response.substrate_nodes} nodes, {response.substrate_links} links")
    print(f"  requests: {response.requests}")
    print(f"  manifest: {response.manifest_hash}")
    return EXIT_OK


def _cmd_train(args) -> int:
    response = train_run(TrainRequest(
        scenario=args.scenario, out_dir=args.out_dir, name=args.name,
        epochs=args.epochs, learning_rate=args.learning_rate,
        seed=args.seed, resume_from=args.resume_from,
    ))
    print(f"checkpoint: {response.checkpoint_path}")
    print(f"training series: {response.training_csv_path}")
    loss = "n/a" if response.final_mean_loss is None else f"{response.final_mean_loss:.4f}"
    print(f"  epochs: {response.epochs_completed}, final mean loss: {loss}")
    print(f"  manifest: {response.manifest_hash}")
    return EXIT_OK


def _cmd_test(args) -> int:
    response = test_run(TestRequest(
        scenario=args.scenario, engine=args.engine, checkpoint=args.checkpoint,
        window=args.window, out_dir=args.out_dir, name=args.name,
    ))
    summary = response.summary
    print(f"metrics: {response.metrics_csv_path}")
    print(f"  arrivals: {summary.arrivals}, acceptances: {summary.acceptances}")
    print(f"  acceptance rate: {_ratio(summary.acceptance_rate)}, "
          f"r/c: {_ratio(summary.rc_ratio)}, avg revenue: {_ratio(summary.avg_revenue)}")
    print(f"  manifest: {response.manifest_hash}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    engines = (
        [part.strip() for part in args.engines.split(",") if part.strip()]
        if args.engines else list(ENGINE_NAMES)
    )
    response = compare_run(CompareRequest(
        scenario=args.scenario, seeds=_int_list(args.seeds), engines=engines,
        checkpoint=args.checkpoint, window=args.window,
        out_dir=args.out_dir, name=args.name,
    ))
    print(f"series: {response.csv_path} ({response.rows} rows)")
    for item in response.summaries:
        print(f"  {item.engine} seed {item.seed}: acceptance {_ratio(item.acceptance_rate)}, "
              f"r/c {_ratio(item.rc_ratio)}, avg revenue {_ratio(item.avg_revenue)}")
    print(f"  manifest: {response.manifest_hash}")
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .api import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vnelab", description="Virtual network embedding laboratory."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a scenario file from a config")
    p.add_argument("--config", help="JSON config file (defaults apply when omitted)")
    p.add_argument("--seed", type=int, default=None, help="override the config's master seed")
    p.add_argument("--name", default="scenario", help="basename for the outputs")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(handler=_cmd_generate)

    p = sub.add_parser("train", help="train the node-mapping policy on a scenario")
    p.add_argument("--scenario", required=True, help="scenario file from 'generate'")
    p.add_argument("--epochs", type=int, default=None, help="override the config's epoch count")
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--seed", type=int, default=None,
                   help="training streams seed (default: scenario master seed)")
    p.add_argument("--resume-from", default=None, help="checkpoint to continue from")
    p.add_argument("--name", default="policy")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("test", help="replay the test stream with one engine")
    p.add_argument("--scenario", required=True)
    p.add_argument("--engine", required=True, choices=ENGINE_NAMES)
    p.add_argument("--checkpoint", default=None, help="policy checkpoint (required for qs-drl)")
    p.add_argument("--window", type=float, default=None, help="metrics window length")
    p.add_argument("--name", default=None, help="basename (default: test-<engine>)")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(handler=_cmd_test)

    p = sub.add_parser("compare", help="run engines across seeds into one series")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seeds", required=True, help="comma-separated seeds, e.g. 1,2,3")
    p.add_argument("--engines", default=None,
                   help=f"comma-separated subset of: {', '.join(ENGINE_NAMES)}")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--window", type=float, default=None)
    p.add_argument("--name", default="compare")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(handler=_cmd_compare)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(handler=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except OSError as exc:
        return _fail("io", EXIT_IO, exc)
    except ValueError as exc:
        return _fail("config", EXIT_CONFIG, exc)


if __name__ == "__main__":
    sys.exit(main())
