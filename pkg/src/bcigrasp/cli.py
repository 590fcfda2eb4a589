"""Command-line entry points: batch runs, summaries, training, serving."""

from __future__ import annotations

import argparse
import sys

from .config import SimConfig
from .harness import (
    format_summary,
    load_records,
    run_experiment,
    save_records,
    summarize,
    summary_to_json,
)
from .intent import INTENT_KINDS, PromptFollowIntent
from .scene import PROTOCOLS, SET_LOCATIONS
from .service import TelemetryServer
from .trainer import TrainerSimulator, save_session


def _load_config(path: str | None) -> SimConfig:
    return SimConfig.load(path) if path else SimConfig()


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    done = [0]

    def progress(record):
        done[0] += 1
        if done[0] % 25 == 0 or done[0] == args.trials:
            print(f"  {done[0]}/{args.trials} trials", file=sys.stderr)

    records = run_experiment(
        cfg, args.protocol, args.trials, args.intent, args.seed,
        separability=args.separability, drift=args.drift,
        progress=progress if not args.quiet else None,
    )
    if args.out:
        save_records(args.out, records)
        print(f"wrote {len(records)} records to {args.out}", file=sys.stderr)
    print(format_summary(summarize(records)))
    return 0


def cmd_summarize(args) -> int:
    records = load_records(getattr(args, "in"))
    summary = summarize(records)
    if args.json:
        print(summary_to_json(summary))
    else:
        print(format_summary(summary))
    return 0


def cmd_trainer(args) -> int:
    cfg = _load_config(args.config)
    sim = TrainerSimulator(cfg, args.seed, PromptFollowIntent(),
                           separability=args.separability)
    log = sim.run(args.duration)
    if args.out:
        save_session(args.out, log)
        print(f"wrote session ({len(log.prompts)} prompts,"
              f" {len(log.windows)} windows) to {args.out}", file=sys.stderr)
    print(f"prompts: {len(log.prompts)}")
    print(f"windows: {len(log.windows)}")
    print(f"tracking error: {log.total_tracking_error():.2f} m*s")
    return 0


def cmd_serve(args) -> int:
    cfg = _load_config(args.config)
    host, _, port = args.addr.rpartition(":")
    server = TelemetryServer(cfg, host or "127.0.0.1", int(port),
                             protocol=args.protocol, seed=args.seed,
                             speed=args.speed, separability=args.separability)
    print(f"ndjson on {server.host}:{server.port},"
          f" websocket on {server.host}:{server.ws_port}", file=sys.stderr)
    server.serve_forever()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bcigrasp",
        description="Headless semi-autonomous grasping simulator",
    )
    parser.add_argument("--config", help="JSON configuration file")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a batch of seeded trials")
    run_p.add_argument("--protocol", choices=PROTOCOLS, default=SET_LOCATIONS)
    run_p.add_argument("--trials", type=int, default=50)
    run_p.add_argument("--intent", choices=INTENT_KINDS, default="random")
    run_p.add_argument("--separability", type=float, default=1.0)
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--drift", action="store_true", default=None,
                       help="enable sphere drift")
    run_p.add_argument("--out", help="write JSON-lines trial records here")
    run_p.add_argument("--quiet", action="store_true")
    run_p.set_defaults(func=cmd_run)

    sum_p = sub.add_parser("summarize", help="summarize recorded trials")
    sum_p.add_argument("--in", required=True, help="JSON-lines records file")
    sum_p.add_argument("--json", action="store_true", help="JSON output")
    sum_p.set_defaults(func=cmd_summarize)

    train_p = sub.add_parser("trainer", help="run a prompted training session")
    train_p.add_argument("--duration", type=float, default=240.0)
    train_p.add_argument("--separability", type=float, default=1.0)
    train_p.add_argument("--seed", type=int, default=0)
    train_p.add_argument("--out", help="write the session log here")
    train_p.set_defaults(func=cmd_trainer)

    serve_p = sub.add_parser("serve", help="serve live telemetry")
    serve_p.add_argument("--addr", default="127.0.0.1:8765")
    serve_p.add_argument("--protocol", choices=PROTOCOLS, default=SET_LOCATIONS)
    serve_p.add_argument("--seed", type=int, default=0)
    serve_p.add_argument("--speed", type=float, default=1.0,
                         help="real-time factor; 0 runs unpaced")
    serve_p.add_argument("--separability", type=float, default=1.0)
    serve_p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
