"""Command line: serve the predictor or fit a model on a labeled corpus."""

import argparse
import dataclasses
import json
import sys

from .config import ServiceConfig
from .errors import ServiceError
from .model import train
from .server import PredictorServer


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="predictor-service",
        description="boundary predictor microservice",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="serve /v1/label over HTTP")
    serve.add_argument("--mode", choices=("lexicon", "learned"),
                       default="lexicon")
    serve.add_argument("--lexicon", default=None,
                       help="JSON array of lexicon entries (default: built-in)")
    serve.add_argument("--model", default=None,
                       help="model artifact for learned mode")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=0,
                       help="0 picks an ephemeral port")

    fit = sub.add_parser("train", help="fit a classifier on a corpus")
    fit.add_argument("--corpus", required=True)
    fit.add_argument("--out", required=True)
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--holdout", type=float, default=0.1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            config = ServiceConfig(mode=args.mode, lexicon_path=args.lexicon,
                                   model_path=args.model, host=args.host,
                                   port=args.port)
            server = PredictorServer(config).start()
            print(f"listening on {server.base_url}", flush=True)
            try:
                server.wait()
            except KeyboardInterrupt:
                pass
            finally:
                server.close()
        else:
            report = train(args.corpus, args.out, seed=args.seed,
                           holdout_fraction=args.holdout)
            print(json.dumps(dataclasses.asdict(report), sort_keys=True),
                  flush=True)
    except ServiceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
