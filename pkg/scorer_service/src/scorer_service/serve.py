"""Command-line entry point: load config, build the app, run uvicorn."""
from __future__ import annotations

import argparse
import sys

import uvicorn

from .app import create_app
from .config import ConfigError, load_service_config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scorer-service",
        description="Perplexity-ratio text scoring over HTTP.")
    parser.add_argument("--config", help="path to a JSON config file")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int,
                        help="override the configured port")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_service_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    port = args.port if args.port is not None else config.port
    uvicorn.run(create_app(config), host=args.host, port=port,
                log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
