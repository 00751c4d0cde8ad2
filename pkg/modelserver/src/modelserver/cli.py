"""Command line launcher: ``modelserver --host 0.0.0.0 --port 8008``."""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .app import serve
from .backends import BackendLoadError, ModelConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modelserver",
        description="Serve captioning, annotation, question generation and QA endpoints",
    )
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8008)
    parser.add_argument("--config", help="JSON file mapping endpoint roles to backend ids")
    parser.add_argument("--version", action="version", version=f"modelserver {__version__}")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = ModelConfig.from_file(args.config) if args.config else ModelConfig()
        serve(host=args.host, port=args.port, config=config)
    except BackendLoadError as exc:
        print(f"startup error: {exc}", file=sys.stderr)
        return 1
    return 0


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
