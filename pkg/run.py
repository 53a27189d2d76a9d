#!/usr/bin/env python3
"""
Start the toolkit's HTTP API under uvicorn.

Usage:
    python run.py                      # host/port from MG1_HOST / MG1_PORT
    python run.py --port 8080
    python run.py --reload             # development
    MG1_CACHE_MAXSIZE=256 python run.py --workers 4
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from app import __version__  # noqa: E402
from app.config import get_settings  # noqa: E402


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = argparse.ArgumentParser(description=f"{settings.app_name} API {__version__}")
    parser.add_argument("--host", default=settings.host, help=f"Bind address (default: {settings.host})")
    parser.add_argument("--port", type=int, default=settings.port, help=f"Port (default: {settings.port})")
    parser.add_argument("--reload", action="store_true", help="Auto-reload on code changes")
    parser.add_argument(
        "--workers",
        type=int,
        default=1,
        help="Worker processes; each keeps its own head cache (default: 1)",
    )
    parser.add_argument("--log-level", default=settings.log_level.lower(), help="uvicorn log level")
    return parser


def main():
    args = build_parser().parse_args()
    if args.reload and args.workers > 1:
        sys.exit("--reload cannot be combined with --workers > 1")

    print("=" * 60)
    print(f"MG1 toolkit {__version__} on http://{args.host}:{args.port}  (docs: /docs)")
    print("=" * 60)

    import uvicorn

    uvicorn.run(
        "app.main:app",
        host=args.host,
        port=args.port,
        workers=args.workers,
        reload=args.reload,
        log_level=args.log_level.lower(),
    )


if __name__ == "__main__":
    main()
