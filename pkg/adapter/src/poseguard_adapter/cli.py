"""poseguard-adapter: convert video into the poseguard keypoint stream.

Exit codes: 0 success, 1 usage error, 2 source/model/config error,
3 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .config import KNOWN_MODELS, MODEL_COCO, AdapterConfig
from .errors import AdapterError
from .extract import extract


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        print(f"{self.format_usage()}{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> _Parser:
    parser = _Parser(prog="poseguard-adapter", description=__doc__)
    parser.add_argument("--version", action="version", version=f"poseguard-adapter {__version__}")
    parser.add_argument("--source", required=True, help="video file, image directory, or camera index")
    parser.add_argument("--model", choices=KNOWN_MODELS, default=MODEL_COCO)
    parser.add_argument("--min-score", type=float, default=0.5, dest="min_score")
    parser.add_argument("--out", default="-", help="output path, '-' for stdout")
    parser.add_argument("--fps", type=float, default=30.0, help="timestamp rate for clockless sources")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--max-frames", type=int, default=None, dest="max_frames")
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = AdapterConfig(
            source=args.source,
            model=args.model,
            min_score=args.min_score,
            out=args.out,
            fps=args.fps,
            seed=args.seed,
            max_frames=args.max_frames,
        )
        sink = sys.stdout if config.out == "-" else open(config.out, "w", encoding="utf-8")
        try:
            count = extract(config, sink)
        finally:
            if sink is not sys.stdout:
                sink.close()
        print(f"emitted {count} frames", file=sys.stderr)
        return 0
    except AdapterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
