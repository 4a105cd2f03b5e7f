"""Sidecar command line: pretrain the base model, serve the protocol."""

from __future__ import annotations

import argparse
import os
import sys

from .model import save_model
from .training import pretrain


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="imprec-sidecar")
    sub = parser.add_subparsers(dest="command", required=True)

    pre = sub.add_parser("pretrain", help="train the base model on the synthetic grammar corpus")
    pre.add_argument("--model-dir", required=True)
    pre.add_argument("--steps", type=int, default=1500)
    pre.add_argument("--lines", type=int, default=40_000)
    pre.add_argument("--seed", type=int, default=0)
    pre.add_argument("--batch-size", type=int, default=32)
    pre.add_argument("--lr", type=float, default=3e-4)

    srv = sub.add_parser("serve", help="serve the wire protocol over HTTP")
    srv.add_argument("--model-dir", required=True)
    srv.add_argument("--port", type=int, default=8151)
    srv.add_argument("--host", default="127.0.0.1")

    args = parser.parse_args(argv)
    if args.command == "pretrain":
        os.makedirs(args.model_dir, exist_ok=True)
        model = pretrain(
            n_lines=args.lines,
            steps=args.steps,
            batch_size=args.batch_size,
            lr=args.lr,
            seed=args.seed,
            log_every=100,
        )
        path = os.path.join(args.model_dir, "base.pt")
        save_model(model, path)
        print(f"wrote {path}")
        return 0
    if args.command == "serve":
        import uvicorn

        from .server import create_app

        uvicorn.run(create_app(args.model_dir), host=args.host, port=args.port, log_level="warning")
        return 0
    return 1


if __name__ == "__main__":
    sys.exit(main())
