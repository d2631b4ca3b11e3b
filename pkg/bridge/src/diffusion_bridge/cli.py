"""Entry point: pick a backend, bind the address, serve until interrupted."""

from __future__ import annotations

import argparse
import sys

from .backends import BackendUnavailable, EchoBackend, load_model_backend
from .server import BridgeServer


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffusion-bridge",
        description="Serve a text-to-video noise critic over a TCP socket.")
    parser.add_argument("--listen", default="127.0.0.1:8787",
                        metavar="HOST:PORT", help="bind address")
    mode = parser.add_mutually_exclusive_group(required=True)
    mode.add_argument("--model", metavar="ID_OR_PATH",
                      help="serve a local diffusion model")
    mode.add_argument("--echo", action="store_true",
                      help="serve zero noise predictions (no model)")
    return parser


def split_address(listen: str):
    host, _, port = listen.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"listen address {listen!r} is not host:port")
    return host, int(port)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        host, port = split_address(args.listen)
        backend = EchoBackend() if args.echo else load_model_backend(
            args.model)
        server = BridgeServer(backend, host, port)
    except (BackendUnavailable, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"listening on {server.address}", file=sys.stderr, flush=True)
    server.serve_forever()
    return 0


if __name__ == "__main__":
    sys.exit(main())
