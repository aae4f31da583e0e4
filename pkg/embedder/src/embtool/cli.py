"""embtool: embed segments, serve /embed, generate fixtures."""

from __future__ import annotations

import argparse
import sys

from .encoders import EncoderError
from .fixtures import FIXTURE_NAMES, make_fixture
from .jobs import EmbedJob, embed_segments, write_query_demb
from .server import serve_forever


def cmd_embed(args) -> int:
    if (args.segments is None) == (args.text is None):
        print("error: exactly one of --segments / --text is required",
              file=sys.stderr)
        return 2
    if args.text is not None:
        write_query_demb(args.text, args.model, args.out, device=args.device,
                         normalize=not args.no_normalize)
        print(f"wrote 1 query row to {args.out}")
        return 0
    job = EmbedJob(segments_path=args.segments, output_path=args.out,
                   model_id=args.model, batch_size=args.batch,
                   device=args.device, normalize=not args.no_normalize)
    rows = embed_segments(job)
    print(f"wrote {rows} rows to {args.out}")
    return 0


def cmd_serve(args) -> int:
    serve_forever(args.model, host=args.host, port=args.port,
                  normalize=not args.no_normalize, device=args.device)
    return 0


def cmd_fixture(args) -> int:
    kwargs = {}
    if args.name == "redundant-needle":
        kwargs = {"n_docs": args.docs, "redundancy": args.redundancy,
                  "seed": args.seed, "dim": args.dim}
    elif args.name == "tiny-qa":
        kwargs = {"dim": args.dim}
    meta = make_fixture(args.name, args.out, **kwargs)
    print(f"fixture {meta['name']} written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="embtool")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="embed a segments file or a single text")
    p.add_argument("--segments", default=None, help="segments JSONL file")
    p.add_argument("--text", default=None, help="single query text")
    p.add_argument("--out", required=True, help="output DEMB path")
    p.add_argument("--model", default="pseudo",
                   help="'pseudo[:dim]' or a sentence-transformers id")
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--device", default=None)
    p.add_argument("--no-normalize", action="store_true")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("serve", help="HTTP POST /embed endpoint")
    p.add_argument("--model", default="pseudo")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--device", default=None)
    p.add_argument("--no-normalize", action="store_true")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("fixture", help="generate a desk-scale QA fixture")
    p.add_argument("--name", required=True, choices=FIXTURE_NAMES)
    p.add_argument("--out", required=True)
    p.add_argument("--docs", type=int, default=200)
    p.add_argument("--redundancy", type=int, default=10)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--dim", type=int, default=256)
    p.set_defaults(func=cmd_fixture)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (EncoderError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
