"""model-host command line: train | serve | fetch."""
from __future__ import annotations

import argparse
import json
import sys

from .fetch import FETCHERS
from .hosting import KINDS, HostError, serve, train_and_save


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="model-host",
                                 description="Train and serve regression models "
                                             "over the line-delimited JSON protocol")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a regressor and write model + heldout split")
    p.add_argument("dataset", help="CSV with a named target column")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--model-out", required=True)
    p.add_argument("--heldout-out", required=True)
    p.add_argument("--holdout-frac", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--target", default="y")

    p = sub.add_parser("serve", help="answer protocol requests on stdin/stdout")
    p.add_argument("model", help="model file written by train")

    p = sub.add_parser("fetch", help="download a public benchmark as CSV")
    p.add_argument("name", choices=sorted(FETCHERS))
    p.add_argument("--out", required=True)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            meta = train_and_save(args.dataset, args.kind, args.model_out,
                                  args.heldout_out, args.holdout_frac,
                                  args.seed, args.target)
            print(json.dumps(meta, indent=2))
            return 0
        if args.command == "serve":
            return serve(args.model)
        if args.command == "fetch":
            n = FETCHERS[args.name](args.out)
            print(f"wrote {n} rows to {args.out}")
            return 0
        return 2
    except HostError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
