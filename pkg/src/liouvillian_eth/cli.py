"""Command line entry point: ``liouvillian-eth {run,export,validate}``.

Exit codes: 0 success, 1 numerical failure, 2 invalid configuration or
missing artifacts.
"""

import argparse
import json
import logging
import sys

from .config import ConfigError, load_config
from .plotdata import FIGURES, MissingArtifact, export_plotdata
from .runner import RunFailed, run

log = logging.getLogger("liouvillian_eth")


def _parser():
    p = argparse.ArgumentParser(prog="liouvillian-eth", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="execute an experiment config")
    r.add_argument("config")
    r.add_argument("--seed", type=int, default=None, help="override master_seed")
    r.add_argument("--workers", type=int, default=None, help="worker processes (default: CPU count)")
    r.add_argument("--output", default=None, help="override output_dir")
    r.add_argument("--keep-cache", action="store_true", help="keep cached eigenvectors")

    e = sub.add_parser("export", help="write plot data and SVG for one figure")
    e.add_argument("run_dir")
    e.add_argument("figure_id", choices=sorted(FIGURES))
    e.add_argument("--output", default=None, help="directory for the files (default: <run_dir>/figures)")

    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "validate":
        try:
            cfg = load_config(args.config)
        except (ConfigError, OSError) as exc:
            print(f"invalid config: {exc}", file=sys.stderr)
            return 2
        print(f"ok: {cfg.model}, sizes {cfg.sizes}, analyses {[a.kind for a in cfg.analysis]}")
        return 0
    if args.command == "run":
        try:
            cfg = load_config(args.config)
        except (ConfigError, OSError) as exc:
            print(f"invalid config: {exc}", file=sys.stderr)
            return 2
        if args.workers is not None and args.workers < 1:
            print("invalid config: --workers must be >= 1", file=sys.stderr)
            return 2
        try:
            manifest = run(cfg, seed=args.seed, workers=args.workers, output=args.output,
                           keep_cache=args.keep_cache)
        except RunFailed as exc:
            print(f"run failed: {exc}", file=sys.stderr)
            return 1
        print(json.dumps({k: manifest[k] for k in ("status", "wall_time")}, indent=2))
        return 0
    try:
        paths = export_plotdata(args.run_dir, args.figure_id, args.output)
    except MissingArtifact as exc:
        print(f"missing artifacts: {exc}", file=sys.stderr)
        return 2
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
