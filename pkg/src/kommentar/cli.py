"""Operator surface: per-stage subcommands over one declarative config file.

Exit codes: 0 success, 2 configuration, 3 stage dependency, 4 gateway,
5 fabrication, 6 validation.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigurationError, apply_overrides, load_config
from .corpus import IngestError
from .evaluate import ScoreValidationError
from .gateway import GatewayError
from .generate import FabricationError
from .pipeline import (StageDependencyError, cmd_chunk, cmd_cluster, cmd_enrich,
                       cmd_evaluate, cmd_generate, cmd_ingest, cmd_run, cmd_stats)
from .provisions import ProvisionError, parse_provision

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE_DEPENDENCY = 3
EXIT_GATEWAY = 4
EXIT_FABRICATION = 5
EXIT_VALIDATION = 6

_COMMANDS = {
    "ingest": cmd_ingest,
    "chunk": cmd_chunk,
    "enrich": cmd_enrich,
    "cluster": cmd_cluster,
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
    "stats": cmd_stats,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kommentar",
        description="Generate citation-grounded commentary drafts from a "
                    "court-decision corpus.")
    parser.add_argument("--config", required=True, help="pipeline config file (YAML)")
    parser.add_argument("--backend", choices=("mock", "live"),
                        help="override the configured backend")
    parser.add_argument("--seed", type=int, help="override the configured seed")
    parser.add_argument("--provision", action="append", default=[],
                        metavar="REF",
                        help="restrict to one provision, e.g. '§ 823 BGB' "
                             "(repeatable)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*_COMMANDS, "run"):
        sub.add_parser(name, help=f"run the {name} stage"
                       if name != "run" else "run all stages in order")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        provisions = tuple(parse_provision(p) for p in args.provision)
        config = load_config(args.config)
        config = apply_overrides(config, backend=args.backend, seed=args.seed,
                                 provisions=provisions or None)
        if args.command == "run":
            results = cmd_run(config)
        else:
            results = [_COMMANDS[args.command](config)]
    except (ConfigurationError, ProvisionError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageDependencyError as exc:
        print(f"stage dependency error: {exc}", file=sys.stderr)
        return EXIT_STAGE_DEPENDENCY
    except FabricationError as exc:
        print(f"fabrication error: {exc}", file=sys.stderr)
        return EXIT_FABRICATION
    except GatewayError as exc:
        print(f"gateway error: {exc}", file=sys.stderr)
        return EXIT_GATEWAY
    except (IngestError, ScoreValidationError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    for result in results:
        print(result.summary())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
