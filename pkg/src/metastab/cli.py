"""Command line entry point: ``metastab run | list-catalog | schema``."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from importlib import resources

from .errors import ConfigInvalid

EXIT_OK, EXIT_TASK_FAILED, EXIT_CONFIG = 0, 1, 2


def load_schema() -> dict:
    return json.loads(resources.files("metastab").joinpath("schema.json").read_text("utf-8"))


def validate_results(doc: dict) -> None:
    """Raise ``jsonschema.ValidationError`` if ``doc`` does not match the schema."""
    import jsonschema

    jsonschema.validate(doc, load_schema())


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="metastab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config", help="TOML experiment file")
    r.add_argument("--out", help="output directory (overrides the config)")
    r.add_argument("--seed", type=int, help="random seed (overrides the config)")
    r.add_argument("--threads", type=int, help="simulation worker threads")
    sub.add_parser("list-catalog", help="list named potentials")
    sub.add_parser("schema", help="print the results.json schema")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "schema":
        print(json.dumps(load_schema(), indent=2))
        return EXIT_OK
    if args.command == "list-catalog":
        from .catalog import catalog_names, get_entry

        for name in catalog_names():
            e = get_entry(name)
            print(f"{name:28s} dim={e.potential.dim} {e.expected_topology:9s} {e.description}")
        return EXIT_OK

    from .config import load_config
    from .pipeline import run

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigInvalid("seed", "must be nonnegative")
            cfg = replace(cfg, seed=args.seed)
        if args.threads is not None and args.threads < 1:
            raise ConfigInvalid("threads", "must be at least 1")
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    bundle = run(cfg, out=args.out, threads=args.threads)
    for rec in bundle.records:
        tag = "ok" if rec["status"] == "ok" else f"error ({rec['error']['type']})"
        eps = "" if rec["eps"] is None else f" eps={rec['eps']:g}"
        print(f"{rec['task']}{eps}: {tag}")
    print(f"results written to {args.out or cfg.output}")
    return EXIT_OK if bundle.ok else EXIT_TASK_FAILED


if __name__ == "__main__":
    sys.exit(main())
