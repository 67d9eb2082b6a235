"""Command-line entry point: ``lqtraj <experiment> [options]``."""

from __future__ import annotations

import argparse
import json
import sys
import warnings

from .errors import ArgumentError, ConfigurationError, LqtrajError
from .experiments import (
    CONFIG_KEYS,
    EXPERIMENTS,
    RUNNERS,
    ExperimentConfig,
    config_from_mapping,
    read_config_file,
    write_records,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_NUMERICAL = 4

EPILOG = f"""\
config file: flat 'key = value' lines ('#' starts a comment). Keys:
  {', '.join(k for k in CONFIG_KEYS if k != 'experiment')}
Command-line options override the file; --param KEY=VALUE overrides both.

defaults per experiment (grid, trajectories, dim, dt):
  fig1-qnd         0:2:41, 1000, 128, 0.05   (grid is tau = k t)
  ho-position      0:5:51,   20,  80, 5e-4   (grid is omega t)
  momentum-linear  0:1:11,   20,  80, 1e-4   (grid is t, k = 0.25)

exit status: 0 success, 2 configuration error, 3 validation failure, 4 numerical error
"""


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lqtraj",
        description="Closed-form linear quantum trajectories checked against brute-force oracles.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--seed", type=int)
    p.add_argument("--trajectories", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--grid", metavar="a:b:n")
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--oracle", choices=("on", "off"))
    p.add_argument("--workers", type=int)
    p.add_argument("--config", metavar="PATH", help="flat key = value settings file")
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
    p.add_argument("--criteria", metavar="IDS", help="validate only: comma-separated criterion ids")
    return p


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values: dict[str, str] = {}
    if args.config:
        values.update(read_config_file(args.config))
    for name in ("seed", "trajectories", "dim", "dt", "grid", "format", "oracle", "workers"):
        val = getattr(args, name)
        if val is not None:
            values[name] = str(val)
    if args.out is not None:
        values["output_path"] = args.out
    for item in args.param:
        if "=" not in item:
            raise ConfigurationError(f"--param expects KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        values[key] = val
    values.pop("experiment", None)
    return config_from_mapping(values, ExperimentConfig(args.experiment))


def _validate(cfg: ExperimentConfig, criteria: str | None) -> int:
    from .validation import CRITERIA, run_validation

    ids = None
    if criteria:
        try:
            ids = [int(x) for x in criteria.split(",") if x.strip()]
        except ValueError as exc:
            raise ConfigurationError(f"bad criterion list {criteria!r}") from exc
        unknown = set(ids) - set(CRITERIA)
        if unknown:
            raise ConfigurationError(f"unknown criteria {sorted(unknown)}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        results = run_validation(ids)
    for res in results:
        print(res.line(), file=sys.stderr)
    if cfg.format == "json":
        text = json.dumps([r.as_dict() for r in results], indent=1) + "\n"
    else:
        rows = ["id,title,passed,measured,tolerance"]
        rows += [f'{r.id},"{r.title}",{str(r.passed).lower()},{r.worst.measured!r},{r.worst.tolerance!r}' for r in results]
        text = "\n".join(rows) + "\n"
    if cfg.output_path:
        with open(cfg.output_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        if args.criteria and cfg.experiment != "validate":
            raise ConfigurationError("--criteria only applies to the validate experiment")
        if cfg.experiment == "validate":
            return _validate(cfg, args.criteria)
        records = RUNNERS[cfg.experiment](cfg)
        text = write_records(records, cfg.output_path, cfg.format)
        if cfg.output_path is None:
            sys.stdout.write(text)
        return EXIT_OK
    except (ConfigurationError, ArgumentError) as exc:
        print(f"lqtraj: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LqtrajError as exc:
        print(f"lqtraj: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
