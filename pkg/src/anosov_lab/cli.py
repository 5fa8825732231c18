"""``anosov-lab <pipeline> --config <file> [--seed N] [--workers N] [--out DIR]``."""
from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError
from .pipelines import EXIT, PIPELINES, ExperimentConfig, run_pipeline


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="anosov-lab",
                                description="Spherical billiards and the surfaces that "
                                            "approximate them.")
    p.add_argument("pipeline", choices=PIPELINES)
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: $ANOSOV_LAB_WORKERS or 1)")
    p.add_argument("--out", default=None, help="output directory")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        for key in ("seed", "workers", "out"):
            val = getattr(args, key)
            if val is not None:
                raw[key] = val
        cfg = ExperimentConfig.from_dict(raw, args.pipeline)
        code, report = run_pipeline(cfg)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT["config"]
    print(f"{cfg.pipeline}: {report['verdict']} (report in {cfg.out}/report.json)")
    return code


if __name__ == "__main__":
    sys.exit(main())
