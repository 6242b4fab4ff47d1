"""Command-line entry point: ``qphlab <experiment> [options] [--key value ...]``."""

from __future__ import annotations

import argparse
import json
import sys

from .harness import EXPERIMENTS, ExperimentConfig, InvariantViolation, ValidationError, emit_csv, rows_to_csv, run_experiment

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INVARIANT = 3


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _extra_params(tokens: list[str]) -> dict:
    out = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--") or len(tok) == 2:
            raise ValidationError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ValidationError(f"missing value for --{key}")
            val = tokens[i + 1]
            i += 2
        out[key.replace("-", "_")] = _parse_value(val)
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qphlab", description="Run a seeded protocol experiment and write CSV rows.")
    ap.add_argument("experiment", help="one of: " + ", ".join(sorted(EXPERIMENTS)))
    ap.add_argument("--config", help="JSON file with experiment parameters (flags override it)")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--trials", type=int)
    ap.add_argument("--out", help="CSV path (default: stdout)")
    ap.add_argument("--workers", type=int, help="worker threads (output does not depend on this)")
    return ap


def config_from_args(argv: list[str]) -> ExperimentConfig:
    ap = build_parser()
    args, rest = ap.parse_known_args(argv)
    file_cfg: dict = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise ValidationError("config file must hold a JSON object")
    params = dict(file_cfg.get("params", {}))
    params.update(_extra_params(rest))

    def pick(flag, key, default):
        return flag if flag is not None else file_cfg.get(key, default)

    return ExperimentConfig(
        experiment=args.experiment,
        params=params,
        trials=pick(args.trials, "trials", None),
        seed=pick(args.seed, "seed", 0),
        out=pick(args.out, "out", None),
        workers=pick(args.workers, "workers", 1),
    )


def _write(rows, out) -> None:
    if out:
        emit_csv(rows, out)
    else:
        sys.stdout.write(rows_to_csv(rows))


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = config_from_args(argv)
        rows = run_experiment(cfg)
    except ValidationError as exc:
        print(f"qphlab: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except InvariantViolation as exc:
        if exc.rows:
            try:
                _write(exc.rows, cfg.out)
            except OSError:
                pass
        print(f"qphlab: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    try:
        _write(rows, cfg.out)
    except OSError as exc:
        print(f"qphlab: cannot write output: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
