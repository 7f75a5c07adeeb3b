"""Command-line interface.

Thin wrapper over :mod:`r0panel.pipeline`: every subcommand reads a YAML
config (a file path or a bundled scenario name), applies flag overrides,
and writes plain files into ``--out``.  Exit codes: 0 success, 1 the run
itself failed (estimation or data problems), 2 bad configuration or usage.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

import numpy as np

from .config import BUNDLED_SCENARIOS, ConfigError, RunConfig, load_config
from .pipeline import run_estimate, run_ingest, run_report, run_simulate

logger = logging.getLogger("r0panel.cli")


def _parse_window(text: str) -> tuple[str, str]:
    parts = text.split(":")
    if len(parts) != 2 or not parts[0] or not parts[1]:
        raise ConfigError(f"--window must look like START:END, got {text!r}")
    return parts[0], parts[1]


def _parse_tau_grid(text: str) -> dict:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"--tau-grid range must look like LO:HI:STEP, got {text!r}")
        try:
            lo, hi, step = (float(p) for p in parts)
        except ValueError:
            raise ConfigError(f"--tau-grid has non-numeric parts: {text!r}") from None
        return {"lo": lo, "hi": hi, "step": step}
    try:
        values = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"--tau-grid has non-numeric values: {text!r}") from None
    if not values:
        raise ConfigError("--tau-grid is empty")
    return {"values": values}


def apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    """Fold command-line flags into the config and re-validate."""
    changes = {}
    if getattr(args, "mf_start", None) is not None:
        changes["mf_start"] = args.mf_start
    if getattr(args, "mf_end", None) is not None:
        changes["mf_end"] = args.mf_end
    if getattr(args, "window", None) is not None:
        changes["window"] = _parse_window(args.window)
    if getattr(args, "lag", None) is not None:
        changes["lag_p"] = args.lag
    if getattr(args, "tau_grid", None) is not None:
        changes["tau_grid"] = _parse_tau_grid(args.tau_grid)
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
        if cfg.simulation is not None:
            sim = dict(cfg.simulation)
            sim["seed"] = args.seed
            changes["simulation"] = sim
    if changes:
        cfg = dataclasses.replace(cfg, **changes)
        cfg.validate()
    return cfg


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--config",
        required=True,
        help=f"YAML config path or a bundled scenario name ({', '.join(sorted(BUNDLED_SCENARIOS))})",
    )
    parser.add_argument("--out", default="out", help="output directory (default: ./out)")
    parser.add_argument("--mf-start", type=float, help="reporting-correction factor at the first case")
    parser.add_argument("--mf-end", type=float, help="reporting-correction factor at the sample end")
    parser.add_argument("--window", help="sample window as START:END (ISO dates)")
    parser.add_argument("--lag", type=int, help="days between covariates and the outcome (default 10)")
    parser.add_argument(
        "--tau-grid", help="threshold grid: LO:HI:STEP or a comma-separated value list"
    )
    parser.add_argument("--seed", type=int, help="random seed override (simulation)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="r0panel",
        description="Reproduction-number panel estimation from reported-incidence files.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse sources and write canonical tables plus the panel")
    _add_common(p)

    p = sub.add_parser("estimate", help="fit the threshold panel model and write the results bundle")
    _add_common(p)
    p.add_argument(
        "--no-mitigation",
        action="store_true",
        help="intercept-only fit (no covariates or threshold), same bundle layout",
    )

    p = sub.add_parser("counterfactual", help="shorthand for estimate --no-mitigation")
    _add_common(p)

    p = sub.add_parser("simulate", help="generate a synthetic panel in the canonical formats")
    _add_common(p)

    p = sub.add_parser("report", help="summarize estimate tables: histogram, ranking, summary")
    p.add_argument("inputs", nargs="+", help="r0_table.csv files or estimate bundle directories")
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    return parser


def _run(args: argparse.Namespace) -> int:
    if args.command == "report":
        line, paths = run_report(args.inputs, args.out)
        print(line)
        for name in sorted(paths):
            logger.info("wrote %s", paths[name])
        return 0

    cfg = apply_overrides(load_config(args.config), args)
    if args.command == "ingest":
        paths = run_ingest(cfg, args.out)
        print(f"ingested panel written to {paths['panel']}")
    elif args.command in ("estimate", "counterfactual"):
        counterfactual = args.command == "counterfactual" or getattr(args, "no_mitigation", False)
        result = run_estimate(cfg, args.out, counterfactual=counterfactual)
        fit = result.fit
        tau = "none" if fit.tau != fit.tau else f"{fit.tau:.4f}"
        print(
            f"{fit.model}: {fit.obs_count} obs, {fit.region_count} regions, "
            f"tau={tau}, r2={fit.r_squared:.4f} -> {result.paths['r0_table']}"
        )
    elif args.command == "simulate":
        paths = run_simulate(cfg, args.out)
        print(f"simulated panel written to {paths['cases'].parent}")
    else:  # pragma: no cover - argparse enforces the choices
        raise ConfigError(f"unknown command {args.command!r}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _run(args)
    except ConfigError as exc:
        logger.error("%s", exc)
        return 2
    except (ValueError, np.linalg.LinAlgError) as exc:
        logger.error("%s", exc)
        return 1
    except OSError as exc:
        logger.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
