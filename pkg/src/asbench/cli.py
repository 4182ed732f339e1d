"""Command-line entry point.

Verbs:

* ``fabric`` - switching-architecture table for one (N, M), or the bundled
  ``tableII`` reference point.
* ``sweep``  - Monte Carlo rate sweeps (presets fig4, fig5, fig6) and the
  deterministic loss sweep (fig7).
* ``approx`` - analytical capacity approximation curves only.
* ``probs``  - selectable rank-set distribution of a partial fabric, as JSON.
* ``energy`` - consumption / efficiency tables (presets fig8, fig9).

Flags override preset or config-file values; results are CSV (default) or
JSON.  Exit code 0 on success, 1 with an error summary otherwise.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .analysis import OrderStatSpec, power_scaling_ff, power_scaling_pc, rank_set_distribution
from .connectivity import build_connectivity
from .energy import load_energy_params
from .experiments import (
    PRESETS,
    ResultTable,
    SweepConfig,
    config_hash,
    emit,
    fabric_table,
    preset,
    run_sweep,
)
from .fabric import load_catalog


def _parse_sweep(text: str) -> tuple[int, ...]:
    """Parse '2..8' ranges, '2..16..2' strides or '2,4,8' lists."""
    if ".." in text:
        parts = [int(p) for p in text.split("..")]
        if len(parts) == 2:
            return tuple(range(parts[0], parts[1] + 1))
        if len(parts) == 3:
            return tuple(range(parts[0], parts[1] + 1, parts[2]))
        raise ValueError(f"bad sweep spec: {text!r}")
    return tuple(int(p) for p in text.split(","))


def _apply_overrides(cfg: SweepConfig, args: argparse.Namespace) -> SweepConfig:
    updates = {}
    if getattr(args, "trials", None) is not None:
        updates["trials"] = args.trials
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "m", None) is not None:
        updates["sweep"] = _parse_sweep(args.m)
    if getattr(args, "energy_params", None):
        updates["energy_params"] = load_energy_params(args.energy_params)
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _config_from_file(path: str) -> SweepConfig:
    raw = json.loads(Path(path).read_text())
    raw["sweep"] = tuple(raw.get("sweep", ()))
    from .experiments import SeriesSpec
    from .fabric import ArchitectureKind
    from .scenarios import LossMode, Precoder, SelectionMode

    series = []
    for s in raw.get("series", []):
        arch = s.get("architecture")
        series.append(SeriesSpec(
            name=s["name"],
            selection_mode=SelectionMode(s["selection_mode"]),
            architecture=None if arch in (None, "none") else ArchitectureKind(arch),
            precoder=Precoder(s.get("precoder", "dpc")),
            loss_mode=LossMode(s.get("loss_mode", "ignore")),
        ))
    raw["series"] = tuple(series)
    return SweepConfig(**raw)


def _cmd_fabric(args: argparse.Namespace) -> int:
    catalog = load_catalog(args.catalog)
    if args.preset == "tableII":
        n, m = 128, 76
    else:
        n, m = args.n, args.m
    designs = fabric_table(n, m, catalog)
    if args.out:
        doc = {"n": n, "m": m, "architectures": designs}
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(doc, indent=2) + "\n")
        print(f"wrote {args.out}")
    else:
        print(f"N={n} M={m}")
        for arch, d in designs.items():
            print(f"  {arch:12s} t_rf={d['t_rf']:<4d} t_an={d['t_an']:<4d} "
                  f"s_total={d['s_total']} loss={d['loss_db']:.2f} dB")
    return 0


def _run_and_emit(cfg: SweepConfig, args: argparse.Namespace) -> int:
    table = run_sweep(cfg)
    out = args.out or f"{cfg.scenario_id}.{args.format}"
    emit(table, args.format, out)
    errors = [r for r in table.rows if r["metric"] == "error"]
    print(f"wrote {out} ({len(table.rows)} rows, config {table.config_hash})")
    if errors:
        print(f"{len(errors)} sweep points failed", file=sys.stderr)
        return 1
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    if args.config:
        cfg = _config_from_file(args.config)
    elif args.preset:
        cfg = preset(args.preset)
    else:
        print("sweep needs --preset or --config", file=sys.stderr)
        return 1
    return _run_and_emit(_apply_overrides(cfg, args), args)


def _cmd_approx(args: argparse.Namespace) -> int:
    from .experiments import _approx_rows  # reuse the row builder

    sweep = _parse_sweep(args.m)
    cfg = SweepConfig(
        scenario_id=args.name, n=args.n, k=args.k, rho_db=args.rho_db,
        sweep=sweep, trials=0, seed=args.seed if args.seed is not None else 1234,
        approx_g_trials=args.g_trials,
    )
    table = ResultTable(cfg.scenario_id, cfg.to_json_dict(),
                        config_hash(cfg.to_json_dict()), cfg.seed)
    for m in sweep:
        _approx_rows(cfg, m, table)
    out = args.out or f"{cfg.scenario_id}.{args.format}"
    emit(table, args.format, out)
    print(f"wrote {out} ({len(table.rows)} rows, config {table.config_hash})")
    return 0


def _cmd_probs(args: argparse.Namespace) -> int:
    cmap = build_connectivity(args.n, args.m)
    dist = rank_set_distribution(cmap, enumeration_limit=args.limit,
                                 mc_samples=args.mc_samples, seed=args.seed or 0)
    doc = [{"ranks": list(s), "p": p} for s, p in zip(dist.sets, dist.probs)]
    text = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


def _cmd_energy(args: argparse.Namespace) -> int:
    cfg = preset(args.preset) if args.preset else _config_from_file(args.config)
    return _run_and_emit(_apply_overrides(cfg, args), args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asbench", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("fabric", help="switching architecture table")
    p.add_argument("--preset", choices=["tableII"], default=None)
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--m", type=int, default=76)
    p.add_argument("--catalog", default=None, help="JSON switch catalog")
    p.add_argument("--out", default=None, help="write JSON instead of printing")
    p.set_defaults(func=_cmd_fabric)

    for verb, choices in (("sweep", ("fig4", "fig5", "fig6", "fig7")),
                          ("energy", ("fig8", "fig9"))):
        p = sub.add_parser(verb, help=f"run a {verb} experiment")
        p.add_argument("--preset", choices=choices, default=None)
        p.add_argument("--config", default=None, help="JSON sweep configuration")
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--m", default=None, help="override sweep, e.g. 2..8 or 16,32,64")
        p.add_argument("--energy-params", default=None, help="JSON energy parameters")
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        p.add_argument("--out", default=None)
        p.set_defaults(func=_cmd_sweep if verb == "sweep" else _cmd_energy)

    p = sub.add_parser("approx", help="analytical approximation curves")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--rho-db", type=float, required=True)
    p.add_argument("--m", required=True, help="sweep, e.g. 2..8")
    p.add_argument("--g-trials", type=int, default=5000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--name", default="approx")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_approx)

    p = sub.add_parser("probs", help="rank-set distribution of a partial fabric")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--limit", type=int, default=12, help="exact enumeration limit")
    p.add_argument("--mc-samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_probs)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
