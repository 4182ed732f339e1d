"""Scenario execution: Monte Carlo sweeps, presets and result emission.

A sweep evaluates one or more curves (series) over a set of RF-chain counts.
All series of a sweep share the same per-trial channel draws, so curve
comparisons are paired and reruns with the same seed are byte-identical.
Results are flat rows with a fixed column order:

    scenario_id, m, mode, architecture, metric, mean, stderr, trials,
    loss_db, prelog

where ``mode`` names the curve and ``metric`` the quantity (rate, loss_db,
p_total, xi).  CSV files start with a ``# config_hash=... seed=...`` comment.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .analysis import (
    OrderStatSpec,
    approx_capacity_stats,
    power_scaling_ff,
    power_scaling_pc,
    rank_set_distribution,
)
from .channel import IDENTITY, RngStreamSpec, STREAM_CHANNEL, draw_channel_batch
from .connectivity import ConnectivityMap, build_connectivity
from .energy import EnergyParams, energy_efficiency, total_power
from .fabric import ArchitectureKind, DEFAULT_CATALOG, design_fabric
from .rates import (
    FrameConfig,
    TrainingMode,
    frame_split,
    sum_capacity_batch,
    training_overhead,
    zf_sum_rate_batch,
)
from .scenarios import LossMode, Precoder, ScenarioConfig, SelectionMode
from .selection import (
    _Groups,
    _select_csi_batch,
    _top_in_group_mask,
    _waterfill_batch,
)
from .units import db_to_linear

COLUMNS = (
    "scenario_id", "m", "mode", "architecture", "metric",
    "mean", "stderr", "trials", "loss_db", "prelog",
)

RESULT_JSON_SCHEMA = {
    "type": "object",
    "required": ["scenario_id", "config_hash", "seed", "rows"],
    "properties": {
        "scenario_id": {"type": "string"},
        "config_hash": {"type": "string"},
        "seed": {"type": "integer"},
        "config": {"type": "object"},
        "rows": {
            "type": "array",
            "items": {
                "type": "object",
                "required": list(COLUMNS),
                "properties": {
                    "scenario_id": {"type": "string"},
                    "m": {"type": "integer"},
                    "mode": {"type": "string"},
                    "architecture": {"type": "string"},
                    "metric": {"type": "string"},
                    "mean": {"type": "number"},
                    "stderr": {"type": "number"},
                    "trials": {"type": "integer"},
                    "loss_db": {"type": "number"},
                    "prelog": {"type": "number"},
                },
            },
        },
    },
}


@dataclass(frozen=True)
class SeriesSpec:
    """One curve of a sweep."""

    name: str
    selection_mode: SelectionMode
    architecture: ArchitectureKind | None
    precoder: Precoder = Precoder.DPC_EQ2
    loss_mode: LossMode = LossMode.IGNORE

    @property
    def arch_label(self) -> str:
        return self.architecture.value if self.architecture else "none"


@dataclass(frozen=True)
class SweepConfig:
    """A full experiment: shared system parameters plus the curves to run."""

    scenario_id: str
    n: int
    k: int
    rho_db: float
    sweep: tuple[int, ...]
    series: tuple[SeriesSpec, ...] = ()
    eta_coh: int = 0          # 0 = overhead-free (prelog 1)
    dl_fraction: float = 0.7
    trials: int = 2000
    seed: int = 1234
    approx: bool = False      # add analytical approximation curves
    approx_g_trials: int = 5000
    loss_only: bool = False   # emit fabric losses instead of Monte Carlo rates
    energy: bool = False      # add power / efficiency rows
    rb_fraction: float | None = None  # transmit-power apportionment for xi rows
    energy_params: EnergyParams = field(default_factory=EnergyParams)

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["sweep"] = list(self.sweep)
        d["series"] = [
            {
                "name": s.name,
                "selection_mode": s.selection_mode.value,
                "architecture": s.arch_label,
                "precoder": s.precoder.value,
                "loss_mode": s.loss_mode.value,
            }
            for s in self.series
        ]
        return d


@dataclass
class ResultTable:
    """Ordered result rows plus the reproducibility envelope."""

    scenario_id: str
    config: dict
    config_hash: str
    seed: int
    rows: list[dict] = field(default_factory=list)

    def append(self, **row) -> None:
        self.rows.append({c: row[c] for c in COLUMNS})

    def by_mode(self, mode: str, metric: str | None = None) -> list[dict]:
        out = [r for r in self.rows if r["mode"] == mode]
        if metric is not None:
            out = [r for r in out if r["metric"] == metric]
        return sorted(out, key=lambda r: r["m"])


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


# ---------------------------------------------------------------------------
# per-point evaluation


@dataclass(frozen=True)
class PointResult:
    mean: float
    stderr: float
    loss_db: float
    prelog: float
    frame: FrameConfig
    n_failed: int
    feasible: bool


def _frame_for(n_eff: int, m: int, k: int, mode: SelectionMode,
               eta_coh: int, dl_fraction: float) -> FrameConfig:
    if eta_coh <= 0:
        return FrameConfig(eta_coh=1, eta_tr=0, eta_ul=0, eta_dl=1, dl_fraction=1.0)
    tm = (
        TrainingMode.INSTANTANEOUS
        if mode in (SelectionMode.CSI_FF, SelectionMode.CSI_PC)
        else TrainingMode.POWER_BASED
    )
    return frame_split(eta_coh, training_overhead(n_eff, m, k, tm), dl_fraction)


def _select_columns(h: np.ndarray, mode: SelectionMode, m: int,
                    cmap: ConnectivityMap | None, rho_eff: float) -> np.ndarray:
    """Boolean (T, N) mask of the selected antennas for every trial."""
    t, _, n = h.shape
    if mode == SelectionMode.FULL_MIMO:
        return np.ones((t, n), dtype=bool)
    if mode == SelectionMode.POWER_FF:
        powers = np.sum(np.abs(h) ** 2, axis=1)
        return _top_in_group_mask(powers, _Groups.fully_flexible(n, m))
    if mode == SelectionMode.POWER_PC:
        assert cmap is not None
        powers = np.sum(np.abs(h) ** 2, axis=1)
        return _top_in_group_mask(powers, _Groups.from_map(cmap))
    groups = (
        _Groups.fully_flexible(n, m)
        if mode == SelectionMode.CSI_FF
        else _Groups.from_map(cmap)  # type: ignore[arg-type]
    )
    sel, _ = _select_csi_batch(h, rho_eff, groups)
    return sel


def _series_rates(channels: np.ndarray, cfg: SweepConfig, spec: SeriesSpec, m: int) -> tuple[np.ndarray, PointResult]:
    """Per-trial rates for one curve at one sweep point."""
    n, k = cfg.n, cfg.k
    full = spec.selection_mode == SelectionMode.FULL_MIMO
    n_eff = m if full else n
    h = channels[:, :, :m] if full else channels

    if full or spec.architecture is None:
        loss_db = 0.0
    else:
        loss_db = design_fabric(n, m, spec.architecture, DEFAULT_CATALOG).total_loss_db

    frame = _frame_for(n_eff, m, k, spec.selection_mode, cfg.eta_coh, cfg.dl_fraction)
    if not frame.feasible:
        zeros = np.zeros(channels.shape[0])
        return zeros, PointResult(0.0, 0.0, loss_db, 0.0, frame, 0, False)

    rho_eff = db_to_linear(cfg.rho_db)
    if spec.loss_mode == LossMode.DIVIDE_RHO:
        rho_eff /= db_to_linear(loss_db)

    cmap = None
    if spec.selection_mode in (SelectionMode.POWER_PC, SelectionMode.CSI_PC):
        cmap = build_connectivity(n, m)
    mask = _select_columns(h, spec.selection_mode, m, cmap, rho_eff)
    cols = np.where(mask)[1].reshape(h.shape[0], -1)
    h_sel = np.take_along_axis(h, cols[:, None, :], axis=2)

    if spec.precoder == Precoder.ZF:
        rates = zf_sum_rate_batch(h_sel, rho_eff, frame.prelog)
    else:
        gram = h_sel @ h_sel.conj().transpose(0, 2, 1)
        p, _ = _waterfill_batch(gram, rho_eff)
        rates = sum_capacity_batch(h_sel, p, rho_eff, frame.prelog)

    finite = np.isfinite(rates)
    n_failed = int(np.sum(~finite))
    if n_failed > 0.01 * len(rates):
        raise RuntimeError(
            f"{n_failed}/{len(rates)} trials failed for {spec.name} at m={m}"
        )
    good = rates[finite]
    mean = float(np.mean(good))
    stderr = float(np.std(good, ddof=1) / np.sqrt(len(good))) if len(good) > 1 else 0.0
    return rates, PointResult(mean, stderr, loss_db, frame.prelog, frame, n_failed, True)


def run_point(scenario: ScenarioConfig) -> PointResult:
    """Evaluate a single-point scenario (used by the ergodic-rate entry point)."""
    cfg = SweepConfig(
        scenario_id=scenario.scenario_id,
        n=scenario.n,
        k=scenario.k,
        rho_db=scenario.rho_db,
        sweep=(scenario.m,),
        eta_coh=scenario.eta_coh,
        dl_fraction=scenario.dl_fraction,
        trials=scenario.trials,
        seed=scenario.seed,
    )
    spec = SeriesSpec(
        name=scenario.selection_mode.value,
        selection_mode=scenario.selection_mode,
        architecture=None if scenario.selection_mode == SelectionMode.FULL_MIMO
        else scenario.architecture,
        precoder=scenario.precoder,
        loss_mode=scenario.loss_mode,
    )
    channels = draw_channel_batch(
        cfg.k, cfg.n, IDENTITY, RngStreamSpec(cfg.seed, STREAM_CHANNEL),
        range(cfg.trials),
    )
    _, res = _series_rates(channels, cfg, spec, scenario.m)
    return res


# ---------------------------------------------------------------------------
# sweep driver


def _loss_rows(cfg: SweepConfig, table: ResultTable) -> None:
    archs = (
        ArchitectureKind.FF_FULL,
        ArchitectureKind.FF_MIN_CONN,
        ArchitectureKind.FF_MIN_LOSS,
        ArchitectureKind.PARTIAL,
    )
    for m in cfg.sweep:
        for arch in archs:
            loss = design_fabric(cfg.n, m, arch, DEFAULT_CATALOG).total_loss_db
            table.append(
                scenario_id=cfg.scenario_id, m=m, mode=arch.value,
                architecture=arch.value, metric="loss_db", mean=loss,
                stderr=0.0, trials=0, loss_db=loss, prelog=1.0,
            )


def _approx_rows(cfg: SweepConfig, m: int, table: ResultTable) -> None:
    spec = OrderStatSpec(cfg.n, cfg.k)
    rho = db_to_linear(cfg.rho_db)
    ps_ff = power_scaling_ff(cfg.n, m, spec)
    cmap = build_connectivity(cfg.n, m)
    dist = rank_set_distribution(cmap)
    ps_pc = power_scaling_pc(cmap, spec, dist)
    entries = (
        ("approx_ff_single", ps_ff, "single"),
        ("approx_pc_single", ps_pc, "single"),
        ("approx_pc_mixture", ps_pc, "mixture"),
    )
    for name, ps, mode in entries:
        mean, stderr = approx_capacity_stats(
            ps, cfg.k, m, rho, mode, cfg.approx_g_trials, seed=cfg.seed
        )
        table.append(
            scenario_id=cfg.scenario_id, m=m, mode=name, architecture="analytical",
            metric="rate", mean=mean, stderr=stderr, trials=cfg.approx_g_trials,
            loss_db=0.0, prelog=1.0,
        )


def _energy_rows(cfg: SweepConfig, m: int, spec: SeriesSpec, res: PointResult) -> list[dict]:
    params = cfg.energy_params
    scale = cfg.rb_fraction if cfg.rb_fraction is not None else 1.0
    report = total_power(m, res.loss_db, res.frame, params, k=cfg.k, p_t_scale=scale)
    rate_bw = params.rb_hz if cfg.rb_fraction is not None else params.bandwidth_hz
    completed = energy_efficiency(res.mean, rate_bw, report)
    shared = dict(scenario_id=cfg.scenario_id, m=m, mode=spec.name,
                  architecture=spec.arch_label, trials=cfg.trials,
                  loss_db=res.loss_db, prelog=res.prelog)
    return [
        dict(shared, metric="p_total", mean=report.total, stderr=0.0),
        dict(shared, metric="xi", mean=completed.xi,
             stderr=res.stderr * rate_bw / report.total),
    ]


def _power_table_rows(cfg: SweepConfig, table: ResultTable) -> None:
    """Deterministic consumption table (no Monte Carlo rates involved)."""
    params = cfg.energy_params
    scale = cfg.rb_fraction if cfg.rb_fraction is not None else 1.0
    for m in cfg.sweep:
        for spec in cfg.series:
            loss = (
                0.0 if spec.architecture is None
                else design_fabric(cfg.n, m, spec.architecture, DEFAULT_CATALOG).total_loss_db
            )
            frame = _frame_for(cfg.n, m, cfg.k, spec.selection_mode, cfg.eta_coh, cfg.dl_fraction)
            report = total_power(m, loss, frame, params, k=cfg.k, p_t_scale=scale)
            table.append(
                scenario_id=cfg.scenario_id, m=m, mode=spec.name,
                architecture=spec.arch_label, metric="p_total", mean=report.total,
                stderr=0.0, trials=0, loss_db=loss, prelog=frame.prelog,
            )


def run_sweep(cfg: SweepConfig) -> ResultTable:
    """Run every series of the sweep; per-point failures become error rows.

    The worker count is read from ``ASBENCH_WORKERS`` (default 1); results
    are merged in sweep order regardless of scheduling.
    """
    table = ResultTable(
        scenario_id=cfg.scenario_id,
        config=cfg.to_json_dict(),
        config_hash=config_hash(cfg.to_json_dict()),
        seed=cfg.seed,
    )
    if cfg.loss_only:
        _loss_rows(cfg, table)
        return table
    if cfg.energy and cfg.trials == 0:
        _power_table_rows(cfg, table)
        return table

    channels = draw_channel_batch(
        cfg.k, cfg.n, IDENTITY, RngStreamSpec(cfg.seed, STREAM_CHANNEL),
        range(cfg.trials),
    )

    def eval_point(m: int) -> list[dict]:
        rows: list[dict] = []
        for spec in cfg.series:
            try:
                _, res = _series_rates(channels, cfg, spec, m)
            except Exception:  # per-point failure: record and continue
                rows.append(dict(
                    scenario_id=cfg.scenario_id, m=m, mode=spec.name,
                    architecture=spec.arch_label, metric="error", mean=float("nan"),
                    stderr=float("nan"), trials=cfg.trials, loss_db=0.0, prelog=0.0,
                ))
                continue
            rows.append(dict(
                scenario_id=cfg.scenario_id, m=m, mode=spec.name,
                architecture=spec.arch_label, metric="rate", mean=res.mean,
                stderr=res.stderr, trials=cfg.trials, loss_db=res.loss_db,
                prelog=res.prelog,
            ))
            if cfg.energy:
                rows.extend(_energy_rows(cfg, m, spec, res))
        return rows

    workers = max(1, int(os.environ.get("ASBENCH_WORKERS", "1")))
    if workers == 1:
        per_point = [eval_point(m) for m in cfg.sweep]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_point = list(pool.map(eval_point, cfg.sweep))
    for rows in per_point:
        for row in rows:
            table.append(**row)

    if cfg.approx:
        for m in cfg.sweep:
            _approx_rows(cfg, m, table)
    return table


# ---------------------------------------------------------------------------
# presets


def _fig4() -> SweepConfig:
    series = (
        SeriesSpec("csi_ff", SelectionMode.CSI_FF, ArchitectureKind.FF_MIN_LOSS),
        SeriesSpec("power_ff", SelectionMode.POWER_FF, ArchitectureKind.FF_MIN_LOSS),
        SeriesSpec("power_pc", SelectionMode.POWER_PC, ArchitectureKind.PARTIAL),
    )
    return SweepConfig(
        scenario_id="fig4", n=8, k=2, rho_db=10.0, sweep=tuple(range(2, 9)),
        series=series, eta_coh=0, trials=2000, approx=True,
    )


def _fig5() -> SweepConfig:
    sweep = (16, 24, 32, 40, 48, 56, 64, 80, 96, 112, 128)
    series = (
        SeriesSpec("dpc_power_ff", SelectionMode.POWER_FF, ArchitectureKind.FF_MIN_LOSS),
        SeriesSpec("dpc_csi_ff", SelectionMode.CSI_FF, ArchitectureKind.FF_MIN_LOSS),
        SeriesSpec("dpc_full_mimo", SelectionMode.FULL_MIMO, None),
        SeriesSpec("zf_power_ff", SelectionMode.POWER_FF, ArchitectureKind.FF_MIN_LOSS,
                   Precoder.ZF),
        SeriesSpec("zf_csi_ff", SelectionMode.CSI_FF, ArchitectureKind.FF_MIN_LOSS,
                   Precoder.ZF),
        SeriesSpec("zf_full_mimo", SelectionMode.FULL_MIMO, None, Precoder.ZF),
    )
    return SweepConfig(
        scenario_id="fig5", n=128, k=16, rho_db=15.0, sweep=sweep, series=series,
        eta_coh=200, trials=1000,
    )


def _fig6() -> SweepConfig:
    series = (
        SeriesSpec("dpc_power_pc", SelectionMode.POWER_PC, ArchitectureKind.PARTIAL,
                   loss_mode=LossMode.DIVIDE_RHO),
        SeriesSpec("dpc_power_ff", SelectionMode.POWER_FF, ArchitectureKind.FF_MIN_LOSS,
                   loss_mode=LossMode.DIVIDE_RHO),
        SeriesSpec("dpc_full_mimo", SelectionMode.FULL_MIMO, None),
    )
    return SweepConfig(
        scenario_id="fig6", n=64, k=8, rho_db=20.0, sweep=tuple(range(8, 65, 8)),
        series=series, eta_coh=0, trials=2000,
    )


def _fig7() -> SweepConfig:
    return SweepConfig(
        scenario_id="fig7", n=128, k=16, rho_db=0.0, sweep=tuple(range(2, 129)),
        loss_only=True,
    )


def _fig8() -> SweepConfig:
    series = (
        SeriesSpec("partial", SelectionMode.POWER_PC, ArchitectureKind.PARTIAL),
        SeriesSpec("ff_min_loss", SelectionMode.POWER_FF, ArchitectureKind.FF_MIN_LOSS),
        SeriesSpec("ff_min_conn", SelectionMode.POWER_FF, ArchitectureKind.FF_MIN_CONN),
        SeriesSpec("ff_full", SelectionMode.POWER_FF, ArchitectureKind.FF_FULL),
    )
    return SweepConfig(
        scenario_id="fig8", n=128, k=16, rho_db=15.0, sweep=tuple(range(16, 129, 8)),
        series=series, eta_coh=200, energy=True, trials=0,
    )


def _fig9() -> SweepConfig:
    series = (
        SeriesSpec("zf_power_pc", SelectionMode.POWER_PC, ArchitectureKind.PARTIAL,
                   Precoder.ZF, LossMode.PA_COMPENSATE),
        SeriesSpec("zf_power_ff_min_loss", SelectionMode.POWER_FF,
                   ArchitectureKind.FF_MIN_LOSS, Precoder.ZF, LossMode.PA_COMPENSATE),
        SeriesSpec("zf_power_ff_full", SelectionMode.POWER_FF,
                   ArchitectureKind.FF_FULL, Precoder.ZF, LossMode.PA_COMPENSATE),
        SeriesSpec("zf_csi_ff_min_loss", SelectionMode.CSI_FF,
                   ArchitectureKind.FF_MIN_LOSS, Precoder.ZF, LossMode.PA_COMPENSATE),
    )
    return SweepConfig(
        scenario_id="fig9", n=128, k=16, rho_db=15.0,
        sweep=(16, 20, 24, 28, 32, 40, 48, 56, 64, 80, 96, 112, 128),
        series=series, eta_coh=200, trials=2000, energy=True,
        rb_fraction=180e3 / 20e6,
    )


PRESETS = {
    "fig4": _fig4,
    "fig5": _fig5,
    "fig6": _fig6,
    "fig7": _fig7,
    "fig8": _fig8,
    "fig9": _fig9,
}


def preset(name: str) -> SweepConfig:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    return PRESETS[name]()


def fabric_table(n: int, m: int, catalog=DEFAULT_CATALOG) -> dict[str, dict]:
    """All four architecture designs for one (n, m), as plain dicts."""
    out = {}
    for arch in ArchitectureKind:
        d = design_fabric(n, m, arch, catalog)
        out[arch.value] = {
            "t_rf": d.t_rf,
            "t_an": d.t_an,
            "q_rf": list(d.rf_stage.q_trace),
            "s_rf": list(d.rf_stage.switch_counts),
            "q_an": list(d.an_stage.q_trace),
            "s_an": list(d.an_stage.switch_counts),
            "s_total": [a + b for a, b in zip(d.rf_stage.switch_counts,
                                              d.an_stage.switch_counts)],
            "loss_db": d.total_loss_db,
        }
    return out


# ---------------------------------------------------------------------------
# emission


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def emit(table: ResultTable, fmt: str, path: str | Path) -> Path:
    """Write the table as CSV or JSON; identical inputs yield identical bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        if fmt == "csv":
            with open(path, "w", newline="") as fh:
                fh.write(f"# config_hash={table.config_hash} seed={table.seed}\n")
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(COLUMNS)
                for row in table.rows:
                    writer.writerow([_fmt(row[c]) for c in COLUMNS])
        elif fmt == "json":
            doc = {
                "scenario_id": table.scenario_id,
                "config_hash": table.config_hash,
                "seed": table.seed,
                "config": table.config,
                "rows": table.rows,
            }
            path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        else:
            raise ValueError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path
