"""Experiment configuration types shared by the rate runner and the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from enum import Enum

from .fabric import ArchitectureKind


class SelectionMode(str, Enum):
    POWER_FF = "power_ff"
    POWER_PC = "power_pc"
    CSI_FF = "csi_ff"
    CSI_PC = "csi_pc"
    FULL_MIMO = "full_mimo"


class Precoder(str, Enum):
    DPC_EQ2 = "dpc"
    ZF = "zf"


class LossMode(str, Enum):
    IGNORE = "ignore"            # losses precompensated, SNR untouched
    DIVIDE_RHO = "divide_rho"    # radiated SNR is rho / L
    PA_COMPENSATE = "pa_comp"    # SNR untouched, PAs pay the loss (energy side)


@dataclass(frozen=True)
class ScenarioConfig:
    """One experiment point (or sweep, when ``m_sweep`` is given)."""

    n: int
    m: int
    k: int
    rho_db: float
    architecture: ArchitectureKind = ArchitectureKind.FF_MIN_LOSS
    selection_mode: SelectionMode = SelectionMode.POWER_FF
    precoder: Precoder = Precoder.DPC_EQ2
    loss_mode: LossMode = LossMode.IGNORE
    eta_coh: int = 0             # 0 disables overhead accounting (prelog 1)
    dl_fraction: float = 0.7
    trials: int = 2000
    seed: int = 1234
    m_sweep: tuple[int, ...] = ()
    scenario_id: str = "adhoc"

    def __post_init__(self) -> None:
        if not 1 <= self.k:
            raise ValueError("k must be positive")
        if self.selection_mode in (SelectionMode.POWER_PC, SelectionMode.CSI_PC):
            if self.architecture != ArchitectureKind.PARTIAL:
                raise ValueError("partially-connected selection needs the PARTIAL architecture")
        if self.selection_mode == SelectionMode.FULL_MIMO and self.loss_mode == LossMode.DIVIDE_RHO:
            # full MIMO has no switching fabric, hence no loss to divide by
            object.__setattr__(self, "loss_mode", LossMode.IGNORE)
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if not self.m_sweep and not 1 <= self.m <= self.n:
            raise ValueError("need 1 <= m <= n")

    def sweep_values(self) -> tuple[int, ...]:
        return self.m_sweep if self.m_sweep else (self.m,)

    def to_json_dict(self) -> dict:
        d = asdict(self)
        for key in ("architecture", "selection_mode", "precoder", "loss_mode"):
            d[key] = d[key].value
        d["m_sweep"] = list(self.m_sweep)
        return d
