"""Base-station power consumption and downlink energy efficiency.

The consumption model charges the PAs (which must transmit harder to push
through the switching fabric's insertion loss), the per-chain RF circuitry,
the data converters (duty-cycled: ADCs run during training, DACs and PAs
during downlink data), the DSP data interface and the baseband processing
load.  Energy efficiency is delivered downlink bits per Joule.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

from .rates import FrameConfig
from .units import db_to_linear, dbm_to_watts


@dataclass(frozen=True)
class EnergyParams:
    """Hardware power figures for a sub-6 GHz macro base station."""

    p_adc: float = 0.233          # W per dual-channel ADC
    p_dac: float = 0.232          # W per dual-channel DAC
    p_int_per_gbps: float = 0.025  # W/Gbps, DSP data interface (LVDS class)
    p_cir: float = 1.0            # W per RF chain, excluding converters
    p_lo: float = 2.0             # W, shared local oscillator
    inv_pc_flops_per_mw: float = 12.8e6  # flops per mW of DSP power
    kappa: float = 0.39           # PA efficiency
    p_t_dbm: float = 46.0         # total radiated power target
    b_adc: int = 12               # bits
    b_dac: int = 14               # bits
    s_adc: float = 0.125          # GSPS per I/Q port
    s_dac: float = 0.125          # GSPS per I/Q port
    n_coh: int = 1200             # coherence blocks per second
    bandwidth_hz: float = 20e6
    rb_hz: float = 180e3

    def __post_init__(self) -> None:
        if not 0 < self.kappa <= 1:
            raise ValueError("PA efficiency must be in (0, 1]")
        for name in ("p_adc", "p_dac", "p_int_per_gbps", "p_cir", "p_lo",
                     "inv_pc_flops_per_mw", "bandwidth_hz", "rb_hz"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def load_energy_params(path: str | Path | None) -> EnergyParams:
    """Read parameters from a JSON object; missing keys keep their defaults."""
    if path is None:
        return EnergyParams()
    raw = json.loads(Path(path).read_text())
    return replace(EnergyParams(), **raw)


@dataclass(frozen=True)
class EnergyReport:
    """Power breakdown in W plus the resulting bits/Joule figure."""

    p_pa: float
    p_rf: float
    p_conv: float
    p_int: float
    p_bb: float
    total: float
    r_sum_bps: float = 0.0
    xi: float = 0.0


def interface_power(params: EnergyParams) -> float:
    """DSP data-interface power per RF chain: p_int * (2 S b)_ADC+DAC in Gbps."""
    gbps = 2.0 * params.s_adc * params.b_adc + 2.0 * params.s_dac * params.b_dac
    return params.p_int_per_gbps * gbps


def baseband_flops(n_coh: int, eta_tr: int, eta_dl: int, m: int, k: int) -> float:
    """Baseband load in flops/s: pilot correlation plus downlink precoding."""
    c_corr = 8.0 * n_coh * eta_tr * m * k
    c_data = n_coh * (4.0 * k * k * m + eta_dl * 8.0 * k * m)
    return c_corr + c_data


def total_power(
    m: int,
    loss_db: float,
    frame: FrameConfig,
    params: EnergyParams = EnergyParams(),
    k: int | None = None,
    p_t_scale: float = 1.0,
) -> EnergyReport:
    """Total consumption for ``m`` active chains behind a fabric of ``loss_db``.

    The switching fabric sits after the PAs, so the PAs output
    P_t * 10^(loss/10) (scaled by ``p_t_scale`` for per-resource-block
    accounting) during the downlink fraction of the block.  ADCs are active
    during training only, DACs during downlink only; circuitry and the LO are
    always on.  ``k`` defaults to ``m`` for the baseband load.
    """
    if loss_db < 0:
        raise ValueError("loss must be nonnegative")
    k = m if k is None else k
    duty_dl = frame.eta_dl / frame.eta_coh
    duty_tr = frame.eta_tr / frame.eta_coh
    p_t = dbm_to_watts(params.p_t_dbm) * p_t_scale
    p_pa = p_t * db_to_linear(loss_db) / params.kappa * duty_dl
    p_rf = m * params.p_cir + params.p_lo
    p_conv = m * (params.p_adc * duty_tr + params.p_dac * duty_dl)
    p_int = m * interface_power(params)
    flops = baseband_flops(params.n_coh, frame.eta_tr, frame.eta_dl, m, k)
    p_bb = flops / (params.inv_pc_flops_per_mw * 1e3)
    total = p_pa + p_rf + p_conv + p_int + p_bb
    return EnergyReport(p_pa=p_pa, p_rf=p_rf, p_conv=p_conv, p_int=p_int,
                        p_bb=p_bb, total=total)


def energy_efficiency(
    rate_se_bits_per_s_per_hz: float,
    bandwidth_for_rate_hz: float,
    report: EnergyReport,
) -> EnergyReport:
    """Complete a power report with throughput and bits/Joule."""
    if rate_se_bits_per_s_per_hz < 0:
        raise ValueError("rate must be nonnegative")
    if report.total <= 0:
        raise ValueError("total power must be positive")
    r_sum = rate_se_bits_per_s_per_hz * bandwidth_for_rate_hz
    return replace(report, r_sum_bps=r_sum, xi=r_sum / report.total)
