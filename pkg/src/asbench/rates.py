"""Instantaneous and ergodic sum rates with TDD overhead bookkeeping.

A coherence block of ``eta_coh`` symbols is split into training, uplink data
and downlink data; only the downlink fraction multiplies spectral efficiency
(the prelog).  Instantaneous-CSI selection needs K * ceil(N/M) training
symbols because only M antenna ports can be sounded at a time, whereas
power-based selection gets by with the K pilots of a full-CSI system.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from math import ceil
from typing import TYPE_CHECKING

import numpy as np

from .selection import SelectionMask, PowerAllocation

if TYPE_CHECKING:  # pragma: no cover
    from .scenarios import ScenarioConfig


class TrainingMode(str, Enum):
    INSTANTANEOUS = "instantaneous"
    POWER_BASED = "power_based"


@dataclass(frozen=True)
class FrameConfig:
    """Symbol budget of one coherence block."""

    eta_coh: int
    eta_tr: int
    eta_ul: int
    eta_dl: int
    dl_fraction: float

    def __post_init__(self) -> None:
        if min(self.eta_coh, self.eta_tr, self.eta_ul, self.eta_dl) < 0:
            raise ValueError("frame fields must be nonnegative")
        if self.eta_dl + self.eta_ul + self.eta_tr > self.eta_coh:
            raise ValueError("frame overflows the coherence block")

    @property
    def prelog(self) -> float:
        """Fraction of the block carrying downlink data."""
        return self.eta_dl / self.eta_coh

    @property
    def feasible(self) -> bool:
        return self.eta_dl > 0


#: frame of a system that ignores acquisition overheads entirely
NO_OVERHEAD = FrameConfig(eta_coh=1, eta_tr=0, eta_ul=0, eta_dl=1, dl_fraction=1.0)


@dataclass(frozen=True)
class RateSample:
    """One rate figure in bits/s/Hz, with the mask that produced it."""

    sum_rate: float
    mask: SelectionMask | None
    prelog: float
    meta: dict | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.sum_rate < 0:
            raise ValueError("rates are nonnegative")


def training_overhead(n: int, m: int, k: int, mode: TrainingMode) -> int:
    """Training symbols needed per coherence block.

    Multiplexed sounding of all N ports through M chains costs K * ceil(N/M);
    power-based selection (and full MIMO, where ceil(N/M) = 1) costs only K.
    """
    if m > n or m < 1:
        raise ValueError("need 1 <= m <= n")
    if mode == TrainingMode.POWER_BASED:
        return k
    return k * ceil(n / m)


def frame_split(eta_coh: int, eta_tr: int, dl_fraction: float) -> FrameConfig:
    """Split the block after training: eta_dl = ceil(dl_fraction * remainder).

    When training swallows the whole block the frame is infeasible: the
    downlink allocation collapses to zero (``feasible`` is False) and any
    rate computed against it is zero.
    """
    if not 0 < dl_fraction <= 1:
        raise ValueError("dl_fraction must be in (0, 1]")
    if eta_tr >= eta_coh:
        return FrameConfig(eta_coh=eta_coh, eta_tr=eta_coh, eta_ul=0, eta_dl=0,
                           dl_fraction=dl_fraction)
    rest = eta_coh - eta_tr
    eta_dl = min(ceil(dl_fraction * rest), rest)
    return FrameConfig(eta_coh=eta_coh, eta_tr=eta_tr, eta_ul=rest - eta_dl,
                       eta_dl=eta_dl, dl_fraction=dl_fraction)


def _logdet_gram(b: np.ndarray) -> np.ndarray:
    """log2 det of stacked Hermitian positive-definite matrices via Cholesky."""
    chol = np.linalg.cholesky(b)
    diag = np.abs(np.diagonal(chol, axis1=1, axis2=2))
    return 2.0 * np.sum(np.log2(diag), axis=1)


def sum_capacity_batch(h_sel: np.ndarray, p: np.ndarray, rho_eff: float, prelog: float) -> np.ndarray:
    """Batched log-det sum capacity: prelog * log2 det(I + rho P H H^H)."""
    k = h_sel.shape[1]
    sq = np.sqrt(np.maximum(p, 0.0))
    hw = sq[:, :, None] * h_sel
    b = np.eye(k) + rho_eff * hw @ hw.conj().transpose(0, 2, 1)
    return prelog * _logdet_gram(b)


def sum_capacity(h_sel: np.ndarray, p: PowerAllocation, rho_eff: float, prelog: float = 1.0) -> RateSample:
    """Downlink sum capacity of the selected K x M channel under allocation ``p``.

    Evaluated as log2 det(I + rho P^(1/2) H H^H P^(1/2)), which is the same
    determinant in Hermitian positive-definite form.
    """
    if rho_eff <= 0:
        raise ValueError("rho_eff must be positive")
    h_sel = np.asarray(h_sel)
    rate = float(sum_capacity_batch(h_sel[None], np.asarray(p.p)[None], rho_eff, prelog)[0])
    return RateSample(sum_rate=rate, mask=None, prelog=prelog)


def zf_sum_rate_batch(h_sel: np.ndarray, rho_eff: float, prelog: float) -> np.ndarray:
    """Batched zero-forcing sum rate with equal per-user power.

    Per-user SNR is rho / [(H H^H)^-1]_kk; singular Grams contribute zero
    rate for the affected users.
    """
    gram = h_sel @ h_sel.conj().transpose(0, 2, 1)
    rates = np.zeros(h_sel.shape[0])
    ok = np.ones(h_sel.shape[0], dtype=bool)
    inv_diag = np.empty((h_sel.shape[0], h_sel.shape[1]))
    for i in range(h_sel.shape[0]):  # per-trial guard against rank deficiency
        try:
            inv_diag[i] = np.diagonal(np.linalg.inv(gram[i])).real
        except np.linalg.LinAlgError:
            ok[i] = False
    snr = np.where(inv_diag > 0, rho_eff / np.maximum(inv_diag, 1e-300), 0.0)
    rates = prelog * np.sum(np.log2(1.0 + snr), axis=1)
    rates[~ok] = 0.0
    return rates


def zf_sum_rate(h_sel: np.ndarray, rho_eff: float, prelog: float = 1.0) -> RateSample:
    """Zero-forcing sum rate of the selected channel (equal per-user power)."""
    h_sel = np.asarray(h_sel)
    k, m = h_sel.shape
    if k > m:
        raise ValueError("zero-forcing needs at least as many chains as users")
    gram = h_sel @ h_sel.conj().T
    meta = None
    if np.linalg.matrix_rank(gram) < k:
        meta = {"rank_deficient": True}
    rate = float(zf_sum_rate_batch(h_sel[None], rho_eff, prelog)[0])
    return RateSample(sum_rate=rate, mask=None, prelog=prelog, meta=meta)


def ergodic_rate(scenario: "ScenarioConfig") -> tuple[float, float]:
    """Monte Carlo mean and standard error of the scenario's sum rate.

    Draws ``scenario.trials`` channels, runs the configured selection and
    precoder per trial, and applies the scenario's loss mode (dividing the
    SNR by the fabric's linear loss when requested).  Aborts if more than 1%
    of trials produce non-finite rates.
    """
    from .experiments import run_point  # deferred to avoid a module cycle

    res = run_point(scenario)
    return res.mean, res.stderr
