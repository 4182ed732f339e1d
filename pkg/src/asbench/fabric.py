"""Synthesis of RF switching fabrics and their critical-path insertion loss.

A switching matrix that connects M RF chains to N antenna ports is built from
two cascaded stages of basic single-pole multi-throw (SPXT) switches: one
stage fanning out each RF chain and one stage in front of each antenna port.
Given a catalog of basic switches, a stage that must realize T throws is
implemented by concatenating basic switches, greedily consuming the largest
throw count first.  The insertion loss of the fabric is the loss accumulated
along the worst input-output path (the critical path).

Four architectures are supported:

* ``FF_FULL``      - fully flexible, every chain reaches every antenna.
* ``FF_MIN_CONN``  - fully flexible with the minimum number of ports per stage.
* ``FF_MIN_LOSS``  - fully flexible, stage sizes relaxed upward to minimize loss.
* ``PARTIAL``      - partially connected, each antenna reachable by at most
  one (or two) chains; dramatically fewer switches at the cost of restricting
  which antenna subsets can be active simultaneously.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from math import ceil
from pathlib import Path
from typing import Iterator


@dataclass(frozen=True)
class SwitchEntry:
    """One basic switch model: throw count and per-switch insertion loss in dB."""

    throws: int
    loss_db: float


@dataclass(frozen=True)
class SwitchCatalog:
    """Inventory of basic switches, ordered by strictly decreasing throw count."""

    entries: tuple[SwitchEntry, ...]

    def __post_init__(self) -> None:
        if not self.entries:
            raise ValueError("switch catalog must not be empty")
        throws = [e.throws for e in self.entries]
        if min(throws) < 2:
            raise ValueError("every switch must have at least 2 throws")
        if any(b >= a for a, b in zip(throws, throws[1:])):
            raise ValueError("throw counts must be strictly decreasing")
        if any(e.loss_db < 0 for e in self.entries):
            raise ValueError("insertion losses must be nonnegative")

    @property
    def throws(self) -> tuple[int, ...]:
        return tuple(e.throws for e in self.entries)

    @property
    def losses_db(self) -> tuple[float, ...]:
        return tuple(e.loss_db for e in self.entries)


#: SP4T / SP3T / SP2T parts with typical sub-6 GHz insertion losses.
DEFAULT_CATALOG = SwitchCatalog(
    (SwitchEntry(4, 0.45), SwitchEntry(3, 0.45), SwitchEntry(2, 0.25))
)


def load_catalog(path: str | Path | None) -> SwitchCatalog:
    """Load a catalog from a JSON array of ``{"throws": int, "loss_db": float}``.

    Entries are sorted by decreasing throw count.  ``None`` returns the
    default SP4T/SP3T/SP2T catalog.
    """
    if path is None:
        return DEFAULT_CATALOG
    raw = json.loads(Path(path).read_text())
    entries = sorted(
        (SwitchEntry(int(d["throws"]), float(d["loss_db"])) for d in raw),
        key=lambda e: -e.throws,
    )
    return SwitchCatalog(tuple(entries))


class ArchitectureKind(str, Enum):
    """The supported switching-matrix architectures."""

    FF_FULL = "ff_full"
    FF_MIN_CONN = "ff_min_conn"
    FF_MIN_LOSS = "ff_min_loss"
    PARTIAL = "partial"


@dataclass(frozen=True)
class StageDecomposition:
    """Greedy decomposition of one switching stage into basic switches.

    ``q_trace[j]`` is the residual throw count that remains to be implemented
    when the j-th catalog entry is considered (0 once nothing remains), and
    ``switch_counts[j]`` is how many cascaded switches of that entry the
    critical path crosses.  ``realized_throws`` is the requested throw count
    rounded up to the nearest value that factors completely over the catalog.
    """

    q_trace: tuple[int, ...]
    switch_counts: tuple[int, ...]
    realized_throws: int


@dataclass(frozen=True)
class FabricDesign:
    """A synthesized switching fabric and its critical-path loss."""

    kind: ArchitectureKind
    n_antennas: int
    n_chains: int
    t_rf: int
    t_an: int
    rf_stage: StageDecomposition
    an_stage: StageDecomposition
    total_loss_db: float


def _greedy_factor(t: int, throws: tuple[int, ...]) -> tuple[list[int], list[int], int]:
    """Largest-throw-first division of ``t``: (counts, q_trace, residual)."""
    q = t
    counts: list[int] = []
    trace: list[int] = []
    for b in throws:
        trace.append(q if q > 1 else 0)
        s = 0
        while q > 1 and q % b == 0:
            q //= b
            s += 1
        counts.append(s)
    return counts, trace, q


@lru_cache(maxsize=None)
def _round_up_cached(t: int, throws: tuple[int, ...]) -> int:
    tp = t
    while _greedy_factor(tp, throws)[2] != 1:
        tp += 1
    return tp


def round_up_factorizable(t: int, catalog: SwitchCatalog = DEFAULT_CATALOG) -> int:
    """Smallest integer >= ``t`` that factors completely over the catalog throws.

    ``1`` is returned unchanged and means the stage needs no switch at all.
    The search always terminates: every power of the largest throw factors.
    """
    if t < 1:
        raise ValueError("throw count must be positive")
    return _round_up_cached(int(t), catalog.throws)


def _factorizable_values(lo: int, hi: int, catalog: SwitchCatalog) -> Iterator[int]:
    """All factorizable throw counts in [lo, hi], ascending."""
    t = round_up_factorizable(max(lo, 1), catalog)
    while t <= hi:
        yield t
        t = round_up_factorizable(t + 1, catalog)


def decompose_stage(t: int, catalog: SwitchCatalog = DEFAULT_CATALOG) -> StageDecomposition:
    """Decompose one stage of ``t`` throws into cascaded basic switches.

    The requested count is first rounded up to a factorizable value; the
    factorization then consumes the largest catalog throw as many times as it
    divides the residual before moving to the next entry, so the residual
    after the last entry is always 1.
    """
    realized = round_up_factorizable(t, catalog)
    counts, trace, residual = _greedy_factor(realized, catalog.throws)
    assert residual == 1
    return StageDecomposition(tuple(trace), tuple(counts), realized)


def _stage_loss_frac(stage: StageDecomposition, catalog: SwitchCatalog) -> Fraction:
    # exact decimal accumulation so e.g. 7 switches at 0.45 dB plus one at
    # 0.25 dB total exactly 3.4 dB instead of a float-sum neighbour of it
    return sum(
        (s * Fraction(str(l)) for s, l in zip(stage.switch_counts, catalog.losses_db)),
        start=Fraction(0),
    )


def _stage_loss_db(stage: StageDecomposition, catalog: SwitchCatalog) -> float:
    return float(_stage_loss_frac(stage, catalog))


def critical_path_loss(design: FabricDesign, catalog: SwitchCatalog = DEFAULT_CATALOG) -> float:
    """Total dB loss of the worst input-output path through both stages."""
    return float(
        _stage_loss_frac(design.rf_stage, catalog) + _stage_loss_frac(design.an_stage, catalog)
    )


def _min_loss_throws(n: int, m: int, catalog: SwitchCatalog) -> tuple[int, int]:
    """Search factorizable (t_rf, t_an) pairs minimizing the two-stage loss.

    The RF stage may use any factorizable value in [N-M+1, 4(N-M+1)] and the
    antenna stage any factorizable value in [min(M, t_rf), 4 min(M, t_rf)];
    beyond 4x the lower bound a design necessarily crosses at least one extra
    switch, so the loss cannot improve.  Ties break toward the smallest
    (t_rf, t_an) pair.
    """
    lo_rf = n - m + 1
    best: tuple[Fraction, int, int] | None = None
    for t_rf in _factorizable_values(lo_rf, 4 * lo_rf, catalog):
        rf_loss = _stage_loss_frac(decompose_stage(t_rf, catalog), catalog)
        lo_an = min(m, t_rf)
        for t_an in _factorizable_values(lo_an, 4 * lo_an, catalog):
            loss = rf_loss + _stage_loss_frac(decompose_stage(t_an, catalog), catalog)
            key = (loss, t_rf, t_an)
            if best is None or key < best:
                best = key
    assert best is not None
    return best[1], best[2]


def design_fabric(
    n: int,
    m: int,
    kind: ArchitectureKind,
    catalog: SwitchCatalog = DEFAULT_CATALOG,
) -> FabricDesign:
    """Synthesize a switching fabric for ``m`` RF chains feeding ``n`` antennas.

    Per-architecture stage throw counts:

    * ``FF_FULL``:     t_rf = N, t_an = M.
    * ``FF_MIN_CONN``: t_rf = N - M + 1, t_an = min(M, t_rf).
    * ``FF_MIN_LOSS``: joint search over factorizable pairs relaxing the
      minimum-connectivity bounds upward.
    * ``PARTIAL``:     t_rf = ceil(N/M); t_an = 1 when each antenna can be
      hardwired to a single chain (floor(N/M) >= 2, or M = N where no
      switching is needed at all), else 2.

    A requested throw count of 1 yields a degenerate stage with no switches
    and zero loss.
    """
    if m < 1 or m > n:
        raise ValueError(f"invalid dimensions: need 1 <= m <= n, got n={n}, m={m}")
    if kind == ArchitectureKind.FF_FULL:
        t_rf_req, t_an_req = n, m
    elif kind == ArchitectureKind.FF_MIN_CONN:
        t_rf_req = n - m + 1
        t_an_req = min(m, round_up_factorizable(t_rf_req, catalog))
    elif kind == ArchitectureKind.FF_MIN_LOSS:
        t_rf_req, t_an_req = _min_loss_throws(n, m, catalog)
    elif kind == ArchitectureKind.PARTIAL:
        t_rf_req = ceil(n / m)
        t_an_req = 1 if (n // m >= 2 or m == n) else 2
    else:  # pragma: no cover - exhaustive enum
        raise ValueError(f"unknown architecture kind: {kind}")

    rf_stage = decompose_stage(t_rf_req, catalog)
    an_stage = decompose_stage(t_an_req, catalog)
    loss = float(_stage_loss_frac(rf_stage, catalog) + _stage_loss_frac(an_stage, catalog))
    return FabricDesign(
        kind=kind,
        n_antennas=n,
        n_chains=m,
        t_rf=rf_stage.realized_throws,
        t_an=an_stage.realized_throws,
        rf_stage=rf_stage,
        an_stage=an_stage,
        total_loss_db=loss,
    )
