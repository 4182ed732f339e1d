"""Random channel generation with reproducible per-trial substreams."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

#: substream tags so different consumers of one master seed never collide
STREAM_CHANNEL = 0
STREAM_APPROX_G = 1


@dataclass(frozen=True)
class RngStreamSpec:
    """Counter-based substream derivation from a single master seed.

    ``generator(trial)`` is a pure function of (master_seed, tag, trial), so
    trials can run in any order, or in parallel, and still reproduce
    bit-identical draws.
    """

    master_seed: int
    tag: int = STREAM_CHANNEL

    def generator(self, trial: int) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence((self.master_seed, self.tag, trial))
        )


class CovarianceSpec:
    """Receive-side covariance: identity (uncorrelated Rayleigh) or explicit PSD matrix.

    The Hermitian square root is computed once and cached; eigenvalues below
    -1e-10 are rejected, tiny negatives are clamped to zero.
    """

    def __init__(self, matrix: np.ndarray | None = None):
        self.matrix = None if matrix is None else np.asarray(matrix, dtype=complex)
        self._sqrt: np.ndarray | None = None

    @property
    def is_identity(self) -> bool:
        return self.matrix is None

    def sqrt(self) -> np.ndarray:
        if self.matrix is None:
            raise ValueError("identity covariance has no explicit square root")
        if self._sqrt is None:
            r = self.matrix
            if not np.allclose(r, r.conj().T):
                raise ValueError("covariance matrix must be Hermitian")
            w, v = np.linalg.eigh(r)
            if np.min(w) < -1e-10:
                raise ValueError(f"covariance matrix is not PSD (min eigenvalue {np.min(w):.3e})")
            w = np.clip(w, 0.0, None)
            self._sqrt = (v * np.sqrt(w)) @ v.conj().T
        return self._sqrt


IDENTITY = CovarianceSpec()


@dataclass(frozen=True)
class ChannelMatrix:
    """One K x N downlink channel realization."""

    h: np.ndarray
    k_users: int = field(init=False)
    n_antennas: int = field(init=False)

    def __post_init__(self) -> None:
        if self.h.ndim != 2:
            raise ValueError("channel must be a 2-D matrix")
        if not np.all(np.isfinite(self.h)):
            raise ValueError("channel entries must be finite")
        object.__setattr__(self, "k_users", self.h.shape[0])
        object.__setattr__(self, "n_antennas", self.h.shape[1])


def _draw_iid(rng: np.random.Generator, k: int, n: int) -> np.ndarray:
    # unit-variance circularly-symmetric complex normals
    return (rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n))) / np.sqrt(2.0)


def draw_channel(
    k: int,
    n: int,
    cov: CovarianceSpec,
    stream: RngStreamSpec,
    trial: int,
) -> ChannelMatrix:
    """Draw H for one trial: H = R^(1/2) F with F i.i.d. complex normal."""
    if k < 1 or n < 1:
        raise ValueError("channel dimensions must be positive")
    f = _draw_iid(stream.generator(trial), k, n)
    if cov.is_identity:
        return ChannelMatrix(f)
    return ChannelMatrix(cov.sqrt() @ f)


def draw_channel_batch(
    k: int,
    n: int,
    cov: CovarianceSpec,
    stream: RngStreamSpec,
    trials: range,
) -> np.ndarray:
    """Stack of per-trial draws, shape (len(trials), K, N).

    Each trial uses its own substream, so the stack equals what repeated
    ``draw_channel`` calls would produce.
    """
    out = np.empty((len(trials), k, n), dtype=complex)
    sqrt_r = None if cov.is_identity else cov.sqrt()
    for row, trial in enumerate(trials):
        f = _draw_iid(stream.generator(trial), k, n)
        out[row] = f if sqrt_r is None else sqrt_r @ f
    return out


def column_powers(channel: ChannelMatrix) -> np.ndarray:
    """Per-antenna channel power: squared Euclidean norm of each column of H."""
    return np.sum(np.abs(channel.h) ** 2, axis=0)


def dump_channel_csv(channel: ChannelMatrix, path: str | Path) -> None:
    """Write a realization row-major as "re,im" pairs for external cross-checks."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in channel.h:
            cells: list[str] = []
            for z in row:
                cells.extend((repr(float(z.real)), repr(float(z.imag))))
            writer.writerow(cells)
