"""Analytical approximations of ergodic capacity under norm-based selection.

The post-selection channel is approximated by an i.i.d. matrix whose columns
are rescaled by expected ordered column-norm powers.  For uncorrelated
Rayleigh fading the squared column norms are i.i.d. Gamma(K, 1), and the
expectation of the t-th smallest of N such norms is evaluated by Gauss-Jacobi
quadrature after mapping [0, c] onto [-1, 1] with y = c(x+1)^2/4.

Under partial connectivity the selected norms are random: which combination
of ordered norms survives the per-group budgets depends only on how the norm
ranks fall across the groups, and every assignment of ranks to antennas is
equally likely.  Enumerating those assignments yields the exact distribution
over selected rank sets, from which a single averaged power scaling or a
mixture over rank sets approximates the ergodic capacity.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import Literal

import numpy as np
from scipy.special import gammainc, gammaln, roots_jacobi, xlogy

from .channel import STREAM_APPROX_G, RngStreamSpec
from .connectivity import ConnectivityMap


@dataclass(frozen=True)
class OrderStatSpec:
    """Quadrature configuration for ordered-norm moments of an N-antenna, K-user system."""

    n: int
    k: int
    c: float = 100.0
    quadrature_nodes: int = 200

    def __post_init__(self) -> None:
        if self.n < 1 or self.k < 1:
            raise ValueError("n and k must be positive")
        if self.c <= 0:
            raise ValueError("substitution constant c must be positive")
        if self.quadrature_nodes < 16:
            raise ValueError("need at least 16 quadrature nodes")


@dataclass(frozen=True)
class PowerScaling:
    """Averaged post-selection power factor, optionally with per-rank-set values."""

    value: float
    per_set: tuple[float, ...] | None = None
    per_set_probs: tuple[float, ...] | None = None


@dataclass(frozen=True)
class RankSetDistribution:
    """Distribution over the selected rank sets (rank 1 = largest norm).

    ``fractions`` carries exact probabilities when the distribution was
    enumerated; Monte Carlo fallback leaves it ``None``.
    """

    sets: tuple[tuple[int, ...], ...]
    probs: tuple[float, ...]
    fractions: tuple[Fraction, ...] | None
    exact: bool

    def prob_of(self, ranks: tuple[int, ...]) -> float:
        key = tuple(sorted(ranks))
        for s, p in zip(self.sets, self.probs):
            if s == key:
                return p
        return 0.0


@lru_cache(maxsize=None)
def _jacobi_rule(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    # weight (1 - x)^0 (1 + x)^1 absorbs the (x + 1) factor of the substitution
    x, w = roots_jacobi(nodes, 0.0, 1.0)
    return x, w


@lru_cache(maxsize=None)
def _moment_cached(n: int, k: int, t: int, c: float, nodes: int) -> float:
    x, w = _jacobi_rule(nodes)
    y = c * (x + 1.0) ** 2 / 4.0
    cdf = gammainc(k, y)
    log_f = (
        xlogy(t - 1, cdf)
        + xlogy(n - t, 1.0 - cdf)
        - y
        + k * np.log(y)
    )
    log_coef = gammaln(n + 1) - gammaln(t) - gammaln(n - t + 1) - gammaln(k)
    value = (c / 2.0) * float(np.sum(w * np.exp(log_coef + log_f)))
    if not np.isfinite(value):
        raise ArithmeticError(
            f"ordered-norm moment overflowed for n={n}, k={k}, t={t}"
        )
    return value


def moment_ordered_norm(t: int, spec: OrderStatSpec) -> float:
    """Expected value of the t-th smallest of N i.i.d. Gamma(K, 1) column norms.

    The density of the t-th order statistic multiplies the Gamma density by
    the binomial factor N! / ((t-1)! (N-t)!) and CDF powers; the combinatorial
    prefactor is evaluated in log space so large N stay finite.
    """
    if not 1 <= t <= spec.n:
        raise ValueError(f"order index t={t} outside 1..{spec.n}")
    return _moment_cached(spec.n, spec.k, t, spec.c, spec.quadrature_nodes)


def power_scaling_ff(n: int, m: int, spec: OrderStatSpec) -> PowerScaling:
    """Average of the top-M ordered-norm moments, normalized by K."""
    if n != spec.n:
        raise ValueError("spec.n must match the antenna count")
    if not 1 <= m <= n:
        raise ValueError("need 1 <= m <= n")
    total = sum(moment_ordered_norm(n - i + 1, spec) for i in range(1, m + 1))
    return PowerScaling(value=total / (spec.k * m))


def _exact_rank_sets(
    sizes: tuple[int, ...], budgets: tuple[int, ...], n: int
) -> tuple[Counter, int]:
    """Enumerate rank-to-group assignments; count each resulting selected set.

    All assignments of the N rank labels to groups of the given sizes are
    equally likely, so the probability of a selected set is its assignment
    count over the multinomial total.
    """
    counts: Counter = Counter()

    def recurse(gi: int, remaining: tuple[int, ...], selected: tuple[int, ...]) -> None:
        if gi == len(sizes):
            counts[tuple(sorted(selected))] += 1
            return
        for combo in combinations(remaining, sizes[gi]):
            # combinations preserves ascending order: the first `budget`
            # entries are the smallest rank labels, i.e. the largest norms
            picked = combo[: budgets[gi]]
            rest = tuple(r for r in remaining if r not in set(combo))
            recurse(gi + 1, rest, selected + picked)

    recurse(0, tuple(range(1, n + 1)), ())
    total = sum(counts.values())
    return counts, total


def _mc_rank_sets(
    cmap: ConnectivityMap, samples: int, rng: np.random.Generator
) -> tuple[Counter, int]:
    n = cmap.n_antennas
    u = rng.random((samples, n))
    order = np.argsort(-u, axis=1, kind="stable")
    ranks = np.empty((samples, n), dtype=np.int64)
    np.put_along_axis(ranks, order, np.arange(1, n + 1)[None, :], axis=1)
    parts = []
    for group, budget in zip(cmap.antenna_groups, cmap.budgets):
        cols = np.array(group) - 1
        sub = ranks[:, cols]
        parts.append(np.partition(sub, budget - 1, axis=1)[:, :budget])
    sel = np.sort(np.concatenate(parts, axis=1), axis=1)
    uniq, counts = np.unique(sel, axis=0, return_counts=True)
    counter = Counter({tuple(int(v) for v in row): int(c) for row, c in zip(uniq, counts)})
    return counter, samples


def rank_set_distribution(
    cmap: ConnectivityMap,
    enumeration_limit: int = 12,
    mc_samples: int = 1_000_000,
    seed: int = 0,
) -> RankSetDistribution:
    """Distribution of the rank sets a power-based selection can produce.

    Exact enumeration is used up to ``enumeration_limit`` antennas; beyond
    that a Monte Carlo over random rank assignments is used and the result is
    flagged as inexact.
    """
    exact = cmap.n_antennas <= enumeration_limit
    if exact:
        sizes = tuple(len(g) for g in cmap.antenna_groups)
        counts, total = _exact_rank_sets(sizes, cmap.budgets, cmap.n_antennas)
    else:
        rng = RngStreamSpec(seed, STREAM_APPROX_G).generator(0)
        counts, total = _mc_rank_sets(cmap, mc_samples, rng)

    sets = tuple(sorted(counts))
    if exact:
        fractions = tuple(Fraction(counts[s], total) for s in sets)
        probs = tuple(float(f) for f in fractions)
    else:
        fractions = None
        probs = tuple(counts[s] / total for s in sets)
    return RankSetDistribution(sets=sets, probs=probs, fractions=fractions, exact=exact)


def power_scaling_pc(
    cmap: ConnectivityMap,
    spec: OrderStatSpec,
    dist: RankSetDistribution | None = None,
) -> PowerScaling:
    """Probability-weighted power factor under partial connectivity.

    Each selectable rank set gets its own factor (mean moment of its ranks
    over K); the headline value averages those with the selection
    probabilities.  Ranks count from the largest norm, so rank r maps to the
    (N - r + 1)-th smallest order statistic.
    """
    if cmap.n_antennas != spec.n:
        raise ValueError("spec.n must match the map's antenna count")
    if dist is None:
        dist = rank_set_distribution(cmap)
    m = cmap.n_chains
    per_set = []
    for ranks in dist.sets:
        total = sum(moment_ordered_norm(spec.n - r + 1, spec) for r in ranks)
        per_set.append(total / (spec.k * m))
    value = float(np.dot(per_set, dist.probs))
    return PowerScaling(value=value, per_set=tuple(per_set), per_set_probs=dist.probs)


def _capacity_samples(
    scalings: np.ndarray, k: int, m: int, rho: float, g_trials: int, seed: int
) -> np.ndarray:
    """Per-draw log-det capacities for each scaling, shape (g_trials, len(scalings)).

    The Gram spectrum of each i.i.d. draw is computed once and reused across
    scalings, which also makes mixture and single estimates share draws.
    """
    rng = RngStreamSpec(seed, STREAM_APPROX_G).generator(0)
    g = (rng.standard_normal((g_trials, k, m)) + 1j * rng.standard_normal((g_trials, k, m))) / np.sqrt(2.0)
    gram = g @ g.conj().transpose(0, 2, 1)
    eig = np.linalg.eigvalsh(gram)  # (g_trials, k), nonnegative
    return np.sum(np.log2(1.0 + rho * scalings[None, :, None] * eig[:, None, :]), axis=2)


def approx_capacity(
    ps: PowerScaling,
    k: int,
    m: int,
    rho: float,
    mode: Literal["single", "mixture"] = "single",
    g_trials: int = 5000,
    seed: int = 0,
) -> float:
    """Monte Carlo estimate of the scaled-i.i.d. ergodic capacity approximation.

    ``single`` evaluates E[log2 det(I + rho * value * G G^H)] with the
    averaged factor; ``mixture`` weights per-rank-set capacities by their
    selection probabilities instead of averaging the factors first.
    """
    mean, _ = approx_capacity_stats(ps, k, m, rho, mode, g_trials, seed)
    return mean


def approx_capacity_stats(
    ps: PowerScaling,
    k: int,
    m: int,
    rho: float,
    mode: Literal["single", "mixture"] = "single",
    g_trials: int = 5000,
    seed: int = 0,
) -> tuple[float, float]:
    """Like :func:`approx_capacity` but also returns the standard error."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    if g_trials < 1:
        raise ValueError("need at least one draw")
    if mode == "single":
        vals = _capacity_samples(np.array([ps.value]), k, m, rho, g_trials, seed)[:, 0]
    elif mode == "mixture":
        if ps.per_set is None or ps.per_set_probs is None:
            raise ValueError("mixture mode needs per-set scalings and probabilities")
        caps = _capacity_samples(np.asarray(ps.per_set), k, m, rho, g_trials, seed)
        vals = caps @ np.asarray(ps.per_set_probs)
    else:
        raise ValueError(f"unknown mode: {mode}")
    stderr = float(np.std(vals, ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return float(np.mean(vals)), stderr
