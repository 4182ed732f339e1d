"""Antenna subset selection and downlink user power allocation.

Two selection families are implemented.  Power-based selection ranks antennas
by their channel column power and is solved exactly by per-group top-k picks.
Instantaneous-CSI selection maximizes the log-det capacity of the selected
submatrix; the binary problem is relaxed to weights in [0, 1] with per-group
sum constraints, solved by projected gradient ascent, rounded back to a
feasible subset and polished by greedy in/out swaps.

All solvers run on stacked trial batches so Monte Carlo sweeps amortize the
linear-algebra cost; the public single-instance functions delegate to the
batch kernels with a batch of one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import log

import numpy as np

from .channel import ChannelMatrix
from .connectivity import ConnectivityMap

_LN2 = log(2.0)


@dataclass(frozen=True)
class SelectionMask:
    """An antenna subset (1-based indices, sorted ascending)."""

    selected: tuple[int, ...]
    n_antennas: int
    meta: dict | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        sel = self.selected
        if list(sel) != sorted(set(sel)):
            raise ValueError("selected indices must be sorted and unique")
        if sel and (sel[0] < 1 or sel[-1] > self.n_antennas):
            raise ValueError("selected indices outside 1..n_antennas")

    @property
    def as_diagonal(self) -> np.ndarray:
        """Binary diagonal as a boolean vector of length n_antennas."""
        d = np.zeros(self.n_antennas, dtype=bool)
        d[self.indices0] = True
        return d

    @property
    def indices0(self) -> np.ndarray:
        return np.asarray(self.selected, dtype=np.int64) - 1


@dataclass(frozen=True)
class PowerAllocation:
    """Diagonal user power allocation with trace fixed to the user count."""

    p: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=float)
        object.__setattr__(self, "p", p)
        if np.any(p < -1e-12):
            raise ValueError("powers must be nonnegative")
        if abs(float(np.sum(p)) - len(p)) > 1e-9:
            raise ValueError("powers must sum to the number of users")


# ---------------------------------------------------------------------------
# group bookkeeping shared by the power-based and CSI solvers


class _Groups:
    """Padded 0-based view of a connectivity map (or one unconstrained group)."""

    def __init__(self, n: int, groups0: list[np.ndarray], budgets: list[int]):
        self.n = n
        self.members = groups0
        self.budgets = np.asarray(budgets, dtype=np.int64)
        gmax = max(len(g) for g in groups0)
        self.idx = np.zeros((len(groups0), gmax), dtype=np.int64)
        self.mask = np.zeros((len(groups0), gmax), dtype=bool)
        for gi, g in enumerate(groups0):
            self.idx[gi, : len(g)] = g
            self.mask[gi, : len(g)] = True
        # groups partition the indices, so this is a permutation of 0..n-1
        self.flat_cols = self.idx[self.mask]

    @classmethod
    def fully_flexible(cls, n: int, m: int) -> "_Groups":
        return cls(n, [np.arange(n, dtype=np.int64)], [m])

    @classmethod
    def from_map(cls, cmap: ConnectivityMap) -> "_Groups":
        groups0 = [np.asarray(g, dtype=np.int64) - 1 for g in cmap.antenna_groups]
        return cls(cmap.n_antennas, groups0, list(cmap.budgets))

    def gather(self, v: np.ndarray, pad: float) -> np.ndarray:
        """(T, N) -> (T, G, gmax) with padding slots filled by ``pad``."""
        out = np.full((v.shape[0],) + self.idx.shape, pad, dtype=float)
        out[:, self.mask] = v[:, self.flat_cols]
        return out

    def scatter(self, x: np.ndarray) -> np.ndarray:
        """(T, G, gmax) -> (T, N), inverse of :meth:`gather` on real slots."""
        out = np.empty((x.shape[0], self.n), dtype=float)
        out[:, self.flat_cols] = x[:, self.mask]
        return out


# ---------------------------------------------------------------------------
# power-based selection


def _top_in_group_mask(powers: np.ndarray, groups: _Groups) -> np.ndarray:
    """Boolean (T, N) mask picking each group's largest entries up to its budget."""
    t = powers.shape[0]
    out = np.zeros((t, groups.n), dtype=bool)
    for g, budget in zip(groups.members, groups.budgets):
        vals = powers[:, g]
        order = np.argsort(-vals, axis=1, kind="stable")[:, :budget]
        rows = np.repeat(np.arange(t), budget)
        out[rows, g[order].ravel()] = True
    return out


def select_power_ff(powers: np.ndarray, m: int) -> SelectionMask:
    """Pick the ``m`` antennas with the largest channel power (ties: lowest index)."""
    powers = np.asarray(powers, dtype=float)
    n = len(powers)
    if not 1 <= m <= n:
        raise ValueError("need 1 <= m <= len(powers)")
    top = np.argsort(-powers, kind="stable")[:m]
    return SelectionMask(tuple(sorted(int(i) + 1 for i in top)), n)


def select_power_pc(powers: np.ndarray, cmap: ConnectivityMap) -> SelectionMask:
    """Within each antenna group, pick its budget's worth of largest powers."""
    powers = np.asarray(powers, dtype=float)
    if len(powers) != cmap.n_antennas:
        raise ValueError("power vector length must match the map")
    groups = _Groups.from_map(cmap)
    mask = _top_in_group_mask(powers[None, :], groups)[0]
    return SelectionMask(tuple(int(i) + 1 for i in np.flatnonzero(mask)), cmap.n_antennas)


# ---------------------------------------------------------------------------
# log-det objective helpers (batched)


def _logdet_capacity(h: np.ndarray, weights: np.ndarray, rho: float) -> np.ndarray:
    """log2 det(I + rho * H diag(w) H^H) per trial; w may be fractional."""
    hw = h * weights[:, None, :]
    k = h.shape[1]
    a = np.eye(k) + rho * hw @ h.conj().transpose(0, 2, 1)
    chol = np.linalg.cholesky(a)
    diag = np.abs(np.diagonal(chol, axis1=1, axis2=2))
    return 2.0 * np.sum(np.log2(diag), axis=1)


def mask_capacity(channel: ChannelMatrix | np.ndarray, mask: SelectionMask, rho: float) -> float:
    """Capacity objective log2 det(I + rho H_sel H_sel^H) of one mask."""
    h = channel.h if isinstance(channel, ChannelMatrix) else np.asarray(channel)
    w = mask.as_diagonal.astype(float)
    return float(_logdet_capacity(h[None], w[None], rho)[0])


# ---------------------------------------------------------------------------
# relaxed CSI selection: projected gradient ascent on per-group capped simplices


def _project_capped_groups(v: np.ndarray, groups: _Groups, iters: int = 60) -> np.ndarray:
    """Project (T, N) weights onto {w in [0,1]^N : sum over each group = budget}.

    Per group this is a capped-simplex projection clip(v - tau, 0, 1) whose
    shift tau is found by bisection (the constrained mass is monotone in tau).
    """
    vp = groups.gather(v, pad=-1e30)
    lo = np.where(groups.mask, vp, np.inf).min(axis=2) - 1.0
    hi = np.where(groups.mask, vp, -np.inf).max(axis=2)
    budgets = groups.budgets[None, :].astype(float)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        mass = np.clip(vp - mid[:, :, None], 0.0, 1.0).sum(axis=2)
        too_heavy = mass > budgets
        lo = np.where(too_heavy, mid, lo)
        hi = np.where(too_heavy, hi, mid)
    x = np.clip(vp - (0.5 * (lo + hi))[:, :, None], 0.0, 1.0)
    return groups.scatter(x)


def _csi_relax_batch(
    h: np.ndarray,
    rho: float,
    groups: _Groups,
    tol: float = 1e-6,
    max_iter: int = 500,
) -> tuple[np.ndarray, np.ndarray]:
    """Maximize the relaxed log-det objective; returns (weights, converged).

    Ascent uses per-trial backtracking steps; a trial counts as converged when
    its relative objective gain drops below ``tol`` (or no step improves).
    Converged trials drop out of the working set so stragglers only pay for
    themselves.
    """
    t, k, n = h.shape
    s = np.empty((t, n))
    for g, budget in zip(groups.members, groups.budgets):
        s[:, g] = budget / len(g)
    f = _logdet_capacity(h, s, rho)
    step = np.full(t, 1.0)
    converged = np.zeros(t, dtype=bool)
    active = np.arange(t)

    for _ in range(max_iter):
        if active.size == 0:
            break
        hb = h[active]
        sb = s[active]
        fb = f[active]
        hw = hb * sb[:, None, :]
        a = np.eye(k) + rho * hw @ hb.conj().transpose(0, 2, 1)
        x = np.linalg.solve(a, hb)
        grad = rho * np.sum((hb.conj() * x).real, axis=1) / _LN2

        stepb = step[active]
        done_b = np.zeros(active.size, dtype=bool)  # locally converged
        todo = np.arange(active.size)
        for _ in range(40):
            if todo.size == 0:
                break
            cand = _project_capped_groups(sb[todo] + stepb[todo, None] * grad[todo], groups)
            fc = _logdet_capacity(hb[todo], cand, rho)
            ok = fc >= fb[todo]
            if ok.any():
                rows = todo[ok]
                rel = (fc[ok] - fb[rows]) / np.maximum(np.abs(fb[rows]), 1e-12)
                sb[rows] = cand[ok]
                fb[rows] = fc[ok]
                done_b[rows] = rel < tol
            todo = todo[~ok]
            stepb[todo] *= 0.5
            stalled = stepb[todo] < 1e-16
            done_b[todo[stalled]] = True
            todo = todo[~stalled]
        done_b[todo] = True  # backtracking exhausted: treat as stalled

        s[active] = sb
        f[active] = fb
        step[active] = np.minimum(stepb * 2.0, 1e6)
        converged[active[done_b]] = True
        active = active[~done_b]

    return s, converged


def _round_groups(weights: np.ndarray, groups: _Groups) -> np.ndarray:
    """Round relaxed weights to a feasible subset: per-group top-budget picks."""
    return _top_in_group_mask(weights, groups)


def _polish_swaps(
    h: np.ndarray,
    rho: float,
    sel: np.ndarray,
    groups: _Groups,
    max_rounds: int = 16,
    chunk: int = 256,
) -> np.ndarray:
    """Greedy exchange polish: apply the best determinant-improving swap of a
    selected/unselected pair inside one group, repeatedly, per trial.

    The determinant ratio of swapping column i out and j in follows from a
    rank-two update of A = I + rho H_sel H_sel^H:
    (1 + rho c_jj)(1 - rho c_ii) + rho^2 |c_ij|^2 with c = H^H A^-1 H.
    """
    t, k, n = h.shape
    sel = sel.copy()
    active = np.ones(t, dtype=bool)
    for _ in range(max_rounds):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        any_swap = False
        for lo in range(0, idx.size, chunk):
            rows = idx[lo : lo + chunk]
            hb = h[rows]
            sb = sel[rows]
            a = np.eye(k) + rho * (hb * sb[:, None, :]) @ hb.conj().transpose(0, 2, 1)
            z = np.linalg.solve(a, hb)  # (b, K, N) = A^-1 H
            best_gain = np.full(rows.size, 1.0)
            best_pair = np.full((rows.size, 2), -1, dtype=np.int64)
            for g in groups.members:
                cg = np.einsum("bki,bkj->bij", hb[:, :, g].conj(), z[:, :, g])
                cdiag = cg.diagonal(axis1=1, axis2=2).real
                in_g = sb[:, g]
                ratio = (
                    (1.0 + rho * cdiag[:, None, :])
                    * (1.0 - rho * cdiag[:, :, None])
                    + rho**2 * np.abs(cg.transpose(0, 2, 1)) ** 2
                )
                # rows index the outgoing (selected) antenna, cols the incoming
                feasible = in_g[:, :, None] & ~in_g[:, None, :]
                ratio = np.where(feasible, ratio, -np.inf)
                flat = ratio.reshape(rows.size, -1)
                arg = np.argmax(flat, axis=1)
                gain = flat[np.arange(rows.size), arg]
                better = gain > best_gain + 1e-12
                gi, gj = np.unravel_index(arg, ratio.shape[1:])
                best_pair[better, 0] = g[gi[better]]
                best_pair[better, 1] = g[gj[better]]
                best_gain = np.maximum(best_gain, gain)
            has = best_pair[:, 0] >= 0
            if has.any():
                any_swap = True
                rr = rows[has]
                sel[rr, best_pair[has, 0]] = False
                sel[rr, best_pair[has, 1]] = True
            active[rows[~has]] = False
        if not any_swap:
            break
    return sel


def _greedy_mask(h: np.ndarray, rho: float, groups: _Groups) -> np.ndarray:
    """Forward greedy determinant maximization under group budgets (batched)."""
    t, k, n = h.shape
    sel = np.zeros((t, n), dtype=bool)
    group_of = np.empty(n, dtype=np.int64)
    for gi, g in enumerate(groups.members):
        group_of[g] = gi
    remaining = np.tile(groups.budgets, (t, 1))
    ainv = np.tile(np.eye(k, dtype=complex), (t, 1, 1))
    m_total = int(groups.budgets.sum())
    for _ in range(m_total):
        z = ainv @ h
        scores = np.sum((h.conj() * z).real, axis=1)
        feasible = ~sel & (remaining[:, group_of] > 0)
        scores = np.where(feasible, scores, -np.inf)
        j = np.argmax(scores, axis=1)  # ties resolve to the lowest index
        rows = np.arange(t)
        sel[rows, j] = True
        remaining[rows, group_of[j]] -= 1
        u = z[rows, :, j]  # A^-1 h_j
        denom = 1.0 + rho * np.sum((h[rows, :, j].conj() * u).real, axis=1)
        ainv -= rho * (u[:, :, None] * u.conj()[:, None, :]) / denom[:, None, None]
    return sel


def _select_csi_batch(
    h: np.ndarray,
    rho: float,
    groups: _Groups,
    tol: float = 1e-6,
    max_iter: int = 500,
) -> tuple[np.ndarray, np.ndarray]:
    """Relax + round + polish for a batch; returns (bool mask (T, N), converged)."""
    weights, converged = _csi_relax_batch(h, rho, groups, tol=tol, max_iter=max_iter)
    sel = _round_groups(weights, groups)
    if not converged.all():
        bad = np.flatnonzero(~converged)
        sel[bad] = _greedy_mask(h[bad], rho, groups)
    return _polish_swaps(h, rho, sel, groups), converged


def select_csi(
    channel: ChannelMatrix,
    m: int,
    cmap: ConnectivityMap | None,
    rho: float,
    tol: float = 1e-6,
    max_iter: int = 500,
) -> SelectionMask:
    """Instantaneous-CSI selection maximizing log2 det(I + rho H S H^H).

    ``cmap=None`` means a fully-flexible fabric (any subset of size ``m``);
    otherwise the per-group budgets of the map constrain the subset.  If the
    relaxed ascent does not converge the greedy solution is used instead and
    flagged in ``meta``.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    if m > channel.n_antennas:
        raise ValueError("cannot select more antennas than exist")
    if cmap is None:
        groups = _Groups.fully_flexible(channel.n_antennas, m)
    else:
        if cmap.n_chains != m:
            raise ValueError("m must match the map's chain count")
        groups = _Groups.from_map(cmap)
    sel, converged = _select_csi_batch(channel.h[None], rho, groups, tol=tol, max_iter=max_iter)
    meta = {"converged": bool(converged[0]), "fallback": not bool(converged[0])}
    return SelectionMask(
        tuple(int(i) + 1 for i in np.flatnonzero(sel[0])), channel.n_antennas, meta=meta
    )


def select_csi_greedy(
    channel: ChannelMatrix, m: int, cmap: ConnectivityMap | None, rho: float
) -> SelectionMask:
    """Forward greedy determinant maximization (baseline and fallback path)."""
    if cmap is None:
        groups = _Groups.fully_flexible(channel.n_antennas, m)
    else:
        groups = _Groups.from_map(cmap)
    sel = _greedy_mask(channel.h[None], rho, groups)[0]
    return SelectionMask(tuple(int(i) + 1 for i in np.flatnonzero(sel)), channel.n_antennas)


# ---------------------------------------------------------------------------
# downlink user power allocation


def _project_simplex_scaled(v: np.ndarray, total: float) -> np.ndarray:
    """Euclidean projection of each row of v onto {p >= 0, sum p = total}."""
    u = np.sort(v, axis=1)[:, ::-1]
    css = np.cumsum(u, axis=1) - total
    ks = np.arange(1, v.shape[1] + 1)
    cond = u - css / ks > 0
    k_star = v.shape[1] - 1 - np.argmax(cond[:, ::-1], axis=1)
    tau = css[np.arange(v.shape[0]), k_star] / (k_star + 1)
    return np.maximum(v - tau[:, None], 0.0)


def _wf_objective(gram: np.ndarray, p: np.ndarray, rho: float) -> np.ndarray:
    k = gram.shape[1]
    sq = np.sqrt(np.maximum(p, 0.0))
    b = np.eye(k) + rho * sq[:, :, None] * gram * sq[:, None, :]
    chol = np.linalg.cholesky(b)
    diag = np.abs(np.diagonal(chol, axis1=1, axis2=2))
    return 2.0 * np.sum(np.log2(diag), axis=1)


def _waterfill_batch(
    gram: np.ndarray, rho: float, tol: float = 1e-8, max_iter: int = 1000
) -> tuple[np.ndarray, np.ndarray]:
    """Maximize sum capacity over diagonal P >= 0 with trace K (batched PGA).

    The objective log2 det(I + rho P G) is concave in p, so projected
    gradient ascent from the uniform allocation finds the optimum; the
    result can therefore never fall below the uniform-allocation objective.
    """
    t, k, _ = gram.shape
    p = np.ones((t, k))
    f = _wf_objective(gram, p, rho)
    step = np.full(t, 1.0)
    active = np.arange(t)
    for _ in range(max_iter):
        if active.size == 0:
            break
        gb = gram[active]
        pb = p[active]
        fb = f[active]
        a = np.eye(k) + rho * pb[:, :, None] * gb
        # d/dp_k log det(I + rho D G) = rho [G A^-1]_kk, via the transposed solve
        z = np.linalg.solve(a.transpose(0, 2, 1), gb.transpose(0, 2, 1))
        grad = rho * np.diagonal(z, axis1=1, axis2=2).real / _LN2

        stepb = step[active]
        done_b = np.zeros(active.size, dtype=bool)
        todo = np.arange(active.size)
        for _ in range(40):
            if todo.size == 0:
                break
            cand = _project_simplex_scaled(pb[todo] + stepb[todo, None] * grad[todo], float(k))
            fc = _wf_objective(gb[todo], cand, rho)
            ok = fc >= fb[todo]
            if ok.any():
                rows = todo[ok]
                rel = (fc[ok] - fb[rows]) / np.maximum(np.abs(fb[rows]), 1e-12)
                pb[rows] = cand[ok]
                fb[rows] = fc[ok]
                done_b[rows] = rel < tol
            todo = todo[~ok]
            stepb[todo] *= 0.5
            stalled = stepb[todo] < 1e-18
            done_b[todo[stalled]] = True
            todo = todo[~stalled]
        done_b[todo] = True

        p[active] = pb
        f[active] = fb
        step[active] = np.minimum(stepb * 2.0, 1e6)
        active = active[~done_b]
    return p, f


def waterfill_users(h_sel: np.ndarray, rho: float) -> PowerAllocation:
    """Optimal diagonal user power allocation for the selected channel.

    Maximizes log2 det(I + rho P H H^H) subject to trace(P) = K, p >= 0.
    The coupling inside the determinant has no closed-form waterlevel, so the
    scaled-simplex projected ascent is used (tolerance 1e-8).
    """
    h_sel = np.asarray(h_sel)
    gram = (h_sel @ h_sel.conj().T)[None]
    p, _ = _waterfill_batch(gram, rho)
    total = float(np.sum(p[0]))
    k = h_sel.shape[0]
    # renormalize the last float ulp so the trace constraint holds exactly
    return PowerAllocation(p[0] * (k / total) if total > 0 else np.ones(k))
