"""Group structure induced by a partially-connected switching fabric.

A partially-connected fabric splits the antennas into disjoint groups, each
wired to a disjoint set of RF chains; a valid antenna subset must activate
exactly as many antennas per group as the group has chains (the group's
budget).  Groups interleave antenna indices (non-adjacent wiring) so that the
antennas reachable from one chain are spread across the array.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil


@dataclass(frozen=True)
class ConnectivityMap:
    """Disjoint antenna groups, their chain groups, and per-group budgets.

    Indices are 1-based.  ``antenna_groups`` partitions ``{1..n_antennas}``
    and ``chain_groups`` partitions ``{1..n_chains}``; ``budgets[i]`` equals
    ``len(chain_groups[i])`` and the budgets sum to ``n_chains``.
    """

    n_antennas: int
    n_chains: int
    s_cons: int
    n_dist: int
    m_dist: int
    antenna_groups: tuple[tuple[int, ...], ...]
    chain_groups: tuple[tuple[int, ...], ...]
    budgets: tuple[int, ...]

    def to_json_dict(self) -> dict:
        return {
            "groups": [list(g) for g in self.antenna_groups],
            "chains": [list(g) for g in self.chain_groups],
        }


def _strided(start: int, limit: int, step: int) -> tuple[int, ...]:
    """Indices start, start+step, ... not exceeding limit."""
    count = ceil((limit - start + 1) / step)
    return tuple(start + j * step for j in range(count))


def build_connectivity(n: int, m: int) -> ConnectivityMap:
    """Build the interleaved group structure for ``m`` chains and ``n`` antennas.

    Two regimes exist.  When ``floor(n/m) >= 2`` every antenna is wired to a
    single chain: there are ``m`` groups, antennas within a group are spaced
    ``m`` apart and every budget is 1.  Otherwise ``2m - n`` chain ports must
    share antennas: there are ``n - m`` groups with both antennas and chains
    spaced ``n - m`` apart, and each group of ``g+1`` antennas is served by
    ``g`` chains.  ``m == n`` degenerates to a single unconstrained group so
    downstream selection reduces to using every antenna.
    """
    if m < 1 or m > n:
        raise ValueError(f"invalid dimensions: need 1 <= m <= n, got n={n}, m={m}")
    if m == n:
        full = tuple(range(1, n + 1))
        return ConnectivityMap(
            n_antennas=n,
            n_chains=m,
            s_cons=1,
            n_dist=n,
            m_dist=n,
            antenna_groups=(full,),
            chain_groups=(full,),
            budgets=(m,),
        )

    n_ov = max(0, 2 * m - n)
    s_cons = m - n_ov
    if n // m >= 2:
        n_dist, m_dist = m, 1
        antenna_groups = tuple(_strided(i, n, n_dist) for i in range(1, s_cons + 1))
        # each antenna group is served by exactly one chain
        chain_groups = tuple((i,) for i in range(1, s_cons + 1))
    else:
        n_dist = m_dist = n - m
        antenna_groups = tuple(_strided(i, n, n_dist) for i in range(1, s_cons + 1))
        chain_groups = tuple(_strided(i, m, m_dist) for i in range(1, s_cons + 1))

    budgets = tuple(len(g) for g in chain_groups)
    cmap = ConnectivityMap(
        n_antennas=n,
        n_chains=m,
        s_cons=s_cons,
        n_dist=n_dist,
        m_dist=m_dist,
        antenna_groups=antenna_groups,
        chain_groups=chain_groups,
        budgets=budgets,
    )
    _validate(cmap)
    return cmap


def _validate(cmap: ConnectivityMap) -> None:
    """Reject any (n, m) whose strided construction breaks the partition/budget contract."""
    antennas = sorted(a for g in cmap.antenna_groups for a in g)
    if antennas != list(range(1, cmap.n_antennas + 1)):
        raise ValueError(
            f"inconsistent map: antenna groups do not partition 1..{cmap.n_antennas} "
            f"for n={cmap.n_antennas}, m={cmap.n_chains}"
        )
    chains = sorted(c for g in cmap.chain_groups for c in g)
    if chains != list(range(1, cmap.n_chains + 1)):
        raise ValueError(
            f"inconsistent map: chain groups do not partition 1..{cmap.n_chains} "
            f"for n={cmap.n_antennas}, m={cmap.n_chains}"
        )
    if sum(cmap.budgets) != cmap.n_chains:
        raise ValueError("inconsistent map: budgets do not sum to the chain count")
    if any(b > len(g) for b, g in zip(cmap.budgets, cmap.antenna_groups)):
        raise ValueError("inconsistent map: a budget exceeds its group size")
