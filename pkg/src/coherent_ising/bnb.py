"""Depth-first branch and bound for the ground energy.

An independent route to lambda_g used to cross-check enumeration.  Spins are
fixed in order of decreasing degree.  The lower bound at a node is

    partial energy - sum_k |f_k| - sum_{undecided pairs} |J_ij|

where f_k = B_k + sum over decided j of J_kj s_j is the linear field on an
undecided spin k.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .instance import IsingInstance, SpinConfig


@dataclass(frozen=True)
class BnBResult:
    lambda_g: int
    witness: SpinConfig
    complete: bool  # False when a budget ran out; lambda_g is then an upper bound
    nodes: int


class _Budget(Exception):
    pass


def branch_and_bound_ground(
    instance: IsingInstance,
    max_nodes: int | None = None,
    time_budget: float | None = None,
) -> BnBResult:
    n = instance.n
    nbrs = instance.neighbors
    order = sorted(range(n), key=lambda k: -len(nbrs[k]))

    f = list(instance.fields)
    spins = [0] * n
    undecided_pairs = sum(abs(J) for _, _, J in instance.couplings)

    # Greedy incumbent: each spin against its current field.
    for k in order:
        s = -1 if f[k] > 0 else 1
        spins[k] = s
        for j, J in nbrs[k]:
            if not spins[j]:
                f[j] += J * s
    best_bits = sum(1 << k for k in range(n) if spins[k] < 0)
    best = [_energy_from_spins(instance, spins), best_bits]

    f = list(instance.fields)
    spins = [0] * n
    nodes = 0
    deadline = None if time_budget is None else time.monotonic() + time_budget

    def dfs(depth, partial, pairs_left):
        nonlocal nodes
        nodes += 1
        if max_nodes is not None and nodes > max_nodes:
            raise _Budget
        if deadline is not None and nodes % 4096 == 0 and time.monotonic() > deadline:
            raise _Budget
        if depth == n:
            if partial < best[0]:
                best[0] = partial
                best[1] = sum(1 << k for k in range(n) if spins[k] < 0)
            return
        k = order[depth]
        fk = f[k]
        free_nbrs = [(j, J) for j, J in nbrs[k] if not spins[j]]
        removed = sum(abs(J) for _, J in free_nbrs)
        first = -1 if fk > 0 else 1
        for s in (first, -first):
            spins[k] = s
            for j, J in free_nbrs:
                f[j] += J * s
            p = partial + fk * s
            rest = pairs_left - removed
            bound = p - rest - sum(abs(f[order[d]]) for d in range(depth + 1, n))
            if bound < best[0]:
                dfs(depth + 1, p, rest)
            for j, J in free_nbrs:
                f[j] -= J * s
        spins[k] = 0

    complete = True
    try:
        dfs(0, 0, undecided_pairs)
    except _Budget:
        complete = False
    return BnBResult(best[0], SpinConfig(best[1], n), complete, nodes)


def _energy_from_spins(instance, spins):
    e = sum(b * spins[i] for i, b in enumerate(instance.fields))
    return e + sum(J * spins[i] * spins[j] for i, j, J in instance.couplings)
