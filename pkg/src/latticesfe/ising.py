"""Ising measures on finite subgraphs of Z^d with weight exp(-beta * s_x * s_y)
per nearest-neighbour pair.

Partition functions of large clusters go through variable elimination in
lexicographic order; the frontier stays as wide as one lattice slice, so a
5x5 cluster costs a few 2^6-entry tables rather than 2^25 terms.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .lattice import Alphabet, Window, _add, _sub, all_states
from .measures import DensityTable

GRIFFITHS_ALPHABET = Alphabet(("-1", "0", "1"))
SPIN = np.array([-1, 0, 1], dtype=np.int64)  # state index -> spin
PM = np.array([-1, 1], dtype=np.int64)


def _edges_of(sites) -> list:
    index = {s: i for i, s in enumerate(sites)}
    d = len(sites[0]) if sites else 0
    out = []
    for i, s in enumerate(sites):
        for j in range(d):
            e = [0] * d
            e[j] = 1
            t = _add(s, tuple(e))
            if t in index:
                out.append((i, index[t]))
    return out


def ising_log_marginal(sites, beta: float, keep=()) -> np.ndarray:
    """Unnormalized log-marginal of the Ising weight on ``keep``.

    Returns an array with one axis of length 2 per kept site (axis order as
    in ``keep``; index 0 is spin -1).  With ``keep`` empty the result is the
    scalar log partition function.
    """
    sites = sorted(tuple(s) for s in sites)
    keep = [tuple(s) for s in keep]
    if not sites:
        return np.zeros(())
    index = {s: i for i, s in enumerate(sites)}
    keep_idx = {index[s] for s in keep}
    edges = _edges_of(sites)
    last_use = list(range(len(sites)))
    nbrs = [[] for _ in sites]
    for a, b in edges:
        nbrs[b].append(a)
        last_use[a] = max(last_use[a], b)
    pair = -beta * np.outer(PM, PM).astype(float)

    table = np.zeros(())
    active = []  # site indices, one axis each
    for v in range(len(sites)):
        table = table[..., None] + np.zeros(2)
        active.append(v)
        for u in nbrs[v]:
            ax = active.index(u)
            shape = [1] * len(active)
            shape[ax] = 2
            shape[-1] = 2
            table = table + pair.reshape(shape)
        # sum out sites that no later site touches
        done = [i for i, u in enumerate(active) if last_use[u] <= v and u not in keep_idx]
        if done:
            table = logsumexp(table, axis=tuple(done))
            active = [u for i, u in enumerate(active) if i not in set(done)]
    order = [active.index(index[s]) for s in keep]
    return np.transpose(table, order) if keep else table


def _normal_form(sites) -> tuple:
    sites = sorted(tuple(s) for s in sites)
    base = sites[0]
    return tuple(_sub(s, base) for s in sites)


@lru_cache(maxsize=1 << 16)
def _log_z_cached(shape: tuple, beta: float) -> float:
    return float(ising_log_marginal(shape, beta))


def ising_log_partition(sites, beta: float) -> float:
    """log sum over {-1,1}^sites of exp(-beta * sum_{xy} s_x s_y); cached by shape."""
    if not sites:
        return 0.0
    return _log_z_cached(_normal_form(sites), float(beta))


def ising_alpha(lam: Window, beta: float) -> DensityTable:
    """The Ising measure on {-1,1}^lam embedded in {-1,0,1}^lam."""
    n = len(lam)
    states = all_states(n, 3)
    spins = SPIN[states]
    energy = np.zeros(len(states))
    for a, b in _edges_of(lam.sites):
        energy += spins[:, a] * spins[:, b]
    lw = np.where((spins != 0).all(axis=1), -beta * energy, -np.inf)
    return DensityTable.from_log_weights(lam, GRIFFITHS_ALPHABET, lw)


def _pm_log_alpha(sites, beta, spins) -> np.ndarray:
    """log alpha_sites on rows of +-1 spins (columns in ``sites`` order)."""
    if not sites:
        return np.zeros(spins.shape[0])
    energy = np.zeros(spins.shape[0])
    for a, b in _edges_of(list(sites)):
        energy += spins[:, a] * spins[:, b]
    lw = -beta * energy
    return lw - logsumexp(lw)


def ising_decompose_check(lam: Window, delta: Window, beta: float) -> float:
    """Max pointwise gap between alpha_lam and its split along the edges of
    lam crossing the boundary of delta, rebuilt from the two pieces."""
    n = len(lam)
    spins = PM[all_states(n, 2)]
    inner = [i for i, s in enumerate(lam) if s in delta]
    outer = [i for i, s in enumerate(lam) if s not in delta]
    lhs = np.exp(_pm_log_alpha(lam.sites, beta, spins))
    cross = np.zeros(len(spins))
    for a, b in _edges_of(lam.sites):
        if (a in inner) != (b in inner):
            cross += spins[:, a] * spins[:, b]
    log_f = -beta * cross
    la_in = _pm_log_alpha([lam.sites[i] for i in inner], beta, spins[:, inner])
    la_out = _pm_log_alpha([lam.sites[i] for i in outer], beta, spins[:, outer])
    rhs_log = log_f + la_in + la_out
    rhs = np.exp(rhs_log - logsumexp(rhs_log))
    return float(np.max(np.abs(lhs - rhs)))
