"""Random-cluster diameters on frames too large for boundary enumeration.

The kernel on a window depends on the outside bonds only through a
signature (b, pi): b is the state of the boundary edges encoded by outside
sites (they point into the window), pi is the partition of the outer
neighbours induced by outside bonds away from the window.  With the inside
bonds and b fixed, the cluster count splits as

    C = a + |sigma v pi|

where a counts the components avoiding the outer neighbours and sigma is the
partition they induce on them.  So inside configurations only enter through
(number of open bonds, a, sigma), and each signature costs one join table.
The achievable partitions pi come from a connectivity sweep over the outside
graph.
"""
from __future__ import annotations

import math

import numba
import numpy as np

from .errors import CapacityError
from .lattice import Window, _add, all_states, check_table_size, outer_neighbors, square_offsets


def _unit(d, j):
    e = [0] * d
    e[j] = 1
    return tuple(e)


def _canon(labels) -> tuple:
    seen = {}
    return tuple(seen.setdefault(x, len(seen)) for x in labels)


def achievable_partitions(vertices, edges, terminals) -> set:
    """Partitions of ``terminals`` realizable by subsets of ``edges``.

    Sweeps the vertices in order; the state is the connectivity among the
    vertices that still have pending edges plus the terminals seen so far.
    """
    order = {v: i for i, v in enumerate(sorted(vertices))}
    term = set(terminals)
    by_v = {}
    last = {v: order[v] for v in order}
    for u, v in edges:
        a, b = sorted((u, v), key=order.get)
        by_v.setdefault(b, []).append(a)
        last[a] = max(last[a], order[b])
    active: list = []
    states = {()}
    for v in sorted(vertices, key=order.get):
        active.append(v)
        states = {s + (max(s, default=-1) + 1,) for s in states}
        for u in by_v.get(v, ()):
            iu, iv = active.index(u), len(active) - 1
            nxt = set()
            for s in states:
                nxt.add(s)
                a, b = s[iu], s[iv]
                if a != b:
                    nxt.add(_canon(a if x == b else x for x in s))
                else:
                    nxt.add(s)
            states = nxt
        keep = [i for i, w in enumerate(active) if w in term or last[w] > order[v]]
        if len(keep) < len(active):
            active = [active[i] for i in keep]
            states = {_canon(s[i] for i in keep) for s in states}
    pos = [active.index(t) for t in terminals]
    return {_canon(s[i] for i in pos) for s in states}


@numba.njit(cache=True)
def _features(zopen, zu, zv, bopen, bu, bv, n_lam, n_nb):
    """Per inside configuration: components avoiding the outer neighbours,
    and the canonical partition code they induce on them."""
    k_rows = zopen.shape[0]
    n = n_lam + n_nb
    parent = np.empty(n, np.int64)
    a_out = np.empty(k_rows, np.int64)
    s_out = np.empty(k_rows, np.int64)
    relabel = np.empty(n, np.int64)
    has_nb = np.empty(n, np.bool_)
    for r in range(k_rows):
        for v in range(n):
            parent[v] = v
        for e in range(zu.shape[0]):
            if zopen[r, e]:
                x = zu[e]
                while parent[x] != x:
                    parent[x] = parent[parent[x]]
                    x = parent[x]
                y = zv[e]
                while parent[y] != y:
                    parent[y] = parent[parent[y]]
                    y = parent[y]
                if x != y:
                    parent[max(x, y)] = min(x, y)
        for e in range(bu.shape[0]):
            if bopen[e]:
                x = bu[e]
                while parent[x] != x:
                    parent[x] = parent[parent[x]]
                    x = parent[x]
                y = bv[e]
                while parent[y] != y:
                    parent[y] = parent[parent[y]]
                    y = parent[y]
                if x != y:
                    parent[max(x, y)] = min(x, y)
        for v in range(n):
            has_nb[v] = False
            relabel[v] = -1
        for v in range(n_lam, n):
            x = v
            while parent[x] != x:
                x = parent[x]
            has_nb[x] = True
        a = 0
        for v in range(n_lam):
            if parent[v] == v and not has_nb[v]:
                a += 1
        code = 0
        nxt = 0
        mult = 1
        for v in range(n_lam, n):
            x = v
            while parent[x] != x:
                x = parent[x]
            if relabel[x] < 0:
                relabel[x] = nxt
                nxt += 1
            code += relabel[x] * mult
            mult *= 16
        a_out[r] = a
        s_out[r] = code
    return a_out, s_out


@numba.njit(cache=True)
def _join_blocks(sig, pis, n_nb):
    """Number of blocks of the join of each sigma with each pi."""
    out = np.empty((sig.shape[0], pis.shape[0]), np.int64)
    parent = np.empty(2 * n_nb, np.int64)
    for i in range(sig.shape[0]):
        for j in range(pis.shape[0]):
            # nodes 0..n_nb-1 are sigma labels, n_nb.. are pi labels
            for v in range(2 * n_nb):
                parent[v] = v
            used = np.zeros(2 * n_nb, np.bool_)
            for t in range(n_nb):
                x = sig[i, t]
                y = n_nb + pis[j, t]
                used[x] = True
                while parent[x] != x:
                    x = parent[x]
                while parent[y] != y:
                    y = parent[y]
                if x != y:
                    parent[max(x, y)] = min(x, y)
            c = 0
            for v in range(n_nb):
                if used[v] and parent[v] == v:
                    c += 1
            out[i, j] = c
    return out


def rc_structure(lam: Window, frame: Window) -> dict:
    """Graphs behind the signature reduction (parameter free, so cacheable)."""
    d = lam.d
    nb = list(outer_neighbors(lam, square_offsets(d)))
    if not all(s in frame for s in nb):
        raise ValueError("frame must contain every site adjacent to the window")
    h_index = {s: i for i, s in enumerate(list(lam) + nb)}
    zu, zv = [], []
    for x in lam:
        for j in range(d):
            zu.append(h_index[x])
            zv.append(h_index[_add(x, _unit(d, j))])
    bu, bv = [], []
    out_edges, out_vertices = [], set(frame.difference(lam))
    for y in frame.difference(lam):
        for j in range(d):
            t = _add(y, _unit(d, j))
            if t in lam:
                bu.append(h_index[y])
                bv.append(h_index[t])
            else:
                out_edges.append((y, t))
                out_vertices.add(t)
    pis = achievable_partitions(out_vertices, out_edges, nb)
    return {
        "n_lam": len(lam), "n_nb": len(nb), "d": d,
        "zu": np.array(zu, np.int64), "zv": np.array(zv, np.int64),
        "bu": np.array(bu, np.int64), "bv": np.array(bv, np.int64),
        "pis": np.array(sorted(pis), np.int64).reshape(len(pis), len(nb)),
    }


_FEATURE_CACHE: dict = {}


def _feature_table(lam: Window, frame: Window):
    key = (lam, frame)
    if key in _FEATURE_CACHE:
        return _FEATURE_CACHE[key]
    st = rc_structure(lam, frame)
    d = st["d"]
    k = 2 ** d
    check_table_size(k, len(lam), "kernel table")
    if st["n_nb"] > 12:
        raise CapacityError("signature reduction supports at most 12 outer neighbours")
    zeta = all_states(len(lam), k).astype(np.int64)
    bits = np.arange(d)
    zopen = ((zeta[:, :, None] >> bits) & 1).reshape(len(zeta), -1).astype(np.bool_)
    nz = zopen.sum(axis=1)
    n_b = len(st["bu"])
    per_b = []
    for b in range(2 ** n_b):
        bopen = np.array([(b >> i) & 1 for i in range(n_b)], dtype=np.bool_)
        a, sig = _features(zopen, st["zu"], st["zv"], bopen, st["bu"], st["bv"],
                           st["n_lam"], st["n_nb"])
        key3 = (nz << 58) | (a << 48) | sig
        uniq, inv, counts = np.unique(key3, return_inverse=True, return_counts=True)
        per_b.append((inv, counts, uniq >> 58, (uniq >> 48) & 0x3FF, uniq & ((1 << 48) - 1)))
    sigs = np.unique(np.concatenate([x[4] for x in per_b]))
    sig_lab = (sigs[:, None] >> (4 * np.arange(st["n_nb"]))) & 15
    joins = _join_blocks(sig_lab.astype(np.int64), st["pis"], st["n_nb"])
    per_b = [(inv, counts, g_nz, g_a, np.searchsorted(sigs, g_sig))
             for inv, counts, g_nz, g_a, g_sig in per_b]
    out = (st, per_b, joins)
    _FEATURE_CACHE[key] = out
    return out


def rc_diameter(model, lam: Window, frame: Window, with_logz: bool = False):
    """Exact max-diameter of random-cluster kernels over all bond boundaries
    on ``frame`` minus ``lam`` (closed beyond the frame)."""
    st, per_b, joins = _feature_table(lam, frame)
    lp, lq, lq1 = math.log(model.p), math.log(model.q), math.log1p(-model.p)
    n_edges = st["d"] * st["n_lam"]
    hi = lo = None
    zmax, zmin = -math.inf, math.inf
    for inv, counts, g_nz, g_a, sidx in per_b:
        base = g_nz * lp + (n_edges - g_nz) * lq1 + g_a * lq
        # the join term depends on the group only through sigma
        used, s_of_g = np.unique(sidx, return_inverse=True)
        shift = base.max()
        mass = np.bincount(s_of_g, weights=counts * np.exp(base - shift))
        tilt = lq * joins[used]  # (sigmas, pis)
        tmax = tilt.max(axis=0)
        lz = shift + tmax + np.log(mass @ np.exp(tilt - tmax))
        rel = tilt - lz[None, :]
        h_b = (base + rel.max(axis=1)[s_of_g])[inv]
        l_b = (base + rel.min(axis=1)[s_of_g])[inv]
        hi = h_b if hi is None else np.maximum(hi, h_b)
        lo = l_b if lo is None else np.minimum(lo, l_b)
        zmax, zmin = max(zmax, lz.max()), min(zmin, lz.min())
    diam = max(float(np.max(hi - lo)), 0.0)
    return (diam, zmax - zmin) if with_logz else diam
