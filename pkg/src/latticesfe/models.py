"""The four model families as exactly computable finite-volume kernels.

Every model exposes ``log_weights(frame, lam, xi, tail)``: the unnormalized
log-weight of each frame configuration in the rows of ``xi`` (state indices,
columns in frame order), up to a factor that does not depend on the states
inside ``lam``.  Kernels, consistency checks, diameters and the sampler all
go through :func:`kernels_batch`, which assembles rows for every inside
configuration under a batch of boundaries.

A frame is a finite window holding ``lam`` and everything its kernel reads.
Beyond the frame every site carries the model's tail state (closed bonds,
spin-free sites, face value 0, or a fixed reference spin).  Under that
convention a kernel on a given frame is the conditional law of one global
finite measure on the frame, so consistency holds exactly.
"""
from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from . import cluster as cl
from .errors import AmbiguityError, CapacityError, ConfigError, DomainError
from .ising import GRIFFITHS_ALPHABET, SPIN, ising_log_marginal, ising_log_partition
from .lattice import (
    Alphabet, Configuration, Window, _add, _sub, all_states, check_table_size, closure,
    codes_of, edge_boundary, inner_rim, outer_neighbors, square_offsets,
)
from .measures import DensityTable, envelope_diameter, marginal, tv_log

ROW_BLOCK = 1 << 18


def _states_range(start: int, stop: int, n: int, k: int) -> np.ndarray:
    codes = np.arange(start, stop, dtype=np.int64)
    powers = np.asarray(k, dtype=np.int64) ** np.arange(n, dtype=np.int64)
    return ((codes[:, None] // powers[None, :]) % k).astype(np.int8)


# ---------------------------------------------------------------------------
# potentials


@dataclass(frozen=True, eq=False)
class Potential:
    """Finite family of interaction terms, one representative per shift class.

    Each term is (offsets, table): the support A as sites relative to the
    origin, and the energy Phi_A as a table over E^A in code order (first
    offset least significant).  Entries may be +inf for hard constraints.
    """

    alphabet: Alphabet
    terms: tuple
    tail_index: int = 0

    def __post_init__(self):
        k = len(self.alphabet)
        terms = []
        for offsets, table in self.terms:
            offs = tuple(tuple(int(c) for c in o) for o in offsets)
            if len(set(offs)) != len(offs) or not offs:
                raise ConfigError("term offsets must be distinct and nonempty")
            t = np.asarray(table, dtype=float).reshape(-1)
            if t.shape != (k ** len(offs),):
                raise ConfigError(f"term table needs {k ** len(offs)} entries")
            if np.isnan(t).any() or np.isneginf(t).any():
                raise ConfigError("term tables must be finite or +inf")
            t.setflags(write=False)
            terms.append((offs, t))
        object.__setattr__(self, "terms", tuple(terms))
        if not 0 <= self.tail_index < k:
            raise ConfigError("tail state outside the alphabet")

    @property
    def d(self) -> int:
        return len(self.terms[0][0][0]) if self.terms else 1

    def sup(self, i: int) -> float:
        return float(np.max(np.abs(self.terms[i][1])))

    @property
    def norm(self) -> float:
        """Sum over supports containing the origin of sup |Phi_A|."""
        return sum(len(offs) * self.sup(i) for i, (offs, _) in enumerate(self.terms))

    def translates(self, lam: Window) -> list:
        """(term index, sites) for every translate of a term meeting ``lam``."""
        out = set()
        for i, (offs, _) in enumerate(self.terms):
            for x in lam:
                for a in offs:
                    shift = _sub(x, a)
                    out.add((i, tuple(_add(o, shift) for o in offs)))
        return sorted(out)

    def to_json(self) -> dict:
        return {"variant": "potential", "alphabet": self.alphabet.to_json(),
                "tail": self.tail_index,
                "terms": [{"offsets": [list(o) for o in offs], "table": [_jnum(v) for v in t]}
                          for offs, t in self.terms]}


def _jnum(v):
    return "inf" if math.isinf(v) else float(v)


def ising_potential(beta: float, h: float = 0.0, d: int = 1, coupling2: float = 0.0) -> Potential:
    """Nearest-neighbour Ising potential Phi_xy = -beta s_x s_y, Phi_x = -h s_x.

    ``coupling2`` adds a range-2 axial term -coupling2 s_x s_{x+2e_i}.
    Alphabet ("-1", "1") with uniform reference; the tail spin is +1.
    """
    alpha = Alphabet(("-1", "1"))
    pm = np.array([-1.0, 1.0])
    pair = -np.outer(pm, pm).T.reshape(-1)  # code = s0 + 2 s1
    terms = []
    zero = (0,) * d
    for j in range(d):
        e = [0] * d
        e[j] = 1
        terms.append(((zero, tuple(e)), beta * pair))
        if coupling2:
            e2 = [0] * d
            e2[j] = 2
            terms.append(((zero, tuple(e2)), coupling2 * pair))
    if h:
        terms.append(((zero,), -h * pm))
    if not terms:
        terms.append(((zero,), np.zeros(2)))
    return Potential(alpha, tuple(terms), tail_index=1)


def zero_potential(alphabet: Alphabet, d: int = 1) -> Potential:
    return Potential(alphabet, ((((0,) * d,), np.zeros(len(alphabet))),), tail_index=0)


def _term_energy(pot: Potential, i: int, states: np.ndarray) -> np.ndarray:
    k = len(pot.alphabet)
    return pot.terms[i][1][codes_of(states, k)]


def hamiltonian(pot: Potential, lam: Window, delta, config: Configuration) -> float:
    """Sum of Phi_A over translates meeting ``lam`` (and inside ``delta`` unless None)."""
    total = 0.0
    for i, sites in pot.translates(lam):
        if delta is not None and not all(s in delta for s in sites):
            continue
        if not all(s in config.window for s in sites):
            raise AmbiguityError("configuration does not cover a contributing term")
        states = np.array([[config[s] for s in sites]])
        total += float(_term_energy(pot, i, states)[0])
    return total


def eps(pot: Potential, lam: Window, delta: Window) -> float:
    """Sum of sup |Phi_A| over translates meeting ``lam`` that stick out of ``delta``."""
    return float(sum(pot.sup(i) for i, sites in pot.translates(lam)
                     if not all(s in delta for s in sites)))


# ---------------------------------------------------------------------------
# model families


class Model:
    name = "model"
    alphabet: Alphabet
    tail_index = 0
    d = 2

    def required_frame(self, lam: Window) -> Window:
        return closure(lam, square_offsets(lam.d))

    def check_frame(self, frame: Window, lam: Window) -> None:
        if not lam.issubset(frame):
            raise ValueError("window is not contained in the frame")
        if not self.required_frame(lam).issubset(frame):
            raise AmbiguityError("frame does not contain every site the kernel reads")

    def log_weights(self, frame, lam, xi, tail="closed"):  # pragma: no cover
        raise NotImplementedError

    def boundary_bound(self, lam: Window) -> float:
        """Proven upper bound on the max-diameter of the kernels on ``lam``."""
        return math.inf


class PotentialSpec(Model):
    name = "potential"

    def __init__(self, potential: Potential):
        self.potential = potential
        self.alphabet = potential.alphabet
        self.tail_index = potential.tail_index
        self.d = potential.d
        self._lref = np.log(np.asarray(self.alphabet.reference_weights))

    def required_frame(self, lam):
        sites = set(lam)
        for _, t in self.potential.translates(lam):
            sites.update(t)
        return Window.of(sites)

    def log_weights(self, frame, lam, xi, tail="closed"):
        pot = self.potential
        lw = np.zeros(xi.shape[0])
        for i, sites in pot.translates(lam):
            if not all(s in frame for s in sites):
                raise AmbiguityError("frame does not cover a contributing term")
            with np.errstate(invalid="ignore"):
                lw -= _term_energy(pot, i, xi[:, frame.indices(sites)])
        with np.errstate(divide="ignore"):
            lw += self._lref[xi[:, frame.indices(lam)]].sum(axis=1)
        return lw

    def boundary_bound(self, lam):
        return math.inf

    def to_json(self):
        return self.potential.to_json()


def _bits_label(s: int, d: int) -> str:
    return "".join(str((s >> i) & 1) for i in range(d))


class RandomCluster(Model):
    """Bond configurations encoded per site: bit i is the edge {x, x + e_i}."""

    name = "random_cluster"

    def __init__(self, p: float, q: float, d: int = 2):
        if not 0 < p < 1:
            raise ConfigError("p must lie in (0, 1)")
        if not q > 0:
            raise ConfigError("q must be positive")
        self.p, self.q, self.d = float(p), float(q), int(d)
        self.alphabet = Alphabet(tuple(_bits_label(s, d) for s in range(2 ** d)))
        self.popcount = np.array([bin(s).count("1") for s in range(2 ** d)], dtype=np.int64)

    def log_weights(self, frame, lam, xi, tail="closed"):
        layout = _bond_layout(frame)
        labels = cl.label_components(layout.graph, layout.open_mask(xi))
        qual = _qual(frame, lam)
        if tail == "unknown":
            _raise_if_rim(labels, qual, layout.rim_vertices)
        c = cl._count_distinct(labels, qual)
        nz = self.popcount[xi[:, frame.indices(lam)]].sum(axis=1)
        return (nz * math.log(self.p) + (self.d * len(lam) - nz) * math.log1p(-self.p)
                + c * math.log(self.q))

    def cluster_counts(self, frame, lam, xi):
        layout = _bond_layout(frame)
        labels = cl.label_components(layout.graph, layout.open_mask(xi))
        return cl._count_distinct(labels, _qual(frame, lam))

    def boundary_bound(self, lam):
        return 4 * len(edge_boundary(lam)) * abs(math.log(self.q))

    def log_z_bound(self, lam):
        return 2 * len(edge_boundary(lam)) * abs(math.log(self.q))

    def to_json(self):
        return {"variant": "random_cluster", "p": self.p, "q": self.q, "d": self.d}


class LoopOn(Model):
    """{0,1}-valued functions on hexagonal faces, drawn as a triangular grid.

    Weight n^L * x^nc with L the level sets meeting the window or adjacent to
    it and nc the unequal adjacent face pairs touching the window.  The
    weight is a modelling choice, built by analogy with the random-cluster
    cluster count.
    """

    name = "loop"

    def __init__(self, n: float, x: float):
        if not (n > 0 and x > 0):
            raise ConfigError("loop weight n and edge weight x must be positive")
        self.n, self.x, self.d = float(n), float(x), 2
        self.alphabet = Alphabet(("0", "1"))

    def required_frame(self, lam):
        return closure(lam, cl.triangular_offsets())

    def log_weights(self, frame, lam, xi, tail="closed"):
        layout = _face_layout(frame)
        g = layout.graph
        v = np.concatenate([xi, np.zeros((xi.shape[0], 1), xi.dtype)], axis=1)
        same = v[:, g.eu] == v[:, g.ev]
        if tail == "unknown":
            same[:, g.ev == layout.exterior] = False
        labels = cl.label_components(g, same)
        qual = frame.indices(closure(lam, cl.triangular_offsets()))
        if tail == "unknown":
            _raise_if_rim(labels, qual, np.flatnonzero(layout.rim_mask))
        nlev = cl._count_distinct(labels, qual)
        a, b = _touching_pairs(frame, lam)
        nc = (xi[:, a] != xi[:, b]).sum(axis=1)
        return nlev * math.log(self.n) + nc * math.log(self.x)

    def boundary_bound(self, lam):
        nb = len(edge_boundary(lam, cl.triangular_offsets()))
        return 4 * nb * abs(math.log(self.n)) + 2 * nb * abs(math.log(self.x))

    def to_json(self):
        return {"variant": "loop", "n": self.n, "x": self.x}


class Griffiths(Model):
    """Site percolation with an independent Ising model on each open cluster.

    States are indices into ("-1", "0", "1"); the tail state is "0".
    """

    name = "griffiths"
    tail_index = 1

    def __init__(self, p: float, beta: float, d: int = 2):
        if not 0 < p < 1:
            raise ConfigError("p must lie in (0, 1)")
        if beta < 0:
            raise ConfigError("beta must be nonnegative")
        self.p, self.beta, self.d = float(p), float(beta), int(d)
        self.alphabet = GRIFFITHS_ALPHABET

    def log_weights(self, frame, lam, xi, tail="closed"):
        if len(frame) > 64:
            raise CapacityError("cluster bitmasks support frames of at most 64 sites")
        layout = _site_layout(frame)
        g = layout.graph
        spins = SPIN[xi]
        open_ = spins != 0
        emask = open_[:, g.eu] & open_[:, g.ev]
        labels = cl.label_components(g, emask)
        qual = _qual(frame, lam)
        hull = cl.hull_mask(labels, qual, open_)
        if tail == "unknown" and (hull & layout.rim_mask[None, :]).any():
            raise AmbiguityError("an open cluster of the hull reaches the frame rim")
        inside = emask & hull[:, g.eu]
        energy = (inside * spins[:, g.eu] * spins[:, g.ev]).sum(axis=1)
        masks = _cluster_bits(labels, qual, open_)
        uniq, inv = np.unique(masks, return_inverse=True)
        logz = np.array([self._log_z_bits(int(m), frame) for m in uniq])
        lz = logz[inv.reshape(masks.shape)].sum(axis=1)
        nopen = open_[:, frame.indices(lam)].sum(axis=1)
        return (nopen * math.log(self.p) + (len(lam) - nopen) * math.log1p(-self.p)
                - self.beta * energy - lz)

    def _log_z_bits(self, m: int, frame: Window) -> float:
        if m == 0:
            return 0.0
        sites = [frame.sites[i] for i in range(len(frame)) if (m >> i) & 1]
        return ising_log_partition(sites, self.beta)

    def boundary_bound(self, lam):
        return 8 * len(edge_boundary(lam)) * abs(self.beta)

    def log_z_bound(self, lam):
        return 4 * len(edge_boundary(lam)) * abs(self.beta)

    def to_json(self):
        return {"variant": "griffiths", "p": self.p, "beta": self.beta, "d": self.d}


# layout caches ------------------------------------------------------------

@lru_cache(maxsize=256)
def _bond_layout(frame: Window) -> cl.BondLayout:
    return cl.BondLayout.build(frame)


@lru_cache(maxsize=256)
def _site_layout(frame: Window) -> cl.SiteLayout:
    return cl.SiteLayout.build(frame, "square")


@lru_cache(maxsize=256)
def _face_layout(frame: Window) -> cl.SiteLayout:
    return cl.SiteLayout.build(frame, "triangular", exterior=True)


@lru_cache(maxsize=1024)
def _qual(frame: Window, lam: Window) -> np.ndarray:
    return frame.indices(closure(lam, square_offsets(frame.d))).astype(np.int64)


@lru_cache(maxsize=1024)
def _touching_pairs(frame: Window, lam: Window):
    a, b = [], []
    for s in lam:
        for e in cl.triangular_offsets():
            t = _add(s, e)
            if t in lam and t < s:
                continue
            a.append(frame.index(s))
            b.append(frame.index(t))
    return np.array(a, np.intp), np.array(b, np.intp)


def _raise_if_rim(labels, qual, rim_vertices):
    roots = labels[:, qual]
    rim_roots = labels[:, rim_vertices]
    hit = (roots[:, :, None] == rim_roots[:, None, :]).any(axis=(1, 2))
    if hit.any():
        raise AmbiguityError("a counted cluster reaches the frame rim")


def _cluster_bits(labels, qual, open_):
    """Bitmask of each distinct open cluster meeting ``qual``; 0 for repeats."""
    m_rows, n = labels.shape
    bit = np.uint64(1) << np.arange(n, dtype=np.uint64)
    out = np.zeros((m_rows, len(qual)), dtype=np.uint64)
    for j, q in enumerate(qual):
        root = labels[:, q]
        member = (labels == root[:, None]) & open_
        first = np.ones(m_rows, dtype=bool)
        for jj in range(j):
            first &= labels[:, qual[jj]] != root
        first &= open_[:, q]
        out[:, j] = np.where(first, np.bitwise_or.reduce(np.where(member, bit, np.uint64(0)), axis=1),
                             np.uint64(0))
    return out


# ---------------------------------------------------------------------------
# boundary conditions and kernels


@dataclass(frozen=True)
class BoundaryCondition:
    """Deterministic boundary: states on ``frame`` minus the kernel window."""

    frame: Window
    outside: Configuration
    tail: str = "closed"

    def __post_init__(self):
        if not self.outside.window.issubset(self.frame):
            raise ValueError("boundary configuration must live inside the frame")
        if self.tail not in cl.TAILS:
            raise ValueError(f"tail must be one of {cl.TAILS}")

    @property
    def window(self) -> Window:
        return self.frame.difference(self.outside.window)

    @classmethod
    def tail_filled(cls, model: Model, lam: Window, frame: Window | None = None, tail="closed"):
        frame = frame if frame is not None else model.required_frame(lam)
        out = frame.difference(lam)
        return cls(frame, Configuration(out, (model.tail_index,) * len(out), model.alphabet), tail)

    @classmethod
    def from_states(cls, model: Model, lam: Window, frame: Window, states, tail="closed"):
        out = frame.difference(lam)
        return cls(frame, Configuration(out, tuple(int(s) for s in states), model.alphabet), tail)

    @classmethod
    def random(cls, model: Model, lam: Window, frame: Window, rng, tail="closed"):
        out = frame.difference(lam)
        states = rng.integers(0, len(model.alphabet), size=len(out))
        return cls(frame, Configuration(out, tuple(states), model.alphabet), tail)

    def to_json(self) -> dict:
        return {"frame": [list(s) for s in self.frame], "outside": self.outside.to_json(),
                "tail": self.tail}


def kernels_batch(model: Model, lam: Window, frame: Window, outside: np.ndarray,
                  tail: str = "closed") -> tuple:
    """Normalized log-kernels for a batch of boundaries.

    ``outside`` has one row per boundary, columns in the order of
    ``frame - lam``.  Returns (log_tables of shape (B, k^|lam|), log_z of
    shape (B,)).
    """
    model.check_frame(frame, lam)
    k = len(model.alphabet)
    n_in = len(lam)
    size = check_table_size(k, n_in, "kernel table")
    outside = np.atleast_2d(np.asarray(outside, dtype=np.int8))
    if outside.shape[1] != len(frame) - n_in:
        raise ValueError("boundary rows must cover frame minus window")
    li = frame.indices(lam)
    oi = frame.indices(frame.difference(lam))
    zeta = all_states(n_in, k)
    n_b = outside.shape[0]
    total = n_b * size
    lw = np.empty(total)
    for start in range(0, total, ROW_BLOCK):
        stop = min(total, start + ROW_BLOCK)
        r = np.arange(start, stop)
        xi = np.empty((stop - start, len(frame)), dtype=np.int8)
        xi[:, li] = zeta[r % size]
        xi[:, oi] = outside[r // size]
        lw[start:stop] = model.log_weights(frame, lam, xi, tail)
    lw = lw.reshape(n_b, size)
    lz = logsumexp(lw, axis=1)
    if not np.all(np.isfinite(lz)):
        raise DomainError("a boundary admits no configuration of positive weight")
    return lw - lz[:, None], lz


def kernel(model: Model, lam: Window, bc: BoundaryCondition) -> DensityTable:
    """The finite-volume Gibbs law on E^lam under a deterministic boundary."""
    if bc.window != lam:
        raise ValueError("boundary must cover exactly frame minus window")
    states = np.array(bc.outside.states, dtype=np.int8)[None, :]
    lt, lz = kernels_batch(model, lam, bc.frame, states, bc.tail)
    return DensityTable(lam, model.alphabet, lt[0], normalized=True, log_z=float(lz[0]))


def check_consistency(model: Model, lam: Window, delta: Window, bc: BoundaryCondition) -> float:
    """TV distance between gamma_delta and gamma_delta composed with gamma_lam.

    ``bc`` is a boundary for ``delta``; the inner kernels use the same frame
    with the delta-minus-lam states drawn from gamma_delta.
    """
    if not lam.issubset(delta):
        raise ValueError("window must be contained in delta")
    g_delta = kernel(model, delta, bc)
    if lam == delta:
        return 0.0
    ring = delta.difference(lam)
    m = marginal(g_delta, ring)
    k = len(model.alphabet)
    frame = bc.frame
    out_lam = frame.difference(lam)
    # boundary rows for lam: ring states vary, the rest is the delta boundary
    ring_states = all_states(len(ring), k)
    rows = np.empty((len(ring_states), len(out_lam)), dtype=np.int8)
    pos_ring = out_lam.indices(ring)
    pos_bc = out_lam.indices(bc.outside.window)
    rows[:, pos_ring] = ring_states
    rows[:, pos_bc] = np.array(bc.outside.states, dtype=np.int8)
    lt, _ = kernels_batch(model, lam, frame, rows, bc.tail)
    d_states = all_states(len(delta), k)
    zc = codes_of(d_states[:, delta.indices(lam)], k)
    uc = codes_of(d_states[:, delta.indices(ring)], k)
    composed = m.log_weights[uc] + lt[uc, zc]
    return tv_log(composed, g_delta.log_weights)


# ---------------------------------------------------------------------------
# diameters


def _envelope_scan(model, lam, frame, fixed: dict, tail="closed", threads=1, with_logz=False):
    """Running pointwise max/min of log-kernels over all boundaries on the
    free part of frame - lam (sites not pinned by ``fixed``)."""
    k = len(model.alphabet)
    out = frame.difference(lam)
    free = [s for s in out if s not in fixed]
    n_free = len(free)
    n_b = check_table_size(k, n_free, "boundary enumeration")
    size = check_table_size(k, len(lam), "kernel table")
    pos_free = out.indices(free)
    pinned = [(out.index(s), v) for s, v in fixed.items()]
    chunk = max(1, ROW_BLOCK // size)
    starts = list(range(0, n_b, chunk))

    def work(start):
        stop = min(n_b, start + chunk)
        rows = np.empty((stop - start, len(out)), dtype=np.int8)
        rows[:, pos_free] = _states_range(start, stop, n_free, k)
        for i, v in pinned:
            rows[:, i] = v
        lt, lz = kernels_batch(model, lam, frame, rows, tail)
        return lt.max(axis=0), lt.min(axis=0), float(lz.max()), float(lz.min())

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(work, starts))
    else:
        parts = [work(s) for s in starts]
    hi = np.max([p[0] for p in parts], axis=0)
    lo = np.min([p[1] for p in parts], axis=0)
    zr = (max(p[2] for p in parts), min(p[3] for p in parts))
    return (hi, lo, zr) if with_logz else (hi, lo)


def diam_B(model: Model, lam: Window, frame: Window | None = None, method: str = "auto",
           threads: int = 1) -> float:
    """Max-diameter of the kernels on ``lam`` over every deterministic boundary on the frame."""
    frame = frame if frame is not None else model.required_frame(lam)
    if isinstance(model, RandomCluster) and method in ("auto", "signature"):
        n_out = len(frame) - len(lam)
        if method == "signature" or len(model.alphabet) ** n_out > (1 << 22):
            from .signatures import rc_diameter
            return rc_diameter(model, lam, frame)
    hi, lo = _envelope_scan(model, lam, frame, {}, threads=threads)
    return envelope_diameter(np.stack([hi, lo]))


def diam_B_restricted(model: Model, lam: Window, delta: Window, pinned: Configuration,
                      frame: Window | None = None, threads: int = 1) -> float:
    """Diameter over boundaries that agree with ``pinned`` on delta - lam."""
    frame = frame if frame is not None else model.required_frame(delta)
    if pinned.window != delta.difference(lam):
        raise ValueError("pinned configuration must cover delta minus window")
    fixed = dict(zip(pinned.window, pinned.states))
    hi, lo = _envelope_scan(model, lam, frame, fixed, threads=threads)
    return envelope_diameter(np.stack([hi, lo]))


def log_z_spread(model: Model, lam: Window, frame: Window | None = None) -> float:
    """max - min of log Z over all boundaries on the frame (kernel-form constants)."""
    frame = frame if frame is not None else model.required_frame(lam)
    _, _, (zmax, zmin) = _envelope_scan(model, lam, frame, {}, with_logz=True)
    return zmax - zmin


# ---------------------------------------------------------------------------
# Griffiths kernel through the boundary-ratio form


def _components(sites, offsets):
    sites = list(sites)
    index = {s: i for i, s in enumerate(sites)}
    uf = cl.UnionFind(len(sites))
    for s in sites:
        for e in offsets:
            t = _add(s, e)
            if t in index:
                uf.union(index[s], index[t])
    groups = {}
    for s in sites:
        groups.setdefault(uf.find(index[s]), []).append(s)
    return list(groups.values())


def _ising_marginal_brute(sites, beta, keep):
    """Normalized log-marginal on ``keep`` by direct summation (small clusters)."""
    sites = sorted(sites)
    n = len(sites)
    if n > 20:
        t = ising_log_marginal(sites, beta, keep)
        return t - logsumexp(t)
    spins = np.array(list(itertools.product((-1, 1), repeat=n)), dtype=np.int64)
    idx = {s: i for i, s in enumerate(sites)}
    energy = np.zeros(len(spins))
    for s in sites:
        for j in range(len(s)):
            e = [0] * len(s)
            e[j] = 1
            t = _add(s, tuple(e))
            if t in idx:
                energy += spins[:, idx[s]] * spins[:, idx[t]]
    lw = -beta * energy
    kept = (spins[:, [idx[s] for s in keep]] > 0).astype(int)
    out = np.full((2,) * len(keep), -np.inf)
    for row in itertools.product((0, 1), repeat=len(keep)):
        sel = np.all(kept == np.array(row), axis=1) if keep else np.ones(len(spins), bool)
        out[row] = logsumexp(lw[sel])
    return out - logsumexp(out)


def griffiths_kernel_simplified(model: Griffiths, lam: Window, bc: BoundaryCondition) -> DensityTable:
    """Griffiths kernel written as percolation times the inside Ising law,
    tilted by the boundary factor f and divided by its expectation under the
    inside law times the Ising laws of the outside open clusters.

    ``log_z`` of the result is the normalizing constant of this form.
    """
    beta, p = model.beta, model.p
    frame = bc.frame
    offsets = square_offsets(lam.d)
    model.check_frame(frame, lam)
    outside = bc.outside.as_dict()
    open_out = [s for s in bc.outside.window if SPIN[outside[s]] != 0]
    clusters = _components(open_out, offsets)
    nbr = set(outer_neighbors(lam, offsets))
    rim = set(inner_rim(frame, offsets))
    factors = []  # (adjacent sites, log-marginal on them)
    for c in clusters:
        touch = sorted(s for s in c if s in nbr)
        if not touch:
            continue
        if bc.tail == "unknown" and any(s in rim for s in c):
            raise AmbiguityError("an outside cluster next to the window reaches the frame rim")
        factors.append((touch, _ising_marginal_brute(c, beta, touch)))
    bsites = [s for f in factors for s in f[0]]
    # boundary edges xy with x in lam, y outside
    cross = [(lam.index(x), y) for x, y in
             ((a, b) if a in lam else (b, a) for a, b in edge_boundary(lam, offsets))]

    k = 3
    zeta = all_states(len(lam), k)
    lw = np.empty(len(zeta))
    for code, z in enumerate(zeta):
        s_in = SPIN[z]
        open_in = [i for i in range(len(lam)) if s_in[i] != 0]
        n_open = len(open_in)
        base = n_open * math.log(p) + (len(lam) - n_open) * math.log1p(-p)
        # inside Ising law on the open sites of lam
        in_sites = [lam.sites[i] for i in open_in]
        la_in = _ising_marginal_brute(in_sites, beta, in_sites) if in_sites else np.zeros(())
        la_z = la_in[tuple(int(s_in[i] > 0) for i in open_in)] if in_sites else 0.0
        # f at xi
        log_f = 0.0
        for i, y in cross:
            sy = SPIN[outside[y]]
            log_f += -beta * s_in[i] * sy
        # expectation of f under inside law x outside cluster laws
        vars_ = in_sites + bsites
        terms = []
        for row in itertools.product((-1, 1), repeat=len(vars_)):
            val = {s: r for s, r in zip(vars_, row)}
            lp = la_in[tuple(int(val[s] > 0) for s in in_sites)] if in_sites else 0.0
            for touch, lm in factors:
                lp += lm[tuple(int(val[s] > 0) for s in touch)]
            e = 0.0
            for i, y in cross:
                if s_in[i] != 0 and y in val and lam.sites[i] in val:
                    e += val[lam.sites[i]] * val[y]
            terms.append(lp - beta * e)
        log_d = float(logsumexp(terms))
        lw[code] = base + la_z + log_f - log_d
    lz = float(logsumexp(lw))
    return DensityTable(lam, model.alphabet, lw - lz, normalized=True, log_z=lz)


def griffiths_log_z_spread(model: Griffiths, lam: Window, frame: Window | None = None) -> float:
    """Spread of the boundary-ratio-form normalizer over all boundaries on the frame."""
    frame = frame if frame is not None else model.required_frame(lam)
    out = frame.difference(lam)
    vals = []
    for states in itertools.product(range(3), repeat=len(out)):
        bc = BoundaryCondition(frame, Configuration(out, states, model.alphabet))
        vals.append(griffiths_kernel_simplified(model, lam, bc).log_z)
    return max(vals) - min(vals)


# ---------------------------------------------------------------------------
# loading


def model_from_json(obj) -> Model:
    """Build a model from its JSON description; unknown keys are rejected."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    obj = dict(obj)
    variant = obj.pop("variant", None)
    try:
        if variant == "random_cluster":
            model = RandomCluster(obj.pop("p"), obj.pop("q"), obj.pop("d", 2))
        elif variant == "griffiths":
            model = Griffiths(obj.pop("p"), obj.pop("beta"), obj.pop("d", 2))
        elif variant == "loop":
            model = LoopOn(obj.pop("n"), obj.pop("x"))
        elif variant == "ising":
            model = PotentialSpec(ising_potential(obj.pop("beta"), obj.pop("h", 0.0),
                                                  obj.pop("d", 1), obj.pop("coupling2", 0.0)))
        elif variant == "zero":
            alpha = Alphabet.from_json(obj.pop("alphabet", {"labels": ["0", "1"]}))
            model = PotentialSpec(zero_potential(alpha, obj.pop("d", 1)))
        elif variant == "potential":
            alpha = Alphabet.from_json(obj.pop("alphabet"))
            terms = [(t["offsets"], [math.inf if v == "inf" else float(v) for v in t["table"]])
                     for t in obj.pop("terms")]
            model = PotentialSpec(Potential(alpha, tuple(terms), obj.pop("tail", 0)))
        else:
            raise ConfigError(f"unknown model variant {variant!r}")
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad model description: {exc}") from None
    if obj:
        raise ConfigError(f"unknown model keys: {sorted(obj)}")
    return model
