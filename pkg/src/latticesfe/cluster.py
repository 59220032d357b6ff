"""Cluster and level-set labeling on finite frames.

Labeling is union-find.  The scalar :class:`UnionFind` serves one-off
queries; :func:`label_components` runs the same algorithm compiled with
numba over a batch of edge masks, which is how kernels are built for every
configuration of a window at once.

Beyond a frame the tail convention decides what happens: ``"closed"`` means
every site outside the frame is closed (state 0), which makes all counts
exact; ``"unknown"`` means nothing is known out there, so any qualifying
cluster touching the frame rim raises :class:`AmbiguityError`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numba
import numpy as np

from .errors import AmbiguityError
from .lattice import Window, _add, closure, outer_neighbors, square_offsets

TAILS = ("closed", "unknown")


def triangular_offsets() -> tuple:
    """Six neighbours of a face of the hexagonal lattice, on a 2d grid."""
    return ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1))


class UnionFind:
    """Disjoint sets over 0..n-1; roots are the smallest member."""

    def __init__(self, n):
        self.parent = list(range(n))
        self.components = n

    def find(self, a):
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if ra < rb:
            self.parent[rb] = ra
        else:
            self.parent[ra] = rb
        self.components -= 1
        return True


@numba.njit(cache=True)
def _find(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


@numba.njit(cache=True)
def _label_rows(n_vertices, eu, ev, open_mask):
    m_rows = open_mask.shape[0]
    n_edges = eu.shape[0]
    labels = np.empty((m_rows, n_vertices), dtype=np.int32)
    parent = np.empty(n_vertices, dtype=np.int32)
    for m in range(m_rows):
        for v in range(n_vertices):
            parent[v] = v
        for e in range(n_edges):
            if open_mask[m, e]:
                a = _find(parent, eu[e])
                b = _find(parent, ev[e])
                if a < b:
                    parent[b] = a
                elif b < a:
                    parent[a] = b
        for v in range(n_vertices):
            labels[m, v] = _find(parent, v)
    return labels


@numba.njit(cache=True)
def _count_distinct(labels, qual):
    m_rows, n_vertices = labels.shape
    out = np.zeros(m_rows, dtype=np.int64)
    stamp = np.zeros(n_vertices, dtype=np.int64)
    for m in range(m_rows):
        c = 0
        for q in qual:
            r = labels[m, q]
            if stamp[r] != m + 1:
                stamp[r] = m + 1
                c += 1
        out[m] = c
    return out


@numba.njit(cache=True)
def _qualifying_mask(labels, qual, vertex_ok):
    """Vertices whose component contains a qualifying vertex that is ok."""
    m_rows, n_vertices = labels.shape
    out = np.zeros((m_rows, n_vertices), dtype=np.bool_)
    stamp = np.zeros(n_vertices, dtype=np.int64)
    for m in range(m_rows):
        for q in qual:
            if vertex_ok[m, q]:
                stamp[labels[m, q]] = m + 1
        for v in range(n_vertices):
            if stamp[labels[m, v]] == m + 1:
                out[m, v] = True
    return out


@dataclass(frozen=True)
class Graph:
    """Vertex count and edge endpoint arrays."""

    n_vertices: int
    eu: np.ndarray
    ev: np.ndarray

    @property
    def n_edges(self):
        return self.eu.shape[0]


def label_components(graph: Graph, open_mask: np.ndarray) -> np.ndarray:
    """Component labels (smallest member index) for each row of edge flags."""
    open_mask = np.ascontiguousarray(np.atleast_2d(open_mask), dtype=np.bool_)
    if open_mask.shape[1] != graph.n_edges:
        raise ValueError("one open flag per edge")
    return _label_rows(graph.n_vertices, graph.eu, graph.ev, open_mask)


def count_components(graph: Graph, open_mask: np.ndarray, qualifying) -> np.ndarray:
    """Number of distinct components meeting ``qualifying`` vertices, per row."""
    labels = label_components(graph, open_mask)
    return _count_distinct(labels, np.asarray(qualifying, dtype=np.int64))


def hull_mask(labels: np.ndarray, qualifying, vertex_ok: np.ndarray) -> np.ndarray:
    return _qualifying_mask(labels, np.asarray(qualifying, dtype=np.int64),
                            np.ascontiguousarray(vertex_ok, dtype=np.bool_))


# ---------------------------------------------------------------------------
# layouts: the graphs behind bond frames, site frames and face frames


def rim(frame: Window, offsets) -> np.ndarray:
    """Boolean mask of frame sites with a neighbour outside the frame."""
    return np.array([any(_add(s, e) not in frame for e in offsets) for s in frame], dtype=bool)


@dataclass(frozen=True)
class BondLayout:
    """Bond-percolation graph of a frame under the per-site edge encoding.

    Site x carries one bit per direction i: bit i is the edge {x, x + e_i}.
    Vertices are the frame sites followed by the halo: sites outside the
    frame reached by an edge encoded inside it.
    """

    frame: Window
    graph: Graph
    src: np.ndarray  # frame index of the site encoding each edge
    bit: np.ndarray  # direction of each edge
    halo: tuple
    rim_vertices: np.ndarray

    @classmethod
    def build(cls, frame: Window) -> "BondLayout":
        d = frame.d
        halo = {}
        eu, ev, src, bit = [], [], [], []
        n = len(frame)
        for i, x in enumerate(frame):
            for j in range(d):
                e = [0] * d
                e[j] = 1
                y = _add(x, tuple(e))
                if y in frame:
                    v = frame.index(y)
                else:
                    v = halo.setdefault(y, n + len(halo))
                eu.append(i)
                ev.append(v)
                src.append(i)
                bit.append(j)
        graph = Graph(n + len(halo), np.array(eu, np.int64), np.array(ev, np.int64))
        rim_mask = rim(frame, square_offsets(d))
        rim_vertices = np.concatenate([np.flatnonzero(rim_mask), np.arange(n, n + len(halo))])
        return cls(frame, graph, np.array(src, np.intp), np.array(bit, np.int64),
                   tuple(sorted(halo, key=halo.get)), rim_vertices)

    def open_mask(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(np.asarray(states, dtype=np.int64))
        return ((states[:, self.src] >> self.bit) & 1).astype(np.bool_)


@dataclass(frozen=True)
class SiteLayout:
    """Adjacency graph of a frame (square or triangular) for site labelings.

    The triangular variant carries one extra vertex standing for the
    connected exterior of the frame, joined to every rim face.
    """

    frame: Window
    offsets: tuple
    graph: Graph
    rim_mask: np.ndarray
    exterior: int  # index of the exterior vertex, or -1

    @classmethod
    def build(cls, frame: Window, adjacency: str = "square", exterior: bool = False) -> "SiteLayout":
        offsets = square_offsets(frame.d) if adjacency == "square" else triangular_offsets()
        eu, ev = [], []
        for i, x in enumerate(frame):
            for e in offsets:
                y = _add(x, e)
                if y in frame:
                    j = frame.index(y)
                    if i < j:
                        eu.append(i)
                        ev.append(j)
        rim_mask = rim(frame, offsets)
        n = len(frame)
        ext = -1
        if exterior:
            ext = n
            for i in np.flatnonzero(rim_mask):
                eu.append(int(i))
                ev.append(ext)
            n += 1
        return cls(frame, offsets, Graph(n, np.array(eu, np.int64), np.array(ev, np.int64)),
                   rim_mask, ext)


# ---------------------------------------------------------------------------
# frames


@dataclass(frozen=True)
class BondFrame:
    """Bond configuration on a frame: per-site bitmask of open forward edges."""

    frame: Window
    site_states: tuple
    tail: str = "closed"

    def __post_init__(self):
        states = tuple(int(s) for s in self.site_states)
        if len(states) != len(self.frame):
            raise ValueError("one bitmask per frame site")
        if any(not 0 <= s < 2 ** self.frame.d for s in states):
            raise ValueError("bitmask outside {0,1}^d")
        if self.tail not in TAILS:
            raise ValueError(f"tail must be one of {TAILS}")
        object.__setattr__(self, "site_states", states)

    def edge_states(self) -> dict:
        """Open/closed flag per edge with both endpoints in the frame."""
        out = {}
        d = self.frame.d
        for x, s in zip(self.frame, self.site_states):
            for j in range(d):
                e = [0] * d
                e[j] = 1
                y = _add(x, tuple(e))
                if y in self.frame:
                    out[(x, y)] = bool((s >> j) & 1)
        return out

    @property
    def n_open(self) -> int:
        return sum(bin(s).count("1") for s in self.site_states)

    def to_json(self) -> dict:
        return {"sites": [list(s) for s in self.frame], "states": list(self.site_states),
                "edges": [[list(a), list(b), int(v)] for (a, b), v in sorted(self.edge_states().items())],
                "tail": self.tail}

    @classmethod
    def from_json(cls, obj) -> "BondFrame":
        if isinstance(obj, str):
            obj = json.loads(obj)
        pairs = sorted(zip((tuple(s) for s in obj["sites"]), obj["states"]))
        return cls(Window.of(p[0] for p in pairs), tuple(p[1] for p in pairs), obj.get("tail", "closed"))


@dataclass(frozen=True)
class SiteFrame:
    """Site values on a frame: Griffiths states in {-1,0,1} on the square
    lattice, or {0,1} face values on the triangular lattice."""

    frame: Window
    values: tuple
    tail: str = "closed"
    adjacency: str = "square"

    def __post_init__(self):
        values = tuple(int(v) for v in self.values)
        if len(values) != len(self.frame):
            raise ValueError("one value per frame site")
        if self.adjacency == "square":
            if any(v not in (-1, 0, 1) for v in values):
                raise ValueError("site values must lie in {-1, 0, 1}")
        elif self.adjacency == "triangular":
            if self.frame.d != 2 or any(v not in (0, 1) for v in values):
                raise ValueError("face values must lie in {0, 1} on a 2d frame")
        else:
            raise ValueError("adjacency must be 'square' or 'triangular'")
        if self.tail not in TAILS:
            raise ValueError(f"tail must be one of {TAILS}")
        object.__setattr__(self, "values", values)

    def open_sites(self) -> Window:
        return Window.of(s for s, v in zip(self.frame, self.values) if v != 0)

    def to_json(self) -> dict:
        return {"sites": [list(s) for s in self.frame], "values": list(self.values),
                "tail": self.tail, "adjacency": self.adjacency}

    @classmethod
    def from_json(cls, obj) -> "SiteFrame":
        if isinstance(obj, str):
            obj = json.loads(obj)
        pairs = sorted(zip((tuple(s) for s in obj["sites"]), obj["values"]))
        return cls(Window.of(p[0] for p in pairs), tuple(p[1] for p in pairs),
                   obj.get("tail", "closed"), obj.get("adjacency", "square"))


def _require_cover(frame: Window, lam: Window, offsets) -> Window:
    if not lam.issubset(frame):
        raise ValueError("window is not contained in the frame")
    region = closure(lam, offsets)
    if not region.issubset(frame):
        raise ValueError("frame must contain every site adjacent to the window")
    return region


def _bond_labels(bf: BondFrame):
    layout = BondLayout.build(bf.frame)
    states = np.array(bf.site_states, dtype=np.int64)[None, :]
    return layout, label_components(layout.graph, layout.open_mask(states))[0]


def _touches_rim(labels, qual, rim_vertices) -> bool:
    roots = {int(labels[q]) for q in qual}
    return any(int(labels[v]) in roots for v in rim_vertices)


def count_clusters(bf: BondFrame, lam: Window) -> int:
    """Open clusters meeting ``lam`` or containing a site adjacent to it.

    Sites with no open edge are singleton clusters.
    """
    region = _require_cover(bf.frame, lam, square_offsets(bf.frame.d))
    layout, labels = _bond_labels(bf)
    qual = bf.frame.indices(region)
    if bf.tail == "unknown" and _touches_rim(labels, qual, layout.rim_vertices):
        raise AmbiguityError("a counted cluster reaches the frame rim")
    return len({int(labels[q]) for q in qual})


def _site_labels(sf: SiteFrame):
    if sf.adjacency == "square":
        layout = SiteLayout.build(sf.frame, "square")
        v = np.array(sf.values)
        mask = (v[layout.graph.eu] != 0) & (v[layout.graph.ev] != 0)
    else:
        layout = SiteLayout.build(sf.frame, "triangular", exterior=True)
        v = np.append(np.array(sf.values), 0)  # exterior carries the tail value
        mask = v[layout.graph.eu] == v[layout.graph.ev]
        if sf.tail == "unknown":
            mask[layout.graph.ev == layout.exterior] = False
    return layout, label_components(layout.graph, mask[None, :])[0]


def cluster_hull(sf: SiteFrame, lam: Window) -> Window:
    """Union of open clusters containing a site in or adjacent to ``lam``."""
    if sf.adjacency != "square":
        raise ValueError("cluster hulls are defined on square-lattice site frames")
    region = _require_cover(sf.frame, lam, square_offsets(sf.frame.d))
    layout, labels = _site_labels(sf)
    v = np.array(sf.values)
    qual = [i for i in sf.frame.indices(region) if v[i] != 0]
    if sf.tail == "unknown" and _touches_rim(labels, qual, np.flatnonzero(layout.rim_mask)):
        raise AmbiguityError("an open cluster of the hull reaches the frame rim")
    roots = {int(labels[q]) for q in qual}
    return Window.of(s for i, s in enumerate(sf.frame) if v[i] != 0 and int(labels[i]) in roots)


def count_level_sets(sf: SiteFrame, lam: Window) -> int:
    """Constant-value components (0 and 1 alike) meeting ``lam`` or adjacent to it.

    Faces beyond the frame hold the value 0 under the closed tail and form a
    single connected exterior component.
    """
    if sf.adjacency != "triangular":
        raise ValueError("level sets are counted on triangular face frames")
    region = _require_cover(sf.frame, lam, triangular_offsets())
    layout, labels = _site_labels(sf)
    qual = sf.frame.indices(region)
    if sf.tail == "unknown" and _touches_rim(labels, qual, np.flatnonzero(layout.rim_mask)):
        raise AmbiguityError("a counted level set reaches the frame rim")
    return len({int(labels[q]) for q in qual})


def is_frame_sufficient(frame_obj, lam: Window) -> bool:
    """True if no cluster or level set qualifying for ``lam`` touches the rim."""
    if isinstance(frame_obj, BondFrame):
        _require_cover(frame_obj.frame, lam, square_offsets(frame_obj.frame.d))
        layout, labels = _bond_labels(frame_obj)
        qual = frame_obj.frame.indices(closure(lam))
        return not _touches_rim(labels, qual, layout.rim_vertices)
    if frame_obj.adjacency == "square":
        region = _require_cover(frame_obj.frame, lam, square_offsets(frame_obj.frame.d))
        layout, labels = _site_labels(frame_obj)
        v = np.array(frame_obj.values)
        qual = [i for i in frame_obj.frame.indices(region) if v[i] != 0]
        return not _touches_rim(labels, qual, np.flatnonzero(layout.rim_mask))
    region = _require_cover(frame_obj.frame, lam, triangular_offsets())
    # sufficiency is a statement about the frame alone: ignore the exterior
    unknown = SiteFrame(frame_obj.frame, frame_obj.values, "unknown", "triangular")
    layout, labels = _site_labels(unknown)
    qual = frame_obj.frame.indices(region)
    return not _touches_rim(labels, qual, np.flatnonzero(layout.rim_mask))


def level_set_neighbors(lam: Window) -> Window:
    return outer_neighbors(lam, triangular_offsets())
