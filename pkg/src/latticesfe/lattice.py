"""Finite windows of Z^d, edge boundaries, and configuration codes.

Every window keeps its sites in lexicographic order (last coordinate
fastest).  Configuration codes, density-table indices and CSV column orders
all derive from that order: the first site of a window is the least
significant digit of a code.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import CapacityError

Site = tuple  # tuple[int, ...]
Edge = tuple  # (Site, Site) with the smaller site first

# enumeration guard: maximum number of entries in any exact table
_GUARD = {"max_table": 2**24, "max_dim": 4}


def set_guard(max_table: int | None = None, max_dim: int | None = None) -> dict:
    """Override the enumeration guard; returns the previous values."""
    old = dict(_GUARD)
    if max_table is not None:
        _GUARD["max_table"] = int(max_table)
    if max_dim is not None:
        _GUARD["max_dim"] = int(max_dim)
    return old


def guard() -> dict:
    return dict(_GUARD)


def check_table_size(k: int, n_sites: int, what: str = "table") -> int:
    """Return k**n_sites, raising CapacityError if it exceeds the guard."""
    size = int(k) ** int(n_sites)
    if size > _GUARD["max_table"]:
        raise CapacityError(
            f"{what} would need {k}^{n_sites} = {size} entries "
            f"(guard is {_GUARD['max_table']})"
        )
    return size


def _as_site(coords) -> Site:
    s = tuple(int(c) for c in coords)
    if not s:
        raise ValueError("a site needs at least one coordinate")
    for c in s:
        if not -(2**63) <= c < 2**63:
            raise ValueError(f"coordinate {c} does not fit in 64 bits")
    return s


@dataclass(frozen=True)
class Window:
    """An ordered finite set of sites of Z^d (possibly empty)."""

    sites: tuple
    _index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        sites = tuple(sorted({_as_site(s) for s in self.sites}))
        if len(sites) != len(self.sites):
            raise ValueError("window sites must be distinct")
        dims = {len(s) for s in sites}
        if len(dims) > 1:
            raise ValueError(f"mixed dimensions in window: {sorted(dims)}")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(sites)})

    @classmethod
    def of(cls, sites: Iterable) -> "Window":
        """Build a window from any iterable of coordinate sequences."""
        return cls(tuple(_as_site(s) for s in sites))

    @property
    def d(self) -> int:
        return len(self.sites[0]) if self.sites else 0

    def __len__(self):
        return len(self.sites)

    def __iter__(self):
        return iter(self.sites)

    def __contains__(self, site):
        return tuple(site) in self._index

    def index(self, site) -> int:
        return self._index[tuple(site)]

    def indices(self, sites: Iterable) -> np.ndarray:
        return np.array([self._index[tuple(s)] for s in sites], dtype=np.intp)

    def union(self, other: "Window") -> "Window":
        return Window.of(set(self.sites) | set(other.sites))

    def difference(self, other: "Window") -> "Window":
        return Window.of(s for s in self.sites if s not in other)

    def intersection(self, other: "Window") -> "Window":
        return Window.of(s for s in self.sites if s in other)

    def issubset(self, other: "Window") -> bool:
        return all(s in other for s in self.sites)

    def isdisjoint(self, other: "Window") -> bool:
        return not any(s in other for s in self.sites)

    def to_json(self) -> dict:
        return {"sites": [list(s) for s in self.sites]}

    @classmethod
    def from_json(cls, obj) -> "Window":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls.of(obj["sites"])


def make_box(n: int, d: int) -> Window:
    """The box {-n, ..., n}^d."""
    if n < 0:
        raise ValueError("box radius must be nonnegative")
    if not 1 <= d <= _GUARD["max_dim"]:
        raise CapacityError(f"dimension {d} outside 1..{_GUARD['max_dim']}")
    if (2 * n + 1) ** d > _GUARD["max_table"]:
        raise CapacityError(f"box of radius {n} in d={d} exceeds the guard")
    return Window(tuple(itertools.product(range(-n, n + 1), repeat=d)))


def block(shape: Sequence[int], origin: Sequence[int] | None = None) -> Window:
    """Rectangular block with the given side lengths, anchored at ``origin``."""
    origin = tuple(origin) if origin is not None else (0,) * len(shape)
    ranges = [range(o, o + s) for o, s in zip(origin, shape)]
    return Window(tuple(itertools.product(*ranges)))


def square_offsets(d: int) -> tuple:
    """Nearest-neighbour offsets of Z^d: +-e_i."""
    out = []
    for i in range(d):
        for sgn in (1, -1):
            e = [0] * d
            e[i] = sgn
            out.append(tuple(e))
    return tuple(out)


def _add(a: Site, b: Site) -> Site:
    return tuple(x + y for x, y in zip(a, b))


def _sub(a: Site, b: Site) -> Site:
    return tuple(x - y for x, y in zip(a, b))


def outer_neighbors(window: Window, offsets: Sequence[Site] | None = None) -> Window:
    """Sites outside ``window`` adjacent to it."""
    offsets = offsets or square_offsets(window.d)
    out = set()
    for s in window:
        for e in offsets:
            t = _add(s, e)
            if t not in window:
                out.add(t)
    return Window.of(out)


def closure(window: Window, offsets: Sequence[Site] | None = None) -> Window:
    """``window`` together with its outer neighbours."""
    return window.union(outer_neighbors(window, offsets))


def inner_rim(window: Window, offsets: Sequence[Site] | None = None) -> Window:
    """Sites of ``window`` having at least one neighbour outside it."""
    offsets = offsets or square_offsets(window.d)
    return Window.of(s for s in window if any(_add(s, e) not in window for e in offsets))


def make_edge(a: Site, b: Site) -> Edge:
    a, b = tuple(a), tuple(b)
    return (a, b) if a <= b else (b, a)


def edge_boundary(window: Window, offsets: Sequence[Site] | None = None) -> frozenset:
    """Edges with exactly one endpoint in ``window``."""
    if len(window) == 0:
        raise ValueError("edge boundary of an empty window")
    offsets = offsets or square_offsets(window.d)
    out = set()
    for s in window:
        for e in offsets:
            t = _add(s, e)
            if t not in window:
                out.add(make_edge(s, t))
    return frozenset(out)


def internal_edges(window: Window, offsets: Sequence[Site] | None = None) -> list:
    """Edges with both endpoints in ``window``, in canonical order."""
    offsets = offsets or square_offsets(window.d)
    out = set()
    for s in window:
        for e in offsets:
            t = _add(s, e)
            if t in window:
                out.add(make_edge(s, t))
    return sorted(out)


@dataclass(frozen=True)
class Alphabet:
    """Finite state space with a reference probability vector."""

    labels: tuple
    reference_weights: tuple = ()

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        if not labels:
            raise ValueError("alphabet needs at least one label")
        if len(set(labels)) != len(labels):
            raise ValueError("alphabet labels must be distinct")
        w = self.reference_weights or (1.0 / len(labels),) * len(labels)
        w = tuple(float(x) for x in w)
        if len(w) != len(labels):
            raise ValueError("one reference weight per label")
        if min(w) < 0 or abs(sum(w) - 1.0) > 1e-12:
            raise ValueError("reference weights must be nonnegative and sum to 1")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "reference_weights", w)

    def __len__(self):
        return len(self.labels)

    def index(self, label) -> int:
        return self.labels.index(str(label))

    def to_json(self) -> dict:
        return {"labels": list(self.labels), "weights": list(self.reference_weights)}

    @classmethod
    def from_json(cls, obj) -> "Alphabet":
        return cls(tuple(obj["labels"]), tuple(obj.get("weights", ())))


@dataclass(frozen=True)
class Configuration:
    """Assignment of one alphabet index per window site, in window order."""

    window: Window
    states: tuple
    alphabet: Alphabet

    def __post_init__(self):
        states = tuple(int(s) for s in self.states)
        if len(states) != len(self.window):
            raise ValueError("one state per window site")
        k = len(self.alphabet)
        if any(not 0 <= s < k for s in states):
            raise ValueError("state index outside the alphabet")
        object.__setattr__(self, "states", states)

    def __getitem__(self, site):
        return self.states[self.window.index(site)]

    def as_dict(self) -> dict:
        return dict(zip(self.window.sites, self.states))

    def restrict(self, sub: Window) -> "Configuration":
        return Configuration(sub, tuple(self[s] for s in sub), self.alphabet)

    def to_json(self) -> dict:
        return {
            "sites": [list(s) for s in self.window],
            "states": [self.alphabet.labels[s] for s in self.states],
        }

    @classmethod
    def from_json(cls, obj, alphabet: Alphabet) -> "Configuration":
        if isinstance(obj, str):
            obj = json.loads(obj)
        pairs = sorted(zip((tuple(s) for s in obj["sites"]), obj["states"]))
        window = Window.of(p[0] for p in pairs)
        return cls(window, tuple(alphabet.index(p[1]) for p in pairs), alphabet)


def concat(a: Configuration, b: Configuration) -> Configuration:
    """The configuration on the disjoint union of two windows."""
    if not a.window.isdisjoint(b.window):
        raise ValueError("concatenated windows must be disjoint")
    merged = {**a.as_dict(), **b.as_dict()}
    w = a.window.union(b.window)
    return Configuration(w, tuple(merged[s] for s in w), a.alphabet)


def encode(config: Configuration) -> int:
    """Mixed-radix code of a configuration, first site least significant."""
    k = len(config.alphabet)
    check_table_size(k, len(config.window), "configuration code")
    code = 0
    for s in reversed(config.states):
        code = code * k + s
    return code


def decode(code: int, window: Window, alphabet: Alphabet) -> Configuration:
    k = len(alphabet)
    size = check_table_size(k, len(window), "configuration code")
    if not 0 <= code < size:
        raise ValueError(f"code {code} outside 0..{size - 1}")
    states = []
    for _ in range(len(window)):
        code, r = divmod(code, k)
        states.append(r)
    return Configuration(window, tuple(states), alphabet)


def all_states(n_sites: int, k: int) -> np.ndarray:
    """Every configuration of ``n_sites`` sites, one row per code.

    Row ``c`` holds the digits of ``c`` in base ``k``, least significant
    first, so ``all_states(n, k)[encode(w)]`` recovers ``w.states``.
    """
    size = check_table_size(k, n_sites)
    codes = np.arange(size, dtype=np.int64)
    powers = np.asarray(k, dtype=np.int64) ** np.arange(n_sites, dtype=np.int64)
    dtype = np.int8 if k <= 127 else np.int32
    return ((codes[:, None] // powers[None, :]) % k).astype(dtype)


def codes_of(states: np.ndarray, k: int) -> np.ndarray:
    """Inverse of :func:`all_states` for a batch of state rows."""
    states = np.asarray(states, dtype=np.int64)
    powers = np.asarray(k, dtype=np.int64) ** np.arange(states.shape[-1], dtype=np.int64)
    return states @ powers


def shift_window(window: Window, x: Sequence[int]) -> Window:
    """Window on which the shifted field theta_x(omega) lives: ``window - x``."""
    x = tuple(x)
    return Window.of(_sub(s, x) for s in window)


def translate(window: Window, x: Sequence[int]) -> Window:
    """The image ``window + x``."""
    x = tuple(x)
    return Window.of(_add(s, x) for s in window)


def shift(config: Configuration, x: Sequence[int]) -> Configuration:
    """theta_x(omega): the state at y is omega at y + x.

    Translation preserves lexicographic order, so the state tuple is
    unchanged and only the window moves.
    """
    return Configuration(shift_window(config.window, x), config.states, config.alphabet)
