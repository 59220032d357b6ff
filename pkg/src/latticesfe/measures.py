"""Finite measures on E^Lambda stored as log-weights, and entropy functionals.

Infinite values are ordinary floats: ``rel_entropy`` and ``max_entropy``
return ``math.inf`` on absolute-continuity failure, and differences of two
infinities are read as 0 wherever this module compares them.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError, ShapeError
from .lattice import Alphabet, Window, all_states, check_table_size

EQUAL_TV = 1e-10
NORMALIZED_TOL = 1e-10


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(float(x), ".17g")


@dataclass(frozen=True)
class DensityTable:
    """A finite measure on E^window, one log-weight per configuration code."""

    window: Window
    alphabet: Alphabet
    log_weights: np.ndarray
    normalized: bool = True
    log_z: float = field(default=0.0, compare=False)

    def __post_init__(self):
        lw = np.array(self.log_weights, dtype=np.float64).reshape(-1)
        size = check_table_size(len(self.alphabet), len(self.window))
        if lw.shape != (size,):
            raise ShapeError(f"expected {size} log-weights, got {lw.shape[0]}")
        if np.isnan(lw).any() or np.isposinf(lw).any():
            raise ValueError("log-weights must be finite or -inf")
        if not np.isfinite(lw).any():
            raise ValueError("a density table needs at least one positive weight")
        if self.normalized and abs(float(logsumexp(lw))) > NORMALIZED_TOL:
            raise ValueError("table flagged normalized but its mass is not 1")
        lw.setflags(write=False)
        object.__setattr__(self, "log_weights", lw)

    # construction -------------------------------------------------------
    @classmethod
    def from_log_weights(cls, window, alphabet, log_weights, normalize=True):
        lw = np.asarray(log_weights, dtype=np.float64).reshape(-1)
        if not normalize:
            return cls(window, alphabet, lw, normalized=False)
        z = float(logsumexp(lw))
        return cls(window, alphabet, lw - z, normalized=True, log_z=z)

    @classmethod
    def from_weights(cls, window, alphabet, weights, normalize=True):
        w = np.asarray(weights, dtype=np.float64).reshape(-1)
        if (w < 0).any():
            raise ValueError("weights must be nonnegative")
        with np.errstate(divide="ignore"):
            lw = np.log(w)
        return cls.from_log_weights(window, alphabet, lw, normalize)

    # views ----------------------------------------------------------------
    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def size(self) -> int:
        return self.log_weights.shape[0]

    @property
    def mass(self) -> float:
        return float(np.exp(logsumexp(self.log_weights)))

    def normalize(self) -> "DensityTable":
        if self.normalized:
            return self
        return DensityTable.from_log_weights(self.window, self.alphabet, self.log_weights)

    def to_tensor(self) -> np.ndarray:
        """Log-weights as an array with one axis per site, in window order."""
        n = len(self.window)
        k = len(self.alphabet)
        if n == 0:
            return self.log_weights.reshape(())
        # C-order reshape puts the most significant digit (last site) first
        return self.log_weights.reshape((k,) * n).transpose(tuple(range(n - 1, -1, -1)))

    @classmethod
    def from_tensor(cls, window, alphabet, tensor, normalize=True):
        n = len(window)
        arr = np.asarray(tensor, dtype=np.float64)
        if n:
            arr = arr.transpose(tuple(range(n - 1, -1, -1)))
        return cls.from_log_weights(window, alphabet, arr.reshape(-1), normalize)

    def prob(self, states: Sequence[int]) -> float:
        k = len(self.alphabet)
        code = 0
        for s in reversed(tuple(states)):
            code = code * k + int(s)
        return float(np.exp(self.log_weights[code]))

    # serialization --------------------------------------------------------
    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["code", "states", "weight"])
        states = all_states(len(self.window), len(self.alphabet))
        labels = self.alphabet.labels
        for code, lw in enumerate(self.log_weights):
            w.writerow([code, " ".join(labels[s] for s in states[code]), _fmt(math.exp(lw))])
        return buf.getvalue()

    def to_bytes(self) -> bytes:
        """Weights as little-endian doubles in code order."""
        return np.exp(self.log_weights).astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, window, alphabet, blob: bytes, normalized=True):
        w = np.frombuffer(blob, dtype="<f8")
        return cls.from_weights(window, alphabet, w, normalize=normalized)


@dataclass(frozen=True)
class MeasureFamily:
    """Nonempty list of normalized tables sharing a window and alphabet."""

    members: tuple

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError("a measure family needs at least one member")
        first = members[0]
        for m in members:
            _check_same_space(first, m)
            if not m.normalized:
                raise ValueError("family members must be normalized")
        object.__setattr__(self, "members", members)

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def stacked(self) -> np.ndarray:
        return np.stack([m.log_weights for m in self.members])


def _check_same_space(a: DensityTable, b: DensityTable) -> None:
    if a.window != b.window or a.alphabet != b.alphabet:
        raise ShapeError("measures live on different windows or alphabets")


# constructors -------------------------------------------------------------
def uniform(window: Window, alphabet: Alphabet) -> DensityTable:
    size = check_table_size(len(alphabet), len(window))
    return DensityTable.from_log_weights(window, alphabet, np.zeros(size))


def point_mass(window: Window, alphabet: Alphabet, states: Sequence[int]) -> DensityTable:
    size = check_table_size(len(alphabet), len(window))
    lw = np.full(size, -np.inf)
    k = len(alphabet)
    code = 0
    for s in reversed(tuple(states)):
        code = code * k + int(s)
    lw[code] = 0.0
    return DensityTable(window, alphabet, lw)


def product_measure(window: Window, alphabet: Alphabet, single=None) -> DensityTable:
    """i.i.d. product of ``single`` (defaults to the reference weights)."""
    p = np.asarray(single if single is not None else alphabet.reference_weights, float)
    with np.errstate(divide="ignore"):
        lp = np.log(p / p.sum())
    n = len(window)
    states = all_states(n, len(alphabet))
    return DensityTable.from_log_weights(window, alphabet, lp[states].sum(axis=1))


def marginal(table: DensityTable, sub: Window) -> DensityTable:
    """Projection of ``table`` onto the coordinates of ``sub``."""
    if not sub.issubset(table.window):
        raise ShapeError("marginal window is not a subset of the table window")
    keep = [table.window.index(s) for s in sub]
    drop = tuple(i for i in range(len(table.window)) if i not in set(keep))
    t = table.to_tensor()
    if drop:
        t = logsumexp(t, axis=drop)
    # remaining axes are the kept sites in increasing window index; sub is
    # in the same relative order because both windows sort lexicographically
    return DensityTable.from_tensor(sub, table.alphabet, t, normalize=table.normalized)


def mixture(weights: Sequence[float], family) -> DensityTable:
    """Convex combination of the family members, normalized."""
    members = family.members if isinstance(family, MeasureFamily) else tuple(family)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (len(members),) or (w < 0).any() or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("mixture weights must lie on the simplex")
    for m in members[1:]:
        _check_same_space(members[0], m)
    stack = np.stack([m.log_weights for m in members])
    with np.errstate(divide="ignore"):
        lw = logsumexp(stack + np.log(w)[:, None], axis=0)
    return DensityTable.from_log_weights(members[0].window, members[0].alphabet, lw)


# functionals --------------------------------------------------------------
def rel_entropy(mu: DensityTable, nu: DensityTable) -> float:
    """sum mu log(mu/nu), with 0 log 0 = 0 and +inf without absolute continuity."""
    _check_same_space(mu, nu)
    return log_rel_entropy(mu.log_weights, nu.log_weights, clamp=mu.normalized and nu.normalized)


def log_rel_entropy(lmu: np.ndarray, lnu: np.ndarray, clamp: bool = True) -> float:
    support = np.isfinite(lmu)
    if np.any(support & ~np.isfinite(lnu)):
        return math.inf
    lm = lmu[support]
    val = float(np.sum(np.exp(lm) * (lm - lnu[support])))
    return max(val, 0.0) if clamp else val


def max_entropy(mu: DensityTable, nu: DensityTable) -> float:
    """log inf{c >= 0 : mu <= c nu}."""
    _check_same_space(mu, nu)
    support = np.isfinite(mu.log_weights)
    if np.any(support & ~np.isfinite(nu.log_weights)):
        return math.inf
    val = float(np.max(mu.log_weights[support] - nu.log_weights[support]))
    return max(val, 0.0) if (mu.normalized and nu.normalized) else val


def envelope_diameter(log_tables: np.ndarray) -> float:
    """Max-diameter of the rows of a (members, codes) log-weight array.

    sup over ordered pairs of max-entropy equals the largest pointwise gap
    between the upper and lower log-envelopes, which avoids the pairwise loop.
    """
    lt = np.asarray(log_tables, dtype=np.float64)
    hi = lt.max(axis=0)
    lo = lt.min(axis=0)
    charged = np.isfinite(hi)
    if np.any(charged & ~np.isfinite(lo)):
        return math.inf
    if not charged.any():
        return 0.0
    return max(float(np.max(hi[charged] - lo[charged])), 0.0)


def max_diameter(family) -> float:
    members = family.members if isinstance(family, MeasureFamily) else tuple(family)
    for m in members[1:]:
        _check_same_space(members[0], m)
    return envelope_diameter(np.stack([m.log_weights for m in members]))


def total_variation(mu: DensityTable, nu: DensityTable) -> float:
    _check_same_space(mu, nu)
    return tv_log(mu.log_weights, nu.log_weights)


def tv_log(la: np.ndarray, lb: np.ndarray) -> float:
    return float(0.5 * np.sum(np.abs(np.exp(la) - np.exp(lb))))


def measures_equal(mu: DensityTable, nu: DensityTable, tol: float = EQUAL_TV) -> bool:
    return total_variation(mu, nu) <= tol


def envelope(family, ref: DensityTable) -> tuple:
    """Lattice infimum and supremum of a finite family, as unnormalized tables.

    With densities f_mu = d mu / d ref, the lower envelope is min_mu f_mu * ref
    and the upper one max_mu f_mu * ref; on a finite space both reduce to the
    pointwise min and max of the member weights.
    """
    members = family.members if isinstance(family, MeasureFamily) else tuple(family)
    if not any(measures_equal(ref, m) for m in members):
        raise DomainError("reference measure must belong to the family")
    stack = np.stack([m.log_weights for m in members])
    if math.isinf(envelope_diameter(stack)):
        raise DomainError("family has infinite max-diameter")
    lo = DensityTable(ref.window, ref.alphabet, stack.min(axis=0), normalized=False)
    hi = DensityTable(ref.window, ref.alphabet, stack.max(axis=0), normalized=False)
    return lo, hi


def dominated(lower: DensityTable, mu: DensityTable, upper: DensityTable, tol: float = 1e-12) -> bool:
    """True if lower <= mu <= upper pointwise, up to a relative tolerance."""
    lo, m, hi = lower.weights, mu.weights, upper.weights
    return bool(np.all(lo <= m * (1 + tol) + 1e-300) and np.all(m <= hi * (1 + tol) + 1e-300))
