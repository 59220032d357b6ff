"""Specific free energy terms, boundary-mixture minimization, superadditivity,
finite energy, DLR residuals and a heat-bath sampler.

Boxes are Delta_n = {-n..n}^d.  Every infimum over boundary laws is taken
over mixtures of the deterministic-boundary kernels on a frame: a mixed
boundary produces exactly a mixture of kernels, so the infimum is a convex
problem on a simplex.
"""
from __future__ import annotations

import csv
import hashlib
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import logsumexp

from .cluster import UnionFind
from .errors import OptimizationError
from .ising import GRIFFITHS_ALPHABET, SPIN, PM, _pm_log_alpha
from .lattice import (
    Alphabet, Configuration, Window, all_states, check_table_size, codes_of, make_box,
    square_offsets, _add,
)
from .measures import (
    DensityTable, _fmt, envelope_diameter, marginal, mixture,
    product_measure, rel_entropy, tv_log,
)
from .models import (
    BoundaryCondition, Model, PotentialSpec, _states_range, diam_B, kernel,
    kernels_batch,
)

GAP_TOL = 1e-9
MAX_ITER = 100_000


# ---------------------------------------------------------------------------
# shift-invariant fields


class ShiftInvariantField:
    """A random field known through its marginals on finite windows."""

    alphabet: Alphabet
    d: int = 1

    def marginal(self, window: Window) -> DensityTable:  # pragma: no cover
        raise NotImplementedError

    def box(self, n: int) -> DensityTable:
        return self.marginal(make_box(n, self.d))


class ProductField(ShiftInvariantField):
    def __init__(self, alphabet: Alphabet, single=None, d: int = 1):
        self.alphabet, self.d = alphabet, d
        self.single = np.asarray(single if single is not None else alphabet.reference_weights, float)

    def marginal(self, window):
        return product_measure(window, self.alphabet, self.single)


class IsingChainField(ShiftInvariantField):
    """Infinite-volume 1d Ising measure, weight exp(beta s t + h s) per bond
    and site, built from the transfer matrix."""

    def __init__(self, beta: float, h: float = 0.0):
        self.beta, self.h, self.d = float(beta), float(h), 1
        self.alphabet = Alphabet(("-1", "1"))
        s = PM.astype(float)
        v = np.exp(beta * np.outer(s, s) + h * (s[:, None] + s[None, :]) / 2)
        vals, vecs = np.linalg.eigh(v)
        lam, phi = vals[-1], np.abs(vecs[:, -1])
        self.transition = v * phi[None, :] / (lam * phi[:, None])
        self.stationary = phi ** 2 / np.sum(phi ** 2)

    def marginal(self, window):
        sites = [s[0] for s in window]
        states = all_states(len(sites), 2).astype(np.intp)
        lw = np.log(self.stationary)[states[:, 0]]
        for i in range(1, len(sites)):
            step = np.linalg.matrix_power(self.transition, sites[i] - sites[i - 1])
            lw = lw + np.log(step)[states[:, i - 1], states[:, i]]
        return DensityTable.from_log_weights(window, self.alphabet, lw)


class TableField(ShiftInvariantField):
    """Marginals of one explicit table on a window (a finite-window field)."""

    def __init__(self, table: DensityTable):
        self.table, self.alphabet, self.d = table, table.alphabet, table.window.d

    def marginal(self, window):
        if window == self.table.window:
            return self.table
        return marginal(self.table, window)


class ExplicitField(ShiftInvariantField):
    """Tables per box Delta_n, checked for marginal consistency."""

    def __init__(self, tables: dict, tol: float = 1e-10):
        self.tables = dict(sorted(tables.items()))
        first = next(iter(self.tables.values()))
        self.alphabet, self.d = first.alphabet, first.window.d
        ns = list(self.tables)
        for a, b in zip(ns, ns[1:]):
            sub = marginal(self.tables[b], self.tables[a].window)
            if tv_log(sub.log_weights, self.tables[a].log_weights) > tol:
                raise ValueError(f"box tables {a} and {b} are not marginally consistent")

    def marginal(self, window):
        for t in self.tables.values():
            if window.issubset(t.window):
                return t if window == t.window else marginal(t, window)
        raise ValueError("no stored table covers the window")


def griffiths_window_measure(p: float, beta: float, window: Window) -> DensityTable:
    """Site percolation times an Ising law on each open cluster, on a finite
    window with everything outside closed.  Built by direct summation."""
    n = len(window)
    states = all_states(n, 3)
    spins = SPIN[states]
    sites = window.sites
    nbr = [[window.index(t) for e in square_offsets(window.d)
            if (t := _add(s, e)) in window] for s in sites]
    lp, lq = math.log(p), math.log1p(-p)
    cache: dict = {}
    lw = np.empty(len(states))
    for r, row in enumerate(spins):
        open_ = [i for i in range(n) if row[i] != 0]
        uf = UnionFind(n)
        for i in open_:
            for j in nbr[i]:
                if row[j] != 0:
                    uf.union(i, j)
        groups: dict = {}
        for i in open_:
            groups.setdefault(uf.find(i), []).append(i)
        total = len(open_) * lp + (n - len(open_)) * lq
        for members in groups.values():
            key = tuple(_sub0(sites[i], sites[members[0]]) for i in members)
            if key not in cache:
                pm = PM[all_states(len(key), 2)]
                cache[key] = _pm_log_alpha(list(key), beta, pm)
            code = sum(int(row[i] > 0) << k for k, i in enumerate(members))
            total += cache[key][code]
        lw[r] = total
    return DensityTable.from_log_weights(window, GRIFFITHS_ALPHABET, lw)


def _sub0(a, b):
    return tuple(x - y for x, y in zip(a, b))


def percolation_marginal(table: DensityTable) -> np.ndarray:
    """Law of the open/closed pattern of a Griffiths table, indexed by bit code."""
    n = len(table.window)
    opened = (SPIN[all_states(n, 3)] != 0).astype(np.int64)
    codes = opened @ (1 << np.arange(n, dtype=np.int64))
    return np.bincount(codes, weights=table.weights, minlength=2 ** n)


def percolation_product(p: float, n: int) -> np.ndarray:
    bits = all_states(n, 2).astype(np.int64)
    k = bits.sum(axis=1)
    return p ** k * (1 - p) ** (n - k)


# ---------------------------------------------------------------------------
# minimization over boundary mixtures


def _kl_value(mu, lmu, a, w):
    mix = w @ a
    with np.errstate(divide="ignore"):
        return float(np.sum(mu * (lmu - np.log(mix))))


def _newton_direction(a, mu, m, s, S, w):
    """Newton step for the mixture objective restricted to weights in S,
    keeping the total fixed.  Indices at zero weight that the step would
    push negative are dropped until the step is feasible."""
    while len(S):
        b = a[S] * (np.sqrt(mu) / m)
        h = b @ b.T
        h[np.diag_indices_from(h)] += 1e-12 * np.trace(h) / len(S) + 1e-300
        c = cho_factor(h)
        hg = cho_solve(c, -s[S])
        h1 = cho_solve(c, np.ones(len(S)))
        d = -(hg - (hg.sum() / h1.sum()) * h1)
        stuck = (w[S] <= 0) & (d < 0)
        if not stuck.any():
            return S, d
        S = S[~stuck]
    return S, None


def _newton_polish(mu, a, w, f, tol, rounds):
    """Active-set Newton iterations from an approximate minimizer.

    First-order steps find the support quickly but crawl on the last digits
    when several kernels are nearly collinear; on the right support Newton
    converges quadratically.  Returns (w, m, f, gap, iterations used).
    """
    m = w @ a
    gap = math.inf
    for it in range(rounds):
        s = a @ (mu / m)
        gap = min(float(s.max() - 1.0), max(f, 0.0))
        if gap <= tol:
            return w, m, f, gap, it
        S = np.flatnonzero(w > 1e-14 * w.max())
        extra = np.setdiff1d(np.flatnonzero(s > 1 + tol), S)
        extra = extra[np.argsort(-s[extra])][:8]
        S, d = _newton_direction(a, mu, m, s, np.concatenate([S, extra]), w)
        if d is None:
            break
        w_s = w[S]
        neg = d < 0
        ratio = np.full(len(S), np.inf)
        ratio[neg] = -w_s[neg] / d[neg]
        t_max = ratio.min()
        t = min(1.0, t_max)
        slope = -float(s[S] @ d)
        while True:
            w_new = w.copy()
            w_new[S] = np.maximum(w_s + t * d, 0.0)
            if t == t_max:
                w_new[S[np.argmin(ratio)]] = 0.0
            w_new /= w_new.sum()
            m_new = w_new @ a
            with np.errstate(divide="ignore"):
                f_new = f - float(np.sum(mu * np.log(m_new / m)))
            if f_new <= f + 1e-4 * t * slope or t < 1e-15:
                break
            t *= 0.5
        w, m, f = w_new, m_new, f_new
    return w, m, f, gap, rounds


def minimize_mixture_kl(mu_log: np.ndarray, kernels_log: np.ndarray, tol: float = GAP_TOL,
                        max_iter: int = MAX_ITER, warm: int = 500) -> tuple:
    """min over the simplex of H(mu | sum_i w_i K_i) by exponentiated gradient.

    Step sizes backtrack on the mirror-descent decrease condition.  The stop
    test is the Frank-Wolfe gap max_i sum mu K_i / m - 1, an upper bound on
    the distance to the optimum.  The value itself bounds that distance too
    (the minimum is >= 0), which settles degenerate zero-minimum cases.
    If the gap is still open after ``warm`` steps, an active-set Newton
    phase finishes the job; its iterations count against ``max_iter``.
    Returns (value, weights, gap).
    """
    kernels_log = np.atleast_2d(kernels_log)
    support = np.isfinite(mu_log)
    lmu = mu_log[support]
    mu = np.exp(lmu)
    a = np.exp(kernels_log[:, support])
    if np.any(a.max(axis=0) <= 0):
        return math.inf, np.full(len(a), 1 / len(a)), 0.0
    m_k = len(a)
    w = np.full(m_k, 1.0 / m_k)
    m = w @ a
    f = _kl_value(mu, lmu, a, w)
    eta = 1.0
    gap = math.inf
    it = 0
    polished = False
    while it < max_iter:
        grad = -(a @ (mu / m))
        gap = min(float(-grad.min() - 1.0), max(f, 0.0))
        if gap <= tol:
            break
        if it == warm and not polished:
            polished = True
            w, m, f, gap, used = _newton_polish(mu, a, w, f, tol, min(1000, max_iter - it))
            it += used
            if gap <= tol:
                break
            continue
        g = grad - grad.min()
        while True:
            # the update is formed as a difference so tiny steps keep their digits
            u = np.expm1(-eta * g)
            dw = w * (u - w @ u) / (1.0 + w @ u)
            w_new = w + dw
            dm = dw @ a
            m_new = m + dm
            df = -float(np.sum(mu * np.log1p(dm / m)))
            with np.errstate(divide="ignore", invalid="ignore"):
                kl = float(np.sum(np.where(w_new > 0, w_new * np.log1p(dw / w), 0.0)))
            if df <= g @ dw + kl / eta or eta < 1e-12:
                break
            eta *= 0.5
        w, m, f = w_new, m_new, f + df
        eta = min(eta * 2.0, 1e8)
        it += 1
    else:
        raise OptimizationError("mixture minimization hit the iteration cap", max(f, 0.0), gap, w)
    return max(f, 0.0), w, gap


def grid_search_mixture_kl(mu_log, kernels_log, resolution: float = 1e-3) -> float:
    """Oracle: minimum of the mixture entropy over a simplex grid (<= 3 kernels)."""
    kernels_log = np.atleast_2d(kernels_log)
    m_k = len(kernels_log)
    if m_k > 3:
        raise ValueError("grid search handles at most three kernels")
    steps = int(round(1 / resolution))
    support = np.isfinite(mu_log)
    mu = np.exp(mu_log[support])
    a = np.exp(kernels_log[:, support])
    if m_k == 1:
        grid = np.ones((1, 1))
    elif m_k == 2:
        t = np.arange(steps + 1) / steps
        grid = np.stack([t, 1 - t], axis=1)
    else:
        i, j = np.triu_indices(steps + 1)
        grid = np.stack([(steps - j) / steps, (j - i) / steps, i / steps], axis=1)
    best = math.inf
    for start in range(0, len(grid), 20000):
        mix = grid[start:start + 20000] @ a
        with np.errstate(divide="ignore"):
            vals = np.sum(mu * (np.log(mu) - np.log(mix)), axis=1)
        best = min(best, float(vals.min()))
    return max(best, 0.0)


def boundary_kernels(model: Model, lam: Window, frame: Window | None = None,
                     dedupe: bool = True) -> np.ndarray:
    """Log-kernels on ``lam`` for every deterministic boundary on the frame.

    Potential models only read the sites their terms reach, so only those
    are enumerated; the other models read the whole frame.
    """
    frame = frame if frame is not None else model.required_frame(lam)
    out = frame.difference(lam)
    if isinstance(model, PotentialSpec):
        read = model.required_frame(lam).intersection(out)
    else:
        read = out
    k = len(model.alphabet)
    n_read = len(read)
    n_b = check_table_size(k, n_read, "boundary enumeration")
    pos = out.indices(read)
    size = k ** len(lam)
    chunk = max(1, (1 << 18) // size)
    tables = []
    for start in range(0, n_b, chunk):
        stop = min(n_b, start + chunk)
        rows = np.full((stop - start, len(out)), model.tail_index, dtype=np.int8)
        rows[:, pos] = _states_range(start, stop, n_read, k)
        lt, _ = kernels_batch(model, lam, frame, rows)
        if dedupe:
            lt = _unique_rows(lt)
        tables.append(lt)
    lt = np.concatenate(tables)
    return _unique_rows(lt) if dedupe else lt


def _unique_rows(lt: np.ndarray) -> np.ndarray:
    key = np.where(np.isfinite(lt), np.round(lt, 11), -1e300)
    _, idx = np.unique(key, axis=0, return_index=True)
    return lt[np.sort(idx)]


def inf_entropy(mu: DensityTable, model: Model, lam: Window, frame: Window | None = None,
                tol: float = GAP_TOL, kernels_log: np.ndarray | None = None) -> tuple:
    """inf over boundary laws of H(mu_lam | rho gamma_lam): (value, gap, weights)."""
    mu_lam = mu if mu.window == lam else marginal(mu, lam)
    if kernels_log is None:
        kernels_log = boundary_kernels(model, lam, frame)
    val, w, gap = minimize_mixture_kl(mu_lam.log_weights, kernels_log, tol)
    return val, gap, w


def _box_and_field(mu, n, d):
    box = make_box(n, d)
    table = mu.marginal(box) if isinstance(mu, ShiftInvariantField) else marginal(mu, box)
    return box, table


def sfe_term(mu, model: Model, n: int, bc=None) -> float:
    """|Delta_n|^-1 H(mu_{Delta_n} | nu gamma_{Delta_n}) for one boundary law nu.

    ``bc`` is a BoundaryCondition, a list of (weight, BoundaryCondition)
    pairs for a mixed boundary, or None for the tail-filled boundary.
    """
    box, table = _box_and_field(mu, n, model.d)
    if bc is None:
        bc = BoundaryCondition.tail_filled(model, box)
    if isinstance(bc, BoundaryCondition):
        ref = kernel(model, box, bc)
    else:
        weights = [w for w, _ in bc]
        ref = mixture(weights, [kernel(model, box, b) for _, b in bc])
    return rel_entropy(table, ref) / len(box)


def sfe_inf_term(mu, model: Model, n: int, frame: Window | None = None, tol: float = GAP_TOL) -> float:
    """|Delta_n|^-1 inf_rho H(mu_{Delta_n} | rho gamma_{Delta_n})."""
    box, table = _box_and_field(mu, n, model.d)
    val, _, _ = inf_entropy(table, model, box, frame, tol)
    return val / len(box)


@dataclass
class SfeRow:
    n: int
    box_size: int
    term_fixed: float
    term_inf: float
    diam: float
    running_sup: float
    gap: float = 0.0


@dataclass
class SfeReport:
    rows: list = field(default_factory=list)

    @property
    def best_lower(self) -> float:
        return self.rows[-1].running_sup if self.rows else 0.0

    @property
    def last_fixed(self) -> float:
        return self.rows[-1].term_fixed if self.rows else 0.0

    def sandwich_violations(self, tol: float = 1e-8) -> list:
        bad = []
        for r in self.rows:
            if math.isinf(r.term_fixed) and math.isinf(r.term_inf):
                continue
            lo = r.term_fixed - r.term_inf
            if lo < -tol or lo > r.diam / r.box_size + tol:
                bad.append(r.n)
        return bad

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "box_size", "term_fixed", "term_inf", "diam", "running_sup"])
        for r in self.rows:
            w.writerow([r.n, r.box_size, _fmt(r.term_fixed), _fmt(r.term_inf), _fmt(r.diam),
                        _fmt(r.running_sup)])
        return buf.getvalue()


def _sfe_row(mu, model, n, bc, tol):
    box, table = _box_and_field(mu, n, model.d)
    frame = model.required_frame(box)
    bc = bc if bc is not None else BoundaryCondition.tail_filled(model, box, frame)
    fixed = rel_entropy(table, kernel(model, box, bc))
    all_k = boundary_kernels(model, box, frame)
    diam = envelope_diameter(all_k)
    val, _, gap = inf_entropy(table, model, box, frame, tol, kernels_log=all_k)
    size = len(box)
    return SfeRow(n, size, fixed / size, val / size, diam, 0.0, gap)


def sfe_report(mu, model: Model, n_max: int, bc_for=None, tol: float = GAP_TOL,
               threads: int = 1) -> SfeReport:
    """Per-n fixed-boundary and infimum terms for n = 0..n_max.

    ``bc_for`` maps n to the fixed boundary (default: tail-filled).
    """
    def job(n):
        return _sfe_row(mu, model, n, bc_for(n) if bc_for else None, tol)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            rows = list(ex.map(job, range(n_max + 1)))
    else:
        rows = [job(n) for n in range(n_max + 1)]
    best = -math.inf
    for r in rows:
        best = max(best, r.term_inf)
        r.running_sup = best
    return SfeReport(rows)


# ---------------------------------------------------------------------------
# superadditivity, finite energy, DLR


def superadditivity_check(mu, model: Model, parts, frame: Window | None = None,
                          tol: float = GAP_TOL, whole: float | None = None) -> float:
    """inf_rho H_union - sum_k inf_rho H_part_k; nonnegative up to solver gaps.

    All infima use boundaries on the same frame (default: the frame the
    union's kernel reads).  ``whole`` reuses a known infimum for the union
    when sweeping many splits of one window.
    """
    parts = [p for p in parts]
    union = parts[0]
    for p in parts[1:]:
        if not union.isdisjoint(p):
            raise ValueError("parts must be pairwise disjoint")
        union = union.union(p)
    frame = frame if frame is not None else model.required_frame(union)
    table = mu.marginal(union) if isinstance(mu, ShiftInvariantField) else marginal(mu, union)
    if whole is None:
        whole, _, _ = inf_entropy(table, model, union, frame, tol)
    if len(parts) == 1:
        return 0.0
    total = 0.0
    for p in parts:
        v, _, _ = inf_entropy(marginal(table, p), model, p, frame, tol)
        total += v
    if math.isinf(whole) and math.isinf(total):
        return 0.0
    return whole - total


def conditional_tables(mu: DensityTable, lam: Window) -> tuple:
    """Conditional law of mu on lam given each configuration of the rest.

    Returns (log_cond of shape (rest codes, lam codes), log marginal of the rest).
    """
    rest = mu.window.difference(lam)
    k = len(mu.alphabet)
    states = all_states(len(mu.window), k)
    zc = codes_of(states[:, mu.window.indices(lam)], k)
    rc = codes_of(states[:, mu.window.indices(rest)], k)
    joint = np.full((k ** len(rest), k ** len(lam)), -np.inf)
    joint[rc, zc] = mu.log_weights
    with np.errstate(invalid="ignore"):
        lm = logsumexp(joint, axis=1)
        cond = joint - lm[:, None]
    return cond, lm


def finite_energy_check(mu: DensityTable, model: Model, lam: Window,
                        eps_frame: Window | None = None, tol: float = 1e-12) -> tuple:
    """(epsilon, passes): does every conditional of mu on lam dominate (eps lambda)^lam?

    epsilon is exp(-max-diameter) of the single-site kernels at the origin
    over the frame ``eps_frame``; lambda is one of those kernels (the
    tail-filled boundary).
    """
    origin = Window.of([(0,) * mu.window.d])
    eps_frame = eps_frame if eps_frame is not None else model.required_frame(origin)
    diam = diam_B(model, origin, eps_frame)
    epsilon = math.exp(-diam)
    lam_ref = kernel(model, origin, BoundaryCondition.tail_filled(model, origin, eps_frame))
    k = len(model.alphabet)
    zeta = all_states(len(lam), k)
    with np.errstate(divide="ignore"):
        floor = (len(lam) * math.log(epsilon) if epsilon > 0 else -np.inf) \
            + lam_ref.log_weights[zeta].sum(axis=1)
    cond, lm = conditional_tables(mu, lam)
    ok = True
    for r in np.flatnonzero(np.isfinite(lm)):
        c = cond[r]
        if np.any(np.isfinite(floor) & (c < floor + math.log1p(-tol))):
            ok = False
            break
    return epsilon, ok


def dlr_residual(mu: DensityTable, model: Model, lam: Window, frame: Window | None = None) -> float:
    """TV distance between mu and mu resampled on lam by the kernel.

    The kernel frame is mu's window plus whatever the kernel reads, with
    the tail state on the added sites.
    """
    window = mu.window
    if not lam.issubset(window):
        raise ValueError("window must lie inside the field's window")
    frame = frame if frame is not None else window.union(model.required_frame(lam))
    rest = window.difference(lam)
    k = len(model.alphabet)
    out = frame.difference(lam)
    rest_states = all_states(len(rest), k)
    rows = np.full((len(rest_states), len(out)), model.tail_index, dtype=np.int8)
    rows[:, out.indices(rest)] = rest_states
    lt, _ = kernels_batch(model, lam, frame, rows)
    cond, lm = conditional_tables(mu, lam)
    states = all_states(len(window), k)
    zc = codes_of(states[:, window.indices(lam)], k)
    rc = codes_of(states[:, window.indices(rest)], k)
    resampled = lm[rc] + lt[rc, zc]
    return tv_log(resampled, mu.log_weights)


# ---------------------------------------------------------------------------
# heat-bath sampler


class HeatBath:
    """Deterministic-order single-site heat bath on a window.

    Sites beyond the window hold the tail state, so the chain's stationary
    law is the kernel on the whole window under the tail-filled boundary.
    """

    def __init__(self, model: Model, window: Window):
        self.model, self.window = model, window
        self.k = len(model.alphabet)
        self._plan = []
        for i, x in enumerate(window):
            site = Window.of([x])
            frame = window.union(model.required_frame(site))
            out = frame.difference(site)
            in_win = [j for j, s in enumerate(out) if s in window]
            src = window.indices([out.sites[j] for j in in_win])
            self._plan.append((i, site, frame, len(out), np.array(in_win, np.intp), src))
        self._cache: dict = {}

    def _cdf(self, step, states):
        i, site, frame, n_out, in_win, src = step
        key = (i, states[src].tobytes())
        hit = self._cache.get(key)
        if hit is None:
            row = np.full((1, n_out), self.model.tail_index, dtype=np.int8)
            row[0, in_win] = states[src]
            lt, _ = kernels_batch(self.model, site, frame, row)
            hit = np.cumsum(np.exp(lt[0]))
            hit[-1] = 1.0
            self._cache[key] = hit
        return hit

    def sweep(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        for step in self._plan:
            u = rng.random()
            states[step[0]] = int(np.searchsorted(self._cdf(step, states), u, side="right"))
        return states


def heat_bath_sweep(model: Model, config: Configuration, rng_seed) -> Configuration:
    """One sweep over the configuration's window; ``rng_seed`` is an int or Generator."""
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    hb = HeatBath(model, config.window)
    states = np.array(config.states, dtype=np.int8)
    hb.sweep(states, rng)
    return Configuration(config.window, tuple(int(s) for s in states), config.alphabet)


@dataclass
class ChainResult:
    final: tuple
    counts: np.ndarray
    digest: str
    snapshots: list


def run_chain(model: Model, window: Window, n_sweeps: int, seed, init=None, thin: int = 1,
              stride: int = 0) -> ChainResult:
    """Run a chain and histogram the window configuration every ``thin`` sweeps.

    ``digest`` is a sha256 of the whole trajectory; snapshots (JSON frame
    format) are kept every ``stride`` sweeps when stride > 0.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    hb = HeatBath(model, window)
    k = len(model.alphabet)
    states = np.array(init if init is not None else [model.tail_index] * len(window), dtype=np.int8)
    powers = k ** np.arange(len(window), dtype=np.int64)
    counts = np.zeros(k ** len(window), dtype=np.int64)
    h = hashlib.sha256()
    snaps = []
    for t in range(1, n_sweeps + 1):
        hb.sweep(states, rng)
        h.update(states.tobytes())
        if t % thin == 0:
            counts[int(states.astype(np.int64) @ powers)] += 1
        if stride and t % stride == 0:
            snaps.append({"sweep": t, **Configuration(window, tuple(int(s) for s in states),
                                                      model.alphabet).to_json()})
    return ChainResult(tuple(int(s) for s in states), counts, h.hexdigest(), snaps)


def run_chains(model: Model, window: Window, n_sweeps: int, seed: int, n_chains: int,
               threads: int = 1, **kw) -> list:
    """Independent chains seeded from SeedSequence(seed).spawn(n_chains)."""
    seeds = np.random.SeedSequence(seed).spawn(n_chains)

    def job(s):
        return run_chain(model, window, n_sweeps, s, **kw)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(job, seeds))
    return [job(s) for s in seeds]


def sweep_transition(model: Model, window: Window) -> np.ndarray:
    """Exact one-sweep transition matrix of the heat bath on a small window."""
    hb = HeatBath(model, window)
    k = len(model.alphabet)
    n = len(window)
    size = k ** n
    powers = k ** np.arange(n, dtype=np.int64)
    mat = np.zeros((size, size))
    for c0, start in enumerate(all_states(n, k)):
        dist = {tuple(start): 1.0}
        for step in hb._plan:
            nxt: dict = {}
            for st, pr in dist.items():
                arr = np.array(st, dtype=np.int8)
                cdf = hb._cdf(step, arr)
                probs = np.diff(np.concatenate([[0.0], cdf]))
                for v in range(k):
                    if probs[v] > 0:
                        arr2 = list(st)
                        arr2[step[0]] = v
                        nxt[tuple(arr2)] = nxt.get(tuple(arr2), 0.0) + pr * probs[v]
            dist = nxt
        for st, pr in dist.items():
            mat[c0, int(np.array(st) @ powers)] += pr
    return mat


def mixing_thin(model: Model, window: Window, target: float = 1e-3) -> int:
    """Thinning stride after which the sweep chain's correlations fall below ``target``."""
    mat = sweep_transition(model, window)
    mods = np.sort(np.abs(np.linalg.eigvals(mat)))[::-1]
    second = mods[1] if len(mods) > 1 else 0.0
    if second <= 1e-12:
        return 1
    return max(1, int(math.ceil(math.log(target) / math.log(second))))
