"""Invariant suite behind ``latticesfe verify-all``.

Each check returns (name, passed, value, bound).  ``quick`` trims the
parameter grids so the whole suite runs in a few seconds; the test suite
covers the full grids.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from . import free_energy as fe
from .cluster import BondFrame, count_clusters
from .lattice import Alphabet, Configuration, Window, all_states, block, make_box
from .measures import DensityTable, max_diameter, point_mass, rel_entropy
from .models import (
    BoundaryCondition, Griffiths, LoopOn, PotentialSpec, RandomCluster, check_consistency,
    diam_B, diam_B_restricted, eps, griffiths_kernel_simplified, ising_potential, kernel,
    zero_potential,
)


def _models():
    return [PotentialSpec(ising_potential(0.5, d=2)), RandomCluster(0.5, 2.0),
            LoopOn(1.5, 0.7), Griffiths(0.6, 0.8)]


def check_consistency_matrix(quick=True, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    lams = [Window.of([(0, 0)]), block((1, 2))]
    for model in _models():
        for lam in lams:
            delta = block((2, 2)) if quick else make_box(1, 2)
            frame = model.required_frame(delta)
            bcs = [BoundaryCondition.tail_filled(model, delta, frame)]
            n_out = len(frame) - len(delta)
            bcs += [BoundaryCondition.from_states(model, delta, frame, [v] * n_out)
                    for v in range(len(model.alphabet))]
            while len(bcs) < (6 if quick else 20):
                bcs.append(BoundaryCondition.random(model, delta, frame, rng))
            for bc in bcs:
                worst = max(worst, check_consistency(model, lam, delta, bc))
    return ("consistency", worst <= 1e-10, worst, 1e-10)


def check_diameter_bounds(quick=True):
    worst = math.inf
    lam = Window.of([(0, 0)])
    grid = [(0.5, 2.0)] if quick else list(itertools.product((0.3, 0.5, 0.7), (0.5, 2.0, 4.0)))
    for p, q in grid:
        rc = RandomCluster(p, q)
        worst = min(worst, rc.boundary_bound(lam) - diam_B(rc, lam))
    for beta in ((0.5,) if quick else (0.2, 0.5, 1.0)):
        g = Griffiths(0.5, beta)
        worst = min(worst, g.boundary_bound(lam) - diam_B(g, lam))
    pot = ising_potential(0.5, d=2, coupling2=0.2)
    model = PotentialSpec(pot)
    delta = block((1, 2))
    ring = delta.difference(lam)
    pinned = Configuration(ring, (0,) * len(ring), model.alphabet)
    worst = min(worst, 4 * eps(pot, lam, delta) - diam_B_restricted(model, lam, delta, pinned))
    return ("diameter bounds", worst >= 0, worst, 0.0)


def check_cluster_bound(quick=True):
    rc = RandomCluster(0.5, 2.0)
    frame = make_box(1, 2)
    lam = Window.of([(0, 0)])
    states = all_states(len(frame), 4)
    if quick:
        states = states[np.random.default_rng(0).choice(len(states), 20000, replace=False)]
    c = rc.cluster_counts(frame, lam, states)
    own = states[:, frame.index((0, 0))]
    spread = max(int(c[own == v].max() - c[own == v].min()) for v in np.unique(own))
    # spot check against the frame-object interface
    bf = BondFrame(frame, tuple(int(s) for s in states[0]))
    agree = count_clusters(bf, lam) == int(c[0])
    return ("cluster count boundary bound", spread <= 16 and agree, float(spread), 16.0)


def check_obvious_bound(quick=True, seed=0):
    rng = np.random.default_rng(seed)
    lam = block((2,))
    alpha = Alphabet(("a", "b", "c"))
    worst = -math.inf
    for _ in range(1000 if quick else 10000):
        mu, nu, nu2 = (DensityTable.from_log_weights(lam, alpha, rng.normal(size=9) * 2)
                       for _ in range(3))
        gap = abs(rel_entropy(mu, nu) - rel_entropy(mu, nu2)) - max_diameter([nu, nu2])
        worst = max(worst, gap)
    return ("entropy difference within diameter", worst <= 1e-12, worst, 1e-12)


def check_superadditivity(quick=True, seed=0):
    rng = np.random.default_rng(seed)
    worst = math.inf
    cases = [(PotentialSpec(ising_potential(0.4, d=1)), make_box(1, 1)),
             (RandomCluster(0.5, 2.0, d=1), make_box(1, 1)),
             (RandomCluster(0.5, 2.0), block((1, 2)))]
    if not quick:
        cases.append((PotentialSpec(ising_potential(0.5, d=2)), make_box(1, 2)))
    for model, union in cases:
        mu = DensityTable.from_log_weights(union, model.alphabet,
                                           rng.normal(size=len(model.alphabet) ** len(union)))
        whole, _, _ = fe.inf_entropy(mu, model, union, model.required_frame(union))
        for r in range(1, len(union) // 2 + 1):
            for a in itertools.combinations(list(union), r):
                a = Window.of(a)
                worst = min(worst, fe.superadditivity_check(mu, model, [a, union.difference(a)],
                                                            whole=whole))
    return ("superadditivity slack", worst >= -1e-8, worst, -1e-8)


def check_sandwich(quick=True):
    model = PotentialSpec(ising_potential(0.4, d=1))
    mu = fe.IsingChainField(0.4)
    n_max = 2 if quick else 4
    rep = fe.sfe_report(mu, model, n_max)
    bad = rep.sandwich_violations()
    # a second boundary law: all minus outside the box
    other = fe.sfe_report(mu, model, n_max, bc_for=lambda n: BoundaryCondition.from_states(
        model, make_box(n, 1), model.required_frame(make_box(n, 1)), [0, 0]))
    nu_gap = max(abs(a.term_fixed - b.term_fixed) - a.diam / a.box_size
                 for a, b in zip(rep.rows, other.rows))
    ok = not bad and nu_gap <= 1e-10
    return ("sfe sandwich", ok, nu_gap, 1e-10)


def check_zero_sfe(quick=True):
    alpha = Alphabet(("0", "1"))
    zero = PotentialSpec(zero_potential(alpha, 1))
    lam = Window.of([(0,)])
    single = kernel(zero, lam, BoundaryCondition.tail_filled(zero, lam)).weights
    prod = fe.ProductField(alpha, single, 1)
    worst = max(fe.sfe_term(prod, zero, n) for n in range(4))
    ising = PotentialSpec(ising_potential(0.4, d=1))
    terms = [fe.sfe_term(fe.IsingChainField(0.4), ising, n) for n in range(7)]
    dec = all(b < a for a, b in zip(terms, terms[1:]))
    return ("zero sfe witnesses", worst == 0.0 and dec and terms[6] < 0.02, terms[6], 0.02)


def check_griffiths_forms(quick=True, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    n_cases = 20 if quick else 200
    for i in range(n_cases):
        p = (0.4, 0.6)[i % 2]
        beta = (0.3, 0.8)[(i // 2) % 2]
        g = Griffiths(p, beta)
        lam = [Window.of([(0, 0)]), block((1, 2)), block((2, 1))][i % 3]
        frame = g.required_frame(lam)
        bc = BoundaryCondition.random(g, lam, frame, rng)
        a = kernel(g, lam, bc)
        b = griffiths_kernel_simplified(g, lam, bc)
        worst = max(worst, 0.5 * float(np.abs(a.weights - b.weights).sum()))
    return ("griffiths kernel forms agree", worst <= 1e-10, worst, 1e-10)


def check_window_dlr(quick=True):
    worst = 0.0
    perc = 0.0
    d1 = make_box(1, 2)
    grid = [(0.4, 0.3)] if quick else list(itertools.product((0.4, 0.6), (0.3, 0.8)))
    for p, beta in grid:
        k = fe.griffiths_window_measure(p, beta, d1)
        worst = max(worst, fe.dlr_residual(k, Griffiths(p, beta), d1))
        perc = max(perc, float(np.abs(fe.percolation_marginal(k) - fe.percolation_product(p, 9)).max()))
    return ("window measure is dlr", worst <= 1e-10 and perc <= 1e-12, worst, 1e-10)


def check_finite_energy(quick=True):
    g = Griffiths(0.6, 0.8)
    origin = Window.of([(0, 0)])
    d1 = make_box(1, 2)
    k = fe.griffiths_window_measure(0.6, 0.8, d1)
    _, ok_k = fe.finite_energy_check(k, g, origin, d1)
    _, ok_pm = fe.finite_energy_check(point_mass(d1, g.alphabet, [1] * 9), g, origin, d1)
    rc = RandomCluster(0.5, 2.0)
    lam = block((1, 2))
    gibbs = kernel(rc, lam, BoundaryCondition.tail_filled(rc, lam))
    _, ok_rc = fe.finite_energy_check(gibbs, rc, origin, make_box(2, 2))
    ok = ok_k and ok_rc and not ok_pm
    return ("finite energy", ok, float(ok), 1.0)


def check_sampler(quick=True):
    from scipy.stats import chisquare
    model = PotentialSpec(ising_potential(0.4, d=1))
    w = make_box(1, 1)
    sweeps = 20000 if quick else 100000
    res = fe.run_chain(model, w, sweeps, 7, thin=fe.mixing_thin(model, w))
    ref = kernel(model, w, BoundaryCondition.tail_filled(model, w)).weights
    pval = float(chisquare(res.counts, ref * res.counts.sum()).pvalue)
    same = fe.run_chain(model, w, 500, 7).digest == fe.run_chain(model, w, 500, 7).digest
    return ("sampler", pval > 0.01 and same, pval, 0.01)


def check_minimizer_oracle(quick=True, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(10 if quick else 50):
        m = int(rng.integers(1, 4))
        ks = rng.normal(size=(m, 6)) * 1.5
        ks -= np.log(np.exp(ks).sum(axis=1))[:, None]
        mu = rng.normal(size=6)
        mu -= np.log(np.exp(mu).sum())
        val, _, _ = fe.minimize_mixture_kl(mu, ks)
        worst = max(worst, abs(val - fe.grid_search_mixture_kl(mu, ks)))
    # the grid is coarser than the solver, so allow its own resolution error
    return ("minimizer vs grid search", worst <= 1e-6, worst, 1e-6)


CHECKS = [check_consistency_matrix, check_diameter_bounds, check_cluster_bound,
          check_obvious_bound, check_superadditivity, check_sandwich, check_zero_sfe,
          check_griffiths_forms, check_window_dlr, check_finite_energy, check_sampler,
          check_minimizer_oracle]


def run_suite(quick: bool = True) -> list:
    return [check(quick=quick) for check in CHECKS]
