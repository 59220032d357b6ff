"""Property-based checks of the structural invariants."""
import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from latticesfe import free_energy as fe
from latticesfe.cluster import BondFrame, count_clusters
from latticesfe.lattice import (
    Alphabet, Configuration, Window, block, decode, edge_boundary, encode, make_box, translate,
)
from latticesfe.measures import (
    DensityTable, marginal, max_diameter, max_entropy, mixture, rel_entropy,
)
from latticesfe.models import (
    BoundaryCondition, Griffiths, LoopOn, PotentialSpec, RandomCluster, ising_potential, kernel,
)

from oracles import bfs_cluster_count

ALPHA = Alphabet(("a", "b", "c"))

log_tables = st.lists(st.floats(-6, 6), min_size=9, max_size=9).map(np.array)
sparse_tables = st.lists(st.one_of(st.floats(-6, 6), st.just(-math.inf)),
                         min_size=9, max_size=9).filter(lambda v: np.isfinite(v).any()).map(np.array)


def _t(lw, window=block((2,))):
    return DensityTable.from_log_weights(window, ALPHA, lw)


@given(st.integers(0, 3), st.integers(1, 3))
def test_box_size(n, d):
    assert len(make_box(n, d)) == (2 * n + 1) ** d


@given(st.sets(st.tuples(st.integers(-2, 2), st.integers(-2, 2)), min_size=1, max_size=25))
def test_edge_boundary_one_endpoint_inside(sites):
    w = Window.of(sites)
    for a, b in edge_boundary(w):
        assert (a in w) != (b in w)
        assert sum(abs(x - y) for x, y in zip(a, b)) == 1


@given(st.integers(1, 6), st.integers(2, 4), st.data())
def test_encode_decode_bijection(n, k, data):
    alpha = Alphabet(tuple(str(i) for i in range(k)))
    w = block((n,))
    code = data.draw(st.integers(0, k ** n - 1))
    assert encode(decode(code, w, alpha)) == code


@given(sparse_tables, sparse_tables)
def test_entropy_between_zero_and_max_entropy(a, b):
    mu, nu = _t(a), _t(b)
    h = rel_entropy(mu, nu)
    assert 0.0 <= h <= max_entropy(mu, nu) + 1e-12


@given(sparse_tables, sparse_tables, sparse_tables)
def test_entropy_difference_within_diameter(a, b, c):
    mu, nu, nu2 = _t(a), _t(b), _t(c)
    h1, h2 = rel_entropy(mu, nu), rel_entropy(mu, nu2)
    diff = 0.0 if (math.isinf(h1) and math.isinf(h2)) else abs(h1 - h2)
    assert diff <= max_diameter([nu, nu2]) + 1e-12


@settings(max_examples=25)
@given(st.lists(log_tables, min_size=2, max_size=4), st.integers(0, 2 ** 31))
def test_mixtures_do_not_widen_diameter(members, seed):
    fam = [_t(m) for m in members]
    rng = np.random.default_rng(seed)
    base = max_diameter(fam)
    mixes = [mixture(rng.dirichlet(np.ones(len(fam))), fam) for _ in range(50)]
    assert max_diameter(mixes) <= base + 1e-12
    assert abs(max_diameter(fam + mixes) - base) <= 1e-12


@given(st.lists(st.floats(-6, 6), min_size=27, max_size=27), st.lists(st.floats(-6, 6), min_size=27,
                                                                         max_size=27))
def test_entropy_monotone_under_marginals(a, b):
    w = block((3,))
    mu, nu = _t(np.array(a), w), _t(np.array(b), w)
    sub = Window.of([(0,), (2,)])
    assert rel_entropy(marginal(mu, sub), marginal(nu, sub)) <= rel_entropy(mu, nu) + 1e-12


@settings(max_examples=40)
@given(st.lists(st.integers(0, 3), min_size=25, max_size=25),
       st.tuples(st.integers(-5, 5), st.integers(-5, 5)))
def test_cluster_count_bfs_and_shift(states, x):
    frame = make_box(2, 2)
    for lam in (Window.of([(0, 0)]), block((1, 2))):
        c = count_clusters(BondFrame(frame, tuple(states)), lam)
        assert c == bfs_cluster_count(frame, states, lam)
        shifted = count_clusters(BondFrame(translate(frame, x), tuple(states)), translate(lam, x))
        assert shifted == c


MODELS = [PotentialSpec(ising_potential(0.6, h=0.1, d=2)), RandomCluster(0.4, 3.0),
          LoopOn(1.4, 0.8), Griffiths(0.5, 0.7)]


@settings(max_examples=30)
@given(st.integers(0, 3), st.tuples(st.integers(-4, 4), st.integers(-4, 4)), st.integers(0, 2 ** 31))
def test_kernel_shift_invariance_and_properness(mi, x, seed):
    model = MODELS[mi]
    lam = block((1, 2))
    frame = model.required_frame(lam)
    bc = BoundaryCondition.random(model, lam, frame, np.random.default_rng(seed))
    k = kernel(model, lam, bc)
    assert abs(k.mass - 1.0) <= 1e-12
    moved = BoundaryCondition(translate(frame, x),
                              Configuration(translate(bc.outside.window, x), bc.outside.states,
                                            model.alphabet))
    k2 = kernel(model, translate(lam, x), moved)
    assert np.array_equal(k.log_weights, k2.log_weights)


@settings(max_examples=15)
@given(st.floats(0.05, 1.0))
def test_dlr_field_has_small_sfe_terms(beta):
    model = PotentialSpec(ising_potential(beta, d=1))
    field = fe.IsingChainField(beta)
    for n in range(3):
        assert fe.dlr_residual(field.marginal(make_box(n + 1, 1)), model,
                               make_box(n, 1)) <= 1e-10
        term = fe.sfe_term(field, model, n)
        assert term <= 4 * beta / (2 * n + 1) + 1e-12


@settings(max_examples=15)
@given(st.integers(0, 2 ** 31))
def test_minimizer_window_changes_terms_within_diameter(seed):
    # nu built from a mixture of kernels lies in the convex hull of the
    # boundary kernels, so swapping it in moves the term by at most diam/|box|
    model = PotentialSpec(ising_potential(0.4, d=1))
    rng = np.random.default_rng(seed)
    box = make_box(1, 1)
    ks = fe.boundary_kernels(model, box)
    w = rng.dirichlet(np.ones(len(ks)))
    nu = DensityTable.from_weights(box, model.alphabet, w @ np.exp(ks))
    mu = fe.IsingChainField(0.4).marginal(box)
    fixed = fe.sfe_term(fe.IsingChainField(0.4), model, 1)
    alt = rel_entropy(mu, nu) / len(box)
    diam = max_diameter([DensityTable(box, model.alphabet, k) for k in ks])
    assert abs(fixed - alt) <= diam / len(box) + 1e-12
