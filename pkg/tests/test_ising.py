import pytest
from scipy.special import logsumexp

from latticesfe.ising import (
    ising_alpha, ising_decompose_check, ising_log_marginal, ising_log_partition,
)
from latticesfe.lattice import Window, block, make_box

from oracles import ising_log_z_brute


@pytest.mark.parametrize("shape", [(1,), (2, 2), (2, 3), (3, 3)])
def test_partition_function_matches_brute_force(shape):
    sites = list(block(shape))
    for beta in (0.0, 0.3, -0.8):
        assert ising_log_partition(sites, beta) == pytest.approx(ising_log_z_brute(sites, beta),
                                                                abs=1e-12)


def test_partition_is_shift_invariant():
    a = list(block((2, 3)))
    b = list(block((2, 3), origin=(5, -4)))
    assert ising_log_partition(a, 0.4) == ising_log_partition(b, 0.4)


def test_marginal_sums_to_partition():
    sites = list(make_box(1, 2))
    keep = [(0, 0), (1, 1)]
    t = ising_log_marginal(sites, 0.5, keep)
    assert t.shape == (2, 2)
    assert logsumexp(t) == pytest.approx(ising_log_partition(sites, 0.5), abs=1e-12)
    # spin flip symmetry
    assert t[0, 0] == pytest.approx(t[1, 1])


def test_alpha_lives_on_open_states():
    a = ising_alpha(block((1, 2)), 0.3)
    assert a.mass == pytest.approx(1.0)
    # any configuration with a "0" has no mass
    assert a.prob((1, 0)) == 0.0
    assert a.prob((0, 2)) > 0.0


def test_decomposition_identity():
    lam = make_box(1, 2)
    delta = Window.of([(0, 0), (0, 1), (1, 0)])
    assert ising_decompose_check(lam, delta, 0.7) <= 1e-12
