import json
import math

import numpy as np
import pytest

from latticesfe.errors import AmbiguityError, ConfigError
from latticesfe.lattice import Alphabet, Configuration, Window, block, make_box
from latticesfe.models import (
    BoundaryCondition, Griffiths, LoopOn, Potential, PotentialSpec, RandomCluster,
    check_consistency, diam_B, diam_B_restricted, eps, griffiths_kernel_simplified,
    griffiths_log_z_spread, hamiltonian, ising_potential, kernel, kernels_batch, log_z_spread,
    model_from_json, zero_potential,
)

from oracles import (
    griffiths_kernel_brute, loop_kernel_brute, potential_kernel_brute, rc_kernel_brute,
)

ORIGIN = Window.of([(0, 0)])


def _random_bcs(model, lam, frame, rng, n):
    return [BoundaryCondition.random(model, lam, frame, rng) for _ in range(n)]


@pytest.mark.parametrize("lam", [ORIGIN, block((1, 2)), block((2, 1))])
def test_random_cluster_kernel_matches_brute_force(lam):
    rng = np.random.default_rng(1)
    rc = RandomCluster(0.3, 4.0)
    frame = rc.required_frame(lam)
    for bc in _random_bcs(rc, lam, frame, rng, 5):
        got = kernel(rc, lam, bc).log_weights
        want = rc_kernel_brute(0.3, 4.0, lam, frame, bc.outside.states)
        assert np.allclose(got, want, atol=1e-12)


@pytest.mark.parametrize("lam", [ORIGIN, block((1, 2))])
def test_griffiths_kernel_matches_brute_force(lam):
    rng = np.random.default_rng(2)
    g = Griffiths(0.6, 0.8)
    frame = g.required_frame(lam)
    for bc in _random_bcs(g, lam, frame, rng, 5):
        got = kernel(g, lam, bc).log_weights
        want = griffiths_kernel_brute(0.6, 0.8, lam, frame, bc.outside.states)
        assert np.allclose(got, want, atol=1e-12)


@pytest.mark.parametrize("lam", [ORIGIN, block((1, 2))])
def test_loop_kernel_matches_brute_force(lam):
    rng = np.random.default_rng(3)
    m = LoopOn(1.7, 0.6)
    frame = m.required_frame(lam)
    for bc in _random_bcs(m, lam, frame, rng, 5):
        got = kernel(m, lam, bc).log_weights
        want = loop_kernel_brute(1.7, 0.6, lam, frame, bc.outside.states)
        assert np.allclose(got, want, atol=1e-12)


def test_potential_kernel_matches_brute_force():
    rng = np.random.default_rng(4)
    m = PotentialSpec(ising_potential(0.5, h=0.2, d=2, coupling2=0.1))
    lam = block((1, 2))
    frame = m.required_frame(lam)
    for bc in _random_bcs(m, lam, frame, rng, 5):
        got = kernel(m, lam, bc).log_weights
        want = potential_kernel_brute(m, lam, frame, bc.outside.states)
        assert np.allclose(got, want, atol=1e-12)


def test_ising_singleton_closed_form():
    # all-plus neighbours: P(+) = e^{4b} / (e^{4b} + e^{-4b})
    b = 0.3
    m = PotentialSpec(ising_potential(b, d=2))
    k = kernel(m, ORIGIN, BoundaryCondition.tail_filled(m, ORIGIN))
    assert k.weights[1] == pytest.approx(1 / (1 + math.exp(-8 * b)), abs=1e-14)


@pytest.mark.parametrize("model", [
    PotentialSpec(ising_potential(0.5, d=2)), RandomCluster(0.7, 0.5), LoopOn(2.0, 0.8),
    Griffiths(0.4, 0.3)], ids=["ising", "rc", "loop", "griffiths"])
def test_consistency_on_nested_windows(model):
    rng = np.random.default_rng(5)
    delta = block((2, 2))
    frame = model.required_frame(delta)
    for lam in (ORIGIN, block((1, 2))):
        for bc in _random_bcs(model, delta, frame, rng, 4):
            assert check_consistency(model, lam, delta, bc) <= 1e-10


def test_hamiltonian_and_eps():
    pot = ising_potential(1.0, d=1)
    w = block((3,))
    conf = Configuration(w, (1, 1, 0), pot.alphabet)
    # translates meeting {1}: bonds 0-1 (aligned) and 1-2 (opposed)
    assert hamiltonian(pot, Window.of([(1,)]), None, conf) == pytest.approx(0.0)
    # restricted to w only the aligned bond 0-1 survives for {0}
    assert hamiltonian(pot, Window.of([(0,)]), w, conf) == pytest.approx(-1.0)
    with pytest.raises(AmbiguityError):
        hamiltonian(pot, Window.of([(0,)]), None, conf)
    assert eps(pot, Window.of([(1,)]), w) == 0.0
    assert eps(pot, Window.of([(1,)]), Window.of([(1,)])) == 2.0


def test_restricted_diameter_within_four_eps():
    pot = ising_potential(0.7, h=0.1, d=2, coupling2=0.3)
    m = PotentialSpec(pot)
    delta = block((1, 2))
    ring = delta.difference(ORIGIN)
    for v in (0, 1):
        pinned = Configuration(ring, (v,), m.alphabet)
        d = diam_B_restricted(m, ORIGIN, delta, pinned)
        assert d <= 4 * eps(pot, ORIGIN, delta) + 1e-12


def test_griffiths_forms_and_normalizer_bound():
    rng = np.random.default_rng(6)
    g = Griffiths(0.6, 0.8)
    lam = block((1, 2))
    frame = g.required_frame(lam)
    for bc in _random_bcs(g, lam, frame, rng, 6):
        a = kernel(g, lam, bc)
        b = griffiths_kernel_simplified(g, lam, bc)
        assert 0.5 * np.abs(a.weights - b.weights).sum() <= 1e-10
    assert griffiths_log_z_spread(g, ORIGIN) <= g.log_z_bound(ORIGIN) + 1e-12
    assert diam_B(g, ORIGIN) <= g.boundary_bound(ORIGIN) + 1e-12


def test_rc_log_z_spread_within_half_diameter_bound():
    rc = RandomCluster(0.5, 4.0)
    assert log_z_spread(rc, ORIGIN) <= rc.log_z_bound(ORIGIN) + 1e-12


def test_loop_bound_at_unit_edge_weight():
    m = LoopOn(3.0, 1.0)
    nb = 6  # hexagonal faces have six neighbours
    assert m.boundary_bound(ORIGIN) == pytest.approx(4 * nb * math.log(3.0))
    assert diam_B(m, ORIGIN) <= m.boundary_bound(ORIGIN)


def test_unknown_tail_ambiguity():
    rc = RandomCluster(0.5, 2.0)
    frame = rc.required_frame(ORIGIN)
    out = frame.difference(ORIGIN)
    bc = BoundaryCondition.from_states(rc, ORIGIN, frame, [0] * len(out), tail="unknown")
    with pytest.raises(AmbiguityError):
        kernel(rc, ORIGIN, bc)


def test_frame_too_small_is_ambiguous():
    g = Griffiths(0.5, 0.5)
    with pytest.raises(AmbiguityError):
        kernels_batch(g, ORIGIN, block((2, 2)), np.zeros((1, 3), np.int8))


def test_json_roundtrip_and_rejection():
    for m in (RandomCluster(0.3, 0.5), Griffiths(0.4, 0.3), LoopOn(1.5, 0.7)):
        again = model_from_json(json.dumps(m.to_json()))
        assert again.to_json() == m.to_json()
    pot = Potential(Alphabet(("0", "1")), ((((0,), (1,)), [0.0, math.inf, 1.0, 0.5]),))
    back = model_from_json(PotentialSpec(pot).to_json())
    assert back.potential.terms[0][1][1] == math.inf
    with pytest.raises(ConfigError):
        model_from_json({"variant": "random_cluster", "p": 0.5, "q": 2, "colour": 1})
    with pytest.raises(ConfigError):
        model_from_json({"variant": "percolation"})
    with pytest.raises(ConfigError):
        RandomCluster(1.5, 2.0)


def test_zero_potential_kernel_is_reference():
    m = PotentialSpec(zero_potential(Alphabet(("a", "b", "c")), 2))
    k = kernel(m, block((1, 2)), BoundaryCondition.tail_filled(m, block((1, 2))))
    assert np.allclose(k.weights, 1 / 9)


def test_boundary_json():
    rc = RandomCluster(0.5, 2.0)
    bc = BoundaryCondition.tail_filled(rc, ORIGIN)
    obj = bc.to_json()
    assert obj["tail"] == "closed" and len(obj["frame"]) == 5
    assert bc.window == ORIGIN
    assert make_box(1, 2).issubset(rc.required_frame(make_box(1, 2)))
