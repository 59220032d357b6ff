import math

import numpy as np
import pytest

from latticesfe.errors import DomainError, ShapeError
from latticesfe.lattice import Alphabet, Window, block
from latticesfe.measures import (
    DensityTable, MeasureFamily, dominated, envelope, marginal, max_diameter, max_entropy,
    measures_equal, mixture, point_mass, product_measure, rel_entropy, total_variation, uniform,
)

TRI = Alphabet(("a", "b", "c"))
W2 = block((2,))


def table(rng, window=W2, alphabet=TRI):
    return DensityTable.from_log_weights(window, alphabet,
                                         rng.normal(size=len(alphabet) ** len(window)))


def test_normalization_and_shapes():
    t = DensityTable.from_weights(W2, TRI, np.arange(1, 10))
    assert t.mass == pytest.approx(1.0)
    assert t.log_z == pytest.approx(math.log(45))
    with pytest.raises(ShapeError):
        DensityTable.from_log_weights(W2, TRI, np.zeros(8))
    with pytest.raises(ValueError):
        DensityTable(W2, TRI, np.zeros(9))  # flagged normalized, mass 9


def test_tensor_axes_follow_window_order():
    w = np.zeros(9)
    w[1] = 1.0  # code 1: first site "b", second "a"
    t = DensityTable.from_weights(W2, TRI, w)
    arr = np.exp(t.to_tensor())
    assert arr[1, 0] == 1.0
    assert t.prob((1, 0)) == 1.0
    back = DensityTable.from_tensor(W2, TRI, t.to_tensor())
    assert np.allclose(back.log_weights, t.log_weights)


def test_marginal_of_product():
    single = np.array([0.2, 0.3, 0.5])
    p = product_measure(block((3,)), TRI, single)
    m = marginal(p, Window.of([(2,)]))
    assert np.allclose(m.weights, single)
    with pytest.raises(ShapeError):
        marginal(p, Window.of([(7,)]))


def test_relative_entropy_values():
    u = uniform(W2, TRI)
    pm = point_mass(W2, TRI, (0, 0))
    assert rel_entropy(pm, u) == pytest.approx(math.log(9))
    assert rel_entropy(u, pm) == math.inf
    assert rel_entropy(u, u) == 0.0
    assert max_entropy(pm, u) == pytest.approx(math.log(9))


def test_max_diameter_is_largest_pairwise_max_entropy():
    rng = np.random.default_rng(2)
    fam = [table(rng) for _ in range(4)]
    brute = max(max_entropy(a, b) for a in fam for b in fam)
    assert max_diameter(fam) == pytest.approx(brute, abs=1e-12)
    fam.append(point_mass(W2, TRI, (1, 1)))
    assert max_diameter(fam) == math.inf


def test_mixture_and_tv():
    rng = np.random.default_rng(3)
    a, b = table(rng), table(rng)
    m = mixture([0.25, 0.75], [a, b])
    assert np.allclose(m.weights, 0.25 * a.weights + 0.75 * b.weights)
    assert total_variation(a, a) == 0.0
    assert measures_equal(m, m)
    with pytest.raises(ValueError):
        mixture([0.5, 0.6], [a, b])


def test_envelope_sandwich():
    rng = np.random.default_rng(4)
    fam = MeasureFamily(tuple(table(rng) for _ in range(3)))
    lo, hi = envelope(fam, fam.members[0])
    for m in fam:
        assert dominated(lo, m, hi)
    # the envelopes are within the family diameter of each member
    d = max_diameter(fam)
    assert np.all(hi.log_weights - lo.log_weights <= d + 1e-12)
    with pytest.raises(DomainError):
        envelope(fam, uniform(W2, TRI))


def test_csv_and_bytes():
    rng = np.random.default_rng(5)
    t = table(rng)
    lines = t.to_csv().splitlines()
    assert lines[0] == "code,states,weight"
    assert lines[2].startswith("1,b a,")
    assert "nan" not in t.to_csv().lower()
    back = DensityTable.from_bytes(W2, TRI, t.to_bytes())
    assert np.allclose(back.weights, t.weights, rtol=0, atol=1e-15)
