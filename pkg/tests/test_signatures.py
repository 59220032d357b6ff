"""Random-cluster diameters: signature reduction versus boundary enumeration,
and frozen values computed at build time."""
import math

import pytest

from latticesfe.lattice import Window, block, make_box
from latticesfe.models import RandomCluster, diam_B
from latticesfe.signatures import achievable_partitions

ORIGIN = Window.of([(0, 0)])
GRID = [(0.5, 2.0), (0.3, 0.5), (0.7, 4.0)]

# golden values recorded from the exact computation
GOLD_ORIGIN = {(0.5, 2.0): 0.810930216216329, (0.3, 0.5): 0.8615658321849087,
               (0.7, 4.0): 1.488880949894992}
GOLD_PAIR = {(0.5, 2.0): 1.5040773967762746, (0.3, 0.5): 1.5349932222542981,
             (0.7, 4.0): 2.4895290060325084}
GOLD_BOX = {(0.5, 2.0): 4.3727085727485, (0.3, 0.5): 4.414138768809, (0.7, 4.0): 8.18204332164}


def test_partitions_of_a_path():
    verts = [(0,), (1,), (2,)]
    edges = [((0,), (1,)), ((1,), (2,))]
    parts = achievable_partitions(verts, edges, [(0,), (2,)])
    assert parts == {(0, 0), (0, 1)}


@pytest.mark.parametrize("pq", GRID)
def test_signature_matches_enumeration(pq):
    rc = RandomCluster(*pq)
    for lam in (ORIGIN, block((1, 2))):
        frame = rc.required_frame(lam)
        a = diam_B(rc, lam, frame, method="enumerate")
        b = diam_B(rc, lam, frame, method="signature")
        assert a == pytest.approx(b, abs=1e-12)


@pytest.mark.parametrize("pq", GRID)
def test_origin_golden_and_frame_independence(pq):
    rc = RandomCluster(*pq)
    vals = [diam_B(rc, ORIGIN, make_box(n, 2), method="signature") for n in (1, 2)]
    assert vals[0] == pytest.approx(GOLD_ORIGIN[pq], abs=1e-12)
    assert vals[1] == pytest.approx(GOLD_ORIGIN[pq], abs=1e-12)
    assert vals[0] <= rc.boundary_bound(ORIGIN)


def test_half_q_is_log_ratio():
    # at p = 1/2, q = 2 the extreme boundaries change the count by up to 4
    # with log-weight gap reaching log 2.25
    assert GOLD_ORIGIN[(0.5, 2.0)] == pytest.approx(math.log(2.25), abs=1e-12)


@pytest.mark.parametrize("pq", GRID)
def test_pair_golden(pq):
    rc = RandomCluster(*pq)
    lam = block((1, 2))
    assert diam_B(rc, lam) == pytest.approx(GOLD_PAIR[pq], abs=1e-12)


@pytest.mark.parametrize("pq", GRID)
def test_box_golden(pq):
    rc = RandomCluster(*pq)
    lam = make_box(1, 2)
    val = diam_B(rc, lam, rc.required_frame(lam), method="signature")
    assert val == pytest.approx(GOLD_BOX[pq], abs=1e-9)
    assert val <= rc.boundary_bound(lam)
