import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from macfb.channel import build_additive_mod_m, point_mass, validate_channel
from macfb.errors import InconsistentLabels, InvalidStoppingTime
from macfb.infotheory import (OutputTree, binary_entropy, binary_entropy_inverse, c_lambda,
                              entropy, mac_mi_triple, make_grid, ptp_capacity,
                              region_boundary, region_radius_direct, simplex_grid,
                              vl_directed_information, vl_entropy)
from macfb.reference import bsc_capacity, stop_at_first_one

from conftest import random_rows

C3 = math.log2(3) - entropy([0.8, 0.1, 0.1])


def joint_mi(ch, p1, p2):
    """(I(X1;Y|X2), I(X2;Y|X1), I(X1X2;Y)) by summing the joint pmf."""
    j = p1[:, None, None] * p2[None, :, None] * ch.q

    def h(p):
        p = p[p > 0]
        return -float(np.sum(p * np.log2(p)))

    h_y = h(j.sum(axis=(0, 1)))
    h_y_x1x2 = h(j.ravel()) - h(j.sum(axis=2).ravel())
    h_y_x2 = h(j.sum(axis=0).ravel()) - h(j.sum(axis=(0, 2)))
    h_y_x1 = h(j.sum(axis=1).ravel()) - h(j.sum(axis=(1, 2)))
    return h_y_x2 - h_y_x1x2, h_y_x1 - h_y_x1x2, h_y - h_y_x1x2


def test_entropy_examples():
    assert entropy([0.5, 0.5]) == pytest.approx(1)
    assert entropy([0.8, 0.1, 0.1]) == pytest.approx(0.92193, abs=1e-5)
    assert entropy([0, 1, 0]) == 0


def test_binary_entropy_inverse():
    assert binary_entropy_inverse(0.5) == pytest.approx(0.110028, abs=1e-6)
    for x in (1e-4, 0.01, 0.2, 0.45):
        assert binary_entropy_inverse(binary_entropy(x)) == pytest.approx(x, rel=1e-9)


# -- mutual information triples ------------------------------------------------------

def test_mi_ternary_uniform(ternary):
    u = np.full(3, 1 / 3)
    t = mac_mi_triple(ternary, u, u)
    assert t.i1 == pytest.approx(C3, abs=1e-12)
    assert t.i2 == pytest.approx(C3, abs=1e-12)
    assert t.i3 == pytest.approx(C3, abs=1e-12)
    assert C3 == pytest.approx(0.66303, abs=1e-5)


def test_mi_point_mass_user1(ternary):
    assert mac_mi_triple(ternary, point_mass(3, 1), np.full(3, 1 / 3)).i1 == 0


def test_mi_parallel_uniform(parallel):
    ch, _, c1, _, c2 = parallel
    t = mac_mi_triple(ch, np.full(2, 0.5), np.full(2, 0.5))
    assert t.i1 == pytest.approx(c1, abs=1e-12)
    assert t.i2 == pytest.approx(c2, abs=1e-12)
    assert t.i3 == pytest.approx(c1 + c2, abs=1e-12)


@given(st.integers(0, 2 ** 31))
def test_mi_matches_joint_summation_and_bounds(seed):
    rng = np.random.default_rng(seed)
    a, b, y = rng.integers(2, 4, size=3)
    ch = validate_channel(random_rows(rng, (a, b), y))
    p1, p2 = rng.dirichlet(np.ones(a)), rng.dirichlet(np.ones(b))
    t = mac_mi_triple(ch, p1, p2)
    assert np.allclose(t, joint_mi(ch, p1, p2), atol=1e-10)
    assert -1e-12 <= t.i1 <= math.log2(a) + 1e-12
    assert -1e-12 <= t.i2 <= math.log2(b) + 1e-12
    assert -1e-12 <= t.i3 <= math.log2(y) + 1e-12


# -- point-to-point capacity ----------------------------------------------------------

def test_bsc_capacity_against_bias_grid():
    k = np.array([[0.9, 0.1], [0.1, 0.9]])
    cap, p = ptp_capacity(k)
    grid = max(entropy(np.array([a, 1 - a]) @ k) - entropy([0.9, 0.1])
               for a in np.linspace(0, 1, 2001))
    assert cap == pytest.approx(bsc_capacity(0.1), abs=1e-9)
    assert cap == pytest.approx(grid, abs=1e-6)
    assert cap == pytest.approx(0.53100, abs=1e-5)
    assert p == pytest.approx([0.5, 0.5], abs=1e-6)


def test_capacity_identical_rows():
    cap, _ = ptp_capacity(np.tile([0.2, 0.3, 0.5], (4, 1)))
    assert cap == pytest.approx(0, abs=1e-10)


@pytest.mark.parametrize("k", [2, 3, 5])
def test_capacity_noiseless(k):
    cap, _ = ptp_capacity(np.eye(k))
    assert cap == pytest.approx(math.log2(k), abs=1e-9)


# -- C_lambda and the region -------------------------------------------------------------

def test_c_lambda_sum_rate(ternary):
    assert c_lambda(ternary, [0, 0, 1]) == pytest.approx(C3, abs=1e-9)


def test_c_lambda_dominates_uniform(ternary):
    u = np.full(3, 1 / 3)
    assert c_lambda(ternary, [1, 0, 0]) >= mac_mi_triple(ternary, u, u).i1 - 1e-12


def test_c_lambda_parallel(parallel):
    ch, _, c1, _, c2 = parallel
    assert c_lambda(ch, [1 / 3] * 3) == pytest.approx((c1 + c2 + c1 + c2) / 3, abs=1e-9)


@given(st.integers(0, 2 ** 31))
def test_hyperplane_property(seed):
    rng = np.random.default_rng(seed)
    ch = validate_channel(random_rows(rng, (2, 3), 3))
    g = make_grid(ch)
    lam = rng.dirichlet(np.ones(3))
    top = c_lambda(ch, lam, g)
    for _ in range(5):
        a, b = rng.integers(len(g.p1s)), rng.integers(len(g.p2s))
        assert lam @ np.array(mac_mi_triple(ch, g.p1s[a], g.p2s[b])) <= top + 1e-12


def test_region_ternary_diagonal(ternary):
    s = region_boundary(ternary, math.pi / 4)
    assert s.r1 == pytest.approx(C3 / 2, abs=1e-6)
    assert s.r2 == pytest.approx(C3 / 2, abs=1e-6)
    assert s.radius == pytest.approx(region_radius_direct(ternary, math.pi / 4), abs=1e-6)


def test_region_axis_is_max_i1(ternary):
    g = make_grid(ternary)
    assert region_boundary(ternary, 0.0, g).radius == pytest.approx(g.mi[..., 0].max(), abs=1e-9)


def test_region_parallel_corner(parallel):
    ch, _, c1, _, c2 = parallel
    s = region_boundary(ch, math.atan2(c2, c1))
    assert (s.r1, s.r2) == pytest.approx((c1, c2), abs=1e-6)


@given(st.integers(0, 2 ** 31), st.floats(0, math.pi / 2))
def test_region_dual_agrees_with_direct(seed, theta):
    rng = np.random.default_rng(seed)
    ch = validate_channel(random_rows(rng, (2, 2), 3))
    g = make_grid(ch)
    hyper = region_boundary(ch, theta, g, lam_step=0.01).radius
    direct = region_radius_direct(ch, theta, g)
    assert hyper >= direct - 1e-9
    assert hyper <= direct * 1.02 + 1e-9


def test_region_monotone_in_grid(ternary):
    coarse = make_grid(ternary, 5)
    fine = make_grid(ternary, 13)
    for theta in np.linspace(0, math.pi / 2, 7):
        assert region_boundary(ternary, theta, fine).radius >= \
            region_boundary(ternary, theta, coarse).radius - 1e-12


def test_simplex_grid_rows_sum_to_one():
    g = simplex_grid(3, 6)
    assert np.allclose(g.sum(axis=1), 1)
    assert len(g) == 28


# -- variable-length entropy -----------------------------------------------------------------

def test_vl_entropy_stop_at_first_one():
    h = vl_entropy(stop_at_first_one())
    assert h == pytest.approx((1.75, 1.5, 0.25), abs=1e-12)


def test_vl_entropy_deterministic():
    tree = OutputTree(2, 3, {(): 1.0, (0,): 1.0, (0, 0): 1.0, (0, 0, 0): 1.0}, set())
    assert vl_entropy(tree) == pytest.approx((0, 0, 0), abs=1e-15)


def test_vl_entropy_length_one():
    tree = OutputTree(2, 4, {(): 1.0, (0,): 0.5, (1,): 0.5}, {(0,), (1,)})
    h_yt, h_t, h_cond = vl_entropy(tree)
    assert (h_yt, h_t) == pytest.approx((1, 0))
    assert h_cond == pytest.approx(1)


def test_invalid_stopping():
    with pytest.raises(InvalidStoppingTime):
        OutputTree(2, 3, {(): 1.0, (0,): 0.5, (1,): 0.5, (0, 0): 0.5}, {(0,)})
    with pytest.raises(InvalidStoppingTime):
        OutputTree(2, 1, {(): 1.0, (0,): 1.0, (0, 0): 1.0}, set())


def random_tree(rng, y_size, horizon, stop_p):
    prob, stop = {(): 1.0}, set()
    level = [()]
    for t in range(horizon):
        nxt = []
        for path in level:
            if t > 0 and rng.random() < stop_p:
                stop.add(path)
                continue
            split = rng.dirichlet(np.ones(y_size))
            for y in range(y_size):
                prob[path + (y,)] = prob[path] * split[y]
                nxt.append(path + (y,))
        level = nxt
    return OutputTree(y_size, horizon, prob, stop)


def test_vl_entropy_decomposition_500_trees():
    rng = np.random.default_rng(2024)
    for _ in range(500):
        tree = random_tree(rng, int(rng.integers(2, 4)), int(rng.integers(1, 6)), 0.3)
        h_yt, h_t, h_cond = vl_entropy(tree)
        assert abs(h_yt - h_t - h_cond) <= 1e-12
        assert h_t >= -1e-15 and h_cond >= -1e-15


# -- directed information -----------------------------------------------------------------------

def labelled_tree(kernel, px, horizon, pz=None):
    """Fixed-length tree whose per-node label is the i.i.d. joint of (X, Z, Y)."""
    pz = np.ones(1) if pz is None else pz
    joint = px[:, None, None] * pz[None, :, None] * kernel[:, None, :]
    py = joint.sum(axis=(0, 1))
    prob, label = {(): 1.0}, {}
    level = [()]
    for _ in range(horizon):
        nxt = []
        for path in level:
            label[path] = joint
            for y in range(len(py)):
                prob[path + (y,)] = prob[path] * py[y]
                nxt.append(path + (y,))
        level = nxt
    return OutputTree(len(py), horizon, prob, set(), label)


def test_di_independent_is_zero():
    tree = labelled_tree(np.tile([0.3, 0.7], (2, 1)), np.array([0.4, 0.6]), 3)
    assert vl_directed_information(tree) == pytest.approx(0, abs=1e-12)


def test_di_fixed_length_memoryless():
    k = np.array([[0.9, 0.1], [0.2, 0.8]])
    px = np.array([0.3, 0.7])
    single = entropy(px @ k) - sum(px[x] * entropy(k[x]) for x in range(2))
    assert vl_directed_information(labelled_tree(k, px, 4)) == pytest.approx(4 * single, rel=1e-12)


def test_di_weighted_decomposition():
    """Root term plus a * (term after y1=0) plus b * (term after y=00)."""
    rng = np.random.default_rng(5)
    j_root, j_0, j_00 = (rng.dirichlet(np.ones(8)).reshape(2, 2, 2) for _ in range(3))
    a = j_root.sum(axis=(0, 1))[0]
    b = a * j_0.sum(axis=(0, 1))[0]
    prob = {(): 1.0, (0,): a, (1,): 1 - a}
    p0 = j_0.sum(axis=(0, 1))
    prob[(0, 0)], prob[(0, 1)] = a * p0[0], a * p0[1]
    p00 = j_00.sum(axis=(0, 1))
    prob[(0, 0, 0)], prob[(0, 0, 1)] = b * p00[0], b * p00[1]
    tree = OutputTree(2, 3, prob, {(1,), (0, 1)}, {(): j_root, (0,): j_0, (0, 0): j_00})

    def cmi(j):
        total = 0.0
        pz = j.sum(axis=(0, 2))
        for x in range(2):
            for z in range(2):
                for y in range(2):
                    total += j[x, z, y] * math.log2(
                        j[x, z, y] * pz[z] / (j[x, z].sum() * j[:, z, y].sum()))
        return total

    expected = cmi(j_root) + a * cmi(j_0) + b * cmi(j_00)
    assert vl_directed_information(tree) == pytest.approx(expected, rel=1e-12)


def test_di_inconsistent_labels():
    tree = labelled_tree(np.array([[0.9, 0.1], [0.2, 0.8]]), np.array([0.5, 0.5]), 2)
    tree.label[()] = np.full((2, 1, 2), 0.25)[:, :, ::-1] * np.array([1.2, 0.8])
    with pytest.raises(InconsistentLabels):
        vl_directed_information(tree)
    bare = OutputTree(2, 1, {(): 1.0, (0,): 0.5, (1,): 0.5}, set())
    with pytest.raises(InconsistentLabels):
        vl_directed_information(bare)
