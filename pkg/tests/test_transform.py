import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rbn.bayesnet import Dag, all_points
from rbn.errors import Inconsistent, LengthMismatch, NotUnit
from rbn.oracle import dense_f
from rbn.transform import (
    centered_entries,
    centered_sparse,
    check_unit,
    f_transform,
    projection,
    recover_sample,
)
from rbn.verify import random_instance, random_unit


def test_f_transform_chain_example():
    t = Dag.chain(2).table
    fv = f_transform(np.array([1, 0]), np.array([0.5, 0.2, 0.8]), t)
    assert np.allclose(fv, [1.0, 0.2, 0.0])


def test_f_transform_empty_graph_is_identity():
    t = Dag.empty(4).table
    q = np.full(4, 0.3)
    for x in all_points(4):
        assert np.array_equal(f_transform(x, q, t), x)


def test_f_transform_mean_is_p():
    net = random_instance(np.random.default_rng(2), d_max=8, d_min=8)
    xs = all_points(net.d)
    from rbn.bayesnet import pmf

    w = pmf(net, xs)
    mean = w @ f_transform(xs, net.cpt, net.table)
    assert np.allclose(mean, net.cpt, atol=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_f_transform_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    net = random_instance(rng, d_max=6)
    q = rng.random(net.m)
    xs = all_points(net.d)
    batch = f_transform(xs, q, net.table)
    for x, row in zip(xs, batch):
        assert np.array_equal(row, dense_f(x, q, net.table))


def test_f_transform_length_check():
    with pytest.raises(LengthMismatch):
        f_transform(np.array([0, 1]), np.zeros(2), Dag.chain(2).table)


@given(st.integers(0, 2**32 - 1))
def test_recover_roundtrip(seed):
    rng = np.random.default_rng(seed)
    net = random_instance(rng, d_max=8)
    q = rng.random(net.m)
    for x in all_points(net.d):
        assert np.array_equal(recover_sample(f_transform(x, q, net.table), net.table), x)


def test_recover_inconsistent():
    t = Dag.chain(2).table
    with pytest.raises(Inconsistent):
        recover_sample(np.array([0.37, 0.1, 0.2]), t)


def test_recover_empty_graph_identity():
    t = Dag.empty(3).table
    assert np.array_equal(recover_sample(np.array([1.0, 0.0, 1.0]), t), [1, 0, 1])


def test_centered_sparse_matches_dense(rng):
    net = random_instance(rng, d_max=7, d_min=3)
    q = rng.random(net.m)
    xs = all_points(net.d)
    s = centered_sparse(xs, q, net.table).toarray()
    assert np.allclose(s, f_transform(xs, q, net.table) - q)
    k, vals = centered_entries(xs, q, net.table)
    assert k.shape == vals.shape == (len(xs), net.d)


def test_projection_examples():
    t = Dag.empty(3).table
    q = np.array([0.2, 0.5, 0.9])
    e1 = np.array([0.0, 1.0, 0.0])
    assert projection(np.array([1, 0, 1]), q, e1, t) == pytest.approx(-0.5)
    # Active bits equal to q: F(x, q) = q.
    tc = Dag.chain(2).table
    qc = np.array([1.0, 0.3, 0.0])
    v = np.ones(3) / np.sqrt(3)
    assert projection(np.array([1, 0]), qc, v, tc) == 0.0


def test_projection_not_unit():
    with pytest.raises(NotUnit):
        check_unit(np.array([1.0, 1.0]))


@given(st.integers(0, 2**32 - 1))
def test_projection_bounded_by_sqrt_d(seed):
    rng = np.random.default_rng(seed)
    net = random_instance(rng, d_max=8)
    q = rng.random(net.m)
    v = random_unit(net.m, rng)
    g = projection(all_points(net.d), q, v, net.table)
    assert np.all(np.abs(g) <= np.sqrt(net.d) + 1e-12)
