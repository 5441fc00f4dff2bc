import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rbn.bayesnet import (
    BayesNet,
    Dag,
    Dataset,
    DistributionTable,
    active_config,
    all_points,
    build_config_table,
    config_prob,
    config_probs,
    cpt_l2,
    hellinger_cpt_bound,
    hellinger_exact,
    is_c_balanced,
    make_dag,
    min_config_prob,
    pmf,
    product_net,
    random_net,
    sample,
    to_table,
    tv_exact,
    tv_surrogate,
)
from rbn.errors import (
    DagMismatch,
    DimensionMismatch,
    DimensionTooLarge,
    InfeasibleTopology,
    InvalidBalance,
    InvalidDag,
)
from rbn.verify import random_instance

from conftest import chain2, vstruct


def bern(p):
    return DistributionTable(1, np.array([1 - p, p]))


# Structure ---------------------------------------------------------------

def test_config_table_empty():
    t = build_config_table(Dag.empty(3))
    assert t.m == 3
    assert [t.assignment_bits(k) for k in range(3)] == ["", "", ""]
    assert list(t.node_of()) == [0, 1, 2]


def test_config_table_chain():
    t = build_config_table(Dag.chain(3))
    assert t.m == 5
    assert [(int(t.node_of()[k]), t.assignment_bits(k)) for k in range(5)] == [
        (0, ""), (1, "0"), (1, "1"), (2, "0"), (2, "1")]


def test_config_table_two_parents_lsb_first():
    t = build_config_table(Dag(3, ((), (), (0, 1))))
    assert t.m == 6
    # Integer order with parent 1 as least significant bit.
    assert [t.assignment_bits(k) for k in range(2, 6)] == ["00", "10", "01", "11"]


def test_active_config_examples():
    t = Dag.chain(2).table
    assert active_config(t, np.array([1, 0]), 1) == t.index(1, 1)
    v = Dag(3, ((), (), (0, 1))).table
    assert active_config(v, np.array([0, 1, 1]), 2) == v.index(2, 0b10)
    for x in all_points(3):
        assert active_config(v, x, 0) == v.index(0, 0)


def test_active_configs_vectorised_matches_scalar(rng):
    net = random_instance(rng, d_max=7, d_min=4)
    xs = all_points(net.d)
    act = net.table.active_configs(xs)
    for x, row in zip(xs, act):
        assert list(row) == [active_config(net.table, x, i) for i in range(net.d)]


@pytest.mark.parametrize("parents", [((0,),), ((), (1,)), ((), (0, 0))])
def test_invalid_dag(parents):
    with pytest.raises(InvalidDag):
        Dag(len(parents), parents)


# Sampling and exact distributions ---------------------------------------

def test_sample_deterministic_cpts():
    net = random_net(Dag.chain(4), seed=0).with_cpt(np.ones(7))
    assert sample(net, 50, seed=1).x.all()
    path = chain2(1.0, 0.7, 0.0)
    assert (sample(path, 200, seed=2).x == [1, 0]).all()


def test_sample_mean_concentrates():
    xs = sample(product_net([0.5]), 100_000, seed=3).x
    assert abs(xs.mean() - 0.5) < 0.01


def test_sample_is_reproducible():
    net = random_net(Dag.chain(5), 0.2, seed=4)
    assert np.array_equal(sample(net, 100, seed=7).x, sample(net, 100, seed=7).x)


def test_pmf_examples():
    assert pmf(product_net([0.5, 0.5]), np.array([1, 0])) == pytest.approx(0.25)
    assert pmf(chain2(0.6, 0.1, 0.9), np.array([1, 1])) == pytest.approx(0.54)


@given(st.integers(1, 10), st.integers(0, 2**32 - 1))
def test_pmf_sums_to_one(d, seed):
    net = random_instance(np.random.default_rng(seed), d_max=d, d_min=d)
    assert pmf(net, all_points(d)).sum() == pytest.approx(1.0, abs=1e-12)


def test_to_table():
    assert np.allclose(to_table(product_net([0.3])).probs, [0.7, 0.3])
    net = random_instance(np.random.default_rng(5), d_max=8, d_min=8)
    assert np.allclose(to_table(net).probs, pmf(net, all_points(8)), atol=1e-15)
    with pytest.raises(DimensionTooLarge):
        to_table(random_net(Dag.empty(21), seed=0), d_exact=20)


def test_config_prob_examples():
    assert config_prob(chain2(0.6, 0.2, 0.3), 0) == 1.0
    assert config_prob(chain2(0.6, 0.2, 0.3), 2) == pytest.approx(0.6)
    net = vstruct(0.3, 0.5)
    assert config_prob(net, net.table.index(2, 0b11)) == pytest.approx(0.15)


def test_config_prob_monte_carlo():
    net = vstruct(0.3, 0.5)
    k = net.table.index(2, 0b11)
    assert config_prob(net, k, mode="monte_carlo", n=200_000, seed=1) == pytest.approx(0.15, abs=0.005)


def test_min_config_prob():
    assert min_config_prob(product_net([0.2, 0.9])) == 1.0
    assert min_config_prob(chain2(0.6, 0.5, 0.5)) == pytest.approx(0.4)
    net = random_net(make_dag("tree", 8, 2, seed=3), 0.2, seed=3)
    # Oracle: enumerate points and accumulate per configuration.
    probs = pmf(net, all_points(8))
    brute = np.zeros(net.m)
    for x, px in zip(all_points(8), probs):
        for i in range(8):
            brute[active_config(net.table, x, i)] += px
    assert min_config_prob(net) == pytest.approx(brute.min(), abs=1e-12)
    assert np.allclose(config_probs(net), brute, atol=1e-12)


# Distances ---------------------------------------------------------------

def test_tv_examples():
    a = DistributionTable(1, np.array([1.0, 0.0]))
    b = DistributionTable(1, np.array([0.0, 1.0]))
    assert tv_exact(a, a) == 0
    assert tv_exact(a, b) == 1
    assert tv_exact(bern(0.5), bern(0.6)) == pytest.approx(0.1)
    with pytest.raises(DimensionMismatch):
        tv_exact(a, DistributionTable(2, np.full(4, 0.25)))


def test_hellinger_examples():
    assert hellinger_exact(bern(0.3), bern(0.3)) == 0
    # Disjoint supports have zero overlap.
    assert hellinger_exact(bern(0.0), bern(1.0)) == pytest.approx(1.0)
    p, q = 0.2, 0.7
    expected = np.sqrt(1 - np.sqrt(p * q) - np.sqrt((1 - p) * (1 - q)))
    assert hellinger_exact(bern(p), bern(q)) == pytest.approx(expected)


@given(st.integers(0, 2**32 - 1))
def test_tv_le_sqrt2_hellinger(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 9))
    a, b = (DistributionTable(d, rng.dirichlet(np.ones(2**d))) for _ in range(2))
    assert tv_exact(a, b) <= np.sqrt(2) * hellinger_exact(a, b) + 1e-12


def test_hellinger_cpt_bound_examples():
    p = product_net([0.4])
    assert hellinger_cpt_bound(p, p) == 0
    q = product_net([0.6])
    assert hellinger_cpt_bound(p, q) == pytest.approx(0.08)
    assert hellinger_exact(to_table(p), to_table(q)) ** 2 <= 0.08
    with pytest.raises(DagMismatch):
        hellinger_cpt_bound(p, product_net([0.4, 0.1]))


def test_hellinger_cpt_bound_degenerate_entries():
    # 0/0 terms contribute nothing.
    p = chain2(1.0, 0.3, 0.0)
    assert hellinger_cpt_bound(p, p) == 0


def test_tv_surrogate():
    assert tv_surrogate(product_net([0.5]), product_net([0.5]), 0.3) == 0
    assert tv_surrogate(product_net([0.5]), product_net([0.53]), 0.3) == pytest.approx(0.3)
    with pytest.raises(InvalidBalance):
        tv_surrogate(product_net([0.5]), product_net([0.5]), 0.0)


@given(st.integers(0, 2**32 - 1))
def test_tv_surrogate_bounds_tv_when_small(seed):
    rng = np.random.default_rng(seed)
    c = 0.3
    p = random_instance(rng, d_max=8, c=c)
    alpha = min_config_prob(p)
    q = p.with_cpt(np.clip(p.cpt + rng.normal(0, 0.002, p.m), c, 1 - c))
    score = tv_surrogate(p, q, c)
    if score <= alpha / 2:
        assert tv_exact(to_table(p), to_table(q)) <= score + 1e-12


def test_cpt_l2_zero_for_equal():
    p = random_net(Dag.chain(4), 0.1, seed=2)
    assert cpt_l2(p, p) == 0


def test_is_c_balanced():
    assert is_c_balanced(product_net([0.5, 0.5]), 0.3)
    assert not is_c_balanced(product_net([0.2, 0.5]), 0.3)
    assert is_c_balanced(product_net([0.3, 0.7]), 0.3)


# Generators and containers ----------------------------------------------

def test_make_dag_families():
    assert make_dag("chain", 4).parents == ((), (0,), (1,), (2,))
    tree = make_dag("tree", 6, 2, seed=1)
    assert [len(p) for p in tree.parents] == [0, 1, 2, 2, 2, 2]
    rnd = make_dag("random_dag", 6, 3, seed=1)
    assert all(len(p) <= min(i, 3) for i, p in enumerate(rnd.parents))
    with pytest.raises(InfeasibleTopology):
        make_dag("lattice", 4)


def test_random_net_respects_balance():
    net = random_net(make_dag("tree", 8, 2, seed=0), 0.3, seed=0)
    assert is_c_balanced(net, 0.3)
    assert min_config_prob(net) >= 0.3 ** 2


def test_bayesnet_rejects_bad_cpt():
    with pytest.raises(ValueError):
        BayesNet(Dag.empty(1), np.array([1.2]))
    with pytest.raises(DimensionMismatch):
        BayesNet(Dag.empty(2), np.array([0.5]))


def test_dataset_unlabeled_strips_labels():
    ds = Dataset(np.zeros((3, 2), np.uint8), np.array([True, False, False]))
    assert ds.unlabeled().labels is None
    assert len(ds) == 3 and ds.d == 2


def test_all_points_order():
    pts = all_points(3)
    assert [tuple(p) for p in pts] == [tuple((i >> j) & 1 for j in range(3)) for i in range(8)]
    assert set(map(tuple, pts)) == set(itertools.product((0, 1), repeat=3))
