"""Exhaustive checks of the structural identities and bounds the learner relies on.

Each check draws random small instances, evaluates both sides exactly over
{0,1}^d and reports the worst violation. ``run_all`` backs ``rbn verify``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from . import oracle, transform
from .bayesnet import (
    BayesNet,
    DistributionTable,
    all_points,
    config_probs,
    hellinger_cpt_bound,
    hellinger_exact,
    make_dag,
    random_net,
    to_table,
)
from .contamination import decompose, mixture_table

FAMILIES = ("empty", "chain", "tree", "random_dag")


@dataclass
class CheckResult:
    name: str
    instances: int
    max_violation: float
    tolerance: float
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}  {self.name:<22} instances={self.instances:<6d} "
                f"max_violation={self.max_violation:.3e} tol={self.tolerance:.0e} "
                f"({self.seconds:.2f}s)")


def random_instance(rng, d_max: int = 8, d_min: int = 1, c: float = 0.0) -> BayesNet:
    family = FAMILIES[rng.integers(len(FAMILIES))]
    d = int(rng.integers(d_min, d_max + 1))
    fan_in = int(rng.integers(1, 4))
    dag = make_dag(family, d, fan_in, seed=int(rng.integers(2**32)))
    return random_net(dag, c, seed=int(rng.integers(2**32)))


def random_q_near(p, radius: float, rng) -> np.ndarray:
    """A CPT in [0,1]^m within L2 distance ``radius`` of p."""
    u = rng.standard_normal(p.size)
    u *= rng.uniform(0, radius) / np.linalg.norm(u)
    return np.clip(p + u, 0.0, 1.0)


def random_unit(m: int, rng) -> np.ndarray:
    v = rng.standard_normal(m)
    return v / np.linalg.norm(v)


def random_pmf(d: int, rng, sparsity: float = 0.3) -> DistributionTable:
    w = rng.exponential(size=1 << d) * (rng.random(1 << d) > sparsity)
    if w.sum() == 0:
        w[0] = 1.0
    return DistributionTable(d, w / w.sum())


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def check_hellinger_bound(n: int = 100, d_max: int = 8, seed: int = 0) -> CheckResult:
    """Squared Hellinger distance never exceeds the CPT bound."""
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(n):
        p = random_instance(rng, d_max)
        q = random_net(p.dag, 0.0, seed=int(rng.integers(2**32)))
        exact = hellinger_exact(to_table(p), to_table(q)) ** 2
        worst = max(worst, exact - hellinger_cpt_bound(p, q))
    return CheckResult("hellinger-bound", n, max(worst, 0.0), 1e-12)


@_timed
def check_inverse(n_nets: int = 20, q_per_net: int = 10, d_max: int = 8, seed: int = 0) -> CheckResult:
    """recover_sample(f_transform(x, q)) == x for every x."""
    rng = np.random.default_rng(seed)
    failures, count = 0, 0
    for _ in range(n_nets):
        net = random_instance(rng, d_max)
        pts = all_points(net.d)
        for _ in range(q_per_net):
            q = rng.random(net.m)
            fm = transform.f_transform(pts, q, net.table)
            for x, fv in zip(pts, fm):
                count += 1
                if not np.array_equal(transform.recover_sample(fv, net.table), x):
                    failures += 1
    return CheckResult("inverse-recovery", count, float(failures), 0.0)


@_timed
def check_conditional_mean(n: int = 20, d_max: int = 6, seed: int = 0) -> CheckResult:
    """E[F_k | F_1..F_{k-1}] = p_k under P, for every prefix realization."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        net = random_instance(rng, d_max)
        worst = max(worst, oracle.conditional_mean_gaps(to_table(net), net.cpt, net.table))
    return CheckResult("cond-independence", n, worst, 1e-10)


def _f_moments(net: BayesNet, q):
    """Mean and covariance of F(X, q) under X ~ net, enumerating through f_transform."""
    dist = to_table(net)
    fm = transform.f_transform(all_points(net.d), q, net.table)
    mean = oracle.kahan_sum(dist.probs[:, None] * fm)
    c = fm - mean
    cov = oracle.kahan_sum(dist.probs[:, None, None] * c[:, :, None] * c[:, None, :])
    return mean, cov


@_timed
def check_f_moments(n: int = 50, d_max: int = 8, seed: int = 0) -> CheckResult:
    """E[F(X,p)] = p and Cov[F(X,p)] = diag(Pr[Pi_k] p_k (1 - p_k))."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        net = random_instance(rng, d_max)
        p = net.cpt
        mean, cov = _f_moments(net, p)
        probs = oracle.config_probs_oracle(to_table(net), net.table)
        expected = np.diag(probs * p * (1 - p))
        worst = max(worst, np.abs(mean - p).max(), np.abs(cov - expected).max())
    return CheckResult("F-moments", n, float(worst), 1e-10)


@_timed
def check_azuma(n_nets: int = 20, v_per_net: int = 20, d_max: int = 8, seed: int = 0,
                thresholds=tuple(np.arange(0.5, 4.01, 0.5))) -> CheckResult:
    """Pr[|v.(F(X,q)-q)| >= T + |p-q|] <= 2 exp(-T^2/2)."""
    rng = np.random.default_rng(seed)
    worst = -math.inf
    ts = np.asarray(thresholds)
    count = 0
    for _ in range(n_nets):
        net = random_instance(rng, d_max)
        dist = to_table(net)
        for _ in range(v_per_net):
            q = random_q_near(net.cpt, 0.5, rng)
            v = random_unit(net.m, rng)
            shift = np.linalg.norm(net.cpt - q)
            tails = oracle.exact_tail(dist, v, q, ts + shift, net.table)
            worst = max(worst, float(np.max(tails - 2 * np.exp(-ts ** 2 / 2))))
            count += ts.size
    return CheckResult("azuma-tail", count, max(worst, 0.0), 0.0)


@_timed
def check_decomposition(n: int = 100, d_max: int = 8, seed: int = 0) -> CheckResult:
    """Q = P + wE - wL with disjoint supports and wL <= P."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(n):
        p = to_table(random_instance(rng, d_max))
        if i % 2:
            q = to_table(random_net(make_dag("empty", p.d), 0.0, seed=int(rng.integers(2**32))))
        else:
            q = random_pmf(p.d, rng)
        dec = decompose(p, q)
        e, l = dec.E.probs, dec.L.probs
        overlap = float(np.sum((e > 0) & (l > 0)))
        recon = np.abs(p.probs + dec.w * e - dec.w * l - q.probs).max()
        excess = np.max(dec.w * l - p.probs)
        worst = max(worst, overlap, recon, excess)
    return CheckResult("decomposition", n, float(worst), 1e-12)


@_timed
def check_mean_transformed(n: int = 50, d_max: int = 8, seed: int = 0) -> CheckResult:
    """(E[F(X,q)] - q)_k = Pr[Pi_k] (p_k - q_k)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        net = random_instance(rng, d_max)
        q = rng.random(net.m)
        dist = to_table(net)
        lhs = oracle.exact_mean_f(dist, q, net.table) - q
        rhs = oracle.config_probs_oracle(dist, net.table) * (net.cpt - q)
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return CheckResult("mean-transformed", n, worst, 1e-10)


@_timed
def check_mp_bound(n: int = 50, d_max: int = 8, seed: int = 0) -> CheckResult:
    """|M_P|_2 <= sum_k Pr[Pi_k] (p_k - q_k)^2 on product (empty-graph) nets.

    The entrywise identity behind this bound needs X_i to be independent of
    Pi_j given Pi_i, which fails once a node feeds a later configuration
    (see tests/test_oracle.py for a two-node chain counterexample).
    """
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(n):
        d = int(rng.integers(1, d_max + 1))
        net = random_net(make_dag("empty", d), 0.0, seed=int(rng.integers(2**32)))
        q = rng.random(net.m)
        dist = to_table(net)
        mp = oracle.exact_second_moment(dist, q, net.table, zero_diag=True)
        bound = float(np.sum(config_probs(net) * (net.cpt - q) ** 2))
        worst = max(worst, oracle.spectral_norm_dense(mp) - bound)
    return CheckResult("mp-bound", n, max(worst, 0.0), 1e-12)


@_timed
def check_wrong_mean_covar(n: int = 50, d_max: int = 8, seed: int = 0) -> CheckResult:
    """|E_D[F(X,q)] - q|_2 <= sqrt(|M_D|_2) for D in {E, L}."""
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(n):
        net = random_instance(rng, d_max)
        p = to_table(net)
        dec = decompose(p, mixture_table(p, random_pmf(net.d, rng), rng.uniform(0.01, 0.3)))
        q = rng.random(net.m)
        for dist in (dec.E, dec.L):
            mu = oracle.exact_mean_f(dist, q, net.table)
            md = oracle.exact_second_moment(dist, q, net.table)
            worst = max(worst, np.linalg.norm(mu - q) - math.sqrt(oracle.spectral_norm_dense(md)))
    return CheckResult("wrong-mean-covar", 2 * n, max(worst, 0.0), 1e-12)


def mixture_instance(rng, d_max: int = 8):
    """A Bayes net P and a corrupted pmf with both additive and subtractive error."""
    net = random_instance(rng, d_max)
    p = to_table(net)
    eps = rng.uniform(0.01, 0.25)
    noisy = mixture_table(p, random_pmf(net.d, rng), eps).probs.copy()
    # Remove some mass from a random subset, then renormalize.
    cut = rng.random(noisy.size) < 0.2
    noisy[cut] *= rng.uniform(0.5, 1.0, size=int(cut.sum()))
    return net, DistributionTable(net.d, noisy / noisy.sum())


@_timed
def check_offdiag_identity(n: int = 50, d_max: int = 8, seed: int = 0) -> CheckResult:
    """Off the diagonal, M_tilde = M_P + w M_E - w M_L."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        net, noisy = mixture_instance(rng, d_max)
        p = to_table(net)
        dec = decompose(p, noisy)
        q = rng.random(net.m)
        t = net.table
        lhs = oracle.exact_second_moment(noisy, q, t, zero_diag=True)
        rhs = (oracle.exact_second_moment(p, q, t, zero_diag=True)
               + dec.w * oracle.exact_second_moment(dec.E, q, t)
               - dec.w * oracle.exact_second_moment(dec.L, q, t))
        off = ~np.eye(net.m, dtype=bool)
        worst = max(worst, float(np.abs(lhs - rhs)[off].max()) if net.m > 1 else 0.0)
    return CheckResult("offdiag-identity", n, worst, 1e-10)


def suite(quick: bool = False) -> List[Callable[[], CheckResult]]:
    s = 0.2 if quick else 1.0

    def k(x):
        return max(2, int(round(x * s)))

    return [
        lambda: check_hellinger_bound(k(100)),
        lambda: check_inverse(k(20), 10),
        lambda: check_conditional_mean(k(20)),
        lambda: check_f_moments(k(50)),
        lambda: check_azuma(k(20), k(20)),
        lambda: check_decomposition(k(100)),
        lambda: check_mean_transformed(k(50)),
        lambda: check_mp_bound(k(50)),
        lambda: check_wrong_mean_covar(k(50)),
        lambda: check_offdiag_identity(k(50)),
    ]


def run_all(quick: bool = False, echo=print) -> List[CheckResult]:
    results = []
    for check in suite(quick):
        res = check()
        results.append(res)
        if echo:
            echo(res.line())
    return results
