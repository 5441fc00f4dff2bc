"""Fixed-structure Bayesian networks over {0,1}^d.

Nodes are 0-indexed and every edge points from a lower to a higher index,
so node order is a topological order. Conditional probability tables are
flat vectors indexed by parental configuration ``k`` (see ConfigTable).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DagMismatch,
    DimensionMismatch,
    DimensionTooLarge,
    InfeasibleTopology,
    InvalidBalance,
    InvalidDag,
)

DEFAULT_D_EXACT = 20


@dataclass(frozen=True)
class Dag:
    d: int
    parents: tuple

    def __post_init__(self):
        if self.d < 1:
            raise InvalidDag(f"need at least one node, got d={self.d}")
        if len(self.parents) != self.d:
            raise InvalidDag(f"expected {self.d} parent lists, got {len(self.parents)}")
        normalized = []
        for i, ps in enumerate(self.parents):
            ps = tuple(int(j) for j in ps)
            if list(ps) != sorted(set(ps)):
                raise InvalidDag(f"parents of node {i} must be sorted and duplicate-free: {ps}")
            if any(j < 0 or j >= i for j in ps):
                raise InvalidDag(f"parents of node {i} must have smaller indices: {ps}")
            normalized.append(ps)
        object.__setattr__(self, "parents", tuple(normalized))

    @classmethod
    def empty(cls, d: int) -> "Dag":
        return cls(d, tuple(() for _ in range(d)))

    @classmethod
    def chain(cls, d: int) -> "Dag":
        return cls(d, tuple(() if i == 0 else (i - 1,) for i in range(d)))

    def fan_in(self, i: int) -> int:
        return len(self.parents[i])

    @cached_property
    def table(self) -> "ConfigTable":
        return build_config_table(self)


@dataclass(frozen=True, eq=False)
class ConfigTable:
    """Bijection between flat indices k and (node, parent assignment) pairs.

    Within a node, assignments are ordered by their integer value with the
    lowest-indexed parent as the least significant bit.
    """

    dag: Dag
    offsets: np.ndarray  # length d + 1
    entries: tuple  # entries[k] = (node, assignment as int)

    @property
    def m(self) -> int:
        return int(self.offsets[-1])

    @property
    def d(self) -> int:
        return self.dag.d

    def index(self, i: int, a: int) -> int:
        if not 0 <= a < (1 << self.dag.fan_in(i)):
            raise IndexError(f"assignment {a} out of range for node {i}")
        return int(self.offsets[i]) + a

    def node_of(self) -> np.ndarray:
        """Node index for every flat configuration index."""
        return np.repeat(np.arange(self.d), np.diff(self.offsets))

    def assignment_bits(self, k: int) -> str:
        """Parent values for configuration k, lowest-indexed parent first."""
        i, a = self.entries[k]
        return "".join(str((a >> j) & 1) for j in range(self.dag.fan_in(i)))

    def parse_assignment(self, i: int, bits: str) -> int:
        if len(bits) != self.dag.fan_in(i) or any(b not in "01" for b in bits):
            raise ValueError(f"bad assignment {bits!r} for node {i}")
        return sum(int(b) << j for j, b in enumerate(bits))

    @cached_property
    def _weights(self) -> np.ndarray:
        # float64 so the product runs through BLAS; sums stay exact integers.
        w = np.zeros((self.d, self.d), dtype=np.float64)
        for i, ps in enumerate(self.dag.parents):
            for j, p in enumerate(ps):
                w[p, i] = 1 << j
        return w

    def active_configs(self, x) -> np.ndarray:
        """Flat index of the active configuration of every node.

        Accepts a single d-vector or an (N, d) array; returns the matching
        shape of int64 indices.
        """
        x = np.asarray(x)
        if x.shape[-1] != self.d:
            raise DimensionMismatch(f"expected vectors of length {self.d}, got {x.shape[-1]}")
        return self.offsets[:-1] + (x.astype(np.float64) @ self._weights).astype(np.int64)


def build_config_table(dag: Dag) -> ConfigTable:
    sizes = [1 << dag.fan_in(i) for i in range(dag.d)]
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    entries = tuple((i, a) for i in range(dag.d) for a in range(sizes[i]))
    return ConfigTable(dag=dag, offsets=offsets, entries=entries)


def active_config(table: ConfigTable, x, i: int) -> int:
    return int(table.active_configs(np.asarray(x))[i])


@dataclass(frozen=True, eq=False)
class BayesNet:
    dag: Dag
    cpt: np.ndarray

    def __post_init__(self):
        cpt = np.array(self.cpt, dtype=float)
        if cpt.shape != (self.dag.table.m,):
            raise DimensionMismatch(f"cpt must have length {self.dag.table.m}, got {cpt.shape}")
        if np.any(~np.isfinite(cpt)) or np.any(cpt < 0) or np.any(cpt > 1):
            raise ValueError("cpt entries must lie in [0, 1]")
        cpt.setflags(write=False)
        object.__setattr__(self, "cpt", cpt)

    @property
    def d(self) -> int:
        return self.dag.d

    @property
    def table(self) -> ConfigTable:
        return self.dag.table

    @property
    def m(self) -> int:
        return self.dag.table.m

    def with_cpt(self, cpt) -> "BayesNet":
        return BayesNet(self.dag, cpt)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Binary samples, optionally with ground-truth corruption labels.

    ``labels[i]`` is True when sample i was produced by the adversary.
    """

    x: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.uint8)
        if x.ndim != 2:
            raise DimensionMismatch("dataset must be a 2-d array")
        if np.any(x > 1):
            raise ValueError("dataset entries must be 0 or 1")
        object.__setattr__(self, "x", x)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=bool)
            if labels.shape != (x.shape[0],):
                raise DimensionMismatch("one label per sample required")
            object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def unlabeled(self) -> "Dataset":
        return Dataset(self.x)


@dataclass(frozen=True, eq=False)
class DistributionTable:
    """Dense pmf over {0,1}^d; bit i of the index is x_i."""

    d: int
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.shape != (1 << self.d,):
            raise DimensionMismatch(f"expected {1 << self.d} probabilities, got {probs.shape}")
        if np.any(probs < 0):
            raise ValueError("negative probability")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {probs.sum()!r}")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)


def all_points(d: int) -> np.ndarray:
    """Every x in {0,1}^d as a (2^d, d) array, row r encoding integer r."""
    idx = np.arange(1 << d, dtype=np.int64)
    return ((idx[:, None] >> np.arange(d)) & 1).astype(np.uint8)


def encode(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    return x @ (1 << np.arange(x.shape[-1], dtype=np.int64))


def sample(net: BayesNet, n: int, seed=None) -> Dataset:
    """Ancestral sampling in node-index order."""
    rng = np.random.default_rng(seed)
    return Dataset(_ancestral(net, n, rng))


def _ancestral(net: BayesNet, n: int, rng: np.random.Generator) -> np.ndarray:
    table = net.table
    x = np.zeros((n, net.d), dtype=np.uint8)
    u = rng.random((n, net.d))
    for i, ps in enumerate(net.dag.parents):
        k = np.full(n, table.offsets[i], dtype=np.int64)
        for j, p in enumerate(ps):
            k += x[:, p].astype(np.int64) << j
        x[:, i] = u[:, i] < net.cpt[k]
    return x


def pmf(net: BayesNet, x) -> np.ndarray | float:
    x = np.asarray(x)
    k = net.table.active_configs(x)
    p = net.cpt[k]
    terms = np.where(x == 1, p, 1.0 - p)
    out = terms.prod(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def _check_exact(d: int, d_exact: int):
    if d > d_exact:
        raise DimensionTooLarge(f"d={d} exceeds d_exact={d_exact}")


def to_table(net: BayesNet, d_exact: int = DEFAULT_D_EXACT) -> DistributionTable:
    _check_exact(net.d, d_exact)
    probs = pmf(net, all_points(net.d))
    # Product of per-node conditionals sums to one only up to rounding.
    return DistributionTable(net.d, probs / probs.sum())


def config_probs(net: BayesNet, d_exact: int = DEFAULT_D_EXACT) -> np.ndarray:
    """Exact Pr_P[Pi_k] for every configuration k."""
    _check_exact(net.d, d_exact)
    pts = all_points(net.d)
    probs = pmf(net, pts)
    k = net.table.active_configs(pts)
    weights = np.broadcast_to(probs[:, None], k.shape)
    return np.bincount(k.ravel(), weights=weights.ravel(), minlength=net.m)


def config_probs_mc(net: BayesNet, n: int = 100_000, seed=None) -> np.ndarray:
    """Monte Carlo estimate of Pr_P[Pi_k] for every k, for d too large to enumerate."""
    xs = sample(net, n, seed).x
    return np.bincount(net.table.active_configs(xs).ravel(), minlength=net.m) / n


def config_prob(net: BayesNet, k: int, mode: str = "exact", n: int = 100_000,
                seed=None, d_exact: int = DEFAULT_D_EXACT) -> float:
    """Pr_P[Pi_k], either by exhaustive summation or by Monte Carlo frequency."""
    if not 0 <= k < net.m:
        raise IndexError(f"configuration {k} out of range")
    i = net.table.entries[k][0]
    if mode == "exact":
        _check_exact(net.d, d_exact)
        pts = all_points(net.d)
        hit = net.table.active_configs(pts)[:, i] == k
        return float(pmf(net, pts[hit]).sum()) if hit.any() else 0.0
    if mode == "monte_carlo":
        xs = sample(net, n, seed).x
        return float(np.mean(net.table.active_configs(xs)[:, i] == k))
    raise ValueError(f"unknown mode {mode!r}")


def min_config_prob(net: BayesNet, mode: str = "exact", n: int = 100_000,
                    seed=None, d_exact: int = DEFAULT_D_EXACT) -> float:
    if mode == "exact":
        return float(config_probs(net, d_exact).min())
    if mode == "monte_carlo":
        xs = sample(net, n, seed).x
        counts = np.bincount(net.table.active_configs(xs).ravel(), minlength=net.m)
        return float(counts.min() / n)
    raise ValueError(f"unknown mode {mode!r}")


def _same_d(a: DistributionTable, b: DistributionTable):
    if a.d != b.d:
        raise DimensionMismatch(f"dimensions differ: {a.d} vs {b.d}")


def tv_exact(a: DistributionTable, b: DistributionTable) -> float:
    _same_d(a, b)
    return float(min(1.0, 0.5 * np.abs(a.probs - b.probs).sum()))


def hellinger_exact(a: DistributionTable, b: DistributionTable) -> float:
    _same_d(a, b)
    overlap = np.sqrt(a.probs * b.probs).sum()
    return float(np.sqrt(min(1.0, max(0.0, 1.0 - overlap))))


def _same_dag(p: BayesNet, q: BayesNet):
    if p.dag != q.dag:
        raise DagMismatch("networks have different graphs")


def hellinger_cpt_bound(p: BayesNet, q: BayesNet, probs_p=None, probs_q=None,
                        d_exact: int = DEFAULT_D_EXACT) -> float:
    """Upper bound on the squared Hellinger distance from the two CPTs.

    ``probs_p``/``probs_q`` may supply the configuration probabilities when
    d is too large for exhaustive evaluation.
    """
    _same_dag(p, q)
    pp = config_probs(p, d_exact) if probs_p is None else np.asarray(probs_p, float)
    pq = config_probs(q, d_exact) if probs_q is None else np.asarray(probs_q, float)
    a, b = p.cpt, q.cpt
    num = (a - b) ** 2
    den = (a + b) * (2.0 - a - b)
    ratio = np.divide(num, den, out=np.zeros_like(num), where=num > 0)
    return float(2.0 * np.sum(np.sqrt(pp * pq) * ratio))


def cpt_l2(p: BayesNet, q: BayesNet, probs_p=None, d_exact: int = DEFAULT_D_EXACT) -> float:
    """sqrt(sum_k Pr_P[Pi_k] (p_k - q_k)^2)."""
    _same_dag(p, q)
    pp = config_probs(p, d_exact) if probs_p is None else np.asarray(probs_p, float)
    return float(np.sqrt(np.sum(pp * (p.cpt - q.cpt) ** 2)))


def tv_surrogate(p: BayesNet, q: BayesNet, c: float, probs_p=None,
                 d_exact: int = DEFAULT_D_EXACT) -> float:
    """(3/c) * cpt_l2(p, q); bounds d_TV when the balance conditions hold."""
    if not 0 < c <= 0.5:
        raise InvalidBalance(f"c must lie in (0, 1/2], got {c}")
    return 3.0 / c * cpt_l2(p, q, probs_p, d_exact)


def is_c_balanced(net: BayesNet, c: float) -> bool:
    if not 0 < c <= 0.5:
        raise InvalidBalance(f"c must lie in (0, 1/2], got {c}")
    return bool(np.all((net.cpt >= c) & (net.cpt <= 1 - c)))


# Topology families used by the generators and the experiment harness.

def make_dag(family: str, d: int, fan_in: int = 1, seed=None) -> Dag:
    """Build a DAG from a named family.

    ``tree``: node i gets exactly min(i, fan_in) parents drawn uniformly from
    earlier nodes. ``random_dag``: node i gets a uniformly random number of
    parents in [0, min(i, fan_in)].
    """
    if d < 1:
        raise InfeasibleTopology("d must be positive")
    if family == "empty":
        return Dag.empty(d)
    if family == "chain":
        return Dag.chain(d)
    if family not in ("tree", "random_dag"):
        raise InfeasibleTopology(f"unknown topology {family!r}")
    if fan_in < 0:
        raise InfeasibleTopology("fan_in must be non-negative")
    rng = np.random.default_rng(seed)
    parents = []
    for i in range(d):
        cap = min(i, fan_in)
        size = cap if family == "tree" else int(rng.integers(0, cap + 1))
        parents.append(tuple(sorted(int(j) for j in rng.choice(i, size=size, replace=False))) if size else ())
    return Dag(d, tuple(parents))


def random_net(dag: Dag, c: float = 0.0, seed=None) -> BayesNet:
    """CPT entries drawn uniformly from [c, 1 - c]."""
    if not 0 <= c <= 0.5:
        raise InvalidBalance(f"c must lie in [0, 1/2], got {c}")
    rng = np.random.default_rng(seed)
    return BayesNet(dag, rng.uniform(c, 1.0 - c, size=dag.table.m))


def product_net(means: Sequence[float]) -> BayesNet:
    return BayesNet(Dag.empty(len(means)), np.asarray(means, float))
