"""Corruption models and the additive/subtractive decomposition of a pmf.

Two adversaries are supported. ``huber_additive`` draws each sample from the
noise distribution with probability eps. ``tv_replacement`` looks at a whole
clean dataset, deletes floor(eps * N) points of its choosing and inserts the
same number of its own.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .bayesnet import (
    BayesNet,
    ConfigTable,
    Dataset,
    DistributionTable,
    _ancestral,
    _same_d,
    encode,
    product_net,
    to_table,
)
from .errors import IdenticalDistributions, InvalidShift
from .transform import check_unit, projection

HUBER = "huber_additive"
REPLACEMENT = "tv_replacement"


@dataclass(frozen=True, eq=False)
class ProductNoise:
    means: np.ndarray

    def draw(self, net: BayesNet, n: int, rng) -> np.ndarray:
        means = np.asarray(self.means, dtype=float)
        return (rng.random((n, len(means))) < means).astype(np.uint8)

    def noise_net(self, net: BayesNet) -> BayesNet:
        return product_net(self.means)


@dataclass(frozen=True, eq=False)
class PointMass:
    point: np.ndarray

    def draw(self, net: BayesNet, n: int, rng) -> np.ndarray:
        return np.tile(np.asarray(self.point, dtype=np.uint8), (n, 1))


@dataclass(frozen=True, eq=False)
class CptShift:
    """Noise drawn from the network with ``delta`` added to each target CPT entry."""

    targets: tuple
    delta: float

    def noise_net(self, net: BayesNet) -> BayesNet:
        cpt = net.cpt.copy()
        cpt[list(self.targets)] += self.delta
        if np.any(cpt < 0) or np.any(cpt > 1):
            raise InvalidShift(f"shift {self.delta} leaves [0, 1] at targets {self.targets}")
        return net.with_cpt(cpt)

    def draw(self, net: BayesNet, n: int, rng) -> np.ndarray:
        return _ancestral(self.noise_net(net), n, rng)


@dataclass(frozen=True, eq=False)
class SubtractiveTail:
    """Deletes the points with the largest |v . (F(x, q_ref) - q_ref)|."""

    v: np.ndarray
    q_ref: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "v", check_unit(self.v))
        object.__setattr__(self, "q_ref", np.asarray(self.q_ref, dtype=float))


Adversary = Union[ProductNoise, PointMass, CptShift, SubtractiveTail]


@dataclass(frozen=True, eq=False)
class NoiseModel:
    kind: str
    eps: float
    adversary: Adversary

    def __post_init__(self):
        if self.kind not in (HUBER, REPLACEMENT):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not 0 <= self.eps < 0.5:
            raise ValueError(f"eps must lie in [0, 1/2), got {self.eps}")
        if isinstance(self.adversary, SubtractiveTail) and self.kind != REPLACEMENT:
            raise ValueError("subtractive_tail is only available for tv_replacement")


@dataclass(frozen=True, eq=False)
class Decomposition:
    """Q = P + w * E - w * L with E, L of disjoint support."""

    E: DistributionTable
    L: DistributionTable
    w: float


def decompose(p: DistributionTable, q: DistributionTable) -> Decomposition:
    _same_d(p, q)
    diff = q.probs - p.probs
    pos, neg = np.maximum(diff, 0.0), np.maximum(-diff, 0.0)
    if not pos.any() or not neg.any():
        raise IdenticalDistributions("E and L are undefined when P == Q")
    # Normalizing each part by its own mass keeps E and L valid pmfs even
    # when w is tiny and the two masses differ by rounding.
    w = 0.5 * (pos.sum() + neg.sum())
    return Decomposition(E=DistributionTable(p.d, pos / pos.sum()),
                         L=DistributionTable(p.d, neg / neg.sum()), w=float(w))


def mixture_table(p: DistributionTable, noise: DistributionTable, eps: float) -> DistributionTable:
    """(1 - eps) P + eps R."""
    _same_d(p, noise)
    probs = (1.0 - eps) * p.probs + eps * noise.probs
    return DistributionTable(p.d, probs / probs.sum())


def noise_table(adversary: Adversary, net: BayesNet) -> DistributionTable:
    if isinstance(adversary, PointMass):
        probs = np.zeros(1 << net.d)
        probs[int(encode(adversary.point))] = 1.0
        return DistributionTable(net.d, probs)
    if isinstance(adversary, (ProductNoise, CptShift)):
        return to_table(adversary.noise_net(net))
    raise TypeError(f"{type(adversary).__name__} has no noise distribution")


def cpt_shift_attack(net: BayesNet, target, delta: float, eps: float):
    """Strategy shifting CPT entries by ``delta``, plus the shifted network.

    ``target`` is a flat index or a sequence of them.
    """
    targets = (int(target),) if np.ndim(target) == 0 else tuple(int(t) for t in target)
    if not 0 <= eps < 0.5:
        raise ValueError(f"eps must lie in [0, 1/2), got {eps}")
    for t in targets:
        if not 0 <= t < net.m:
            raise InvalidShift(f"target {t} out of range")
    strategy = CptShift(targets=targets, delta=float(delta))
    return strategy, strategy.noise_net(net)


def corrupt_huber(net: BayesNet, n: int, model: NoiseModel, seed=None) -> Dataset:
    if model.kind != HUBER:
        raise ValueError("corrupt_huber needs a huber_additive model")
    rng = np.random.default_rng(seed)
    labels = rng.random(n) < model.eps
    x = np.empty((n, net.d), dtype=np.uint8)
    n_bad = int(labels.sum())
    x[~labels] = _ancestral(net, n - n_bad, rng)
    x[labels] = model.adversary.draw(net, n_bad, rng)
    return Dataset(x, labels)


class HuberSource:
    """Unlabeled stream of draws from (1 - eps) P + eps R.

    This is what the learner sees; it never exposes which draws were noise.
    """

    def __init__(self, net: BayesNet, model: NoiseModel, seed=None):
        if model.kind != HUBER:
            raise ValueError("HuberSource needs a huber_additive model")
        self._net = net
        self._model = model
        self._rng = np.random.default_rng(seed)

    def draw(self, n: int) -> np.ndarray:
        bad = self._rng.random(n) < self._model.eps
        x = np.empty((n, self._net.d), dtype=np.uint8)
        x[~bad] = _ancestral(self._net, n - int(bad.sum()), self._rng)
        x[bad] = self._model.adversary.draw(self._net, int(bad.sum()), self._rng)
        return x


def corrupt_replacement(clean: Dataset, eps: float, adversary: Adversary, seed=None,
                        net: Optional[BayesNet] = None,
                        table: Optional[ConfigTable] = None) -> Dataset:
    """Replace floor(eps * N) points of a clean dataset.

    ``net`` is needed by adversaries that sample from a network;
    ``table`` (or ``net``) by subtractive_tail to compute projections.
    """
    rng = np.random.default_rng(seed)
    n = len(clean)
    budget = int(np.floor(eps * n))
    x = clean.x.copy()
    labels = np.zeros(n, dtype=bool)
    if budget == 0:
        return Dataset(x, labels)
    if isinstance(adversary, SubtractiveTail):
        table = table if table is not None else net.table
        g = np.abs(projection(clean.x, adversary.q_ref, adversary.v, table))
        removed = np.argsort(-g, kind="stable")[:budget]
        kept = np.setdiff1d(np.arange(n), removed)
        # Refill with duplicates of retained points so only mass is removed.
        x[removed] = clean.x[rng.choice(kept, size=budget, replace=True)]
    else:
        removed = rng.choice(n, size=budget, replace=False)
        x[removed] = adversary.draw(net, budget, rng)
    labels[removed] = True
    return Dataset(x, labels)
