"""Iterative spectral filtering for a Bayes net CPT with known graph.

One call to :func:`run_iteration` either accepts the empirical CPT (when the
zero-diagonal second-moment matrix of F(x, q) - q has small spectral norm)
or emits a linear filter that rejects points far out along the top
eigenvector. :func:`learn` stacks filters until an estimate is accepted.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, asdict
from typing import List, Optional

import numpy as np

from .bayesnet import BayesNet, ConfigTable, Dag
from .errors import (
    EmptyDataset,
    NoConvergence,
    NoThresholdFound,
    SampleBudgetExhausted,
    ZeroAlpha,
)
from .transform import centered_entries, centered_sparse, check_unit

log = logging.getLogger(__name__)


@dataclass
class EngineConfig:
    eps: float
    c_spectral: float = 10.0
    c_alpha: float = 4.0
    c_n: float = 2.0
    n_alpha: Optional[int] = None
    n_main: Optional[int] = None
    n_cap: Optional[int] = None
    max_iters: Optional[int] = None
    eig_tol: float = 1e-9
    eig_max_iter: int = 10_000
    dense_eig_max_m: int = 512
    clamp: float = 1e-6
    max_raw_draws: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.eps < 0.25:
            raise ValueError(f"eps must lie in (0, 1/4), got {self.eps}")
        for name in ("c_spectral", "c_alpha", "c_n", "eig_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def alpha_samples(self, m: int) -> int:
        if self.n_alpha is not None:
            return self.n_alpha
        return math.ceil(self.c_alpha * math.log(max(m, 2)) / self.eps ** 2)

    def main_samples(self, m: int) -> int:
        if self.n_main is not None:
            n = self.n_main
        else:
            n = math.ceil(self.c_n * m ** 2 * math.log(m / self.eps) / self.eps ** 2)
        return min(n, self.n_cap) if self.n_cap is not None else n

    def iterations(self, d: int) -> int:
        return 2 * d + 1 if self.max_iters is None else self.max_iters

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class LinearFilter:
    """Rejects x iff |v . (F(x, q) - q)| > T + delta."""

    v: np.ndarray
    q: np.ndarray
    T: float
    delta: float

    def __post_init__(self):
        object.__setattr__(self, "v", check_unit(self.v))
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        if not self.T > 0:
            raise ValueError("threshold T must be positive")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")

    def magnitudes(self, xs, table: ConfigTable) -> np.ndarray:
        k, vals = centered_entries(xs, self.q, table)
        return np.abs((self.v[k] * vals).sum(axis=-1))

    def rejects(self, xs, table: ConfigTable) -> np.ndarray:
        return self.magnitudes(xs, table) > self.T + self.delta


@dataclass(frozen=True)
class FilterStack:
    filters: tuple = ()

    def push(self, f: LinearFilter) -> "FilterStack":
        return FilterStack(self.filters + (f,))

    def rejects(self, xs, table: ConfigTable) -> np.ndarray:
        xs = np.atleast_2d(xs)
        out = np.zeros(xs.shape[0], dtype=bool)
        for f in self.filters:
            out |= f.rejects(xs, table)
        return out

    def accepts(self, xs, table: ConfigTable) -> np.ndarray:
        return ~self.rejects(xs, table)

    def __len__(self):
        return len(self.filters)


def apply_filter(f, x, table: ConfigTable) -> bool:
    """True when a single filter or stack accepts a single point."""
    return not bool(f.rejects(np.atleast_2d(x), table)[0])


@dataclass
class Diagnostics:
    alpha: float = float("nan")
    lambda_star: float = float("nan")
    spectral_threshold: float = float("nan")
    passed_spectral: Optional[bool] = None
    delta: Optional[float] = None
    T: Optional[float] = None
    rejected_fraction: Optional[float] = None
    t_candidates_scanned: int = 0
    unseen_configs: int = 0
    eig_method: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class IterationOutcome:
    q: np.ndarray
    diagnostics: Diagnostics
    filter: Optional[LinearFilter] = None

    @property
    def is_estimate(self) -> bool:
        return self.filter is None


@dataclass
class LearnReport:
    final_net: BayesNet
    iterations: List[Diagnostics]
    total_samples_drawn: int
    converged: bool
    stack: FilterStack = field(default_factory=FilterStack)
    warnings: List[str] = field(default_factory=list)


# Estimators --------------------------------------------------------------

def _rows(xs) -> np.ndarray:
    xs = np.atleast_2d(np.asarray(xs))
    if xs.shape[0] == 0:
        raise EmptyDataset("no samples")
    return xs


def config_counts(xs, table: ConfigTable) -> np.ndarray:
    return np.bincount(table.active_configs(xs).ravel(), minlength=table.m)


def estimate_alpha(xs, table: ConfigTable) -> float:
    """Smallest empirical parental-configuration frequency."""
    xs = _rows(xs)
    return float(config_counts(xs, table).min() / xs.shape[0])


def empirical_cpt(xs, table: ConfigTable):
    """Empirical conditional probability table.

    Returns (q, unseen): configurations never observed get q_k = 1/2 and
    are flagged in the boolean ``unseen`` mask.
    """
    xs = _rows(xs)
    k = table.active_configs(xs).ravel()
    counts = np.bincount(k, minlength=table.m)
    ones = np.bincount(k, weights=xs.ravel().astype(float), minlength=table.m)
    unseen = counts == 0
    q = np.full(table.m, 0.5)
    q[~unseen] = ones[~unseen] / counts[~unseen]
    return q, unseen


def build_m(xs, q, table: ConfigTable) -> np.ndarray:
    """Zero-diagonal empirical second moment of F(x, q) - q."""
    xs = _rows(xs)
    s = centered_sparse(xs, q, table)
    mat = (s.T @ s).toarray() / xs.shape[0]
    mat = 0.5 * (mat + mat.T)
    np.fill_diagonal(mat, 0.0)
    return mat


# Eigen-solvers -----------------------------------------------------------

def power_iteration(mat, tol: float = 1e-9, max_iter: int = 10_000, seed=0):
    """Largest-magnitude eigenpair of a symmetric matrix.

    Iterates v <- Mv/|Mv|; |Mv| increases monotonically to |lambda_max|. When
    eigenvalues of both signs share the top magnitude the iterate mixes
    them, so the eigenvector is separated at the end from v +/- Mv/|Mv|.
    """
    mat = np.asarray(mat, dtype=float)
    m = mat.shape[0]
    rng = np.random.default_rng(seed)
    if m == 0 or not np.any(mat):
        v = np.zeros(m)
        if m:
            v[0] = 1.0
        return 0.0, v
    v = rng.standard_normal(m)
    v /= np.linalg.norm(v)
    sigma_prev = 0.0
    restarts = 0
    for _ in range(max_iter):
        w = mat @ v
        sigma = np.linalg.norm(w)
        if sigma <= 1e-300:
            # v landed in the null space.
            restarts += 1
            v = rng.standard_normal(m)
            v /= np.linalg.norm(v)
            continue
        u = w / sigma
        if abs(sigma - sigma_prev) <= tol * sigma:
            return _split_pair(mat, v, u)
        sigma_prev = sigma
        v = u
    raise NoConvergence(f"power iteration did not converge in {max_iter} steps ({restarts} restarts)")


def _split_pair(mat, v, u):
    best = None
    for cand in (v + u, v - u, u):
        n = np.linalg.norm(cand)
        if n < 1e-8:
            continue
        cand = cand / n
        rq = float(cand @ mat @ cand)
        if best is None or abs(rq) > abs(best[0]):
            best = (rq, cand)
    return best


def top_eigenpair(mat, eig_tol: float = 1e-9, eig_max_iter: int = 10_000,
                  dense_max_m: int = 512, seed=0):
    """(lambda*, v*, method) with |lambda*| the spectral norm of ``mat``."""
    mat = np.asarray(mat, dtype=float)
    m = mat.shape[0]
    if m <= dense_max_m:
        w, vecs = np.linalg.eigh(mat)
        j = int(np.argmax(np.abs(w)))
        return float(w[j]), vecs[:, j], "dense"
    try:
        lam, v = power_iteration(mat, eig_tol, eig_max_iter, seed)
        return lam, v, "power"
    except NoConvergence:
        log.warning("power iteration stalled at m=%d; using dense solver", m)
        w, vecs = np.linalg.eigh(mat)
        j = int(np.argmax(np.abs(w)))
        return float(w[j]), vecs[:, j], "dense-fallback"


# Spectral test, delta and threshold search ------------------------------

def spectral_threshold(alpha: float, eps: float, c_spectral: float) -> float:
    if alpha <= 0:
        raise ZeroAlpha("alpha must be positive")
    return c_spectral * eps * math.log(1.0 / eps) / alpha


def spectral_test(lambda_star: float, alpha: float, eps: float, c_spectral: float = 10.0) -> bool:
    return abs(lambda_star) <= spectral_threshold(alpha, eps, c_spectral)


def compute_delta(lambda_star: float, alpha: float, eps: float) -> float:
    if alpha <= 0:
        raise ZeroAlpha("alpha must be positive")
    return 3.0 * math.sqrt(eps * abs(lambda_star)) / alpha


def tail_excess(g, T: float, delta: float, eps: float, d: int) -> float:
    """Empirical tail beyond T + delta minus the allowance 6exp(-T^2/2) + 5eps/d."""
    g = np.asarray(g)
    frac = np.count_nonzero(g > T + delta) / g.size
    return frac - (6.0 * math.exp(-T * T / 2.0) + 5.0 * eps / d)


def threshold_from_magnitudes(g, delta: float, eps: float, d: int):
    """Largest T > 0 whose empirical tail beyond T + delta beats the allowance.

    Candidates are T = g_i - delta for observed magnitudes g_i > delta; at
    each one the tail count includes every point with magnitude >= g_i. The
    returned T sits a hair below g_i - delta so that the strict rejection
    test still catches the point that defined it.

    Returns (T, number of candidates scanned).
    """
    g = np.sort(np.asarray(g, dtype=float))[::-1]
    n = g.size
    if n == 0:
        raise EmptyDataset("no magnitudes")
    mask = g > delta
    cand_g = np.unique(g[mask])[::-1]
    if cand_g.size == 0:
        raise NoThresholdFound("no magnitude exceeds delta")
    # counts[j] = #{g >= cand_g[j]}
    counts = n - np.searchsorted(g[::-1], cand_g, side="left")
    T = cand_g - delta
    rhs = 6.0 * np.exp(-T * T / 2.0) + 5.0 * eps / d
    valid = counts / n > rhs
    if not valid.any():
        raise NoThresholdFound(f"tail never exceeds allowance over {cand_g.size} candidates")
    j = int(np.argmax(valid))  # cand_g is descending, so the first hit is the largest T
    t_best = float(T[j])
    shrink = 1e-12 * max(1.0, float(cand_g[j]))
    t_best = t_best - shrink if t_best > 2 * shrink else t_best / 2.0
    return t_best, int(cand_g.size)


def find_threshold(t_samples, v, q, delta: float, eps: float, table: ConfigTable):
    """Threshold search over a fresh batch; returns (T, candidates scanned)."""
    xs = _rows(t_samples)
    k, vals = centered_entries(xs, q, table)
    g = np.abs((np.asarray(v)[k] * vals).sum(axis=-1))
    return threshold_from_magnitudes(g, delta, eps, table.d)


# Sample sources ----------------------------------------------------------

class ArraySource:
    """Serves rows of a fixed array in order; returns short batches when dry."""

    def __init__(self, xs):
        self._xs = np.asarray(xs, dtype=np.uint8)
        self._pos = 0

    def draw(self, n: int) -> np.ndarray:
        out = self._xs[self._pos:self._pos + n]
        self._pos += out.shape[0]
        return out


class FilteredSource:
    """Rejection-samples a raw source through a filter stack."""

    def __init__(self, raw, stack: FilterStack, table: ConfigTable,
                 max_raw_draws: Optional[int] = None, drawn: int = 0):
        self.raw = raw
        self.stack = stack
        self.table = table
        self.max_raw_draws = max_raw_draws
        self.drawn = drawn

    def draw(self, n: int) -> np.ndarray:
        parts, got = [], 0
        rate = 1.0
        while got < n:
            want = int(math.ceil((n - got) / max(rate, 0.05) * 1.05)) + 16
            if self.max_raw_draws is not None:
                want = min(want, self.max_raw_draws - self.drawn)
                if want <= 0:
                    raise SampleBudgetExhausted(
                        f"raw draw budget {self.max_raw_draws} spent with {got}/{n} accepted")
            batch = self.raw.draw(want)
            if batch.shape[0] == 0:
                raise SampleBudgetExhausted(f"source ran dry with {got}/{n} accepted")
            self.drawn += batch.shape[0]
            if len(self.stack):
                keep = self.stack.accepts(batch, self.table)
                rate = max(keep.mean(), 1e-3)
                batch = batch[keep]
            parts.append(batch)
            got += batch.shape[0]
        return np.concatenate(parts)[:n] if parts else np.zeros((0, self.table.d), np.uint8)


class InPlaceSource:
    """Every draw returns the currently accepted part of a fixed dataset.

    Used when only one finite dataset is available: all steps of an
    iteration then reuse the same points instead of fresh samples.
    """

    def __init__(self, xs, stack: FilterStack, table: ConfigTable):
        xs = np.asarray(xs, dtype=np.uint8)
        self._xs = xs[stack.accepts(xs, table)] if len(stack) else xs
        self.drawn = 0

    def draw(self, n: int) -> np.ndarray:
        if self._xs.shape[0] == 0:
            raise SampleBudgetExhausted("every point has been rejected")
        return self._xs


# Iteration and outer loop ------------------------------------------------

def run_iteration(source, config: EngineConfig, table: ConfigTable,
                  seed=None) -> IterationOutcome:
    """One round of filtering on samples from ``source``.

    ``source.draw(n)`` must return n (or, in in-place mode, all) samples
    that the current filter stack accepts. Raises NoThresholdFound with
    the current ``q`` and diagnostics attached when the eigenvalue is large
    but no tail threshold exists.
    """
    m, d = table.m, table.d
    n_alpha, n_main = config.alpha_samples(m), config.main_samples(m)
    diag = Diagnostics()

    diag.alpha = estimate_alpha(source.draw(n_alpha), table)
    q, unseen = empirical_cpt(source.draw(n_main), table)
    diag.unseen_configs = int(unseen.sum())
    mat = build_m(source.draw(n_main), q, table)
    lam, v, diag.eig_method = top_eigenpair(
        mat, config.eig_tol, config.eig_max_iter, config.dense_eig_max_m,
        seed=config.seed if seed is None else seed)
    diag.lambda_star = lam
    diag.spectral_threshold = spectral_threshold(diag.alpha, config.eps, config.c_spectral)
    diag.passed_spectral = abs(lam) <= diag.spectral_threshold
    if diag.passed_spectral:
        return IterationOutcome(q=q, diagnostics=diag)

    diag.delta = compute_delta(lam, diag.alpha, config.eps)
    t_batch = source.draw(n_main)
    try:
        T, diag.t_candidates_scanned = find_threshold(t_batch, v, q, diag.delta, config.eps, table)
    except NoThresholdFound as exc:
        exc.q, exc.diagnostics = q, diag
        raise
    diag.T = T
    filt = LinearFilter(v=v, q=q, T=T, delta=diag.delta)
    diag.rejected_fraction = float(filt.rejects(t_batch, table).mean())
    return IterationOutcome(q=q, diagnostics=diag, filter=filt)


def _finalize(dag: Dag, q, config: EngineConfig) -> BayesNet:
    return BayesNet(dag, np.clip(q, config.clamp, 1.0 - config.clamp))


def learn(source, config: EngineConfig, dag: Dag, in_place: bool = False) -> LearnReport:
    """Run filtering rounds until the empirical CPT passes the spectral test.

    ``source`` is either a raw sampler (``draw(n)``) of the corrupted
    distribution, or, with ``in_place=True``, a fixed (N, d) array that is
    filtered in place across rounds.
    """
    table = dag.table
    stack = FilterStack()
    diags: List[Diagnostics] = []
    warnings: List[str] = []
    q = None
    drawn = 0
    converged = False
    rng = np.random.default_rng(config.seed)

    for it in range(config.iterations(dag.d)):
        if in_place:
            src = InPlaceSource(source, stack, table)
        else:
            src = FilteredSource(source, stack, table, config.max_raw_draws, drawn)
        try:
            outcome = run_iteration(src, config, table, seed=int(rng.integers(2**32)))
        except NoThresholdFound as exc:
            q = exc.q
            diags.append(exc.diagnostics)
            warnings.append(f"iteration {it}: no threshold found ({exc})")
            break
        except (SampleBudgetExhausted, ZeroAlpha, EmptyDataset) as exc:
            warnings.append(f"iteration {it}: {type(exc).__name__}: {exc}")
            break
        finally:
            drawn = src.drawn if not in_place else drawn
        diags.append(outcome.diagnostics)
        q = outcome.q
        if outcome.is_estimate:
            converged = True
            break
        stack = stack.push(outcome.filter)
        log.info("iteration %d: filter |lambda|=%.4g T=%.4g delta=%.4g rejected=%.4f",
                 it, outcome.diagnostics.lambda_star, outcome.filter.T,
                 outcome.filter.delta, outcome.diagnostics.rejected_fraction)
    else:
        if config.iterations(dag.d) > 0:
            warnings.append("iteration limit reached without passing the spectral test")

    if q is None:
        warnings.append("no estimate produced; returning the uniform CPT")
        q = np.full(table.m, 0.5)
    if in_place:
        drawn = len(np.asarray(source))
    return LearnReport(final_net=_finalize(dag, q, config), iterations=diags,
                       total_samples_drawn=drawn, converged=converged, stack=stack,
                       warnings=warnings)
