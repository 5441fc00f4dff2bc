"""Brute-force reference computations over {0,1}^d.

Everything here is a literal transcription of a definition, evaluated by
enumerating all 2^d points. None of it goes through the sparse estimator
code in ``filter``; the point is to have a second, independent route.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bayesnet import ConfigTable, DistributionTable, all_points
from .errors import DimensionTooLarge, LengthMismatch, NotSymmetric, NotUnit

ORACLE_MAX_D = 12


def _check(d: int):
    if d > ORACLE_MAX_D:
        raise DimensionTooLarge(f"oracle limited to d <= {ORACLE_MAX_D}, got {d}")


def kahan_sum(terms: np.ndarray) -> np.ndarray:
    """Compensated sum over axis 0."""
    total = np.zeros(terms.shape[1:])
    comp = np.zeros(terms.shape[1:])
    for t in terms:
        y = t - comp
        s = total + y
        comp = (s - total) - y
        total = s
    return total


def in_config(x: np.ndarray, table: ConfigTable, k: int) -> bool:
    """Whether x lies in the event Pi_k."""
    i, a = table.entries[k]
    return all(int(x[p]) == (a >> j) & 1 for j, p in enumerate(table.dag.parents[i]))


def dense_f(x: np.ndarray, q: np.ndarray, table: ConfigTable) -> np.ndarray:
    out = np.empty(table.m)
    for k, (i, _) in enumerate(table.entries):
        out[k] = x[i] if in_config(x, table, k) else q[k]
    return out


def f_matrix(q, table: ConfigTable) -> np.ndarray:
    """F(x, q) for every x in {0,1}^d, rows in table-index order."""
    _check(table.d)
    q = np.asarray(q, dtype=float)
    if q.shape != (table.m,):
        raise LengthMismatch(f"q must have length {table.m}")
    return np.array([dense_f(x, q, table) for x in all_points(table.d)])


def config_probs_oracle(dist: DistributionTable, table: ConfigTable) -> np.ndarray:
    _check(dist.d)
    pts = all_points(dist.d)
    return np.array([
        kahan_sum(np.array([dist.probs[r] for r, x in enumerate(pts) if in_config(x, table, k)] or [0.0]))
        for k in range(table.m)
    ])


@dataclass(frozen=True, eq=False)
class ExactMoments:
    mean: np.ndarray
    cov: np.ndarray
    second_moment_centered_at_q: np.ndarray


def exact_mean_f(dist: DistributionTable, q, table: ConfigTable) -> np.ndarray:
    fm = f_matrix(q, table)
    return kahan_sum(dist.probs[:, None] * fm)


def exact_second_moment(dist: DistributionTable, q, table: ConfigTable,
                        zero_diag: bool = False) -> np.ndarray:
    """E_D[(F(X,q) - q)(F(X,q) - q)^T], optionally with the diagonal zeroed."""
    q = np.asarray(q, dtype=float)
    c = f_matrix(q, table) - q
    out = kahan_sum(dist.probs[:, None, None] * c[:, :, None] * c[:, None, :])
    if zero_diag:
        np.fill_diagonal(out, 0.0)
    return out


def exact_moments(dist: DistributionTable, q, table: ConfigTable) -> ExactMoments:
    q = np.asarray(q, dtype=float)
    mean = exact_mean_f(dist, q, table)
    second = exact_second_moment(dist, q, table)
    shift = mean - q
    cov = second - np.outer(shift, shift)
    return ExactMoments(mean=mean, cov=cov, second_moment_centered_at_q=second)


def exact_tail(dist: DistributionTable, v, q, threshold, table: ConfigTable):
    """Pr_D[|v . (F(X,q) - q)| >= threshold].

    ``threshold`` may be a sequence, in which case an array is returned.
    """
    v = np.asarray(v, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise NotUnit(f"vector has norm {np.linalg.norm(v)!r}")
    q = np.asarray(q, dtype=float)
    proj = np.abs((f_matrix(q, table) - q) @ v)
    out = []
    for t in np.atleast_1d(threshold):
        hit = proj >= t
        out.append(float(kahan_sum(dist.probs[hit])) if hit.any() else 0.0)
    return out[0] if np.ndim(threshold) == 0 else np.array(out)


def spectral_norm_dense(mat) -> float:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or not np.allclose(mat, mat.T, atol=1e-12, rtol=0):
        raise NotSymmetric("matrix must be square and symmetric")
    if mat.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvalsh(mat))))


def conditional_mean_gaps(dist: DistributionTable, p, table: ConfigTable) -> float:
    """Largest |E[F_k | F_1..F_{k-1}] - p_k| over k and all prefix realizations.

    Conditioning is done by grouping points with identical F-prefixes; groups
    of zero probability are skipped.
    """
    fm = f_matrix(p, table)
    probs = dist.probs
    worst = 0.0
    for k in range(table.m):
        groups = {}
        for r in range(fm.shape[0]):
            key = fm[r, :k].tobytes()
            groups.setdefault(key, []).append(r)
        for rows in groups.values():
            mass = probs[rows].sum()
            if mass <= 0:
                continue
            cond = float(probs[rows] @ fm[rows, k]) / mass
            worst = max(worst, abs(cond - p[k]))
    return worst
