"""The conditional-mean-filling map F(x, q) and its sparse helpers.

For a sample x, coordinate k = (i, a) of F(x, q) is x_i when node i's parents
take assignment a in x, and q_k otherwise. Only the d active coordinates
differ from q, which is what the sparse routines here exploit.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

from .bayesnet import ConfigTable
from .errors import Inconsistent, LengthMismatch, NotUnit

UNIT_TOL = 1e-9


def _check_q(q, table: ConfigTable) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (table.m,):
        raise LengthMismatch(f"q must have length {table.m}, got {q.shape}")
    return q


def f_transform(x, q, table: ConfigTable) -> np.ndarray:
    """Dense F(x, q); x may be one sample or an (N, d) batch."""
    q = _check_q(q, table)
    x = np.asarray(x)
    single = x.ndim == 1
    xs = np.atleast_2d(x)
    k = table.active_configs(xs)
    out = np.tile(q, (xs.shape[0], 1))
    rows = np.arange(xs.shape[0])[:, None]
    out[rows, k] = xs
    return out[0] if single else out


def recover_sample(fv, table: ConfigTable) -> np.ndarray:
    """Invert f_transform: decode x node by node from its F-vector."""
    fv = np.asarray(fv, dtype=float)
    if fv.shape != (table.m,):
        raise LengthMismatch(f"F-vector must have length {table.m}, got {fv.shape}")
    x = np.zeros(table.d, dtype=np.uint8)
    for i, ps in enumerate(table.dag.parents):
        a = sum(int(x[p]) << j for j, p in enumerate(ps))
        bit = fv[table.offsets[i] + a]
        if bit != 0.0 and bit != 1.0:
            raise Inconsistent(f"active coordinate of node {i} is {bit!r}, not a bit")
        x[i] = int(bit)
    return x


def centered_entries(xs, q, table: ConfigTable):
    """Active indices and values of F(x, q) - q for a batch.

    Returns (k, vals), both (N, d): vals[n, i] = x[n, i] - q[k[n, i]].
    """
    q = _check_q(q, table)
    xs = np.atleast_2d(np.asarray(xs))
    k = table.active_configs(xs)
    return k, xs - q[k]


def centered_sparse(xs, q, table: ConfigTable) -> sparse.csr_matrix:
    """F(x, q) - q for every row of xs as an (N, m) sparse matrix."""
    k, vals = centered_entries(xs, q, table)
    n, d = k.shape
    indptr = np.arange(0, n * d + 1, d)
    return sparse.csr_matrix((vals.ravel(), k.ravel(), indptr), shape=(n, table.m))


def check_unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
        raise NotUnit(f"vector has norm {np.linalg.norm(v)!r}")
    return v


def projection(x, q, v, table: ConfigTable):
    """v . (F(x, q) - q), summing only the active coordinates.

    Works on one sample (returns float) or a batch (returns array).
    """
    v = check_unit(v)
    if v.shape != (table.m,):
        raise LengthMismatch(f"v must have length {table.m}, got {v.shape}")
    x = np.asarray(x)
    k, vals = centered_entries(x, q, table)
    out = (v[k] * vals).sum(axis=-1)
    return float(out[0]) if x.ndim == 1 else out
