"""Industry-side measures on a province x industry slice of the panel.

All array functions take ``counts`` or activity matrices shaped
``(provinces, industries)`` and return plain numpy arrays.
"""

import logging

import numpy as np

from .errors import InputError, NumericalError

log = logging.getLogger(__name__)


def rca(counts):
    """Revealed comparative advantage of every province in every industry.

    RCA is the province's share of firms in the industry divided by the
    industry's share of all firms.  Provinces without firms get a zero row.
    """
    x = np.asarray(counts, dtype=float)
    total = x.sum()
    if total <= 0:
        raise InputError("empty year: the panel slice has no firms")
    row = x.sum(axis=1, keepdims=True)
    col = x.sum(axis=0, keepdims=True)
    empty = row[:, 0] == 0
    if empty.any():
        log.info("%d provinces without firms get an all-zero RCA row", int(empty.sum()))
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (x / row) / (col / total)
    out[~np.isfinite(out)] = 0.0
    return out


def compute_rca(panel, year):
    return rca(panel.at(year))


def activity(rca_matrix, threshold=1.0):
    """Binary presence: 1 where RCA >= threshold (equality counts as present)."""
    return (np.asarray(rca_matrix) >= threshold).astype(np.int8)


def compute_activity(rca_matrix, threshold=1.0):
    return activity(rca_matrix, threshold)


def cosine_columns(matrix):
    """Cosine similarity between the columns of ``matrix``.

    Columns with zero norm are unrelated to everything, themselves included.
    """
    m = np.asarray(matrix, dtype=float)
    norms = np.sqrt((m * m).sum(axis=0))
    ok = norms > 0
    unit = np.zeros_like(m)
    unit[:, ok] = m[:, ok] / norms[ok]
    sim = unit.T @ unit
    sim = np.clip(0.5 * (sim + sim.T), 0.0, 1.0) if (m >= 0).all() else 0.5 * (sim + sim.T)
    idx = np.flatnonzero(ok)
    sim[idx, idx] = 1.0
    return sim


def proximity(counts):
    """Industry proximity: cosine of two industries' province count vectors."""
    return cosine_columns(counts)


def compute_proximity(panel, year):
    return proximity(panel.at(year))


def density_related(u, prox, exclude_self=False):
    """Proximity-weighted share of related industries present, per cell.

    ``out[i, a] = sum_b prox[a, b] u[i, b] / sum_b prox[a, b]``.  The sum runs
    over every industry including ``a`` unless ``exclude_self`` is set.
    Industries with no proximity mass (isolated) get NaN.
    """
    u = np.asarray(u, dtype=float)
    w = np.array(prox, dtype=float)
    if exclude_self:
        np.fill_diagonal(w, 0.0)
    denom = w.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        # numerator and denominator sum in different orders; clip the ulp
        out = np.clip((u @ w.T) / denom, 0.0, 1.0)
    out[:, denom <= 0] = np.nan
    return out


def density_related_cell(u, prox, i, a, exclude_self=False):
    u = np.asarray(u, dtype=float)
    w = np.array(prox[a], dtype=float)
    if exclude_self:
        w[a] = 0.0
    denom = w.sum()
    if denom <= 0:
        raise NumericalError(f"isolated industry {a}: proximity weights sum to zero")
    return float(min(1.0, max(0.0, w @ u[i] / denom)))


def diversity_counts(u):
    """``(M, N)``: active provinces per industry, active industries per province."""
    u = np.asarray(u, dtype=np.int64)
    return u.sum(axis=0), u.sum(axis=1)


def related_variants(u, adjacency):
    """Ratio and counts of active graph neighbours in an industry-space graph.

    Returns ``(ratio, count_active, count_total)``; ``ratio`` is NaN for
    isolated nodes and ``count_total`` is broadcast to every province.
    """
    u = np.asarray(u, dtype=float)
    g = np.asarray(adjacency, dtype=float)
    np.fill_diagonal(g, 0.0)
    active = u @ g.T
    total = np.broadcast_to(g.sum(axis=1), u.shape).copy()
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(total > 0, active / np.where(total > 0, total, 1), np.nan)
    return ratio, active.astype(np.int64), total.astype(np.int64)


def related_variants_cell(u, adjacency, i, a):
    g = np.asarray(adjacency, dtype=bool)
    nbrs = np.flatnonzero(g[a] & (np.arange(g.shape[0]) != a))
    count_active = int(np.asarray(u)[i, nbrs].sum())
    if nbrs.size == 0:
        raise NumericalError(f"industry {a} is isolated in the industry space")
    return {"ratio": count_active / nbrs.size, "count_active": count_active,
            "count_total": int(nbrs.size)}
