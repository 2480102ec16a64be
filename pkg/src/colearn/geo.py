"""Province-side measures: industrial similarity and neighbour densities."""

import numpy as np

from .complexity import cosine_columns
from .errors import InputError, NumericalError

WEIGHTINGS = ("geo", "hops", "ratio", "count")


def log_rca(rca_matrix):
    return np.log1p(np.asarray(rca_matrix, dtype=float))


def industrial_similarity(rca_i, rca_j):
    """Cosine of two provinces' ``ln(RCA + 1)`` vectors (0 if either is zero)."""
    yi, yj = log_rca(rca_i), log_rca(rca_j)
    if yi.shape != yj.shape:
        raise InputError("RCA vectors must have equal length")
    ni, nj = np.sqrt(yi @ yi), np.sqrt(yj @ yj)
    if ni == 0 or nj == 0:
        return 0.0
    return float(min(1.0, max(0.0, (yi @ yj) / (ni * nj))))


def similarity_matrix(rca_matrix):
    """Pairwise industrial similarity between all provinces."""
    return cosine_columns(log_rca(rca_matrix).T)


def _inverse_weights(dist):
    d = np.asarray(dist, dtype=float)
    n = d.shape[0]
    off = ~np.eye(n, dtype=bool)
    if n < 2:
        raise NumericalError("neighbour densities need at least two provinces")
    if (d[off] <= 0).any():
        raise InputError("distances must be positive off the diagonal")
    w = np.zeros_like(d)
    w[off] = 1.0 / d[off]
    return w


def density_neighbors_weighted(u, dist):
    """Inverse-distance weighted share of other provinces active in each industry.

    ``out[i, a] = sum_{j != i} u[j, a] / d[i, j] / sum_{j != i} 1 / d[i, j]``.
    """
    w = _inverse_weights(dist)
    return np.clip((w @ np.asarray(u, dtype=float)) / w.sum(axis=1)[:, None], 0.0, 1.0)


def density_neighbors_adjacent(u, adjacent):
    """Share and count of bordering provinces active in each industry.

    Returns ``(ratio, count_active, count_total)``; ``ratio`` is NaN for a
    province with no bordering province.
    """
    a = np.array(adjacent, dtype=float)
    np.fill_diagonal(a, 0.0)
    active = a @ np.asarray(u, dtype=float)
    total = np.broadcast_to(a.sum(axis=1)[:, None], active.shape).copy()
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(total > 0, active / np.where(total > 0, total, 1), np.nan)
    return ratio, active.astype(np.int64), total.astype(np.int64)


def density_neighbors(u, distances, weighting="geo"):
    """Neighbour density matrix under one of the supported weightings.

    ``geo`` weights by inverse geographic distance, ``hops`` by inverse
    neighbouring distance, ``ratio`` is the share of bordering provinces that
    are active and ``count`` their number.
    """
    if weighting == "geo":
        return density_neighbors_weighted(u, distances.geo_km)
    if weighting == "hops":
        return density_neighbors_weighted(u, distances.hops)
    if weighting == "ratio":
        return density_neighbors_adjacent(u, distances.adjacent)[0]
    if weighting == "count":
        return density_neighbors_adjacent(u, distances.adjacent)[1].astype(float)
    raise InputError(f"unknown weighting {weighting!r}; expected one of {', '.join(WEIGHTINGS)}")


def density_neighbors_cell(u, distances, i, a, weighting="geo"):
    u = np.asarray(u)
    n = u.shape[0]
    others = [j for j in range(n) if j != i]
    if weighting in ("geo", "hops"):
        d = distances.geo_km if weighting == "geo" else distances.hops
        num = sum(u[j, a] / d[i, j] for j in others)
        den = sum(1.0 / d[i, j] for j in others)
        return float(min(1.0, max(0.0, num / den)))
    adj = [j for j in others if distances.hops[i, j] == 1]
    active = int(sum(u[j, a] for j in adj))
    if weighting == "count":
        return float(active)
    if weighting == "ratio":
        if not adj:
            raise NumericalError(f"province {i} has no bordering province")
        return active / len(adj)
    raise InputError(f"unknown weighting {weighting!r}")


def pairwise_productivity(p_i, p_j):
    """Mean of the defined values among two productivities (NaN if neither)."""
    a = np.asarray(p_i, dtype=float)
    b = np.asarray(p_j, dtype=float)
    n = (~np.isnan(a)).astype(float) + (~np.isnan(b)).astype(float)
    s = np.nan_to_num(a) + np.nan_to_num(b)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(n > 0, s / np.where(n > 0, n, 1), np.nan)
    return float(out) if out.ndim == 0 else out


def productivity_density(prod_slice, dist):
    """Distance-weighted mean of pairwise productivities over other provinces.

    ``prod_slice`` is province x industry productivity for one year with NaN
    for undefined cells.  Undefined pairs are dropped and the remaining
    weights renormalised; a cell with no defined pair is NaN.
    """
    p = np.asarray(prod_slice, dtype=float)
    w = _inverse_weights(dist)
    n_prov, n_ind = p.shape
    out = np.full(p.shape, np.nan)
    for i in range(n_prov):
        pair = pairwise_productivity(np.broadcast_to(p[i], p.shape), p)
        ok = ~np.isnan(pair)
        ok[i] = False
        wi = np.where(ok, w[i][:, None], 0.0)
        den = wi.sum(axis=0)
        num = (wi * np.nan_to_num(pair)).sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            out[i] = np.where(den > 0, num / np.where(den > 0, den, 1), np.nan)
    return out


def pair_productivity(prod_slice):
    """Province-pair productivity: mean over industries of defined pair means.

    Returns a symmetric matrix with NaN where no industry is defined for
    either province.
    """
    p = np.asarray(prod_slice, dtype=float)
    n = p.shape[0]
    out = np.full((n, n), np.nan)
    for i in range(n):
        for j in range(i + 1, n):
            vals = pairwise_productivity(p[i], p[j])
            vals = vals[~np.isnan(vals)]
            if vals.size:
                out[i, j] = out[j, i] = vals.mean()
    return out
