"""Diversification events and the descriptive statistics built on them."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericalError
from .special import f_sf

log = logging.getLogger(__name__)

ENTRY, KEEP = "entry", "keep"


@dataclass(frozen=True)
class EventRecord:
    province: int
    industry: int
    base_year: int
    horizon: int
    kind: str


@dataclass
class EventSet:
    """Candidate cells and their outcomes.

    Each array has one element per candidate.  ``kind`` is ``entry`` for
    cells absent at ``t-2, t-1, t`` and ``keep`` for cells present at ``t``;
    ``outcome`` is 1 when the cell entered (present at ``t+h .. t+h+2``) or
    kept (present at ``t+h``, or through ``t+h+2`` with a strict window).
    """

    horizon: int
    province: np.ndarray
    industry: np.ndarray
    base_year: np.ndarray
    kind: np.ndarray
    outcome: np.ndarray
    base_years: tuple = ()
    skipped_cells: int = 0
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.outcome)

    def select(self, kind):
        return np.flatnonzero(self.kind == kind)

    def records(self):
        """Yield every candidate and event as an :class:`EventRecord`."""
        for i, a, t, k, y in zip(self.province, self.industry, self.base_year, self.kind, self.outcome):
            yield EventRecord(int(i), int(a), int(t), self.horizon, f"{k}-candidate")
            if y:
                yield EventRecord(int(i), int(a), int(t), self.horizon, str(k))


def detect_events(activity_by_year, first_year, horizon=5, base_years=None,
                  strict_keep=False, entry_candidates="backward"):
    """Find entry and keep candidates and their outcomes.

    ``activity_by_year`` is ``(provinces, industries, years)`` binary.  A base
    year ``t`` is usable when ``t-2`` and ``t+h+2`` both fall inside the
    panel; requested base years outside that window are skipped and counted.
    With ``entry_candidates="inactive"`` every cell absent at ``t`` is an
    entry candidate and the backward condition moves into the outcome.
    """
    u = np.asarray(activity_by_year).astype(bool)
    if u.ndim != 3:
        raise InputError("activity must be provinces x industries x years")
    if horizon < 1:
        raise InputError("horizon must be positive")
    if entry_candidates not in ("backward", "inactive"):
        raise InputError(f"unknown entry candidate rule {entry_candidates!r}")
    n_prov, n_ind, n_years = u.shape
    last_year = first_year + n_years - 1
    valid = [t for t in range(first_year + 2, last_year - horizon - 2 + 1)]
    requested = list(valid) if base_years is None else sorted(set(int(t) for t in base_years))
    usable = [t for t in requested if t in valid]
    skipped = (len(requested) - len(usable)) * n_prov * n_ind
    if skipped:
        log.info("skipped %d cells whose event window leaves the panel", skipped)

    parts = {k: [] for k in ("province", "industry", "base_year", "kind", "outcome")}
    for t in usable:
        k = t - first_year
        absent_back = ~u[:, :, k - 2] & ~u[:, :, k - 1] & ~u[:, :, k]
        present_fwd = u[:, :, k + horizon] & u[:, :, k + horizon + 1] & u[:, :, k + horizon + 2]
        present_now = u[:, :, k]
        if entry_candidates == "backward":
            cand, out = absent_back, present_fwd
        else:
            cand, out = ~present_now, absent_back & present_fwd
        keep_out = present_fwd if strict_keep else u[:, :, k + horizon]
        for kind, mask, outcome in ((ENTRY, cand, out), (KEEP, present_now, keep_out)):
            ii, aa = np.nonzero(mask)
            parts["province"].append(ii)
            parts["industry"].append(aa)
            parts["base_year"].append(np.full(ii.size, t))
            parts["kind"].append(np.full(ii.size, kind))
            parts["outcome"].append(outcome[ii, aa].astype(np.int8))
    cat = {k: (np.concatenate(v) if v else np.array([], dtype=int)) for k, v in parts.items()}
    if not usable:
        cat["kind"] = np.array([], dtype="<U5")
        cat["outcome"] = np.array([], dtype=np.int8)
    events = EventSet(horizon, cat["province"].astype(np.int64), cat["industry"].astype(np.int64),
                      cat["base_year"].astype(np.int64), cat["kind"], cat["outcome"],
                      tuple(usable), skipped)
    events.diagnostics = {
        "base_years": len(usable),
        "skipped_cells": skipped,
        "entry_candidates": int((events.kind == ENTRY).sum()),
        "entries": int(events.outcome[events.kind == ENTRY].sum()),
        "keep_candidates": int((events.kind == KEEP).sum()),
        "keeps": int(events.outcome[events.kind == KEEP].sum()),
    }
    return events


@dataclass(frozen=True)
class BinnedCurve:
    edges: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    count: np.ndarray
    min_count: int = 5

    @property
    def sparse(self):
        """Bins holding fewer than ``min_count`` observations."""
        return self.count < self.min_count

    def rows(self):
        for k in range(len(self.count)):
            yield (self.edges[k], self.edges[k + 1], 0.5 * (self.edges[k] + self.edges[k + 1]),
                   int(self.count[k]), self.mean[k], self.stderr[k], bool(self.sparse[k]))

    header = ("lower", "upper", "center", "count", "mean", "stderr", "sparse")


def _bin_index(x, edges):
    n_bins = len(edges) - 1
    lo, hi = edges[0], edges[-1]
    if hi == lo:
        return np.zeros(x.shape, dtype=np.int64)
    idx = np.floor((x - lo) / (hi - lo) * n_bins).astype(np.int64)
    return np.clip(idx, 0, n_bins - 1)


def _equal_width_edges(x, n_bins):
    lo, hi = float(np.min(x)), float(np.max(x))
    return np.linspace(lo, hi, n_bins + 1)


def binned_curve(x, outcome, n_bins=10, min_count=5, edges=None):
    """Mean outcome in equal-width bins of ``x`` with standard errors.

    The standard error is ``sqrt(var / n)`` with the population variance,
    which for 0/1 outcomes is ``sqrt(p (1 - p) / n)``.  Empty bins get NaN.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(outcome, dtype=float)
    if x.size == 0:
        raise InputError("binned_curve needs at least one observation")
    if x.shape != y.shape:
        raise InputError("x and outcome must have the same length")
    if np.isnan(x).any() or np.isnan(y).any():
        raise InputError("binned_curve inputs contain NaN")
    if n_bins < 1:
        raise InputError("n_bins must be positive")
    edges = _equal_width_edges(x, n_bins) if edges is None else np.asarray(edges, dtype=float)
    idx = _bin_index(x, edges)
    nb = len(edges) - 1
    count = np.bincount(idx, minlength=nb)
    total = np.bincount(idx, weights=y, minlength=nb)
    total_sq = np.bincount(idx, weights=y * y, minlength=nb)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = total / count
        var = np.maximum(total_sq / count - mean * mean, 0.0)
        stderr = np.sqrt(var / count)
    mean[count == 0] = np.nan
    stderr[count == 0] = np.nan
    # exact zeros for constant bins, immune to the sum-of-squares rounding
    for k in np.flatnonzero(count):
        sel = y[idx == k]
        if (sel == sel[0]).all():
            mean[k], stderr[k] = sel[0], 0.0
    return BinnedCurve(edges, mean, stderr, count, min_count)


@dataclass(frozen=True)
class JointGrid:
    x_edges: np.ndarray
    y_edges: np.ndarray
    mean: np.ndarray
    count: np.ndarray

    def rows(self):
        for a in range(len(self.x_edges) - 1):
            for b in range(len(self.y_edges) - 1):
                yield (self.x_edges[a], self.x_edges[a + 1], self.y_edges[b], self.y_edges[b + 1],
                       int(self.count[a, b]), self.mean[a, b])

    header = ("x_lower", "x_upper", "y_lower", "y_upper", "count", "mean")


def joint_grid(x, y, outcome, bins=5):
    """Empirical mean outcome on an equal-width 2-D grid (NaN where empty)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(outcome, dtype=float)
    if x.size == 0:
        raise InputError("joint_grid needs at least one observation")
    if not (x.shape == y.shape == z.shape):
        raise InputError("x, y and outcome must have the same length")
    bx, by = (bins, bins) if np.ndim(bins) == 0 else bins
    xe, ye = _equal_width_edges(x, bx), _equal_width_edges(y, by)
    ix, iy = _bin_index(x, xe), _bin_index(y, ye)
    flat = ix * by + iy
    count = np.bincount(flat, minlength=bx * by).reshape(bx, by)
    total = np.bincount(flat, weights=z, minlength=bx * by).reshape(bx, by)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(count > 0, total / np.where(count > 0, count, 1), np.nan)
    return JointGrid(xe, ye, mean, count)


def anova_two_group(a, b):
    """One-way ANOVA F statistic and p-value for two groups."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise InputError("each group needs at least two observations")
    grand = np.concatenate([a, b]).mean()
    between = a.size * (a.mean() - grand) ** 2 + b.size * (b.mean() - grand) ** 2
    within = ((a - a.mean()) ** 2).sum() + ((b - b.mean()) ** 2).sum()
    df_within = a.size + b.size - 2
    if within <= 0:
        raise NumericalError("zero pooled variance")
    f = float(between / (within / df_within))
    return {"F": f, "p": f_sf(f, 1, df_within), "df": (1, df_within)}


def pearson_r(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise InputError("pearson_r needs two equal-length samples of at least two points")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = (dx * dx).sum(), (dy * dy).sum()
    if sxx <= 0 or syy <= 0:
        raise NumericalError("zero variance")
    r = float((dx * dy).sum() / math.sqrt(sxx * syy))
    return max(-1.0, min(1.0, r))
