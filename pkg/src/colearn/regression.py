"""Probit and OLS estimation with the event-study and DID designs built on them."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericalError, RankDeficientError, SeparationError
from .special import (inverse_mills, normal_logcdf, normal_quantile, normal_two_sided_p,
                      t_two_sided_p)
from .tables import fmt, render_rows

log = logging.getLogger(__name__)

CONST = "const"
# relative size of a column's component orthogonal to the earlier columns
# below which the column counts as linearly dependent
RANK_TOL = 1e-9
# relative rounding noise tolerated in the probit line search
LL_NOISE = 1e-13


@dataclass(frozen=True)
class DesignMatrix:
    X: np.ndarray
    y: np.ndarray
    names: tuple
    reference_year: int = None

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def k(self):
        return self.X.shape[1]

    def column(self, name):
        return self.X[:, self.names.index(name)]


def make_design(y, regressors, years=None, reference_year=None, intercept=True):
    """Assemble a design matrix from named regressor columns.

    ``years`` adds one dummy per distinct year except ``reference_year``
    (earliest year by default).  Rows with a NaN anywhere are dropped.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    cols, names = [], []
    if intercept:
        cols.append(np.ones(n))
        names.append(CONST)
    for name, values in regressors.items():
        v = np.asarray(values, dtype=float)
        if v.shape != (n,):
            raise InputError(f"regressor {name!r} has shape {v.shape}, expected ({n},)")
        cols.append(v)
        names.append(name)
    if years is not None:
        years = np.asarray(years)
        distinct = sorted(set(years.tolist()))
        if reference_year is None:
            reference_year = distinct[0]
        if reference_year not in distinct:
            raise InputError(f"reference year {reference_year} not present in the data")
        for t in distinct:
            if t != reference_year:
                cols.append((years == t).astype(float))
                names.append(f"year_{t}")
    X = np.column_stack(cols) if cols else np.empty((n, 0))
    keep = ~(np.isnan(X).any(axis=1) | np.isnan(y))
    if not keep.all():
        log.info("dropping %d rows with missing values", int((~keep).sum()))
    return DesignMatrix(X[keep], y[keep], tuple(names), reference_year)


def dependent_columns(X, names):
    """Names of columns that are (numerically) combinations of earlier ones."""
    X = np.asarray(X, dtype=float)
    if X.shape[1] == 0:
        return []
    r = np.linalg.qr(X, mode="r")
    norms = np.sqrt((X * X).sum(axis=0))
    diag = np.abs(np.diag(r))
    bad = (diag <= RANK_TOL * np.maximum(norms, np.finfo(float).tiny)) | (norms == 0)
    return [names[j] for j in np.flatnonzero(bad)]


def _check_rank(design):
    if design.n <= design.k:
        raise NumericalError(f"need more observations ({design.n}) than columns ({design.k})")
    bad = dependent_columns(design.X, design.names)
    if bad:
        raise RankDeficientError(bad)


def significance_stars(p):
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


@dataclass
class RegressionResult:
    model: str
    names: tuple
    coef: np.ndarray
    se: np.ndarray
    stat: np.ndarray
    pvalue: np.ndarray
    n: int
    covariance: str
    cov: np.ndarray = None
    loglik: float = math.nan
    loglik0: float = math.nan
    pseudo_r2: float = math.nan
    r2: float = math.nan
    rmse: float = math.nan
    df_resid: int = 0
    iterations: int = 0
    converged: bool = True
    history: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def stat_name(self):
        return "z" if self.model == "probit" else "t"

    def index(self, name):
        return self.names.index(name)

    def __getitem__(self, name):
        k = self.index(name)
        return {"coef": float(self.coef[k]), "se": float(self.se[k]), self.stat_name: float(self.stat[k]),
                "p": float(self.pvalue[k]), "stars": significance_stars(self.pvalue[k])}

    def stars(self, name):
        return significance_stars(self.pvalue[self.index(name)])

    def to_dict(self):
        out = {
            "model": self.model,
            "n": self.n,
            "covariance": self.covariance,
            "coefficients": {name: self[name] for name in self.names},
        }
        if self.model == "probit":
            out.update(loglik=self.loglik, loglik_null=self.loglik0, pseudo_r2=self.pseudo_r2,
                       iterations=self.iterations, converged=self.converged)
        else:
            out.update(r2=self.r2, rmse=self.rmse, df_resid=self.df_resid)
        out.update(self.extra)
        return out


# -- probit -------------------------------------------------------------------

def _signs(y):
    return 2.0 * np.asarray(y, dtype=float) - 1.0


def probit_loglik(beta, X, y):
    return float(normal_logcdf(_signs(y) * (X @ beta)).sum())


def probit_score(beta, X, y):
    q = _signs(y)
    lam = inverse_mills(q * (X @ beta))
    return X.T @ (q * lam)


def probit_hessian(beta, X, y):
    q = _signs(y)
    w = q * (X @ beta)
    lam = inverse_mills(w)
    d = -lam * (w + lam)
    return (X * d[:, None]).T @ X


def probit_fit(design, max_iter=100, tol=1e-8, max_abs_coef=25.0):
    """Maximum-likelihood probit by damped Newton iterations from zero.

    Each Newton step is halved until the log-likelihood does not decrease.
    Iteration stops when the score's max-norm drops below ``tol`` or after
    ``max_iter`` steps.  Standard errors come from the inverse of the
    negative Hessian at the optimum.
    """
    X, y = design.X, design.y
    if not np.isin(y, (0.0, 1.0)).all():
        raise InputError("probit outcome must be 0/1")
    n1 = int(y.sum())
    if n1 == 0 or n1 == design.n:
        raise NumericalError("probit outcome has a single class")
    _check_rank(design)

    beta = np.zeros(design.k)
    ll = probit_loglik(beta, X, y)
    history = [ll]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g = probit_score(beta, X, y)
        if np.max(np.abs(g)) < tol:
            converged = True
            it -= 1
            break
        H = probit_hessian(beta, X, y)
        try:
            step = np.linalg.solve(-H, g)
        except np.linalg.LinAlgError:
            raise NumericalError("singular probit Hessian") from None
        # near the optimum the gain falls below the rounding noise of the
        # summed likelihood; a step that loses no more than that noise is taken
        noise = LL_NOISE * max(1.0, abs(ll))
        t = 1.0
        for _ in range(60):
            cand = beta + t * step
            ll_new = probit_loglik(cand, X, y)
            if ll_new >= ll - noise:
                break
            t *= 0.5
        else:
            log.warning("probit line search failed to improve the likelihood")
            break
        beta, ll = cand, ll_new
        history.append(ll)
        if np.max(np.abs(beta)) > max_abs_coef:
            worst = design.names[int(np.argmax(np.abs(beta)))]
            raise SeparationError(f"probit coefficient on {worst!r} diverges "
                                  f"(|beta| > {max_abs_coef}); outcome is separated")
    else:
        converged = np.max(np.abs(probit_score(beta, X, y))) < tol
    if not converged:
        log.warning("probit did not reach score tolerance %g after %d iterations", tol, it)

    H = probit_hessian(beta, X, y)
    try:
        cov = np.linalg.inv(-H)
    except np.linalg.LinAlgError:
        raise NumericalError("singular probit information matrix") from None
    se = np.sqrt(np.diag(cov))
    z = beta / se
    p = np.array([normal_two_sided_p(v) for v in z])
    pbar = n1 / design.n
    ll0 = n1 * math.log(pbar) + (design.n - n1) * math.log1p(-pbar)
    # the intercept-only MLE is closed form, so its fit index is exactly zero
    pseudo = 0.0 if design.names == (CONST,) else max(0.0, 1.0 - ll / ll0)
    return RegressionResult("probit", design.names, beta, se, z, p, design.n, "observed information",
                            cov=cov, loglik=ll, loglik0=ll0, pseudo_r2=pseudo,
                            df_resid=design.n - design.k, iterations=it, converged=bool(converged),
                            history=history)


# -- OLS ----------------------------------------------------------------------

def ols_fit(design, covariance="robust"):
    """Least squares through a QR factorisation.

    ``covariance`` is ``classical`` or ``robust``; the robust form is the
    heteroskedasticity-consistent sandwich with the ``n / (n - k)``
    small-sample correction.  R-squared is the ordinary centred R-squared
    and RMSE is ``sqrt(SSR / (n - k))``.
    """
    if covariance not in ("classical", "robust"):
        raise InputError(f"unknown covariance {covariance!r}")
    _check_rank(design)
    X, y = design.X, design.y
    n, k = X.shape
    Q, R = np.linalg.qr(X)
    beta = np.linalg.solve(R, Q.T @ y)
    resid = y - X @ beta
    ssr = float(resid @ resid)
    df = n - k
    r_inv = np.linalg.solve(R, np.eye(k))
    if covariance == "classical":
        cov = (ssr / df) * (r_inv @ r_inv.T)
    else:
        meat = (Q * (resid * resid)[:, None]).T @ Q
        cov = (n / df) * (r_inv @ meat @ r_inv.T)
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = beta / se
    p = np.array([t_two_sided_p(v, df) if np.isfinite(v) else (1.0 if v != v else 0.0) for v in t])
    if CONST in design.names:
        sst = float(((y - y.mean()) ** 2).sum())
    else:
        sst = float((y * y).sum())
    r2 = 1.0 - ssr / sst if sst > 0 else math.nan
    return RegressionResult("ols", design.names, beta, se, t, p, n, covariance, cov=cov,
                            r2=r2, rmse=math.sqrt(ssr / df), df_resid=df)


def ols_residuals(design, result):
    return design.y - design.X @ result.coef


# -- event study ----------------------------------------------------------------

@dataclass
class EventStudyResult:
    years: list
    baseline_year: int
    coef: np.ndarray
    se: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    regression: RegressionResult
    pretrend: dict

    def rows(self):
        for k, t in enumerate(self.years):
            yield (t, self.coef[k], self.se[k], self.lower[k], self.upper[k], t == self.baseline_year)

    header = ("year", "beta", "se", "lower", "upper", "baseline")


def _slope(x, y):
    """Classical OLS slope of ``y`` on ``x`` with t-based p-value."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        return {"slope": math.nan, "se": math.nan, "p": math.nan, "n": int(x.size)}
    res = ols_fit(make_design(y, {"year": x}), covariance="classical")
    return {"slope": float(res.coef[1]), "se": float(res.se[1]), "p": float(res.pvalue[1]),
            "n": int(x.size)}


def event_study(outcome, years, treat, baseline_year, covariance="robust", design="saturated",
                level=0.95):
    """Per-year treatment coefficients relative to a baseline year.

    ``outcome`` is pairs x years (NaN allowed).  The saturated design regresses
    the outcome on an intercept, the treatment dummy, year dummies and
    treatment x year interactions for every year except the baseline, so each
    coefficient is the treated-minus-control gap in that year net of the gap in
    the baseline year.  ``design="bare"`` drops the treatment and year dummies.
    The pre-trend statistic is the slope of the coefficients (baseline fixed
    at zero) on calendar year over years up to the baseline.
    """
    y = np.asarray(outcome, dtype=float)
    years = [int(t) for t in years]
    treat = np.asarray(treat, dtype=bool)
    if y.shape != (treat.size, len(years)):
        raise InputError("outcome must be pairs x years")
    if baseline_year not in years:
        raise InputError(f"baseline year {baseline_year} outside {years[0]}-{years[-1]}")
    if treat.all() or not treat.any():
        raise InputError("event study needs both treated and control pairs")
    if design not in ("saturated", "bare"):
        raise InputError(f"unknown event-study design {design!r}")
    n_pairs, n_years = y.shape
    yy = y.ravel()
    tt = np.repeat(treat.astype(float), n_years)
    year_col = np.tile(np.array(years), n_pairs)
    regs = {}
    if design == "saturated":
        regs["treat"] = tt
    others = [t for t in years if t != baseline_year]
    for t in others:
        regs[f"treat_x_{t}"] = tt * (year_col == t)
    d = make_design(yy, regs, years=year_col if design == "saturated" else None,
                    reference_year=baseline_year)
    res = ols_fit(d, covariance=covariance)
    z = normal_quantile(0.5 + level / 2.0)
    coef = np.zeros(n_years)
    se = np.zeros(n_years)
    for k, t in enumerate(years):
        if t != baseline_year:
            j = res.index(f"treat_x_{t}")
            coef[k], se[k] = res.coef[j], res.se[j]
    pre = [k for k, t in enumerate(years) if t <= baseline_year]
    pretrend = _slope([years[k] for k in pre], coef[pre])
    return EventStudyResult(years, baseline_year, coef, se, coef - z * se, coef + z * se, res, pretrend)


# -- differences in differences --------------------------------------------------

DID_TERM = "treat_x_after"


def did_estimate(y_before, y_after, treat, controls_before=None, controls_after=None,
                 covariance="robust"):
    """Two-period differences-in-differences by OLS.

    Columns are intercept, ``treat_x_after`` (the DID estimate), ``treat``,
    ``after`` and any named controls, given as dicts of per-pair arrays for
    each period.  Pairs with a missing outcome or control are dropped.
    """
    y0 = np.asarray(y_before, dtype=float)
    y1 = np.asarray(y_after, dtype=float)
    treat = np.asarray(treat, dtype=float)
    if not (y0.shape == y1.shape == treat.shape):
        raise InputError("before, after and treat must have one entry per pair")
    if not treat.any() or treat.all():
        raise InputError("DID needs both treated and control pairs")
    controls_before = controls_before or {}
    controls_after = controls_after or {}
    if set(controls_before) != set(controls_after):
        raise InputError("controls must be given for both periods")
    y = np.concatenate([y0, y1])
    tr = np.concatenate([treat, treat])
    after = np.concatenate([np.zeros_like(y0), np.ones_like(y1)])
    regs = {DID_TERM: tr * after, "treat": tr, "after": after}
    for name in controls_before:
        regs[name] = np.concatenate([np.asarray(controls_before[name], float),
                                     np.asarray(controls_after[name], float)])
    return ols_fit(make_design(y, regs), covariance=covariance)


def did_group_means(y_before, y_after, treat):
    """Four group means and the difference of differences."""
    treat = np.asarray(treat, dtype=bool)
    y0 = np.asarray(y_before, dtype=float)
    y1 = np.asarray(y_after, dtype=float)
    ok = ~(np.isnan(y0) | np.isnan(y1))
    m = {
        "control_before": float(y0[ok & ~treat].mean()),
        "treated_before": float(y0[ok & treat].mean()),
        "control_after": float(y1[ok & ~treat].mean()),
        "treated_after": float(y1[ok & treat].mean()),
    }
    m["did"] = (m["treated_after"] - m["treated_before"]) - (m["control_after"] - m["control_before"])
    return m


# -- reporting -------------------------------------------------------------------

def regression_table(results, labels=None, titles=None, fit_rows=None):
    """Publication-style table text: coefficient with stars, SE in parentheses below.

    ``labels`` maps coefficient names to display labels and fixes row order;
    names absent from ``labels`` (year dummies, intercept) are omitted.
    """
    labels = labels or {}
    titles = titles or [f"({k + 1})" for k in range(len(results))]
    order = list(labels) if labels else [nm for nm in results[0].names]
    rows = []
    for name in order:
        if not any(name in r.names for r in results):
            continue
        est, err = [labels.get(name, name)], [""]
        for r in results:
            if name in r.names:
                k = r.index(name)
                est.append(f"{fmt(r.coef[k], 6)}{significance_stars(r.pvalue[k])}")
                err.append(f"({fmt(r.se[k], 6)})")
            else:
                est.append("")
                err.append("")
        rows += [est, err]
    rows.append(["Observations", *[r.n for r in results]])
    if fit_rows is None:
        fit_rows = ["pseudo_r2"] if results[0].model == "probit" else ["r2", "rmse"]
    names = {"pseudo_r2": "Pseudo R2", "r2": "R2 (robust SE)", "rmse": "RMSE"}
    for attr in fit_rows:
        rows.append([names[attr], *[fmt(getattr(r, attr), 6) for r in results]])
    return render_rows(["variable", *titles], rows)
