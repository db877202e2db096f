"""Statistical kernels: paired t, two-sample KS, random-intercept LMM,
repeated-measures F, z-score transforms, and the model metrics.

All functions are pure and operate on plain numpy arrays. Group-structured
inputs take a parallel array of group labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps


class DegenerateInputError(ValueError):
    """Raised when an input violates a statistical precondition."""


# ---------------------------------------------------------------------------
# Paired t-test
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    df: int
    mean_diff: float


def paired_t_test(a, b) -> TTestResult:
    """Two-sided paired t-test; p from the Student-t CDF with n-1 df."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be 1-D and equal length")
    n = a.size
    if n < 2:
        raise DegenerateInputError("need at least 2 pairs")
    d = a - b
    sd = d.std(ddof=1)
    if sd == 0.0:
        raise DegenerateInputError("zero-variance differences")
    t = d.mean() / (sd / math.sqrt(n))
    p = 2.0 * float(sps.t.sf(abs(t), df=n - 1))
    return TTestResult(t=float(t), p=p, df=n - 1, mean_diff=float(d.mean()))


# ---------------------------------------------------------------------------
# Two-sample Kolmogorov-Smirnov
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KsResult:
    d: float
    p: float


def kolmogorov_sf(lam: float, tol: float = 1e-16) -> float:
    """Survival function of the Kolmogorov distribution.

    Q(lam) = 2 * sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lam^2), truncated once terms
    drop below `tol`. Q(0+) -> 1.
    """
    if lam <= 1e-8:
        return 1.0
    total = 0.0
    for k in range(1, 1000):
        term = 2.0 * (-1.0) ** (k - 1) * math.exp(-2.0 * k * k * lam * lam)
        total += term
        if abs(term) < tol:
            break
    return min(1.0, max(0.0, total))


def ks_two_sample(a, b) -> KsResult:
    """D = sup |ECDF_a - ECDF_b|; asymptotic p via the Kolmogorov series."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    n1, n2 = a.size, b.size
    if n1 == 0 or n2 == 0:
        raise DegenerateInputError("both samples must be nonempty")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / n1
    cdf_b = np.searchsorted(b, grid, side="right") / n2
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    en = math.sqrt(n1 * n2 / (n1 + n2))
    return KsResult(d=d, p=kolmogorov_sf(en * d))


# ---------------------------------------------------------------------------
# Random-intercept linear mixed model (profile maximum likelihood)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LmmFit:
    beta0: float
    beta1: float
    sigma_u2: float          # random-intercept variance
    sigma_e2: float          # residual variance
    se_beta1: float
    z: float
    p: float
    ci_low: float
    ci_high: float
    lambda_ratio: float      # sigma_u2 / sigma_e2 at the optimum
    loglik: float
    n_obs: int
    n_groups: int


def _group_codes(group):
    group = np.asarray(group)
    _, codes = np.unique(group, return_inverse=True)
    return codes, int(codes.max()) + 1 if codes.size else 0


def _profile_parts(y, X, codes, n_groups, lam):
    """GLS pieces for V_g = sigma_e^2 (I + lam * J): beta, rWr, logdet, XtWX.

    Uses the Woodbury form (I + lam J)^-1 = I - lam/(1 + lam*n_g) J, so only
    per-group sums are needed.
    """
    n_g = np.bincount(codes, minlength=n_groups).astype(float)
    shrink = lam / (1.0 + lam * n_g)  # per group

    sum_x = np.vstack([np.bincount(codes, weights=X[:, j], minlength=n_groups) for j in range(X.shape[1])]).T
    sum_y = np.bincount(codes, weights=y, minlength=n_groups)

    xtwx = X.T @ X - (sum_x * shrink[:, None]).T @ sum_x
    xtwy = X.T @ y - (sum_x * shrink[:, None]).T @ sum_y
    beta = np.linalg.solve(xtwx, xtwy)

    r = y - X @ beta
    sum_r = np.bincount(codes, weights=r, minlength=n_groups)
    rwr = float(r @ r - shrink @ (sum_r**2))
    logdet = float(np.sum(np.log1p(lam * n_g)))
    return beta, rwr, logdet, xtwx


def _profile_loglik(y, X, codes, n_groups, lam):
    n = y.size
    _, rwr, logdet, _ = _profile_parts(y, X, codes, n_groups, lam)
    sigma_e2 = rwr / n
    if sigma_e2 <= 0:
        return -np.inf
    return -0.5 * (n * math.log(2.0 * math.pi * sigma_e2) + n + logdet)


def gls_fixed_effects(y, x, group, lambda_ratio: float):
    """Fixed-effect estimates at a pinned variance ratio (diagnostic hook)."""
    y = np.asarray(y, dtype=float)
    X = np.column_stack([np.ones_like(y), np.asarray(x, dtype=float)])
    codes, n_groups = _group_codes(group)
    beta, _, _, _ = _profile_parts(y, X, codes, n_groups, lambda_ratio)
    return beta


def fit_random_intercept_lmm(y, x, group, max_iter: int = 200) -> LmmFit:
    """Profile-ML fit of y = b0 + b1*x + u_group + eps.

    The variance ratio lam = sigma_u^2 / sigma_e^2 is profiled by
    golden-section search on log(lam); the zero boundary (plain OLS) is also
    evaluated and wins if its likelihood is higher. Inference on the slope is
    Wald (normal approximation).
    """
    y = np.asarray(y, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    if y.size != x.size:
        raise ValueError("y and x disagree in length")
    if y.size < 3:
        raise DegenerateInputError("too few observations")
    codes, n_groups = _group_codes(group)
    if n_groups < 1:
        raise DegenerateInputError("no groups")
    X = np.column_stack([np.ones_like(y), x])
    if np.linalg.matrix_rank(X) < 2:
        raise DegenerateInputError("rank-deficient fixed effects")

    if n_groups < 2:
        lam_hat = 0.0  # random intercept unidentifiable; collapse to OLS
    else:
        lo, hi = math.log(1e-8), math.log(1e4)
        gr = (math.sqrt(5.0) - 1.0) / 2.0
        c = hi - gr * (hi - lo)
        d = lo + gr * (hi - lo)
        fc = _profile_loglik(y, X, codes, n_groups, math.exp(c))
        fd = _profile_loglik(y, X, codes, n_groups, math.exp(d))
        for _ in range(max_iter):
            if hi - lo < 1e-10:
                break
            if fc > fd:
                hi, d, fd = d, c, fc
                c = hi - gr * (hi - lo)
                fc = _profile_loglik(y, X, codes, n_groups, math.exp(c))
            else:
                lo, c, fc = c, d, fd
                d = lo + gr * (hi - lo)
                fd = _profile_loglik(y, X, codes, n_groups, math.exp(d))
        lam_hat = math.exp((lo + hi) / 2.0)
        # the zero boundary is a legitimate optimum (no group effect)
        if _profile_loglik(y, X, codes, n_groups, 0.0) >= _profile_loglik(
            y, X, codes, n_groups, lam_hat
        ):
            lam_hat = 0.0

    beta, rwr, _, xtwx = _profile_parts(y, X, codes, n_groups, lam_hat)
    n = y.size
    sigma_e2 = rwr / n
    sigma_u2 = lam_hat * sigma_e2
    loglik = _profile_loglik(y, X, codes, n_groups, lam_hat)
    if not np.isfinite(loglik) or not np.all(np.isfinite(beta)):
        raise DegenerateInputError(
            f"mixed-model fit did not converge (lam={lam_hat:.3g}, loglik={loglik})"
        )
    cov = sigma_e2 * np.linalg.inv(xtwx)
    se1 = math.sqrt(cov[1, 1])
    z = beta[1] / se1 if se1 > 0 else math.inf
    p = math.erfc(abs(z) / math.sqrt(2.0))
    zq = 1.959963984540054
    return LmmFit(
        beta0=float(beta[0]),
        beta1=float(beta[1]),
        sigma_u2=float(sigma_u2),
        sigma_e2=float(sigma_e2),
        se_beta1=float(se1),
        z=float(z),
        p=float(p),
        ci_low=float(beta[1] - zq * se1),
        ci_high=float(beta[1] + zq * se1),
        lambda_ratio=float(lam_hat),
        loglik=float(loglik),
        n_obs=int(n),
        n_groups=int(n_groups),
    )


# ---------------------------------------------------------------------------
# Repeated-measures F (two conditions)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RmFResult:
    f: float
    p: float
    n_pairs: int
    n_excluded: int


def repeated_measures_f(pairs) -> RmFResult:
    """Two-condition repeated-measures F over per-participant aggregates.

    `pairs` is an (n, 2) array of per-participant condition means; rows with a
    NaN (participant missing a condition) are excluded. For two conditions the
    F statistic equals the squared paired t and shares its p-value.
    """
    pairs = np.asarray(pairs, dtype=float)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ValueError("expected an (n, 2) array of condition aggregates")
    complete = ~np.isnan(pairs).any(axis=1)
    kept = pairs[complete]
    if kept.shape[0] < 2:
        raise DegenerateInputError("need >= 2 participants with both conditions")
    res = paired_t_test(kept[:, 0], kept[:, 1])
    return RmFResult(
        f=res.t**2, p=res.p, n_pairs=kept.shape[0], n_excluded=int((~complete).sum())
    )


# ---------------------------------------------------------------------------
# Per-group absolute z-scores
# ---------------------------------------------------------------------------


def abs_z_transform(values, group):
    """|x - group mean| / group sd (ddof=1); NaN where a group's sd is zero."""
    values = np.asarray(values, dtype=float)
    codes, n_groups = _group_codes(group)
    out = np.full(values.shape, np.nan)
    for g in range(n_groups):
        sel = codes == g
        v = values[sel]
        if v.size < 2:
            continue
        sd = v.std(ddof=1)
        if sd == 0.0:
            continue
        out[sel] = np.abs(v - v.mean()) / sd
    return out


# ---------------------------------------------------------------------------
# J-vs-PA curve
# ---------------------------------------------------------------------------


def j_vs_pa_curve(j_values, pa_scores, bins=10):
    """Mean J per PA bin plus the PA frequency per bin, as plot-ready columns.

    `bins` is either a bin count (equal width over the observed PA range) or
    an explicit edge array. Empty bins report count 0 and NaN mean.
    Returns a dict of equal-length arrays: bin_lo, bin_hi, bin_mid, count,
    mean_j.
    """
    j_values = np.asarray(j_values, dtype=float)
    pa_scores = np.asarray(pa_scores, dtype=float)
    if j_values.size == 0 or j_values.size != pa_scores.size:
        raise ValueError("need paired, nonempty J and PA arrays")
    if np.isscalar(bins) or isinstance(bins, int):
        lo, hi = pa_scores.min(), pa_scores.max()
        if hi == lo:
            hi = lo + 1.0
        edges = np.linspace(lo, hi, int(bins) + 1)
    else:
        edges = np.asarray(bins, dtype=float)
    idx = np.clip(np.digitize(pa_scores, edges, right=False) - 1, 0, len(edges) - 2)
    n_bins = len(edges) - 1
    count = np.bincount(idx, minlength=n_bins)
    sums = np.bincount(idx, weights=j_values, minlength=n_bins)
    mean_j = np.where(count > 0, sums / np.maximum(count, 1), np.nan)
    return {
        "bin_lo": edges[:-1],
        "bin_hi": edges[1:],
        "bin_mid": 0.5 * (edges[:-1] + edges[1:]),
        "count": count,
        "mean_j": mean_j,
    }


# ---------------------------------------------------------------------------
# Model metrics
# ---------------------------------------------------------------------------


def classification_metrics(y_true, y_pred) -> dict:
    """Accuracy plus support-weighted F1 and precision for binary labels.

    Per-class precision/recall with an empty denominator contribute 0, the
    usual convention for degenerate predictions.
    """
    y_true = np.asarray(y_true).astype(int)
    y_pred = np.asarray(y_pred).astype(int)
    if y_true.size == 0:
        raise DegenerateInputError("empty input")
    if y_true.shape != y_pred.shape:
        raise ValueError("length mismatch")
    accuracy = float((y_true == y_pred).mean())
    f1_w = 0.0
    prec_w = 0.0
    n = y_true.size
    for cls in (0, 1):
        support = int((y_true == cls).sum())
        if support == 0:
            continue
        tp = int(((y_true == cls) & (y_pred == cls)).sum())
        pred_pos = int((y_pred == cls).sum())
        precision = tp / pred_pos if pred_pos else 0.0
        recall = tp / support
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        f1_w += support / n * f1
        prec_w += support / n * precision
    return {"accuracy": accuracy, "f1_weighted": f1_w, "precision_weighted": prec_w}


def regression_metrics(y_true, y_pred):
    """(RMSE, R^2); R^2 is NaN when y_true is constant and may be negative."""
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.size < 2 or y_true.shape != y_pred.shape:
        raise ValueError("need equal-length inputs with >= 2 points")
    rmse = float(np.sqrt(np.mean((y_pred - y_true) ** 2)))
    sst = float(np.sum((y_true - y_true.mean()) ** 2))
    if sst == 0.0:
        return rmse, float("nan")
    sse = float(np.sum((y_true - y_pred) ** 2))
    return rmse, 1.0 - sse / sst
