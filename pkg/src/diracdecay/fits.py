"""Small least-squares / bootstrap helpers shared by the decay scans."""

from __future__ import annotations

import numpy as np


def linear_fit(x, y, w=None):
    """Weighted least squares y ~ intercept + slope * x.

    Returns (slope, intercept, r2, slope_se).  r2 is the unweighted
    coefficient of determination; slope_se comes from the residual variance.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if w is None:
        w = np.ones_like(x)
    w = np.asarray(w, dtype=float)
    W = np.sum(w)
    xm = np.sum(w * x) / W
    ym = np.sum(w * y) / W
    sxx = np.sum(w * (x - xm) ** 2)
    sxy = np.sum(w * (x - xm) * (y - ym))
    slope = sxy / sxx
    intercept = ym - slope * xm
    resid = y - intercept - slope * x
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    dof = max(len(x) - 2, 1)
    slope_se = float(np.sqrt(ss_res / dof / np.sum((x - xm) ** 2)))
    return float(slope), float(intercept), float(r2), slope_se


def logmeanexp(values, axis=None):
    """log(mean(exp(values))) without overflow."""
    v = np.asarray(values, dtype=float)
    mx = np.max(v, axis=axis, keepdims=True)
    out = np.log(np.mean(np.exp(v - mx), axis=axis)) + np.squeeze(mx, axis=axis)
    return out


def bootstrap_slope_ci(samples, x, n_boot=200, seed=0, log_of_mean=True):
    """Percentile CI for the slope of log(mean over replicas) vs x.

    samples: (M, len(x)) per-replica values whose replica-mean is fitted.
    Returns (lo, hi) at the 2.5 / 97.5 percentiles.
    """
    samples = np.asarray(samples, dtype=float)
    M = samples.shape[0]
    gen = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    slopes = np.empty(n_boot)
    for b in range(n_boot):
        idx = gen.integers(0, M, size=M)
        mean = np.mean(samples[idx], axis=0)
        y = np.log(mean) if log_of_mean else mean
        slopes[b], _, _, _ = linear_fit(x, y)
    return float(np.percentile(slopes, 2.5)), float(np.percentile(slopes, 97.5))
