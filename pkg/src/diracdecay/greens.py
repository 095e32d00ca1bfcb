"""Finite-box Green's functions, resolvent identities, and Monte Carlo decay

scans for fractional and negative moments.

Green's functions are computed at real energy by an LDL^T solve of the
symmetric tridiagonal (D_box - E); a pivot magnitude below PIVOT_GUARD
signals that E is numerically an eigenvalue of the box (NearSingular) and
Monte Carlo callers resample, counting the rejections.

The transfer-matrix solution Phi entering the resolvent identities is seeded
with Phi_1 = (p_{1,2}, 1), the unique ray satisfying the boundary row at
site 1, so that (D - E) Phi = 0 on the whole half-line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .disorder import sample_path
from .errors import InsufficientReplicas, NearSingular
from .fits import bootstrap_slope_ci, linear_fit
from .model import BoxDescriptor, assemble_operator, energy_context
from .util import parallel_map

PIVOT_GUARD = 1e-13


@dataclass(frozen=True)
class GreenQuery:
    """One matrix element <delta^sigma_u, (D_box - E)^-1 delta^sigma'_n>."""

    box: BoxDescriptor
    u: int
    sigma: str
    n: int
    sigma_p: str
    E: float

    def __post_init__(self):
        if not self.box.contains(self.u, self.sigma):
            raise IndexError("source (%d,%s) outside box" % (self.u, self.sigma))
        if not self.box.contains(self.n, self.sigma_p):
            raise IndexError("target (%d,%s) outside box" % (self.n, self.sigma_p))


def _solve_column(op, E, target_idx):
    d, l, min_piv = _kernels.ldlt_factor(op.diag, op.offdiag, E)
    if min_piv < PIVOT_GUARD:
        raise NearSingular(
            "pivot %.2e below guard %.0e (E near a box eigenvalue)"
            % (min_piv, PIVOT_GUARD)
        )
    return _kernels.ldlt_solve_unit(d, l, target_idx)


def green_column(op, E, site, spin):
    """Full resolvent column for target (site, spin); O(dim) solve."""
    return _solve_column(op, E, op.box.index_of(site, spin))


def green(query, path):
    """Resolvent entry for a single query against one disorder path."""
    op = assemble_operator(path.params, path, query.box)
    col = green_column(op, query.E, query.n, query.sigma_p)
    return float(col[query.box.index_of(query.u, query.sigma)])


def boundary_solution(ctx, path, N):
    """Phi_1..Phi_N with Phi_1 = (p_{1,2}, 1) propagated by the first system."""
    phi = np.empty((N + 1, 2))
    phi[0] = np.nan  # 1-based
    phi[1] = (ctx.p2 - path.v2_at(1), 1.0)
    for j in range(1, N):
        q1 = ctx.p1 + path.v1_at(j)
        q2 = ctx.p2 - path.v2_at(j + 1)
        phi[j + 1, 0] = (q1 * q2 + 1.0) * phi[j, 0] + q2 * phi[j, 1]
        phi[j + 1, 1] = q1 * phi[j, 0] + phi[j, 1]
    return phi


@dataclass(frozen=True)
class ResolventReport:
    """Max relative residuals of the resolvent-to-transfer identities."""

    n: int
    L: int
    E: float
    eigenfunction_first: float  # G_n(u,+-;n,-) = -phi_u / phi^+_n
    eigenfunction_first_diag: float  # ... = phi_u/phi^-_n * G_n(n,-;n,-)
    eigenfunction_second: float  # G'_n(u,+-;n,+) = phi_u / phi^-_{n+1}
    eigenfunction_second_diag: float
    big_to_small_first: float
    big_to_small_second: float

    def max_residual(self):
        return max(
            self.eigenfunction_first,
            self.eigenfunction_first_diag,
            self.eigenfunction_second,
            self.eigenfunction_second_diag,
            self.big_to_small_first,
            self.big_to_small_second,
        )


def _rel(a, b):
    # residual of a = b in cross-multiplied form, safe at exact zeros
    return abs(a - b) / max(1.0, abs(a), abs(b))


def verify_resolvent_identities(path, ctx, n, L):
    """Numerically check the Green-to-eigenfunction and box-factorization

    identities at (n, L); returns max relative residuals per identity.  The
    eigenfunction identities are evaluated in cross-multiplied form
    (G phi-denominator + phi-numerator = 0) so that exact zeros of the
    solution, which occur at rational rotation numbers, stay harmless."""
    if not (2 <= n <= L):
        raise ValueError("need 2 <= n <= L")
    if n + 1 > L:
        raise ValueError("second-system factorization needs n + 1 <= L")
    E = ctx.E
    params = path.params
    phi = boundary_solution(ctx, path, L + 1)
    box_n = BoxDescriptor("Lambda", n)
    box_np = BoxDescriptor("LambdaPrime", n)
    box_L = BoxDescriptor("Lambda", L)
    box_Lp = BoxDescriptor("LambdaPrime", L)
    op_n = assemble_operator(params, path, box_n)
    op_np = assemble_operator(params, path, box_np)
    op_L = assemble_operator(params, path, box_L)
    op_Lp = assemble_operator(params, path, box_Lp)

    col_n = green_column(op_n, E, n, "-")
    col_np = green_column(op_np, E, n, "+")
    col_L = green_column(op_L, E, n, "-")
    col_Lp = green_column(op_Lp, E, n, "+")

    r1 = r1d = r2 = r2d = r3 = r4 = 0.0
    g_nn = col_n[box_n.index_of(n, "-")]
    gp_nn = col_np[box_np.index_of(n, "+")]
    g_L_plus = col_L[box_L.index_of(n, "+")]
    gp_L_minus = col_Lp[box_Lp.index_of(n + 1, "-")]
    scale = float(np.max(np.abs(phi[1 : n + 2])))
    for u in range(1, n + 1):
        for spin, comp in (("+", 0), ("-", 1)):
            if spin == "+" and u > n - 1:
                continue
            g = col_n[box_n.index_of(u, spin)]
            r1 = max(r1, abs(g * phi[n, 0] + phi[u, comp]) / scale)
            r1d = max(r1d, abs(g * phi[n, 1] - phi[u, comp] * g_nn) / scale)
            gp = col_np[box_np.index_of(u, spin)]
            r2 = max(r2, abs(gp * phi[n + 1, 1] - phi[u, comp]) / scale)
            r2d = max(r2d, abs(gp * phi[n, 0] - phi[u, comp] * gp_nn) / scale)
            gl = col_L[box_L.index_of(u, spin)]
            r3 = max(r3, _rel(gl, (1.0 - g_L_plus) * g))
            glp = col_Lp[box_Lp.index_of(u, spin)]
            r4 = max(r4, _rel(glp, (1.0 + gp_L_minus) * gp))
    return ResolventReport(
        n=n,
        L=L,
        E=E,
        eigenfunction_first=r1,
        eigenfunction_first_diag=r1d,
        eigenfunction_second=r2,
        eigenfunction_second_diag=r2d,
        big_to_small_first=r3,
        big_to_small_second=r4,
    )


@dataclass(frozen=True)
class FmEstimate:
    """Fractional-moment decay scan E[|G|^s] with its stretched-exponential fit.

    The fit regresses log E[|G|^s] on n^(1-2 alpha); c_hat = -slope > 0 is the
    decay coefficient (constants in the bound are model-dependent, so the
    acceptance is sign + fit quality + CI excluding 0).
    """

    s: float
    n_grid: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    c_hat: float
    slope: float
    intercept: float
    r2: float
    slope_ci: tuple
    M: int
    L: int
    E: float
    alpha: float
    lam: float
    resamples: int
    samples: np.ndarray = field(default=None, repr=False)


def fractional_moment_scan(
    params,
    spec,
    E,
    u,
    s,
    n_grid,
    L,
    M,
    seed,
    sigma="+",
    sigma_p="-",
    threads=1,
    n_boot=200,
    require_decay=True,
):
    """Monte Carlo E[|G_L(u,sigma; n,sigma'; E)|^s] over the n grid plus fit.

    sigma_p selects the box family: '-' targets live in Lambda_L, '+' in
    Lambda'_L (the pair for which the decay bounds are formulated).
    NearSingular draws are resampled from fresh replica streams and counted.
    """
    if not (0.0 < s <= 0.5):
        raise ValueError("s must lie in (0, 1/2]")
    if params.alpha >= 0.5:
        raise ValueError("fractional-moment decay scan needs alpha < 1/2")
    n_grid = np.asarray(sorted(n_grid), dtype=int)
    box = BoxDescriptor("Lambda" if sigma_p == "-" else "LambdaPrime", L)
    targets = [box.index_of(int(n), sigma_p) for n in n_grid]
    src = box.index_of(u, sigma)
    rejections = []  # list append is atomic; safe under the thread pool

    def one(replica):
        for attempt in range(50):
            rep = replica + attempt * 2**32  # fresh, non-overlapping stream
            path = sample_path(params, spec, L, seed, replica=rep)
            op = assemble_operator(params, path, box)
            d, l, min_piv = _kernels.ldlt_factor(op.diag, op.offdiag, E)
            if min_piv < PIVOT_GUARD:
                rejections.append(rep)
                continue
            row = np.empty(len(targets))
            for i, t in enumerate(targets):
                col = _kernels.ldlt_solve_unit(d, l, t)
                row[i] = abs(col[src]) ** s
            return row
        raise NearSingular("50 consecutive near-singular draws at E=%g" % E)

    samples = np.array(parallel_map(one, range(M), threads))
    resamples = len(rejections)
    values = samples.mean(axis=0)
    stderr = samples.std(axis=0, ddof=1) / math.sqrt(M)
    x = n_grid.astype(float) ** (1.0 - 2.0 * params.alpha)
    y = np.log(values)
    # delta-method weights for log(mean); regularized for zero-variance rows
    w = 1.0 / ((stderr / values) ** 2 + 1e-12)
    slope, intercept, r2, _ = linear_fit(x, y, w)
    ci = bootstrap_slope_ci(samples, x, n_boot=n_boot, seed=seed)
    if require_decay and not (ci[1] < 0.0):
        raise InsufficientReplicas(
            "slope CI %s includes 0; increase M (M=%d)" % (ci, M)
        )
    return FmEstimate(
        s=s,
        n_grid=n_grid,
        values=values,
        stderr=stderr,
        c_hat=-slope,
        slope=slope,
        intercept=intercept,
        r2=r2,
        slope_ci=ci,
        M=M,
        L=L,
        E=E,
        alpha=params.alpha,
        lam=params.lam,
        resamples=resamples,
        samples=samples,
    )


@dataclass(frozen=True)
class NegativeMomentReport:
    """Decay of E[ ||T_[u,n] phi0||^(-s) ] against n^(1-2 alpha)."""

    s: float
    n_grid: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    slope: float
    intercept: float
    r2: float
    slope_ci: tuple
    M: int
    samples: np.ndarray = field(default=None, repr=False)


def negative_moment_scan(
    params, spec, E, u, s, n_grid, M, seed, theta0=0.0, system="first", threads=1,
    n_boot=200,
):
    """Monte Carlo of ||T_[u,n] phi0||^(-s) via log-scaled products.

    phi0 = (cos theta0, sin theta0).  Reports the weighted fit of
    log E[...] against n^(1-2 alpha); no decay is asserted (lambda = 0
    legitimately gives slope ~ 0).
    """
    ctx = energy_context(E, params.m)
    n_grid = np.asarray(sorted(n_grid), dtype=int)
    if n_grid[0] <= u:
        raise ValueError("n_grid entries must exceed the base site u")
    N = int(n_grid[-1]) + 1
    cps = np.ascontiguousarray(n_grid - u - 1, dtype=np.int64)  # step counts - 1
    x0, y0 = math.cos(theta0), math.sin(theta0)

    def one(replica):
        path = sample_path(params, spec, N, seed, replica=replica)
        if system == "first":
            W1 = np.ascontiguousarray(path.v1[u - 1 : N - 1])
            W2 = np.ascontiguousarray(path.v2[u : N])
        else:
            W1 = np.ascontiguousarray(path.v1[u - 1 : N - 1])
            W2 = np.ascontiguousarray(path.v2[u - 1 : N - 1])
        out = np.empty(len(cps))
        _kernels.transfer_vector_lognorms(
            W1, W2, ctx.p1, ctx.p2, system == "second", x0, y0, cps, out
        )
        return np.exp(-s * out)

    samples = np.array(parallel_map(one, range(M), threads))
    values = samples.mean(axis=0)
    stderr = samples.std(axis=0, ddof=1) / math.sqrt(M)
    x = n_grid.astype(float) ** (1.0 - 2.0 * params.alpha)
    w = 1.0 / ((stderr / values) ** 2 + 1e-12)
    slope, intercept, r2, _ = linear_fit(x, np.log(values), w)
    ci = bootstrap_slope_ci(samples, x, n_boot=n_boot, seed=seed)
    return NegativeMomentReport(
        s=s,
        n_grid=n_grid,
        values=values,
        stderr=stderr,
        slope=slope,
        intercept=intercept,
        r2=r2,
        slope_ci=ci,
        M=M,
        samples=samples,
    )


@dataclass(frozen=True)
class BlockMomentReport:
    """E[ ||T_block phi_{l-1}||^(-s) ] <= 1 - c / l^(2 alpha) fit."""

    s: float
    n0: int
    l_grid: np.ndarray
    values: np.ndarray
    c_hat: np.ndarray  # (1 - value) * l^(2 alpha) per l
    c_fit: float  # median of c_hat


def block_moment_scan(params, spec, E, n0, l_grid, s, M, seed, theta0=0.0, threads=1):
    """Per-block negative moments along the running direction.

    Block l multiplies the transfer matrices at sites (l-1) n0 + 1 .. l n0
    onto the (normalized) direction reached so far; the per-block norm is the
    checkpoint difference of log ||T_[1,n] phi0||.
    """
    ctx = energy_context(E, params.m)
    l_grid = np.asarray(sorted(l_grid), dtype=int)
    lmax = int(l_grid[-1])
    N = lmax * n0 + 1
    cps = np.ascontiguousarray(np.arange(1, lmax + 1) * n0 - 1, dtype=np.int64)
    x0, y0 = math.cos(theta0), math.sin(theta0)

    def one(replica):
        path = sample_path(params, spec, N, seed, replica=replica)
        out = np.empty(lmax)
        _kernels.transfer_vector_lognorms(
            np.ascontiguousarray(path.v1[: N - 1]),
            np.ascontiguousarray(path.v2[1:N]),
            ctx.p1,
            ctx.p2,
            False,
            x0,
            y0,
            cps,
            out,
        )
        block_logs = np.diff(np.concatenate(([0.0], out)))
        return np.exp(-s * block_logs[l_grid - 1])

    samples = np.array(parallel_map(one, range(M), threads))
    values = samples.mean(axis=0)
    c_hat = (1.0 - values) * l_grid.astype(float) ** (2.0 * params.alpha)
    return BlockMomentReport(
        s=s,
        n0=n0,
        l_grid=l_grid,
        values=values,
        c_hat=c_hat,
        c_fit=float(np.median(c_hat)),
    )
