"""Lyapunov exponent (closed form and Monte Carlo) and the spectral phase

diagram.

The growth rate of transfer-matrix products, normalized by
s_n = sum_{j<=n} j^(-2 alpha), has the closed form

    beta(E, lambda) = lambda^2 (p1^2 + p2^2) / (8 sin^2 2k).

The square-summability criterion beta > 1/2 is equivalent to
lambda^2 > F(E) with F(E) = (E^2 - m^2)(m^2 + 4 - E^2) / (2 (m^2 + E^2)),
which drives the alpha = 1/2 phase boundary: lambda*(m) is the maximum of
sqrt(F) over the band and E*-, E*+ are the two roots of lambda^2 = F(E).

Estimators: the raw estimator log ||T_n|| / s_n converges only at rate
O(1/log n) when alpha = 1/2, so beta_hat subtracts the six exactly-zero-mean
martingale sums of the log R^2 decomposition (a control variate) and
normalizes by the exact second-moment sum, making the deterministic drift
contribute exactly beta.  The plain mean, a median-of-means variant, and the
product-based estimator are reported alongside; they agree within joint CI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .disorder import sample_path
from .errors import SubcriticalOnly
from .fits import logmeanexp
from .model import in_band_interior
from .prufer import check_band_edge, check_excluded_k
from .transfer import spectral_norm_2x2
from .util import parallel_map


def beta_closed_form(ctx, lam):
    """lambda^2 (p1^2 + p2^2) / (8 sin^2 2k)."""
    check_band_edge(ctx)
    return lam * lam * (ctx.p1**2 + ctx.p2**2) / (8.0 * ctx.sin2k**2)


def coupling_squared_threshold(E, m):
    """F(E) = (E^2 - m^2)(m^2 + 4 - E^2) / (2 (m^2 + E^2)); beta > 1/2 iff

    lambda^2 > F(E)."""
    E2 = E * E
    m2 = m * m
    return 0.5 * (E2 - m2) * (m2 + 4.0 - E2) / (m2 + E2)


def lambda_coupling_curve(E, m):
    """lambda_m(E) = sqrt(F(E)) on the band, the pp/sc boundary coupling."""
    return math.sqrt(max(coupling_squared_threshold(E, m), 0.0))


def lambda_critical(m):
    """(lambda*(m), E*(m)): maximum of lambda_m over the positive band.

    Solved through the stationary condition in u = E^2,
    u^2 + 2 m^2 u - 3 m^4 - 8 m^2 = 0, whose positive root is
    u* = -m^2 + 2 sqrt(m^4 + 2 m^2).  Requires m > 0: for m = 0 the function
    F(E) = (4 - E^2)/2 is monotone on the band and the supremum sqrt(2) sits
    at the band edge E = 0, so no interior maximizer exists.
    """
    if m <= 0:
        raise ValueError(
            "lambda_critical needs m > 0: at m = 0 the coupling curve is "
            "monotone with supremum sqrt(2) at the band edge"
        )
    m2 = m * m
    u = -m2 + 2.0 * math.sqrt(m2 * m2 + 2.0 * m2)
    e_star = math.sqrt(u)
    return lambda_coupling_curve(e_star, m), e_star


def critical_energies(lam, m):
    """The two roots (E*-, E*+) of lambda^2 = F(E) in the positive band,

    or None when lam >= lambda*(m) (no root pair; tangency included)."""
    if m <= 0:
        raise ValueError("critical_energies needs m > 0")
    lam_star, _ = lambda_critical(m)
    if abs(lam) >= lam_star:
        return None
    A = m * m
    l2 = lam * lam
    # u^2 + (2 l2 - 2A - 4) u + A^2 + 4A + 2 l2 A = 0 in u = E^2
    b = 2.0 * l2 - 2.0 * A - 4.0
    c = A * A + 4.0 * A + 2.0 * l2 * A
    disc = b * b - 4.0 * c
    if disc <= 0:
        return None
    root = math.sqrt(disc)
    u_lo = (-b - root) / 2.0
    u_hi = (-b + root) / 2.0
    return math.sqrt(u_lo), math.sqrt(u_hi)


@dataclass(frozen=True)
class RegimeReport:
    """Spectral classification of (alpha, lambda, m, E)."""

    alpha_class: str  # supercritical / critical / subcritical
    spectral_type: str  # ac / pp / sc / outside_band
    E: float
    m: float
    lam: float
    alpha: float
    lambda_star: float = None
    e_star: float = None
    critical_pair: tuple = None


def classify(params, E, alpha_is_critical=None):
    """Phase-diagram cell for (params, E).

    alpha > 1/2: ac on the open band; alpha < 1/2: pp; alpha = 1/2: pp when
    lambda >= lambda*(m) or |E| outside the open interval (E*-, E*+)
    (equivalently lambda^2 >= F(E)), sc inside.  The boundary lambda =
    lambda*(m) belongs to the pp branch.  alpha criticality is decided by
    the explicit flag when given, not by float comparison.
    """
    if alpha_is_critical is None:
        alpha_is_critical = params.alpha == 0.5
    m, lam, alpha = params.m, params.lam, params.alpha
    if alpha_is_critical:
        alpha_class = "critical"
    elif alpha > 0.5:
        alpha_class = "supercritical"
    else:
        alpha_class = "subcritical"
    lam_star = e_star = None
    pair = None
    if m > 0:
        lam_star, e_star = lambda_critical(m)
        pair = critical_energies(lam, m)
    if not in_band_interior(E, m):
        stype = "outside_band"
    elif alpha_class == "supercritical":
        stype = "ac"
    elif alpha_class == "subcritical":
        stype = "pp"
    else:
        stype = "sc" if lam * lam < coupling_squared_threshold(abs(E), m) else "pp"
    return RegimeReport(
        alpha_class=alpha_class,
        spectral_type=stype,
        E=E,
        m=m,
        lam=lam,
        alpha=alpha,
        lambda_star=lam_star,
        e_star=e_star,
        critical_pair=pair,
    )


def s_n_normalizer(alpha, N):
    """s_N = sum_{j=1}^{N} j^(-2 alpha), compensated."""
    return float(math.fsum(np.arange(1, N + 1, dtype=float) ** (-2.0 * alpha)))


@dataclass(frozen=True)
class LyapunovEstimate:
    """Monte Carlo estimate of beta with the raw variants kept for honesty."""

    beta_hat: float
    stderr: float
    N: int
    M: int
    s_N: float
    raw_mean: float = None
    raw_stderr: float = None
    median_of_means: float = None
    product_mean: float = None
    product_stderr: float = None
    replicas_cv: np.ndarray = field(default=None, repr=False)
    replicas_raw: np.ndarray = field(default=None, repr=False)


def estimate_beta(ctx, params, spec, N, M, seed, theta0=0.0, threads=1):
    """Monte Carlo beta estimate over M replicas of length N.

    Requires alpha <= 1/2 (otherwise s_N is bounded and the normalized limit
    degenerates) and k away from the excluded triple.
    """
    if params.alpha > 0.5:
        raise SubcriticalOnly(
            "alpha=%.3f > 1/2: s_N is bounded, the estimator degenerates"
            % params.alpha
        )
    check_band_edge(ctx)
    check_excluded_k(ctx)
    s_N = s_n_normalizer(params.alpha, N)
    sites = np.arange(1, N, dtype=float)
    ev1 = (params.lam * params.a(sites)) ** 2
    ev2 = (params.lam * params.a(sites + 1)) ** 2
    p12, p22 = ctx.p1**2, ctx.p2**2
    s_hat = (p22 * math.fsum(ev1) + p12 * math.fsum(ev2)) / (
        params.lam**2 * (p12 + p22)
    ) if params.lam > 0 else s_N

    def one(replica):
        path = sample_path(params, spec, N, seed, replica=replica)
        W1 = np.ascontiguousarray(path.v1[: N - 1])
        W2 = np.ascontiguousarray(path.v2[1:N])
        log_r2, drift, Mart, Q1, Q2, _, _, _, _ = _kernels.prufer_decomposition(
            W1, W2, ev1, ev2, ctx.p1, ctx.p2, ctx.k, theta0
        )
        a, b, c, d, log_scale = _kernels.transfer_product(
            W1, W2, ctx.p1, ctx.p2, False, 1.0, 0.0, 0.0, 1.0, 1e-8, 1e8
        )
        log_T = log_scale + math.log(
            spectral_norm_2x2(np.array([[a, b], [c, d]]))
        )
        raw = log_r2 / (2.0 * s_N)
        cv = (log_r2 - float(np.sum(Mart))) / (2.0 * s_hat)
        return raw, cv, log_T / s_N

    rows = parallel_map(one, range(M), threads)
    raw = np.array([r[0] for r in rows])
    cv = np.array([r[1] for r in rows])
    prod = np.array([r[2] for r in rows])
    groups = max(int(math.isqrt(M)), 1)
    splits = np.array_split(raw, groups)
    mom = float(np.median([np.mean(g) for g in splits]))
    return LyapunovEstimate(
        beta_hat=float(np.mean(cv)),
        stderr=float(np.std(cv, ddof=1) / math.sqrt(M)) if M > 1 else 0.0,
        N=N,
        M=M,
        s_N=s_N,
        raw_mean=float(np.mean(raw)),
        raw_stderr=float(np.std(raw, ddof=1) / math.sqrt(M)) if M > 1 else 0.0,
        median_of_means=mom,
        product_mean=float(np.mean(prod)),
        product_stderr=float(np.std(prod, ddof=1) / math.sqrt(M)) if M > 1 else 0.0,
        replicas_cv=cv,
        replicas_raw=raw,
    )


@dataclass(frozen=True)
class R4Report:
    """E[R_N^4] growth probe on an energy grid (logs to avoid overflow)."""

    energies: np.ndarray
    checkpoints: np.ndarray
    log_means: np.ndarray  # (n_E, n_checkpoints) log E[R^4]
    growth: np.ndarray  # log E[R^4]_N - log E[R^4]_{N/2} per energy
    growth_se: np.ndarray
    bounded: bool
    envelope_rate: float  # sup over grid of log E[R^4]_N / sum log(1+j^-2a)


def r4_boundedness_probe(params, spec, energies, N, M, seed, threads=1, tol_se=4.0):
    """Monte Carlo E[R_N^4] over an energy grid; flags super-constant growth.

    bounded means the half-to-full growth of log E[R^4] is within tol_se
    standard errors of 0 (plus a small absolute allowance) at every grid
    energy, the signature of the convergent envelope prod(1 + c j^(-2 alpha)).
    """
    from .model import energy_context

    energies = np.asarray(energies, dtype=float)
    cps = np.array([N // 2 - 1, N - 2], dtype=np.int64)  # step indices, N-1 steps total

    def one_energy(E):
        ctx = energy_context(E, params.m)

        def one(replica):
            path = sample_path(params, spec, N, seed, replica=replica)
            out = np.empty(len(cps))
            _kernels.prufer_log_r4_checkpoints(
                np.ascontiguousarray(path.v1[: N - 1]),
                np.ascontiguousarray(path.v2[1:N]),
                ctx.p1,
                ctx.p2,
                ctx.k,
                0.0,
                cps,
                out,
            )
            return out

        logs = np.array(parallel_map(one, range(M), 1))
        lm = np.array([logmeanexp(logs[:, i]) for i in range(len(cps))])
        gen = np.random.Generator(np.random.Philox(key=np.uint64(seed + 77)))
        boots = np.empty(100)
        for bb in range(100):
            idx = gen.integers(0, M, size=M)
            boots[bb] = logmeanexp(logs[idx, 1]) - logmeanexp(logs[idx, 0])
        return lm, float(lm[1] - lm[0]), float(np.std(boots, ddof=1))

    rows = parallel_map(one_energy, energies, threads)
    log_means = np.array([r[0] for r in rows])
    growth = np.array([r[1] for r in rows])
    g_se = np.array([r[2] for r in rows])
    bounded = bool(np.all(growth < tol_se * g_se + 0.05))
    s4 = float(np.sum(np.log1p(np.arange(1, N, dtype=float) ** (-2.0 * params.alpha))))
    return R4Report(
        energies=energies,
        checkpoints=cps + 1,
        log_means=log_means,
        growth=growth,
        growth_se=g_se,
        bounded=bounded,
        envelope_rate=float(np.max(log_means[:, 1]) / s4),
    )
