"""Rotating-frame (Pruefer) transform: change-of-basis matrices, the complex

radius/phase recursion, and the drift / martingale / phase-sum decomposition
of log R^2.

In the frame of the free transfer matrix the disordered step becomes a
perturbation of the identity.  Writing Phi_n = P_n Psi_n and
zeta_n = psi^+_n + i psi^-_n = R_n exp(i theta_n), the step multiplies zeta
by a complex factor built from theta_bar_n = theta_n - (2n-1)k:

first system (consumes V1(n), V2(n+1)):

    mu = 1 - (i p2 / sin 2k) V1 cos(tb) e^{-i tb}
           + (i p1 / sin 2k) V2 cos(tb - k) e^{-i (tb - k)}
           + (i / sin k) V1 V2 cos(tb) e^{-i (tb - k)}

second system (consumes V1(n), V2(n)): the V1 term carries cos(tb - k)
e^{-i(tb-k)} and the V2 term cos(tb) e^{-i tb}.

Phases are stored unwrapped (no mod 2pi) so that rotation-number diagnostics
remain meaningful; with V = 0, theta is constant and theta_bar decreases by
exactly 2k per step.

The decomposition of log R_n^2 splits each step's log(1 + Gamma) into the
deterministic drift (p2^2 E[V1^2] + p1^2 E[V2^2]) / (4 sin^2 2k), six
zero-mean martingale sums, two oscillatory phase sums Q1, Q2 carrying the
cos(2 theta_bar) / cos(4 theta_bar) weights, and a cubic remainder.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DegenerateMultiplier, ExcludedK, NearBandEdge, SiteOutOfRange
from .model import SIN2K_GUARD

EXCLUDED_K = (-5.0 * math.pi / 8.0, -3.0 * math.pi / 4.0, -7.0 * math.pi / 8.0)
EXCLUDED_K_GUARD = 1e-3
MULTIPLIER_FLOOR = 1e-14


def check_band_edge(ctx):
    if ctx.sin2k < SIN2K_GUARD:
        raise NearBandEdge("sin(2k)=%.3e below guard %.0e" % (ctx.sin2k, SIN2K_GUARD))


def check_excluded_k(ctx, guard=EXCLUDED_K_GUARD):
    for k0 in EXCLUDED_K:
        if abs(ctx.k - k0) < guard:
            raise ExcludedK(
                "k=%.6f within %g of excluded value %.6f" % (ctx.k, guard, k0)
            )


@dataclass(frozen=True)
class PruferState:
    """Log-scaled radius and unwrapped phase at site n."""

    log_r: float
    theta: float
    n: int
    system: str = "first"

    def theta_bar(self, ctx):
        return self.theta - (2 * self.n - 1) * ctx.k


@dataclass(frozen=True)
class BasisMatrix:
    entries: np.ndarray
    n: int
    system: str

    @property
    def det(self):
        e = self.entries
        return e[0, 0] * e[1, 1] - e[0, 1] * e[1, 0]


def basis_at(ctx, n, system="first"):
    """Change-of-basis matrix P_n (or P'_n for the second system).

    det P_n = -sin 2k; det P'_n = +sin 2k.  Both satisfy P_{n+1} = T P_n with
    the respective free transfer matrix.
    """
    check_band_edge(ctx)
    sign = -1.0 if (n - 1) % 2 else 1.0
    rp2 = math.sqrt(ctx.p2)
    rp1 = math.sqrt(-ctx.p1)
    c1, s1 = math.cos((2 * n - 1) * ctx.k), math.sin((2 * n - 1) * ctx.k)
    c0, s0 = math.cos((2 * n - 2) * ctx.k), math.sin((2 * n - 2) * ctx.k)
    if system == "first":
        entries = sign * np.array([[-rp2 * c1, -rp2 * s1], [rp1 * c0, rp1 * s0]])
    elif system == "second":
        entries = sign * np.array([[rp1 * c1, rp1 * s1], [rp2 * c0, rp2 * s0]])
    else:
        raise ValueError("system must be 'first' or 'second'")
    return BasisMatrix(entries=entries, n=n, system=system)


def prufer_multiplier(ctx, theta_bar, V1, V2, system="first"):
    """Complex step factor mu with zeta_{n+1} = mu * zeta_n."""
    s2k, sk, k = ctx.sin2k, math.sin(ctx.k), ctx.k
    tb = theta_bar
    if system == "first":
        return (
            1.0
            - 1j * ctx.p2 / s2k * V1 * math.cos(tb) * cmath.exp(-1j * tb)
            + 1j * ctx.p1 / s2k * V2 * math.cos(tb - k) * cmath.exp(-1j * (tb - k))
            + 1j / sk * V1 * V2 * math.cos(tb) * cmath.exp(-1j * (tb - k))
        )
    if system == "second":
        return (
            1.0
            - 1j * ctx.p2 / s2k * V1 * math.cos(tb - k) * cmath.exp(-1j * (tb - k))
            + 1j * ctx.p1 / s2k * V2 * math.cos(tb) * cmath.exp(-1j * tb)
            + 1j / sk * V1 * V2 * math.cos(tb) * cmath.exp(-1j * (tb - k))
        )
    raise ValueError("system must be 'first' or 'second'")


def _step_disorder(path, n, system):
    if system == "first":
        if not (1 <= n < len(path)):
            raise SiteOutOfRange(
                "first-system step at %d needs site %d in path of length %d"
                % (n, n + 1, len(path))
            )
        return path.v1_at(n), path.v2_at(n + 1)
    if not (1 <= n <= len(path)):
        raise SiteOutOfRange("site %d outside path of length %d" % (n, len(path)))
    return path.v1_at(n), path.v2_at(n)


def prufer_step(state, ctx, path, system=None):
    """One recursion step; reads the state strictly before the disorder draw

    it consumes (the phase entering mu is F_{n-1}-measurable)."""
    check_band_edge(ctx)
    system = system or state.system
    tb = state.theta_bar(ctx)
    V1, V2 = _step_disorder(path, state.n, system)
    mu = prufer_multiplier(ctx, tb, V1, V2, system)
    am = abs(mu)
    if am < MULTIPLIER_FLOOR:
        raise DegenerateMultiplier(
            "|multiplier| = %.3e at site %d (near-singular draw)" % (am, state.n)
        )
    return PruferState(
        log_r=state.log_r + math.log(am),
        theta=state.theta + cmath.phase(mu),
        n=state.n + 1,
        system=system,
    )


@dataclass(frozen=True)
class PruferTrajectory:
    """Recorded trajectory: arrays indexed by site n = 1..N."""

    n: np.ndarray
    log_r: np.ndarray
    theta: np.ndarray
    k: float
    system: str

    @property
    def theta_bar(self):
        return self.theta - (2 * self.n - 1) * self.k

    def final_state(self):
        return PruferState(
            log_r=float(self.log_r[-1]),
            theta=float(self.theta[-1]),
            n=int(self.n[-1]),
            system=self.system,
        )

    def to_csv(self, stream):
        close = False
        if isinstance(stream, str):
            stream = open(stream, "w", newline="")
            close = True
        try:
            stream.write("n,log_r,theta,theta_bar\n")
            tbar = self.theta_bar
            for i in range(len(self.n)):
                stream.write(
                    "%d,%r,%r,%r\n" % (self.n[i], self.log_r[i], self.theta[i], tbar[i])
                )
        finally:
            if close:
                stream.close()


def _sweep_arrays(ctx, path, N, system):
    if system == "first":
        if N > len(path):
            raise SiteOutOfRange("N=%d exceeds path length - 1 = %d" % (N, len(path) - 1))
        W1 = path.v1[: N - 1]
        W2 = path.v2[1:N]
    else:
        W1 = path.v1[: N - 1]
        W2 = path.v2[: N - 1]
    return (
        np.ascontiguousarray(W1, dtype=float),
        np.ascontiguousarray(W2, dtype=float),
    )


def run_prufer(ctx, path, N, theta0=0.0, system="first", record=True, log_r0=0.0):
    """Trajectory of (log R, theta) from Psi_1 = exp(i theta0), sites 1..N.

    record=False runs in O(1) memory and returns only the final PruferState.
    """
    check_band_edge(ctx)
    if N < 1:
        raise ValueError("N must be >= 1")
    if system == "first" and N > len(path):
        raise SiteOutOfRange("N=%d needs path length >= N" % N)
    W1, W2 = _sweep_arrays(ctx, path, N, system)
    if record:
        rec_lr = np.empty(N - 1)
        rec_th = np.empty(N - 1)
    else:
        rec_lr = np.empty(0)
        rec_th = np.empty(0)
    log_r, theta, min_abs = _kernels.prufer_sweep(
        W1, W2, ctx.p1, ctx.p2, ctx.k, system == "second", log_r0, theta0, rec_lr, rec_th
    )
    if min_abs < MULTIPLIER_FLOOR:
        raise DegenerateMultiplier("|multiplier| reached %.3e" % min_abs)
    if not record:
        return PruferState(log_r=float(log_r), theta=float(theta), n=N, system=system)
    return PruferTrajectory(
        n=np.arange(1, N + 1),
        log_r=np.concatenate(([log_r0], rec_lr)),
        theta=np.concatenate(([theta0], rec_th)),
        k=ctx.k,
        system=system,
    )


@dataclass(frozen=True)
class MartingaleReport:
    """Term-wise split of log R_N^2 (first system).

    residual = log_r2 - drift - sum(M) - Q1 - Q2 equals the cubic remainder
    sum_j K(j) exactly; kappa_abs_sum = sum_j |K(j)| and residual_bound is
    the per-step analytic cubic bound (log-expansion tail plus the dropped
    order >= 3 monomials), so |residual| <= kappa_abs_sum <= residual_bound
    up to rounding.  gamma3_sum = sum_j |Gamma(j)|^3 for scale comparison.
    """

    N: int
    log_r2: float
    drift: float
    martingales: np.ndarray
    Q1: float
    Q2: float
    residual: float
    kappa_abs_sum: float
    residual_bound: float
    gamma3_sum: float
    max_abs_gamma: float
    s_n: float

    def normalized_martingales(self):
        return self.martingales / self.s_n

    def normalized_phase_sums(self):
        return np.array([self.Q1, self.Q2]) / self.s_n


def martingale_diagnostics(ctx, path, N, theta0=0.0):
    """Decompose log R_N^2 into drift + martingales + phase sums + remainder.

    Uses the analytic second moments (lambda a_n)^2 in the drift, per the
    normalization of the disorder families.
    """
    check_band_edge(ctx)
    check_excluded_k(ctx)
    W1, W2 = _sweep_arrays(ctx, path, N, "first")
    params = path.params
    sites = np.arange(1, N, dtype=float)
    ev1 = (params.lam * params.a(sites)) ** 2
    ev2 = (params.lam * params.a(sites + 1)) ** 2
    log_r2, drift, M, Q1, Q2, kappa_abs, kappa_bound, gamma3, max_gamma = (
        _kernels.prufer_decomposition(W1, W2, ev1, ev2, ctx.p1, ctx.p2, ctx.k, theta0)
    )
    resid = log_r2 - drift - float(np.sum(M)) - Q1 - Q2
    s_n = float(np.sum(np.arange(1, N + 1, dtype=float) ** (-2.0 * params.alpha)))
    return MartingaleReport(
        N=N,
        log_r2=float(log_r2),
        drift=float(drift),
        martingales=np.asarray(M),
        Q1=float(Q1),
        Q2=float(Q2),
        residual=float(resid),
        kappa_abs_sum=float(kappa_abs),
        residual_bound=float(kappa_bound),
        gamma3_sum=float(gamma3),
        max_abs_gamma=float(max_gamma),
        s_n=s_n,
    )
