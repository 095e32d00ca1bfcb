"""Finite-box spectral decompositions, eigenfunction correlators, unitary

evolution, and the transport / localization diagnostics.

Position convention: |X| delta^+-_n = n, so in the interleaved ordering the
weight of matrix index i is i//2 + 1.

The eigenfunction correlator is reported as the s-correlator family

    Q_s(u,sigma; n,sigma'; I) = sum_E |P_E(u,u)|^(1-s) |P_E(u,n)|^s

over eigenprojections P_E with E in I (near-degenerate eigenvalues merged
into one block).  The s = 1 member sum_E |P_E(u,n)| dominates the
sup-over-test-functions correlator and is the quantity the decay bounds
control; no exact supremum is claimed.

Stretched moments <exp(2 |X|^kappa)> overflow float range for kappa near 1,
so they are recorded as logarithms (log-sum-exp over sites).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .disorder import sample_path
from .errors import (
    ConvergenceFailure,
    SubcriticalOnly,
    UnsupportedInitialState,
    WindowEmpty,
)
from .lyapunov import beta_closed_form
from .model import BoxDescriptor, assemble_operator, energy_context, in_band_interior
from .prufer import basis_at, check_excluded_k
from .util import parallel_map
from . import _kernels
from .fits import linear_fit

DEGENERACY_GAP = 1e-10
DIMENSION_CAP = 6000


@dataclass(frozen=True)
class SpectralDecomposition:
    """Sorted eigenvalues with orthonormal eigenvectors of a box operator."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    box: BoxDescriptor

    @property
    def dim(self):
        """Dimension of the underlying space (a windowed decomposition may

        hold fewer eigenpairs than dim)."""
        return self.eigenvectors.shape[0]

    @property
    def count(self):
        return len(self.eigenvalues)

    def positions(self):
        """|X| weights per matrix index."""
        return np.arange(self.dim) // 2 + 1


def diagonalize(op, cap=DIMENSION_CAP):
    """Full symmetric tridiagonal eigendecomposition (LAPACK)."""
    if op.box.dimension > cap:
        raise ValueError("box dimension %d exceeds cap %d" % (op.box.dimension, cap))
    try:
        w, v = scipy.linalg.eigh_tridiagonal(op.diag, op.offdiag)
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return SpectralDecomposition(eigenvalues=w, eigenvectors=v, box=op.box)


def diagonalize_window(op, lo, hi):
    """Eigenpairs with eigenvalue in (lo, hi] (bisection + inverse iteration)."""
    try:
        w, v = scipy.linalg.eigh_tridiagonal(
            op.diag, op.offdiag, select="v", select_range=(lo, hi)
        )
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return SpectralDecomposition(eigenvalues=w, eigenvectors=v, box=op.box)


def _blocks(eigenvalues, gap=DEGENERACY_GAP):
    """Group indices of near-degenerate eigenvalues (gap < DEGENERACY_GAP)."""
    blocks = []
    start = 0
    for i in range(1, len(eigenvalues) + 1):
        if i == len(eigenvalues) or eigenvalues[i] - eigenvalues[i - 1] >= gap:
            blocks.append((start, i))
            start = i
    return blocks


@dataclass(frozen=True)
class CorrelatorTable:
    """s-correlators from one source (u, sigma) to every target index.

    values[s] is a length-dim array aligned with the box ordering.
    """

    box: BoxDescriptor
    u: int
    sigma: str
    interval: tuple
    values: dict

    def at(self, s, n, sigma_p):
        return float(self.values[s][self.box.index_of(n, sigma_p)])

    def tail_sum_sq(self, s, beyond):
        """sum over sites > beyond (both spins) of Q_s^2."""
        q = self.values[s]
        pos = np.arange(len(q)) // 2 + 1
        return float(np.sum(q[pos > beyond] ** 2))


def correlator(decomp, u, sigma, interval=None, s_values=(1.0,)):
    """s-correlator table from source (u, sigma) over eigenvalues in interval.

    interval None means the whole spectrum.  Near-degenerate eigenvalues are
    merged into single projection blocks before taking matrix elements.
    """
    src = decomp.box.index_of(u, sigma)
    w, v = decomp.eigenvalues, decomp.eigenvectors
    out = {s: np.zeros(decomp.dim) for s in s_values}
    for a, b in _blocks(w):
        e_mean = float(np.mean(w[a:b]))
        if interval is not None and not (interval[0] <= e_mean <= interval[1]):
            continue
        block = v[:, a:b]
        row = block @ block[src, :]  # P_E(src, :)
        p_uu = abs(row[src])
        p_un = np.abs(row)
        for s in s_values:
            if s >= 1.0:
                out[s] += p_un
            else:
                out[s] += p_uu ** (1.0 - s) * p_un**s
    return CorrelatorTable(
        box=decomp.box, u=u, sigma=sigma, interval=interval, values=out
    )


def delta_state(box, site, spin):
    psi = np.zeros(box.dimension)
    psi[box.index_of(site, spin)] = 1.0
    return psi


def project_to_window(decomp, psi0, interval):
    """Spectral projection P_I applied to psi0."""
    w, v = decomp.eigenvalues, decomp.eigenvectors
    mask = (w >= interval[0]) & (w <= interval[1])
    amps = v[:, mask].T @ psi0
    return v[:, mask] @ amps


@dataclass(frozen=True)
class Probes:
    """What evolve() should record."""

    moments: tuple = (2,)
    radii: tuple = ()
    kappas: tuple = ()
    truncations: tuple = ()


@dataclass(frozen=True)
class EvolutionTrace:
    """Unitary evolution observables on a time grid.

    moments[p][it] = || |X|^(p/2) psi(t) ||^2; survival[R][it] is the mass
    beyond site R; log_stretched[kappa][it] = log <exp(2 |X|^kappa)>;
    truncated[(p, N)][it] uses |X_N| = |X| chi_{[0,N]}.
    """

    times: np.ndarray
    norms: np.ndarray
    moments: dict
    survival: dict
    log_stretched: dict
    truncated: dict


def evolve(decomp, psi0, times, probes=Probes()):
    """psi(t) = sum_j exp(-i E_j t) <v_j, psi0> v_j with recorded observables."""
    psi0 = np.asarray(psi0, dtype=complex)
    if len(psi0) > decomp.dim:
        if np.any(psi0[decomp.dim :] != 0):
            raise UnsupportedInitialState("psi0 extends beyond the box")
        psi0 = psi0[: decomp.dim]
    if len(psi0) < decomp.dim:
        psi0 = np.pad(psi0, (0, decomp.dim - len(psi0)))
    times = np.asarray(times, dtype=float)
    w, v = decomp.eigenvalues, decomp.eigenvectors
    amps = v.T @ psi0
    pos = decomp.positions().astype(float)
    moments = {p: np.empty(len(times)) for p in probes.moments}
    survival = {R: np.empty(len(times)) for R in probes.radii}
    stretched = {kp: np.empty(len(times)) for kp in probes.kappas}
    truncated = {
        (p, N): np.empty(len(times)) for p in probes.moments for N in probes.truncations
    }
    norms = np.empty(len(times))
    for it, t in enumerate(times):
        psi = v @ (np.exp(-1j * w * t) * amps)
        dens = np.abs(psi) ** 2
        norms[it] = math.sqrt(float(np.sum(dens)))
        for p in probes.moments:
            moments[p][it] = float(np.sum(pos**p * dens))
            for N in probes.truncations:
                truncated[(p, N)][it] = float(np.sum((pos**p * dens)[pos <= N]))
        for R in probes.radii:
            survival[R][it] = float(np.sum(dens[pos > R]))
        for kp in probes.kappas:
            expo = 2.0 * pos**kp + np.log(np.maximum(dens, 1e-320))
            mx = np.max(expo)
            stretched[kp][it] = mx + math.log(float(np.sum(np.exp(expo - mx))))
    return EvolutionTrace(
        times=times,
        norms=norms,
        moments=moments,
        survival=survival,
        log_stretched=stretched,
        truncated=truncated,
    )


def time_averaged_truncated_moment(decomp, psi0, p, N_grid, interval=None):
    """Infinite-time average of || |X_N|^(p/2) exp(-itD) psi ||^2 per N.

    Equals sum_l |a_l|^2 || |X_N|^(p/2) v_l ||^2 (the diagonal limit of the
    Cesaro mean for simple spectrum).
    """
    psi0 = np.asarray(psi0, dtype=complex)
    w, v = decomp.eigenvalues, decomp.eigenvectors
    if interval is not None:
        mask = (w >= interval[0]) & (w <= interval[1])
        w, v = w[mask], v[:, mask]
    amps = np.abs(v.T.conj() @ psi0) ** 2
    pos = decomp.positions().astype(float)
    out = np.empty(len(N_grid))
    for i, N in enumerate(N_grid):
        weights = np.where(pos <= N, pos**p, 0.0)
        out[i] = float(amps @ (weights @ (v**2)))
    return np.asarray(out)


@dataclass(frozen=True)
class StretchedProbeReport:
    """Blow-up classification of <exp(2|X|^kappa)> per kappa."""

    kappas: np.ndarray
    sup_horizon: np.ndarray  # log sup over [0, T]
    sup_doubled: np.ndarray  # log sup over [0, 2T]
    sup_box_doubled: np.ndarray  # log sup over [0, 2T] on the doubled box
    classification: list


def stretched_moment_probe(
    decomp, psi0, kappa_grid, horizon, decomp_doubled=None, psi0_doubled=None,
    n_times=160, interval=None, tol=0.2,
):
    """sup_t of the stretched moment under horizon and box doubling.

    bounded: flat under both doublings; growing: still rising in time;
    box-limited: time-saturated but capped by the box (the sup rises when the
    box doubles).
    """
    kappas = np.asarray(kappa_grid, dtype=float)
    if interval is not None:
        psi0 = project_to_window(decomp, np.asarray(psi0, dtype=complex), interval)
        if psi0_doubled is not None and decomp_doubled is not None:
            psi0_doubled = project_to_window(decomp_doubled, psi0_doubled, interval)
    t1 = np.linspace(0.0, horizon, n_times)
    t2 = np.linspace(0.0, 2.0 * horizon, 2 * n_times)
    pr = Probes(moments=(), kappas=tuple(kappas))
    tr1 = evolve(decomp, psi0, t1, pr)
    tr2 = evolve(decomp, psi0, t2, pr)
    sup1 = np.array([np.max(tr1.log_stretched[kp]) for kp in kappas])
    sup2 = np.array([np.max(tr2.log_stretched[kp]) for kp in kappas])
    if decomp_doubled is not None:
        trb = evolve(decomp_doubled, psi0_doubled, t2, pr)
        supb = np.array([np.max(trb.log_stretched[kp]) for kp in kappas])
    else:
        supb = sup2.copy()
    labels = []
    for i in range(len(kappas)):
        time_growth = sup2[i] - sup1[i]
        box_growth = supb[i] - sup2[i]
        if time_growth > tol:
            labels.append("growing")
        elif box_growth > tol:
            labels.append("box-limited")
        else:
            labels.append("bounded")
    return StretchedProbeReport(
        kappas=kappas,
        sup_horizon=sup1,
        sup_doubled=sup2,
        sup_box_doubled=supb,
        classification=labels,
    )


@dataclass(frozen=True)
class ProfileRow:
    seed: int
    E: float
    beta: float
    slope: float
    ratio_err: float  # |slope/beta + 1|
    r2: float
    center: int
    stretch_slope: float  # vs n^(1-2 alpha)


@dataclass(frozen=True)
class ProfileReport:
    rows: list
    median_ratio_err: float
    L: int
    window: tuple


def eigenfunction_profile(
    params, spec, window, L, seeds, threads=1, s_gap=2.0, min_s_span=None,
    floor=1e-13, boundary_buffer=100,
):
    """Decay fits of in-window box eigenfunctions against s_n and n^(1-2a).

    For each eigenpair with E_j in the window: ||Phi_n|| profile, least
    squares slope of log ||Phi_n|| vs s_n = sum_{j<=n} j^(-2 alpha) over the
    decaying tail, compared to -beta(E_j, lambda).  The tail starts s_gap
    units of s past the localization center (clears the shoulder), stops at
    the relative floor or boundary_buffer sites before the wall, and must
    span at least min_s_span in s; shorter tails are not in the asymptotic
    regime at this box size and are skipped.
    """
    if params.alpha >= 0.5:
        raise SubcriticalOnly("eigenfunction decay fits need alpha < 1/2")
    lo, hi = window
    if not (in_band_interior(lo, params.m) and in_band_interior(hi, params.m)):
        raise ValueError("window must sit inside the band interior")
    box = BoxDescriptor("LambdaPrime", L)
    sn = np.cumsum(np.arange(1, L + 1, dtype=float) ** (-2.0 * params.alpha))
    stretch = np.arange(1, L + 1, dtype=float) ** (1.0 - 2.0 * params.alpha)
    if min_s_span is None:
        min_s_span = max(4.0, min(16.0, 0.5 * float(sn[-1])))
    boundary_buffer = min(boundary_buffer, max(L // 20, 2))

    def one(seed):
        path = sample_path(params, spec, L, seed)
        dec = diagonalize_window(assemble_operator(params, path, box), lo, hi)
        rows = []
        for j in range(dec.count):
            E_j = float(dec.eigenvalues[j])
            vec = dec.eigenvectors[:, j]
            norms = np.sqrt(vec[0::2] ** 2 + vec[1::2] ** 2)
            center = int(np.argmax(norms)) + 1
            start = int(np.searchsorted(sn, sn[center - 1] + s_gap))
            good = np.where(norms > norms.max() * floor)[0]
            end = min(int(good[-1]) + 1 if len(good) else 0, L - boundary_buffer)
            if end <= start or sn[end - 1] - sn[start] < min_s_span:
                continue
            y = np.log(norms[start:end])
            slope, _, r2, _ = linear_fit(sn[start:end], y)
            st_slope, _, _, _ = linear_fit(stretch[start:end], y)
            beta = beta_closed_form(energy_context(abs(E_j), params.m), params.lam)
            # lam = 0 has beta = 0 (no decay); report the raw slope then
            err = abs(slope / beta + 1.0) if beta > 0 else abs(slope)
            rows.append(
                ProfileRow(
                    seed=seed,
                    E=E_j,
                    beta=beta,
                    slope=slope,
                    ratio_err=err,
                    r2=r2,
                    center=center,
                    stretch_slope=st_slope,
                )
            )
        return rows

    all_rows = [r for rows in parallel_map(one, seeds, threads) for r in rows]
    if not all_rows:
        raise WindowEmpty("no usable eigenpairs in window %s" % (window,))
    med = float(np.median([r.ratio_err for r in all_rows]))
    return ProfileReport(rows=all_rows, median_ratio_err=med, L=L, window=window)


@dataclass(frozen=True)
class RnReport:
    """Convergence diagnostic for r_n = R_n^(1)/R_n^(2) and the Wronskian."""

    checkpoints: np.ndarray
    log_ratio: np.ndarray
    wronskian: np.ndarray
    max_wronskian_err: float
    tail_oscillation: float  # sup |log r_i - log r_j| over the second half


def rn_ratio_diagnostic(ctx, path, N, n_checkpoints=256):
    """Two coupled recursions from Phi_1 = (1,0) and (0,1).

    The fundamental-system determinant R1 R2 sin(2k) sin(theta1 - theta2)
    must stay at its initial value 1; the Cauchy tail oscillation of log r_n
    over [N/2, N] measures the convergence r_n -> r_inf.
    """
    if path.params.alpha > 0.5:
        raise SubcriticalOnly("r_n diagnostic is for alpha <= 1/2")
    check_excluded_k(ctx)
    P1 = basis_at(ctx, 1).entries
    psi1 = np.linalg.solve(P1, np.array([1.0, 0.0]))
    psi2 = np.linalg.solve(P1, np.array([0.0, 1.0]))
    cps = np.unique(
        np.concatenate(
            [
                np.geomspace(1, N - 1, n_checkpoints).astype(np.int64) - 1,
                [N - 2],
            ]
        )
    )
    cps = cps[cps >= 0]
    out_ratio = np.empty(len(cps))
    out_w = np.empty(len(cps))
    W1 = np.ascontiguousarray(path.v1[: N - 1])
    W2 = np.ascontiguousarray(path.v2[1:N])
    _, _, _, _, max_err = _kernels.prufer_pair_wronskian(
        W1, W2, ctx.p1, ctx.p2, ctx.k,
        psi1[0], psi1[1], psi2[0], psi2[1], cps, out_ratio, out_w,
    )
    sites = cps + 2  # state after step j is at site j + 2
    tail = out_ratio[sites >= N // 2]
    osc = float(np.max(tail) - np.min(tail)) if len(tail) > 1 else 0.0
    return RnReport(
        checkpoints=sites,
        log_ratio=out_ratio,
        wronskian=out_w,
        max_wronskian_err=float(max_err),
        tail_oscillation=osc,
    )
