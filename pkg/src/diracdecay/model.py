"""Operator model, band parametrization and finite-box assembly.

Conventions
-----------
Hilbert space l2(N*, C^2) with canonical vectors delta^+_n, delta^-_n.
The free operator is

    D = [[ m,  d ],
         [ d*, -m ]],   (d u)_n = u_n - u_{n+1},  (d* u)_n = u_n - u_{n-1},

with the boundary convention u_0 = 0.  The random potential acts diagonally:
V delta^+_n = V1(n) delta^+_n, V delta^-_n = V2(n) delta^-_n.

Interleaved ordering delta^-_n -> 2n, delta^+_n -> 2n+1 (0-based within a box:
delta^-_1, delta^+_1, delta^-_2, ...) renders D + V as a real symmetric
tridiagonal matrix with diagonal entries -m+V2(n) / m+V1(n) and off-diagonal
entries alternating +1 (delta^-_n <-> delta^+_n) and -1
(delta^+_n <-> delta^-_{n+1}).

Band parametrization: for E in the open positive band (m, sqrt(m^2+4)) set
p1 = m - E < 0, p2 = m + E > 0 and pick the quasimomentum k in (-pi, -pi/2)
through cos k = -sqrt(-p1 p2)/2 (so sin k < 0 and sin 2k > 0).  Then
E^2 = m^2 + 4 cos^2 k and sin(2k) = sqrt((E^2-m^2)(m^2+4-E^2))/2 vanishes
exactly at the four band edges.  Rotating-frame formulas divide by sin(2k);
they refuse to run below the band-edge guard SIN2K_GUARD.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import EnergyOutOfBand, NearBandEdgeWarning, PathTooShort

SIN2K_GUARD = 1e-6


@dataclass(frozen=True)
class ModelParams:
    """Mass, coupling and envelope decay exponent.

    The default envelope is a_n = n^(-alpha), so that n^alpha a_n -> 1.
    lam = 0 is allowed as the free-system limit.
    """

    m: float
    lam: float
    alpha: float
    envelope: str = "power"

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("mass m must be >= 0")
        if self.lam < 0:
            raise ValueError("coupling lambda must be >= 0")
        if self.alpha <= 0:
            raise ValueError("decay exponent alpha must be > 0")
        if self.envelope != "power":
            raise ValueError("unknown envelope spec %r" % (self.envelope,))

    def a(self, n):
        """Envelope a_n, vectorized over 1-based site indices."""
        return np.asarray(n, dtype=float) ** (-self.alpha)


@dataclass(frozen=True)
class EnergyContext:
    """Energy with its derived band parameters; the chart for all

    rotating-frame analytics.  Only the positive band is parametrized."""

    E: float
    m: float
    k: float
    p1: float
    p2: float
    sin2k: float
    cosk: float


def energy_context(E, m):
    """Band parameters (k, p1, p2, sin 2k) for E strictly inside (m, sqrt(m^2+4)).

    k is the branch in (-pi, -pi/2) with cos k < 0 and sin k < 0.  Warns
    (NearBandEdgeWarning) when sin(2k) < SIN2K_GUARD.
    """
    top = math.sqrt(m * m + 4.0)
    if not (m < E < top):
        raise EnergyOutOfBand(
            "E=%g outside the open positive band (%g, %g)" % (E, m, top)
        )
    p1 = m - E
    p2 = m + E
    k = -math.pi + math.acos(math.sqrt(-p1 * p2) / 2.0)
    sin2k = math.sin(2.0 * k)
    if sin2k < SIN2K_GUARD:
        warnings.warn(
            "sin(2k)=%.3e below guard %.0e: band-edge degeneracy" % (sin2k, SIN2K_GUARD),
            NearBandEdgeWarning,
            stacklevel=2,
        )
    return EnergyContext(E=E, m=m, k=k, p1=p1, p2=p2, sin2k=sin2k, cosk=math.cos(k))


def band_edges(m):
    """The four spectral edges (-sqrt(m^2+4), -m, m, sqrt(m^2+4))."""
    top = math.sqrt(m * m + 4.0)
    return (-top, -m, m, top)


@dataclass(frozen=True)
class SpectralWindow:
    """Free-operator spectrum Sigma = [-sqrt(m^2+4), -m] u [m, sqrt(m^2+4)]."""

    m: float
    edges: tuple = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "edges", band_edges(self.m))

    def in_interior(self, E):
        return in_band_interior(E, self.m)


def in_band_interior(E, m):
    """True iff |E| lies strictly between m and sqrt(m^2+4)."""
    return m < abs(E) < math.sqrt(m * m + 4.0)


@dataclass(frozen=True)
class BoxDescriptor:
    """Finite box: kind "Lambda" keeps (u,+) for u <= l-1 and (u,-) for u <= l

    (dimension 2l-1); kind "LambdaPrime" keeps (u,+-) for u <= l (dimension 2l)."""

    kind: str
    l: int

    def __post_init__(self):
        if self.kind not in ("Lambda", "LambdaPrime"):
            raise ValueError("box kind must be 'Lambda' or 'LambdaPrime'")
        if self.l < 1:
            raise ValueError("box size index l must be >= 1")

    @property
    def dimension(self):
        return 2 * self.l - 1 if self.kind == "Lambda" else 2 * self.l

    def contains(self, site, spin):
        """Membership of (site, spin) with spin in {'+', '-'}."""
        if spin not in ("+", "-"):
            raise ValueError("spin must be '+' or '-'")
        if site < 1:
            return False
        if spin == "-":
            return site <= self.l
        return site <= (self.l - 1 if self.kind == "Lambda" else self.l)

    def index_of(self, site, spin):
        """0-based index in the interleaved ordering delta^-_1, delta^+_1, ..."""
        if not self.contains(site, spin):
            raise IndexError("(%d, %s) not in %s_%d" % (site, spin, self.kind, self.l))
        return 2 * (site - 1) + (1 if spin == "+" else 0)

    def sites(self):
        """Ordered (site, spin) pairs matching the matrix indexing."""
        out = []
        for i in range(self.dimension):
            out.append((i // 2 + 1, "+" if i % 2 else "-"))
        return out


@dataclass(frozen=True)
class TridiagonalOperator:
    """Finite-box operator as real symmetric tridiagonal (diag, offdiag)."""

    diag: np.ndarray
    offdiag: np.ndarray
    box: BoxDescriptor

    def to_dense(self):
        A = np.diag(self.diag)
        A += np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)
        return A

    def norm_bound(self, m):
        """Operator-norm bound sqrt(m^2+4) + max_n |V_i(n)| (free norm plus

        sup of the diagonal perturbation)."""
        signs = np.where(np.arange(self.diag.size) % 2 == 0, 1.0, -1.0)
        v = self.diag + signs * m
        vmax = float(np.max(np.abs(v))) if v.size else 0.0
        return math.sqrt(m * m + 4.0) + vmax


def assemble_operator(params, path, box):
    """Restriction P D P of the full operator to the box, in interleaved ordering.

    Row (n,+) carries diagonal m + V1(n) with couplings +1 to (n,-) and -1 to
    (n+1,-); row (n,-) carries diagonal -m + V2(n).  Entries whose partner
    falls outside the box are dropped.
    """
    if len(path.v1) < box.l or len(path.v2) < box.l:
        raise PathTooShort(
            "path of length %d cannot fill %s_%d" % (len(path.v1), box.kind, box.l)
        )
    dim = box.dimension
    m = params.m
    diag = np.empty(dim)
    for i in range(dim):
        site = i // 2  # 0-based
        if i % 2 == 0:
            diag[i] = -m + path.v2[site]
        else:
            diag[i] = m + path.v1[site]
    offdiag = np.empty(dim - 1)
    offdiag[0::2] = 1.0
    offdiag[1::2] = -1.0
    return TridiagonalOperator(diag=diag, offdiag=offdiag, box=box)
