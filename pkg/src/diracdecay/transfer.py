"""Transfer matrices in both coordinate systems and overflow-safe products.

First system propagates Phi_n = (phi^+_n, phi^-_n):

    Phi_{n+1} = T_n Phi_n,   T_n = [[p_{n,1} p_{n+1,2} + 1, p_{n+1,2}],
                                    [p_{n,1},               1       ]],

with p_{n,1} = p1 + V1(n) and p_{n+1,2} = p2 - V2(n+1).

Second system propagates S_n = (phi^-_n, phi^+_{n-1}) (so S_1 = (phi^-_1, 0)
encodes the boundary condition):

    S_{n+1} = T'_n S_n,   T'_n = [[p_{n,1} p_{n,2} + 1, p_{n,1}],
                                  [p_{n,2},             1      ]],

consuming V1(n) and V2(n).  After the step, S_{n+1} = (phi^-_{n+1}, phi^+_n)
holds the same solution as the first system, shifted.

Both matrices are unimodular.  Products over [u, n] multiply the factors at
sites u..n-1 (n - u factors, mapping the state at u to the state at n) and
renormalize whenever the running Frobenius norm leaves [1e-8, 1e8].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import SiteOutOfRange

RESCALE_LO = 1e-8
RESCALE_HI = 1e8


@dataclass(frozen=True)
class TransferMatrix:
    entries: np.ndarray
    system: str
    n: int

    @property
    def det(self):
        e = self.entries
        return e[0, 0] * e[1, 1] - e[0, 1] * e[1, 0]


@dataclass(frozen=True)
class ScaledProduct:
    """Product split as exp(log_scale) * unit with unit of moderate norm."""

    unit: np.ndarray
    log_scale: float
    range: tuple
    system: str

    def log_norm(self):
        """log of the spectral norm of the full product."""
        return self.log_scale + math.log(spectral_norm_2x2(self.unit))

    def log_apply_norm(self, phi0):
        """log || product @ phi0 ||."""
        v = self.unit @ np.asarray(phi0, dtype=float)
        return self.log_scale + 0.5 * math.log(float(v @ v))


def _check_system(system):
    if system not in ("first", "second"):
        raise ValueError("system must be 'first' or 'second'")


def free_transfer(ctx, system="first"):
    """Zero-disorder transfer matrix; eigenvalues -exp(+-2ik)."""
    _check_system(system)
    p1, p2 = ctx.p1, ctx.p2
    if system == "first":
        return np.array([[p1 * p2 + 1.0, p2], [p1, 1.0]])
    return np.array([[p1 * p2 + 1.0, p1], [p2, 1.0]])


def decomposition_matrices(ctx, system="first"):
    """(A1, A2, A3) with T_n = T + V1 A1 + V2 A2 + V1 V2 A3.

    V2 refers to V2(n+1) in the first system and V2(n) in the second.
    """
    _check_system(system)
    p1, p2 = ctx.p1, ctx.p2
    if system == "first":
        A1 = np.array([[p2, 0.0], [1.0, 0.0]])
        A2 = np.array([[-p1, -1.0], [0.0, 0.0]])
    else:
        A1 = np.array([[p2, 1.0], [0.0, 0.0]])
        A2 = np.array([[-p1, 0.0], [-1.0, 0.0]])
    A3 = np.array([[-1.0, 0.0], [0.0, 0.0]])
    return A1, A2, A3


def _disorder_at(path, n, system):
    if system == "first":
        if not (1 <= n < len(path)):
            raise SiteOutOfRange(
                "first-system step at %d needs sites %d and %d in path of length %d"
                % (n, n, n + 1, len(path))
            )
        return path.v1_at(n), path.v2_at(n + 1)
    if not (1 <= n <= len(path)):
        raise SiteOutOfRange("site %d outside path of length %d" % (n, len(path)))
    return path.v1_at(n), path.v2_at(n)


def transfer_at(ctx, path, n, system="first"):
    """Disordered transfer matrix at site n."""
    _check_system(system)
    V1, V2 = _disorder_at(path, n, system)
    q1 = ctx.p1 + V1
    q2 = ctx.p2 - V2
    if system == "first":
        entries = np.array([[q1 * q2 + 1.0, q2], [q1, 1.0]])
    else:
        entries = np.array([[q1 * q2 + 1.0, q1], [q2, 1.0]])
    return TransferMatrix(entries=entries, system=system, n=n)


def _disorder_slices(path, u, n, system):
    """W1[j], W2[j] consumed by the steps at sites u..n-1."""
    if system == "first":
        if u < 1 or n > len(path):
            raise SiteOutOfRange("range [%d, %d] outside path" % (u, n))
        return path.v1[u - 1 : n - 1], path.v2[u : n]
    if u < 1 or n - 1 > len(path):
        raise SiteOutOfRange("range [%d, %d] outside path" % (u, n))
    return path.v1[u - 1 : n - 1], path.v2[u - 1 : n - 1]


def product(ctx, path, rng, system="first", rescale_lo=RESCALE_LO,
            rescale_hi=RESCALE_HI):
    """Scaled product of transfer matrices over rng = (u, n), sites u..n-1.

    Tighter rescale bounds keep the unit factor's determinant representable
    (useful for unimodularity checks); the defaults favour speed.
    """
    _check_system(system)
    u, n = rng
    if n < u:
        raise ValueError("range must satisfy u <= n")
    W1, W2 = _disorder_slices(path, u, n, system)
    a, b, c, d, log_scale = _kernels.transfer_product(
        np.ascontiguousarray(W1, dtype=float),
        np.ascontiguousarray(W2, dtype=float),
        ctx.p1,
        ctx.p2,
        system == "second",
        1.0,
        0.0,
        0.0,
        1.0,
        rescale_lo,
        rescale_hi,
    )
    return ScaledProduct(
        unit=np.array([[a, b], [c, d]]),
        log_scale=float(log_scale),
        range=(u, n),
        system=system,
    )


def spectral_norm_2x2(M):
    """Largest singular value from the closed form for 2x2 matrices."""
    a, b, c, d = M[0, 0], M[0, 1], M[1, 0], M[1, 1]
    f = a * a + b * b + c * c + d * d
    det = a * d - b * c
    disc = max(f * f - 4.0 * det * det, 0.0)
    return math.sqrt((f + math.sqrt(disc)) / 2.0)


def angle_vector(theta):
    return np.array([math.cos(theta), math.sin(theta)])


def two_angle_bracket_matrix(M, theta1=0.0, theta2=math.pi / 4):
    """(lower, upper) bracket of ||M|| for unimodular M from two test angles:

    max_i ||M theta_i|| <= ||M|| <= sin(|t1-t2|/2)^(-1) max_i ||M theta_i||.
    """
    if theta1 == theta2 or abs(theta1 - theta2) > math.pi / 2:
        raise ValueError("angles must differ and satisfy |t1 - t2| <= pi/2")
    m1 = float(np.linalg.norm(M @ angle_vector(theta1)))
    m2 = float(np.linalg.norm(M @ angle_vector(theta2)))
    lo = max(m1, m2)
    return lo, lo / math.sin(abs(theta1 - theta2) / 2.0)


def norm_from_two_angles(ctx, path, rng, theta1=0.0, theta2=math.pi / 4, system="first"):
    """Two-angle bracket of the product norm over rng, in log scale.

    Returns (log_lower, log_upper) with log_lower <= log ||product|| <= log_upper.
    """
    if theta1 == theta2 or abs(theta1 - theta2) > math.pi / 2:
        raise ValueError("angles must differ and satisfy |t1 - t2| <= pi/2")
    u, n = rng
    W1, W2 = _disorder_slices(path, u, n, system)
    W1 = np.ascontiguousarray(W1, dtype=float)
    W2 = np.ascontiguousarray(W2, dtype=float)
    empty = np.empty(0, dtype=np.int64)
    out = np.empty(0)
    logs = []
    for th in (theta1, theta2):
        v = angle_vector(th)
        logs.append(
            _kernels.transfer_vector_lognorms(
                W1, W2, ctx.p1, ctx.p2, system == "second", v[0], v[1], empty, out
            )
        )
    lo = max(logs)
    return lo, lo - math.log(math.sin(abs(theta1 - theta2) / 2.0))
