"""JIT-compiled inner loops (numba, with a pure-Python fallback).

All kernels take plain float arrays; W1[j] = V1(j+1) and W2[j] is the second
disorder variable consumed at step j+1 (V2(j+2) for the first system, V2(j+1)
for the second).  Site recursions are inherently sequential; parallelism
lives one level up, across replicas and energies.
"""

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


@njit(cache=True, nogil=True)
def prufer_sweep(W1, W2, p1, p2, k, second, log_r0, theta0, rec_log_r, rec_theta):
    """Advance the rotating-frame recursion over len(W1) steps.

    State per step: log radius and unwrapped phase theta; theta_bar is derived
    as theta - (2n-1)k with n the 1-based step index starting at 1.  If the
    record arrays are non-empty they receive the post-step state (index j for
    the state at site j+2).  Returns (log_r, theta, min_abs_mu).
    """
    sin2k = np.sin(2.0 * k)
    sk = np.sin(k)
    log_r = log_r0
    theta = theta0
    min_abs = 1e300
    record = rec_log_r.shape[0] > 0
    for j in range(W1.shape[0]):
        tb = theta - (2.0 * (j + 1) - 1.0) * k
        V1 = W1[j]
        V2 = W2[j]
        ct = np.cos(tb)
        if second:
            mu = (
                1.0
                - 1j * p2 / sin2k * V1 * np.cos(tb - k) * np.exp(-1j * (tb - k))
                + 1j * p1 / sin2k * V2 * ct * np.exp(-1j * tb)
                + 1j / sk * V1 * V2 * ct * np.exp(-1j * (tb - k))
            )
        else:
            mu = (
                1.0
                - 1j * p2 / sin2k * V1 * ct * np.exp(-1j * tb)
                + 1j * p1 / sin2k * V2 * np.cos(tb - k) * np.exp(-1j * (tb - k))
                + 1j / sk * V1 * V2 * ct * np.exp(-1j * (tb - k))
            )
        am2 = mu.real * mu.real + mu.imag * mu.imag
        am = np.sqrt(am2)
        if am < min_abs:
            min_abs = am
        log_r += 0.5 * np.log(am2)
        theta += np.arctan2(mu.imag, mu.real)
        if record:
            rec_log_r[j] = log_r
            rec_theta[j] = theta
    return log_r, theta, min_abs


@njit(cache=True, nogil=True)
def prufer_decomposition(W1, W2, ev1, ev2, p1, p2, k, theta0):
    """First-system sweep accumulating the drift / martingale / phase split.

    ev1[j], ev2[j] are the analytic second moments of W1[j], W2[j].  The six
    martingale integrands are the exact order-2 monomials of log(1+Gamma)
    (the V1 V2 one collects both the Gamma cross terms and the -Gamma^2/2
    cross product), so the per-step remainder K_j is genuinely cubic in the
    disorder.  Returns (log_r2, drift, M[6], Q1, Q2, kappa_abs, kappa_bound,
    gamma3_sum, max_gamma) with kappa_abs = sum |K_j| (exact) and
    kappa_bound = sum of the per-step analytic cubic bounds
    |log-tail| + |dropped Gamma monomials| + |Gamma^2 - Gamma_lin^2| / 2.
    """
    sin2k = np.sin(2.0 * k)
    sk = np.sin(k)
    ck = np.cos(k)
    log_r2 = 0.0
    drift = 0.0
    M = np.zeros(6)
    Q1 = 0.0
    Q2 = 0.0
    kappa_abs = 0.0
    kappa_bound = 0.0
    gamma3 = 0.0
    max_gamma = 0.0
    theta = theta0
    c1 = p2 * p2 / (sin2k * sin2k)
    c2 = p1 * p1 / (sin2k * sin2k)
    c1l = p2 / sin2k
    c2l = p1 / sin2k
    cxx = p1 * p2 / (sin2k * sin2k)
    d12 = np.abs(2.0 * p2 * ck / (sk * sin2k))  # |V1^2 V2| monomial coefficient
    d21 = np.abs(2.0 * p1 / (sk * sin2k))  # |V1 V2^2| monomial
    d22 = 1.0 / (sk * sk)  # V1^2 V2^2 monomial
    for j in range(W1.shape[0]):
        tb = theta - (2.0 * (j + 1) - 1.0) * k
        V1 = W1[j]
        V2 = W2[j]
        ct = np.cos(tb)
        ctk = np.cos(tb - k)
        stk = np.sin(tb - k)
        s2t = np.sin(2.0 * tb)
        s2tk = np.sin(2.0 * (tb - k))
        mu = (
            1.0
            - 1j * p2 / sin2k * V1 * ct * np.exp(-1j * tb)
            + 1j * p1 / sin2k * V2 * ctk * np.exp(-1j * (tb - k))
            + 1j / sk * V1 * V2 * ct * np.exp(-1j * (tb - k))
        )
        am2 = mu.real * mu.real + mu.imag * mu.imag
        gamma = am2 - 1.0
        if np.abs(gamma) > max_gamma:
            max_gamma = np.abs(gamma)
        step = np.log(am2)
        log_r2 += step
        drift += 0.25 * (c1 * ev1[j] + c2 * ev2[j])
        w1 = 0.25 + 0.5 * np.cos(2.0 * tb) + 0.25 * np.cos(4.0 * tb)
        w2 = 0.25 + 0.5 * np.cos(2.0 * (tb - k)) + 0.25 * np.cos(4.0 * (tb - k))
        m1 = c1 * w1 * (V1 * V1 - ev1[j])
        m2 = c2 * w2 * (V2 * V2 - ev2[j])
        m3 = -c1l * s2t * V1
        m4 = c2l * s2tk * V2
        m5 = (2.0 / sk * ct * stk + cxx * s2t * s2tk) * V1 * V2
        m6 = -2.0 * cxx * ck * ct * ctk * V1 * V2
        M[0] += m1
        M[1] += m2
        M[2] += m3
        M[3] += m4
        M[4] += m5
        M[5] += m6
        q1 = c1 * (w1 - 0.25) * ev1[j]
        q2 = c2 * (w2 - 0.25) * ev2[j]
        Q1 += q1
        Q2 += q2
        kept = (
            m1 + m2 + m3 + m4 + m5 + m6 + q1 + q2
            + 0.25 * (c1 * ev1[j] + c2 * ev2[j])
        )
        kappa_abs += np.abs(step - kept)
        gamma_lin = m3 + m4
        tail = step - gamma + 0.5 * gamma * gamma
        dropped = (
            d12 * ct * ct * V1 * V1 * np.abs(V2)
            + d21 * np.abs(ct * ctk) * np.abs(V1) * V2 * V2
            + d22 * ct * ct * V1 * V1 * V2 * V2
        )
        kappa_bound += (
            np.abs(tail)
            + dropped
            + 0.5 * np.abs(gamma * gamma - gamma_lin * gamma_lin)
        )
        gamma3 += np.abs(gamma) ** 3
        theta += np.arctan2(mu.imag, mu.real)
    return log_r2, drift, M, Q1, Q2, kappa_abs, kappa_bound, gamma3, max_gamma


@njit(cache=True, nogil=True)
def prufer_pair_wronskian(W1, W2, p1, p2, k, z1r, z1i, z2r, z2i, checkpoints,
                          out_logratio, out_wronskian):
    """Two coupled sweeps from initial complex states z1, z2.

    Records log(R1/R2) and the constancy defect of
    R1 R2 sin(2k) sin(theta1-theta2) at the given checkpoints (0-based step
    counts).  Returns (log_r1, log_r2, theta1, theta2, max_wronskian_err).
    """
    sin2k = np.sin(2.0 * k)
    sk = np.sin(k)
    lr1 = 0.5 * np.log(z1r * z1r + z1i * z1i)
    th1 = np.arctan2(z1i, z1r)
    lr2 = 0.5 * np.log(z2r * z2r + z2i * z2i)
    th2 = np.arctan2(z2i, z2r)
    w0 = np.exp(lr1 + lr2) * sin2k * np.sin(th1 - th2)
    max_err = 0.0
    ci = 0
    for j in range(W1.shape[0]):
        V1 = W1[j]
        V2 = W2[j]
        shift = (2.0 * (j + 1) - 1.0) * k
        for which in range(2):
            if which == 0:
                tb = th1 - shift
            else:
                tb = th2 - shift
            ct = np.cos(tb)
            mu = (
                1.0
                - 1j * p2 / sin2k * V1 * ct * np.exp(-1j * tb)
                + 1j * p1 / sin2k * V2 * np.cos(tb - k) * np.exp(-1j * (tb - k))
                + 1j / sk * V1 * V2 * ct * np.exp(-1j * (tb - k))
            )
            am2 = mu.real * mu.real + mu.imag * mu.imag
            if which == 0:
                lr1 += 0.5 * np.log(am2)
                th1 += np.arctan2(mu.imag, mu.real)
            else:
                lr2 += 0.5 * np.log(am2)
                th2 += np.arctan2(mu.imag, mu.real)
        w = np.exp(lr1 + lr2) * sin2k * np.sin(th1 - th2)
        err = np.abs(w - w0)
        if err > max_err:
            max_err = err
        if ci < checkpoints.shape[0] and checkpoints[ci] == j:
            out_logratio[ci] = lr1 - lr2
            out_wronskian[ci] = w
            ci += 1
    return lr1, lr2, th1, th2, max_err


@njit(cache=True, nogil=True)
def transfer_product(W1, W2, p1, p2, second, a0, b0, c0, d0, lo, hi):
    """Left-multiply the 2x2 transfer matrices onto [[a,b],[c,d]].

    Rescales by the Frobenius norm whenever it leaves [lo, hi], accumulating
    the extracted log factors with Kahan compensation.  Returns
    (a, b, c, d, log_scale).
    """
    a, b, c, d = a0, b0, c0, d0
    log_scale = 0.0
    comp = 0.0
    for j in range(W1.shape[0]):
        q1 = p1 + W1[j]
        q2 = p2 - W2[j]
        if second:
            t11 = q1 * q2 + 1.0
            t12 = q1
            t21 = q2
            t22 = 1.0
        else:
            t11 = q1 * q2 + 1.0
            t12 = q2
            t21 = q1
            t22 = 1.0
        na = t11 * a + t12 * c
        nb = t11 * b + t12 * d
        nc = t21 * a + t22 * c
        nd = t21 * b + t22 * d
        a, b, c, d = na, nb, nc, nd
        fro = np.sqrt(a * a + b * b + c * c + d * d)
        if fro > hi or fro < lo:
            a /= fro
            b /= fro
            c /= fro
            d /= fro
            y = np.log(fro) - comp
            t = log_scale + y
            comp = (t - log_scale) - y
            log_scale = t
    return a, b, c, d, log_scale


@njit(cache=True, nogil=True)
def transfer_vector_lognorms(W1, W2, p1, p2, second, x0, y0, checkpoints, out):
    """log || T_(range) phi0 || recorded at 0-based step-count checkpoints."""
    x, y = x0, y0
    log_scale = 0.0
    ci = 0
    for j in range(W1.shape[0]):
        q1 = p1 + W1[j]
        q2 = p2 - W2[j]
        if second:
            nx = (q1 * q2 + 1.0) * x + q1 * y
            ny = q2 * x + y
        else:
            nx = (q1 * q2 + 1.0) * x + q2 * y
            ny = q1 * x + y
        x, y = nx, ny
        nrm = np.sqrt(x * x + y * y)
        if nrm > 1e8 or nrm < 1e-8:
            x /= nrm
            y /= nrm
            log_scale += np.log(nrm)
        if ci < checkpoints.shape[0] and checkpoints[ci] == j:
            out[ci] = log_scale + 0.5 * np.log(x * x + y * y)
            ci += 1
    return log_scale + 0.5 * np.log(x * x + y * y)


@njit(cache=True, nogil=True)
def ldlt_factor(diag, off, E):
    """LDL^T pivots for (A - E) with A symmetric tridiagonal, no pivoting.

    Returns (d, l, min_abs_pivot): d the pivot vector, l the subdiagonal
    multipliers.
    """
    n = diag.shape[0]
    d = np.empty(n)
    l = np.empty(n - 1) if n > 1 else np.empty(0)
    min_piv = 1e300
    prev = diag[0] - E
    d[0] = prev
    if np.abs(prev) < min_piv:
        min_piv = np.abs(prev)
    for i in range(1, n):
        if prev == 0.0:  # exact breakdown of the no-pivot factorization
            return d, l, 0.0
        li = off[i - 1] / prev
        l[i - 1] = li
        prev = (diag[i] - E) - off[i - 1] * li
        d[i] = prev
        if np.abs(prev) < min_piv:
            min_piv = np.abs(prev)
    return d, l, min_piv


@njit(cache=True, nogil=True)
def ldlt_solve_unit(d, l, target):
    """Solve (A - E) x = e_target given the LDL^T factors."""
    n = d.shape[0]
    x = np.zeros(n)
    x[target] = 1.0
    for i in range(target + 1, n):
        x[i] = -l[i - 1] * x[i - 1]
    for i in range(n):
        x[i] /= d[i]
    for i in range(n - 2, -1, -1):
        x[i] -= l[i] * x[i + 1]
    return x


@njit(cache=True, nogil=True)
def prufer_log_r4_checkpoints(W1, W2, p1, p2, k, theta0, checkpoints, out):
    """Record 4*log R at 0-based step-count checkpoints (first system)."""
    sin2k = np.sin(2.0 * k)
    sk = np.sin(k)
    log_r = 0.0
    theta = theta0
    ci = 0
    for j in range(W1.shape[0]):
        tb = theta - (2.0 * (j + 1) - 1.0) * k
        V1 = W1[j]
        V2 = W2[j]
        ct = np.cos(tb)
        mu = (
            1.0
            - 1j * p2 / sin2k * V1 * ct * np.exp(-1j * tb)
            + 1j * p1 / sin2k * V2 * np.cos(tb - k) * np.exp(-1j * (tb - k))
            + 1j / sk * V1 * V2 * ct * np.exp(-1j * (tb - k))
        )
        am2 = mu.real * mu.real + mu.imag * mu.imag
        log_r += 0.5 * np.log(am2)
        theta += np.arctan2(mu.imag, mu.real)
        if ci < checkpoints.shape[0] and checkpoints[ci] == j:
            out[ci] = 4.0 * log_r
            ci += 1
    return log_r
