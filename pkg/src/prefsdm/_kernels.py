"""Compiled inner loops for the NNGP factorization and the MCMC sweeps.

Neighbor tables are padded ``(n, k)`` int arrays (``-1`` past ``nnc[i]``)
expressed in the original site labels. ``B[i, :nnc[i]]`` are the kriging
weights of site ``i`` on its neighbors and ``F[i]`` the conditional variance.
"""
import math

import numpy as np
from numba import njit

_JITTERS = np.array([0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6])
_LOG2PI = math.log(2.0 * math.pi)
_HALF_LOG_2PI = 0.5 * _LOG2PI
_SQRT2 = math.sqrt(2.0)


@njit(cache=True, nogil=True)
def _chol_inplace(A, m):
    # lower Cholesky of the leading m x m block; returns False if not PD
    for j in range(m):
        s = A[j, j]
        for k in range(j):
            s -= A[j, k] * A[j, k]
        if not s > 0.0:
            return False
        d = math.sqrt(s)
        A[j, j] = d
        for i in range(j + 1, m):
            t = A[i, j]
            for k in range(j):
                t -= A[i, k] * A[j, k]
            A[i, j] = t / d
    return True


@njit(cache=True, nogil=True)
def _chol_solve(L, m, b, out):
    for i in range(m):
        t = b[i]
        for k in range(i):
            t -= L[i, k] * out[k]
        out[i] = t / L[i, i]
    for i in range(m - 1, -1, -1):
        t = out[i]
        for k in range(i + 1, m):
            t -= L[k, i] * out[k]
        out[i] = t / L[i, i]


@njit(cache=True, nogil=True)
def nngp_factors(coords, nbr, nnc, sigma2, phi, nugget):
    """Kriging weights and conditional variances; ``status`` is -1 on success,
    otherwise the first site whose conditional failed after the largest jitter."""
    n, k = nbr.shape
    B = np.zeros((n, max(k, 1)))
    F = np.zeros(n)
    A = np.empty((max(k, 1), max(k, 1)))
    c = np.empty(max(k, 1))
    w = np.empty(max(k, 1))
    for i in range(n):
        m = nnc[i]
        if m == 0:
            F[i] = sigma2 + nugget
            continue
        for a in range(m):
            ia = nbr[i, a]
            dx = coords[i, 0] - coords[ia, 0]
            dy = coords[i, 1] - coords[ia, 1]
            c[a] = sigma2 * math.exp(-phi * math.sqrt(dx * dx + dy * dy))
        done = False
        for jt in range(_JITTERS.shape[0]):
            jit = _JITTERS[jt] * sigma2
            for a in range(m):
                ia = nbr[i, a]
                for b in range(a + 1):
                    ib = nbr[i, b]
                    dx = coords[ia, 0] - coords[ib, 0]
                    dy = coords[ia, 1] - coords[ib, 1]
                    v = sigma2 * math.exp(-phi * math.sqrt(dx * dx + dy * dy))
                    if a == b:
                        v += nugget + jit
                    A[a, b] = v
                    A[b, a] = v
            if not _chol_inplace(A, m):
                continue
            _chol_solve(A, m, c, w)
            f = sigma2 + nugget + jit
            for a in range(m):
                f -= c[a] * w[a]
            if f > 0.0:
                for a in range(m):
                    B[i, a] = w[a]
                F[i] = f
                done = True
                break
        if not done:
            return B, F, i
    return B, F, -1


@njit(cache=True, nogil=True)
def nngp_residuals(v, B, nbr, nnc):
    n = v.shape[0]
    e = np.empty(n)
    for i in range(n):
        t = v[i]
        for a in range(nnc[i]):
            t -= B[i, a] * v[nbr[i, a]]
        e[i] = t
    return e


@njit(cache=True, nogil=True)
def nngp_logdens(v, B, F, nbr, nnc):
    n = v.shape[0]
    tot = 0.0
    for i in range(n):
        t = v[i]
        for a in range(nnc[i]):
            t -= B[i, a] * v[nbr[i, a]]
        tot -= 0.5 * (_LOG2PI + math.log(F[i]) + t * t / F[i])
    return tot


@njit(cache=True, nogil=True)
def nngp_forward(order, B, F, nbr, nnc, normals):
    """Sequential draw from the NNGP prior, visiting sites in ``order``."""
    n = order.shape[0]
    v = np.zeros(n)
    for j in range(n):
        i = order[j]
        t = 0.0
        for a in range(nnc[i]):
            t += B[i, a] * v[nbr[i, a]]
        v[i] = t + math.sqrt(F[i]) * normals[i]
    return v


@njit(cache=True, nogil=True)
def _prior_conditional(i, v, B, F, nbr, nnc, cptr, cidx, cpos):
    # precision and linear term of v[i] | v[-i] under the NNGP prior
    prec = 1.0 / F[i]
    mu = 0.0
    for a in range(nnc[i]):
        mu += B[i, a] * v[nbr[i, a]]
    lin = mu / F[i]
    for r in range(cptr[i], cptr[i + 1]):
        j = cidx[r]
        p = cpos[r]
        bji = B[j, p]
        t = v[j]
        for a in range(nnc[j]):
            if a != p:
                t -= B[j, a] * v[nbr[j, a]]
        prec += bji * bji / F[j]
        lin += bji * t / F[j]
    return prec, lin


@njit(cache=True, nogil=True)
def gibbs_field_sweep(v, order, B, F, nbr, nnc, cptr, cidx, cpos, data_prec, data_lin, normals):
    """One sequential Gibbs pass over a field with Gaussian data terms.

    The data contribute ``-0.5 * data_prec[i] * v_i**2 + data_lin[i] * v_i``.
    """
    for j in range(order.shape[0]):
        i = order[j]
        prec, lin = _prior_conditional(i, v, B, F, nbr, nnc, cptr, cidx, cpos)
        prec += data_prec[i]
        lin += data_lin[i]
        v[i] = lin / prec + normals[i] / math.sqrt(prec)


@njit(cache=True, nogil=True)
def eta_mh_sweep(v, order, B, F, nbr, nnc, cptr, cidx, cpos, site_ptr, site_off, site_sgn,
                 delta, inv_tau, counts, offset, support, step, normals, logu, accepted):
    """Per-cell random-walk Metropolis for a log-Gaussian Cox field.

    Cell target (up to a constant): NNGP conditional, the probit likelihood
    ``sum log Phi(sgn (off + delta x) / tau)`` of the sites in the cell (z
    integrated out) and ``counts*x - exp(offset + x)`` on cells with support.
    Sites of cell i are ``site_ptr[i]:site_ptr[i + 1]`` in the site arrays.
    """
    for j in range(order.shape[0]):
        i = order[j]
        prec, lin = _prior_conditional(i, v, B, F, nbr, nnc, cptr, cidx, cpos)
        x = v[i]
        y = x + step[i] * normals[i]
        d = -0.5 * prec * (y * y - x * x) + lin * (y - x)
        if delta != 0.0:
            for s in range(site_ptr[i], site_ptr[i + 1]):
                g = site_sgn[s] * inv_tau
                d += log_ndtr(g * (site_off[s] + delta * y)) - log_ndtr(g * (site_off[s] + delta * x))
        if support[i]:
            d += counts[i] * (y - x) - (math.exp(offset[i] + y) - math.exp(offset[i] + x))
        if logu[i] < d:
            v[i] = y
            accepted[i] += 1


@njit(cache=True, nogil=True)
def log_ndtr(x):
    """log Phi(x), with the asymptotic series far in the lower tail."""
    if x > 0.0:
        return math.log1p(-0.5 * math.erfc(x / _SQRT2))
    if x > -35.0:
        return math.log(0.5 * math.erfc(-x / _SQRT2))
    x2 = x * x
    return (-0.5 * x2 - math.log(-x) - _HALF_LOG_2PI
            + math.log1p(-1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2)))


@njit(cache=True, nogil=True)
def kriging_draws(cond_coords, cond_values, new_coords, nbr, nnc, sigma2, phi, nugget, normals,
                  means, variances):
    """Independent NNGP predictive draws at new sites from their own neighbor sets."""
    n_new, k = nbr.shape
    out = np.empty(n_new)
    A = np.empty((max(k, 1), max(k, 1)))
    c = np.empty(max(k, 1))
    w = np.empty(max(k, 1))
    r = np.empty(max(k, 1))
    for i in range(n_new):
        m = nnc[i]
        mu = 0.0
        var = sigma2
        if m > 0:
            for a in range(m):
                ia = nbr[i, a]
                dx = new_coords[i, 0] - cond_coords[ia, 0]
                dy = new_coords[i, 1] - cond_coords[ia, 1]
                c[a] = sigma2 * math.exp(-phi * math.sqrt(dx * dx + dy * dy))
                r[a] = cond_values[ia]
            ok = False
            for jt in range(_JITTERS.shape[0]):
                jit = _JITTERS[jt] * sigma2
                for a in range(m):
                    ia = nbr[i, a]
                    for b in range(a + 1):
                        ib = nbr[i, b]
                        dx = cond_coords[ia, 0] - cond_coords[ib, 0]
                        dy = cond_coords[ia, 1] - cond_coords[ib, 1]
                        val = sigma2 * math.exp(-phi * math.sqrt(dx * dx + dy * dy))
                        if a == b:
                            val += nugget + jit
                        A[a, b] = val
                        A[b, a] = val
                if _chol_inplace(A, m):
                    ok = True
                    break
            if not ok:
                means[i] = np.nan
                variances[i] = np.nan
                out[i] = np.nan
                continue
            _chol_solve(A, m, c, w)
            for a in range(m):
                mu += w[a] * r[a]
                var -= w[a] * c[a]
            if var < 0.0:
                var = 0.0
        means[i] = mu
        variances[i] = var
        out[i] = mu + math.sqrt(var) * normals[i]
    return out
