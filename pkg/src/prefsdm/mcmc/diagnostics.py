import warnings

import numpy as np

from ..errors import ValidationError


def autocorrelation(x):
    """Sample autocorrelation at all lags, via FFT with zero padding."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    x = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    acov = np.fft.irfft(f * np.conjugate(f), size)[:n]
    return acov / acov[0]


def effective_sample_size(draws) -> float:
    """ESS = N / (1 + 2 sum rho_t), truncated by the initial positive sequence rule.

    Autocorrelations are summed in adjacent pairs (rho_{2m} + rho_{2m+1})
    until the first pair that is not positive. A constant series has ESS 1.
    """
    x = np.asarray(draws, dtype=float).reshape(-1)
    n = len(x)
    if n < 10:
        raise ValidationError("need at least 10 draws for an ESS estimate")
    if np.ptp(x) == 0:
        warnings.warn("degenerate (constant) series; ESS set to 1", RuntimeWarning, stacklevel=2)
        return 1.0
    rho = autocorrelation(x)
    s = 0.0  # sum over pairs, starting with (rho_0, rho_1)
    for m in range(n // 2):
        pair = rho[2 * m] + rho[2 * m + 1]
        if pair <= 0:
            break
        s += pair
    tau = max(2.0 * s - 1.0, 1e-12)
    return float(min(n / tau, n))


def chain_ess(chains) -> float:
    """Sum of per-chain ESS for a (n_chains, n_draws) array."""
    chains = np.atleast_2d(chains)
    return float(sum(effective_sample_size(c) for c in chains))


def mcse(draws) -> float:
    """Monte Carlo standard error of the mean using the ESS."""
    x = np.asarray(draws, dtype=float).reshape(-1)
    if np.ptp(x) == 0:
        return 0.0
    return float(x.std(ddof=1) / np.sqrt(effective_sample_size(x)))
