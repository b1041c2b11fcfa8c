"""Standard-normal helpers evaluated in the log domain.

All functions accept scalars or arrays and return numpy floats/arrays.
"""

import numpy as np
from scipy.special import erfcx, ndtr

LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
_SQRT2 = np.sqrt(2.0)


def log_phi(x):
    """Log of the standard normal density."""
    x = np.asarray(x, dtype=float)
    return -0.5 * x * x - LOG_SQRT_2PI


def phi(x):
    return np.exp(log_phi(x))


def q_func(x):
    """Upper tail Q(x) = P[Z >= x]."""
    return ndtr(-np.asarray(x, dtype=float))


def log_q(x):
    """log Q(x), finite for x up to ~1e150.

    Positive arguments go through the scaled complementary error function,
    Q(x) = erfcx(x/sqrt2) exp(-x^2/2) / 2, so nothing underflows.
    """
    x = np.asarray(x, dtype=float)
    pos = x > 0
    xp = np.where(pos, x, 0.0)
    xn = np.where(pos, 0.0, x)
    with np.errstate(divide="ignore"):
        upper = np.log(0.5 * erfcx(xp / _SQRT2)) - 0.5 * xp * xp
        lower = np.log(ndtr(-xn))
    return np.where(pos, upper, lower)


def log_mills(x):
    """log of the Mills ratio Q(x)/phi(x)."""
    return log_q(x) - log_phi(x)
