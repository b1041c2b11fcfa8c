"""Series machinery for sums of i.i.d. variables.

Hermite polynomials, integer-partition enumeration, the Edgeworth correction
polynomials p_j and the order-2 Cramer series used by the Petrov tail.

Conventions
-----------
Cumulant sequences are dicts mapping order ``m`` to the m-th cumulant of the
*standardized* variable W/sigma, so ``kappa[2] == 1``.
"""

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, NamedTuple, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.special import ndtr

from ._gauss import log_q, phi

MAX_HERMITE_DEGREE = 17
MAX_ORDER = 5


class Partition(NamedTuple):
    """A non-negative solution of sum_m m*k_m = j.

    ``counts[m-1]`` is k_m; ``r`` is the number of parts sum_m k_m.
    """

    counts: Tuple[int, ...]
    r: int


class PetrovOverflowWarning(RuntimeWarning):
    """The Petrov exponent pushed the tail estimate above one; value clamped."""


# ---------------------------------------------------------------------------
# Hermite polynomials
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def hermite_coeffs(j: int) -> np.ndarray:
    """Ascending coefficients of the probabilists' Hermite polynomial He_j.

    He_j(x) = j! sum_k (-1)^k x^(j-2k) / (k! (j-2k)! 2^k)
    """
    if not 0 <= j <= MAX_HERMITE_DEGREE:
        raise ValueError(f"Hermite degree must lie in [0, {MAX_HERMITE_DEGREE}], got {j}")
    c = np.zeros(j + 1)
    for k in range(j // 2 + 1):
        num = (-1) ** k * math.factorial(j)
        den = math.factorial(k) * math.factorial(j - 2 * k) * 2**k
        c[j - 2 * k] = num // den
    c.setflags(write=False)
    return c


def hermite(j: int, x):
    """Evaluate He_j at x (scalar or array)."""
    return P.polyval(np.asarray(x, dtype=float), hermite_coeffs(j))


# ---------------------------------------------------------------------------
# Partitions and cumulants
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _partitions(j: int) -> Tuple[Partition, ...]:
    out: List[Partition] = []
    counts = [0] * j

    # descend over part sizes j, j-1, ..., 1; larger k_1 first gives
    # lexicographically decreasing count vectors
    def descend(m: int, remaining: int) -> None:
        if m == 1:
            counts[0] = remaining
            out.append(Partition(tuple(counts), sum(counts)))
            counts[0] = 0
            return
        for km in range(remaining // m + 1):
            counts[m - 1] = km
            descend(m - 1, remaining - m * km)
        counts[m - 1] = 0

    descend(j, j)
    out.sort(key=lambda p: p.counts, reverse=True)
    return tuple(out)


def partitions(j: int) -> List[Partition]:
    """All non-negative solutions {k_m} of sum_{m=1}^j m*k_m = j.

    Returned in decreasing lexicographic order of ``(k_1, ..., k_j)``.

    >>> [p.counts for p in partitions(3)]
    [(3, 0, 0), (1, 1, 0), (0, 0, 1)]
    """
    if j < 1:
        raise ValueError("j must be a positive integer")
    return list(_partitions(j))


def moments_to_cumulants(moments: Sequence[float], sigma: float = 1.0) -> Dict[int, float]:
    """Cumulants of X/sigma from the raw moments of X.

    Parameters
    ----------
    moments : sequence
        ``moments[l-1] = E[X^l]`` for ``l = 1..L``.
    sigma : float
        Scale applied before conversion.

    Returns
    -------
    dict
        ``{m: kappa_m}`` for ``m = 1..L``, computed as
        kappa_m = m! sum_{k} (-1)^(r-1) (r-1)! prod_l (E[X^l]/(sigma^l l!))^k_l / k_l!
    """
    scaled = [mu / sigma ** (l + 1) / math.factorial(l + 1) for l, mu in enumerate(moments)]
    out = {}
    for m in range(1, len(moments) + 1):
        total = 0.0
        for part in partitions(m):
            term = (-1) ** (part.r - 1) * math.factorial(part.r - 1)
            for l, kl in enumerate(part.counts):
                if kl:
                    term *= scaled[l] ** kl / math.factorial(kl)
            total += term
        out[m] = math.factorial(m) * total
    return out


# ---------------------------------------------------------------------------
# Edgeworth expansion
# ---------------------------------------------------------------------------


def _p_coeffs(j: int, cumulants: Dict[int, float]) -> np.ndarray:
    c = np.zeros(3 * j + 1)
    for part in partitions(j):
        weight = 1.0
        for m, km in enumerate(part.counts, start=1):
            if km:
                weight *= (cumulants[m + 2] / math.factorial(m + 2)) ** km / math.factorial(km)
        he = hermite_coeffs(j + 2 * part.r - 1)
        c[: he.size] -= weight * he
    return c


def edgeworth_p(j: int, x, cumulants: Dict[int, float]):
    """Value of the j-th Edgeworth correction polynomial p_j(x).

    p_j(x) = -sum_{k} He_{j+2r-1}(x) prod_m (kappa_{m+2}/(m+2)!)^k_m / k_m!
    """
    missing = [m for m in range(3, j + 3) if m not in cumulants]
    if missing:
        raise ValueError(f"p_{j} needs cumulants {missing}")
    return P.polyval(np.asarray(x, dtype=float), _p_coeffs(j, cumulants))


@dataclass(frozen=True)
class EdgeworthExpansion:
    """Order-s Edgeworth expansion of the standardized sum of n i.i.d. copies.

    ``p_coeffs[j-1]`` holds the ascending polynomial coefficients of p_j and
    ``dp_coeffs[j-1]`` those of its derivative.
    """

    order: int
    cumulants: Dict[int, float]
    p_coeffs: Tuple[np.ndarray, ...] = field(init=False, repr=False, compare=False)
    dp_coeffs: Tuple[np.ndarray, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 1 <= self.order <= MAX_ORDER:
            raise ValueError(f"Edgeworth order must lie in [1, {MAX_ORDER}]")
        need = range(3, self.order + 3)
        missing = [m for m in need if m not in self.cumulants]
        if missing:
            raise ValueError(f"order {self.order} needs cumulants {missing}")
        kap = {m: float(self.cumulants[m]) for m in need}
        pc = tuple(_p_coeffs(j, kap) for j in range(1, self.order + 1))
        object.__setattr__(self, "cumulants", kap)
        object.__setattr__(self, "p_coeffs", pc)
        object.__setattr__(self, "dp_coeffs", tuple(P.polyder(c) for c in pc))

    def terms(self, n, x):
        """Correction pieces needed by the CDF and its n-derivative.

        Returns ``(S, dS_dx, dS_dn)`` where S = sum_j n^(-j/2) p_j(x), dS_dx is
        its partial in x and dS_dn its partial in n at fixed x.
        """
        n = np.asarray(n, dtype=float)
        x = np.asarray(x, dtype=float)
        s = np.zeros(np.broadcast(n, x).shape)
        sx = np.zeros_like(s)
        sn = np.zeros_like(s)
        for j, (c, dc) in enumerate(zip(self.p_coeffs, self.dp_coeffs), start=1):
            w = n ** (-0.5 * j)
            pj = P.polyval(x, c)
            s += w * pj
            sx += w * P.polyval(x, dc)
            sn -= 0.5 * j * w / n * pj
        return s, sx, sn

    def cdf(self, n, x):
        """Truncated series Phi(x) + phi(x) sum_j n^(-j/2) p_j(x), unclamped."""
        s, _, _ = self.terms(n, x)
        return ndtr(np.asarray(x, dtype=float)) + phi(x) * s


def edgeworth_cdf(n, x, expansion: EdgeworthExpansion):
    """P[sum W_i <= x sigma sqrt(n)] by the truncated Edgeworth series.

    Not clamped; small n can produce values outside [0, 1].
    """
    if np.any(np.asarray(n) < 1):
        raise ValueError("n must be >= 1")
    return expansion.cdf(n, x)


# ---------------------------------------------------------------------------
# Cramer series and Petrov tail
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CramerSeries2:
    """Order-2 truncation a0 + a1 t + a2 t^2 of the Cramer series."""

    a0: float
    a1: float
    a2: float

    @classmethod
    def from_cumulants(cls, kappa: Dict[int, float]) -> "CramerSeries2":
        k2, k3, k4, k5 = (kappa[m] for m in (2, 3, 4, 5))
        return cls(
            a0=k3 / (6.0 * k2**1.5),
            a1=(k4 * k2 - 3.0 * k3**2) / (24.0 * k2**3),
            a2=(k5 * k2**2 - 10.0 * k4 * k3 * k2 + 15.0 * k3**3) / (120.0 * k2**4.5),
        )

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.a0 + t * (self.a1 + t * self.a2)

    def derivative(self, t):
        return self.a1 + 2.0 * self.a2 * np.asarray(t, dtype=float)

    def exponent(self, n, x):
        """(x^3/sqrt(n)) Lambda(x/sqrt(n))."""
        n = np.asarray(n, dtype=float)
        x = np.asarray(x, dtype=float)
        rn = np.sqrt(n)
        return x**3 / rn * self(x / rn)


def log_petrov_tail(n, x, cs: CramerSeries2):
    """log of Q(x) exp{(x^3/sqrt n) Lambda(x/sqrt n)}, no clamping, any real x."""
    return log_q(x) + cs.exponent(n, x)


def petrov_tail(n, x, cs: CramerSeries2):
    """Upper tail P[sum W_i >= x sigma sqrt(n)] by the order-2 Petrov expansion.

    The [1 + O((x+1)/sqrt n)] factor of the underlying theorem is dropped. If
    the exponent drives the estimate above one the result is clamped to 1 and
    a :class:`PetrovOverflowWarning` is emitted.
    """
    n = np.asarray(n, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("petrov_tail requires x >= 0")
    if np.any(n < 1):
        raise ValueError("n must be >= 1")
    lt = log_petrov_tail(n, x, cs)
    over = lt > 0
    if np.any(over):
        warnings.warn("Petrov exponent exceeds -log Q(x); tail clamped to 1", PetrovOverflowWarning)
    out = np.exp(np.minimum(lt, 0.0))
    return out if out.ndim else float(out)
