"""Differentiable approximations F(n) of P[S_n >= gamma].

S_n is the cumulative information density after n channel uses, a random walk
with drift C and per-step variance V. Every model is written through the
standardized threshold

    x(n) = (gamma - n C) / sqrt(n V)

and the hybrid model uses the order-2 Petrov tail below a switch point and the
order-s Edgeworth series above it. Values and derivatives are also exposed in
the log domain so that ratios such as F(a)/f(b) stay finite when both factors
underflow.
"""

import logging
import math
import warnings
from typing import Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from ._gauss import log_mills, log_phi, log_q
from .channel import ChannelModel, normalized_cumulants
from .expansions import CramerSeries2, EdgeworthExpansion

logger = logging.getLogger(__name__)

MODES = ("gaussian", "edgeworth", "petrov", "hybrid")
# beyond x(n) < X_CAP the upper tail is 1 to double precision
X_CAP = -38.5


class SwitchFallbackWarning(RuntimeWarning):
    """No Petrov/Edgeworth crossing below 1/2 was found."""


class BracketError(ValueError):
    """F_inverse could not bracket the requested probability."""


def _scalar(a):
    return float(a) if np.ndim(a) == 0 else a


class TailModel:
    """Approximation of the tail P[S_n >= gamma] for a BI-AWGN channel.

    Parameters
    ----------
    channel : ChannelModel
    gamma : float
        Threshold in bits, must be positive.
    mode : {"gaussian", "edgeworth", "petrov", "hybrid"}
    order : int
        Edgeworth order s (1..5).
    """

    def __init__(self, channel: ChannelModel, gamma: float, mode: str = "hybrid", order: int = 5):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not gamma > 0:
            raise ValueError("gamma must be positive")
        self.channel = channel
        self.gamma = float(gamma)
        self.mode = mode
        self.order = order
        self._C = channel.capacity
        self._sqrtV = math.sqrt(channel.dispersion)
        kappa = normalized_cumulants(channel, min(channel.max_order, max(order + 2, 5)))
        self.edgeworth = EdgeworthExpansion(order, kappa)
        self.cramer = CramerSeries2.from_cumulants(kappa)
        self.n_median = self.gamma / self._C
        s = (-X_CAP * self._sqrtV + math.sqrt(X_CAP**2 * channel.dispersion + 4 * self._C * self.gamma)) / (2 * self._C)
        self.n_cap = s * s
        self.switch_n: Optional[float] = None
        self.switch_fallback = False
        if mode == "hybrid":
            self.switch_n = self._find_switch()

    def __repr__(self):
        return (
            f"TailModel(snr_db={self.channel.snr_db}, gamma={self.gamma:.6g}, "
            f"mode={self.mode!r}, order={self.order}, switch_n={self.switch_n})"
        )

    # -- standardized argument -------------------------------------------------

    def x(self, n):
        n = np.asarray(n, dtype=float)
        return (self.gamma - n * self._C) / (np.sqrt(n) * self._sqrtV)

    def _dx_neg(self, n):
        """-dx/dn = (gamma + nC) / (2 n sqrt(nV)), positive."""
        return (self.gamma + n * self._C) / (2.0 * n * np.sqrt(n) * self._sqrtV)

    # -- branches ----------------------------------------------------------------

    def F_gaussian(self, n):
        return _scalar(ndtr(-self.x(n)))

    def F_edgeworth(self, n):
        """Raw order-s Edgeworth tail Q(x) - phi(x) S(n, x); may leave [0, 1]."""
        n = np.asarray(n, dtype=float)
        x = self.x(n)
        s, _, _ = self.edgeworth.terms(n, x)
        return _scalar(ndtr(-x) - np.exp(log_phi(x)) * s)

    def F_petrov(self, n):
        """Raw Petrov tail, not clamped."""
        with np.errstate(over="ignore"):
            return _scalar(np.exp(self._log_F_petrov(np.asarray(n, dtype=float))))

    def _log_F_gaussian(self, n):
        return log_q(self.x(n))

    def _log_f_gaussian(self, n):
        return log_phi(self.x(n)) + np.log(self._dx_neg(n))

    def _log_F_petrov(self, n):
        return log_q(self.x(n)) + self.cramer.exponent(n, self.x(n))

    def _petrov_log_slope(self, n):
        """d/dn log F_petrov."""
        g, C, sv = self.gamma, self._C, self._sqrtV
        u = g - n * C
        t = u / (n * sv)
        lam = self.cramer(t)
        dlam = self.cramer.derivative(t)
        de = (-3.0 * C * u * u / n**2 - 2.0 * u**3 / n**3) * lam / sv**3
        de = de + u**3 / (n**2 * sv**3) * dlam * (-g / (n * n * sv))
        inv_mills = np.exp(-log_mills(self.x(n)))
        return self._dx_neg(n) * inv_mills + de

    def _log_f_petrov(self, n):
        with np.errstate(invalid="ignore", divide="ignore"):
            return self._log_F_petrov(n) + np.log(self._petrov_log_slope(n))

    def _log_F_edgeworth(self, n):
        x = self.x(n)
        s, _, _ = self.edgeworth.terms(n, x)
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            # x > 0: phi(x) (Q/phi - S) keeps deep tails representable
            upper = log_phi(x) + np.log(np.exp(log_mills(np.maximum(x, 0.0))) - s)
            lower = np.log(ndtr(-x) - np.exp(log_phi(x)) * s)
        return np.where(x > 0, upper, lower)

    def _log_f_edgeworth(self, n):
        x = self.x(n)
        s, sx, sn = self.edgeworth.terms(n, x)
        bracket = self._dx_neg(n) * (1.0 + sx - x * s) - sn
        with np.errstate(invalid="ignore", divide="ignore"):
            return log_phi(x) + np.log(bracket)

    def f_edgeworth(self, n):
        n = np.asarray(n, dtype=float)
        x = self.x(n)
        s, sx, sn = self.edgeworth.terms(n, x)
        return _scalar(np.exp(log_phi(x)) * (self._dx_neg(n) * (1.0 + sx - x * s) - sn))

    # -- active model ------------------------------------------------------------

    def _select(self, n, petrov, edgeworth, gaussian):
        if self.mode == "gaussian":
            return gaussian(n)
        if self.mode == "petrov":
            return petrov(n)
        if self.mode == "edgeworth":
            return edgeworth(n)
        return np.where(n < self.switch_n, petrov(n), edgeworth(n))

    def log_F(self, n):
        """log F(n) of the clamped model; -inf where F is 0."""
        n = np.asarray(n, dtype=float)
        if np.any(n <= 0):
            raise ValueError("n must be positive")
        with np.errstate(over="ignore", invalid="ignore"):
            lf = self._select(n, self._log_F_petrov, self._log_F_edgeworth, self._log_F_gaussian)
        lf = np.where(np.isnan(lf), -np.inf, np.minimum(lf, 0.0))
        return _scalar(np.where(n > self.n_cap, 0.0, lf))

    def log_f(self, n):
        """log f(n) of the active branch; -inf beyond the evaluation cap.

        f is the derivative of the clamped curve, so it is also 0 wherever
        the raw branch value lies outside [0, 1].
        """
        n = np.asarray(n, dtype=float)
        if np.any(n <= 0):
            raise ValueError("n must be positive")
        with np.errstate(over="ignore", invalid="ignore"):
            lf = self._select(n, self._log_f_petrov, self._log_f_edgeworth, self._log_f_gaussian)
            raw = self._select(n, self._log_F_petrov, self._log_F_edgeworth, self._log_F_gaussian)
        clamped = (n > self.n_cap) | np.isnan(raw) | (raw > 0)
        return _scalar(np.where(clamped, -np.inf, lf))

    def F_raw(self, n):
        """Active branch before clamping (diagnostics)."""
        n = np.asarray(n, dtype=float)
        with np.errstate(over="ignore"):
            raw = self._select(
                n,
                lambda m: np.exp(self._log_F_petrov(m)),
                lambda m: np.asarray(self.F_edgeworth(m)),
                lambda m: np.asarray(self.F_gaussian(m)),
            )
        return _scalar(np.where(n > self.n_cap, 1.0, raw))

    def F(self, n):
        """Model tail probability, clamped to [0, 1]."""
        n = np.asarray(n, dtype=float)
        if np.any(n <= 0):
            raise ValueError("n must be positive")
        return _scalar(np.clip(self.F_raw(n), 0.0, 1.0))

    def f(self, n):
        """dF/dn of the active branch (right branch at the switch point)."""
        return _scalar(np.exp(self.log_f(n)))

    __call__ = F

    # -- ratios ------------------------------------------------------------------

    def log_ratio_F_over_f(self, n_num, n_den):
        return _scalar(np.asarray(self.log_F(n_num)) - np.asarray(self.log_f(n_den)))

    def log_ratio_f_over_f(self, n_num, n_den):
        return _scalar(np.asarray(self.log_f(n_num)) - np.asarray(self.log_f(n_den)))

    def ratio_F_over_f(self, n_num, n_den):
        """F(n_num)/f(n_den) evaluated in the log domain."""
        return _scalar(np.exp(self.log_ratio_F_over_f(n_num, n_den)))

    def ratio_f_over_f(self, n_num, n_den):
        """f(n_num)/f(n_den) evaluated in the log domain."""
        return _scalar(np.exp(self.log_ratio_f_over_f(n_num, n_den)))

    # -- inverse -----------------------------------------------------------------

    def F_inverse(self, p: float, tol: float = 1e-10) -> float:
        """The n with F(n) = p, located by bracketing and Brent's method."""
        if not 0.0 < p < 1.0:
            raise ValueError("p must lie in (0, 1)")
        lo, hi = 0.5 * self.n_median, max(self.n_median, 1.0)
        while self.F(lo) > p:
            lo *= 0.5
            if lo < 1e-8:
                raise BracketError(f"F stays above {p} down to n={lo}")
        while self.F(hi) < p:
            hi *= 2.0
            if hi > 2.0 * self.n_cap:
                raise BracketError(f"F stays below {p} up to n={hi}")
        n = brentq(lambda m: self.F(m) - p, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
        if abs(self.F(n) - p) > tol:
            raise BracketError(f"F_inverse({p}) converged to n={n} with residual {self.F(n) - p:.3g}")
        return n

    # -- switch point ------------------------------------------------------------

    def _find_switch(self) -> float:
        return find_switch(self)


def find_switch(model: TailModel) -> float:
    """Largest n below the median with Petrov == Edgeworth and common value < 1/2.

    The difference Petrov - Edgeworth is scanned on the integer grid from
    floor(n_median) down to 1; the first sign change from the top whose
    interpolated value is below 1/2 is refined by Brent's method. Expansions
    built from Gaussian cumulants (all below 1e-12) return ``n_median``;
    otherwise, without a crossing, the smallest grid point where the Edgeworth
    tail is in [0, 1] and increasing over the next five points is used and
    a :class:`SwitchFallbackWarning` is emitted.
    """

    def diff(n):
        return model.F_petrov(n) - model.F_edgeworth(n)

    top = max(int(math.floor(model.n_median)), 2)
    grid = np.arange(top, 0, -1, dtype=float)
    with np.errstate(over="ignore"):
        d = np.asarray(diff(grid))
        fe = np.asarray(model.F_edgeworth(grid))
    # Gaussian cumulants (up to rounding) make both expansions Q(x): every n is a crossing
    kap = list(model.edgeworth.cumulants.values()) + [model.cramer.a0, model.cramer.a1, model.cramer.a2]
    if np.all(d == 0.0) or max(abs(v) for v in kap) <= 1e-12:
        model.switch_fallback = True
        return model.n_median

    for i in range(grid.size - 1):
        hi_n, lo_n = grid[i], grid[i + 1]
        if d[i] == 0.0 and fe[i] < 0.5:
            return float(hi_n)
        if d[i] * d[i + 1] < 0 and min(fe[i], fe[i + 1]) < 0.5:
            n = brentq(diff, lo_n, hi_n, xtol=1e-12, rtol=4 * np.finfo(float).eps)
            if model.F_edgeworth(n) < 0.5:
                logger.debug("switch point %.6f, common value %.3g", n, model.F_edgeworth(n))
                return float(n)

    model.switch_fallback = True
    warnings.warn("no Petrov/Edgeworth crossing below 1/2; using Edgeworth validity fallback", SwitchFallbackWarning)
    asc = grid[::-1]
    fe_asc = fe[::-1]
    for i in range(asc.size - 5):
        window = fe_asc[i : i + 6]
        if 0.0 <= window[0] <= 1.0 and np.all(np.diff(window) > 0):
            return float(asc[i])
    return model.n_median
