"""BI-AWGN channel statistics in bits.

The per-symbol information density for input x and output y = sqrt(P) x + Z is

    iota(x; y) = 1 - log2(1 + exp(-2 x y sqrt(P)))

and by input symmetry its law is that of g(Z) = 1 - log2(1 + exp(-2P - 2 Z sqrt(P))).
Capacity, dispersion and the central moments of W = g(Z) - C are computed by a
composite Gauss-Legendre rule on z in [-12, 12] whose panel count is doubled
until every quantity is stable to a relative 1e-12.
"""

import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from ._gauss import log_phi
from .expansions import moments_to_cumulants

LN2 = math.log(2.0)
Z_LIMIT = 12.0
QUAD_RTOL = 1e-12
MIN_ORDER = 7

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


class QuadratureError(ArithmeticError):
    """The moment quadrature did not reach its tolerance."""


def log2_1p_exp(u):
    """log2(1 + e^u) without overflow or loss of precision in either tail."""
    return np.logaddexp(0.0, u) / LN2


def info_density(x, y, snr):
    """Per-symbol information density iota(x; y) in bits.

    Parameters
    ----------
    x : {-1, +1} or array of them
    y : real channel output(s)
    snr : linear SNR P > 0
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.abs(x) == 1.0):
        raise ValueError("channel input must be -1 or +1")
    if snr <= 0:
        raise ValueError("snr must be positive")
    out = 1.0 - log2_1p_exp(-2.0 * x * np.asarray(y, dtype=float) * math.sqrt(snr))
    return out if out.ndim else float(out)


def info_density_from_noise(z, snr):
    """iota for x = +1 expressed through the noise sample z."""
    return 1.0 - log2_1p_exp(-2.0 * snr - 2.0 * np.asarray(z, dtype=float) * math.sqrt(snr))


def _composite_rule(panels: int) -> Tuple[np.ndarray, np.ndarray]:
    edges = np.linspace(-Z_LIMIT, Z_LIMIT, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    z = (mid[:, None] + half[:, None] * _GL_NODES).ravel()
    w = (half[:, None] * _GL_WEIGHTS).ravel() * np.exp(log_phi(z))
    return z, w


def _gaussian_moments(snr: float, max_order: int, panels: int):
    z, w = _composite_rule(panels)
    g = info_density_from_noise(z, snr)
    cap = float(w @ g)
    dev = g - cap
    moments = np.empty(max_order + 1)
    pw = np.ones_like(dev)
    for l in range(max_order + 1):
        moments[l] = w @ pw
        pw = pw * dev
    return cap, moments


@dataclass(frozen=True)
class ChannelModel:
    """Statistics of the BI-AWGN information density at one SNR.

    ``central_moments[l]`` is E[W^l]; entries 0 and 1 hold the definitional
    values 1 and 0 so the tuple can be indexed by the moment order directly.
    """

    snr_db: float
    snr: float
    capacity: float
    dispersion: float
    central_moments: Tuple[float, ...]
    max_order: int

    @property
    def sigma(self) -> float:
        return math.sqrt(self.dispersion)

    def mean_residual(self, panels: int = 256) -> float:
        """E[W] recomputed by quadrature; zero up to rounding."""
        z, w = _composite_rule(panels)
        return float(w @ (info_density_from_noise(z, self.snr) - self.capacity))


def build_channel(snr_db: float, max_order: int = MIN_ORDER, max_panels: int = 4096) -> ChannelModel:
    """Compute C, V and E[W^l], l <= max_order, at ``snr_db``.

    Raises
    ------
    ValueError
        If ``max_order`` is below 7.
    QuadratureError
        If doubling the panel count up to ``max_panels`` never stabilizes
        the results to a relative 1e-12.
    """
    if max_order < MIN_ORDER:
        raise ValueError(f"max_order must be at least {MIN_ORDER}, got {max_order}")
    snr = 10.0 ** (snr_db / 10.0)
    if not snr > 0:
        raise ValueError("snr_db gives a non-positive linear SNR")

    panels = 8
    cap, mom = _gaussian_moments(snr, max_order, panels)
    while True:
        panels *= 2
        if panels > max_panels:
            raise QuadratureError(f"moments did not converge with {max_panels} panels")
        cap2, mom2 = _gaussian_moments(snr, max_order, panels)
        prev = np.r_[cap, mom[2:]]
        cur = np.r_[cap2, mom2[2:]]
        cap, mom = cap2, mom2
        if np.all(np.abs(cur - prev) <= QUAD_RTOL * np.abs(cur) + 1e-300):
            break

    central = (1.0, 0.0) + tuple(float(v) for v in mom[2:])
    return ChannelModel(
        snr_db=float(snr_db),
        snr=snr,
        capacity=cap,
        dispersion=central[2],
        central_moments=central,
        max_order=max_order,
    )


def normalized_cumulants(model: ChannelModel, up_to: int = MIN_ORDER) -> Dict[int, float]:
    """Cumulants kappa_2..kappa_up_to of W/sigma. kappa_2 is exactly 1."""
    if up_to > model.max_order:
        raise ValueError(f"up_to={up_to} exceeds the model's max_order={model.max_order}")
    kap = moments_to_cumulants(model.central_moments[1 : up_to + 1], sigma=model.sigma)
    out = {m: kap[m] for m in range(2, up_to + 1)}
    out[2] = 1.0
    return out
