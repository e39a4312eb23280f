import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from src.errors import ConfigError

logger = logging.getLogger(__name__)

SCHEMES = ("product-linear",)

# Gauss-Legendre rule on [0, 1] for panels whose distance to the singular
# endpoint exceeds FAR_RATIO panel widths.
_x, _w = special.roots_legendre(8)
GAUSS_X = (_x + 1) / 2
GAUSS_W = _w / 2
FAR_RATIO = 8.0


@dataclass(frozen=True)
class QuadratureConfig:
    """
    Product-integration settings for the convolution integrals.

    Args:
        nodes_per_unit (int): Panels per unit length, at least 8.
        scheme (str): Rule tag; only "product-linear" exists.
        breakpoint_split (bool): Panels end at every kernel breakpoint. Must stay True.
        grading (float): Exponent q >= 1 of the history mesh -h + L (k/N)^q.
        numeric_caputo_fallback (bool): Allow L1 differentiation of the history
            when no analytic Caputo derivative is supplied.
    """
    nodes_per_unit: int = 256
    scheme: str = "product-linear"
    breakpoint_split: bool = True
    grading: float = 2.0
    numeric_caputo_fallback: bool = True

    def __post_init__(self):
        if int(self.nodes_per_unit) != self.nodes_per_unit or self.nodes_per_unit < 8:
            raise ConfigError(f"nodes_per_unit must be an integer >= 8, got {self.nodes_per_unit!r}",
                              path="numerics.quadrature.nodes_per_unit")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown quadrature scheme {self.scheme!r}", path="numerics.quadrature.scheme")
        if self.breakpoint_split is not True:
            raise ConfigError("breakpoint_split cannot be disabled", path="numerics.quadrature.breakpoint_split")
        if not (self.grading >= 1 and math.isfinite(self.grading)):
            raise ConfigError(f"grading must be >= 1, got {self.grading!r}", path="numerics.quadrature.grading")


def panel_nodes(lo, hi, nodes_per_unit, grading=1.0, min_panels=2):
    """Nodes lo + L (k/N)^grading, k = 0..N, with N about L * nodes_per_unit."""
    length = hi - lo
    if length <= 0:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    count = max(min_panels, math.ceil(length * nodes_per_unit))
    nodes = lo + length * (np.arange(count + 1) / count) ** grading
    nodes[-1] = hi
    return nodes


def power_weights(nodes, c, gammas):
    """
    Weights W with W @ v(nodes) = int_{nodes[0]}^{nodes[-1]} (c-s)^g / Gamma(g+1) v~(s) ds,
    v~ the piecewise linear interpolant of v, for every exponent g in `gammas`.

    Requires ascending nodes with nodes[-1] <= c and every g > -1.

    Returns:
        np.ndarray: Shape (len(gammas), len(nodes)).
    """
    nodes = np.asarray(nodes, dtype=float)
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    weights = np.zeros((gammas.size, nodes.size))
    d = c - nodes
    dmax = d[0]
    if dmax <= 0 or nodes.size < 2:
        return weights
    # Distances to c in units of dmax; panel k spans [lo, hi] = [r[k+1], r[k]].
    r = np.clip(d / dmax, 0.0, None)
    lo, hi = r[1:], r[:-1]
    delta = hi - lo
    g1 = gammas[:, None] + 1

    # Moments int x^g (x - lo) dx and int x^g (hi - x) dx over each panel, divided by delta.
    m0 = (hi ** g1 - lo ** g1) / g1
    m1 = (hi ** (g1 + 1) - lo ** (g1 + 1)) / (g1 + 1)
    to_left = (m1 - lo * m0) / delta
    to_right = (hi * m0 - m1) / delta

    # Panels far from c: the closed form cancels, the integrand is smooth, use Gauss.
    far = lo > FAR_RATIO * delta
    if np.any(far):
        x = lo[far, None] + delta[far, None] * GAUSS_X[None, :]
        xg = x[None, :, :] ** gammas[:, None, None]
        to_left[:, far] = delta[far] * (xg @ (GAUSS_W * GAUSS_X))
        to_right[:, far] = delta[far] * (xg @ (GAUSS_W * (1 - GAUSS_X)))

    scale = np.exp(g1 * math.log(dmax) - special.gammaln(g1))
    weights[:, :-1] += scale * to_left
    weights[:, 1:] += scale * to_right
    return weights


def beta_kernel_integral(alpha, beta, i, j, h, t, s):
    """
    Closed form of int_s^t (t-r)^{-alpha} (r-s-jh)_+^{i alpha+beta-1} dr:

        Gamma(1-alpha) Gamma(i alpha+beta) / Gamma(i alpha+beta+1-alpha) (t-s-jh)^{i alpha+beta-alpha},

    zero when t - s - jh <= 0.
    """
    if not 0 < alpha < 1:
        raise ConfigError(f"the Beta kernel needs alpha in (0, 1), got {alpha!r}", path="alpha")
    u = t - s - j * h
    if u <= 0:
        return 0.0
    g = i * alpha + beta
    log_coeff = special.gammaln(1 - alpha) + special.gammaln(g) - special.gammaln(g + 1 - alpha)
    return float(math.exp(log_coeff + (g - alpha) * math.log(u)))
