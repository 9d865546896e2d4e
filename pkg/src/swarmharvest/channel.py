"""Probabilistic air-to-ground channel.

Average link gain blends line-of-sight and blocked propagation through an
elevation-angle sigmoid. Everything here is a pure function of geometry and
ChannelParams; array arguments broadcast.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import CoverageError, FitError, ParameterError
from .numerics import bisect_root


@dataclass(frozen=True)
class LinkGeometry:
    """One device-node link: slant distance, node altitude, elevation angle."""

    distance: float
    altitude: float

    def __post_init__(self):
        if not (0.0 < self.altitude <= self.distance):
            raise ParameterError("need 0 < altitude <= distance")

    @property
    def elevation_deg(self):
        return math.degrees(math.asin(self.altitude / self.distance))


def elevation_deg(distance, altitude):
    return np.degrees(np.arcsin(np.clip(altitude / distance, -1.0, 1.0)))


def los_probability(distance, altitude, ch):
    """Sigmoid LoS probability as a function of the elevation angle (degrees)."""
    theta = elevation_deg(distance, altitude)
    return 1.0 / (1.0 + ch.beta * np.exp(-ch.psi * (theta - ch.beta)))


def excess_factor(distance, altitude, ch):
    # expected excess loss, blending the two propagation states
    p = los_probability(distance, altitude, ch)
    return p * ch.mu_los + (1.0 - p) * ch.mu_nlos


def average_gain(distance, altitude, ch):
    """Expected linear channel gain over a slant distance at the given altitude."""
    distance = np.asarray(distance, float)
    if np.any(distance <= 0):
        raise ParameterError("distance must be positive")
    free_space = (ch.kappa0 * distance) ** (-ch.path_exponent)
    out = free_space / excess_factor(distance, altitude, ch)
    return out if out.ndim else float(out)


def inverse_gain(distance, altitude, ch):
    """Expected path loss, the reciprocal of average_gain."""
    return 1.0 / average_gain(distance, altitude, ch)


def excess_path_function(distance, altitude, ch):
    """Squared distance weighted by the expected excess loss.

    Equals inverse_gain / kappa0**2 when the path exponent is 2; strictly
    increasing in distance at a fixed altitude, which makes it invertible.
    """
    distance = np.asarray(distance, float)
    if np.any(distance < altitude):
        raise ParameterError("slant distance cannot be below the altitude")
    out = distance ** 2 * excess_factor(distance, altitude, ch)
    return out if out.ndim else float(out)


def gain_matrix(device_positions, node_positions, ch):
    """K x N matrix of average gains between ground devices and hovering nodes."""
    dev = np.asarray(device_positions, float)[:, None, :]
    nod = np.asarray(node_positions, float)[None, :, :]
    diff = dev - nod
    dist = np.sqrt((diff ** 2).sum(axis=2))
    alt = np.asarray(node_positions, float)[None, :, 2]
    return average_gain(np.maximum(dist, 1e-9), alt, ch)


@dataclass(frozen=True)
class QuadraticFit:
    """Least-squares parabola of the excess-weighted squared distance.

    Stored in completed-square form: fit(d) = (k1*d + k2)**2 + k3. The fit is
    altitude specific because the LoS blend changes with elevation.
    """

    k1: float
    k2: float
    k3: float
    altitude: float
    fit_range: tuple
    max_rel_error: float

    def evaluate(self, distance):
        return (self.k1 * np.asarray(distance, float) + self.k2) ** 2 + self.k3

    def scaled(self, factor):
        """Coefficients of factor**2 * fit, still in completed-square form."""
        return factor * self.k1, factor * self.k2, factor ** 2 * self.k3


def _minimax_parabola(d, f):
    # LP for the sup-norm optimal parabola: min t s.t. |a d^2 + b d + c - f| <= t
    n = d.size
    block = np.column_stack([d ** 2, d, np.ones(n), -np.ones(n)])
    a_ub = np.vstack([block, -block])
    a_ub[n:, 3] = -1.0
    b_ub = np.concatenate([f, -f])
    res = linprog(c=[0.0, 0.0, 0.0, 1.0], A_ub=a_ub, b_ub=b_ub,
                  bounds=[(None, None)] * 3 + [(0, None)], method="highs")
    return res.x[:3] if res.status == 0 else None


def fit_quadratic(altitude, ch, fit_range=None, samples=200):
    """Fit a * d**2 + b * d + c to the excess-weighted distance curve.

    Minimax fit rather than plain least squares: the surrogate enters the
    placement bound linearly in the curve value, so the worst absolute
    deviation is what degrades the objective, and least squares leaves the
    sup error roughly 60% higher. The recorded error is that worst deviation
    normalized by the largest curve value on the range, taken over a refined
    grid (sample points plus their midpoints). Raises FitError when the
    parabola opens downward, reporting the raw polynomial coefficients.
    """
    if fit_range is None:
        fit_range = (altitude, 3.0 * altitude)
    d_lo, d_hi = fit_range
    if d_lo < altitude:
        raise ParameterError("fit range must start at or above the altitude")
    if samples < 3:
        raise ParameterError("need at least 3 sample points")
    d = np.linspace(d_lo, d_hi, samples)
    f = excess_path_function(d, altitude, ch)
    coef = _minimax_parabola(d, f)
    if coef is None:
        coef = np.polyfit(d, f, 2)
    a, b, c = coef
    if a <= 0:
        raise FitError("fit is not convex", raw_coefficients=(a, b, c))
    k1 = math.sqrt(a)
    k2 = b / (2.0 * k1)
    k3 = c - b * b / (4.0 * a)
    dense = np.sort(np.concatenate([d, 0.5 * (d[:-1] + d[1:])]))
    fd = excess_path_function(dense, altitude, ch)
    approx = (k1 * dense + k2) ** 2 + k3
    err = float(np.max(np.abs(approx - fd)) / fd.max())
    return QuadraticFit(k1=k1, k2=k2, k3=k3, altitude=altitude,
                        fit_range=(float(d_lo), float(d_hi)), max_rel_error=err)


def coverage_radius(limit, altitude, ch, rel_tol=1e-9):
    """Unique slant distance d with excess_path_function(d) = limit.

    Exists because the curve is increasing on [altitude, inf). Raises
    CoverageError when the limit is below the overhead value, meaning the
    node cannot serve a device even from directly above it.
    """
    f_lo = excess_path_function(altitude, altitude, ch)
    if limit <= f_lo:
        raise CoverageError("threshold unreachable even directly overhead")
    hi = 2.0 * altitude
    while excess_path_function(hi, altitude, ch) < limit:
        hi *= 2.0
        if hi > 1e9:
            raise CoverageError("threshold out of any practical range")
    g = lambda d: excess_path_function(d, altitude, ch) - limit
    tol = rel_tol * max(1.0, hi)
    d = bisect_root(g, altitude, hi, tol=tol)
    # the curve is steep (~2 F / d per meter), so the midpoint of the final
    # bracket can overshoot the limit by more than the activation slack; back
    # off to the feasible side so reach discs always underestimate true reach
    return max(altitude, d - tol)


def eh_coverage_limit(radio, ch):
    """Right-hand side of the harvesting reach equation: F(d) <= p_ut / (kappa0^2 rho)."""
    return radio.p_ut / (ch.kappa0 ** 2 * radio.rho)


# placement optima ride the activation-disc boundary, so every re-check of
# the threshold needs the same relative slack or float noise flips links
ACTIVATION_SLACK = 1e-9


def activation_feasible(gain, radio):
    """Whether received charging power clears the harvesting threshold."""
    return np.asarray(gain) * radio.p_ut >= radio.rho * (1.0 - ACTIVATION_SLACK)


def threshold_diagnostics(scn, altitude=40.0):
    """Report how far the harvesting threshold reaches at a reference altitude.

    Useful when picking power figures: the sigmoid blend makes reach collapse
    quickly once the threshold exceeds what the excess loss allows.
    """
    ch, radio = scn.channel, scn.radio
    limit = eh_coverage_limit(radio, ch)
    f_overhead = excess_path_function(altitude, altitude, ch)
    out = {"limit": limit, "overhead_value": f_overhead,
           "reachable": limit > f_overhead, "radius": None}
    if out["reachable"]:
        out["radius"] = coverage_radius(limit, altitude, ch)
    return out
