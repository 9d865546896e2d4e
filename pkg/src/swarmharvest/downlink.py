"""Charging-phase decisions: which nodes charge each device, and where they hover.

Association is one exact 0-1 fractional program per device. Placement is a
sum-of-ratios program per node, handled with the standard slack transform:
alternate a concave 2D solve (on the fitted path-loss parabola), an exact 1D
altitude search, and a closed-form slack refresh.
"""

from dataclasses import dataclass

import numpy as np

from .channel import activation_feasible, excess_path_function, fit_quadratic, eh_coverage_limit
from .errors import CoverageError, InfeasibleRegionError, ParameterError
from .numerics import FractionalInstance, dinkelbach_select, maximize_over_discs
from .placement import (altitude_search, disc_set, links_feasible, safe_project,
                        screened_starts, start_points)

BINDING_EPS = 1e-9   # varpi at or above 1 - eps selects the binding branch


def binding_branch(varpi):
    return varpi >= 1.0 - BINDING_EPS


@dataclass(frozen=True)
class RatioTerm:
    """Per-device coefficients of one placement ratio: alpha3 / (alpha1 * loss + alpha2)."""

    alpha1: np.ndarray
    alpha2: np.ndarray
    alpha3: np.ndarray


def dl_ratio_terms(coeff, sched, devices=None):
    """Placement coefficients for the active branch.

    Slack branch: alpha1 folds the per-epoch harvest weighting into the
    device's uplink bookkeeping; alpha2 is the charging share itself.
    Binding branch: the threshold-tight pair rescales everything through
    gamma_cap.
    """
    if devices is None:
        devices = np.arange(coeff.theta0.shape[0])
    k = sched.epoch_of[devices]
    lift = 1.0 + coeff.theta1[devices] * (k - 1)
    if binding_branch(coeff.varpi):
        alpha1 = lift
        alpha2 = coeff.gamma_cap[devices]
        alpha3 = coeff.gamma_cap[devices] / lift
    else:
        tau0 = coeff.tau_snapshot[0]
        alpha1 = coeff.phi[devices] * lift
        alpha2 = np.full(devices.shape, tau0)
        alpha3 = np.ones(devices.shape)
    return RatioTerm(alpha1=alpha1, alpha2=alpha2, alpha3=alpha3)


def dl_associate(scn, dep, coeff, sched):
    """Charging association, one exact single-ratio program per device row.

    Nodes whose delivered power misses the harvesting threshold are masked
    out. Both branches reward every extra feasible charger, so rows come back
    dense; the value of the machinery is the masking and the exactness proof
    carried by the brute-force tests.
    """
    K, N = coeff.gain_dl.shape
    radio = scn.radio
    feasible = activation_feasible(coeff.gain_dl, radio)
    out = np.zeros((K, N), dtype=np.int8)
    k_dev = sched.epoch_of
    tau0, tau1 = coeff.tau_snapshot
    binding = binding_branch(coeff.varpi)
    for i in range(K):
        if not feasible[i].any():
            raise CoverageError(f"device {i} cannot harvest from any node", device=i)
        lift = 1.0 + coeff.theta1[i] * (k_dev[i] - 1)
        g = coeff.gain_dl[i]
        if binding:
            a = np.where(feasible[i], 0.0, np.inf)
            b = coeff.gamma_cap[i] * g
            inst = FractionalInstance(a0=1.0, b0=coeff.phi[i] * lift, a=a, b=b)
        else:
            a = np.where(feasible[i], -tau1 * g, np.inf)
            b = tau0 * g
            inst = FractionalInstance(a0=coeff.phi[i] * lift, b0=coeff.phi[i] * lift, a=a, b=b)
        x, _ = dinkelbach_select(inst)
        out[i] = x.astype(np.int8)
    return out


def _dl_exact_value(xy, h, device_xy, terms, kappa_sq, ch):
    r = np.linalg.norm(device_xy - xy[None, :], axis=1)
    d = np.sqrt(r * r + h * h)
    loss = kappa_sq * excess_path_function(d, h, ch)
    return float(np.sum(terms.alpha3 / (terms.alpha1 * loss + terms.alpha2)))


def _dl_slack(xy, h, device_xy, terms, kappa_sq, ch):
    r = np.linalg.norm(device_xy - xy[None, :], axis=1)
    d = np.sqrt(r * r + h * h)
    loss = kappa_sq * excess_path_function(d, h, ch)
    return np.sqrt(terms.alpha3) / (terms.alpha1 * loss + terms.alpha2)


def dl_place(scn, assoc, coeff, sched, uav, init, max_rounds=100, tol=1e-6,
             restarts=4):
    """3D hover position for one charging node.

    Runs the alternating slack scheme from several starting points and keeps
    the best exact sum-of-ratios value. The 2D step maximizes the fitted
    surrogate, so its result is only adopted when the exact objective does
    not regress; altitude and slack steps are exact. Returns
    (position, value, slack_vector, served_indices).
    """
    served = np.flatnonzero(assoc.dl_energy[:, uav] == 1)
    if served.size == 0:
        raise ParameterError(f"node {uav} charges no device")
    ch = scn.channel
    kappa_sq = ch.kappa0 ** 2
    device_xy = scn.device_xy[served]
    terms = dl_ratio_terms(coeff, sched, served)
    limits = [eh_coverage_limit(scn.radio, ch)] * served.size

    value_at = lambda xy, h: _dl_exact_value(xy, h, device_xy, terms, kappa_sq, ch)

    def run_from(xy0, h0):
        h = float(np.clip(h0, scn.altitude_min, scn.altitude_max))
        discs = disc_set(device_xy, limits, h, ch)
        xy, ok = safe_project(np.asarray(xy0, float), discs)
        if not ok:
            raise InfeasibleRegionError("charging discs do not intersect")
        fit = fit_quadratic(h, ch, (h, max(3.0 * h, 1.2 * float(max(discs.radii)) + h)))
        val = value_at(xy, h)
        for _ in range(max_rounds):
            sigma = _dl_slack(xy, h, device_xy, terms, kappa_sq, ch)
            kt1, kt2, kt3 = fit.scaled(ch.kappa0)
            weight = sigma ** 2 * terms.alpha1
            const = float(np.sum(2.0 * sigma * np.sqrt(terms.alpha3)
                                 - sigma ** 2 * terms.alpha2 - weight * kt3))

            def surrogate(u):
                r = np.linalg.norm(device_xy - u[None, :], axis=1)
                d = np.sqrt(r * r + h * h)
                return const - float(np.sum(weight * (kt1 * d + kt2) ** 2))

            def surrogate_grad(u):
                diff = u[None, :] - device_xy
                r = np.linalg.norm(diff, axis=1)
                d = np.sqrt(r * r + h * h)
                coef = -2.0 * weight * (kt1 * d + kt2) * kt1 / d
                return (coef[:, None] * diff).sum(axis=0)

            xy_new, _ = maximize_over_discs(surrogate, surrogate_grad, discs, xy)
            if value_at(xy_new, h) >= value_at(xy, h):
                xy = xy_new

            feas = lambda hh: links_feasible(xy, hh, device_xy, limits, ch)
            h_new, _ = altitude_search(lambda hh: value_at(xy, hh), feas,
                                       scn.altitude_min, scn.altitude_max, h)
            if abs(h_new - fit.altitude) > 0.1 * fit.altitude:
                fit = fit_quadratic(h_new, ch, (h_new, max(3.0 * h_new, fit.fit_range[1])))
            if h_new != h:
                h = h_new
                discs = disc_set(device_xy, limits, h, ch)
                xy, _ = safe_project(xy, discs)

            v = value_at(xy, h)
            if abs(v - val) < tol * max(1.0, abs(val)):
                val = v
                break
            val = v
        return np.array([xy[0], xy[1], h]), val

    h_init = float(np.clip(init[2], scn.altitude_min, scn.altitude_max))
    try:
        discs0 = disc_set(device_xy, limits, h_init, ch)
        starts = screened_starts(lambda p: value_at(p, h_init), init[:2],
                                 device_xy, uav, restarts, discs0)
    except InfeasibleRegionError:
        starts = start_points(init[:2], device_xy, uav, extra=restarts)
    best_pos, best_val = None, -np.inf
    for xy0 in starts:
        pos, val = run_from(xy0, h_init)
        if val > best_val:
            best_pos, best_val = pos, val
    sigma = _dl_slack(best_pos[:2], best_pos[2], device_xy, terms, kappa_sq, ch)
    return best_pos, best_val, sigma, served
