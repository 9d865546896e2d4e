"""Collection-phase decisions: energy providers, collectors, and hover positions.

The energy matrix is one exact 0-1 fractional program per device. The
collector choice is a per-device best-score pick (the stated constraints
carry no per-node capacity, so that is exact); a one-to-one assignment path
is kept behind a flag. Placement couples the two link roles: terms where the
device also harvests from its collector are difference-of-convex, handled by
linearizing the convex half around the incumbent.
"""

from dataclasses import dataclass

import numpy as np

from .channel import activation_feasible, excess_path_function, fit_quadratic, eh_coverage_limit
from .downlink import binding_branch
from .errors import CoverageError, InfeasibleRegionError, ParameterError
from .numerics import FractionalInstance, dinkelbach_select, hungarian, maximize_over_discs
from .placement import (altitude_search, disc_set, links_feasible, safe_project,
                        screened_starts, start_points)


def ul_energy_associate(scn, dep, coeff, sched, ul_info):
    """Collection-phase energy providers, row by row.

    First-epoch devices harvest nothing while transmitting, so their row is
    degenerate; the convention is a single 1 at the strongest feasible node.
    Other rows minimize the branch ratio exactly via the parametric scheme.
    """
    K, N = coeff.gain_ul.shape
    radio = scn.radio
    feasible = activation_feasible(coeff.gain_ul, radio)
    k_dev = sched.epoch_of
    tau0, _ = coeff.tau_snapshot
    binding = binding_branch(coeff.varpi)
    out = np.zeros((K, N), dtype=np.int8)
    for i in range(K):
        if not feasible[i].any():
            raise CoverageError(f"device {i} has no feasible collection-phase charger",
                                device=i, epoch=int(k_dev[i]))
        if k_dev[i] == 1:
            j = int(np.argmax(np.where(feasible[i], coeff.gain_ul[i], -np.inf)))
            out[i, j] = 1
            continue
        g = coeff.gain_ul[i]
        km1 = float(k_dev[i] - 1)
        eps = coeff.epsilon[i]
        serving_loss = 1.0 / coeff.serving_gain[i]
        if binding:
            a = np.where(feasible[i], eps * km1 * g, np.inf)
            inst = FractionalInstance(a0=coeff.omega_cap[i] + serving_loss, b0=coeff.omega_cap[i],
                                      a=a, b=eps * km1 * g)
        else:
            lam = coeff.lambda_cap[i]
            a = np.where(feasible[i], eps * lam * km1 * g, np.inf)
            inst = FractionalInstance(a0=lam * serving_loss + tau0, b0=1.0,
                                      a=a, b=np.zeros(N))
        x, _ = dinkelbach_select(inst)
        out[i] = x.astype(np.int8)
    return out


def ul_info_scores(scn, coeff, sched):
    """Per-(device, node) throughput score and SNR feasibility mask.

    The score is the device's epoch-share throughput if that node collected
    it, holding the harvesting state frozen; the mask kills choices whose SNR
    would land under the threshold.
    """
    tau0, tau1 = coeff.tau_snapshot
    gamma = coeff.gamma
    loss = 1.0 / coeff.gain_ul
    eps = coeff.epsilon[:, None]
    # slight slack so a device sitting exactly on the threshold (the binding
    # one after the time split is tightened) is not lost to rounding
    mask = eps * coeff.chi / (tau1 * loss) >= gamma * (1.0 - 1e-9)
    L = np.maximum(sched.epochs_per_uav, 1)[None, :]
    scores = (tau1 / L) * np.log1p(eps * coeff.chi / (tau1 * loss))
    return scores, mask


def ul_info_associate(scn, dep, coeff, sched, ul_energy, one_to_one=False):
    """Pick each device's collector.

    Per-device argmax of the score is exact here because rows are independent
    and nodes have no device cap. one_to_one switches to a minimum-cost
    matching for the capacity-constrained variant.
    """
    K, N = coeff.gain_ul.shape
    scores, mask = ul_info_scores(scn, coeff, sched)
    out = np.zeros((K, N), dtype=np.int8)
    if one_to_one:
        cost = np.where(mask, -scores, np.inf)
        rows, cols = hungarian(cost)
        for i, j in zip(rows, cols):
            out[i, j] = 1
        return out
    k_dev = sched.epoch_of
    for i in range(K):
        if not mask[i].any():
            raise CoverageError(f"device {i} meets the SNR threshold at no node",
                                device=i, epoch=int(k_dev[i]))
        out[i, int(np.argmax(np.where(mask[i], scores[i], -np.inf)))] = 1
    return out


@dataclass(frozen=True)
class UlRatioTerm:
    """Coefficients of one collection-phase placement ratio.

    Ratio shape: (phi1 * v + phi2 * b) / ((rho1 * loss + rho2) * v + rho3 * b)
    with v = loss where the device also harvests from this node, else 1.
    """

    phi1: np.ndarray
    phi2: np.ndarray
    rho1: np.ndarray
    rho2: np.ndarray
    rho3: np.ndarray
    harvests_here: np.ndarray   # the b bits wrt the node being placed


def ul_ratio_terms(coeff, sched, uav, devices):
    k = sched.epoch_of[devices]
    km1 = (k - 1).astype(float)
    iota = coeff.iota[devices, uav]
    eps = coeff.epsilon[devices]
    if binding_branch(coeff.varpi):
        phi1 = iota + coeff.omega_cap[devices]
        phi2 = eps * km1
        rho1 = np.ones(devices.shape)
        rho2 = phi1.copy()
        rho3 = phi2.copy()
    else:
        lam = coeff.lambda_cap[devices]
        tau0 = coeff.tau_snapshot[0]
        phi1 = np.ones(devices.shape)
        phi2 = np.zeros(devices.shape)
        rho1 = lam
        rho2 = lam * iota + tau0
        rho3 = eps * lam * km1
    return phi1, phi2, rho1, rho2, rho3


def _ul_exact_terms(loss, terms):
    phi1, phi2, rho1, rho2, rho3, b = terms
    num = np.where(b, phi1 * loss + phi2, phi1)
    den = np.where(b, (rho1 * loss + rho2) * loss + rho3, rho1 * loss + rho2)
    return num, den


def _ul_exact_value(xy, h, device_xy, terms, kappa_sq, ch):
    r = np.linalg.norm(device_xy - xy[None, :], axis=1)
    d = np.sqrt(r * r + h * h)
    loss = kappa_sq * excess_path_function(d, h, ch)
    num, den = _ul_exact_terms(loss, terms)
    return float(np.sum(num / den))


def sqrt_bound_constant(phi1, phi2, kt3):
    """Constant term of the affine-in-distance lower bound on 2*sqrt(phi1*loss + phi2).

    Negative fitted offsets would put the constant under the radical; they are
    clamped since the constant never moves the argmax, only the bound value.
    """
    return np.sqrt(np.maximum(2.0 * phi1 * kt3 + 2.0 * phi2, 0.0))


def sqrt_bound_tight_distance(phi1, phi2, kt1, kt2, kt3):
    """Distance at which the affine bound touches 2*sqrt(phi1*loss + phi2)."""
    return np.sqrt(2.0 * phi1 * kt3 + 2.0 * phi2) / (kt1 * np.sqrt(2.0 * phi1)) - kt2 / kt1


def ul_place(scn, assoc, coeff, sched, uav, init, max_rounds=100, tol=1e-6,
             restarts=4, cccp_max=30, cccp_tol=1e-4):
    """3D hover position for one collector.

    Outer loop alternates a slack refresh with a position update. Terms where
    the served device also harvests from this node are difference-of-convex
    after the slack transform; each position update therefore runs a short
    concave-subproblem iteration, re-linearizing the convex half at the
    incumbent. Altitude is a guarded exact 1D search. Returns
    (position, value, slack_vector, served_indices).
    """
    served = assoc.served_devices(uav)
    if served.size == 0:
        raise ParameterError(f"node {uav} collects from no device")
    ch = scn.channel
    kappa_sq = ch.kappa0 ** 2
    radio = scn.radio
    device_xy = scn.device_xy[served]
    b_here = assoc.ul_energy[served, uav].astype(bool)
    phi1, phi2, rho1, rho2, rho3 = ul_ratio_terms(coeff, sched, uav, served)
    terms = (phi1, phi2, rho1, rho2, rho3, b_here)

    tau1 = coeff.tau_snapshot[1]
    lim_snr = coeff.epsilon[served] * coeff.chi[served, uav] / (tau1 * coeff.gamma * kappa_sq)
    lim_eh = eh_coverage_limit(radio, ch)
    limits = np.minimum(lim_snr, lim_eh)

    value_at = lambda xy, h: _ul_exact_value(xy, h, device_xy, terms, kappa_sq, ch)

    def position_update(xy, h, xi, fit):
        # concave-subproblem iteration at fixed altitude and slack
        kt1, kt2, kt3 = fit.scaled(ch.kappa0)
        discs = disc_set(device_xy, limits, h, ch)
        w_quad = xi ** 2 * np.where(b_here, 0.0, rho1)        # plain concave terms
        w_sq = xi ** 2 * np.where(b_here, rho1, 0.0)          # loss-squared terms
        w_lin = xi ** 2 * np.where(b_here, rho2, 0.0)
        c_slope = np.where(b_here, xi * np.sqrt(2.0 * phi1) * kt1, 0.0)

        def fitted_loss(u):
            r = np.linalg.norm(device_xy - u[None, :], axis=1)
            d = np.sqrt(r * r + h * h)
            return d, (kt1 * d + kt2) ** 2 + kt3

        def subproblem(anchor):
            d0, _ = fitted_loss(anchor)
            diff0 = anchor[None, :] - device_xy
            grad_anchor = (np.where(b_here, c_slope / d0, 0.0)[:, None] * diff0).sum(axis=0)

            def f(u):
                d, lf = fitted_loss(u)
                val = -float(np.sum(w_quad * lf + w_sq * lf ** 2 + w_lin * lf))
                val += float(np.dot(grad_anchor, u - anchor))
                return val

            def grad(u):
                diff = u[None, :] - device_xy
                d, lf = fitted_loss(u)
                dl = 2.0 * (kt1 * d + kt2) * kt1 / d
                coef = -(w_quad + 2.0 * w_sq * lf + w_lin) * dl
                return (coef[:, None] * diff).sum(axis=0) + grad_anchor

            return maximize_over_discs(f, grad, discs, anchor)

        u, ok = safe_project(xy, discs)
        for _ in range(cccp_max):
            u_next, _ = subproblem(u)
            if np.linalg.norm(u_next - u) < cccp_tol:
                u = u_next
                break
            u = u_next
        return u

    def run_from(xy0, h0):
        h = float(np.clip(h0, scn.altitude_min, scn.altitude_max))
        discs = disc_set(device_xy, limits, h, ch)
        xy, ok = safe_project(np.asarray(xy0, float), discs)
        fit = fit_quadratic(h, ch, (h, max(3.0 * h, 1.2 * float(max(discs.radii)) + h)))
        val = value_at(xy, h)
        for _ in range(max_rounds):
            r = np.linalg.norm(device_xy - xy[None, :], axis=1)
            d = np.sqrt(r * r + h * h)
            loss = kappa_sq * excess_path_function(d, h, ch)
            num, den = _ul_exact_terms(loss, terms)
            xi = np.sqrt(num) / den

            xy_new = position_update(xy, h, xi, fit)
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
    r = np.linalg.norm(device_xy - best_pos[None, :2], axis=1)
    d = np.sqrt(r * r + best_pos[2] ** 2)
    loss = kappa_sq * excess_path_function(d, best_pos[2], ch)
    num, den = _ul_exact_terms(loss, terms)
    xi = np.sqrt(num) / den
    return best_pos, best_val, xi, served
