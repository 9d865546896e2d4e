"""Time split and epoch scheduling.

The collection window of each node is cut into L equal epochs with at most M
devices per epoch. Devices scheduled later harvest longer during collection,
which couples the epoch assignment to the charging/collection time split.
This module owns that machinery: the per-device solver coefficients, the
threshold-violation indicators, greedy epoch construction, the optimal time
split (both branches), and the distance-ordered heuristic schedules.
"""

import math

import numpy as np
from scipy.optimize import linear_sum_assignment

from .channel import gain_matrix
from .errors import ParameterError, SolverError, StateError
from .numerics import bisect_root
from .scenario import Schedule, SolverCoefficients, TimeAllocation


def epochs_needed(count, channel_count):
    return max(1, math.ceil(count / channel_count))


def compute_coefficients(scn, dep, assoc, sched, time):
    """Assemble every per-device constant the subproblems are phrased in.

    theta0/theta1 summarize charging-phase and collection-phase harvesting as
    seen through the device's own uplink; phi/lambda_cap and gamma_cap/omega_cap
    are the slack-branch and binding-branch shorthands. varpi is the worst
    SNR-threshold ratio at `time`; binding_pair is the (device, epoch) whose
    constraint caps the charging share, picked so that the binding-branch
    closed form is tight at it.
    """
    radio = scn.radio
    gain_dl = gain_matrix(scn.devices, dep.dl_positions, scn.channel)
    gain_ul = gain_matrix(scn.devices, dep.ul_positions, scn.channel)
    serving = assoc.serving_uav
    k_dev = sched.epoch_of
    L_dev = np.maximum(sched.epochs_per_uav[serving], 1)

    serving_gain = gain_ul[np.arange(scn.device_count), serving]
    dl_sum = (assoc.dl_energy * gain_dl).sum(axis=1)
    ul_sum = (assoc.ul_energy * gain_ul).sum(axis=1)
    if np.any(serving_gain <= 0) or np.any(dl_sum <= 0):
        raise StateError("zero gain on an active link")

    eps = np.full(scn.device_count, radio.epsilon)
    theta0 = eps * serving_gain * dl_sum
    theta1 = eps * serving_gain * ul_sum

    tau0, tau1 = time.tau0, time.tau1
    phi = tau1 / (eps * L_dev * serving_gain)
    lambda_cap = tau1 / (eps * L_dev * dl_sum)

    # constraint geometry: the pair needing the largest charging share binds
    t_req = (radio.gamma - theta1 * (k_dev - 1)) / (theta0 * L_dev)
    m = int(np.argmax(t_req))
    binding = (m, int(k_dev[m]))
    bind_ratio = (radio.gamma - theta1[m] * (k_dev[m] - 1)) / theta0[m]
    gamma_cap = eps * serving_gain * bind_ratio
    omega_cap = eps * dl_sum * bind_ratio

    iota = eps[:, None] * (k_dev - 1)[:, None] * (ul_sum[:, None] - assoc.ul_energy * gain_ul)
    L_uav = np.maximum(sched.epochs_per_uav, 1)
    chi = L_uav[None, :] * tau0 * dl_sum[:, None] + ((k_dev - 1) * tau1 * ul_sum)[:, None]

    ratios = snr_threshold_ratios(theta0, theta1, L_dev, k_dev, time, radio.gamma)
    varpi = float(ratios.max())
    w = compute_w_table(theta0, theta1, sched.epochs_per_uav, serving, time, radio.gamma)

    return SolverCoefficients(
        theta0=theta0, theta1=theta1, phi=phi, gamma_cap=gamma_cap,
        lambda_cap=lambda_cap, omega_cap=omega_cap, iota=iota, chi=chi, w=w,
        varpi=varpi, binding_pair=binding, gamma=radio.gamma,
        tau_snapshot=(tau0, tau1), epsilon=eps, serving=serving,
        gain_ul=gain_ul, gain_dl=gain_dl, dl_harvest_sum=dl_sum,
        ul_harvest_sum=ul_sum, serving_gain=serving_gain)


def snr_threshold_ratios(theta0, theta1, L_dev, k_dev, time, gamma):
    """gamma / SNR per device; a value >= 1 means the threshold is violated."""
    denom = theta0 * L_dev * time.tau0 + theta1 * (k_dev - 1) * time.tau1
    return time.tau1 * gamma / denom


def compute_w_table(theta0, theta1, epochs_per_uav, serving, time, gamma):
    """K x L_max indicator: 1 where a device placed at epoch k would miss the threshold."""
    L_dev = np.maximum(epochs_per_uav[serving], 1)
    L_max = int(L_dev.max())
    k = np.arange(1, L_max + 1)[None, :]
    denom = (theta0 * L_dev)[:, None] * time.tau0 + theta1[:, None] * (k - 1) * time.tau1
    w = (time.tau1 * gamma / denom >= 1.0).astype(np.int8)
    w[k > L_dev[:, None]] = 0
    return w


def compute_w(coeff, time, epochs_per_uav):
    """Threshold-violation indicators for every (device, candidate epoch) pair."""
    return compute_w_table(coeff.theta0, coeff.theta1, np.asarray(epochs_per_uav),
                           coeff.serving, time, coeff.gamma)


def marginal_benefit(theta0, theta1, L, k, time, gamma):
    """Throughput contribution of one device at epoch k, net of the threshold penalty.

    Nondecreasing in k: later epochs mean more collection-phase harvesting and
    a weaker (then vanishing) threshold penalty.
    """
    tau0, tau1 = time.tau0, time.tau1
    snr = (theta0 * L * tau0 + theta1 * (k - 1) * tau1) / tau1
    penalty_ratio = gamma / snr
    w = penalty_ratio >= 1.0
    return (tau1 / L) * np.log1p(snr) - np.where(w, penalty_ratio, 0.0)


def build_schedule(scn, assoc, coeff, time):
    """Exact epoch assignment, one node at a time.

    With epochs fixed the benefit sum is separable across devices, so each
    node's subproblem is an assignment of devices to M copies of every epoch
    slot; one Hungarian solve per node settles it exactly.
    """
    K, N, M = scn.device_count, scn.uav_count, scn.channel_count
    gamma = scn.radio.gamma
    counts = assoc.ul_info.sum(axis=0)
    L_uav = np.array([epochs_needed(int(c), M) if c > 0 else 1 for c in counts])
    L_max = int(L_uav.max())
    s = np.zeros((K, L_max), dtype=np.int8)
    for j in range(N):
        members = assoc.served_devices(j)
        if members.size == 0:
            continue
        L = int(L_uav[j])
        ben = np.stack([marginal_benefit(coeff.theta0[members], coeff.theta1[members],
                                         L, k, time, gamma)
                        for k in range(1, L + 1)], axis=1)
        rows, cols = linear_sum_assignment(np.repeat(-ben, M, axis=1))
        s[members[rows], cols // M] = 1
    return Schedule(s=s, epochs_per_uav=L_uav)


def _time_objective(theta0, theta1, L_dev, k_dev, tau0):
    tau1 = 1.0 - tau0
    arg = (theta0 * L_dev * tau0 + theta1 * (k_dev - 1) * tau1) / tau1
    return float(np.sum((tau1 / L_dev) * np.log1p(arg)))


def _stationarity_gap(theta0, theta1, L_dev, k_dev, tau0):
    # derivative of the objective with the sign flipped: positive past the peak
    tau1 = 1.0 - tau0
    A = theta0 * L_dev
    B = theta1 * (k_dev - 1)
    num = A * tau0 + (1.0 + B) * tau1
    rate = np.log(num / tau1)
    return float(np.sum((rate - A / num) / L_dev))


def optimal_time(coeff, sched, gamma=None):
    """Best charging/collection split for a fixed schedule.

    First solves the stationarity equation on (0, 1); if the resulting split
    satisfies every SNR threshold the slack branch is done. Otherwise the
    binding constraint fixes the split in closed form, chosen at the pair
    requiring the largest charging share so the worst threshold holds with
    equality.
    """
    if gamma is None:
        gamma = coeff.gamma
    k_dev = sched.epoch_of
    theta0, theta1 = coeff.theta0, coeff.theta1
    L_dev = np.maximum(sched.epochs_per_uav[coeff.serving], 1)

    lo, hi = 1e-6, 1.0 - 1e-6
    g = lambda t0: _stationarity_gap(theta0, theta1, L_dev, k_dev, t0)
    g_lo, g_hi = g(lo), g(hi)

    t_req = (gamma - theta1 * (k_dev - 1)) / (theta0 * L_dev)
    t_star = float(t_req.max())
    m = int(np.argmax(t_req))

    if g_lo < 0.0 < g_hi:
        tau0_hat = bisect_root(g, lo, hi, tol=1e-13)
        time_hat = TimeAllocation(tau0_hat, 1.0 - tau0_hat)
        worst = float(snr_threshold_ratios(theta0, theta1, L_dev, k_dev, time_hat, gamma).max())
        if worst < 1.0:
            return time_hat
    elif t_star <= 0.0:
        raise SolverError("no interior stationary point and no binding threshold",
                          diagnostics={"gap_lo": g_lo, "gap_hi": g_hi, "t_star": t_star})

    # binding branch: worst threshold holds with equality
    A_m = theta0[m] * L_dev[m]
    B_m = theta1[m] * (k_dev[m] - 1)
    denom = gamma + A_m - B_m
    tau0 = (gamma - B_m) / denom
    tau1 = A_m / denom
    return TimeAllocation(float(tau0), float(tau1))


def time_objective(coeff, sched, tau0):
    """Sum throughput at a charging share tau0 (collection share 1 - tau0)."""
    L_dev = np.maximum(sched.epochs_per_uav[coeff.serving], 1)
    return _time_objective(coeff.theta0, coeff.theta1, L_dev, sched.epoch_of, tau0)


def heuristic_schedule(policy, scn, dep, assoc):
    """Distance-ordered epoch assignment.

    Devices of each node are ranked by horizontal distance to its collection
    position and grouped into rings of M from the outside in; the innermost
    group holds the remainder. 'ff' drains the outermost ring first, 'nf' the
    innermost group first. Distance ties break by device index.
    """
    if policy not in ("nf", "ff"):
        raise ParameterError(f"unknown policy '{policy}'")
    K, N, M = scn.device_count, scn.uav_count, scn.channel_count
    counts = assoc.ul_info.sum(axis=0)
    L_uav = np.array([epochs_needed(int(c), M) if c > 0 else 1 for c in counts])
    L_max = int(L_uav.max())
    s = np.zeros((K, L_max), dtype=np.int8)
    for j in range(N):
        members = assoc.served_devices(j)
        if members.size == 0:
            continue
        d = np.linalg.norm(scn.device_xy[members] - dep.ul_positions[j, :2][None, :], axis=1)
        order = members[np.lexsort((members, -d))]   # outermost first, index breaks ties
        L = int(L_uav[j])
        rings = [order[r * M:(r + 1) * M] for r in range(L)]
        for r, ring in enumerate(rings):
            epoch = r + 1 if policy == "ff" else L - r
            for i in ring:
                s[i, epoch - 1] = 1
    return Schedule(s=s, epochs_per_uav=L_uav)
