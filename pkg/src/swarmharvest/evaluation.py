"""Objective evaluation, report assembly, and the comparison baselines."""

import numpy as np

from .errors import ParameterError
from .scenario import Deployment, Schedule, SolutionReport
from .scheduling import compute_coefficients


def per_device_metrics(scn, dep, assoc, sched, time):
    """(snr, rate, throughput) vectors for the current pipeline state.

    Rates are in nats. A device's throughput is its epoch share of the
    collection window times its rate.
    """
    coeff = compute_coefficients(scn, dep, assoc, sched, time)
    L_dev = np.maximum(sched.epochs_per_uav, 1)[coeff.serving].astype(float)
    k_dev = sched.epoch_of.astype(float)
    snr = (coeff.theta0 * L_dev * time.tau0 + coeff.theta1 * (k_dev - 1) * time.tau1) / time.tau1
    rate = np.log1p(snr)
    throughput = (time.tau1 / L_dev) * rate
    return snr, rate, throughput, coeff


def state_objective(scn, dep, assoc, sched, time):
    """Sum throughput; the single number every accept-if-improved guard compares."""
    _, _, throughput, _ = per_device_metrics(scn, dep, assoc, sched, time)
    return float(throughput.sum())


def jain(values):
    """Fairness index in (0, 1], 1 when all devices see equal throughput."""
    v = np.asarray(values, float)
    if v.size == 0 or not np.any(v > 0):
        raise ParameterError("fairness is undefined for an all-zero allocation")
    return float(v.sum() ** 2 / (v.size * np.dot(v, v)))


def throughput_report(scn, dep, assoc, sched, time, trace=(), flags=None,
                      iterations=0, converged=True, state=None):
    snr, rate, throughput, coeff = per_device_metrics(scn, dep, assoc, sched, time)
    merged = dict(flags or {})
    tol = 1.0 - 1e-9
    merged.setdefault("snr_violations", int(np.sum(snr < coeff.gamma * tol)))
    merged.setdefault("worst_snr_ratio", float(np.max(coeff.gamma / np.maximum(snr, 1e-300))))
    return SolutionReport(
        per_device_rate=rate,
        per_device_throughput=throughput,
        sum_throughput=float(throughput.sum()),
        jain=jain(throughput) if np.any(throughput > 0) else 0.0,
        trace=tuple(trace),
        feasibility_flags=merged,
        iterations=iterations,
        converged=converged,
        time=time,
        deployment=dep,
        state=state,
    )


def bs_cover_radius(region_radius):
    """Ground disc radius each of the four fixed towers must cover.

    Towers on the half-radius square cover the whole region disc with discs of
    radius R*sqrt(2)/2; both the region boundary midpoints and the center sit
    exactly on a disc edge, so the cover is tight.
    """
    return region_radius * np.sqrt(2.0) / 2.0


def bs_layout(scn, altitude=40.0):
    """Four fixed towers on the half-radius square, the no-mobility baseline."""
    half = scn.region_radius / 2.0
    h = float(np.clip(altitude, scn.altitude_min, scn.altitude_max))
    pos = np.array([[half, half, h], [-half, half, h],
                    [-half, -half, h], [half, -half, h]])
    return Deployment(dl_positions=pos, ul_positions=pos)


def tdma_mode(scn, assoc):
    """One device per epoch in device-index order, the no-multiplexing baseline."""
    K, N = assoc.ul_info.shape
    counts = assoc.ul_info.sum(axis=0).astype(int)
    l_max = max(int(counts.max()), 1)
    s = np.zeros((K, l_max), dtype=np.int8)
    for j in range(N):
        for slot, dev in enumerate(np.flatnonzero(assoc.ul_info[:, j] == 1)):
            s[dev, slot] = 1
    return Schedule(s=s, epochs_per_uav=np.maximum(counts, 1))
