"""Shared pieces of the per-node 3D placement subproblems."""

import numpy as np

from .channel import ACTIVATION_SLACK, coverage_radius, excess_path_function
from .errors import CoverageError, InfeasibleRegionError
from .numerics import DiscConstraintSet, golden_section_max, project_discs

ALTITUDE_GRID = 50


def disc_set(device_xy, limits, altitude, ch):
    """Horizontal feasibility discs at a given altitude.

    limits[i] bounds excess_path_function on the slant link to device i; a
    disc exists only when the limit is reachable and the reach exceeds the
    altitude. Raises InfeasibleRegionError when any device is unreachable.
    """
    radii = []
    cache = {}
    for lim in limits:
        if lim in cache:
            radii.append(cache[lim])
            continue
        try:
            d = coverage_radius(lim, altitude, ch)
        except CoverageError as exc:
            raise InfeasibleRegionError(f"no reach at altitude {altitude:.1f} m: {exc}") from exc
        if d <= altitude:
            raise InfeasibleRegionError("reach shorter than the altitude itself")
        r = float(np.sqrt(d * d - altitude * altitude))
        cache[lim] = r
        radii.append(r)
    return DiscConstraintSet(centers=np.asarray(device_xy, float), radii=np.asarray(radii))


def links_feasible(xy, altitude, device_xy, limits, ch):
    """Check every served link against its excess-path limit at this altitude."""
    r = np.linalg.norm(np.asarray(device_xy, float) - np.asarray(xy, float)[None, :], axis=1)
    d = np.sqrt(r * r + altitude * altitude)
    slack = 1.0 + ACTIVATION_SLACK
    return bool(np.all(excess_path_function(d, altitude, ch) <= np.asarray(limits) * slack))


def altitude_search(value_fn, feasible_fn, h_lo, h_hi, h_current, tol=1e-3):
    """Best altitude on a feasibility-masked 1D slice.

    The objective is quasi-concave in altitude only empirically, so a coarse
    grid guards the golden-section refinement and the current altitude is kept
    as a fallback candidate. Returns (altitude, value).
    """
    hs = np.linspace(h_lo, h_hi, ALTITUDE_GRID)
    feas = np.array([feasible_fn(h) for h in hs])
    best_h, best_v = h_current, value_fn(h_current)
    if feas.any():
        vals = np.full(hs.shape, -np.inf)
        idx = np.flatnonzero(feas)
        vals[idx] = [value_fn(hs[i]) for i in idx]
        g = int(np.argmax(vals))
        if vals[g] > best_v:
            best_h, best_v = float(hs[g]), float(vals[g])
        # refine inside the contiguous feasible block around the grid winner
        lo_i = g
        while lo_i - 1 >= 0 and feas[lo_i - 1]:
            lo_i -= 1
        hi_i = g
        while hi_i + 1 < hs.size and feas[hi_i + 1]:
            hi_i += 1
        lo, hi = hs[max(lo_i, g - 1)], hs[min(hi_i, g + 1)]
        if hi - lo > tol:
            guarded = lambda h: value_fn(h) if feasible_fn(h) else -np.inf
            h_ref, v_ref = golden_section_max(guarded, lo, hi, tol=tol)
            if v_ref > best_v:
                best_h, best_v = float(h_ref), float(v_ref)
    return best_h, best_v


def start_points(init_xy, device_xy, uav, extra=4, spread=5.0):
    """Multi-start seeds: incumbent, served centroid, device anchors, jitter.

    Device-overhead anchors matter when a ratio term peaks near one device
    (collection terms with an own-harvest link are not monotone in distance),
    which leaves the centroid basin strictly suboptimal. At most four anchors,
    picked greedily farthest-first so they straddle the served set.
    """
    pts = np.asarray(device_xy, float)
    centroid = pts.mean(axis=0)
    if pts.shape[0] <= 4:
        anchors = [p for p in pts]
    else:
        chosen = [int(np.argmax(((pts - centroid) ** 2).sum(axis=1)))]
        while len(chosen) < 4:
            dmin = np.min(((pts[:, None] - pts[chosen][None]) ** 2).sum(-1), axis=1)
            nxt = int(np.argmax(dmin))
            if nxt in chosen:
                break
            chosen.append(nxt)
        anchors = [pts[i] for i in chosen]
    rng = np.random.default_rng(10_000 + uav)
    jitter = centroid[None, :] + rng.normal(scale=spread, size=(extra, 2))
    return [np.asarray(init_xy, float), centroid] + anchors + [j for j in jitter]


def screened_starts(value_fn, init_xy, device_xy, uav, extra, discs):
    """Rank the candidate pool by exact value after projection.

    Keeps the incumbent (slot 0) unconditionally so the caller's
    no-regression guarantee survives, then the best `extra + 1` others; the
    number of full solver runs stays what the plain pool would give.
    """
    cands = start_points(init_xy, device_xy, uav, extra=extra)
    scores = []
    for c in cands:
        p, ok = safe_project(np.asarray(c, float), discs)
        scores.append(value_fn(p) if ok else -np.inf)
    order = np.argsort(np.asarray(scores))[::-1]
    keep = [0] + [int(i) for i in order if i != 0][: extra + 1]
    return [cands[i] for i in keep]


def safe_project(xy, discs):
    try:
        return project_discs(xy, discs), True
    except InfeasibleRegionError:
        return xy, False
