"""Reusable numeric building blocks.

Small, dependency-light solvers: bracketed bisection, golden-section search,
a parametric 0-1 single-ratio minimizer, assignment, Dykstra projection onto
disc intersections, and projected gradient ascent over such intersections.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import BracketError, CoverageError, InfeasibleRegionError, ParameterError

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0


def bisect_root(f, lo, hi, tol=1e-12, max_iter=200):
    """Root of f on [lo, hi] by bisection; needs a sign change on the bracket."""
    if lo >= hi:
        raise ParameterError("bisect_root needs lo < hi")
    f_lo = f(lo)
    f_hi = f(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if f_lo * f_hi > 0.0:
        raise BracketError(f"no sign change on [{lo}, {hi}]: f(lo)={f_lo}, f(hi)={f_hi}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if f_mid == 0.0 or (hi - lo) <= tol:
            return mid
        if f_lo * f_mid < 0.0:
            hi = mid
        else:
            lo, f_lo = mid, f_mid
    return 0.5 * (lo + hi)


def golden_section_max(f, lo, hi, tol=1e-6):
    """Maximize a quasi-concave scalar function on [lo, hi].

    Returns (argmax, value). The bracket contracts by the golden ratio each
    step, so the argmax is resolved to within tol for quasi-concave f.
    """
    if lo >= hi:
        raise ParameterError("golden_section_max needs lo < hi")
    a, b = lo, hi
    h = b - a
    c = a + INV_PHI2 * h
    d = a + INV_PHI * h
    fc, fd = f(c), f(d)
    best_x, best_v = (c, fc) if fc >= fd else (d, fd)
    while h > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            h = b - a
            c = a + INV_PHI2 * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + INV_PHI * h
            fd = f(d)
        x, v = (c, fc) if fc >= fd else (d, fd)
        if v > best_v:
            best_x, best_v = x, v
    # endpoints can win when f is monotone on the bracket
    for x in (lo, hi):
        v = f(x)
        if v > best_v:
            best_x, best_v = x, v
    return best_x, best_v


@dataclass(frozen=True)
class FractionalInstance:
    """minimize (a0 + sum a_j x_j) / (b0 + sum b_j x_j) over binary x.

    a_j = +inf masks index j out entirely. min_ones is the smallest number of
    selected indices allowed (coverage constraints are of this shape).
    """

    a0: float
    b0: float
    a: np.ndarray
    b: np.ndarray
    min_ones: int = 1

    def ratio(self, x):
        x = np.asarray(x, bool)
        num = self.a0 + float(np.asarray(self.a, float)[x].sum())
        den = self.b0 + float(np.asarray(self.b, float)[x].sum())
        return num / den


def dinkelbach_select(inst, tol=1e-12, max_iter=100):
    """Exact minimizer of a 0-1 single-ratio program.

    Parametric iteration: at ratio guess r pick x_j = 1 iff a_j - r*b_j < 0,
    topping up to min_ones with the least harmful indices, until the
    parametric optimum value reaches zero. The subproblem is separable, so
    each parametric step is solved exactly and convergence is superlinear.
    """
    a = np.asarray(inst.a, float)
    b = np.asarray(inst.b, float)
    feasible = np.isfinite(a)
    if not feasible.any():
        raise CoverageError("every index is masked out")
    if feasible.sum() < inst.min_ones:
        raise CoverageError("fewer feasible indices than min_ones")

    def pick(r):
        margin = np.where(feasible, a - r * b, np.inf)
        x = margin < 0.0
        deficit = inst.min_ones - int(x.sum())
        if deficit > 0:
            candidates = np.flatnonzero(feasible & ~x)
            order = candidates[np.argsort(margin[candidates], kind="stable")]
            x[order[:deficit]] = True
        return x

    def ratio(x):
        num = inst.a0 + a[x].sum()
        den = inst.b0 + b[x].sum()
        return num / den

    x = pick(0.0)
    r = ratio(x)
    for _ in range(max_iter):
        x = pick(r)
        num = inst.a0 + a[x].sum()
        den = inst.b0 + b[x].sum()
        residual = num - r * den
        r_next = num / den
        if abs(residual) <= tol * max(1.0, abs(num), abs(r * den)) or r_next == r:
            return x, r_next
        r = r_next
    return x, r


def hungarian(cost):
    """Minimum-cost one-to-one assignment on a rectangular cost matrix.

    Pads to square with zeros and drops padded pairs, so every row (or column,
    whichever is scarcer) is matched. Returns (row_indices, col_indices).
    """
    c = np.asarray(cost, float)
    if c.size == 0:
        raise ParameterError("empty cost matrix")
    n = max(c.shape)
    big = 0.0
    finite = np.isfinite(c)
    if finite.any():
        big = float(np.abs(c[finite]).max())
    padded = np.full((n, n), 0.0)
    padded[: c.shape[0], : c.shape[1]] = np.where(finite, c, big * (n + 1) + 1e6)
    rows, cols = linear_sum_assignment(padded)
    keep = (rows < c.shape[0]) & (cols < c.shape[1])
    return rows[keep], cols[keep]


@dataclass(frozen=True)
class DiscConstraintSet:
    """Intersection of closed horizontal discs: ||p - center_i|| <= radius_i."""

    centers: np.ndarray   # n x 2
    radii: np.ndarray     # n

    def __post_init__(self):
        centers = np.atleast_2d(np.asarray(self.centers, float))
        radii = np.atleast_1d(np.asarray(self.radii, float))
        if centers.shape[0] == 0:
            raise ParameterError("need at least one disc")
        if np.any(radii <= 0):
            raise ParameterError("disc radii must be positive")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "radii", radii)

    def violation(self, p):
        d = np.linalg.norm(p[None, :] - self.centers, axis=1)
        return float(np.max(d - self.radii))

    def contains(self, p, slack=1e-8):
        return self.violation(p) <= slack


def _project_disc(p, center, radius):
    v = p - center
    n = np.linalg.norm(v)
    if n <= radius:
        return p
    return center + v * (radius / n)


def project_discs(p, cs, slack=1e-8, max_iter=2000):
    """Dykstra projection of a 2D point onto a disc intersection.

    Plain cyclic projection settles on a feasible point but not the nearest
    one; Dykstra's correction terms recover the true projection, which the
    gradient ascent above it relies on. Raises InfeasibleRegionError when the
    discs do not intersect.

    This sits inside every gradient step, so the cyclic pass runs on plain
    floats: numpy scalar overhead on 2-vectors is the dominant cost otherwise.
    """
    p = np.asarray(p, float)
    dx = p[0] - cs.centers[:, 0]
    dy = p[1] - cs.centers[:, 1]
    out = dx * dx + dy * dy > cs.radii * cs.radii
    if not out.any():
        return p.copy()
    if out.sum() == 1:
        # one violated disc: its boundary point is the projection whenever it
        # still satisfies the rest, which covers nearly every ascent step
        i = int(np.argmax(out))
        q = _project_disc(p, cs.centers[i], cs.radii[i])
        if cs.contains(q, slack):
            return q
    n = cs.centers.shape[0]
    cx = cs.centers[:, 0].tolist()
    cy = cs.centers[:, 1].tolist()
    rr = cs.radii.tolist()
    x, y = float(p[0]), float(p[1])
    corr = [(0.0, 0.0)] * n
    for _ in range(max_iter):
        x_prev, y_prev = x, y
        for i in range(n):
            ex, ey = corr[i]
            ux, uy = x + ex, y + ey
            vx, vy = ux - cx[i], uy - cy[i]
            dist = math.hypot(vx, vy)
            if dist > rr[i]:
                scale = rr[i] / dist
                x, y = cx[i] + vx * scale, cy[i] + vy * scale
            else:
                x, y = ux, uy
            corr[i] = (ux - x, uy - y)
        if abs(x - x_prev) < 1e-12 and abs(y - y_prev) < 1e-12:
            q = np.array([x, y])
            if cs.contains(q, slack):
                return q
    q = np.array([x, y])
    if cs.contains(q, slack):
        return q
    raise InfeasibleRegionError(f"disc intersection appears empty (violation {cs.violation(q):.3e} m)")


def maximize_over_discs(f, grad, cs, init, step_tol=1e-7, max_iter=5000):
    """Projected gradient ascent of a concave objective over a disc intersection.

    Backtracking halves the step until the projected move improves the value;
    terminates when the accepted move is shorter than step_tol. The returned
    value never falls below the value at the (projected) starting point.
    """
    x = project_discs(np.asarray(init, float), cs)
    v = f(x)
    step = 1.0
    for _ in range(max_iter):
        g = grad(x)
        gn = np.linalg.norm(g)
        if gn < 1e-15:
            break
        t = step
        moved = False
        while t > 1e-14:
            cand = project_discs(x + t * g, cs)
            fv = f(cand)
            if fv > v + 1e-16:
                moved = True
                break
            t *= 0.5
        if not moved:
            break
        delta = np.linalg.norm(cand - x)
        x, v = cand, fv
        step = min(t * 2.0, 1e4)
        if delta < step_tol:
            break
    return x, v
