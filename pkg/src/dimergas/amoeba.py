"""Amoebas of the characteristic polynomials and phase classification.

The amoeba of P is the image of its zero set under
(z, w) -> (log|z|, log|w|).  A point (u, v) lies in the amoeba iff the
minimum of |P| over the phase torus at radii (e^u, e^v) vanishes.  The
complement components classify the measure: unbounded component = frozen,
amoeba interior = liquid, bounded component (the hole) = gaseous.

For the scaling-window family (1, 1-l1 eps, 1-l2 eps, 1) the hole
boundary crosses the axes at closed-form points: on the line log|w| = 0 at

    +- arccosh(c_u),  c_u = (2 - 2 eps l2 + eps^2 |l|^2) / (2 - 2 eps l2),

(log-form below) and on log|z| = 0 with l2 -> l1.  After rescaling by eps
the hole tends to the circle of radius |l|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import optimize

from .spectral import CharPoly


class PhaseLabel(Enum):
    FROZEN = "frozen"
    LIQUID = "liquid"
    GASEOUS = "gaseous"


class BoundaryAmbiguousError(ValueError):
    """The queried point sits within tolerance of the amoeba boundary."""


def default_tolerance(P: CharPoly) -> float:
    return P.coefficient_scale * np.finfo(float).eps * 1e3


def min_abs_on_torus(P: CharPoly, u: float, v: float,
                     n_grid: int = 48, polish: int = 4) -> float:
    """Global minimum of |P| over phases at radii (e^u, e^v).

    Coarse phase scan plus Nelder-Mead polish from the best grid cells.
    """
    ru, rv = math.exp(u), math.exp(v)
    theta = 2.0 * np.pi * np.arange(n_grid) / n_grid
    vals = np.abs(P(ru * np.exp(1j * theta)[:, None],
                    rv * np.exp(1j * theta)[None, :]))
    best = float(vals.min())
    flat = np.argsort(vals, axis=None)[:polish]

    def objective(ang):
        return abs(P(ru * np.exp(1j * ang[0]), rv * np.exp(1j * ang[1])))

    for idx in flat:
        i, j = divmod(int(idx), n_grid)
        res = optimize.minimize(objective, x0=[theta[i], theta[j]],
                                method="Nelder-Mead",
                                options={"xatol": 1e-12, "fatol": 1e-15,
                                         "maxiter": 400})
        best = min(best, float(res.fun))
    return best


def amoeba_contains(u: float, v: float, P: CharPoly,
                    tol: float | None = None) -> bool:
    """Membership test for the amoeba of P at (u, v) = (log|z|, log|w|)."""
    if tol is None:
        tol = default_tolerance(P)
    return min_abs_on_torus(P, u, v) < tol


@dataclass(frozen=True)
class AxisIntercepts:
    """Positive axis crossings of the gaseous hole boundary (symmetric +-)."""

    u: float   # on the log|z| axis, i.e. the line log|w| = 0
    v: float   # on the log|w| axis


def intercepts(lam1: float, lam2: float, eps: float) -> AxisIntercepts:
    """Closed-form hole intercepts for the family (1, 1-l1 e, 1-l2 e, 1).

    Evaluates log((c - sqrt(c^2 - 1))) with the cosh values read off P_f;
    returned as positive magnitudes.
    """
    lam_sq = lam1 * lam1 + lam2 * lam2

    def branch(l_perp, l_other):
        den = 2.0 - 2.0 * eps * l_perp
        if den <= 0:
            raise ValueError("eps too large: weight 1 - eps*l crosses zero")
        single = 2.0 - eps * l_perp
        num = den + eps * eps * lam_sq - math.sqrt(
            eps * eps * lam_sq
            * (eps * eps * l_other * l_other + single * single))
        if num <= 0:
            raise ValueError("eps too large: intercept logarithm undefined")
        return abs(math.log(num / den))

    # u-intercept: z-variable pairs with the vertical weights r1 r3 = 1-l2 e.
    return AxisIntercepts(u=branch(lam2, lam1), v=branch(lam1, lam2))


def _hole_radius_along_ray(P: CharPoly, angle: float, r_max: float,
                           tol_abs: float = 1e-13, xtol: float = 0.0) -> float:
    """Distance from the origin to the amoeba along a ray, by bisection."""
    du, dv = math.cos(angle), math.sin(angle)

    def inside_amoeba(t):
        return min_abs_on_torus(P, t * du, t * dv) < tol_abs

    if inside_amoeba(0.0):
        return 0.0
    lo, hi = 0.0, r_max
    if not inside_amoeba(hi):
        raise ValueError(f"ray at angle {angle} does not reach the amoeba by {r_max}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if inside_amoeba(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo < max(xtol, 1e-14 * max(1.0, hi)):
            break
    return 0.5 * (lo + hi)


def hole_boundary(P: CharPoly, n_rays: int = 32, r_max: float = 5.0,
                  xtol: float = 0.0) -> np.ndarray:
    """Boundary polyline of the gaseous hole around the origin.

    Marches rays from (0,0) (the hole is star-shaped for these models) and
    bisects each against amoeba membership; returns an (n_rays, 2) array.
    """
    pts = []
    for k in range(n_rays):
        ang = 2.0 * np.pi * k / n_rays
        rad = _hole_radius_along_ray(P, ang, r_max, xtol=xtol)
        pts.append((rad * math.cos(ang), rad * math.sin(ang)))
    return np.array(pts)


def classify_phase(P: CharPoly, point: tuple[float, float],
                   tol: float | None = None, box: float | None = None,
                   n_grid: int = 64) -> PhaseLabel:
    """Phase of the measure located at `point` in amoeba coordinates.

    Liquid inside the amoeba; otherwise flood-fill the complement on a
    raster: components touching the frame are frozen (unbounded), enclosed
    ones gaseous.  Points within an ambiguity band of the boundary raise
    BoundaryAmbiguousError.
    """
    if tol is None:
        tol = default_tolerance(P)
    u0, v0 = point
    m = min_abs_on_torus(P, u0, v0)
    if m < tol:
        return PhaseLabel.LIQUID
    if m < tol * 100.0:
        raise BoundaryAmbiguousError(
            f"min |P| = {m} at {point} is within the boundary band")
    if box is None:
        scale = sum(abs(c) for c in P.weights) + 2.0
        box = max(2.0 * math.log(scale), 1.5 * max(abs(u0), abs(v0), 1.0))
    us = np.linspace(u0 - box, u0 + box, n_grid)
    vs = np.linspace(v0 - box, v0 + box, n_grid)
    member = np.zeros((n_grid, n_grid), dtype=bool)
    n_phase = 96
    theta = 2.0 * np.pi * np.arange(n_phase) / n_phase
    ph_z = np.exp(1j * theta)[:, None]
    ph_w = np.exp(1j * theta)[None, :]
    # |P| vanishes linearly at a torus zero, so a phase grid reads about
    # |grad P| * spacing at true amoeba points; the membership threshold
    # must sit above that but below the hole's interior minimum.
    raster_tol = max(tol, P.coefficient_scale * (2.0 * np.pi / n_phase) * 0.5)
    for i, uu in enumerate(us):
        for j, vv in enumerate(vs):
            vals = np.abs(P(math.exp(uu) * ph_z, math.exp(vv) * ph_w))
            member[i, j] = vals.min() < raster_tol
    # flood fill the complement from the query point
    start = (int(np.argmin(np.abs(us - u0))), int(np.argmin(np.abs(vs - v0))))
    if member[start]:
        raise BoundaryAmbiguousError("raster resolution too coarse at the query point")
    stack = [start]
    seen = {start}
    touches_frame = False
    while stack:
        i, j = stack.pop()
        if i in (0, n_grid - 1) or j in (0, n_grid - 1):
            touches_frame = True
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ni, nj = i + di, j + dj
            if 0 <= ni < n_grid and 0 <= nj < n_grid and (ni, nj) not in seen \
                    and not member[ni, nj]:
                seen.add((ni, nj))
                stack.append((ni, nj))
    return PhaseLabel.FROZEN if touches_frame else PhaseLabel.GASEOUS


def phase_raster(P: CharPoly, u_range, v_range, n: int = 64,
                 tol: float | None = None, n_phase: int = 96) -> np.ndarray:
    """Raster of amoeba membership (1 inside, 0 outside) for CLI output.

    Same resolution-aware threshold as classify_phase: |P| vanishes
    linearly at torus zeros, so the phase grid reads |grad P| * spacing at
    genuine amoeba points.
    """
    if tol is None:
        tol = max(default_tolerance(P),
                  P.coefficient_scale * (2.0 * np.pi / n_phase) * 0.5)
    us = np.linspace(u_range[0], u_range[1], n)
    vs = np.linspace(v_range[0], v_range[1], n)
    theta = 2.0 * np.pi * np.arange(n_phase) / n_phase
    ph_z = np.exp(1j * theta)[:, None]
    ph_w = np.exp(1j * theta)[None, :]
    out = np.zeros((n, n), dtype=int)
    for i, uu in enumerate(us):
        for j, vv in enumerate(vs):
            vals = np.abs(P(math.exp(uu) * ph_z, math.exp(vv) * ph_w))
            out[i, j] = int(vals.min() < tol)
    return out
