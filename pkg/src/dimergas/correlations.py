"""Scaling-window correlations and the Wick-defect certificate.

Entries of the inverse Kasteleyn matrix in the scaling window (weights
(1, 1-l1 eps, 1-l2 eps, 1), displacement (x,y) = black minus white in
units of the fundamental domain, |z| = sqrt(x^2+y^2), m = |lambda|):

    E(b0,w0) =  (m x/(pi |z|)) K1(m|z|) + (l1/pi) K0(m|z|)
    E(b0,w1) = -(m y/(pi |z|)) K1(m|z|) + (l2/pi) K0(m|z|)
    E(b1,w0) =  (m y/(pi |z|)) K1(m|z|) + (l2/pi) K0(m|z|)
    E(b1,w1) =  (m x/(pi |z|)) K1(m|z|) - (l1/pi) K0(m|z|)

These equal -2/eps times the lattice entries at domain offset
(-x/eps, -y/eps) in the eps -> 0 limit (the 2 is the Brownian generator
normalization, the sign a Kasteleyn gauge; both are frozen by the sweep
tests).

Height-change correlations along a common vertical line use the height
jump 3 per covered crossing.  With points p_a at heights x_a and class
choices c in {0,1}^n, the n-point density is

    S_n-density = 3^n * i^n * sum_c det0[ M(c) ],
    M(c)[a][b] = E(b_{c_a}, w_{c_b}; (0, x_a - x_b)),

where det0 is the determinant with the diagonal zeroed (centred moments).
For n = 2 this reproduces the closed form

    s2_integrand = (18/pi^2) m^2 (K0^2 + K1^2),

and for n = 4 the part not accounted for by Wick pairings is the 4-cycle
sum, equal to 3^4 times the 24-term connected function f (whose published
normalization omits the height factor 3^4; `f_connected` keeps the
published normalization and the identity below carries the 81).

Keystone identity (tested at 1e-10):

    four_point_density - [s2 s2 over the 3 pairings] = 81 * f_connected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .greens import bessel_k0_k1
from .lattice import HEIGHT_JUMP
from .spectral import QuadratureError

_PI = math.pi

# 3^4: the S4 statement carries the height normalization, the published
# 24-term expression does not.
WICK_HEIGHT_FACTOR = float(HEIGHT_JUMP ** 4)


def _lam_norm(lam) -> float:
    l1, l2 = lam
    m = math.hypot(l1, l2)
    if m <= 0:
        raise ValueError("scaled correlations require |lambda| > 0")
    return m


# ---------------------------------------------------------------------------
# Scaled inverse entries (classes b in {0,1} x w in {0,1})
# ---------------------------------------------------------------------------

def scaled_inv_entry(b_class: int, w_class: int, x, y, lam):
    """Scaling-window inverse-Kasteleyn entry for the given class pair."""
    if b_class not in (0, 1) or w_class not in (0, 1):
        raise ValueError("classes must be 0 or 1")
    l1, l2 = lam
    m = _lam_norm(lam)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rad = np.hypot(x, y)
    scalar = rad.ndim == 0
    if np.any(rad == 0.0):
        raise ValueError("scaled inverse entries diverge at the origin")
    k0, k1 = bessel_k0_k1(m * rad)
    k0 = k0.reshape(rad.shape)
    k1 = k1.reshape(rad.shape)
    if b_class == 0 and w_class == 0:
        out = (m * x / rad) * k1 / _PI + l1 * k0 / _PI
    elif b_class == 0 and w_class == 1:
        out = -(m * y / rad) * k1 / _PI + l2 * k0 / _PI
    elif b_class == 1 and w_class == 0:
        out = (m * y / rad) * k1 / _PI + l2 * k0 / _PI
    else:
        out = (m * x / rad) * k1 / _PI - l1 * k0 / _PI
    return float(out) if scalar else out


# ---------------------------------------------------------------------------
# Two-point function
# ---------------------------------------------------------------------------

def s2_integrand(v1, v2, lam):
    """Two-point height-change density along a vertical line."""
    m = _lam_norm(lam)
    d = np.abs(np.asarray(v1, dtype=float) - np.asarray(v2, dtype=float))
    scalar = d.ndim == 0
    if np.any(d == 0.0):
        raise ValueError("two-point density diverges at coincident points")
    k0, k1 = bessel_k0_k1(m * d)
    out = (18.0 / _PI**2) * m * m * (k0 * k0 + k1 * k1)
    return float(out[0]) if scalar else out.reshape(d.shape)


def _pair_density_from_entries(v1: float, v2: float, lam) -> float:
    """S2 density rebuilt from scaled entries (independent code path).

    -9 * sum over class pairs of the zero-diagonal 2x2 determinant; agrees
    with s2_integrand identically (asserted in tests).
    """
    total = 0.0
    for ca, cb in product((0, 1), repeat=2):
        m_ab = scaled_inv_entry(ca, cb, 0.0, v1 - v2, lam)
        m_ba = scaled_inv_entry(cb, ca, 0.0, v2 - v1, lam)
        total += -m_ab * m_ba          # det0 of [[0, m_ab], [m_ba, 0]]
    return -(HEIGHT_JUMP ** 2) * total


# ---------------------------------------------------------------------------
# Interval quadrature (tensor Gauss-Legendre, panels graded at endpoints)
# ---------------------------------------------------------------------------

def _panel_nodes(a: float, b: float, order: int, grade: int = 4):
    """GL nodes/weights on (a,b), geometrically graded toward both ends.

    Grading keeps tensor quadrature accurate when neighbouring intervals
    touch (integrable 1/gap behaviour of K1 products at shared endpoints).
    """
    x, w = np.polynomial.legendre.leggauss(order)
    edges = [0.0]
    for k in range(grade, 0, -1):
        edges.append(0.5 ** k)
    edges += [1.0 - e for e in reversed(edges[:-1])]
    edges = np.array(edges)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        nodes.append(mid + half * x)
        weights.append(half * w)
    return a + (b - a) * np.concatenate(nodes), (b - a) * np.concatenate(weights)


def _interval_ok(gamma):
    a, b = gamma
    return b > a


def s2(gamma_i, gamma_j, lam, tol: float = 1e-8) -> tuple[float, float]:
    """Integrated two-point function over two disjoint intervals.

    Returns (value, error_estimate).
    """
    if not (_interval_ok(gamma_i) and _interval_ok(gamma_j)):
        raise ValueError("intervals must have positive length")
    lo, hi = sorted([tuple(gamma_i), tuple(gamma_j)])
    if hi[0] <= lo[1]:
        raise ValueError(f"intervals overlap or touch: {gamma_i}, {gamma_j}")

    def estimate(order):
        xi, wi = _panel_nodes(*gamma_i, order)
        xj, wj = _panel_nodes(*gamma_j, order)
        vals = s2_integrand(xi[:, None], xj[None, :], lam)
        return float(wi @ vals @ wj)

    order = 8
    prev = estimate(order)
    while order <= 128:
        order *= 2
        cur = estimate(order)
        if abs(cur - prev) <= tol:
            return cur, abs(cur - prev)
        prev = cur
    raise QuadratureError(f"s2 quadrature did not reach tol={tol}")


# ---------------------------------------------------------------------------
# Four-point density and the connected 24-term function
# ---------------------------------------------------------------------------

# Derangements of {0,1,2,3}: three double transpositions (sign +1) and six
# 4-cycles (sign -1), as (permutation, sign).
_DERANGEMENTS_4 = (
    ((1, 0, 3, 2), 1.0), ((2, 3, 0, 1), 1.0), ((3, 2, 1, 0), 1.0),
    ((1, 2, 3, 0), -1.0), ((1, 3, 0, 2), -1.0), ((2, 0, 3, 1), -1.0),
    ((2, 3, 1, 0), -1.0), ((3, 0, 1, 2), -1.0), ((3, 2, 0, 1), -1.0),
)


def _det0_4x4(M: np.ndarray) -> float:
    """Determinant of a 4x4 matrix with its diagonal zeroed."""
    total = 0.0
    for perm, sign in _DERANGEMENTS_4:
        prod = sign
        for a, b in enumerate(perm):
            prod *= M[a, b]
        total += prod
    return total


def four_point_density(x1: float, x2: float, x3: float, x4: float, lam) -> float:
    """Connected-plus-Wick four-point height-change density.

    3^4 times the class-signed sum of zero-diagonal 4x4 determinants of
    scaled inverse entries, all displacements along one vertical line.
    """
    xs = (x1, x2, x3, x4)
    if len(set(xs)) != 4:
        raise ValueError("positions must be distinct")
    total = 0.0
    M = np.empty((4, 4))
    for classes in product((0, 1), repeat=4):
        for a in range(4):
            for b in range(4):
                if a == b:
                    M[a, b] = 0.0
                else:
                    M[a, b] = scaled_inv_entry(
                        classes[a], classes[b], 0.0, xs[a] - xs[b], lam)
        total += _det0_4x4(M)
    return (HEIGHT_JUMP ** 4) * total


# The 24 connected terms: (sign, ((order, gap), ...)) with gaps named by
# the sums of consecutive position differences y1, y2, y3.
_F_TERMS = (
    (-1, ((0, "y1"), (0, "y12"), (0, "y3"), (0, "y23"))),
    (-1, ((0, "y1"), (0, "y2"), (0, "y3"), (0, "y123"))),
    (-1, ((0, "y2"), (0, "y12"), (0, "y23"), (0, "y123"))),
    (+1, ((0, "y3"), (0, "y123"), (1, "y1"), (1, "y2"))),
    (-1, ((0, "y3"), (0, "y23"), (1, "y1"), (1, "y12"))),
    (-1, ((0, "y23"), (0, "y123"), (1, "y2"), (1, "y12"))),
    (+1, ((0, "y12"), (0, "y23"), (1, "y1"), (1, "y3"))),
    (-1, ((0, "y2"), (0, "y123"), (1, "y1"), (1, "y3"))),
    (+1, ((0, "y1"), (0, "y123"), (1, "y2"), (1, "y3"))),
    (+1, ((0, "y1"), (0, "y23"), (1, "y12"), (1, "y3"))),
    (+1, ((0, "y12"), (0, "y3"), (1, "y1"), (1, "y23"))),
    (-1, ((0, "y12"), (0, "y123"), (1, "y2"), (1, "y23"))),
    (+1, ((0, "y1"), (0, "y3"), (1, "y12"), (1, "y23"))),
    (-1, ((0, "y2"), (0, "y123"), (1, "y12"), (1, "y23"))),
    (-1, ((0, "y1"), (0, "y12"), (1, "y3"), (1, "y23"))),
    (-1, ((1, "y1"), (1, "y12"), (1, "y3"), (1, "y23"))),
    (-1, ((0, "y2"), (0, "y3"), (1, "y1"), (1, "y123"))),
    (+1, ((0, "y1"), (0, "y3"), (1, "y2"), (1, "y123"))),
    (-1, ((0, "y12"), (0, "y23"), (1, "y2"), (1, "y123"))),
    (-1, ((0, "y2"), (0, "y23"), (1, "y12"), (1, "y123"))),
    (-1, ((0, "y1"), (0, "y2"), (1, "y3"), (1, "y123"))),
    (+1, ((1, "y1"), (1, "y2"), (1, "y3"), (1, "y123"))),
    (-1, ((0, "y2"), (0, "y12"), (1, "y23"), (1, "y123"))),
    (-1, ((1, "y2"), (1, "y12"), (1, "y23"), (1, "y123"))),
)


def f_connected(y1, y2, y3, lam):
    """The 24-term connected four-point function (published normalization).

    y1, y2, y3 are consecutive gaps between the four ordered positions;
    each term is +-(4 m^4 / pi^4) times a product of four Bessel factors at
    the six gap combinations.  Depends on lam only through its norm.
    """
    m = _lam_norm(lam)
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    y3 = np.asarray(y3, dtype=float)
    if np.any(y1 <= 0) or np.any(y2 <= 0) or np.any(y3 <= 0):
        raise ValueError("gaps must be positive")
    gaps = {
        "y1": y1, "y2": y2, "y3": y3,
        "y12": y1 + y2, "y23": y2 + y3, "y123": y1 + y2 + y3,
    }
    tables = {}
    for name, g in gaps.items():
        k0, k1 = bessel_k0_k1(m * g)
        tables[name] = (k0.reshape(g.shape) if g.shape else k0[0],
                        k1.reshape(g.shape) if g.shape else k1[0])
    total = 0.0
    for sign, factors in _F_TERMS:
        term = sign * np.ones_like(y1, dtype=float) if y1.shape else float(sign)
        for order, name in factors:
            term = term * tables[name][order]
        total = total + term
    out = (4.0 * m**4 / _PI**4) * total
    return out if isinstance(out, np.ndarray) and out.shape else float(out)


def f_connected_positive_negative(y1, y2, y3, lam) -> tuple[float, float]:
    """(sum of positive terms, -sum of negative terms), both nonnegative."""
    m = _lam_norm(lam)
    gaps = {"y1": y1, "y2": y2, "y3": y3,
            "y12": y1 + y2, "y23": y2 + y3, "y123": y1 + y2 + y3}
    tables = {}
    for name, g in gaps.items():
        if g <= 0:
            raise ValueError("gaps must be positive")
        k0, k1 = bessel_k0_k1(m * g)
        tables[name] = (float(k0[0]), float(k1[0]))
    pos = neg = 0.0
    for sign, factors in _F_TERMS:
        term = 1.0
        for order, name in factors:
            term *= tables[name][order]
        if sign > 0:
            pos += term
        else:
            neg += term
    scale = 4.0 * m**4 / _PI**4
    return scale * pos, scale * neg


def positivity_bounds(y2: float, n: int, lam) -> tuple[float, float]:
    """Bound pair certifying f > 0 on the pinched-interval configuration.

    Returns a lower bound for the positive term group g+ (evaluated at
    gaps (y2,y2,y2)) and an upper bound for the negative group g-
    (evaluated at the shrunken gaps c*y2 with c = (2^n-2)/(2^n+2)); every
    Bessel factor is decreasing so the evaluations bound the groups over
    y1, y3 in [c*y2, y2].
    """
    if y2 <= 0:
        raise ValueError("y2 must be positive")
    if n < 2:
        raise ValueError("n must be at least 2")
    c = (2.0**n - 2.0) / (2.0**n + 2.0)
    g_plus_lower, _ = f_connected_positive_negative(y2, y2, y2, lam)
    _, g_minus_upper = f_connected_positive_negative(c * y2, y2, c * y2, lam)
    return g_plus_lower, g_minus_upper


# ---------------------------------------------------------------------------
# Wick defect
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CorrelationSpec:
    """Disjoint intervals on a common vertical line plus the rates."""

    intervals: tuple[tuple[float, float], ...]
    lam1: float
    lam2: float
    tol: float = 1e-6

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")
        for g in self.intervals:
            if not _interval_ok(g):
                raise ValueError(f"interval {g} has nonpositive length")
        spans = sorted(self.intervals)
        for a, b in zip(spans[:-1], spans[1:]):
            # touching counts as overlap: the pair correlation S2 diverges
            # across a shared endpoint (K1^2 is not integrable there)
            if b[0] <= a[1]:
                raise ValueError(f"intervals overlap: {a}, {b}")

    @property
    def lam(self) -> tuple[float, float]:
        return (self.lam1, self.lam2)


@dataclass(frozen=True)
class WickReport:
    s4: float
    wick_sum: float
    defect: float
    error_estimate: float
    certified: bool
    connected_integral: float   # defect / 3^4, the published normalization


# With intervals sorted ascending the six gap names map to fixed axis pairs.
_GAP_AXES = {"y1": (0, 1), "y2": (1, 2), "y3": (2, 3),
             "y12": (0, 2), "y23": (1, 3), "y123": (0, 3)}


def _connected_tensor_integral(intervals, lam, order: int) -> float:
    """One tensor-quadrature pass of the connected-function integral.

    Every term of the connected function is a product of four factors each
    depending on one pair of integration axes, so the 4D sum contracts as
    a cycle of matrices (einsum) instead of a dense 4D grid.
    """
    m = _lam_norm(lam)
    nodes = [_panel_nodes(a, b, order) for (a, b) in intervals]
    xs = [n for n, _ in nodes]
    ws = [w for _, w in nodes]
    pair_k = {}
    for name, (i, j) in _GAP_AXES.items():
        gap = xs[j][None, :] - xs[i][:, None]
        if np.any(gap <= 0):
            raise ValueError("intervals must be disjoint and ordered")
        k0, k1 = bessel_k0_k1(m * gap)
        pair_k[name] = (k0.reshape(gap.shape), k1.reshape(gap.shape))
    subscripts = {"y1": "ab", "y2": "bc", "y3": "cd",
                  "y12": "ac", "y23": "bd", "y123": "ad"}
    total = 0.0
    for sign, factors in _F_TERMS:
        operands = [ws[0], ws[1], ws[2], ws[3]]
        spec_parts = ["a", "b", "c", "d"]
        for order_idx, name in factors:
            operands.append(pair_k[name][order_idx])
            spec_parts.append(subscripts[name])
        expr = ",".join(spec_parts) + "->"
        total += sign * float(np.einsum(expr, *operands, optimize=True))
    return (4.0 * m**4 / _PI**4) * total


def _defect_integral(spec: CorrelationSpec) -> tuple[float, float]:
    """Quadruple integral of f_connected over the four intervals."""
    intervals = sorted(tuple(g) for g in spec.intervals)
    results = [_connected_tensor_integral(intervals, spec.lam, order)
               for order in (8, 12, 16)]
    return results[-1], abs(results[-1] - results[-2])


def wick_defect(spec: CorrelationSpec) -> WickReport:
    """S4 minus its Wick approximation over four disjoint intervals.

    The defect equals 3^4 times the integral of the connected function;
    a nonzero certified defect witnesses non-Gaussian height fluctuations.
    """
    if len(spec.intervals) != 4:
        raise ValueError("wick_defect needs exactly four intervals")
    pair_tol = spec.tol / 12.0
    s2_vals = {}
    err_pairs = 0.0
    for i in range(4):
        for j in range(i + 1, 4):
            v, e = s2(spec.intervals[i], spec.intervals[j], spec.lam, pair_tol)
            s2_vals[(i, j)] = v
            err_pairs += e
    wick = (s2_vals[(0, 1)] * s2_vals[(2, 3)]
            + s2_vals[(0, 2)] * s2_vals[(1, 3)]
            + s2_vals[(0, 3)] * s2_vals[(1, 2)])
    connected, err_f = _defect_integral(spec)
    defect = WICK_HEIGHT_FACTOR * connected
    err = WICK_HEIGHT_FACTOR * err_f + err_pairs
    certified = abs(defect) > 3.0 * err
    return WickReport(s4=wick + defect, wick_sum=wick, defect=defect,
                      error_estimate=err, certified=certified,
                      connected_integral=connected)
