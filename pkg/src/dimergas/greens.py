"""Massive and drifted lattice operators and their Green's functions.

The massive operator (on the doubly-even sublattice, steps e1=(2,0),
e2=(0,2)) is

    L_f f(v) = r2 r4 [f(v+e1)+f(v-e1)] + r1 r3 [f(v+e2)+f(v-e2)]
               - (r1^2+r2^2+r3^2+r4^2) f(v),

the composition K*K of the Kasteleyn operator with its dual; its killing
rate (r1-r3)^2 + (r2-r4)^2 vanishes exactly at criticality.  The drifted
operator

    L_d f(v) = s1 f(v+e2) + s2 f(v+e1) + s3 f(v-e2) + s4 f(v-e1)
               - (s1+s2+s3+s4) f(v)

is the generator of the random walk stepping N,E,S,W with probabilities
(s1,s2,s3,s4)/sum(s).

Discrete Green's functions solve L H = -delta_0 and are Fourier
coefficients of -1/P on the appropriate torus.  In the scaling window with
weights (1, 1-l1*eps, 1-l2*eps, 1) the rescaled massive Green's function
converges to

    H(x,y) = (1/pi) K_0(|l| sqrt(x^2+y^2)),

where K_n is the modified Bessel function of the second kind.  The
continuum normalization is that of a standard Brownian motion (generator
Laplacian/2), which is twice the raw lattice limit; the sweep tests carry
the factor 2 explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import DriftedWeights, FlippedWeights
from .spectral import QuadratureError

_EULER_GAMMA = 0.5772156649015328606


# ---------------------------------------------------------------------------
# Modified Bessel functions of the second kind, orders 0 and 1
# ---------------------------------------------------------------------------

_SERIES_TERMS = 26
_CF_MAX_ITER = 120
_CF_SPLIT = 2.0


def _bessel_small(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(K0, K1) by the ascending series, accurate for 0 < x <= ~2.3."""
    q = 0.25 * x * x
    log_half_x = np.log(0.5 * x)

    i0 = np.ones_like(x)
    i1_over = np.ones_like(x)          # I1(x)/(x/2)
    k0 = np.zeros_like(x)
    k1_sum = np.full_like(x, 1.0 - 2.0 * _EULER_GAMMA)

    term0 = np.ones_like(x)            # q^k / (k!)^2
    term1 = np.ones_like(x)            # q^k / (k! (k+1)!)
    harmonic = 0.0
    for k in range(1, _SERIES_TERMS):
        term0 = term0 * q / (k * k)
        term1 = term1 * q / (k * (k + 1))
        harmonic += 1.0 / k
        i0 = i0 + term0
        i1_over = i1_over + term1
        k0 = k0 + term0 * harmonic
        # psi(k+1) + psi(k+2) = -2 gamma + 2 H_k + 1/(k+1)
        k1_sum = k1_sum + term1 * (-2.0 * _EULER_GAMMA + 2.0 * harmonic + 1.0 / (k + 1))
    k0 = k0 - (log_half_x + _EULER_GAMMA) * i0
    i1 = 0.5 * x * i1_over
    k1 = 1.0 / x + log_half_x * i1 - 0.25 * x * k1_sum
    return k0, k1


def _bessel_large(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(K0, K1) by the Steed continued fraction, accurate for x >= ~1.5."""
    a1 = 0.25
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    q = np.full_like(x, a1)
    c = np.full_like(x, a1)
    a = -a1
    s = 1.0 + q * delh
    converged = np.zeros(x.shape, dtype=bool)
    for i in range(2, _CF_MAX_ITER):
        a -= 2.0 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = h + delh
        dels = q * delh
        s = s + dels
        converged = np.abs(dels) < 1e-17 * np.abs(s)
        if converged.all():
            break
    if not converged.all():
        raise QuadratureError("Bessel continued fraction failed to converge")
    h = a1 * h
    k0 = np.sqrt(np.pi / (2.0 * x)) * np.exp(-x) / s
    k1 = k0 * (x + 0.5 - h) / x
    return k0, k1


def bessel_k(n: int, x):
    """K_n(x) for n in {0, 1}, relative accuracy ~1e-13.

    Ascending series below x = 2, Steed continued fraction above; the two
    branches agree to ~1e-14 across the crossover band (asserted in tests).
    """
    if n not in (0, 1):
        raise ValueError("only orders 0 and 1 are supported")
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any(arr <= 0.0):
        raise ValueError("bessel_k requires x > 0")
    k = np.empty_like(arr)
    small = arr <= _CF_SPLIT
    if small.any():
        k0s, k1s = _bessel_small(arr[small])
        k[small] = k0s if n == 0 else k1s
    if (~small).any():
        k0l, k1l = _bessel_large(arr[~small])
        k[~small] = k0l if n == 0 else k1l
    return float(k[0]) if scalar else k


def bessel_k0_k1(x):
    """Both orders at once (saves a pass in the correlation quadratures)."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(arr <= 0.0):
        raise ValueError("bessel_k requires x > 0")
    k0 = np.empty_like(arr)
    k1 = np.empty_like(arr)
    small = arr <= _CF_SPLIT
    if small.any():
        k0[small], k1[small] = _bessel_small(arr[small])
    if (~small).any():
        k0[~small], k1[~small] = _bessel_large(arr[~small])
    return k0, k1


# ---------------------------------------------------------------------------
# Scaling window parameters and continuum Green's functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingParams:
    """Perturbation rates (lam1, lam2) and lattice mesh eps."""

    lam1: float
    lam2: float
    eps: float = 0.0

    def __post_init__(self):
        if self.lam1 < 0 or self.lam2 < 0:
            raise ValueError("perturbation rates must be nonnegative")
        if self.eps < 0:
            raise ValueError("mesh must be nonnegative")

    @property
    def lam(self) -> float:
        return math.hypot(self.lam1, self.lam2)


def _as_params(p) -> ScalingParams:
    if isinstance(p, ScalingParams):
        return p
    lam1, lam2 = p
    return ScalingParams(float(lam1), float(lam2))


def scaling_weights(lam1: float, lam2: float, eps: float) -> FlippedWeights:
    """The flipped scaling-window family (1, 1 - lam1 eps, 1 - lam2 eps, 1)."""
    return FlippedWeights(1.0, 1.0 - lam1 * eps, 1.0 - lam2 * eps, 1.0)


def anisotropic_scaling_weights(lam1: float, lam2: float, eps: float,
                                k1: float, k2: float) -> FlippedWeights:
    """Scaling family with unequal limits r1 -> k2, r4 -> k1."""
    return FlippedWeights(k2, k1 - lam2 * eps, k2 - lam1 * eps, k1)


def green_massive(x: float, y: float, p) -> float:
    """Scaling-window Green's function of the massive walk, (1/pi) K0(|l| r)."""
    p = _as_params(p)
    rad = math.hypot(x, y)
    if rad == 0.0:
        raise ValueError("massive Green's function diverges at the origin")
    if p.lam <= 0.0:
        raise ValueError("massive Green's function requires |lambda| > 0")
    return bessel_k(0, p.lam * rad) / math.pi


def green_drifted(x: float, y: float, p) -> float:
    """Drifted-walk Green's function, exp(l1 x - l2 y)/pi * K0(|l| r)."""
    p = _as_params(p)
    return math.exp(p.lam1 * x - p.lam2 * y) * green_massive(x, y, p)


def green_anisotropic(x: float, y: float, p, k1: float, k2: float) -> float:
    """Green's function of the r1 -> k2, r4 -> k1 limit family."""
    if k1 <= 0 or k2 <= 0:
        raise ValueError("anisotropy factors must be positive")
    p = _as_params(p)
    arg = 0.5 * p.lam * math.hypot(x * k1, y * k2)
    if arg == 0.0:
        raise ValueError("anisotropic Green's function diverges at the origin")
    return bessel_k(0, arg) / math.pi


# ---------------------------------------------------------------------------
# Lattice operators
# ---------------------------------------------------------------------------

E1 = (2, 0)
E2 = (0, 2)


def massive_apply(f, v: tuple[int, int], r: FlippedWeights) -> float:
    """Apply the massive operator L_f to a grid function at vertex v."""
    x, y = v
    rsq = r.r1**2 + r.r2**2 + r.r3**2 + r.r4**2
    return (r.r2 * r.r4 * (f(x + 2, y) + f(x - 2, y))
            + r.r1 * r.r3 * (f(x, y + 2) + f(x, y - 2))
            - rsq * f(x, y))


def drifted_apply(f, v: tuple[int, int], s: DriftedWeights) -> float:
    """Apply the drifted operator L_d to a grid function at vertex v."""
    x, y = v
    return (s.s1 * f(x, y + 2) + s.s2 * f(x + 2, y)
            + s.s3 * f(x, y - 2) + s.s4 * f(x - 2, y)
            - s.total * f(x, y))


# ---------------------------------------------------------------------------
# Discrete Green's functions
# ---------------------------------------------------------------------------

class _MassiveGreenEngine:
    """Fourier coefficients of -1/P_f by residues in w and a 1D theta rule.

    H(x, y) = (1/pi) Int_0^pi cos(y theta) rho(theta)^|x|
              / (2 r2 r4 sqrt(a^2 - 1)) dtheta,
    a(theta) = (R^2 - 2 r1 r3 cos theta)/(2 r2 r4), rho = a - sqrt(a^2-1).
    """

    def __init__(self, r: FlippedWeights):
        self.r = r
        self._grids: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def _grid(self, n: int):
        cached = self._grids.get(n)
        if cached is not None:
            return cached
        r = self.r
        theta = np.pi * (np.arange(n) + 0.5) / n
        rsq = r.r1**2 + r.r2**2 + r.r3**2 + r.r4**2
        a = (rsq - 2.0 * r.r1 * r.r3 * np.cos(theta)) / (2.0 * r.r2 * r.r4)
        root = np.sqrt(np.maximum(a * a - 1.0, 0.0))
        rho = 1.0 / (a + root)
        self._grids[n] = (theta, root, rho)
        return self._grids[n]

    def value(self, x: int, y: int, tol: float, max_n: int = 1 << 20) -> tuple[float, float]:
        if self.r.mass == 0.0 and max(abs(x), abs(y)) > 0:
            raise QuadratureError(
                "discrete massive Green's function diverges at criticality")

        def estimate(n):
            theta, root, rho = self._grid(n)
            vals = np.cos(y * theta) * rho ** abs(x) / root
            return float(np.mean(vals)) / (2.0 * self.r.r2 * self.r.r4)

        n = 512
        prev = estimate(n)
        while n < max_n:
            n *= 2
            cur = estimate(n)
            if abs(cur - prev) <= tol:
                return cur, abs(cur - prev)
            prev = cur
        raise QuadratureError(
            f"discrete Green's function ({x},{y}) did not reach tol={tol}",
            diagnostics={"weights": self.r.as_tuple()})


_green_engines: dict[FlippedWeights, _MassiveGreenEngine] = {}


def discrete_green_massive(x: int, y: int, r: FlippedWeights, tol: float = 1e-10) -> float:
    """Green's function of the massive walk on the lattice: the (x, y)
    Fourier coefficient of -1/P_f (x horizontal, y vertical, in e1/e2
    steps).  Satisfies massive_apply(H, v) = -delta_0(v).
    """
    engine = _green_engines.get(r)
    if engine is None:
        engine = _green_engines.setdefault(r, _MassiveGreenEngine(r))
    return engine.value(x, y, tol)[0]


def discrete_green_drifted(x: int, y: int, s: DriftedWeights, tol: float = 1e-10,
                           max_n: int = 4096) -> float:
    """Green's function of the drifted walk, by FFT of -1/symbol on the
    balanced torus |z| = sqrt(s4/s2), |w| = sqrt(s3/s1) (the symbol's
    amoeba hole), where it is strictly negative.

    Index convention matches discrete_green_massive: x counts e1 = (2,0)
    steps (weights s2/s4), y counts e2 = (0,2) steps (weights s1/s3).
    """
    zr = math.sqrt(s.s4 / s.s2)
    wr = math.sqrt(s.s3 / s.s1)

    # L_d acts by convolution with sigma(1/z, 1/w), so H(x, y) is the
    # (-x, -y) Laurent coefficient of -1/sigma on the hole torus.
    def estimate(n):
        theta = 2.0 * np.pi * np.arange(n) / n
        zs = zr * np.exp(1j * theta)[:, None]
        ws = wr * np.exp(1j * theta)[None, :]
        symbol = s.s2 * zs + s.s4 / zs + s.s1 * ws + s.s3 / ws - s.total
        coeff = np.fft.fft2(-1.0 / symbol)[(-x) % n, (-y) % n] / (n * n)
        return coeff * zr ** x * wr ** y

    n = 256
    prev = estimate(n)
    while n < max_n:
        n *= 2
        cur = estimate(n)
        if abs(cur - prev) <= tol:
            return float(cur.real)
        prev = cur
    raise QuadratureError(
        f"drifted Green's function ({x},{y}) did not reach tol={tol}",
        diagnostics={"weights": s.as_tuple()})
