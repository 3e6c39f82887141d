"""Fundamental-domain Kasteleyn matrices and torus-quadrature statistics.

The 2x2 Fourier-transformed Kasteleyn matrices (rows w0,w1; columns b0,b1)
are

    K_f(z,w) = [[r2 - r4 z,     r3 - r1 w    ],
                [r3 - r1 / w,   -r2 + r4 / z ]]

    K_d(z,w) = [[s2 - s4 z,     1 - w        ],
                [s3 - s1 / w,   -1 + 1 / z   ]]

and are exactly the transforms of the signed edge-weight fields frozen in
`lattice` (monomial z^dx w^dy over fundamental-domain offsets).  The
characteristic polynomials P are kept in their reference form, whose (z,w)
pairing differs from the matrix convention by a variable swap:

    det K_f(z,w) = P_f(w, z)          det K_d(z,w) = P_d(w, 1/z)

Inverse-Kasteleyn entries are Fourier coefficients of the entries of
K(z,w)^-1.  For the flipped model the inner integral over w has a closed
form (simple poles of 1/det), leaving a single smooth periodic theta
integral that converges spectrally under midpoint refinement; the drifted
model uses a 2D FFT of the inverse entries with dyadic grid doubling.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .lattice import (
    DriftedWeights,
    Edge,
    FlippedWeights,
    VertexClass,
    classify_vertex,
    domain_offset,
    signed_weight,
)


class QuadratureError(RuntimeError):
    """Raised when dyadic refinement fails to reach the requested tolerance."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


# ---------------------------------------------------------------------------
# Fundamental matrices and characteristic polynomials
# ---------------------------------------------------------------------------

def kf_matrix(r: FlippedWeights, z, w) -> np.ndarray:
    """Flipped Kasteleyn matrix of the fundamental domain at (z, w)."""
    z, w = np.broadcast_arrays(np.asarray(z, dtype=complex),
                               np.asarray(w, dtype=complex))
    row0 = np.stack([r.r2 - r.r4 * z, r.r3 - r.r1 * w], axis=-1)
    row1 = np.stack([r.r3 - r.r1 / w, -r.r2 + r.r4 / z], axis=-1)
    return np.stack([row0, row1], axis=-2)


def kd_matrix(s: DriftedWeights, z, w) -> np.ndarray:
    """Drifted Kasteleyn matrix of the fundamental domain at (z, w)."""
    z, w = np.broadcast_arrays(np.asarray(z, dtype=complex),
                               np.asarray(w, dtype=complex))
    one = np.ones_like(z)
    row0 = np.stack([s.s2 - s.s4 * z, one - w], axis=-1)
    row1 = np.stack([s.s3 - s.s1 / w, -one + 1.0 / z], axis=-1)
    return np.stack([row0, row1], axis=-2)


def _check_torus_args(z, w):
    if np.any(z == 0) or np.any(w == 0):
        raise ValueError("characteristic polynomials require z, w != 0")


def charpoly_flipped(r: FlippedWeights, z, w):
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    _check_torus_args(z, w)
    rsq = r.r1**2 + r.r2**2 + r.r3**2 + r.r4**2
    return r.r2 * r.r4 * (w + 1.0 / w) + r.r1 * r.r3 * (z + 1.0 / z) - rsq


def charpoly_drifted(s: DriftedWeights, z, w):
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    _check_torus_args(z, w)
    return s.s2 * w + s.s4 / w + s.s3 * z + s.s1 / z - s.total


def charpoly_square_octagon(t: float, z, w):
    if t <= 0:
        raise ValueError("square-octagon weight t must be positive")
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    _check_torus_args(z, w)
    t2 = t * t
    return 4.0 + t2 * t2 - t2 * (w + 1.0 / w + z + 1.0 / z)


@dataclass(frozen=True)
class CharPoly:
    """A characteristic polynomial, tagged by model family."""

    tag: str                      # "flipped" | "drifted" | "square-octagon"
    weights: tuple[float, ...]

    @staticmethod
    def flipped(r: FlippedWeights) -> "CharPoly":
        return CharPoly("flipped", r.as_tuple())

    @staticmethod
    def drifted(s: DriftedWeights) -> "CharPoly":
        return CharPoly("drifted", s.as_tuple())

    @staticmethod
    def square_octagon(t: float) -> "CharPoly":
        return CharPoly("square-octagon", (float(t),))

    def __call__(self, z, w):
        if self.tag == "flipped":
            return charpoly_flipped(FlippedWeights(*self.weights), z, w)
        if self.tag == "drifted":
            return charpoly_drifted(DriftedWeights(*self.weights), z, w)
        if self.tag == "square-octagon":
            return charpoly_square_octagon(self.weights[0], z, w)
        raise ValueError(f"unknown model tag {self.tag!r}")

    @property
    def coefficient_scale(self) -> float:
        """Rough magnitude of the Laurent coefficients (for tolerances)."""
        return float(np.sum(np.abs(self.weights)) ** 2 + 4.0)


# ---------------------------------------------------------------------------
# Free energy
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FreeEnergyResult:
    value: float
    error_estimate: float
    n_grid: int


def _log_abs_mean(P: CharPoly, n: int) -> float:
    """Mean of log|P| over an offset n x n torus grid (dodges lattice zeros)."""
    theta = 2.0 * np.pi * (np.arange(n) + 0.5) / n
    z = np.exp(1j * theta)
    total = 0.0
    chunk = max(1, (1 << 22) // n)
    for lo in range(0, n, chunk):
        zc = z[lo:lo + chunk, None]
        vals = P(zc, z[None, :])
        total += float(np.sum(np.log(np.abs(vals))))
    return total / (n * n)


def free_energy(P: CharPoly, tol: float = 1e-8, max_n: int = 8192) -> FreeEnergyResult:
    """(1/4pi^2) double integral of log|P| over the unit torus.

    Uses offset midpoint grids with dyadic doubling; the rule is spectrally
    accurate off criticality and still convergent (integrable log
    singularity) when P has isolated torus zeros.
    """
    n = 64
    prev = _log_abs_mean(P, n)
    history = [(n, prev)]
    while n < max_n:
        n *= 2
        cur = _log_abs_mean(P, n)
        history.append((n, cur))
        if abs(cur - prev) <= tol:
            return FreeEnergyResult(cur, abs(cur - prev), n)
        prev = cur
    # Each doubling at least quarters the error for the singular-log case;
    # extrapolate once before giving up.
    (n1, v1), (n2, v2) = history[-2], history[-1]
    richardson = v2 + (v2 - v1) / 3.0
    if abs(richardson - v2) <= tol:
        return FreeEnergyResult(richardson, abs(richardson - v2), n2)
    raise QuadratureError(
        f"free energy did not converge to {tol} by n={max_n}",
        diagnostics={"history": history, "tag": P.tag, "weights": P.weights},
    )


# ---------------------------------------------------------------------------
# Inverse Kasteleyn entries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InverseEntry:
    value: float
    b_class: VertexClass
    w_class: VertexClass
    x: int
    y: int
    error_estimate: float


class _FlippedEngine:
    """Semi-analytic Fourier coefficients of K_f(z,w)^-1.

    The w-integral of 1/det is done by residues: with
    A(theta) = R^2 - 2 r2 r4 cos(theta) and B = r1 r3,

        (1/2pi) Int e^{i k phi} / (2 B cos(phi) - A) dphi
            = -rho^|k| / (2 B sqrt(a^2-1)),   a = A/(2B), rho = a - sqrt(a^2-1),

    leaving a single even periodic theta-integral per entry, evaluated by
    midpoint rule with dyadic doubling (endpoints avoided so the critical
    point's integrable singularity needs no special casing).
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
        a = (rsq - 2.0 * r.r2 * r.r4 * np.cos(theta)) / (2.0 * r.r1 * r.r3)
        root = np.sqrt(np.maximum(a * a - 1.0, 0.0))
        rho = 1.0 / (a + root)
        self._grids[n] = (theta, root, rho)
        return self._grids[n]

    def _j(self, n: int, k: int) -> np.ndarray:
        theta, root, rho = self._grid(n)
        B = self.r.r1 * self.r.r3
        with np.errstate(divide="ignore"):
            vals = -(rho ** abs(k)) / (2.0 * B * root)
        return vals

    def _integrand(self, n, b_idx, w_idx, dx, dy):
        theta, _, _ = self._grid(n)
        r = self.r
        if b_idx == 0 and w_idx == 0:
            return (-r.r2 * np.cos(dx * theta) + r.r4 * np.cos((dx + 1) * theta)) * self._j(n, dy)
        if b_idx == 0 and w_idx == 1:
            return np.cos(dx * theta) * (-r.r3 * self._j(n, dy) + r.r1 * self._j(n, dy - 1))
        if b_idx == 1 and w_idx == 0:
            return np.cos(dx * theta) * (-r.r3 * self._j(n, dy) + r.r1 * self._j(n, dy + 1))
        return (r.r2 * np.cos(dx * theta) - r.r4 * np.cos((dx - 1) * theta)) * self._j(n, dy)

    def entry(self, b_idx: int, w_idx: int, dx: int, dy: int,
              tol: float = 1e-9, max_n: int = 1 << 20) -> tuple[float, float]:
        n = 512
        prev = float(np.mean(self._integrand(n, b_idx, w_idx, dx, dy)))
        while n < max_n:
            n *= 2
            cur = float(np.mean(self._integrand(n, b_idx, w_idx, dx, dy)))
            if abs(cur - prev) <= tol:
                return cur, abs(cur - prev)
            prev = cur
        raise QuadratureError(
            f"flipped inverse entry ({b_idx},{w_idx},{dx},{dy}) did not reach tol={tol}",
            diagnostics={"weights": self.r.as_tuple(), "last": prev},
        )


class _FourierEngine:
    """Inverse-entry Fourier coefficients via 2D FFT with dyadic doubling.

    The expansion contour must avoid zeros of det K.  The flipped model is
    zero-free on the unit torus off criticality; the drifted symbol always
    vanishes at (1,1) (it is a Markov generator), so its coefficients are
    taken on the torus |z| = sqrt(s2/s4), |w| = sqrt(s1/s3) through the
    center of its amoeba hole, where the symbol is strictly negative:

        det K_d there = 2 sqrt(s2 s4) cos(theta) + 2 sqrt(s1 s3) cos(phi)
                        - (s1+s2+s3+s4)  <=  -((sqrt(s1)-sqrt(s3))^2 + ...).

    This is the expansion that yields the infinite-volume Gibbs measure
    (validated downstream: probabilities in [0,1], edge sums, measure
    equivalence).  Also serves as an independent cross-check of
    `_FlippedEngine` for the flipped model.
    """

    def __init__(self, weights):
        self.weights = weights
        if isinstance(weights, DriftedWeights):
            self.radius_z = float(np.sqrt(weights.s2 / weights.s4))
            self.radius_w = float(np.sqrt(weights.s1 / weights.s3))
        else:
            self.radius_z = 1.0
            self.radius_w = 1.0
        self._tables: dict[int, np.ndarray] = {}

    def _table(self, n: int) -> np.ndarray:
        cached = self._tables.get(n)
        if cached is not None:
            return cached
        theta = 2.0 * np.pi * np.arange(n) / n
        z = self.radius_z * np.exp(1j * theta)[:, None]
        w = self.radius_w * np.exp(1j * theta)[None, :]
        if isinstance(self.weights, FlippedWeights):
            mat = kf_matrix(self.weights, z, w)
        else:
            mat = kd_matrix(self.weights, z, w)
        A = mat[..., 0, 0]
        B = mat[..., 0, 1]
        C = mat[..., 1, 0]
        D = mat[..., 1, 1]
        det = A * D - B * C
        coeffs = np.empty((2, 2, n, n), dtype=complex)
        for bi, num in ((0, D), (1, -C)):
            coeffs[bi, 0] = np.fft.fft2(num / det) / (n * n)
        for bi, num in ((0, -B), (1, A)):
            coeffs[bi, 1] = np.fft.fft2(num / det) / (n * n)
        self._tables[n] = coeffs
        return coeffs

    def entry(self, b_idx: int, w_idx: int, dx: int, dy: int,
              tol: float = 1e-9, max_n: int = 4096) -> tuple[float, float]:
        scale = self.radius_z ** (-dx) * self.radius_w ** (-dy)
        n = 128
        while 4 * max(abs(dx), abs(dy)) >= n:
            n *= 2
        prev = self._table(n)[b_idx, w_idx, dx % n, dy % n] * scale
        while n < max_n:
            n *= 2
            cur = self._table(n)[b_idx, w_idx, dx % n, dy % n] * scale
            if abs(cur - prev) <= tol:
                if abs(cur.imag) > max(tol, 1e-10) * 10:
                    raise QuadratureError(
                        f"inverse entry has non-negligible imaginary part {cur.imag}")
                return float(cur.real), float(abs(cur - prev))
            prev = cur
        raise QuadratureError(
            f"fft inverse entry ({b_idx},{w_idx},{dx},{dy}) did not reach tol={tol}",
            diagnostics={"weights": self.weights.as_tuple(), "last": complex(prev)},
        )


@lru_cache(maxsize=64)
def _engine_for(weights):
    if isinstance(weights, FlippedWeights):
        return _FlippedEngine(weights)
    if weights == DriftedWeights(1, 1, 1, 1):
        # the uniform drifted and flipped matrices coincide, and the
        # residue engine handles the critical torus zero
        return _FlippedEngine(FlippedWeights(1, 1, 1, 1))
    return _FourierEngine(weights)


@lru_cache(maxsize=64)
def _fft_engine_for(weights):
    return _FourierEngine(weights)


def inv_kasteleyn(weights, b_class: VertexClass, w_class: VertexClass,
                  x: int, y: int, tol: float = 1e-9,
                  method: str = "auto") -> InverseEntry:
    """Inverse-Kasteleyn entry K^-1(b, w + (x,y)) by torus quadrature.

    (x, y) is the fundamental-domain offset of the white vertex relative to
    the black one.  Flipped entries are real; the drifted engine checks and
    discards a negligible imaginary part.
    """
    if b_class.is_black is False or w_class.is_black:
        raise ValueError("b_class must be black and w_class white")
    if method == "auto":
        engine = _engine_for(weights)
    elif method == "fft":
        engine = _fft_engine_for(weights)
    elif method == "series1d":
        if not isinstance(weights, FlippedWeights):
            raise ValueError("series1d method applies to the flipped model only")
        engine = _engine_for(weights)
    else:
        raise ValueError(f"unknown method {method!r}")
    value, err = engine.entry(b_class.index, w_class.index, x, y, tol)
    return InverseEntry(value, b_class, w_class, x, y, err)


@lru_cache(maxsize=1 << 18)
def inverse_entry_value(weights, b_class, w_class, x, y, tol=1e-9) -> float:
    return inv_kasteleyn(weights, b_class, w_class, x, y, tol).value


# ---------------------------------------------------------------------------
# Local statistics
# ---------------------------------------------------------------------------

def local_stats(edges: list[Edge], weights, tol: float = 1e-9) -> float:
    """Probability that all given edges are covered, in the infinite-volume
    measure of the weight family.

    P = prod_j K(w_j, b_j) * det[ K^-1(b_i, w_j) ].
    """
    seen = set()
    for e in edges:
        for v in e.vertices():
            if v in seen:
                raise ValueError(f"edges share vertex {v}")
            seen.add(v)
    m = len(edges)
    if m == 0:
        return 1.0
    entry_tol = tol / (8 * m)
    prefactor = 1.0
    for e in edges:
        prefactor *= signed_weight(e, weights)
    mat = np.empty((m, m))
    for i, ei in enumerate(edges):
        b_cls = classify_vertex(*ei.black)
        db = domain_offset(*ei.black)
        for j, ej in enumerate(edges):
            w_cls = classify_vertex(*ej.white)
            dw = domain_offset(*ej.white)
            mat[i, j] = inverse_entry_value(
                weights, b_cls, w_cls, dw[0] - db[0], dw[1] - db[1], entry_tol)
    return float(prefactor * np.linalg.det(mat))


def edge_probability(e: Edge, weights, tol: float = 1e-9) -> float:
    return local_stats([e], weights, tol)
