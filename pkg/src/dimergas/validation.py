"""The acceptance battery: every headline property as a pass/fail check.

Each criterion function returns a CriterionResult; `run_all` executes a
selection and reports one line per criterion.  The same functions back
tests/test_acceptance.py and the `dimergas validate` subcommand.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy import stats

from . import amoeba as am
from . import correlations as corr
from . import greens as gr
from . import sampler as sp
from . import spectral
from .lattice import DriftedWeights, Edge, FlippedWeights, VertexClass, to_drifted

_B = {0: VertexClass.B0, 1: VertexClass.B1}
_W = {0: VertexClass.W0, 1: VertexClass.W1}


@dataclass
class CriterionResult:
    cid: int
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] criterion {self.cid:2d}: {self.name} ({self.seconds:.1f}s)"


def _random_weights(rng: np.random.Generator) -> FlippedWeights:
    """Random flipped weights, rejected while too close to criticality.

    The quadrature budget assumes a gaseous model; the equivalence theorem
    itself holds for every positive weight vector.
    """
    while True:
        r = FlippedWeights(*np.exp(rng.uniform(np.log(0.5), np.log(2.0), 4)))
        scale = sum(r.as_tuple()) / 4.0
        if r.mass >= 0.05 * scale * scale:
            return r


def _window_edges(size: int = 4) -> list[Edge]:
    edges = []
    for x in range(size):
        for y in range(size):
            if x + 1 < size:
                edges.append(Edge.between((x, y), (x + 1, y)))
            if y + 1 < size:
                edges.append(Edge.between((x, y), (x, y + 1)))
    return edges


def criterion_1_measure_equivalence(seed: int = 42, n_weights: int = 20,
                                    tol: float = 1e-7) -> CriterionResult:
    """Theorem 1: flipped and drifted probabilities agree on all edge sets
    of size <= 3 inside a 4x4 window, for random weight vectors."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    edges = _window_edges(4)
    disjoint_sets = [(e,) for e in edges]
    for pair in combinations(edges, 2):
        verts = [v for e in pair for v in e.vertices()]
        if len(set(verts)) == 4:
            disjoint_sets.append(pair)
    for triple in combinations(edges, 3):
        verts = [v for e in triple for v in e.vertices()]
        if len(set(verts)) == 6:
            disjoint_sets.append(triple)
    worst = 0.0
    worst_case = None
    for _ in range(n_weights):
        r = _random_weights(rng)
        s = to_drifted(r)
        for es in disjoint_sets:
            pf = spectral.local_stats(list(es), r, tol=1e-9)
            pd = spectral.local_stats(list(es), s, tol=1e-9)
            d = abs(pf - pd)
            if d > worst:
                worst = d
                worst_case = (r.as_tuple(), [e.key for e in es])
    return CriterionResult(
        1, "Theorem 1 measure equivalence", worst < tol,
        {"n_sets": len(disjoint_sets), "worst": worst, "worst_case": worst_case,
         "tol": tol},
        time.time() - t0)


def criterion_2_matrix_relation(seed: int = 42, n_weights: int = 20,
                                n_points: int = 1000,
                                tol: float = 1e-12) -> CriterionResult:
    """K_d(z,w) = D1 K_f((r4/r2) z, (r3/r1) w) D2 on the unit torus."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_weights):
        r = _random_weights(rng)
        s = to_drifted(r)
        th, ph = rng.uniform(0, 2 * np.pi, (2, n_points))
        z, w = np.exp(1j * th), np.exp(1j * ph)
        d1 = np.diag([1.0 / (r.r1 * r.r4), r.r3 / (r.r2 * r.r1 * r.r4)])
        d2 = np.diag([r.r2, r.r1 * r.r4 / r.r3])
        lhs = spectral.kd_matrix(s, z, w)
        rhs = np.einsum("ij,...jk,kl->...il", d1,
                        spectral.kf_matrix(r, (r.r4 / r.r2) * z, (r.r3 / r.r1) * w), d2)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return CriterionResult(2, "Kasteleyn matrix gauge relation", worst < tol,
                           {"worst": worst, "tol": tol}, time.time() - t0)


def criterion_3_uniform_edge(tol: float = 1e-8) -> CriterionResult:
    """Any single edge of the uniform model has probability exactly 1/4."""
    t0 = time.time()
    r = FlippedWeights(1, 1, 1, 1)
    worst = 0.0
    for e in [Edge.between((0, 0), (1, 0)), Edge.between((1, 0), (1, 1)),
              Edge.between((0, 1), (0, 2)), Edge.between((2, 1), (1, 1))]:
        worst = max(worst, abs(spectral.local_stats([e], r, tol=1e-10) - 0.25))
    return CriterionResult(3, "uniform edge probability 1/4", worst < tol,
                           {"worst": worst, "tol": tol}, time.time() - t0)


_SWEEP_EPS = (1 / 64, 1 / 128, 1 / 256)


def criterion_4_green_limit(tol_rel: float = 0.02) -> CriterionResult:
    """2 x discrete massive Green -> (1/pi) K0(|l| rho) along the sweep."""
    t0 = time.time()
    displacements = [(2, 0), (2, 1), (3, 2), (0, 4), (4, 3), (6, 0)]
    ok = True
    worst = 0.0
    details = {}
    for lam in [(1.0, 0.0), (1.0, 1.0)]:
        for (x, y) in displacements:
            cont = gr.green_massive(x, y, lam)
            errs = []
            for eps in _SWEEP_EPS:
                r = gr.scaling_weights(lam[0], lam[1], eps)
                disc = 2.0 * gr.discrete_green_massive(
                    round(x / eps), round(y / eps), r, tol=1e-12)
                errs.append(abs(disc - cont) / abs(cont))
            details[f"lam={lam} d=({x},{y})"] = errs
            worst = max(worst, errs[-1])
            if errs[-1] >= tol_rel or not errs[0] > errs[-1]:
                ok = False
    return CriterionResult(4, "massive Green's function scaling limit",
                           ok and worst < tol_rel,
                           {"worst_at_finest": worst, "sweeps": details},
                           time.time() - t0)


def criterion_5_scaled_entries(tol_rel: float = 0.03) -> CriterionResult:
    """-2/eps x inverse entries -> the Bessel-form scaled entries.

    Relative error is measured at displacements where the limiting entry is
    bounded away from its zero set (it vanishes on curves, e.g. the x axis
    for the off-diagonal classes at lam2 = 0, where a relative criterion is
    ill-posed); near-zero points get an absolute check at the same scale.
    """
    t0 = time.time()
    candidates = [(x, y) for x in range(-3, 4) for y in range(-3, 4)
                  if 1.0 <= math.hypot(x, y) <= 4.0]
    ok = True
    worst = 0.0
    details = {}
    for lam in [(1.0, 0.0), (1.0, 1.0)]:
        for bi in (0, 1):
            for wi in (0, 1):
                conts = {d: corr.scaled_inv_entry(bi, wi, d[0], d[1], lam)
                         for d in candidates}
                scale = max(abs(c) for c in conts.values())
                picks = [d for d in candidates
                         if abs(conts[d]) >= 0.25 * scale][:4]
                for (x, y) in picks:
                    cont = conts[(x, y)]
                    errs = []
                    for eps in _SWEEP_EPS:
                        r = gr.scaling_weights(lam[0], lam[1], eps)
                        g = spectral.inverse_entry_value(
                            r, _B[bi], _W[wi], round(-x / eps), round(-y / eps),
                            tol=1e-12)
                        errs.append(abs(-2.0 / eps * g - cont) / abs(cont))
                    details[f"lam={lam} b{bi}w{wi} ({x},{y})"] = errs
                    worst = max(worst, errs[-1])
                    if errs[-1] >= tol_rel or not errs[0] > errs[-1]:
                        ok = False
    return CriterionResult(5, "scaled inverse-Kasteleyn entries",
                           ok and worst < tol_rel,
                           {"worst_at_finest": worst, "sweeps": details},
                           time.time() - t0)


def criterion_6_wick_consistency(seed: int = 42, n_configs: int = 50,
                                 tol: float = 1e-10) -> CriterionResult:
    """four_point_density - Wick pairing sum = 3^4 f_connected, pointwise."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    worst = 0.0
    n_done = 0
    while n_done < n_configs:
        xs = np.sort(rng.uniform(-2.5, 2.5, 4))
        if np.min(np.diff(xs)) < 0.05:
            continue
        lam = (rng.uniform(0.2, 1.5), rng.uniform(0.0, 1.5))
        fp = corr.four_point_density(*xs, lam)
        s2d = corr.s2_integrand
        wick = (s2d(xs[0], xs[1], lam) * s2d(xs[2], xs[3], lam)
                + s2d(xs[0], xs[2], lam) * s2d(xs[1], xs[3], lam)
                + s2d(xs[0], xs[3], lam) * s2d(xs[1], xs[2], lam))
        y1, y2, y3 = np.diff(xs)
        resid = abs(fp - wick - corr.WICK_HEIGHT_FACTOR
                    * corr.f_connected(y1, y2, y3, lam))
        worst = max(worst, resid)
        n_done += 1
    return CriterionResult(6, "internal Wick consistency (A.1 transcription)",
                           worst < tol, {"worst": worst, "tol": tol},
                           time.time() - t0)


# Frozen by the tensor-quadrature oracle refined through order 48; the
# reference gives no numeric values for these.
DEFECT_UNIT_INTERVALS = 9.369269694186e-06
DEFECT_PINCHED_INTERVALS = 2.1552358899525e-07


def criterion_7_theorem2_certificate() -> CriterionResult:
    """Nonzero certified Wick defect at desk scale, and positivity on the
    pinched-interval configuration.

    Unit-width intervals at positions 0..3, unit-separated: touching
    intervals are rejected by interval validation (their pair correlation
    diverges), so position k hosts the interval (2k, 2k+1)."""
    t0 = time.time()
    spec_u = corr.CorrelationSpec(((0, 1), (2, 3), (4, 5), (6, 7)), 1.0, 0.0,
                                  tol=1e-6)
    rep_u = corr.wick_defect(spec_u)
    h = 2.0 ** -4
    spec_a = corr.CorrelationSpec(((0, h), (1 - h, 1), (2, 2 + h), (3 - h, 3)),
                                  1.0, 0.0, tol=1e-10)
    rep_a = corr.wick_defect(spec_a)
    ok = (rep_u.certified and rep_u.defect != 0.0
          and abs(rep_u.defect - DEFECT_UNIT_INTERVALS)
          <= 1e-6 * abs(DEFECT_UNIT_INTERVALS)
          and rep_a.defect > 0.0 and rep_a.certified
          and abs(rep_a.defect - DEFECT_PINCHED_INTERVALS) <= 1e-6 * abs(DEFECT_PINCHED_INTERVALS))
    return CriterionResult(
        7, "Theorem 2 non-Gaussianity certificate", ok,
        {"unit_defect": rep_u.defect, "unit_err": rep_u.error_estimate,
         "a1_defect": rep_a.defect, "a1_err": rep_a.error_estimate},
        time.time() - t0)


def criterion_8_gaussian_decay() -> CriterionResult:
    """|f(1,1,1)| decreases toward 0 as |lambda| -> 0, with log-log slope
    matching the lam^2 log lam leading order (from the lam^4-prefactored
    Bessel expansion) within +-0.5."""
    t0 = time.time()
    lams = [1e-1, 1e-2, 1e-3]
    vals = [abs(corr.f_connected(1.0, 1.0, 1.0, (m, 0.0))) for m in lams]
    monotone = vals[0] > vals[1] > vals[2] > 0
    slope = math.log(vals[0] / vals[2]) / math.log(lams[0] / lams[2])
    ok = monotone and 1.5 <= slope <= 2.5
    return CriterionResult(8, "decay to Gaussianity as |lambda| -> 0", ok,
                           {"values": dict(zip(lams, vals)), "slope": slope},
                           time.time() - t0)


def criterion_9_amoeba(seed: int = 42) -> CriterionResult:
    """Closed-form intercepts vs bisection, eps-linearity, circular hole."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    worst_bisect = 0.0
    for _ in range(10):
        l1, l2 = rng.uniform(0.3, 1.5, 2)
        eps = rng.uniform(1e-3, 2e-2)
        P = spectral.CharPoly.flipped(gr.scaling_weights(l1, l2, eps))
        ic = am.intercepts(l1, l2, eps)
        bu = am._hole_radius_along_ray(P, 0.0, 40 * eps)
        bv = am._hole_radius_along_ray(P, math.pi / 2, 40 * eps)
        worst_bisect = max(worst_bisect, abs(ic.u - bu), abs(ic.v - bv))
    l1, l2 = 1.0, 0.7
    lam = math.hypot(l1, l2)
    ic4 = am.intercepts(l1, l2, 1e-4)
    lin_err = max(abs(ic4.u / 1e-4 - lam), abs(ic4.v / 1e-4 - lam)) / lam
    eps_c = 1e-3
    P = spectral.CharPoly.flipped(gr.scaling_weights(l1, l2, eps_c))
    pts = am.hole_boundary(P, n_rays=24, r_max=40 * eps_c, xtol=1e-8)
    radii = np.hypot(pts[:, 0], pts[:, 1]) / eps_c
    hausdorff = float(np.max(np.abs(radii - lam)))
    ok = worst_bisect < 1e-8 and lin_err < 0.01 and hausdorff < 0.02
    return CriterionResult(
        9, "amoeba intercepts and hole geometry", ok,
        {"worst_bisect": worst_bisect, "linearity_rel": lin_err,
         "hausdorff": hausdorff}, time.time() - t0)


def criterion_10_sampler(seed: int = 42, n_chi: int = 100_000,
                         n_mc: int = 10_000) -> CriterionResult:
    """Wilson sampler exactness: chi-square against enumeration and Monte
    Carlo edge probability against the determinantal value."""
    t0 = time.time()
    region = sp.GridRegion(2, 2, "wired")
    pvals = {}
    for tag, s in [("uniform", DriftedWeights(1, 1, 1, 1)),
                   ("weighted", DriftedWeights(1, 1, 2, 2))]:
        dist = sp.enumerate_wired_trees(2, 2, s)
        rng = sp.RngStream(seed, 0)
        counts: dict[tuple, int] = {}
        for _ in range(n_chi):
            tree = sp.wilson_sample(region, s, rng)
            key = tuple(int(tree.arrows[j, i]) for j in range(2) for i in range(2))
            counts[key] = counts.get(key, 0) + 1
        if not set(counts) <= set(dist):
            return CriterionResult(10, "sampler exactness", False,
                                   {"error": "impossible tree sampled"},
                                   time.time() - t0)
        observed = np.array([counts.get(k, 0) for k in dist])
        expected = np.array([dist[k] * n_chi for k in dist])
        _, p = stats.chisquare(observed, expected)
        pvals[tag] = float(p)
    big = sp.GridRegion(64, 64, "wired")
    sd = to_drifted(FlippedWeights(1, 0.95, 0.95, 1))
    center = Edge.between((64, 64), (64, 65))
    est = sp.mc_edge_probability(big, sd, center, n_mc, sp.RngStream(seed, 1))
    analytic = spectral.local_stats([center], sd, tol=1e-10)
    mc_ok = abs(est.estimate - analytic) < 3 * est.stderr + 0.005
    ok = all(p > 0.01 for p in pvals.values()) and mc_ok
    return CriterionResult(
        10, "sampler exactness", ok,
        {"chi_square_p": pvals, "mc": est.estimate, "mc_se": est.stderr,
         "analytic": analytic}, time.time() - t0)


def criterion_11_height_invariants(seed: int = 42, n_samples: int = 1000) -> CriterionResult:
    """Every sampled configuration closes all height loops exactly."""
    t0 = time.time()
    region = sp.GridRegion(6, 6, "corner")
    s = to_drifted(FlippedWeights(1.0, 0.9, 0.8, 1.0))
    rng = sp.RngStream(seed, 0)
    failures = 0
    for _ in range(n_samples):
        cfg = sp.tree_to_dimers(sp.wilson_sample(region, s, rng))
        if not sp.height_loops_close(cfg):
            failures += 1
    return CriterionResult(11, "height loop invariants", failures == 0,
                           {"failures": failures, "n": n_samples},
                           time.time() - t0)


def criterion_12_so_phases() -> CriterionResult:
    """Square-octagon phases: gaseous at t=1, liquid at t=sqrt(2)."""
    t0 = time.time()
    p1 = am.classify_phase(spectral.CharPoly.square_octagon(1.0), (0.0, 0.0))
    p2 = am.classify_phase(spectral.CharPoly.square_octagon(math.sqrt(2.0)), (0.0, 0.0))
    ok = p1 == am.PhaseLabel.GASEOUS and p2 == am.PhaseLabel.LIQUID
    return CriterionResult(12, "square-octagon phase classification", ok,
                           {"t=1": p1.value, "t=sqrt2": p2.value},
                           time.time() - t0)


ALL_CRITERIA = {
    1: criterion_1_measure_equivalence,
    2: criterion_2_matrix_relation,
    3: criterion_3_uniform_edge,
    4: criterion_4_green_limit,
    5: criterion_5_scaled_entries,
    6: criterion_6_wick_consistency,
    7: criterion_7_theorem2_certificate,
    8: criterion_8_gaussian_decay,
    9: criterion_9_amoeba,
    10: criterion_10_sampler,
    11: criterion_11_height_invariants,
    12: criterion_12_so_phases,
}

GROUPS = {
    "all": tuple(ALL_CRITERIA),
    "equivalence": (1, 2),
    "spectral": (3,),
    "greens": (4, 5),
    "correlations": (6, 7, 8),
    "amoeba": (9, 12),
    "sampler": (10, 11),
}


def run_all(which="all", seed: int = 42, report=print) -> list[CriterionResult]:
    ids = GROUPS[which] if isinstance(which, str) else tuple(which)
    results = []
    for cid in ids:
        func = ALL_CRITERIA[cid]
        if "seed" in func.__code__.co_varnames[:func.__code__.co_argcount]:
            res = func(seed=seed)
        else:
            res = func()
        results.append(res)
        if report:
            report(res.line())
    return results
