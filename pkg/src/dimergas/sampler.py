"""Exact sampling of drifted spanning trees and their dimer configurations.

Wilson's algorithm samples directed spanning trees with arrow distribution
proportional to the product of step weights (s1, s2, s3, s4) for N, E, S, W.
Tree nodes live on the doubly-even sublattice: node (i, j) is the lattice
vertex (2i, 2j).  Two boundary conditions:

* "wired": any step leaving the node rectangle absorbs into the root (the
  finite-volume stand-in for the root at infinity).
* "corner": the root is the single node (0, 0); walks renormalize their
  step law over in-grid directions.  The configuration-independent
  denominator keeps the tree distribution proportional to the product of
  arrow weights, and this boundary is Temperley-compatible: trees biject
  with perfect matchings of the lattice rectangle
  [0, 2W-2] x [0, 2H-2] minus the corner (0, 0).

In the bijection each arrow maps to the dimer covering its node and the
white vertex the arrow passes through; the dual tree on the odd sublattice
(faces of the node grid, rooted at the outer face) is the planar complement
of the primal tree and fills in the remaining dimers, all of which carry
drifted weight 1, so P(matching) is proportional to the product of arrow
weights with constant 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np
from numba import njit

from .lattice import (
    DriftedWeights,
    Edge,
    FlippedWeights,
    HeightField,
    classify_vertex,
    height_change,
)

DIRECTIONS = ("N", "E", "S", "W")
_DX = (0, 1, 0, -1)
_DY = (1, 0, -1, 0)


@dataclass(frozen=True)
class GridRegion:
    """Rectangle of tree nodes with a boundary condition."""

    width: int
    height: int
    boundary: str = "wired"

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("region must be at least 1x1")
        if self.boundary not in ("wired", "corner"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.boundary == "corner" and (self.width < 2 or self.height < 2):
            raise ValueError("corner regions must be at least 2x2")

    @property
    def n_nodes(self) -> int:
        return self.width * self.height


class RngStream:
    """Deterministic stream of kernel seeds keyed by (seed, stream)."""

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        self._gen = np.random.Generator(
            np.random.Philox(np.random.SeedSequence((self.seed, self.stream))))

    def kernel_seed(self) -> int:
        return int(self._gen.integers(0, 2**32 - 2))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen


@dataclass
class SpanningTree:
    """Arrow map of a sampled tree; -1 marks the root node (corner mode)."""

    region: GridRegion
    arrows: np.ndarray          # int8, shape (height, width), N/E/S/W = 0..3

    def arrow(self, i: int, j: int) -> int:
        return int(self.arrows[j, i])

    def arrow_name(self, i: int, j: int) -> str:
        return DIRECTIONS[self.arrow(i, j)]


@njit(cache=True)
def _wilson_kernel(width, height, probs, corner, seed, max_steps):
    np.random.seed(seed)
    dx = np.array([0, 1, 0, -1], dtype=np.int64)
    dy = np.array([1, 0, -1, 0], dtype=np.int64)
    arrows = np.full((height, width), -1, dtype=np.int8)
    in_tree = np.zeros((height, width), dtype=np.uint8)
    nxt = np.zeros((height, width), dtype=np.int8)
    if corner:
        in_tree[0, 0] = 1
    steps = 0
    for start in range(width * height):
        sy = start // width
        sx = start % width
        if in_tree[sy, sx]:
            continue
        x, y = sx, sy
        exited = False
        while True:
            steps += 1
            if steps > max_steps:
                return arrows, -1
            u = np.random.random()
            chosen = 3
            if corner:
                tot = 0.0
                for d in range(4):
                    x2 = x + dx[d]
                    y2 = y + dy[d]
                    if 0 <= x2 < width and 0 <= y2 < height:
                        tot += probs[d]
                u *= tot
                acc = 0.0
                for d in range(4):
                    x2 = x + dx[d]
                    y2 = y + dy[d]
                    if 0 <= x2 < width and 0 <= y2 < height:
                        acc += probs[d]
                        if u <= acc:
                            chosen = d
                            break
            else:
                acc = 0.0
                for d in range(4):
                    acc += probs[d]
                    if u <= acc:
                        chosen = d
                        break
            nxt[y, x] = chosen
            x2 = x + dx[chosen]
            y2 = y + dy[chosen]
            if x2 < 0 or x2 >= width or y2 < 0 or y2 >= height:
                exited = True          # wired absorption
                break
            if in_tree[y2, x2]:
                break
            x, y = x2, y2
        # retrace the loop-erased path into the tree
        x, y = sx, sy
        while in_tree[y, x] == 0:
            d = nxt[y, x]
            arrows[y, x] = d
            in_tree[y, x] = 1
            x2 = x + dx[d]
            y2 = y + dy[d]
            if x2 < 0 or x2 >= width or y2 < 0 or y2 >= height:
                break
            x, y = x2, y2
    return arrows, steps


def wilson_sample(region: GridRegion, s: DriftedWeights, rng: RngStream) -> SpanningTree:
    """Draw one directed spanning tree with P(tree) ~ prod of arrow weights."""
    probs = np.array(s.as_tuple(), dtype=float)
    probs /= probs.sum()
    max_steps = 50_000 * region.n_nodes + 1_000_000
    arrows, steps = _wilson_kernel(region.width, region.height, probs,
                                   region.boundary == "corner",
                                   rng.kernel_seed(), max_steps)
    if steps < 0:
        raise RuntimeError(
            f"Wilson walk exceeded {max_steps} steps on "
            f"{region.width}x{region.height} ({region.boundary}); weights {s}")
    return SpanningTree(region, arrows)


# ---------------------------------------------------------------------------
# Tree -> dimers (Temperley bijection, corner regions)
# ---------------------------------------------------------------------------

def arrow_edge(region: GridRegion, i: int, j: int, d: int) -> Edge:
    """The dimer edge of the arrow at node (i, j): node to crossed white."""
    bx, by = 2 * i, 2 * j
    return Edge.between((bx, by), (bx + _DX[d], by + _DY[d]))


class DimerConfig:
    """A perfect matching, stored as cover arrays indexed by lower-left
    lattice corner: hcov[x, y] for the edge {(x,y),(x+1,y)} and vcov[x, y]
    for {(x,y),(x,y+1)}."""

    def __init__(self, region: GridRegion, hcov: np.ndarray, vcov: np.ndarray):
        self.region = region
        self.hcov = hcov
        self.vcov = vcov
        self._edges: list[Edge] | None = None

    @property
    def edges(self) -> list[Edge]:
        if self._edges is None:
            out = []
            for x, y in zip(*np.nonzero(self.hcov)):
                out.append(Edge.between((int(x), int(y)), (int(x) + 1, int(y))))
            for x, y in zip(*np.nonzero(self.vcov)):
                out.append(Edge.between((int(x), int(y)), (int(x), int(y) + 1)))
            self._edges = out
        return self._edges

    def covers(self, e: Edge) -> bool:
        (x, y), horizontal = e.key
        arr = self.hcov if horizontal else self.vcov
        if 0 <= x < arr.shape[0] and 0 <= y < arr.shape[1]:
            return bool(arr[x, y])
        return False

    def __len__(self) -> int:
        return int(self.hcov.sum() + self.vcov.sum())


@njit(cache=True)
def _dual_and_covers(arrows, W, H):
    """Dual-tree arrows (BFS from the outer face over non-tree crossings)
    and the edge-cover arrays of the full Temperley matching."""
    FW, FH = W - 1, H - 1
    dual = np.full((FH, FW), -1, dtype=np.int8)
    n_seen = 0
    stack = np.empty(FW * FH, dtype=np.int64)
    top = 0

    # horizontal tree-crossing: nodes (a,b)-(a+1,b) joined by an arrow
    def _ht(a, b):
        return arrows[b, a] == 1 or arrows[b, a + 1] == 3

    def _vt(a, b):
        return arrows[b, a] == 0 or arrows[b + 1, a] == 2

    # seed faces reachable from the outer face
    for a in range(FW):
        if not _ht(a, 0) and dual[0, a] < 0:
            dual[0, a] = 2
            stack[top] = 0 * FW + a
            top += 1
            n_seen += 1
        if not _ht(a, H - 1) and dual[FH - 1, a] < 0:
            dual[FH - 1, a] = 0
            stack[top] = (FH - 1) * FW + a
            top += 1
            n_seen += 1
    for b in range(FH):
        if not _vt(0, b) and dual[b, 0] < 0:
            dual[b, 0] = 3
            stack[top] = b * FW + 0
            top += 1
            n_seen += 1
        if not _vt(W - 1, b) and dual[b, FW - 1] < 0:
            dual[b, FW - 1] = 1
            stack[top] = b * FW + FW - 1
            top += 1
            n_seen += 1
    while top > 0:
        top -= 1
        idx = stack[top]
        b = idx // FW
        a = idx % FW
        if b + 1 < FH and dual[b + 1, a] < 0 and not _ht(a, b + 1):
            dual[b + 1, a] = 2
            stack[top] = (b + 1) * FW + a
            top += 1
            n_seen += 1
        if b - 1 >= 0 and dual[b - 1, a] < 0 and not _ht(a, b):
            dual[b - 1, a] = 0
            stack[top] = (b - 1) * FW + a
            top += 1
            n_seen += 1
        if a + 1 < FW and dual[b, a + 1] < 0 and not _vt(a + 1, b):
            dual[b, a + 1] = 3
            stack[top] = b * FW + a + 1
            top += 1
            n_seen += 1
        if a - 1 >= 0 and dual[b, a - 1] < 0 and not _vt(a, b):
            dual[b, a - 1] = 1
            stack[top] = b * FW + a - 1
            top += 1
            n_seen += 1

    nx, ny = 2 * W - 1, 2 * H - 1
    hcov = np.zeros((nx, ny), dtype=np.bool_)
    vcov = np.zeros((nx, ny), dtype=np.bool_)
    for j in range(H):
        for i in range(W):
            d = arrows[j, i]
            if d < 0:
                continue
            x, y = 2 * i, 2 * j
            if d == 0:
                vcov[x, y] = True
            elif d == 1:
                hcov[x, y] = True
            elif d == 2:
                vcov[x, y - 1] = True
            else:
                hcov[x - 1, y] = True
    for b in range(FH):
        for a in range(FW):
            d = dual[b, a]
            x, y = 2 * a + 1, 2 * b + 1
            if d == 0:
                vcov[x, y] = True
            elif d == 1:
                hcov[x, y] = True
            elif d == 2:
                vcov[x, y - 1] = True
            elif d == 3:
                hcov[x - 1, y] = True
    return dual, n_seen, hcov, vcov


def tree_to_dimers(tree: SpanningTree) -> DimerConfig:
    """Temperley image of a corner-rooted tree: a perfect matching of
    the rectangle [0, 2W-2] x [0, 2H-2] minus the corner (0, 0).

    Primal arrows cover the even sublattice; the dual tree (complement of
    the primal tree, rooted at the outer face) covers the odd sublattice.
    Wired trees are rejected: their exit arrows leave the rectangle, so the
    image is not a matching of a fixed region.
    """
    region = tree.region
    if region.boundary != "corner":
        raise ValueError("tree_to_dimers requires a corner (Temperley) region")
    W, H = region.width, region.height
    arrows = tree.arrows
    for j in range(H):
        for i in range(W):
            d = int(arrows[j, i])
            if d < 0:
                if (i, j) != (0, 0):
                    raise ValueError(f"node {(i, j)} has no arrow")
                continue
            i2, j2 = i + _DX[d], j + _DY[d]
            if not (0 <= i2 < W and 0 <= j2 < H):
                raise ValueError("corner tree has an exiting arrow")
    dual, n_seen, hcov, vcov = _dual_and_covers(arrows, W, H)
    if n_seen != (W - 1) * (H - 1):
        raise RuntimeError("dual tree did not span all faces (invalid tree)")
    return DimerConfig(region, np.asarray(hcov), np.asarray(vcov))


def dimers_to_tree(cfg: DimerConfig) -> SpanningTree:
    """Inverse of tree_to_dimers: read each node's arrow off its dimer."""
    region = cfg.region
    arrows = np.full((region.height, region.width), -1, dtype=np.int8)
    for j in range(region.height):
        for i in range(region.width):
            if (i, j) == (0, 0):
                continue
            bx, by = 2 * i, 2 * j
            for d in range(4):
                e = Edge.between((bx, by), (bx + _DX[d], by + _DY[d]))
                if cfg.covers(e):
                    arrows[j, i] = d
                    break
            else:
                raise ValueError(f"node {(i, j)} is uncovered")
    return SpanningTree(region, arrows)


def validate_matching(cfg: DimerConfig) -> bool:
    """Every vertex of the Temperley rectangle covered exactly once."""
    region = cfg.region
    W, H = region.width, region.height
    counts: dict[tuple[int, int], int] = {}
    for e in cfg.edges:
        for v in e.vertices():
            counts[v] = counts.get(v, 0) + 1
    expected = {(x, y) for x in range(2 * W - 1) for y in range(2 * H - 1)}
    expected.discard((0, 0))
    return set(counts) == expected and all(c == 1 for c in counts.values())


# ---------------------------------------------------------------------------
# Heights
# ---------------------------------------------------------------------------

def _height_array(cfg: DimerConfig) -> np.ndarray:
    """Heights h[fx, fy] on the face grid by cumulative integration.

    Crossing east from face (fx, fy) adds (-1)^(fx+fy) (4 vcov[fx+1, fy] - 1)
    (black-on-left parity of the crossed vertical edge), crossing north adds
    (-1)^(fx+fy+1) (4 hcov[fx, fy+1] - 1).  Path independence around every
    vertex is the sampled-configuration invariant checked by
    `height_loops_close`.
    """
    W, H = cfg.region.width, cfg.region.height
    nx, ny = 2 * W - 2, 2 * H - 2
    fx = np.arange(nx)[:, None]
    fy = np.arange(ny)[None, :]
    sign = np.where((fx + fy) % 2 == 0, 1, -1)
    east = sign[: nx - 1, :] * (4 * cfg.vcov[1:nx, :ny].astype(int) - 1)
    north = -sign[:, : ny - 1] * (4 * cfg.hcov[:nx, 1:ny].astype(int) - 1)
    h = np.zeros((nx, ny), dtype=int)
    h[0, 1:] = np.cumsum(north[0, :], axis=0)
    h[1:, :] = h[0, :][None, :] + np.cumsum(east, axis=0)
    return h


def dimer_to_height(cfg: DimerConfig) -> HeightField:
    """Integer heights on the faces of the matched rectangle, base height 0
    at the face with lower-left corner (0, 0)."""
    h = _height_array(cfg)
    heights = {(int(x), int(y)): int(h[x, y])
               for x in range(h.shape[0]) for y in range(h.shape[1])}
    return HeightField(heights)


def height_loops_close(cfg: DimerConfig) -> bool:
    """Zero height change around every interior vertex (exact check).

    Walks the four faces around each vertex counterclockwise, summing the
    signed height increments across the vertex's four edges.
    """
    W, H = cfg.region.width, cfg.region.height
    for vx in range(1, 2 * W - 2):
        for vy in range(1, 2 * H - 2):
            crossings = (
                (Edge.between((vx, vy - 1), (vx, vy)), "E"),       # S edge
                (Edge.between((vx, vy), (vx + 1, vy)), "N"),       # E edge
                (Edge.between((vx, vy), (vx, vy + 1)), "W"),       # N edge
                (Edge.between((vx - 1, vy), (vx, vy)), "S"),       # W edge
            )
            total = sum(height_change(e, cfg.covers(e), t) for e, t in crossings)
            if total != 0:
                return False
    return True


# ---------------------------------------------------------------------------
# Urban renewal
# ---------------------------------------------------------------------------

def urban_renewal_weights(t: float) -> tuple[FlippedWeights, float]:
    """Square-grid image of the square-octagon model with diagonal weight t.

    Gauging the diagonal legs into the poor cities and applying the spider
    move gives the flipped weights (1, t^2/2, t^2/2, 1) and multiplies the
    partition function by 2 per city, so criticality t = sqrt(2) maps to
    the uniform grid (checked against free energies in the tests).
    """
    if t <= 0:
        raise ValueError("square-octagon weight t must be positive")
    s = t * t / 2.0
    return FlippedWeights(1.0, s, s, 1.0), 2.0


# ---------------------------------------------------------------------------
# Monte Carlo estimators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MCEstimate:
    estimate: float
    stderr: float
    n_samples: int
    boundary_warning: bool = False


def _edge_arrow(region: GridRegion, e: Edge) -> tuple[int, int, int]:
    bx, by = e.black
    if classify_vertex(bx, by).name != "B0" or bx % 2 or by % 2:
        raise ValueError("Monte Carlo edges must be incident to a tree node")
    i, j = bx // 2, by // 2
    if not (0 <= i < region.width and 0 <= j < region.height):
        raise ValueError("edge lies outside the region")
    step = (e.white[0] - bx, e.white[1] - by)
    d = {(0, 1): 0, (1, 0): 1, (0, -1): 2, (-1, 0): 3}[step]
    return i, j, d


def mc_edge_probability(region: GridRegion, s: DriftedWeights, e: Edge,
                        n_samples: int, rng: RngStream) -> MCEstimate:
    """Empirical dimer probability of a node-incident edge.

    The edge is covered exactly when the node's arrow points through its
    white vertex, so the estimate needs no dual-tree construction and works
    for both boundary conditions.
    """
    i, j, d = _edge_arrow(region, e)
    margin = min(i, j, region.width - 1 - i, region.height - 1 - j)
    warn = margin < min(region.width, region.height) / 4
    probs = np.array(s.as_tuple(), dtype=float)
    probs /= probs.sum()
    max_steps = 50_000 * region.n_nodes + 1_000_000
    corner = region.boundary == "corner"
    hits = 0
    for _ in range(n_samples):
        arrows, steps = _wilson_kernel(region.width, region.height, probs,
                                       corner, rng.kernel_seed(), max_steps)
        if steps < 0:
            raise RuntimeError("Wilson walk exceeded the iteration cap")
        if arrows[j, i] == d:
            hits += 1
    p = hits / n_samples
    se = math.sqrt(max(p * (1 - p), 1.0 / n_samples) / n_samples)
    return MCEstimate(p, se, n_samples, warn)


def mc_height_covariance(region: GridRegion, s: DriftedWeights,
                         faces: list[tuple[int, int]], n_samples: int,
                         rng: RngStream) -> tuple[np.ndarray, np.ndarray]:
    """Empirical covariance matrix of heights at the listed faces.

    Requires a corner region (full matchings).  Returns (cov, stderr).
    """
    if region.boundary != "corner":
        raise ValueError("height statistics need a corner (Temperley) region")
    k = len(faces)
    vals = np.empty((n_samples, k))
    for n in range(n_samples):
        tree = wilson_sample(region, s, rng)
        h = _height_array(tree_to_dimers(tree))
        for m, (fx, fy) in enumerate(faces):
            vals[n, m] = h[fx, fy]
    centered = vals - vals.mean(axis=0, keepdims=True)
    cov = centered.T @ centered / (n_samples - 1)
    prods = centered[:, :, None] * centered[:, None, :]
    se = prods.std(axis=0, ddof=1) / math.sqrt(n_samples)
    return cov, se


# ---------------------------------------------------------------------------
# Exact references for small regions
# ---------------------------------------------------------------------------

def enumerate_wired_trees(width: int, height: int, s: DriftedWeights) -> dict:
    """Exact distribution over arrow maps for a tiny wired region."""
    nodes = [(i, j) for j in range(height) for i in range(width)]
    weights = {}
    w = s.as_tuple()
    for combo in product(range(4), repeat=len(nodes)):
        arrows = dict(zip(nodes, combo))
        # follow arrows from each node; must exit the grid (reach the root)
        ok = True
        for start in nodes:
            pos = start
            seen = set()
            while True:
                if pos in seen:
                    ok = False
                    break
                seen.add(pos)
                d = arrows[pos]
                nxt = (pos[0] + _DX[d], pos[1] + _DY[d])
                if not (0 <= nxt[0] < width and 0 <= nxt[1] < height):
                    break
                pos = nxt
            if not ok:
                break
        if ok:
            weights[combo] = math.prod(w[d] for d in combo)
    total = sum(weights.values())
    return {combo: wt / total for combo, wt in weights.items()}


def arrow_marginal_exact(region: GridRegion, s: DriftedWeights,
                         node: tuple[int, int]) -> np.ndarray:
    """P(arrow at node = N/E/S/W) by the directed matrix-tree theorem.

    Arborescences into the root containing a fixed arrow are counted as
    det(L) - det(L with that arrow deleted); ratios use slogdet.
    """
    W, H = region.width, region.height
    corner = region.boundary == "corner"
    idx = {}
    for j in range(H):
        for i in range(W):
            if corner and (i, j) == (0, 0):
                continue
            idx[(i, j)] = len(idx)
    n = len(idx)
    w = s.as_tuple()

    def laplacian(skip=None):
        L = np.zeros((n, n))
        for (i, j), a in idx.items():
            for d in range(4):
                if skip == ((i, j), d):
                    continue
                i2, j2 = i + _DX[d], j + _DY[d]
                inside = 0 <= i2 < W and 0 <= j2 < H
                if corner and not inside:
                    continue
                L[a, a] += w[d]
                if inside and (i2, j2) in idx:
                    L[a, idx[(i2, j2)]] -= w[d]
        return L

    sign0, logdet0 = np.linalg.slogdet(laplacian())
    if sign0 <= 0:
        raise RuntimeError("degenerate tree Laplacian")
    out = np.zeros(4)
    for d in range(4):
        i2, j2 = node[0] + _DX[d], node[1] + _DY[d]
        inside = 0 <= i2 < W and 0 <= j2 < H
        if corner and not inside:
            out[d] = 0.0
            continue
        sign1, logdet1 = np.linalg.slogdet(laplacian(skip=(node, d)))
        if sign1 <= 0:
            out[d] = 1.0
        else:
            out[d] = 1.0 - math.exp(logdet1 - logdet0)
    return out
