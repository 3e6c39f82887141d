"""Square-grid geometry, vertex classes, edge weights and height rules.

The square grid Z^2 is bipartite with black vertices at even coordinate sum.
Vertices split into four classes on a 2x2 fundamental domain:

    B0 = (2x, 2y)      B1 = (2x+1, 2y+1)
    W0 = (2x+1, 2y)    W1 = (2x, 2y+1)

Two periodic edge-weight families live on this grid.  The *flipped* family
(r1..r4) alternates r1/r3 along every vertical line and r2/r4 along every
horizontal line.  The *drifted* family (s1..s4) puts s1,s2,s3,s4 on the
N,E,S,W edges around each vertex of the doubly-even sublattice and weight 1
on every edge incident to a B1 vertex.

Convention freeze (everything downstream depends on it):

* horizontal edge {(x,y),(x+1,y)}: flipped weight r2 for x even, r4 for
  x odd; drifted weight s2/s4 with the same x rule when y is even, 1 when
  y is odd.
* vertical edge {(x,y),(x,y+1)}: flipped weight r1 for y even, r3 for
  y odd; drifted weight s1/s3 with the same y rule when x is even, 1 when
  x is odd.
* Kasteleyn signs: (-1)^(x+y) on horizontal edges, (-1)^(y+1) on vertical
  edges (odd number of minus signs around every face).
* Fourier monomial z^dx * w^dy, with fundamental-domain representatives
  b0=(0,0), w0=(1,0), w1=(0,-1), b1=(1,-1); a vertex (x,y) sits in domain
  (x//2, (y+1)//2).

With these choices the Fourier transforms of the signed weight fields
reproduce the reference 2x2 matrices entry for entry (see spectral module
tests), the N/E/S/W drifted weights around (0,0) are (s1,s2,s3,s4), and the
drifted random walk steps N,E,S,W with probabilities (s1,s2,s3,s4)/sum(s).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class VertexClass(Enum):
    B0 = "B0"
    B1 = "B1"
    W0 = "W0"
    W1 = "W1"

    @property
    def is_black(self) -> bool:
        return self in (VertexClass.B0, VertexClass.B1)

    @property
    def index(self) -> int:
        """0/1 sublattice index within the black or white pair."""
        return 0 if self in (VertexClass.B0, VertexClass.W0) else 1


# Fundamental-domain representatives, chosen so that vertex = rep + 2*domain.
CLASS_REPRESENTATIVE = {
    VertexClass.B0: (0, 0),
    VertexClass.W0: (1, 0),
    VertexClass.W1: (0, -1),
    VertexClass.B1: (1, -1),
}


def classify_vertex(x: int, y: int) -> VertexClass:
    """Vertex class from coordinate parities (black iff x+y even)."""
    if x % 2 == 0:
        return VertexClass.B0 if y % 2 == 0 else VertexClass.W1
    return VertexClass.W0 if y % 2 == 0 else VertexClass.B1


def domain_offset(x: int, y: int) -> tuple[int, int]:
    """Fundamental-domain index of (x,y) relative to its class representative."""
    return (x // 2, (y + 1) // 2)


def vertex_at(cls: VertexClass, dx: int, dy: int) -> tuple[int, int]:
    rx, ry = CLASS_REPRESENTATIVE[cls]
    return (rx + 2 * dx, ry + 2 * dy)


@dataclass(frozen=True)
class FlippedWeights:
    """Flipped edge weights, strictly positive."""

    r1: float
    r2: float
    r3: float
    r4: float

    def __post_init__(self):
        if min(self.r1, self.r2, self.r3, self.r4) <= 0:
            raise ValueError(f"flipped weights must be positive, got {self}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.r1, self.r2, self.r3, self.r4)

    @property
    def mass(self) -> float:
        """Killing rate of the associated massive walk; zero iff critical."""
        return (self.r1 - self.r3) ** 2 + (self.r2 - self.r4) ** 2


@dataclass(frozen=True)
class DriftedWeights:
    """Drifted edge weights (N,E,S,W around doubly-even vertices)."""

    s1: float
    s2: float
    s3: float
    s4: float

    def __post_init__(self):
        if min(self.s1, self.s2, self.s3, self.s4) <= 0:
            raise ValueError(f"drifted weights must be positive, got {self}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.s1, self.s2, self.s3, self.s4)

    @property
    def total(self) -> float:
        return self.s1 + self.s2 + self.s3 + self.s4


def to_drifted(r: FlippedWeights) -> DriftedWeights:
    """Weight map under which the flipped and drifted measures agree.

    (r1,r2,r3,r4) -> (r1/r4, r2^2/(r1 r4), r3^2/(r1 r4), r4/r1); invariant
    under rescaling all r by a common factor.
    """
    d = r.r1 * r.r4
    return DriftedWeights(r.r1 / r.r4, r.r2**2 / d, r.r3**2 / d, r.r4 / r.r1)


@dataclass(frozen=True)
class Edge:
    """A grid edge, stored as (white endpoint, black endpoint)."""

    white: tuple[int, int]
    black: tuple[int, int]

    def __post_init__(self):
        wx, wy = self.white
        bx, by = self.black
        if abs(wx - bx) + abs(wy - by) != 1:
            raise ValueError(f"edge endpoints not adjacent: {self}")
        if classify_vertex(wx, wy).is_black or not classify_vertex(bx, by).is_black:
            raise ValueError(f"edge endpoints have wrong colors: {self}")

    @staticmethod
    def between(a: tuple[int, int], b: tuple[int, int]) -> "Edge":
        """Build an edge from two endpoints in either order."""
        if classify_vertex(*a).is_black:
            return Edge(white=b, black=a)
        return Edge(white=a, black=b)

    @property
    def is_horizontal(self) -> bool:
        return self.white[1] == self.black[1]

    @property
    def lower_left(self) -> tuple[int, int]:
        return (min(self.white[0], self.black[0]), min(self.white[1], self.black[1]))

    @property
    def key(self) -> tuple[tuple[int, int], bool]:
        """Orientation-free identifier usable as a set/dict key."""
        return (self.lower_left, self.is_horizontal)

    def vertices(self) -> tuple[tuple[int, int], tuple[int, int]]:
        return (self.white, self.black)


def flipped_edge_weight(e: Edge, r: FlippedWeights) -> float:
    """Weight of edge e in the flipped family (2x2-periodic pattern)."""
    x, y = e.lower_left
    if e.is_horizontal:
        return r.r2 if x % 2 == 0 else r.r4
    return r.r1 if y % 2 == 0 else r.r3


def drifted_edge_weight(e: Edge, s: DriftedWeights) -> float:
    """Weight of edge e in the drifted family (1 on B1-incident edges)."""
    x, y = e.lower_left
    if e.is_horizontal:
        if y % 2 != 0:
            return 1.0
        return s.s2 if x % 2 == 0 else s.s4
    if x % 2 != 0:
        return 1.0
    return s.s1 if y % 2 == 0 else s.s3


def kasteleyn_sign(e: Edge) -> int:
    """Sign of e in the fixed Kasteleyn orientation (shared by both models)."""
    x, y = e.lower_left
    if e.is_horizontal:
        return 1 if (x + y) % 2 == 0 else -1
    return 1 if (y + 1) % 2 == 0 else -1


def signed_weight(e: Edge, weights) -> float:
    """Kasteleyn-matrix entry K(white, black) for the edge's model."""
    if isinstance(weights, FlippedWeights):
        return kasteleyn_sign(e) * flipped_edge_weight(e, weights)
    if isinstance(weights, DriftedWeights):
        return kasteleyn_sign(e) * drifted_edge_weight(e, weights)
    raise TypeError(f"unsupported weight family: {type(weights)!r}")


# Height function: d = 4, so a covered crossing with black on the left
# contributes d-1 = 3 and an uncovered one contributes -1.
HEIGHT_JUMP = 3

_FACE_STEPS = {"N": (0, 1), "E": (1, 0), "S": (0, -1), "W": (-1, 0)}


def black_on_left(e: Edge, traversal: str) -> bool:
    """Whether e's black endpoint lies left of a face-to-face traversal.

    `traversal` is the direction (N/E/S/W) of the step between the two faces
    sharing e; it must be perpendicular to e.
    """
    if traversal not in _FACE_STEPS:
        raise ValueError(f"traversal must be one of N,E,S,W, got {traversal!r}")
    horizontal_step = traversal in ("E", "W")
    if e.is_horizontal == horizontal_step:
        raise ValueError("traversal direction is parallel to the edge")
    x, y = e.lower_left
    if traversal == "E":   # left = north endpoint of the vertical edge
        return classify_vertex(x, y + 1).is_black
    if traversal == "W":   # left = south endpoint
        return classify_vertex(x, y).is_black
    if traversal == "N":   # left = west endpoint of the horizontal edge
        return classify_vertex(x, y).is_black
    return classify_vertex(x + 1, y).is_black


def height_change(e: Edge, covered: bool, traversal: str) -> int:
    """Height increment when stepping between the two faces sharing e."""
    base = HEIGHT_JUMP if covered else -1
    return base if black_on_left(e, traversal) else -base


@dataclass
class HeightField:
    """Integer heights on face centers, base face fixed to height 0.

    Faces are labelled by their lower-left lattice corner; the face with
    corner `origin` is the base face (so the default base face contains the
    point (0.5, 0.5)).
    """

    heights: "dict[tuple[int, int], int]"
    origin: tuple[int, int] = (0, 0)

    def __getitem__(self, face: tuple[int, int]) -> int:
        return self.heights[face]

    def __contains__(self, face: tuple[int, int]) -> bool:
        return face in self.heights

    def __len__(self) -> int:
        return len(self.heights)
