"""Deterministic Gauss-Legendre quadrature over cube faces, edges and slices.

Tensor-product rules with fixed node ordering: for a given spec and
model every integral is evaluated in one canonical order, so results are
reproducible bit for bit run-to-run.  Integrands receive the whole node
batch (points plus metric jets) in a single call.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import geom
from .errors import BadInterval, OutsideDomain, ValidationError
from .metric import MetricModel, metric_jet

#: Self-consistency scale of the default orders on the built-in model
#: families: doubling any order moves the reported integrals by less
#: than this (asserted by tests).  The convergence module treats errors
#: below 100x this value as quadrature floor.
DEFAULT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class QuadratureSpec:
    """Gauss-Legendre node counts per dimension/segment."""

    face_order: int = 32
    edge_order: int = 32
    curve_order: int = 32
    slice_order: int = 48

    def __post_init__(self):
        for name in ("face_order", "edge_order", "curve_order", "slice_order"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 2:
                raise ValidationError(f"{name} must be an integer >= 2")

    def describe(self) -> dict:
        return {"face_order": self.face_order, "edge_order": self.edge_order,
                "curve_order": self.curve_order, "slice_order": self.slice_order}


@lru_cache(maxsize=None)
def _leggauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def gauss_nodes(n: int, a: float, b: float):
    """Nodes and weights for the interval [a, b]; degree 2n-1 exactness."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValidationError("node count must be a positive integer")
    if not (np.isfinite(a) and np.isfinite(b)) or not a < b:
        raise BadInterval(f"bad interval [{a}, {b}]")
    x, w = _leggauss(int(n))
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


def _require_cube(model: MetricModel, L: float) -> None:
    if not np.isfinite(L) or L <= 0.0:
        raise OutsideDomain(f"cube half-side must be positive, got {L}")
    if L < 2.0 * model.inner_radius:
        raise OutsideDomain(
            f"cube half-side {L} is below 2*inner_radius = {2 * model.inner_radius}")


# ---------------------------------------------------------------------------
# node layouts
# ---------------------------------------------------------------------------

def face_points(face: geom.FaceId, L: float, spec: QuadratureSpec):
    a, b = face.in_face_axes
    xa, wa = gauss_nodes(spec.face_order, -L, L)
    xb, wb = gauss_nodes(spec.face_order, -L, L)
    A, B = np.meshgrid(xa, xb, indexing="ij")
    pts = np.empty((A.size, 3))
    pts[:, face.axis] = face.sign * L
    pts[:, a] = A.ravel()
    pts[:, b] = B.ravel()
    return pts, np.outer(wa, wb).ravel()


def edge_points(edge: geom.EdgeId, L: float, spec: QuadratureSpec):
    x, w = gauss_nodes(spec.edge_order, -L, L)
    pts = np.empty((len(x), 3))
    pts[:, edge.axis_a] = edge.sign_a * L
    pts[:, edge.axis_b] = edge.sign_b * L
    pts[:, edge.direction] = x
    return pts, w


def slice_segments(axis: int, t: float, L: float, spec: QuadratureSpec):
    """The four straight segments of the slice square, split at the corners.

    Returned in counterclockwise traversal order of the (i, j) plane
    (i < j the in-plane axes); Gauss nodes are interior, so corners are
    never sampled as curve nodes.
    """
    i, j = (a for a in range(3) if a != axis)
    path = ((geom.FaceId(i, 1), j), (geom.FaceId(j, 1), i),
            (geom.FaceId(i, -1), j), (geom.FaceId(j, -1), i))
    x, w = gauss_nodes(spec.curve_order, -L, L)
    out = []
    for face, d in path:
        pts = np.empty((len(x), 3))
        pts[:, axis] = t
        pts[:, face.axis] = face.sign * L
        pts[:, d] = x
        out.append((face, pts, w))
    return out


def sphere_points(radius: float, order: int):
    """Product rule on a coordinate sphere: Gauss in cos(theta), uniform phi.

    Returns points, weights (absorbing radius^2) and Euclidean unit
    normals.
    """
    if radius <= 0.0:
        raise BadInterval("sphere radius must be positive")
    mu, wmu = gauss_nodes(order, -1.0, 1.0)
    n_phi = 2 * int(order)
    phi = (np.arange(n_phi) + 0.5) * (2.0 * np.pi / n_phi)
    MU, PHI = np.meshgrid(mu, phi, indexing="ij")
    s = np.sqrt(1.0 - MU ** 2)
    normals = np.stack([s * np.cos(PHI), s * np.sin(PHI), MU], axis=-1).reshape(-1, 3)
    w = (np.outer(wmu, np.full(n_phi, 2.0 * np.pi / n_phi)).ravel()) * radius ** 2
    return radius * normals, w, normals


# ---------------------------------------------------------------------------
# integrators
# ---------------------------------------------------------------------------

def _measure_ok(measure: str) -> None:
    if measure not in ("g", "euclidean"):
        raise ValidationError(f"measure must be 'g' or 'euclidean', got '{measure}'")


def integrate_face(model: MetricModel, face: geom.FaceId, L: float, f,
                   measure: str = "g", spec: QuadratureSpec = QuadratureSpec()) -> float:
    """Integral of f over one face; f(points, jets) -> values per node."""
    _measure_ok(measure)
    _require_cube(model, L)
    pts, w = face_points(face, L, spec)
    jets = metric_jet(model, pts)
    vals = np.asarray(f(pts, jets), dtype=float)
    if measure == "g":
        vals = vals * geom.area_density(jets, face.axis)
    return float(np.sum(w * vals))


def integrate_edges(model: MetricModel, L: float, f, measure: str = "g",
                    spec: QuadratureSpec = QuadratureSpec()) -> float:
    """Sum of integrals over the 12 cube edges, each counted once.

    f(points, jets, edge) -> values per node.  Any double counting a
    formula wants (e.g. summing over ordered face pairs) belongs to the
    caller, not here.
    """
    _measure_ok(measure)
    _require_cube(model, L)
    total = 0.0
    for edge in geom.EDGES:
        total += integrate_edge(model, edge, L, f, measure, spec)
    return total


def integrate_edge(model: MetricModel, edge: geom.EdgeId, L: float, f,
                   measure: str = "g", spec: QuadratureSpec = QuadratureSpec()) -> float:
    _measure_ok(measure)
    _require_cube(model, L)
    pts, w = edge_points(edge, L, spec)
    jets = metric_jet(model, pts)
    vals = np.asarray(f(pts, jets, edge), dtype=float)
    if measure == "g":
        k = edge.direction
        vals = vals * np.sqrt(jets.g[..., k, k])
    return float(np.sum(w * vals))


def integrate_slice_curve(model: MetricModel, axis: int, t: float, L: float, f,
                          measure: str = "g",
                          spec: QuadratureSpec = QuadratureSpec()) -> float:
    """Integral over the slice square {x^axis = t} ∩ cube boundary.

    Piecewise over the four segments, split at the corners;
    f(points, jets, face) -> values per node.
    """
    _measure_ok(measure)
    _require_cube(model, L)
    if not -L <= t <= L:
        raise OutsideDomain(f"slice level {t} outside [-L, L]")
    total = 0.0
    for face, pts, w in slice_segments(axis, t, L, spec):
        jets = metric_jet(model, pts)
        vals = np.asarray(f(pts, jets, face), dtype=float)
        if measure == "g":
            d = 3 - axis - face.axis
            vals = vals * np.sqrt(jets.g[..., d, d])
        total += float(np.sum(w * vals))
    return total


def integrate_slices(model: MetricModel, axis: int, L: float, F,
                     spec: QuadratureSpec = QuadratureSpec()) -> float:
    """Outer rule over the slice level t in [-L, L]; F(t) -> value."""
    _require_cube(model, L)
    t_nodes, w = gauss_nodes(spec.slice_order, -L, L)
    total = 0.0
    for t, wt in zip(t_nodes, w):
        total += wt * float(F(float(t)))
    return total
