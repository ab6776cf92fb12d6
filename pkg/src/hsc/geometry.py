"""Hyperbolic disk geometry, derivative maps and surface TBM.

Points are (u, v) pairs in the open unit disk. Functions accept anything
``np.asarray`` understands and broadcast over leading axes, so a single
call can measure distances from one point to every vertex of a mesh.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import sparse

from .errors import DegenerateTriangleError, DomainError, OrientationError

DEGENERATE_AREA = 1e-14


class DiskPoint(NamedTuple):
    u: float
    v: float


def _as_points(p, name="point"):
    p = np.asarray(p, dtype=np.float64)
    if p.shape[-1] != 2:
        raise ValueError(f"{name} must have trailing dimension 2, got shape {p.shape}")
    r2 = np.einsum("...i,...i->...", p, p)
    if np.any(~(r2 < 1.0)):
        raise DomainError(f"{name} must lie strictly inside the unit disk")
    return p, r2


def _chord_lengths(p, r2, direction):
    """Distances from ``p`` to the unit circle along -direction and +direction.

    Solves |p + s*direction|^2 = 1. Roots have product r2 - 1 < 0, which lets
    each root be formed without subtractive cancellation.
    """
    h = np.einsum("...i,...i->...", p, direction)
    root = np.sqrt(h * h + (1.0 - r2))
    c = 1.0 - r2
    behind = np.where(h >= 0, h + root, c / np.maximum(root - h, np.finfo(float).tiny))
    ahead = np.where(h <= 0, root - h, c / np.maximum(root + h, np.finfo(float).tiny))
    return behind, ahead


def klein_distance(a, b):
    """Hyperbolic distance between Klein-model points via the chord cross-ratio.

    The line through ``a`` and ``b`` meets the circle at ``e_minus`` (beyond
    ``a``) and ``e_plus`` (beyond ``b``); the distance is

        0.5 * log(|e_minus b| |e_plus a| / (|e_minus a| |e_plus b|)).

    It is evaluated with ``log1p`` so nearby points keep full relative accuracy.
    Returns a float for single points, an array when broadcasting.
    """
    a, ra = _as_points(a, "a")
    b, rb = _as_points(b, "b")
    a, b = np.broadcast_arrays(a, b)
    ra, rb = np.broadcast_arrays(ra, rb)
    diff = b - a
    length = np.sqrt(np.einsum("...i,...i->...", diff, diff))
    same = length == 0.0
    safe = np.where(same, 1.0, length)
    direction = diff / safe[..., None]
    a_behind, a_ahead = _chord_lengths(a, ra, direction)
    _, b_ahead = _chord_lengths(b, rb, direction)
    # |e_minus a| = a_behind, |e_plus a| = a_ahead, |e_plus b| = b_ahead
    ratio_minus_one = length * (a_behind + a_ahead) / (a_behind * b_ahead)
    d = 0.5 * np.log1p(ratio_minus_one)
    d = np.where(same, 0.0, d)
    if d.ndim == 0:
        return float(d)
    return d


def poincare_to_klein(p):
    p, r2 = _as_points(p)
    k = 2.0 * p / (1.0 + r2)[..., None]
    return k if k.ndim > 1 else DiskPoint(float(k[0]), float(k[1]))


def klein_to_poincare(k):
    k, r2 = _as_points(k)
    p = k / (1.0 + np.sqrt(1.0 - r2))[..., None]
    return p if p.ndim > 1 else DiskPoint(float(p[0]), float(p[1]))


def poincare_distance(p, q):
    """Geodesic distance in the Poincare disk, 2 artanh |p - q| / |1 - p conj(q)|."""
    p, _ = _as_points(p, "p")
    q, _ = _as_points(q, "q")
    zp = p[..., 0] + 1j * p[..., 1]
    zq = q[..., 0] + 1j * q[..., 1]
    d = 2.0 * np.arctanh(np.abs(zp - zq) / np.abs(1.0 - zp * np.conj(zq)))
    if np.ndim(d) == 0:
        return float(d)
    return d


@dataclass(frozen=True)
class Jacobian2x2:
    a: float
    b: float
    c: float
    d: float
    det: float

    @classmethod
    def from_matrix(cls, m) -> "Jacobian2x2":
        m = np.asarray(m, dtype=np.float64)
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        return cls(float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]), float(det))

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    def __matmul__(self, other: "Jacobian2x2") -> "Jacobian2x2":
        return Jacobian2x2.from_matrix(self.as_array() @ other.as_array())


def signed_area(tri) -> float:
    tri = np.asarray(tri, dtype=np.float64)
    e1 = tri[1] - tri[0]
    e2 = tri[2] - tri[0]
    return 0.5 * float(e1[0] * e2[1] - e1[1] * e2[0])


def derivative_map(source, target) -> Jacobian2x2:
    """Linear map J taking the edges of ``source`` onto the edges of ``target``.

    J = [w3 - w1, w2 - w1] [v3 - v1, v2 - v1]^-1 with triangles given as 3x2
    arrays of planar corner coordinates.
    """
    v = np.asarray(source, dtype=np.float64)
    w = np.asarray(target, dtype=np.float64)
    if abs(signed_area(v)) < DEGENERATE_AREA:
        raise DegenerateTriangleError("source triangle is degenerate")
    V = np.column_stack([v[2] - v[0], v[1] - v[0]])
    W = np.column_stack([w[2] - w[0], w[1] - w[0]])
    det_v = V[0, 0] * V[1, 1] - V[0, 1] * V[1, 0]
    V_inv = np.array([[V[1, 1], -V[0, 1]], [-V[1, 0], V[0, 0]]]) / det_v
    return Jacobian2x2.from_matrix(W @ V_inv)


def tbm_value(J: Jacobian2x2) -> float:
    if not J.det > 0:
        raise OrientationError(f"derivative map has det {J.det!r} <= 0")
    return float(np.sqrt(J.det))


def face_tbm(template_params, subject_params, faces) -> np.ndarray:
    """sqrt(det J) per face for the map from template faces to subject faces.

    Vectorised form of ``tbm_value(derivative_map(...))``; values above one
    mean the subject face is larger than its template counterpart.
    """
    tp = np.asarray(template_params, dtype=np.float64)
    sp = np.asarray(subject_params, dtype=np.float64)
    f = np.asarray(faces, dtype=np.int64)
    v1, v2, v3 = tp[f[:, 0]], tp[f[:, 1]], tp[f[:, 2]]
    w1, w2, w3 = sp[f[:, 0]], sp[f[:, 1]], sp[f[:, 2]]
    V = np.stack([v3 - v1, v2 - v1], axis=-1)
    W = np.stack([w3 - w1, w2 - w1], axis=-1)
    det_v = np.linalg.det(V)
    bad = np.abs(det_v) < 2 * DEGENERATE_AREA
    if np.any(bad):
        raise DegenerateTriangleError(f"template face {int(np.argmax(bad))} is degenerate")
    # det(W V^-1) = det W / det V
    det_j = np.linalg.det(W) / det_v
    if np.any(det_j <= 0):
        raise OrientationError(f"face {int(np.argmax(det_j <= 0))} flips orientation")
    return np.sqrt(det_j)


def vertex_tbm(template_params, subject_params, faces) -> np.ndarray:
    """Per-vertex TBM: mean of ``face_tbm`` over the faces incident to each vertex."""
    f = np.asarray(faces, dtype=np.int64)
    n = len(np.asarray(template_params))
    per_face = face_tbm(template_params, subject_params, f)
    total = np.zeros(n)
    count = np.zeros(n)
    for k in range(3):
        np.add.at(total, f[:, k], per_face)
        np.add.at(count, f[:, k], 1.0)
    out = np.ones(n)
    np.divide(total, count, out=out, where=count > 0)
    return out


def smooth_vertex_field(surface, field, iterations: int = 10, step: float = 0.5) -> np.ndarray:
    """Explicit graph diffusion with uniform 1-ring weights.

    Each iteration sets f(v) <- (1 - step) f(v) + step * mean(f over N(v)).
    Isolated vertices keep their value. ``surface`` only needs ``adj_indptr``
    and ``adj_indices`` (CSR adjacency), as on :class:`hsc.mesh.ParamSurface`.
    """
    f = np.array(field, dtype=np.float64)
    indptr = np.asarray(surface.adj_indptr)
    n = len(indptr) - 1
    if f.shape != (n,):
        raise ValueError(f"field has shape {f.shape}, expected ({n},)")
    if not 0.0 < step <= 1.0:
        raise ValueError("step must lie in (0, 1]")
    if iterations < 0:
        raise ValueError("iterations must be non-negative")
    if iterations == 0:
        return f
    indices = np.asarray(surface.adj_indices)
    A = sparse.csr_matrix((np.ones(len(indices)), indices, indptr), shape=(n, n))
    deg = np.diff(indptr).astype(np.float64)
    has_nbrs = deg > 0
    for _ in range(iterations):
        nbr_mean = np.zeros(n)
        nbr_mean[has_nbrs] = (A @ f)[has_nbrs] / deg[has_nbrs]
        f = np.where(has_nbrs, (1.0 - step) * f + step * nbr_mean, f)
    return f
