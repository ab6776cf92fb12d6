"""Triangle meshes carrying a Klein-disk parameterization and per-vertex TBM.

Also reads and writes the HSM v1 text format::

    # optional comment lines
    HSM 1 <nv> <nf>
    x y z pu pv tbm        (nv lines)
    i j k                  (nf lines, 0-based)
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .errors import (
    DegenerateFaceError,
    DisconnectedMeshError,
    IndexOutOfRangeError,
    MeshError,
    ParamOutsideDiskError,
    ParseError,
)

HSM_MAGIC = "HSM"
HSM_VERSION = 1


def _readonly(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ParamSurface:
    """Immutable mesh. Build it with :func:`build_surface`, which validates."""

    positions: np.ndarray  # (nv, 3)
    params: np.ndarray  # (nv, 2) Klein-disk coordinates
    tbm: np.ndarray  # (nv,)
    faces: np.ndarray  # (nf, 3) int64
    adj_indptr: np.ndarray
    adj_indices: np.ndarray

    @property
    def n_vertices(self) -> int:
        return len(self.params)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def neighbors(self, v: int) -> np.ndarray:
        """Sorted 1-ring of ``v``."""
        return self.adj_indices[self.adj_indptr[v]:self.adj_indptr[v + 1]]

    @property
    def adjacency(self) -> list[np.ndarray]:
        return [self.neighbors(v) for v in range(self.n_vertices)]

    def vertex_records(self) -> np.ndarray:
        return np.column_stack([self.positions, self.params, self.tbm])

    def with_tbm(self, tbm) -> "ParamSurface":
        """Same geometry and connectivity, different TBM field (no revalidation)."""
        tbm = np.array(tbm, dtype=np.float64)
        if tbm.shape != (self.n_vertices,):
            raise MeshError(f"tbm has shape {tbm.shape}, expected ({self.n_vertices},)")
        return ParamSurface(self.positions, self.params, _readonly(tbm), self.faces,
                            self.adj_indptr, self.adj_indices)


def build_surface(vertices, faces) -> ParamSurface:
    """Validate vertex records ``(x, y, z, pu, pv, tbm)`` and face triples.

    Raises a distinct :class:`MeshError` subclass for out-of-range indices,
    repeated indices within a face, params outside the disk and meshes with
    more than one connected component.
    """
    verts = np.array(vertices, dtype=np.float64)
    if verts.ndim != 2 or verts.shape[1] != 6 or len(verts) < 1:
        raise MeshError(f"vertices must be an (nv>=1, 6) array, got shape {verts.shape}")
    f = np.array(faces, dtype=np.int64).reshape(-1, 3)
    n = len(verts)

    r2 = verts[:, 3] ** 2 + verts[:, 4] ** 2
    outside = ~(r2 < 1.0)
    if np.any(outside):
        raise ParamOutsideDiskError(f"vertex {int(np.argmax(outside))} param lies outside the unit disk")
    if len(f):
        bad = (f < 0) | (f >= n)
        if np.any(bad):
            raise IndexOutOfRangeError(f"face {int(np.argmax(bad.any(axis=1)))} has an index out of range [0, {n})")
        degen = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
        if np.any(degen):
            raise DegenerateFaceError(f"face {int(np.argmax(degen))} repeats a vertex index")

    rows = np.concatenate([f[:, 0], f[:, 1], f[:, 2], f[:, 1], f[:, 2], f[:, 0]])
    cols = np.concatenate([f[:, 1], f[:, 2], f[:, 0], f[:, 0], f[:, 1], f[:, 2]])
    A = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    A.sum_duplicates()
    A.sort_indices()
    n_comp, _ = connected_components(A, directed=False)
    if n_comp != 1:
        raise DisconnectedMeshError(f"mesh has {n_comp} connected components")

    return ParamSurface(
        positions=_readonly(np.ascontiguousarray(verts[:, :3])),
        params=_readonly(np.ascontiguousarray(verts[:, 3:5])),
        tbm=_readonly(np.ascontiguousarray(verts[:, 5])),
        faces=_readonly(f),
        adj_indptr=_readonly(A.indptr.astype(np.int64)),
        adj_indices=_readonly(A.indices.astype(np.int64)),
    )


def bfs_two_ring(surface: ParamSurface, center: int) -> list[int]:
    """Center, then its 1-ring, then the new vertices of the 2-ring.

    Each level is listed in ascending vertex index.
    """
    center = int(center)
    if not 0 <= center < surface.n_vertices:
        raise IndexOutOfRangeError(f"vertex {center} out of range")
    ring1 = [int(v) for v in surface.neighbors(center)]
    seen = {center, *ring1}
    ring2 = set()
    for v in ring1:
        for w in surface.neighbors(v):
            w = int(w)
            if w not in seen:
                ring2.add(w)
    return [center, *ring1, *sorted(ring2)]


def format_surface(surface: ParamSurface) -> str:
    lines = [f"{HSM_MAGIC} {HSM_VERSION} {surface.n_vertices} {surface.n_faces}"]
    for rec in surface.vertex_records():
        lines.append(" ".join(repr(float(x)) for x in rec))
    for i, j, k in surface.faces:
        lines.append(f"{i} {j} {k}")
    return "\n".join(lines) + "\n"


def parse_surface(text: str) -> ParamSurface:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    pos = 0
    while pos < len(lines) and lines[pos].startswith("#"):
        pos += 1
    if pos >= len(lines):
        raise ParseError("missing HSM header", line=pos + 1)
    header = lines[pos].split()
    if len(header) != 4 or header[0] != HSM_MAGIC:
        raise ParseError(f"bad header {lines[pos]!r}", line=pos + 1)
    try:
        version, nv, nf = (int(x) for x in header[1:])
    except ValueError:
        raise ParseError(f"bad header {lines[pos]!r}", line=pos + 1) from None
    if version != HSM_VERSION:
        raise ParseError(f"unsupported HSM version {version}", line=pos + 1)
    body = lines[pos + 1:]
    if len(body) != nv + nf:
        raise ParseError(f"header declares {nv} vertices and {nf} faces, found {len(body)} data lines",
                         line=pos + 1)

    first = pos + 2  # 1-based line number of the first vertex record
    verts = np.empty((nv, 6))
    for i in range(nv):
        parts = body[i].split()
        if len(parts) != 6:
            raise ParseError(f"expected 6 values, got {len(parts)}", line=first + i)
        try:
            verts[i] = [float(x) for x in parts]
        except ValueError:
            raise ParseError(f"non-numeric vertex record {body[i]!r}", line=first + i) from None
        if not verts[i, 3] ** 2 + verts[i, 4] ** 2 < 1.0:
            raise ParseError("param point lies on or outside the unit disk", line=first + i)
    faces = np.empty((nf, 3), dtype=np.int64)
    for k in range(nf):
        lineno = first + nv + k
        parts = body[nv + k].split()
        if len(parts) != 3:
            raise ParseError(f"expected 3 indices, got {len(parts)}", line=lineno)
        try:
            faces[k] = [int(x) for x in parts]
        except ValueError:
            raise ParseError(f"non-integer face {body[nv + k]!r}", line=lineno) from None
        if np.any((faces[k] < 0) | (faces[k] >= nv)):
            raise ParseError("face index out of range", line=lineno)
        if len(set(faces[k].tolist())) != 3:
            raise ParseError("degenerate face", line=lineno)
    try:
        return build_surface(verts, faces)
    except MeshError as exc:
        raise ParseError(str(exc)) from exc


def load_surface(path) -> ParamSurface:
    return parse_surface(Path(path).read_text(encoding="utf-8"))


def save_surface(surface: ParamSurface, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(format_surface(surface), encoding="utf-8", newline="\n")
    os.replace(tmp, path)
