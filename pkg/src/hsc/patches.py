"""Ring-shaped patch selection by farthest point sampling with BFS (FPSBS).

Centers are chosen by farthest point sampling in the hyperbolic parameter
domain; each center's patch is its two-ring BFS neighborhood. Distances are
Klein-model distances between parameter coordinates, never 3D geodesics.

The stop test uses the radius around the *latest* center while the next
center is chosen by distance to the *whole* center set. Both quantities are
recorded in :class:`SamplingTrace`; only the set radius is monotone.
"""

from __future__ import annotations

import csv
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, MeshError, ParseError
from .geometry import klein_distance
from .mesh import ParamSurface, bfs_two_ring


@dataclass(frozen=True)
class SamplingConfig:
    target_patch_count: int = 2000
    patch_dim: int = 300
    stop_radius: float = 0.1
    require_full_coverage: bool = True

    def __post_init__(self):
        if self.target_patch_count < 1:
            raise ConfigError("target_patch_count must be >= 1")
        if self.patch_dim < 1:
            raise ConfigError("patch_dim must be >= 1")
        if not self.stop_radius > 0:
            raise ConfigError("stop_radius must be > 0")


@dataclass(frozen=True, eq=False)
class RingPatch:
    center: int
    members: tuple[int, ...]
    features: np.ndarray


@dataclass
class SamplingTrace:
    """Per-center record of one sampling run, in selection order.

    ``set_radius[T]`` is max_v d(v, {c_1..c_T}); ``latest_radius[T]`` is
    max_v d(v, c_T), the quantity the stop test compares to ``stop_radius``.
    ``phase`` is ``"fps"`` for farthest-point centers and ``"coverage"`` for
    centers added afterwards to reach uncovered vertices.
    """

    centers: list[int] = field(default_factory=list)
    phase: list[str] = field(default_factory=list)
    set_radius: list[float] = field(default_factory=list)
    latest_radius: list[float] = field(default_factory=list)
    stopped_by_radius: bool = False


def fpsbs_trace(surface: ParamSurface, config: SamplingConfig, seed) -> SamplingTrace:
    n = surface.n_vertices
    if n < 1:
        raise MeshError("cannot sample an empty mesh")
    p = config.target_patch_count
    if p > n:
        warnings.warn(f"target_patch_count {p} exceeds vertex count {n}; clamped", stacklevel=2)
        p = n
    rng = np.random.default_rng(seed)
    params = surface.params
    trace = SamplingTrace()
    covered = np.zeros(n, dtype=bool)
    min_dist = np.full(n, np.inf)

    def add(c, phase):
        d = klein_distance(params, params[c])
        np.minimum(min_dist, d, out=min_dist)
        covered[bfs_two_ring(surface, c)] = True
        trace.centers.append(int(c))
        trace.phase.append(phase)
        trace.set_radius.append(float(min_dist.max()))
        trace.latest_radius.append(float(d.max()))

    add(int(rng.integers(n)), "fps")
    while len(trace.centers) < p:
        if trace.latest_radius[-1] <= config.stop_radius:
            trace.stopped_by_radius = True
            break
        if trace.set_radius[-1] == 0.0:
            break
        add(int(np.argmax(min_dist)), "fps")
    else:
        trace.stopped_by_radius = trace.latest_radius[-1] <= config.stop_radius

    if config.require_full_coverage:
        while not covered.all():
            uncovered = np.flatnonzero(~covered)
            add(int(uncovered[np.argmax(min_dist[uncovered])]), "coverage")
    return trace


def patch_features(surface: ParamSurface, center: int, m: int) -> RingPatch:
    """Two-ring patch of ``center`` with a length-``m`` TBM feature vector.

    Members keep BFS order. Features list member TBM values by increasing
    Klein distance from the center (ties by vertex index), truncated to ``m``
    and padded with the center's TBM value.
    """
    members = bfs_two_ring(surface, center)
    idx = np.asarray(members, dtype=np.int64)
    dist = klein_distance(surface.params[idx], surface.params[center])
    order = np.lexsort((idx, dist))[:m]
    feats = np.full(m, surface.tbm[center], dtype=np.float64)
    feats[:len(order)] = surface.tbm[idx[order]]
    return RingPatch(center=int(center), members=tuple(members), features=feats)


def fpsbs_sample(surface: ParamSurface, config: SamplingConfig, seed) -> list[RingPatch]:
    trace = fpsbs_trace(surface, config, seed)
    return [patch_features(surface, c, config.patch_dim) for c in trace.centers]


def patches_for_centers(surface: ParamSurface, centers, m: int) -> list[RingPatch]:
    """Extract patches at fixed centers, e.g. to reuse one sampling across registered subjects."""
    return [patch_features(surface, c, m) for c in centers]


def write_patch_csv(patches, path) -> None:
    """Debug dump: patch_id, center, member_count, f0..f{m-1}."""
    path = Path(path)
    m = len(patches[0].features) if patches else 0
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["patch_id", "center", "member_count", *(f"f{k}" for k in range(m))])
        for i, patch in enumerate(patches):
            w.writerow([i, patch.center, len(patch.members), *(repr(float(x)) for x in patch.features)])
    os.replace(tmp, path)


@dataclass(eq=False)
class PatchTable:
    centers: np.ndarray
    member_counts: np.ndarray
    features: np.ndarray  # (p, m)


def read_patch_csv(path) -> PatchTable:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:3] != ["patch_id", "center", "member_count"]:
        raise ParseError(f"{path}: not a patch dump", line=1)
    m = len(rows[0]) - 3
    body = rows[1:]
    feats = np.empty((len(body), m))
    centers = np.empty(len(body), dtype=np.int64)
    counts = np.empty(len(body), dtype=np.int64)
    for i, row in enumerate(body):
        if len(row) != m + 3 or int(row[0]) != i:
            raise ParseError(f"{path}: malformed patch row", line=i + 2)
        centers[i] = int(row[1])
        counts[i] = int(row[2])
        feats[i] = [float(x) for x in row[3:]]
    return PatchTable(centers, counts, feats)
