"""Synthetic parameterized meshes with class-dependent TBM fields.

All subjects share one base mesh, an annulus in the Klein disk lifted onto
a paraboloid, the way registered subjects share a template. TBM is
``1 + N(0, noise_sigma)`` at every vertex; positive subjects are further
multiplied by ``1 + effect_size`` inside a hyperbolic disk (regional
expansion or atrophy).
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .geometry import klein_distance
from .mesh import ParamSurface, build_surface, save_surface


@dataclass(frozen=True)
class SynthConfig:
    subjects_per_class: int = 60
    n_radial: int = 12
    n_angular: int = 60
    inner_radius: float = 0.2
    outer_radius: float = 0.75
    effect_center: tuple[float, float] = (0.45, 0.0)
    effect_radius: float = 0.35  # hyperbolic
    effect_size: float = 0.5
    noise_sigma: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.subjects_per_class < 1:
            raise ConfigError("subjects_per_class must be >= 1")
        if self.n_radial < 2 or self.n_angular < 3:
            raise ConfigError("grid needs n_radial >= 2 and n_angular >= 3")
        if not 0 <= self.inner_radius < self.outer_radius < 1:
            raise ConfigError("need 0 <= inner_radius < outer_radius < 1")
        cu, cv = self.effect_center
        if not cu * cu + cv * cv < 1:
            raise ConfigError("effect_center must lie inside the unit disk")
        if not self.effect_radius > 0:
            raise ConfigError("effect_radius must be > 0")
        if self.effect_size < 0 or self.noise_sigma < 0:
            raise ConfigError("effect_size and noise_sigma must be >= 0")


def _quad_faces(nx, ny, wrap_x=False, wrap_y=False):
    """Two triangles per grid cell, vertex (i, j) at index i*ny + j."""
    faces = []
    for i in range(nx if wrap_x else nx - 1):
        for j in range(ny if wrap_y else ny - 1):
            a = i * ny + j
            b = ((i + 1) % nx) * ny + j
            c = ((i + 1) % nx) * ny + (j + 1) % ny
            d = i * ny + (j + 1) % ny
            faces.append((a, b, c))
            faces.append((a, c, d))
    return np.array(faces, dtype=np.int64)


def grid_surface(nx: int, ny: int, center=(0.0, 0.0), half_width: float = 0.3, tbm=None) -> ParamSurface:
    """Planar triangulated grid occupying a square of the Klein disk."""
    if nx < 1 or ny < 1:
        raise ConfigError("grid dims must be >= 1")
    us = center[0] + np.linspace(-half_width, half_width, nx) if nx > 1 else np.array([center[0]])
    vs = center[1] + np.linspace(-half_width, half_width, ny) if ny > 1 else np.array([center[1]])
    U, V = np.meshgrid(us, vs, indexing="ij")
    params = np.column_stack([U.ravel(), V.ravel()])
    pos = np.column_stack([params, 0.5 * (params ** 2).sum(axis=1)])
    t = np.ones(len(params)) if tbm is None else np.asarray(tbm, dtype=np.float64)
    faces = _quad_faces(nx, ny) if nx > 1 and ny > 1 else np.empty((0, 3), dtype=np.int64)
    if len(faces) == 0 and len(params) > 1:
        raise ConfigError("a grid with more than one vertex needs nx, ny >= 2")
    return build_surface(np.column_stack([pos, params, t]), faces)


def torus_surface(nx: int, ny: int) -> ParamSurface:
    """Closed regular (degree-6) triangulation; params are a flattened grid."""
    if nx < 4 or ny < 4:
        raise ConfigError("torus needs nx, ny >= 4 to avoid repeated neighbors")
    a = np.linspace(0, 2 * np.pi, nx, endpoint=False)
    b = np.linspace(0, 2 * np.pi, ny, endpoint=False)
    A, B = np.meshgrid(a, b, indexing="ij")
    pos = np.column_stack([((2 + np.cos(B)) * np.cos(A)).ravel(),
                           ((2 + np.cos(B)) * np.sin(A)).ravel(), np.sin(B).ravel()])
    params = 0.5 * np.column_stack([A.ravel() / np.pi - 1, B.ravel() / np.pi - 1])
    verts = np.column_stack([pos, params, np.ones(len(params))])
    return build_surface(verts, _quad_faces(nx, ny, wrap_x=True, wrap_y=True))


def annulus_surface(n_radial: int, n_angular: int, inner_radius: float, outer_radius: float) -> ParamSurface:
    """Polar grid between two Klein radii, periodic in angle, lifted onto z = (u^2 + v^2)/2."""
    radii = np.linspace(inner_radius, outer_radius, n_radial)
    theta = np.linspace(0, 2 * np.pi, n_angular, endpoint=False)
    R, T = np.meshgrid(radii, theta, indexing="ij")
    params = np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])
    pos = np.column_stack([params, 0.5 * (params ** 2).sum(axis=1)])
    verts = np.column_stack([pos, params, np.ones(len(params))])
    return build_surface(verts, _quad_faces(n_radial, n_angular, wrap_y=True))


def base_mesh(config: SynthConfig) -> ParamSurface:
    return annulus_surface(config.n_radial, config.n_angular, config.inner_radius, config.outer_radius)


def effect_mask(surface: ParamSurface, config: SynthConfig) -> np.ndarray:
    return klein_distance(surface.params, np.asarray(config.effect_center)) < config.effect_radius


def generate(config: SynthConfig) -> list[tuple[ParamSurface, int]]:
    """Subjects alternate negative/positive; subject k draws from its own child seed."""
    base = base_mesh(config)
    mask = effect_mask(base, config)
    n_subjects = 2 * config.subjects_per_class
    children = np.random.SeedSequence(config.seed).spawn(n_subjects)
    out = []
    for k in range(n_subjects):
        label = k % 2
        rng = np.random.default_rng(children[k])
        tbm = 1.0 + rng.normal(0.0, config.noise_sigma, base.n_vertices)
        if label == 1:
            tbm = np.where(mask, tbm * (1.0 + config.effect_size), tbm)
        out.append((base.with_tbm(tbm), label))
    return out


def subject_id(k: int) -> str:
    return f"subj{k:04d}"


def write_dataset(subjects, out_dir) -> list[str]:
    """Write ``<id>.hsm`` files plus ``labels.csv`` (subject_id, label); returns the ids."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ids = []
    for k, (surface, _) in enumerate(subjects):
        sid = subject_id(k)
        save_surface(surface, out_dir / f"{sid}.hsm")
        ids.append(sid)
    tmp = out_dir / "labels.csv.tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject_id", "label"])
        for sid, (_, label) in zip(ids, subjects):
            w.writerow([sid, label])
    os.replace(tmp, out_dir / "labels.csv")
    return ids


def read_labels(path) -> list[tuple[str, int]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [(r["subject_id"], int(r["label"])) for r in rows]
