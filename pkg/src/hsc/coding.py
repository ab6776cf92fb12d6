"""Stochastic coordinate coding (SCC) for dictionary learning.

Each training patch x_i is visited once per epoch. Its sparse code is warm
started from the previous epoch and refreshed by coordinate descent (one
cyclic pass over all atoms, then a few passes over the resulting support);
afterwards only the support columns of the dictionary take a projected SGD
step whose per-column learning rate is the inverse of the accumulated
diagonal Hessian ``h_jj = sum z_j^2``.

The per-patch objective is f(D, z) = 0.5 ||Dz - x||^2 + lam ||z||_1, and
g(D) = 0.5 ||Dz - x||^2 is its smooth part at a fixed code.

Internally the dictionary is stored atom-major (``atoms[j]`` is column
d_j), which keeps every column access contiguous.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .errors import ConfigError, ParseError

DICT_MAGIC = "HSCDICT 1"
# Keeps eta * ||z||^2 strictly below one after rounding.
STEP_CLAMP_MARGIN = 1e-9


@dataclass(frozen=True)
class SccConfig:
    lam: float = 0.10
    epochs: int = 10
    cd_support_passes: int = 3
    normalize_inputs: bool = True
    shuffle: bool = False
    seed: int = 0

    def __post_init__(self):
        if not self.lam > 0:
            raise ConfigError("lambda must be > 0")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.cd_support_passes < 0:
            raise ConfigError("cd_support_passes must be >= 0")


@dataclass(eq=False)
class SparseCode:
    indices: np.ndarray  # int64, strictly ascending
    values: np.ndarray  # nonzero
    dim: int

    @classmethod
    def zeros(cls, dim: int) -> "SparseCode":
        return cls(np.empty(0, dtype=np.int64), np.empty(0), int(dim))

    @classmethod
    def from_dense(cls, z) -> "SparseCode":
        z = np.asarray(z, dtype=np.float64)
        idx = np.flatnonzero(z)
        return cls(idx.astype(np.int64), z[idx].copy(), len(z))

    def to_dense(self) -> np.ndarray:
        z = np.zeros(self.dim)
        z[self.indices] = self.values
        return z

    @property
    def support(self) -> list[int]:
        return self.indices.tolist()

    @property
    def l1(self) -> float:
        return float(np.abs(self.values).sum())

    def __eq__(self, other):
        if not isinstance(other, SparseCode):
            return NotImplemented
        return (self.dim == other.dim and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.values, other.values))


@dataclass(eq=False)
class Dictionary:
    """m x t dictionary with unit-ball columns and the diagonal Hessian accumulator."""

    atoms: np.ndarray  # (t, m); atoms[j] is column d_j
    hessian_diag: np.ndarray  # (t,)
    epoch: int = 0
    within_epoch_index: int = 0
    lam: float | None = None

    @classmethod
    def from_columns(cls, columns, hessian_diag=None, **kw) -> "Dictionary":
        atoms = np.ascontiguousarray(np.asarray(columns, dtype=np.float64).T)
        h = np.zeros(len(atoms)) if hessian_diag is None else np.array(hessian_diag, dtype=np.float64)
        return cls(atoms, h, **kw)

    @property
    def columns(self) -> np.ndarray:
        return self.atoms.T

    @property
    def m(self) -> int:
        return self.atoms.shape[1]

    @property
    def t(self) -> int:
        return self.atoms.shape[0]

    def column_norms_sq(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.atoms, self.atoms)

    def copy(self) -> "Dictionary":
        return Dictionary(self.atoms.copy(), self.hessian_diag.copy(), self.epoch,
                          self.within_epoch_index, self.lam)


@dataclass(eq=False)
class ConvergenceDiag:
    """Per-step diagnostics of a training run, stored column-wise in processing order.

    ``lipschitz`` is ||D||_F^2 at the CD step, an upper bound on the squared
    spectral norm; ``max_col_norm_sq`` is recorded alongside to check it.
    """

    lam: float
    epoch: np.ndarray
    sample: np.ndarray
    f_before_cd: np.ndarray
    f_after_cd: np.ndarray
    g_before_sgd: np.ndarray
    g_after_sgd: np.ndarray
    code_l1: np.ndarray
    lipschitz: np.ndarray
    max_col_norm_sq: np.ndarray
    max_col_norm_sq_after: np.ndarray

    def __len__(self):
        return len(self.epoch)

    @property
    def f_after_sgd(self) -> np.ndarray:
        return self.g_after_sgd + self.lam * self.code_l1

    def epoch_objectives(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-epoch (start, end) averages.

        start[k] = mean_i f_i(D_i^k, z_i^{k-1}), end[k] = mean_i f_i(D_{i+1}^k, z_i^k).
        """
        epochs = np.unique(self.epoch)
        start = np.array([self.f_before_cd[self.epoch == k].mean() for k in epochs])
        end = np.array([self.f_after_sgd[self.epoch == k].mean() for k in epochs])
        return start, end

    def summary(self) -> dict:
        start, end = self.epoch_objectives()
        return {
            "steps": len(self),
            "max_cd_increase": float(np.max(self.f_after_cd - self.f_before_cd, initial=-np.inf)),
            "max_sgd_increase": float(np.max(self.g_after_sgd - self.g_before_sgd, initial=-np.inf)),
            "max_epoch_increase": float(np.max(end - start, initial=-np.inf)),
            "max_col_norm_sq": float(np.max(self.max_col_norm_sq_after, initial=0.0)),
            "epoch_start": start.tolist(),
            "epoch_end": end.tolist(),
        }

    def write_csv(self, path) -> None:
        cols = ["epoch", "sample", "f_before_cd", "f_after_cd", "g_before_sgd",
                "g_after_sgd", "code_l1", "lipschitz"]
        data = np.column_stack([getattr(self, c) for c in cols])
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        np.savetxt(tmp, data, delimiter=",", header=",".join(cols), comments="", fmt="%.17g")
        os.replace(tmp, path)


@njit(cache=True, nogil=True)
def _soft(v, lam):
    if v > lam:
        return v - lam
    if v < -lam:
        return v + lam
    return 0.0


def soft_threshold(v: float, lam: float) -> float:
    """Proximal operator of lam*|.|: shrink ``v`` toward zero by ``lam``."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    return float(_soft(float(v), float(lam)))


@njit(cache=True, nogil=True)
def _cd_sweep(atoms, col_sq, z, r, lam, coords):
    """One cyclic pass over ``coords``; ``r = x - Dz`` is kept current.

    Each coordinate is set to its exact minimiser
    h_lam(d_j.r + |d_j|^2 z_j) / |d_j|^2, which reduces to the familiar
    h_lam(d_j.r + z_j) for unit-norm atoms.
    """
    m = atoms.shape[1]
    max_change = 0.0
    for j in coords:
        a = col_sq[j]
        zj = z[j]
        if a > 0.0:
            b = a * zj
            for k in range(m):
                b += atoms[j, k] * r[k]
            new = _soft(b, lam) / a
        else:
            new = 0.0
        delta = new - zj
        if delta != 0.0:
            for k in range(m):
                r[k] -= atoms[j, k] * delta
            z[j] = new
            if abs(delta) > max_change:
                max_change = abs(delta)
    return max_change


@njit(cache=True, nogil=True)
def _cd_update(atoms, col_sq, z, x, lam, support_passes):
    t, m = atoms.shape
    r = x.copy()
    for j in range(t):
        if z[j] != 0.0:
            for k in range(m):
                r[k] -= atoms[j, k] * z[j]
    z_start = z.copy()
    _cd_sweep(atoms, col_sq, z, r, lam, np.arange(t))
    support = np.flatnonzero(z)
    for _ in range(support_passes):
        if _cd_sweep(atoms, col_sq, z, r, lam, support) == 0.0:
            break
    return np.max(np.abs(z - z_start)) if t > 0 else 0.0


@njit(cache=True, nogil=True)
def _objective(atoms, z, x, lam):
    t, m = atoms.shape
    r = -x.copy()
    l1 = 0.0
    for j in range(t):
        if z[j] != 0.0:
            l1 += abs(z[j])
            for k in range(m):
                r[k] += atoms[j, k] * z[j]
    return 0.5 * np.dot(r, r), l1


@njit(cache=True, nogil=True)
def _sgd_update(atoms, col_sq, hdiag, z, x):
    """Projected SGD on the support columns; returns (g_before, g_after).

    Every support column moves against the gradient at the *current* D, so
    the residual is formed once before any column changes.
    """
    t, m = atoms.shape
    support = np.flatnonzero(z)
    res = -x.copy()
    znorm2 = 0.0
    for j in support:
        znorm2 += z[j] * z[j]
        for k in range(m):
            res[k] += atoms[j, k] * z[j]
    g_before = 0.5 * np.dot(res, res)
    if support.size == 0:
        return g_before, g_before
    eta_cap = (1.0 - STEP_CLAMP_MARGIN) / znorm2
    for j in support:
        hdiag[j] += z[j] * z[j]
        eta = min(1.0 / hdiag[j], eta_cap)
        scale = eta * z[j]
        nsq = 0.0
        for k in range(m):
            atoms[j, k] -= scale * res[k]
            nsq += atoms[j, k] * atoms[j, k]
        if nsq > 1.0:
            inv = 1.0 / np.sqrt(nsq)
            nsq = 0.0
            for k in range(m):
                atoms[j, k] *= inv
                nsq += atoms[j, k] * atoms[j, k]
        col_sq[j] = nsq
    g_after, _ = _objective(atoms, z, x, 0.0)
    return g_before, g_after


def _check_x(D: Dictionary, x) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != (D.m,):
        raise ValueError(f"x has shape {x.shape}, dictionary atoms have length {D.m}")
    return x


def objective_single(D: Dictionary, z: SparseCode, x, lam: float) -> float:
    x = _check_x(D, x)
    if z.dim != D.t:
        raise ValueError(f"code has dimension {z.dim}, dictionary has {D.t} atoms")
    g, l1 = _objective(D.atoms, z.to_dense(), x, float(lam))
    return g + lam * l1


def cd_update(D: Dictionary, z_prev: SparseCode, x, config: SccConfig) -> SparseCode:
    """One full cyclic CD pass, then ``cd_support_passes`` passes on the support."""
    x = _check_x(D, x)
    z = z_prev.to_dense()
    _cd_update(D.atoms, D.column_norms_sq(), z, x, float(config.lam), int(config.cd_support_passes))
    return SparseCode.from_dense(z)


def encode(D: Dictionary, x, config: SccConfig, tol: float = 1e-8, max_iter: int = 200) -> SparseCode:
    """Sparse code of ``x`` under a frozen dictionary, by CD from zero to convergence.

    Repeats the ``cd_update`` schedule until no coordinate moves by more than
    ``tol`` or ``max_iter`` rounds have run.
    """
    x = _check_x(D, x)
    return SparseCode.from_dense(encode_batch(D, x[None, :], config, tol, max_iter, normalize=False)[0])


@njit(cache=True, nogil=True)
def _gram_sweep(G, q, z, lam, coords):
    """``_cd_sweep`` expressed through the Gram matrix; ``q = D^T (x - Dz)``."""
    max_change = 0.0
    for j in coords:
        a = G[j, j]
        zj = z[j]
        new = _soft(q[j] + a * zj, lam) / a if a > 0.0 else 0.0
        delta = new - zj
        if delta != 0.0:
            for k in range(q.shape[0]):
                q[k] -= G[j, k] * delta
            z[j] = new
            if abs(delta) > max_change:
                max_change = abs(delta)
    return max_change


@njit(cache=True, nogil=True)
def _encode_batch(atoms, X, lam, support_passes, tol, max_iter):
    t = atoms.shape[0]
    G = atoms @ atoms.T
    all_coords = np.arange(t)
    Z = np.zeros((X.shape[0], t))
    for i in range(X.shape[0]):
        z = Z[i]
        q = atoms @ X[i]
        for _ in range(max_iter):
            z_start = z.copy()
            _gram_sweep(G, q, z, lam, all_coords)
            support = np.flatnonzero(z)
            for _ in range(support_passes):
                if _gram_sweep(G, q, z, lam, support) == 0.0:
                    break
            if np.max(np.abs(z - z_start)) < tol:
                break
    return Z


def encode_batch(D: Dictionary, X, config: SccConfig, tol: float = 1e-8, max_iter: int = 200,
                 normalize: bool | None = None) -> np.ndarray:
    """Dense (n, t) codes for the rows of ``X``.

    Rows are scaled to unit norm first when ``normalize`` (default: the
    config's ``normalize_inputs``) is set, matching training.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != D.m:
        raise ValueError(f"X must have shape (n, {D.m})")
    if config.normalize_inputs if normalize is None else normalize:
        X = normalize_rows(X)
    return _encode_batch(np.ascontiguousarray(D.atoms), X, float(config.lam),
                         int(config.cd_support_passes), tol, max_iter)


def sgd_dictionary_update(D: Dictionary, z: SparseCode, x, inplace: bool = False) -> Dictionary:
    """Projected SGD step on the support columns of ``D``.

    h_jj += z_j^2 and d_j <- P(d_j - eta_j z_j (Dz - x)) for j in supp(z), with
    eta_j = min(1/h_jj, 1/||z||^2) and P the rescale onto the unit ball.
    """
    x = _check_x(D, x)
    out = D if inplace else D.copy()
    col_sq = out.column_norms_sq()
    _sgd_update(out.atoms, col_sq, out.hessian_diag, z.to_dense(), x)
    return out


def normalize_rows(X) -> np.ndarray:
    X = np.array(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=1)
    nz = norms > 0
    X[nz] /= norms[nz, None]
    return X


def init_dictionary(X, n_atoms: int, rng) -> Dictionary:
    """Columns copied from ``n_atoms`` distinct random rows of ``X``, rescaled to unit norm."""
    X = np.asarray(X, dtype=np.float64)
    if n_atoms > len(X):
        raise ConfigError(f"n_atoms={n_atoms} exceeds the number of patches {len(X)}")
    rows = np.sort(rng.choice(len(X), size=n_atoms, replace=False))
    return Dictionary(normalize_rows(X[rows]), np.zeros(n_atoms))


@njit(cache=True)
def _train_step(atoms, col_sq, hdiag, z, x, lam, support_passes):
    lipschitz = 0.0
    max_sq = 0.0
    for j in range(col_sq.shape[0]):
        lipschitz += col_sq[j]
        if col_sq[j] > max_sq:
            max_sq = col_sq[j]
    g0, l10 = _objective(atoms, z, x, lam)
    _cd_update(atoms, col_sq, z, x, lam, support_passes)
    g1, l11 = _objective(atoms, z, x, lam)
    gb, ga = _sgd_update(atoms, col_sq, hdiag, z, x)
    max_after = 0.0
    for j in range(col_sq.shape[0]):
        if col_sq[j] > max_after:
            max_after = col_sq[j]
    return g0 + lam * l10, g1 + lam * l11, gb, ga, l11, lipschitz, max_sq, max_after


def train(X, config: SccConfig, n_atoms: int | None = None, init=None):
    """Learn a dictionary from patch vectors ``X`` (n, m) with batch size one.

    The initial dictionary is ``init`` (an (m, t) column matrix or a
    :class:`Dictionary`) or else ``n_atoms`` random patches. Returns
    ``(dictionary, diagnostics, codes)`` where ``codes`` are the final
    per-sample warm-start codes.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise ConfigError("training needs a non-empty (n, m) patch matrix")
    n, m = X.shape
    if config.normalize_inputs:
        X = normalize_rows(X)
    rng = np.random.default_rng(config.seed)
    if init is None:
        if n_atoms is None:
            raise ConfigError("either n_atoms or init is required")
        D = init_dictionary(X, n_atoms, rng)
    elif isinstance(init, Dictionary):
        D = init.copy()
    else:
        init = np.asarray(init, dtype=np.float64)
        if init.shape[0] != m:
            raise ConfigError(f"init columns have length {init.shape[0]}, patches have {m}")
        if init.shape[1] > n:
            raise ConfigError(f"t={init.shape[1]} exceeds n={n}")
        D = Dictionary(normalize_rows(init.T), np.zeros(init.shape[1]))
    D.lam = config.lam
    t = D.t
    lam = float(config.lam)
    passes = int(config.cd_support_passes)
    col_sq = D.column_norms_sq()

    total = n * config.epochs
    rec = {k: np.empty(total) for k in ("f0", "f1", "gb", "ga", "l1", "lip", "mx", "mxa")}
    ep = np.empty(total, dtype=np.int64)
    smp = np.empty(total, dtype=np.int64)
    codes = [SparseCode.zeros(t) for _ in range(n)]
    z = np.zeros(t)
    step = 0
    for k in range(1, config.epochs + 1):
        order = rng.permutation(n) if config.shuffle else range(n)
        for i in order:
            z[:] = 0.0
            code = codes[i]
            z[code.indices] = code.values
            out = _train_step(D.atoms, col_sq, D.hessian_diag, z, X[i], lam, passes)
            codes[i] = SparseCode.from_dense(z)
            (rec["f0"][step], rec["f1"][step], rec["gb"][step], rec["ga"][step],
             rec["l1"][step], rec["lip"][step], rec["mx"][step], rec["mxa"][step]) = out
            ep[step] = k
            smp[step] = i
            step += 1
            D.within_epoch_index = int(i) + 1
        D.epoch = k
    diag = ConvergenceDiag(lam, ep, smp, rec["f0"], rec["f1"], rec["gb"], rec["ga"],
                           rec["l1"], rec["lip"], rec["mx"], rec["mxa"])
    return D, diag, codes


def save_dictionary(D: Dictionary, path) -> None:
    doc = {
        "format": DICT_MAGIC,
        "m": D.m,
        "t": D.t,
        "lambda": D.lam,
        "epoch": D.epoch,
        "within_epoch_index": D.within_epoch_index,
        # column-major: column j occupies [j*m, (j+1)*m)
        "columns": D.atoms.ravel().tolist(),
        "hessian_diag": D.hessian_diag.tolist(),
    }
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(doc), encoding="utf-8")
    os.replace(tmp, path)


def load_dictionary(path) -> Dictionary:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if doc.get("format") != DICT_MAGIC:
        raise ParseError(f"{path}: expected format {DICT_MAGIC!r}, got {doc.get('format')!r}")
    m, t = int(doc["m"]), int(doc["t"])
    atoms = np.array(doc["columns"], dtype=np.float64)
    h = np.array(doc["hessian_diag"], dtype=np.float64)
    if atoms.size != m * t or h.size != t:
        raise ParseError(f"{path}: array sizes do not match m={m}, t={t}")
    return Dictionary(atoms.reshape(t, m), h, int(doc["epoch"]), int(doc["within_epoch_index"]),
                      doc.get("lambda"))
