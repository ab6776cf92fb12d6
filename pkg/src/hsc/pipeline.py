"""Max-pooling, AdaBoost with decision stumps, metrics and CV splits."""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .errors import ConfigError, ParseError, StratificationError

ADA_MAGIC = "HSCADA 1"
EPS_FLOOR = 1e-10


@dataclass(eq=False)
class SubjectRecord:
    subject_id: str
    pooled: np.ndarray
    label: int  # 1 = positive (converter / patient group)
    group_tag: str = ""


def max_pool(codes, t: int, mode: str = "max") -> np.ndarray:
    """Per-atom maximum over a subject's patch codes.

    ``codes`` is a sequence of :class:`~hsc.coding.SparseCode` or a dense
    (p, t) array. Coordinates absent from a code count as zero. ``mode="abs"``
    pools |z| instead of the signed value.
    """
    if mode not in ("max", "abs"):
        raise ConfigError(f"unknown pooling mode {mode!r}")
    if isinstance(codes, np.ndarray):
        Z = codes
        if Z.ndim != 2 or Z.shape[1] != t:
            raise ValueError(f"dense codes must have shape (p, {t})")
        if len(Z) == 0:
            raise ValueError("cannot pool an empty patch list")
        return (np.abs(Z) if mode == "abs" else Z).max(axis=0)
    codes = list(codes)
    if not codes:
        raise ValueError("cannot pool an empty patch list")
    out = np.full(t, -np.inf)
    for c in codes:
        if c.dim != t:
            raise ValueError(f"code dimension {c.dim} != {t}")
        dense = c.to_dense()
        np.maximum(out, np.abs(dense) if mode == "abs" else dense, out=out)
    return out


@dataclass(frozen=True)
class Stump:
    feature: int
    threshold: float
    polarity: int
    alpha: float
    error: float

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.where(X[:, self.feature] > self.threshold, self.polarity, -self.polarity)


@dataclass
class StumpEnsemble:
    rounds: list[Stump] = field(default_factory=list)
    stop_reason: str = ""

    def margin(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.zeros(len(X))
        for s in self.rounds:
            out += s.alpha * s.predict(X)
        return out

    def predict(self, X) -> np.ndarray:
        """1 for margin > 0; ties go to the negative class."""
        return (self.margin(X) > 0).astype(np.int64)

    def error_bound(self) -> float:
        """prod_r 2 sqrt(eps_r (1 - eps_r)), an upper bound on training error."""
        eps = np.maximum([s.error for s in self.rounds], EPS_FLOOR)
        return float(np.prod(2.0 * np.sqrt(eps * (1.0 - eps))))

    def to_json(self) -> dict:
        return {"format": ADA_MAGIC, "stop_reason": self.stop_reason,
                "rounds": [asdict(s) for s in self.rounds]}

    @classmethod
    def from_json(cls, doc) -> "StumpEnsemble":
        if doc.get("format") != ADA_MAGIC:
            raise ParseError(f"expected format {ADA_MAGIC!r}, got {doc.get('format')!r}")
        return cls([Stump(**r) for r in doc["rounds"]], doc.get("stop_reason", ""))


def adaboost_score(model: StumpEnsemble, pooled) -> float:
    return float(model.margin(np.asarray(pooled, dtype=np.float64)[None, :])[0])


def stump_weight(eps: float) -> float:
    eps = max(eps, EPS_FLOOR)
    return 0.5 * math.log((1.0 - eps) / eps)


def _as_arrays(records_or_X, y=None):
    if y is None:
        recs = list(records_or_X)
        X = np.array([r.pooled for r in recs], dtype=np.float64)
        y = np.array([r.label for r in recs], dtype=np.int64)
    else:
        X = np.asarray(records_or_X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
    return X, y


def adaboost_train(records, rounds: int = 100, y=None) -> StumpEnsemble:
    """Discrete AdaBoost over axis-aligned stumps.

    Accepts a list of :class:`SubjectRecord`, or a feature matrix with
    labels passed as ``y``. Candidate thresholds are midpoints between
    consecutive distinct feature values. Training stops early when a stump
    has zero weighted error (after adding it) or when no stump beats 0.5;
    in the latter case on the first round the model is empty and scores 0.
    """
    if rounds < 1:
        raise ConfigError("rounds must be >= 1")
    X, labels = _as_arrays(records, y)
    if set(np.unique(labels).tolist()) != {0, 1}:
        raise ValueError("adaboost_train needs both classes present")
    n, d = X.shape
    ys = np.where(labels == 1, 1.0, -1.0)
    order = np.argsort(X, axis=0, kind="stable")
    Xs = np.take_along_axis(X, order, axis=0)
    valid = Xs[:-1] < Xs[1:]  # split after row k is a real threshold
    thresholds = 0.5 * (Xs[:-1] + Xs[1:])
    Ys = ys[order]

    w = np.full(n, 1.0 / n)
    model = StumpEnsemble()
    if not valid.any():
        model.stop_reason = "no split candidates"
        return model
    for _ in range(rounds):
        Ws = w[order]
        cum_pos = np.cumsum(np.where(Ys > 0, Ws, 0.0), axis=0)[:-1]
        cum_neg = np.cumsum(np.where(Ys < 0, Ws, 0.0), axis=0)[:-1]
        pos_total = w[ys > 0].sum()
        neg_total = w[ys < 0].sum()
        # polarity +1 predicts positive above the threshold
        err_plus = cum_pos + (neg_total - cum_neg)
        err_minus = cum_neg + (pos_total - cum_pos)
        err_plus = np.where(valid, err_plus, np.inf)
        err_minus = np.where(valid, err_minus, np.inf)
        kp = np.argmin(err_plus)
        km = np.argmin(err_minus)
        if err_plus.flat[kp] <= err_minus.flat[km]:
            k, pol, eps = kp, 1, float(err_plus.flat[kp])
        else:
            k, pol, eps = km, -1, float(err_minus.flat[km])
        eps = max(eps, 0.0)
        if eps >= 0.5:
            model.stop_reason = "no stump beats chance"
            break
        row, feat = np.unravel_index(k, err_plus.shape)
        stump = Stump(int(feat), float(thresholds[row, feat]), pol, stump_weight(eps), eps)
        model.rounds.append(stump)
        if eps <= EPS_FLOOR:
            model.stop_reason = "zero training error"
            break
        w = w * np.exp(-stump.alpha * ys * stump.predict(X))
        w /= w.sum()
    else:
        model.stop_reason = "max rounds"
    return model


def save_model(model: StumpEnsemble, path) -> None:
    _atomic_write(path, json.dumps(model.to_json(), indent=1))


def load_model(path) -> StumpEnsemble:
    return StumpEnsemble.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class EvalReport:
    acc: float
    sen: float
    spe: float
    auc: float | None
    tp: int
    fn: int
    tn: int
    fp: int

    @classmethod
    def from_confusion(cls, tp, fn, tn, fp, auc=None) -> "EvalReport":
        P, N = tp + fn, tn + fp
        return cls((tp + tn) / (P + N), tp / P if P else float("nan"),
                   tn / N if N else float("nan"), auc, int(tp), int(fn), int(tn), int(fp))

    @property
    def confusion(self) -> tuple[int, int, int, int]:
        return self.tp, self.fn, self.tn, self.fp

    def as_percentages(self) -> dict:
        return {"ACC": f"{100 * self.acc:.2f}%", "SEN": f"{100 * self.sen:.2f}%",
                "SPE": f"{100 * self.spe:.2f}%",
                "AUC": "" if self.auc is None else f"{self.auc:.4f}"}


def auc_score(scores, labels) -> float:
    """Mann-Whitney AUC; tied positive/negative pairs earn half credit."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels == 1
    P, N = int(pos.sum()), int((~pos).sum())
    if P == 0 or N == 0:
        raise ValueError("AUC is undefined with a single class")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - P * (P + 1) / 2.0) / (P * N))


def evaluate(scores, labels) -> EvalReport:
    """Confusion at margin threshold 0 (ties negative) plus rank AUC."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    auc = auc_score(scores, labels)
    pred = scores > 0
    pos = labels == 1
    return EvalReport.from_confusion(int(np.sum(pred & pos)), int(np.sum(~pred & pos)),
                                     int(np.sum(~pred & ~pos)), int(np.sum(pred & ~pos)), auc)


def _largest_remainder(total: int, ratios) -> list[int]:
    ratios = np.asarray(ratios, dtype=np.float64)
    raw = total * ratios / ratios.sum()
    counts = np.floor(raw).astype(int)
    rest = total - counts.sum()
    for k in np.argsort(-(raw - counts), kind="stable")[:rest]:
        counts[k] += 1
    return counts.tolist()


def nested_split(labels, ratios=(7, 1, 2), seed=0):
    """Stratified train/validation/test index arrays."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    parts = [[] for _ in ratios]
    for cls in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == cls))
        counts = _largest_remainder(len(idx), ratios)
        if min(counts) < 1:
            raise StratificationError(f"class {cls} has {len(idx)} members, too few to split {tuple(ratios)}")
        start = 0
        for part, c in zip(parts, counts):
            part.extend(idx[start:start + c].tolist())
            start += c
    return tuple(np.sort(np.array(p, dtype=np.int64)) for p in parts)


def kfold_split(labels, k: int = 5, seed=0):
    """Stratified k-fold as a list of (train_idx, test_idx).

    Classes are dealt round-robin into folds, continuing from where the
    previous class stopped, so fold sizes differ by at most one.
    """
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    pos = 0
    for cls in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == cls))
        if len(idx) < k:
            raise StratificationError(f"class {cls} has {len(idx)} members, fewer than k={k}")
        for i in idx:
            folds[pos % k].append(int(i))
            pos += 1
    all_idx = np.arange(len(labels))
    out = []
    for f in folds:
        test = np.sort(np.array(f, dtype=np.int64))
        out.append((np.setdiff1d(all_idx, test), test))
    return out


@dataclass
class CVResult:
    report: EvalReport
    margins: np.ndarray  # out-of-sample margin per subject (nan where never tested)
    fold_reports: list[EvalReport]
    models: list[StumpEnsemble]
    selected_rounds: list[int]


def cross_validate(X, y, protocol: str = "kfold", k: int = 5, rounds: int = 100,
                   rounds_grid=None, seed=0) -> CVResult:
    """Run a CV protocol and evaluate pooled out-of-sample margins.

    ``kfold``: every subject is tested once; the report covers all subjects.
    ``nested``: a single stratified 7:1:2 split; when ``rounds_grid`` is given
    the round count with the best validation AUC is used for the test fit.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    margins = np.full(len(y), np.nan)
    fold_reports, models, chosen = [], [], []
    if protocol == "kfold":
        for train_idx, test_idx in kfold_split(y, k, seed):
            model = adaboost_train(X[train_idx], rounds, y=y[train_idx])
            margins[test_idx] = model.margin(X[test_idx])
            models.append(model)
            chosen.append(rounds)
            if len(np.unique(y[test_idx])) == 2:
                fold_reports.append(evaluate(margins[test_idx], y[test_idx]))
        tested = np.arange(len(y))
    elif protocol == "nested":
        train_idx, val_idx, test_idx = nested_split(y, (7, 1, 2), seed)
        best = rounds
        if rounds_grid:
            scores = []
            for r in rounds_grid:
                m = adaboost_train(X[train_idx], int(r), y=y[train_idx])
                scores.append(auc_score(m.margin(X[val_idx]), y[val_idx]))
            best = int(rounds_grid[int(np.argmax(scores))])
        model = adaboost_train(X[train_idx], best, y=y[train_idx])
        margins[test_idx] = model.margin(X[test_idx])
        models.append(model)
        chosen.append(best)
        tested = test_idx
        fold_reports.append(evaluate(margins[test_idx], y[test_idx]))
    else:
        raise ConfigError(f"unknown CV protocol {protocol!r}")
    report = evaluate(margins[tested], y[tested])
    return CVResult(report, margins, fold_reports, models, chosen)


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8", newline="\n")
    os.replace(tmp, path)
