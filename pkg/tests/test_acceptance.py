"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the criterion lines are
repeated in the terminal summary.
"""

import json
import time
import warnings

import numpy as np
import pytest

from conftest import record_criterion
from hsc.cli import main
from hsc.coding import Dictionary, SccConfig, encode, train
from hsc.geometry import derivative_map, klein_distance, klein_to_poincare, poincare_distance, tbm_value
from hsc.mesh import bfs_two_ring
from hsc.patches import SamplingConfig, fpsbs_trace
from hsc.pipeline import EvalReport
from hsc.synth import grid_surface
from oracles import kkt_violation, lasso_objective, naive_cd, random_lasso_instance


def test_criterion_1_convergence_diagnostics():
    rng = np.random.default_rng(2024)
    m, t, n = 50, 100, 1000
    # low-rank patches plus noise, roughly what smooth TBM rings look like
    basis = rng.normal(size=(8, m))
    X = rng.normal(size=(n, 8)) @ basis + 0.3 * rng.normal(size=(n, m))
    cfg = SccConfig(lam=0.12, epochs=10, seed=1)
    t0 = time.perf_counter()
    _, diag, _ = train(X, cfg, n_atoms=t)
    elapsed = time.perf_counter() - t0
    cd_worst = float(np.max(diag.f_after_cd - diag.f_before_cd))
    sgd_worst = float(np.max(diag.g_after_sgd - diag.g_before_sgd))
    start, end = diag.epoch_objectives()
    epoch_worst = float(np.max(end - start))
    ok = (len(diag) == n * 10 and cd_worst <= 1e-12 and sgd_worst <= 1e-12
          and epoch_worst <= 1e-10 and elapsed < 60)
    record_criterion(1, ok, f"steps={len(diag)} max CD rise={cd_worst:.3g} max SGD rise={sgd_worst:.3g} "
                            f"max epoch rise={epoch_worst:.3g} time={elapsed:.1f}s "
                            f"epoch-start averages {np.round(start, 5).tolist()}")
    assert ok


@pytest.fixture(scope="module")
def lasso_runs():
    rng = np.random.default_rng(7)
    runs = []
    for _ in range(100):
        D, x, lam = random_lasso_instance(rng, m_max=10, t_max=15)
        z = encode(Dictionary.from_columns(D), x, SccConfig(lam=lam), tol=1e-14, max_iter=1_000_000).to_dense()
        runs.append((D, x, lam, z))
    return runs


def test_criterion_2_lasso_oracle(lasso_runs):
    kkt = max(kkt_violation(D, z, x, lam) for D, x, lam, z in lasso_runs)
    gap = max(abs(lasso_objective(D, z, x, lam) - lasso_objective(D, naive_cd(D, x, lam), x, lam))
              for D, x, lam, z in lasso_runs)
    ok = kkt <= 1e-6 and gap <= 1e-8
    record_criterion(2, ok, f"100 instances, max KKT violation={kkt:.3g}, max objective gap={gap:.3g}")
    assert ok


def test_criterion_3_l1_bound(lasso_runs):
    slack = max(np.abs(z).sum() - 1 / (2 * lam) for D, x, lam, z in lasso_runs)
    ok = slack <= 1e-9
    record_criterion(3, ok, f"max ||z||_1 - 1/(2 lambda) = {slack:.4g}")
    assert ok


def _check_fps_trace(surf, trace):
    """Recompute every center choice from scratch; returns a list of problems."""
    n = surf.n_vertices
    problems = []
    rows = []
    covered = np.zeros(n, dtype=bool)
    for T, (c, phase) in enumerate(zip(trace.centers, trace.phase)):
        if T > 0:
            score = np.min(np.array(rows), axis=0)
            pool = np.arange(n) if phase == "fps" else np.flatnonzero(~covered)
            best = score[pool].max()
            expected = pool[np.flatnonzero(score[pool] == best)[0]]
            if c != expected:
                problems.append(f"center {T}: got {c}, argmax {expected}")
        rows.append(klein_distance(surf.params, surf.params[c]))
        covered[bfs_two_ring(surf, c)] = True
    if not covered.all():
        problems.append(f"{int((~covered).sum())} vertices uncovered")
    if any(b > a for a, b in zip(trace.set_radius, trace.set_radius[1:])):
        problems.append("set radius increased")
    return problems


def test_criterion_4_fpsbs():
    sizes = [(2, 2), (5, 5), (9, 14), (20, 20), (33, 27), (50, 50)]
    problems = []
    elapsed = 0.0
    n_centers = 0
    for k, (nx, ny) in enumerate(sizes):
        surf = grid_surface(nx, ny, center=(0.05, -0.1), half_width=0.6)
        cfg = SamplingConfig(target_patch_count=max(1, nx * ny // 40), stop_radius=1e-3)
        t0 = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            trace = fpsbs_trace(surf, cfg, seed=k)
        elapsed += time.perf_counter() - t0
        n_centers += len(trace.centers)
        problems += [f"{nx}x{ny}: {p}" for p in _check_fps_trace(surf, trace)]
    ok = not problems and elapsed < 30
    record_criterion(4, ok, f"{len(sizes)} grids up to 50x50, {n_centers} centers checked, "
                            f"sampling time={elapsed:.2f}s" + (f" problems={problems[:3]}" if problems else ""))
    assert ok


def _disk(rng, n, radius=0.999):
    r = radius * np.sqrt(rng.random(n))
    th = 2 * np.pi * rng.random(n)
    return np.column_stack([r * np.cos(th), r * np.sin(th)])


def test_criterion_5_geometry():
    rng = np.random.default_rng(5)
    a, b, c = (_disk(rng, 10_000) for _ in range(3))
    dab, dba = klein_distance(a, b), klein_distance(b, a)
    tri = float(np.max(dab - klein_distance(a, c) - klein_distance(c, b)))
    sym = float(np.max(np.abs(dab - dba)))
    neg = float(-np.min(dab))
    ident = float(np.max(np.abs(klein_distance(a, a))))
    oracle = float(np.max(np.abs(dab - poincare_distance(klein_to_poincare(a), klein_to_poincare(b)))))
    metric_ok = tri <= 1e-9 and sym <= 1e-9 and neg <= 1e-9 and ident == 0.0 and oracle <= 1e-9

    jac_err = 0.0
    for _ in range(1000):
        v = rng.uniform(-1, 1, (3, 2))
        if abs(np.linalg.det(np.column_stack([v[2] - v[0], v[1] - v[0]]))) < 1e-2:
            continue
        s = rng.uniform(0.2, 3.0)
        A, B = rng.normal(size=(2, 2, 2)) + 2 * np.eye(2)
        if np.linalg.det(A) <= 0.05 or np.linalg.det(B) <= 0.05:
            continue
        w = v @ A.T + rng.normal(size=2)
        u = w @ B.T + rng.normal(size=2)
        J_id = derivative_map(v, v)
        J_s = derivative_map(v, v[0] + s * (v - v[0]))
        J_vw, J_wu, J_vu = derivative_map(v, w), derivative_map(w, u), derivative_map(v, u)
        jac_err = max(jac_err,
                      np.abs(J_id.as_array() - np.eye(2)).max(), abs(tbm_value(J_id) - 1.0),
                      np.abs(J_s.as_array() - s * np.eye(2)).max(), abs(tbm_value(J_s) - s),
                      np.abs((J_wu @ J_vw).as_array() - J_vu.as_array()).max(),
                      abs(tbm_value(J_vu) - tbm_value(J_wu) * tbm_value(J_vw)))
    ok = metric_ok and jac_err <= 1e-10
    record_criterion(5, ok, f"10^4 triples: triangle excess={tri:.2g} asym={sym:.2g} "
                            f"Poincare gap={oracle:.2g}; Jacobian max err={jac_err:.2g}")
    assert ok


@pytest.fixture(scope="module")
def cli_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    control = root / "control.json"
    control.write_text(json.dumps({"schema_version": 1, "experiment": "control",
                                   "synth": {"effect_size": 0.0}}))
    out = {}
    for name, args in (("first", []), ("second", []), ("control", ["--config", str(control)])):
        t0 = time.perf_counter()
        code = main(["run", "--out", str(root / name), "--seed", "0", *args])
        out[name] = (root / name, code, time.perf_counter() - t0)
    return out


def _metrics(run_dir):
    return json.loads((run_dir / "classify" / "metrics.json").read_text())


def test_criterion_6_synthetic_end_to_end(cli_runs):
    run, code, elapsed = cli_runs["first"]
    ctl, ctl_code, _ = cli_runs["control"]
    auc = _metrics(run)["auc"] if code == 0 else float("nan")
    ctl_auc = _metrics(ctl)["auc"] if ctl_code == 0 else float("nan")
    ok = code == 0 and ctl_code == 0 and auc >= 0.90 and 0.35 <= ctl_auc <= 0.65 and elapsed < 300
    record_criterion(6, ok, f"AUC={auc:.4f} control AUC={ctl_auc:.4f} pipeline time={elapsed:.1f}s")
    assert ok


def test_criterion_7_metric_formulas():
    pct = EvalReport.from_confusion(tp=10, fn=3, tn=13, fp=3).as_percentages()
    target = {"ACC": "85.19%", "SEN": "76.92%", "SPE": "81.25%"}
    mismatched = {k: (pct[k], v) for k, v in target.items() if pct[k] != v}
    ok = not mismatched
    record_criterion(7, ok, "ACC/SEN/SPE = " + "/".join(pct[k] for k in target)
                            + (f"; mismatches (got, expected): {mismatched}" if mismatched else ""))
    assert ok, f"confusion (10,3,13,3) does not give the expected row: {mismatched}"


def test_criterion_8_determinism(cli_runs):
    (a, ca, _), (b, cb, _) = cli_runs["first"], cli_runs["second"]
    same = ca == cb == 0 and (a / "report/report.csv").read_bytes() == (b / "report/report.csv").read_bytes()
    record_criterion(8, same, "two full runs, report.csv byte-identical" if same else "report.csv differs")
    assert same
