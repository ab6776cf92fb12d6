"""Command-line pipeline: synth -> sample -> train -> features -> classify -> report.

Every stage reads its inputs from, and writes its outputs to, subdirectories
of ``--out`` and leaves a ``manifest.json`` next to its artifacts.

Exit codes: 0 ok, 2 config error, 3 missing or unreadable input, 4 numeric
failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .coding import ConvergenceDiag, encode_batch, load_dictionary, save_dictionary, train
from .config import RunConfig, load_config
from .errors import ConfigError, HSCError, InputError, NumericError, ParseError
from .geometry import smooth_vertex_field
from .mesh import load_surface
from .patches import fpsbs_trace, patches_for_centers, read_patch_csv, write_patch_csv
from .pipeline import cross_validate, max_pool, save_model
from .synth import generate, read_labels, write_dataset

log = logging.getLogger("hsc")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
METRIC_ROWS = ("ACC", "SEN", "SPE", "AUC")


def git_blob_hash(path) -> str:
    data = Path(path).read_bytes()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _write_text(path, text):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8", newline="\n")
    os.replace(tmp, path)


def _write_csv(path, header, rows):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    os.replace(tmp, path)


def _require(path, what) -> Path:
    path = Path(path)
    if not path.exists():
        raise InputError(f"missing {what}: {path}")
    return path


def _write_manifest(stage_dir, stage, cfg: RunConfig, inputs, outputs, started):
    stage_dir = Path(stage_dir)
    manifest = {
        "stage": stage,
        "version": __version__,
        "schema_version": 1,
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "stage_seed": cfg.stage_seed(stage) if stage in ("synth", "sample", "train", "classify") else None,
        "inputs": {str(p): git_blob_hash(p) for p in inputs},
        "outputs": sorted(str(Path(p).relative_to(stage_dir)) for p in outputs),
        "wall_time_s": round(time.perf_counter() - started, 3),
    }
    _write_text(stage_dir / "manifest.json", json.dumps(manifest, indent=1) + "\n")


def _read_subjects(path):
    with open(_require(path, "subject list"), newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise InputError(f"no subjects listed in {path}")
    return rows


def cmd_synth(cfg: RunConfig, out: Path, threads: int = 1):
    t0 = time.perf_counter()
    stage_dir = out / "synth"
    synth_cfg = replace(cfg.synth, seed=cfg.stage_seed("synth"))
    subjects = generate(synth_cfg)
    ids = write_dataset(subjects, stage_dir)
    outputs = [stage_dir / f"{sid}.hsm" for sid in ids] + [stage_dir / "labels.csv"]
    _write_manifest(stage_dir, "synth", cfg, [], outputs, t0)
    log.info("synth: %d subjects -> %s", len(ids), stage_dir)


def _data_dir(cfg: RunConfig, out: Path) -> Path:
    if cfg.data_dir is not None:
        return Path(cfg.data_dir)
    return out / "synth"


def cmd_sample(cfg: RunConfig, out: Path, threads: int = 1):
    t0 = time.perf_counter()
    data = _data_dir(cfg, out)
    labels_path = _require(data / "labels.csv", "labels.csv")
    labels = read_labels(labels_path)
    if not labels:
        raise InputError(f"{labels_path} lists no subjects")
    stage_dir = out / "patches"
    stage_dir.mkdir(parents=True, exist_ok=True)
    seed = cfg.stage_seed("sample")
    sampling = cfg.sampling
    traces = {}

    def one(item):
        sid, _ = item
        surface = load_surface(_require(data / f"{sid}.hsm", "mesh"))
        if cfg.smoothing_iterations:
            surface = surface.with_tbm(smooth_vertex_field(surface, surface.tbm, cfg.smoothing_iterations,
                                                           cfg.smoothing_step))
        return surface

    inputs = [labels_path]
    outputs = []
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        surfaces = list(pool.map(one, labels))
    for (sid, _), surface in zip(labels, surfaces):
        # registered subjects share geometry, hence the same centers
        key = hashlib.sha1(surface.params.tobytes() + surface.faces.tobytes()).hexdigest()
        if key not in traces:
            traces[key] = fpsbs_trace(surface, sampling, seed)
        patches = patches_for_centers(surface, traces[key].centers, sampling.patch_dim)
        path = stage_dir / f"{sid}.csv"
        write_patch_csv(patches, path)
        inputs.append(data / f"{sid}.hsm")
        outputs.append(path)
    _write_csv(stage_dir / "subjects.csv", ["subject_id", "label", "group_tag"],
               [(sid, label, "positive" if label == 1 else "negative") for sid, label in labels])
    outputs.append(stage_dir / "subjects.csv")
    _write_manifest(stage_dir, "sample", cfg, inputs, outputs, t0)
    log.info("sample: %d subjects, %d patches each", len(labels), len(next(iter(traces.values())).centers))


def _load_patch_sets(out: Path):
    patch_dir = out / "patches"
    subjects = _read_subjects(patch_dir / "subjects.csv")
    tables = []
    for row in subjects:
        table = read_patch_csv(_require(patch_dir / f"{row['subject_id']}.csv", "patch dump"))
        tables.append(table)
    return subjects, tables


def cmd_train(cfg: RunConfig, out: Path, threads: int = 1):
    t0 = time.perf_counter()
    subjects, tables = _load_patch_sets(out)
    X = np.vstack([t.features for t in tables])
    if X.shape[1] != cfg.sampling.patch_dim:
        raise ConfigError(f"patch dumps have m={X.shape[1]}, config expects {cfg.sampling.patch_dim}")
    scc = replace(cfg.scc, seed=cfg.stage_seed("train"))
    D, diag, _ = train(X, scc, n_atoms=cfg.n_atoms)
    stage_dir = out / "train"
    stage_dir.mkdir(parents=True, exist_ok=True)
    save_dictionary(D, stage_dir / "dictionary.json")
    diag.write_csv(stage_dir / "diagnostics.csv")
    summary = diag.summary()
    _write_text(stage_dir / "diagnostics_summary.json", json.dumps(summary, indent=1) + "\n")
    if summary["max_cd_increase"] > 1e-12 or summary["max_sgd_increase"] > 1e-12:
        raise NumericError(f"descent diagnostics violated: {summary}")
    inputs = [out / "patches" / "subjects.csv"] + [out / "patches" / f"{r['subject_id']}.csv" for r in subjects]
    _write_manifest(stage_dir, "train", cfg, inputs,
                    [stage_dir / n for n in ("dictionary.json", "diagnostics.csv", "diagnostics_summary.json")], t0)
    log.info("train: n=%d m=%d t=%d, final epoch objective %.6f", X.shape[0], X.shape[1], D.t,
             summary["epoch_end"][-1])


def cmd_features(cfg: RunConfig, out: Path, threads: int = 1):
    t0 = time.perf_counter()
    dict_path = _require(out / "train" / "dictionary.json", "dictionary")
    D = load_dictionary(dict_path)
    subjects, tables = _load_patch_sets(out)
    scc = cfg.scc

    def pooled(table):
        return max_pool(encode_batch(D, table.features, scc), D.t, cfg.pooling)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        feats = list(pool.map(pooled, tables))
    stage_dir = out / "features"
    stage_dir.mkdir(parents=True, exist_ok=True)
    path = stage_dir / "features.csv"
    _write_csv(path, ["subject_id", "label", "group_tag", *(f"f{j}" for j in range(D.t))],
               [(r["subject_id"], r["label"], r["group_tag"], *(repr(float(v)) for v in f))
                for r, f in zip(subjects, feats)])
    _write_manifest(stage_dir, "features", cfg, [dict_path, out / "patches" / "subjects.csv"], [path], t0)
    log.info("features: %d subjects x %d pooled atoms", len(feats), D.t)


def read_features(path):
    with open(_require(path, "feature table"), newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2 or rows[0][:3] != ["subject_id", "label", "group_tag"]:
        raise ParseError(f"{path}: not a feature table", line=1)
    ids = [r[0] for r in rows[1:]]
    y = np.array([int(r[1]) for r in rows[1:]])
    X = np.array([[float(v) for v in r[3:]] for r in rows[1:]])
    return ids, X, y


def cmd_classify(cfg: RunConfig, out: Path, threads: int = 1):
    t0 = time.perf_counter()
    feat_path = out / "features" / "features.csv"
    ids, X, y = read_features(feat_path)
    res = cross_validate(X, y, cfg.cv_protocol, cfg.cv_folds, cfg.classifier_rounds,
                         list(cfg.rounds_grid), seed=cfg.stage_seed("classify"))
    stage_dir = out / "classify"
    stage_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for k, model in enumerate(res.models):
        p = stage_dir / f"model_{k}.json"
        save_model(model, p)
        outputs.append(p)
    rep = res.report
    metrics = {
        "experiment": cfg.experiment,
        "protocol": cfg.cv_protocol,
        "classifier_rounds": res.selected_rounds,
        "acc": rep.acc, "sen": rep.sen, "spe": rep.spe, "auc": rep.auc,
        "confusion": {"tp": rep.tp, "fn": rep.fn, "tn": rep.tn, "fp": rep.fp},
        "folds": [{"acc": f.acc, "sen": f.sen, "spe": f.spe, "auc": f.auc} for f in res.fold_reports],
    }
    _write_text(stage_dir / "metrics.json", json.dumps(metrics, indent=1) + "\n")
    pct = rep.as_percentages()
    _write_csv(stage_dir / "metrics_row.csv", ["experiment", *METRIC_ROWS],
               [(cfg.experiment, *(pct[k] for k in METRIC_ROWS))])
    _write_csv(stage_dir / "predictions.csv", ["subject_id", "label", "margin"],
               [(sid, int(lbl), "" if np.isnan(m) else repr(float(m))) for sid, lbl, m in zip(ids, y, res.margins)])
    outputs += [stage_dir / n for n in ("metrics.json", "metrics_row.csv", "predictions.csv")]
    _write_manifest(stage_dir, "classify", cfg, [feat_path], outputs, t0)
    log.info("classify: ACC %s SEN %s SPE %s AUC %s", *(pct[k] for k in METRIC_ROWS))


def cmd_report(cfg: RunConfig, out: Path, threads: int = 1, extra_metrics=()):
    t0 = time.perf_counter()
    paths = [_require(out / "classify" / "metrics.json", "metrics")] + [_require(p, "metrics") for p in extra_metrics]
    columns = []
    for p in paths:
        try:
            m = json.loads(Path(p).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{p}: {exc}") from exc
        columns.append((m["experiment"], {
            "ACC": f"{100 * m['acc']:.2f}%", "SEN": f"{100 * m['sen']:.2f}%",
            "SPE": f"{100 * m['spe']:.2f}%", "AUC": f"{m['auc']:.4f}"}))
    stage_dir = out / "report"
    stage_dir.mkdir(parents=True, exist_ok=True)
    path = stage_dir / "report.csv"
    _write_csv(path, ["metric", *(name for name, _ in columns)],
               [(row, *(vals[row] for _, vals in columns)) for row in METRIC_ROWS])
    _write_manifest(stage_dir, "report", cfg, paths, [path], t0)
    log.info("report -> %s", path)


COMMANDS = {
    "synth": cmd_synth,
    "sample": cmd_sample,
    "train": cmd_train,
    "features": cmd_features,
    "classify": cmd_classify,
    "report": cmd_report,
}


def cmd_run(cfg, out, threads=1):
    stages = list(COMMANDS)
    if cfg.data_dir is not None:
        stages.remove("synth")
    for name in stages:
        COMMANDS[name](cfg, out, threads)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hsc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in [*COMMANDS, "run"]:
        p = sub.add_parser(name, help="all stages in order" if name == "run" else f"{name} stage")
        p.add_argument("--config", help="JSON run config (defaults to the built-in synthetic config)")
        p.add_argument("--seed", type=int, help="root seed, overrides the config")
        p.add_argument("--out", required=True, help="run directory")
        p.add_argument("--threads", type=int, default=1)
        if name == "report":
            p.add_argument("--metrics", nargs="*", default=[], help="extra metrics.json files to tabulate")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        cfg = cfg.with_seed(args.seed)
        if cfg.data_dir is not None and not Path(cfg.data_dir).is_dir():
            raise ConfigError(f"data_dir does not exist: {cfg.data_dir}")
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "run":
            cmd_run(cfg, out, args.threads)
        elif args.command == "report":
            cmd_report(cfg, out, args.threads, args.metrics)
        else:
            COMMANDS[args.command](cfg, out, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputError, ParseError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericError, HSCError, FloatingPointError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
