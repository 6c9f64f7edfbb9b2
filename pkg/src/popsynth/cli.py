"""Config-driven experiment runner.

Every subcommand reads one JSON experiment config (or the built-in desk
defaults) and writes into its output directory:

    data/        population, schema, sample and their manifests
    embedder/    the self-supervised embedder (embedded-space cells)
    models/      one directory per grid cell: artifact, history, manifest
    generated/   generated populations as CSV
    reports/     evaluation table, per-model JSON reports, plot data
    sweep/       sensitivity sweep table and its per-point models
    curves/      coverage and recall-vs-size tables

Environment overrides (applied after the config file, before flags):
    POPSYNTH_OUTPUT_DIR   output directory
    POPSYNTH_WORKERS      number of grid cells run in parallel
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import os
import sys
import tempfile
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import bn_learn, bn_sample, reweight_generate
from .embedder import Embedder, EmbedderSpec, train_embedder
from .evaluate import (
    TABLE_COLUMNS,
    EvalReport,
    distance_histograms,
    evaluate_generated,
    recall_curve,
)
from .models import TrainConfig, TrainingDiverged, generate, load_artifact, train, write_history_csv
from .population import coverage_curve, draw_sample, load_population_spec, synth_population
from .presets import (
    DESK_SAMPLE_RATE,
    DESK_SAMPLE_SEED,
    DESK_SEED,
    DESK_SIZE,
    desk_population_spec,
)
from .schema import AttributeSchema, build_index, load_schema, read_records_csv, write_records_csv

log = logging.getLogger("popsynth")

ENV_OUTPUT_DIR = "POPSYNTH_OUTPUT_DIR"
ENV_WORKERS = "POPSYNTH_WORKERS"
SWEEP_GROUP = "sweep/models"

# Regularizer weights per model and space, tuned on the desk preset with
# 200-epoch runs; artifact defaults, not tuned for any other data.
CALIBRATED_GAMMA = {
    "wgan": {"discrete": {"gamma_bd": 1.5, "gamma_ad": 0.3}, "embedded": {"gamma_bd": 1.0, "gamma_ad": 0.3}},
    "vae": {"discrete": {"gamma_bd": 1.0, "gamma_ad": 0.1}, "embedded": {"gamma_bd": 1.0, "gamma_ad": 0.1}},
}
REGULARIZATIONS = {
    "vanilla": (False, False),
    "R_BD": (True, False),
    "R_AD": (False, True),
    "R_BD&R_AD": (True, True),
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------

def default_grid(seeds=(0,)) -> list[dict]:
    """Table-style grid: vanilla once per model, each regularizer in both spaces."""
    cells = []
    for model in ("vae", "wgan"):
        for seed in seeds:
            cells.append({"model": model, "space": "discrete", "gamma_bd": 0.0, "gamma_ad": 0.0, "seed": seed})
            for space in ("discrete", "embedded"):
                for reg, (bd, ad) in REGULARIZATIONS.items():
                    if reg == "vanilla":
                        continue
                    cells.append({
                        "model": model, "space": space, "seed": seed,
                        "gamma_bd": CALIBRATED_GAMMA[model][space]["gamma_bd"] if bd else 0.0,
                        "gamma_ad": CALIBRATED_GAMMA[model][space]["gamma_ad"] if ad else 0.0,
                    })
    return cells


def _default_sweep() -> dict:
    return {
        "model": "wgan", "space": "discrete", "param": "gamma_bd",
        "values": [0.0, 0.5, 1.0, 1.5, 2.0], "seeds": [0],
    }


@dataclass
class ExperimentConfig:
    """One experiment: data, grid, sweep and curve settings.

    ``population`` takes either ``{"preset": "desk"}``, ``{"spec": path}``
    (a population-spec JSON) or ``{"csv": path, "schema": path}`` (an
    existing dataset used as the ground-truth population).
    """

    output_dir: str = "runs/desk"
    population: dict = field(default_factory=lambda: {"preset": "desk", "size": DESK_SIZE, "seed": DESK_SEED})
    sample: dict = field(default_factory=lambda: {"rate": DESK_SAMPLE_RATE, "seed": DESK_SAMPLE_SEED})
    train: dict = field(default_factory=dict)
    embedder: dict = field(default_factory=dict)
    grid: list = field(default_factory=default_grid)
    baselines: list = field(default_factory=lambda: ["reweight", "bn"])
    bn: dict = field(default_factory=lambda: {"max_parents": 3, "max_iters": 1000})
    generation: dict = field(default_factory=lambda: {
        "size": None, "seed": 123, "recall_sizes": [1000, 5000, 10000, 50000, 100000], "bins": 20,
    })
    sweep: dict = field(default_factory=_default_sweep)
    coverage_rates: list = field(default_factory=lambda: [0.01, 0.02, 0.05, 0.1, 0.5, 1.0])
    workers: int = 1

    def __post_init__(self):
        pop = self.population
        sources = [k for k in ("preset", "spec", "csv") if pop.get(k)]
        if len(sources) != 1:
            raise ConfigError("population needs exactly one of 'preset', 'spec' or 'csv'")
        if pop.get("preset") and pop["preset"] != "desk":
            raise ConfigError(f"unknown preset {pop['preset']!r}")
        if pop.get("csv") and not pop.get("schema"):
            raise ConfigError("a population csv needs a 'schema' path")
        if not self.grid:
            raise ConfigError("model grid is empty")
        for cell in self.grid:
            _validate_cell(cell)
        if not self.sweep.get("values") or not self.sweep.get("seeds"):
            raise ConfigError("sweep grid is empty")
        if self.sweep.get("param") not in ("gamma_bd", "gamma_ad"):
            raise ConfigError("sweep param must be gamma_bd or gamma_ad")
        unknown = set(self.baselines) - {"reweight", "bn"}
        if unknown:
            raise ConfigError(f"unknown baselines {sorted(unknown)}")
        if int(self.workers) < 1:
            raise ConfigError("workers must be at least 1")
        TrainConfig.from_dict(self.train)
        EmbedderSpec(**self.embedder)

    def check_paths(self, base: Path) -> None:
        for key in ("spec", "csv", "schema"):
            p = self.population.get(key)
            if p and not (base / p).exists():
                raise ConfigError(f"population {key} not found: {p}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def _validate_cell(cell: dict) -> None:
    allowed = {"model", "space", "gamma_bd", "gamma_ad", "seed", "train"}
    if set(cell) - allowed:
        raise ConfigError(f"unknown grid cell keys: {sorted(set(cell) - allowed)}")
    if cell.get("model") not in ("wgan", "vae"):
        raise ConfigError(f"grid cell model must be wgan or vae: {cell}")
    if cell.get("space", "discrete") not in ("discrete", "embedded"):
        raise ConfigError(f"grid cell space must be discrete or embedded: {cell}")


def regularization_label(cell: dict) -> str:
    bd, ad = bool(cell.get("gamma_bd")), bool(cell.get("gamma_ad"))
    return {v: k for k, v in REGULARIZATIONS.items()}[(bd, ad)]


def cell_id(cell: dict) -> str:
    reg = regularization_label(cell)
    parts = [cell["model"], cell.get("space", "discrete") if reg != "vanilla" else "discrete", reg.replace("&", "+")]
    if cell.get("gamma_bd"):
        parts.append(f"bd{cell['gamma_bd']:g}")
    if cell.get("gamma_ad"):
        parts.append(f"ad{cell['gamma_ad']:g}")
    parts.append(f"s{cell.get('seed', 0)}")
    return "-".join(parts)


def cell_train_config(cfg: ExperimentConfig, cell: dict) -> TrainConfig:
    d = dict(cfg.train)
    d.update(cell.get("train", {}))
    d.update({
        "space": cell.get("space", "discrete"),
        "gamma_bd": float(cell.get("gamma_bd", 0.0)),
        "gamma_ad": float(cell.get("gamma_ad", 0.0)),
        "seed": int(cell.get("seed", 0)),
    })
    return TrainConfig.from_dict(d)


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(path: str | None, overrides: list[str], output_dir: str | None, workers: int | None) -> ExperimentConfig:
    d = ExperimentConfig().to_dict()
    base = Path.cwd()
    if path:
        p = Path(path)
        d.update(json.loads(p.read_text(encoding="utf-8")))
        base = p.resolve().parent
        for key in ("spec", "csv", "schema"):
            if d["population"].get(key) and not Path(d["population"][key]).is_absolute():
                d["population"][key] = str(base / d["population"][key])
    if os.environ.get(ENV_OUTPUT_DIR):
        d["output_dir"] = os.environ[ENV_OUTPUT_DIR]
    if os.environ.get(ENV_WORKERS):
        d["workers"] = int(os.environ[ENV_WORKERS])
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override must look like KEY=VALUE: {item!r}")
        if key not in d:
            raise ConfigError(f"unknown config key {key!r}")
        d[key] = _parse_value(value)
    if output_dir is not None:
        d["output_dir"] = output_dir
    if workers is not None:
        d["workers"] = workers
    cfg = ExperimentConfig.from_dict(d)
    cfg.check_paths(base)
    return cfg


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

@contextlib.contextmanager
def atomic_path(path: Path):
    """Yield a temporary sibling path that replaces ``path`` on success."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        yield Path(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def write_json(path: Path, obj) -> None:
    with atomic_path(path) as tmp:
        tmp.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_csv(path: Path, header: list[str], rows) -> None:
    with atomic_path(path) as tmp, open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else ("" if v is None else v) for v in row])


def _manifest(command: str, cfg: ExperimentConfig, **extra) -> dict:
    # "created" is the only field allowed to differ between identical reruns
    return {"command": command, "version": __version__, "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "config": cfg.to_dict(), **extra}


@dataclass
class Layout:
    root: Path

    def __post_init__(self):
        self.root = Path(self.root)

    data = property(lambda self: self.root / "data")
    population_csv = property(lambda self: self.data / "population.csv")
    schema_json = property(lambda self: self.data / "schema.json")
    sample_csv = property(lambda self: self.data / "sample.csv")
    embedder_json = property(lambda self: self.root / "embedder" / "embedder.json")
    reports = property(lambda self: self.root / "reports")

    def model_dir(self, cid: str, group: str = "models") -> Path:
        return self.root / group / cid


def _need(path: Path, what: str) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"{what} not found at {path}; run the earlier pipeline step first")
    return path


def _load_population(layout: Layout):
    schema = load_schema(_need(layout.schema_json, "schema"))
    return schema, read_records_csv(_need(layout.population_csv, "population"), schema)


def _load_sample(layout: Layout, schema: AttributeSchema):
    return read_records_csv(_need(layout.sample_csv, "sample"), schema)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_synth_data(cfg: ExperimentConfig) -> dict:
    layout = Layout(cfg.output_dir)
    pop_cfg = cfg.population
    rules: list = []
    if pop_cfg.get("csv"):
        schema = load_schema(pop_cfg["schema"])
        records = read_records_csv(pop_cfg["csv"], schema)
        source = {"csv": pop_cfg["csv"]}
    else:
        if pop_cfg.get("spec"):
            spec = load_population_spec(pop_cfg["spec"])
        else:
            spec = desk_population_spec(size=int(pop_cfg.get("size") or DESK_SIZE),
                                        seed=int(pop_cfg.get("seed", DESK_SEED)))
        for key in ("size", "seed"):
            if pop_cfg.get(key) is not None:
                setattr(spec, key, int(pop_cfg[key]))
        schema = spec.schema
        records = synth_population(spec)
        rules = spec.to_dict()["forbidden"]
        source = {"spec": spec.to_dict()}
        write_json(layout.data / "population_spec.json", spec.to_dict())
    write_json(layout.schema_json, schema.to_dict())
    with atomic_path(layout.population_csv) as tmp:
        write_records_csv(tmp, records, schema)
    index = build_index(records, schema)
    summary = {"rows": int(records.shape[0]), "unique_combinations": len(index),
               "seed": pop_cfg.get("seed"), "forbidden_rules": rules}
    write_json(layout.data / "population_manifest.json", _manifest("synth-data", cfg, source=source, **summary))
    return summary


def cmd_split(cfg: ExperimentConfig) -> dict:
    layout = Layout(cfg.output_dir)
    schema, population = _load_population(layout)
    rate, seed = float(cfg.sample["rate"]), int(cfg.sample["seed"])
    sample = draw_sample(population, rate, seed)
    with atomic_path(layout.sample_csv) as tmp:
        write_records_csv(tmp, sample, schema)
    cov = coverage_curve(population, [rate], seed, schema)[0]
    summary = {"rows": int(sample.shape[0]), "rate": rate, "seed": seed, "coverage": cov}
    write_json(layout.data / "sample_manifest.json", _manifest("split", cfg, **summary))
    return summary


def _train_embedder(cfg: ExperimentConfig, layout: Layout) -> Embedder:
    schema = load_schema(_need(layout.schema_json, "schema"))
    sample = _load_sample(layout, schema)
    emb = train_embedder(sample, schema, EmbedderSpec(**cfg.embedder))
    write_json(layout.embedder_json, emb.to_dict())
    return emb


def cmd_train_embedder(cfg: ExperimentConfig) -> dict:
    emb = _train_embedder(cfg, Layout(cfg.output_dir))
    return {"heldout_accuracy": emb.heldout_accuracy, "epochs": len(emb.history)}


def _get_embedder(cfg: ExperimentConfig, layout: Layout) -> Embedder:
    if layout.embedder_json.exists():
        return Embedder.from_dict(json.loads(layout.embedder_json.read_text(encoding="utf-8")))
    return _train_embedder(cfg, layout)


def _train_cell(cfg: ExperimentConfig, cell: dict, group: str = "models") -> dict:
    """Train one grid cell and write its artifact; failures are reported, not raised."""
    layout = Layout(cfg.output_dir)
    cid = cell_id(cell)
    out = layout.model_dir(cid, group)
    schema = load_schema(layout.schema_json)
    sample = _load_sample(layout, schema)
    tcfg = cell_train_config(cfg, cell)
    embedder = _get_embedder(cfg, layout) if tcfg.space == "embedded" else None
    started = time.time()
    try:
        art = train(cell["model"], sample, schema, tcfg, embedder)
    except (TrainingDiverged, FloatingPointError) as exc:
        history = getattr(exc, "history", [])
        if history:
            with atomic_path(out / "history.csv") as tmp:
                write_history_csv(tmp, history)
        status = {"cell": cid, "status": "diverged", "error": str(exc)}
        write_json(out / "manifest.json", _manifest("train", cfg, grid_cell=cell, **status))
        return status
    if embedder is not None:
        art.embedder_ref = os.path.relpath(layout.embedder_json, out)
    with atomic_path(out / "artifact.json") as tmp:
        art.save(tmp, inline_embedder=False)
    with atomic_path(out / "history.csv") as tmp:
        write_history_csv(tmp, art.history)
    status = {"cell": cid, "status": "ok", "epochs": len(art.history), "seconds": round(time.time() - started, 1)}
    write_json(out / "manifest.json", _manifest("train", cfg, grid_cell=cell, **{k: v for k, v in status.items() if k != "seconds"}))
    return status


def _run_cells(cfg: ExperimentConfig, fn, cells: list) -> list:
    if int(cfg.workers) <= 1 or len(cells) <= 1:
        return [fn(cfg, c) for c in cells]
    with ProcessPoolExecutor(max_workers=int(cfg.workers)) as pool:
        return list(pool.map(fn, [cfg] * len(cells), cells))


def _select(cfg: ExperimentConfig, cell: str | None) -> list[dict]:
    if cell is None:
        return list(cfg.grid)
    chosen = [c for c in cfg.grid if cell_id(c) == cell]
    if not chosen:
        raise ConfigError(f"no grid cell {cell!r}; known: {[cell_id(c) for c in cfg.grid]}")
    return chosen


def cmd_train(cfg: ExperimentConfig, cell: str | None = None) -> dict:
    layout = Layout(cfg.output_dir)
    _need(layout.sample_csv, "sample")
    cells = _select(cfg, cell)
    if any(c.get("space") == "embedded" for c in cells) and not layout.embedder_json.exists():
        _train_embedder(cfg, layout)
    return {"cells": _run_cells(cfg, _train_cell, cells)}


def _generation_size(cfg: ExperimentConfig, population) -> int:
    return int(cfg.generation.get("size") or population.shape[0])


def cmd_generate(cfg: ExperimentConfig, cell: str | None = None, n: int | None = None) -> dict:
    layout = Layout(cfg.output_dir)
    schema, population = _load_population(layout)
    n = n or _generation_size(cfg, population)
    seed = int(cfg.generation["seed"])
    written = []
    for c in _select(cfg, cell):
        cid = cell_id(c)
        art = load_artifact(_need(layout.model_dir(cid) / "artifact.json", f"artifact {cid}"))
        path = layout.root / "generated" / f"{cid}.csv"
        with atomic_path(path) as tmp:
            write_records_csv(tmp, generate(art, n, seed), schema)
        written.append(str(path))
    return {"files": written, "rows": n, "seed": seed}


def _histogram_rows(label: str, hist: dict) -> list[list]:
    rows = []
    edges = hist["edges"]
    for cls, info in hist["classes"].items():
        for i, count in enumerate(info["histogram"]):
            rows.append([label, hist["space"], cls, edges[i], edges[i + 1], count])
    return rows


def cmd_evaluate(cfg: ExperimentConfig, cell: str | None = None) -> dict:
    layout = Layout(cfg.output_dir)
    schema, population = _load_population(layout)
    sample = _load_sample(layout, schema)
    pop_index, smp_index = build_index(population, schema), build_index(sample, schema)
    n = _generation_size(cfg, population)
    seed = int(cfg.generation["seed"])
    bins = int(cfg.generation.get("bins", 20))
    sizes = [s for s in cfg.generation.get("recall_sizes", []) if s <= n]
    embedder = Embedder.from_dict(json.loads(layout.embedder_json.read_text())) if layout.embedder_json.exists() else None

    reports: list[EvalReport] = []
    fig6, fig11, failures = [], [], []

    def record(label: str, generated, **kw):
        rep = evaluate_generated(generated, pop_index, smp_index, schema, metadata={"id": label, "generation_seed": seed}, **kw)
        spaces = ["discrete"] + (["embedded"] if embedder is not None else [])
        for space in spaces:
            hist = distance_histograms(generated, sample, pop_index, schema, space, bins, embedder)
            fig6.extend(_histogram_rows(label, hist))
            rep.metadata[f"mean_boundary_distance_{space}"] = {k: v["mean"] for k, v in hist["classes"].items()}
        fig11.extend([label, p["size"], p["recall"]] for p in recall_curve(generated, pop_index, sizes, schema))
        write_json(layout.reports / f"{label}.json", rep.to_dict())
        reports.append(rep)

    if cell is None:
        if "reweight" in cfg.baselines:
            record("re-weighting", reweight_generate(sample, n, seed), model="re-weighting")
        if "bn" in cfg.baselines:
            net = bn_learn(sample, schema, int(cfg.bn.get("max_parents", 3)), int(cfg.bn.get("max_iters", 1000)))
            net.save(layout.reports / "bn_net.json")
            record("bn", bn_sample(net, n, seed), model="bn")
    for c in _select(cfg, cell):
        cid = cell_id(c)
        path = layout.model_dir(cid) / "artifact.json"
        if not path.exists():
            failures.append({"cell": cid, "error": "missing artifact"})
            continue
        art = load_artifact(path)
        reg = regularization_label(c)
        record(cid, generate(art, n, seed), model=c["model"].upper(),
               space="-" if reg == "vanilla" else c.get("space", "discrete"), regularization=reg)

    write_csv(layout.reports / "table.csv", ["id", *TABLE_COLUMNS],
              ([r.metadata["id"], *r.table_row()] for r in reports))
    write_csv(layout.reports / "boundary_distance_histograms.csv",
              ["id", "space", "class", "bin_left", "bin_right", "count"], fig6)
    write_csv(layout.reports / "recall_vs_size.csv", ["id", "size", "recall"], fig11)
    write_json(layout.reports / "manifest.json", _manifest("evaluate", cfg, rows=len(reports), failures=failures))
    if failures and not reports:
        raise FileNotFoundError(f"no artifacts to evaluate: {failures}")
    return {"rows": len(reports), "failures": failures}


def _sweep_cell(cfg: ExperimentConfig, cell: dict) -> dict:
    """Train and evaluate one sweep point in a private directory."""
    layout = Layout(cfg.output_dir)
    status = _train_cell(cfg, cell, SWEEP_GROUP)
    row = {"value": cell[cfg.sweep["param"]], "seed": cell["seed"], "status": status["status"]}
    if status["status"] != "ok":
        return row
    schema, population = _load_population(layout)
    sample = _load_sample(layout, schema)
    art = load_artifact(layout.model_dir(status["cell"], SWEEP_GROUP) / "artifact.json")
    gen = generate(art, _generation_size(cfg, population), int(cfg.generation["seed"]))
    rep = evaluate_generated(gen, population, sample, schema)
    row.update(precision=rep.precision, recall=rep.recall, f1=rep.f1,
               marg_srmse=rep.marg_srmse, bivar_srmse=rep.bivar_srmse)
    return row


def cmd_sweep(cfg: ExperimentConfig) -> dict:
    layout = Layout(cfg.output_dir)
    _need(layout.sample_csv, "sample")
    sw = cfg.sweep
    cells = []
    for value in sw["values"]:
        for seed in sw["seeds"]:
            cell = {"model": sw["model"], "space": sw.get("space", "discrete"), "gamma_bd": 0.0, "gamma_ad": 0.0,
                    "seed": int(seed), "train": sw.get("train", {})}
            cell.update(sw.get("fixed", {}))
            cell[sw["param"]] = float(value)
            cells.append(cell)
    if any(c["space"] == "embedded" for c in cells) and not layout.embedder_json.exists():
        _train_embedder(cfg, layout)
    rows = _run_cells(cfg, _sweep_cell, cells)
    header = ["model", "space", "param", "value", "seed", "status", "precision", "recall", "f1", "marg_srmse", "bivar_srmse"]
    write_csv(layout.root / "sweep" / "sweep.csv", header,
              ([sw["model"], sw.get("space", "discrete"), sw["param"]] + [r.get(k) for k in header[3:]] for r in rows))
    write_json(layout.root / "sweep" / "manifest.json",
               _manifest("sweep", cfg, points=len(rows), grid_is_artifact_default=cfg.sweep == _default_sweep()))
    return {"points": len(rows), "diverged": sum(r["status"] != "ok" for r in rows)}


def cmd_curves(cfg: ExperimentConfig) -> dict:
    layout = Layout(cfg.output_dir)
    schema, population = _load_population(layout)
    seed = int(cfg.sample["seed"])
    cov = coverage_curve(population, cfg.coverage_rates, seed, schema)
    write_csv(layout.root / "curves" / "coverage.csv",
              ["rate", "n_sample", "combination_coverage", "instance_coverage"],
              ([c["rate"], c["n_sample"], c["combination_coverage"], c["instance_coverage"]] for c in cov))
    pop_index = build_index(population, schema)
    sizes = sorted(int(s) for s in cfg.generation.get("recall_sizes", []))
    rows = []
    for c in cfg.grid:
        path = layout.model_dir(cell_id(c)) / "artifact.json"
        if path.exists() and sizes:
            art = load_artifact(path)
            gen = generate(art, sizes[-1], int(cfg.generation["seed"]))
            rows.extend([cell_id(c), p["size"], p["recall"]] for p in recall_curve(gen, pop_index, sizes, schema))
    write_csv(layout.root / "curves" / "recall_vs_size.csv", ["id", "size", "recall"], rows)
    return {"coverage_points": len(cov), "recall_rows": len(rows)}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="popsynth",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config JSON (default: built-in desk preset)")
    common.add_argument("--output-dir", help=f"output directory (overrides config and ${ENV_OUTPUT_DIR})")
    common.add_argument("--workers", type=int, help=f"parallel grid cells (overrides config and ${ENV_WORKERS})")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a top-level config key; VALUE is parsed as JSON when possible")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("synth-data", parents=[common], help="build the ground-truth population")
    sub.add_parser("split", parents=[common], help="draw the training sample")
    sub.add_parser("train-embedder", parents=[common], help="train the self-supervised embedder")
    p = sub.add_parser("train", parents=[common], help="train grid cells")
    p.add_argument("--cell", help="train only this cell id")
    p = sub.add_parser("generate", parents=[common], help="write generated populations")
    p.add_argument("--cell", help="generate only for this cell id")
    p.add_argument("-n", type=int, help="rows to generate (default: population size)")
    p = sub.add_parser("evaluate", parents=[common], help="evaluation table, reports and plot data")
    p.add_argument("--cell", help="evaluate only this cell id (skips baselines)")
    sub.add_parser("sweep", parents=[common], help="regularizer-weight sensitivity sweep")
    sub.add_parser("curves", parents=[common], help="coverage and recall-vs-size tables")
    sub.add_parser("show-config", parents=[common], help="print the resolved config")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.set, args.output_dir, args.workers)
        if args.command == "show-config":
            result = cfg.to_dict()
        elif args.command == "synth-data":
            result = cmd_synth_data(cfg)
        elif args.command == "split":
            result = cmd_split(cfg)
        elif args.command == "train-embedder":
            result = cmd_train_embedder(cfg)
        elif args.command == "train":
            result = cmd_train(cfg, args.cell)
        elif args.command == "generate":
            result = cmd_generate(cfg, args.cell, args.n)
        elif args.command == "evaluate":
            result = cmd_evaluate(cfg, args.cell)
        elif args.command == "sweep":
            result = cmd_sweep(cfg)
        else:
            result = cmd_curves(cfg)
    except Exception as exc:  # reported as JSON for callers that script the CLI
        err = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        if args.verbose:
            err["traceback"] = traceback.format_exc()
        print(json.dumps(err), file=sys.stderr)
        return 1
    print(json.dumps(result, indent=2, default=_json_default))
    return 0


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


if __name__ == "__main__":
    sys.exit(main())
