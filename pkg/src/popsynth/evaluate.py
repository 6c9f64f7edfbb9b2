"""Evaluation of generated populations against a known population.

Precision and recall work at combination granularity and are instance
weighted: precision is the share of generated rows whose combination occurs
in the population, recall the share of population rows whose combination
occurs in the generated data.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from . import geometry
from .schema import AttributeSchema, CombinationIndex, as_records, build_index, combination_keys, encode

TABLE_COLUMNS = [
    "model", "space", "regularization", "marg_srmse", "bivar_srmse",
    "n_combinations", "recall", "precision", "f1",
]

GENERAL_SAMPLE, SAMPLING_ZERO, STRUCTURAL_ZERO = 0, 1, 2
ZERO_CLASSES = ("general_sample", "sampling_zero", "structural_zero")


def _as_index(data, schema: AttributeSchema) -> CombinationIndex:
    return data if isinstance(data, CombinationIndex) else build_index(data, schema)


# ---------------------------------------------------------------------------
# distributional similarity
# ---------------------------------------------------------------------------

def marginal_vector(index: CombinationIndex) -> np.ndarray:
    """Concatenated single-attribute distributions (length W, sums to K)."""
    s = index.schema
    recs, w = index.records(), index.counts / index.total
    return np.concatenate([np.bincount(recs[:, k], weights=w, minlength=s.sizes[k]) for k in range(s.K)])


def bivariate_vector(index: CombinationIndex) -> np.ndarray:
    """Concatenated joint distributions of every attribute pair k < k'."""
    s = index.schema
    recs, w = index.records(), index.counts / index.total
    parts = []
    for a, b in combinations(range(s.K), 2):
        cell = recs[:, a] * s.sizes[b] + recs[:, b]
        parts.append(np.bincount(cell, weights=w, minlength=s.sizes[a] * s.sizes[b]))
    return np.concatenate(parts)


def srmse(reference, generated, schema: AttributeSchema | None = None, order: str = "marginal") -> float:
    """RMSE between reference and generated cell probabilities over the reference mean cell."""
    if schema is None:
        schema = reference.schema
    ref, gen = _as_index(reference, schema), _as_index(generated, schema)
    if ref.schema != gen.schema:
        raise ValueError("reference and generated data use different schemas")
    if ref.total == 0 or gen.total == 0:
        raise ValueError("SRMSE needs non-empty data")
    if order == "marginal":
        pi, pi_hat = marginal_vector(ref), marginal_vector(gen)
    elif order == "bivariate":
        if schema.K < 2:
            raise ValueError("bivariate SRMSE needs at least 2 attributes")
        pi, pi_hat = bivariate_vector(ref), bivariate_vector(gen)
    else:
        raise ValueError(f"unknown order {order!r}")
    return float(np.sqrt(np.mean((pi - pi_hat) ** 2)) / np.mean(pi))


# ---------------------------------------------------------------------------
# feasibility and diversity
# ---------------------------------------------------------------------------

def precision(generated, population, schema: AttributeSchema | None = None) -> float:
    schema = schema or population.schema
    gen, pop = _as_index(generated, schema), _as_index(population, schema)
    if gen.total == 0:
        raise ValueError("precision needs generated data")
    return float(gen.counts[pop.contains(gen.keys)].sum() / gen.total)


def recall(population, generated, schema: AttributeSchema | None = None) -> float:
    schema = schema or population.schema
    pop, gen = _as_index(population, schema), _as_index(generated, schema)
    if pop.total == 0:
        raise ValueError("recall needs population data")
    return float(pop.counts[gen.contains(pop.keys)].sum() / pop.total)


def f1(p: float, r: float) -> float:
    if not (0.0 <= p <= 1.0 and 0.0 <= r <= 1.0):
        raise ValueError("precision and recall must lie in [0, 1]")
    if p + r == 0:
        return 0.0
    return 2.0 * p * r / (p + r)


@dataclass
class ZeroClassification:
    labels: np.ndarray
    general_sample: float
    sampling_zero: float
    structural_zero: float
    missing_sample: float

    def rates(self) -> dict[str, float]:
        return {
            "general_sample": self.general_sample,
            "sampling_zero": self.sampling_zero,
            "structural_zero": self.structural_zero,
            "missing_sample": self.missing_sample,
        }


def classify_zeros(generated, sample, population, schema: AttributeSchema | None = None) -> ZeroClassification:
    """Label each generated row as general sample, sampling zero or structural zero."""
    schema = schema or population.schema
    smp, pop = _as_index(sample, schema), _as_index(population, schema)
    if not pop.contains(smp.keys).all():
        raise ValueError("sample contains combinations absent from the population")
    keys = combination_keys(generated, schema)
    if keys.size == 0:
        raise ValueError("no generated rows to classify")
    in_sample, in_pop = smp.contains(keys), pop.contains(keys)
    labels = np.full(keys.shape[0], STRUCTURAL_ZERO, dtype=np.int8)
    labels[in_pop] = SAMPLING_ZERO
    labels[in_sample] = GENERAL_SAMPLE
    counts = np.bincount(labels, minlength=3)
    gen_index = build_index(generated, schema)
    missing = float((~gen_index.contains(smp.keys)).sum() / len(smp)) if len(smp) else 0.0
    m = keys.shape[0]
    return ZeroClassification(labels, float(counts[0] / m), float(counts[1] / m), float(counts[2] / m), missing)


@dataclass
class EvalReport:
    model: str
    space: str
    regularization: str
    marg_srmse: float
    bivar_srmse: float | None
    n_combinations: int
    recall: float
    precision: float
    f1: float
    zero_rates: dict[str, float]
    generated_size: int
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def table_row(self) -> list:
        return [getattr(self, c) for c in TABLE_COLUMNS]


def evaluate_generated(generated, population, sample, schema: AttributeSchema, model: str = "",
                       space: str = "-", regularization: str = "-", metadata: dict | None = None) -> EvalReport:
    gen_recs = as_records(generated, schema)
    gen, pop = build_index(gen_recs, schema), _as_index(population, schema)
    p, r = precision(gen, pop), recall(pop, gen)
    zeros = classify_zeros(gen_recs, sample, pop, schema)
    return EvalReport(
        model=model, space=space, regularization=regularization,
        marg_srmse=srmse(pop, gen, order="marginal"),
        bivar_srmse=srmse(pop, gen, order="bivariate") if schema.K > 1 else None,
        n_combinations=len(gen), recall=r, precision=p, f1=f1(p, r),
        zero_rates=zeros.rates(), generated_size=int(gen_recs.shape[0]),
        metadata=dict(metadata or {}),
    )


def write_table(path: str | Path, reports: list[EvalReport]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TABLE_COLUMNS)
        for rep in reports:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in rep.table_row()])


def write_report_json(path: str | Path, report: EvalReport) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# curves and histograms
# ---------------------------------------------------------------------------

def recall_curve(generated, population, sizes, schema: AttributeSchema | None = None) -> list[dict]:
    """Recall of growing prefixes of ``generated`` (nested by construction)."""
    schema = schema or population.schema
    pop = _as_index(population, schema)
    keys = combination_keys(generated, schema)
    sizes = [int(s) for s in sizes]
    if any(b < a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sizes must be ascending")
    if sizes and sizes[-1] > keys.shape[0]:
        raise ValueError("largest size exceeds the generated row count")
    # position of each population combination's first appearance in the generated rows
    first = np.full(len(pop), keys.shape[0], dtype=np.int64)
    hit = pop.contains(keys)
    pos = np.searchsorted(pop.keys, keys[hit])
    np.minimum.at(first, pos, np.nonzero(hit)[0])
    return [{"size": s, "recall": float(pop.counts[first < s].sum() / pop.total)} for s in sizes]


def recall_vs_size(artifact, population, sizes, seed, schema: AttributeSchema | None = None) -> list[dict]:
    """Generate once at the largest size and report recall of each prefix."""
    from .models.artifact import generate

    sizes = [int(s) for s in sizes]
    generated = generate(artifact, max(sizes), seed)
    return recall_curve(generated, population, sizes, schema or artifact.schema)


def distance_histograms(generated, sample, population, schema: AttributeSchema, space: str = "discrete",
                        bins=20, embedder=None) -> dict:
    """Nearest-sample distance of generated rows, histogrammed per zero class.

    All classes share the same bin edges. ``space="embedded"`` measures
    distances between embeddings of the one-hot rows.
    """
    gen_recs = as_records(generated, schema)
    smp_recs = as_records(sample, schema)
    zeros = classify_zeros(gen_recs, smp_recs, population, schema)
    x_gen, x_smp = encode(gen_recs, schema), encode(np.unique(smp_recs, axis=0), schema)
    if space == "embedded":
        if embedder is None:
            raise ValueError("embedded space needs an embedder")
        from .embedder import embed

        x_gen, x_smp = embed(embedder, x_gen), embed(embedder, x_smp)
    ref = geometry.make_reference(x_smp, space)
    dist = geometry.boundary_distance(x_gen, ref)
    edges = np.histogram_bin_edges(dist, bins=bins)
    out = {"space": space, "edges": edges.tolist(), "classes": {}}
    for label, name in enumerate(ZERO_CLASSES):
        d = dist[zeros.labels == label]
        counts, _ = np.histogram(d, bins=edges)
        out["classes"][name] = {
            "count": int(d.size),
            "mean": float(d.mean()) if d.size else None,
            "histogram": counts.tolist(),
        }
    out["distances"] = dist
    out["labels"] = zeros.labels
    return out
