"""Synthetic ground-truth populations, h-samples and coverage analysis.

A :class:`PopulationSpec` is a Bayesian network over the schema attributes
plus a list of forbidden category conjunctions. Ancestral sampling followed by
rejection of forbidden rows gives a population whose infeasible combinations
are known exactly.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import networkx as nx
import numpy as np

from .schema import AttributeSchema, SchemaError, as_records, build_index, combination_keys

log = logging.getLogger(__name__)

MIN_ACCEPTANCE = 0.01
MIN_DRAWS_BEFORE_GIVING_UP = 10_000


class InfeasibleSpecError(RuntimeError):
    pass


@dataclass
class PopulationSpec:
    schema: AttributeSchema
    parents: dict[int, tuple[int, ...]]
    cpts: dict[int, np.ndarray]  # (prod parent sizes, K_child), first parent most significant
    forbidden: list[dict[int, int]] = field(default_factory=list)
    size: int = 100_000
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        s = self.schema
        K = s.K
        self.parents = {k: tuple(sorted(self.parents.get(k, ()))) for k in range(K)}
        graph = nx.DiGraph()
        graph.add_nodes_from(range(K))
        for child, pa in self.parents.items():
            for p in pa:
                if not 0 <= p < K or p == child:
                    raise SchemaError(f"bad parent {p} for attribute {child}")
                graph.add_edge(p, child)
        if not nx.is_directed_acyclic_graph(graph):
            raise SchemaError("dependency graph has a cycle")
        for k in range(K):
            if k not in self.cpts:
                raise SchemaError(f"missing CPT for attribute {s.names[k]!r}")
            table = np.asarray(self.cpts[k], dtype=np.float64)
            n_rows = int(np.prod([s.sizes[p] for p in self.parents[k]], dtype=np.int64))
            if table.shape != (n_rows, s.sizes[k]):
                raise SchemaError(f"CPT for {s.names[k]!r} has shape {table.shape}, expected {(n_rows, int(s.sizes[k]))}")
            if np.any(table < 0) or not np.allclose(table.sum(axis=1), 1.0, atol=1e-9, rtol=0):
                raise SchemaError(f"CPT rows for {s.names[k]!r} must be non-negative and sum to 1")
            self.cpts[k] = table
        for rule in self.forbidden:
            if not rule:
                raise SchemaError("empty forbidden rule")
            for k, c in rule.items():
                if not (0 <= k < K and 0 <= c < s.sizes[k]):
                    raise SchemaError(f"forbidden rule references invalid pair ({k}, {c})")
        if self.size < 1:
            raise SchemaError("population size must be positive")
        self._order = list(nx.lexicographical_topological_sort(graph))

    @property
    def order(self) -> list[int]:
        return self._order

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(p, c) for c in range(self.schema.K) for p in self.parents[c]]

    def violates(self, records: np.ndarray) -> np.ndarray:
        """Boolean mask of rows matching at least one forbidden rule."""
        recs = np.asarray(records)
        bad = np.zeros(recs.shape[0], dtype=bool)
        for rule in self.forbidden:
            hit = np.ones(recs.shape[0], dtype=bool)
            for k, c in rule.items():
                hit &= recs[:, k] == c
            bad |= hit
        return bad

    # JSON container -------------------------------------------------------

    def to_dict(self) -> dict:
        s = self.schema
        cpts = {}
        for k in range(s.K):
            pa = self.parents[k]
            rows = {}
            for r, cfg in enumerate(_parent_configs(s, pa)):
                key = "|".join(s.attributes[p].categories[c] for p, c in zip(pa, cfg))
                rows[key] = self.cpts[k][r].tolist()
            cpts[s.names[k]] = rows
        return {
            **s.to_dict(),
            "edges": [[s.names[p], s.names[c]] for p, c in self.edges],
            "cpts": cpts,
            "forbidden": [{s.names[k]: s.attributes[k].categories[c] for k, c in rule.items()} for rule in self.forbidden],
            "size": int(self.size),
            "seed": int(self.seed),
        }

    @classmethod
    def from_dict(cls, d: dict) -> PopulationSpec:
        schema = AttributeSchema.from_dict(d)
        parents: dict[int, list[int]] = {k: [] for k in range(schema.K)}
        for p, c in d.get("edges", []):
            parents[schema.index_of(c)].append(schema.index_of(p))
        parents = {k: tuple(sorted(v)) for k, v in parents.items()}
        cpts = {}
        for name, rows in d["cpts"].items():
            k = schema.index_of(name)
            pa = parents[k]
            configs = _parent_configs(schema, pa)
            table = np.zeros((len(configs), schema.sizes[k]))
            for r, cfg in enumerate(configs):
                key = "|".join(schema.attributes[p].categories[c] for p, c in zip(pa, cfg))
                if key not in rows:
                    raise SchemaError(f"CPT for {name!r} lacks a row for parent configuration {key!r}")
                table[r] = rows[key]
            cpts[k] = table
        forbidden = [
            {schema.index_of(a): schema.category_index(a, v) for a, v in rule.items()}
            for rule in d.get("forbidden", [])
        ]
        return cls(schema, parents, cpts, forbidden, int(d["size"]), int(d["seed"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")


def load_population_spec(path: str | Path) -> PopulationSpec:
    return PopulationSpec.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _parent_configs(schema: AttributeSchema, parents: tuple[int, ...]) -> list[tuple[int, ...]]:
    configs: list[tuple[int, ...]] = [()]
    for p in parents:
        configs = [cfg + (c,) for cfg in configs for c in range(schema.sizes[p])]
    return configs


def parent_config_index(records: np.ndarray, schema: AttributeSchema, parents: tuple[int, ...]) -> np.ndarray:
    idx = np.zeros(records.shape[0], dtype=np.int64)
    for p in parents:
        idx = idx * schema.sizes[p] + records[:, p]
    return idx


def sample_categorical(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One draw per row of a row-stochastic matrix."""
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0])
    return np.minimum((u[:, None] >= cdf).sum(axis=1), probs.shape[1] - 1)


def ancestral_sample(spec: PopulationSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    out = np.zeros((n, spec.schema.K), dtype=np.int64)
    for k in spec.order:
        rows = parent_config_index(out, spec.schema, spec.parents[k])
        out[:, k] = sample_categorical(spec.cpts[k][rows], rng)
    return out


def synth_population(spec: PopulationSpec) -> np.ndarray:
    """Draw ``spec.size`` feasible records by ancestral sampling with rejection.

    Candidates are drawn in batches of ``max(1024, size)``. Generation stops
    with :class:`InfeasibleSpecError` once at least 10,000 candidates were
    drawn and fewer than 1% of them were feasible.
    """
    rng = np.random.default_rng(spec.seed)
    batch = max(1024, spec.size)
    parts, accepted, drawn = [], 0, 0
    while accepted < spec.size:
        cand = ancestral_sample(spec, batch, rng)
        ok = cand[~spec.violates(cand)]
        drawn += batch
        take = ok[: spec.size - accepted]
        parts.append(take)
        accepted += take.shape[0]
        if accepted < spec.size and drawn >= MIN_DRAWS_BEFORE_GIVING_UP and accepted / drawn < MIN_ACCEPTANCE:
            raise InfeasibleSpecError(
                f"only {accepted} of {drawn} candidates satisfy the forbidden rules (< {MIN_ACCEPTANCE:.0%})"
            )
    log.debug("population: %d records from %d candidates", spec.size, drawn)
    return np.concatenate(parts, axis=0)


# ---------------------------------------------------------------------------
# h-sample and coverage
# ---------------------------------------------------------------------------

def sample_size(n_population: int, rate: float) -> int:
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"sampling rate must be in (0, 1], got {rate}")
    return max(1, int(np.floor(rate * n_population + 0.5)))


def sample_indices(n_population: int, rate: float, seed: int) -> np.ndarray:
    """Row indices of a simple random sample without replacement.

    Samples for the same seed are nested: a larger rate extends the prefix
    of the same permutation.
    """
    if n_population < 1:
        raise ValueError("population is empty")
    n = sample_size(n_population, rate)
    return np.random.default_rng(seed).permutation(n_population)[:n]


def draw_sample(population: np.ndarray, rate: float, seed: int) -> np.ndarray:
    population = np.asarray(population)
    return population[sample_indices(population.shape[0], rate, seed)]


def coverage_curve(population, rates, seed: int, schema: AttributeSchema) -> list[dict]:
    """Combination and instance coverage of nested samples at each rate.

    ``combination_coverage`` is the share of the population's unique
    combinations seen in the sample; ``instance_coverage`` is the share of
    population rows whose combination is seen in the sample.
    """
    pop = as_records(population, schema)
    rates = [float(r) for r in rates]
    if any(b < a for a, b in zip(rates, rates[1:])):
        raise ValueError("rates must be sorted ascending")
    n = pop.shape[0]
    for r in rates:
        sample_size(n, r)
    perm = np.random.default_rng(seed).permutation(n)
    keys = combination_keys(pop, schema)
    index = build_index(pop, schema)
    # position of each unique combination's first appearance in the permutation
    combo_of_row = np.searchsorted(index.keys, keys)
    first = np.full(len(index), n, dtype=np.int64)
    np.minimum.at(first, combo_of_row[perm], np.arange(n))
    out = []
    for r in rates:
        m = sample_size(n, r)
        seen = first < m
        out.append({
            "rate": r,
            "n_sample": m,
            "combination_coverage": float(seen.sum() / len(index)),
            "instance_coverage": float(index.counts[seen].sum() / n),
        })
    return out
