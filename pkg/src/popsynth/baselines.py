"""Non-neural baselines: equal-weight resampling and a Bayesian network.

The network structure is found by greedy hill climbing over single-edge
additions, deletions and reversals scored by BIC; conditional tables are
maximum likelihood with Laplace smoothing.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from itertools import permutations
from pathlib import Path

import networkx as nx
import numpy as np

from .population import PopulationSpec, ancestral_sample, parent_config_index
from .schema import AttributeSchema, as_records

log = logging.getLogger(__name__)

TIE_TOL = 1e-9


def reweight_generate(sample, n: int, seed) -> np.ndarray:
    """``n`` draws with replacement from the sample rows, equal weights."""
    sample = np.asarray(sample)
    if sample.shape[0] == 0:
        raise ValueError("cannot resample an empty sample")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return sample[rng.integers(0, sample.shape[0], size=int(n))]


# ---------------------------------------------------------------------------
# scoring
# ---------------------------------------------------------------------------

def family_counts(records: np.ndarray, schema: AttributeSchema, child: int, parents: tuple[int, ...]) -> np.ndarray:
    """(parent configurations, child categories) contingency table."""
    q = int(np.prod([schema.sizes[p] for p in parents], dtype=np.int64))
    k = int(schema.sizes[child])
    cell = parent_config_index(records, schema, parents) * k + records[:, child]
    return np.bincount(cell, minlength=q * k).reshape(q, k).astype(np.float64)


def local_bic(records: np.ndarray, schema: AttributeSchema, child: int, parents: tuple[int, ...]) -> float:
    """Maximum log-likelihood of the family minus 0.5 * log(n) * free parameters."""
    counts = family_counts(records, schema, child, parents)
    totals = counts.sum(axis=1, keepdims=True)
    nz = counts > 0
    ll = float((counts[nz] * np.log(counts[nz] / np.broadcast_to(totals, counts.shape)[nz])).sum())
    n_free = (counts.shape[1] - 1) * counts.shape[0]
    return ll - 0.5 * np.log(records.shape[0]) * n_free


@dataclass
class BayesNet:
    schema: AttributeSchema
    parents: dict[int, tuple[int, ...]]
    cpts: dict[int, np.ndarray]
    loglik: float
    bic: float
    score_trace: list[float] = field(default_factory=list)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return sorted((p, c) for c, pa in self.parents.items() for p in pa)

    def topological_order(self) -> list[int]:
        g = nx.DiGraph()
        g.add_nodes_from(range(self.schema.K))
        g.add_edges_from(self.edges)
        return list(nx.lexicographical_topological_sort(g))

    def as_population_spec(self, size: int = 1, seed: int = 0) -> PopulationSpec:
        return PopulationSpec(self.schema, dict(self.parents), dict(self.cpts), [], size, seed)

    def to_dict(self) -> dict:
        d = self.as_population_spec().to_dict()
        for key in ("size", "seed", "forbidden"):
            d.pop(key)
        d.update({"loglik": self.loglik, "bic": self.bic, "score_trace": self.score_trace})
        return d

    @classmethod
    def from_dict(cls, d: dict) -> BayesNet:
        spec = PopulationSpec.from_dict({**d, "size": 1, "seed": 0, "forbidden": []})
        return cls(spec.schema, spec.parents, spec.cpts, float(d["loglik"]), float(d["bic"]),
                   list(d.get("score_trace", [])))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")


def fit_cpts(records: np.ndarray, schema: AttributeSchema, parents: dict[int, tuple[int, ...]],
             alpha: float = 1.0) -> dict[int, np.ndarray]:
    cpts = {}
    for k in range(schema.K):
        counts = family_counts(records, schema, k, parents[k]) + alpha
        cpts[k] = counts / counts.sum(axis=1, keepdims=True)
    return cpts


def _creates_cycle(graph: nx.DiGraph, u: int, v: int) -> bool:
    return nx.has_path(graph, v, u)


def bn_learn(sample, schema: AttributeSchema, max_parents: int = 3, max_iters: int = 1000,
             seed: int = 0, alpha: float = 1.0) -> BayesNet:
    """Greedy hill climbing on BIC from the empty graph.

    Each iteration applies the best single-edge move; moves whose score gains
    agree within a relative 1e-9 are ordered lexicographically by
    (operation, parent, child). Search is deterministic, so ``seed`` only
    labels the run.
    """
    records = as_records(sample, schema)
    if records.shape[0] < 2:
        raise ValueError("structure learning needs at least 2 rows")
    K = schema.K
    parents: dict[int, tuple[int, ...]] = {k: () for k in range(K)}
    cache: dict[tuple[int, tuple[int, ...]], float] = {}

    def local(child: int, pa: tuple[int, ...]) -> float:
        key = (child, tuple(sorted(pa)))
        if key not in cache:
            cache[key] = local_bic(records, schema, child, key[1])
        return cache[key]

    graph = nx.DiGraph()
    graph.add_nodes_from(range(K))
    score = sum(local(k, ()) for k in range(K))
    trace = [score]
    for _ in range(max_iters):
        moves = []
        for u, v in permutations(range(K), 2):
            if u in parents[v]:
                new_v = tuple(p for p in parents[v] if p != u)
                delta_del = local(v, new_v) - local(v, parents[v])
                moves.append((delta_del, "delete", u, v))
                if len(parents[u]) < max_parents:
                    graph.remove_edge(u, v)
                    ok = not _creates_cycle(graph, v, u)
                    graph.add_edge(u, v)
                    if ok:
                        new_u = parents[u] + (v,)
                        delta = delta_del + local(u, new_u) - local(u, parents[u])
                        moves.append((delta, "reverse", u, v))
            elif v not in parents[u] and len(parents[v]) < max_parents and not _creates_cycle(graph, u, v):
                moves.append((local(v, parents[v] + (u,)) - local(v, parents[v]), "add", u, v))
        if not moves:
            break
        best = max(m[0] for m in moves)
        if best <= TIE_TOL * max(1.0, abs(score)):
            break
        tied = [m for m in moves if m[0] >= best - TIE_TOL * max(1.0, abs(best))]
        delta, op, u, v = min(tied, key=lambda m: (m[1], m[2], m[3]))
        if op == "add":
            parents[v] = tuple(sorted(parents[v] + (u,)))
            graph.add_edge(u, v)
        elif op == "delete":
            parents[v] = tuple(p for p in parents[v] if p != u)
            graph.remove_edge(u, v)
        else:
            parents[v] = tuple(p for p in parents[v] if p != u)
            parents[u] = tuple(sorted(parents[u] + (v,)))
            graph.remove_edge(u, v)
            graph.add_edge(v, u)
        score = sum(local(k, parents[k]) for k in range(K))
        trace.append(score)
        log.debug("hill climbing: %s %d->%d, BIC %.3f", op, u, v, score)

    cpts = fit_cpts(records, schema, parents, alpha)
    loglik = 0.0
    for k in range(K):
        rows = parent_config_index(records, schema, parents[k])
        loglik += float(np.log(cpts[k][rows, records[:, k]]).sum())
    return BayesNet(schema, parents, cpts, loglik, score, trace)


def bn_sample(net: BayesNet, n: int, seed) -> np.ndarray:
    """Ancestral sampling in topological order."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return ancestral_sample(net.as_population_spec(), int(n), rng)
