"""Independent brute-force reimplementations used as test oracles.

These work on plain Python tuples and dicts, never on the package's
vectorized helpers, so agreement is evidence rather than tautology.
"""
from __future__ import annotations

import math
from collections import Counter
from itertools import combinations

import numpy as np


def tuples(records) -> list[tuple]:
    return [tuple(int(v) for v in r) for r in np.asarray(records)]


def tally(records) -> Counter:
    return Counter(tuples(records))


def precision(generated, population) -> float:
    pop = set(tuples(population))
    gen = tuples(generated)
    return sum(1 for g in gen if g in pop) / len(gen)


def recall(population, generated) -> float:
    gen = set(tuples(generated))
    pop = tuples(population)
    return sum(1 for p in pop if p in gen) / len(pop)


def f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def marginal_cells(records, sizes) -> list[float]:
    rows = tuples(records)
    out = []
    for k, size in enumerate(sizes):
        for c in range(size):
            out.append(sum(1 for r in rows if r[k] == c) / len(rows))
    return out


def bivariate_cells(records, sizes) -> list[float]:
    rows = tuples(records)
    out = []
    for a, b in combinations(range(len(sizes)), 2):
        for ca in range(sizes[a]):
            for cb in range(sizes[b]):
                out.append(sum(1 for r in rows if r[a] == ca and r[b] == cb) / len(rows))
    return out


def srmse(reference, generated, sizes, order="marginal") -> float:
    cells = marginal_cells if order == "marginal" else bivariate_cells
    pi, pi_hat = cells(reference, sizes), cells(generated, sizes)
    rmse = math.sqrt(sum((a - b) ** 2 for a, b in zip(pi, pi_hat)) / len(pi))
    return rmse / (sum(pi) / len(pi))


def zero_rates(generated, sample, population) -> tuple[float, float, float, float]:
    smp, pop = set(tuples(sample)), set(tuples(population))
    gen = tuples(generated)
    general = sum(1 for g in gen if g in smp)
    sampling = sum(1 for g in gen if g in pop and g not in smp)
    structural = sum(1 for g in gen if g not in pop)
    gen_set = set(gen)
    missing = sum(1 for s in smp if s not in gen_set) / len(smp)
    m = len(gen)
    return general / m, sampling / m, structural / m, missing


def family_bic(records, sizes, child: int, parents: tuple) -> float:
    """BIC of one node given its parents, by explicit dictionary counting."""
    rows = tuples(records)
    n = len(rows)
    joint, marg = Counter(), Counter()
    for r in rows:
        pa = tuple(r[p] for p in parents)
        joint[(pa, r[child])] += 1
        marg[pa] += 1
    ll = sum(c * math.log(c / marg[pa]) for (pa, _), c in joint.items())
    q = 1
    for p in parents:
        q *= sizes[p]
    return ll - 0.5 * math.log(n) * (sizes[child] - 1) * q


def pairwise_sq(a, b) -> np.ndarray:
    out = np.zeros((len(a), len(b)))
    for i in range(len(a)):
        for j in range(len(b)):
            out[i, j] = sum((float(x) - float(y)) ** 2 for x, y in zip(a[i], b[j]))
    return out


def numeric_grad(f, arrays, h=1e-5) -> list[np.ndarray]:
    """Central finite differences of scalar ``f(arrays)`` w.r.t. each array, in place."""
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        it = np.nditer(a, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = a[i]
            a[i] = old + h
            up = f(arrays)
            a[i] = old - h
            down = f(arrays)
            a[i] = old
            g[i] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    num = np.linalg.norm(np.ravel(a) - np.ravel(b))
    den = max(np.linalg.norm(np.ravel(a)), np.linalg.norm(np.ravel(b)), 1e-12)
    return float(num / den)


def random_metric_instance(rng: np.random.Generator):
    """A small (schema sizes, population, sample, generated) instance.

    The sample is drawn from the population rows; generated rows mix
    population rows with uniformly random (possibly infeasible) rows.
    """
    k = int(rng.integers(1, 6))
    sizes = [int(s) for s in rng.integers(2, 5, k)]
    n_pop = int(rng.integers(5, 1001))
    # a restricted support makes structural zeros possible
    support = np.stack([rng.integers(0, s, max(2, n_pop // 10)) for s in sizes], axis=1)
    population = support[rng.integers(0, support.shape[0], n_pop)]
    sample = population[rng.choice(n_pop, int(rng.integers(1, n_pop + 1)), replace=False)]
    n_gen = int(rng.integers(1, 1001))
    uniform = np.stack([rng.integers(0, s, n_gen) for s in sizes], axis=1)
    from_pop = population[rng.integers(0, n_pop, n_gen)]
    generated = np.where(rng.random((n_gen, 1)) < 0.6, from_pop, uniform)
    return sizes, population, sample, generated
