"""Desk-scale preset: an 8-attribute travel-survey-like population.

Category counts are (4, 3, 2, 2, 5, 6, 3, 4), so W = 29 and there are 34,560
possible combinations. Conditional tables are softmaxes of additive logits
(a base vector plus one effect vector per parent category), which keeps the
dependencies readable while still giving a long tail of rare combinations.
"""
from __future__ import annotations

import numpy as np

from .population import PopulationSpec, _parent_configs
from .schema import AttributeSchema

DESK_ATTRIBUTES = [
    ("age", ["child", "young", "middle", "senior"]),
    ("income", ["low", "mid", "high"]),
    ("license", ["yes", "no"]),
    ("car_owner", ["yes", "no"]),
    ("work", ["student", "office", "service", "labor", "none"]),
    ("mode", ["drive", "transit", "walk", "bike", "taxi", "none"]),
    ("departure", ["peak", "offpeak", "none"]),
    ("household", ["one", "two", "three", "four_plus"]),
]

DESK_SIZE = 100_000
DESK_SEED = 2022
DESK_SAMPLE_RATE = 0.05
DESK_SAMPLE_SEED = 7
# logits below are multiplied by this before the softmax; lower is more diffuse
DESK_LOGIT_SCALE = 0.5

# child -> (base logits, {parent: logits per parent category})
_LOGITS: dict[str, tuple[list[float], dict[str, list[list[float]]]]] = {
    "age": ([0.0, 0.3, 0.6, 0.1], {}),
    "household": (
        [-0.6, 0.3, 0.5, 0.7],
        {"age": [[-3.0, 0.0, 0.4, 0.9], [0.6, 0.2, 0.0, -0.4], [-0.4, -0.2, 0.3, 0.5], [0.5, 0.9, -0.3, -1.0]]},
    ),
    "income": (
        [0.0, 0.8, 0.0],
        {"age": [[0.0, 0.0, 0.0], [0.3, 0.2, -0.6], [-0.5, 0.0, 0.7], [0.9, 0.0, -0.9]]},
    ),
    "license": (
        [0.0, 0.0],
        {
            "age": [[-2.5, 2.5], [0.8, -0.2], [1.4, -0.8], [0.0, 0.4]],
            "income": [[-0.4, 0.4], [0.2, 0.0], [0.6, -0.4]],
        },
    ),
    "car_owner": (
        [0.8, 0.0],
        {
            "income": [[-1.0, 0.6], [0.2, 0.0], [1.2, -0.8]],
            "license": [[0.7, -0.5], [-0.8, 0.6]],
            "household": [[-0.7, 0.5], [0.0, 0.0], [0.3, -0.1], [0.5, -0.3]],
        },
    ),
    "work": (
        [0.0, 0.0, 0.0, 0.0, 0.0],
        {
            "age": [
                [3.2, -2.2, -1.8, -2.0, 0.6],
                [0.4, 1.2, 0.9, 0.6, 0.2],
                [-2.2, 1.3, 0.8, 0.9, 0.6],
                [-2.2, -0.8, 0.0, 0.3, 2.0],
            ],
        },
    ),
    "mode": (
        [0.3, 0.2, 0.1, -1.2, -2.5, 0.1],
        {
            "license": [[1.4, 0.0, 0.0, 0.0, 0.0, 0.0], [-2.6, 0.4, 0.3, 0.3, 0.3, 0.2]],
            "car_owner": [[0.8, -0.2, -0.2, 0.0, -0.2, 0.0], [-1.6, 0.5, 0.2, 0.2, 0.4, 0.0]],
            "work": [
                [-0.8, 0.9, 0.8, 0.6, -0.5, -1.0],
                [0.5, 0.6, -0.4, -0.4, 0.3, -1.2],
                [0.2, 0.4, 0.2, 0.0, 0.2, -0.6],
                [0.4, 0.0, 0.0, 0.5, -0.5, -0.4],
                [-0.4, -0.6, 0.5, -0.2, 0.0, 1.5],
            ],
        },
    ),
    "departure": (
        [0.8, 0.0, -0.5],
        {
            "work": [[0.8, -0.4, 0.0], [0.9, -0.4, 0.0], [0.0, 0.4, 0.0], [0.6, 0.0, 0.0], [-0.9, 0.9, 0.3]],
            "mode": [
                [0.2, 0.0, -2.5],
                [0.3, 0.0, -2.5],
                [0.0, 0.3, -0.9],
                [0.0, 0.2, -0.9],
                [-0.4, 0.6, -1.2],
                [-1.8, -1.8, 2.8],
            ],
        },
    ),
}

# conjunctions of (attribute, category) that never occur in the population
DESK_FORBIDDEN: list[dict[str, str]] = [
    {"age": "child", "license": "yes"},
    {"age": "child", "work": "office"},
    {"age": "child", "work": "service"},
    {"age": "child", "work": "labor"},
    {"license": "no", "mode": "drive"},
    {"mode": "none", "departure": "peak"},
    {"mode": "none", "departure": "offpeak"},
    {"departure": "none", "mode": "drive"},
    {"departure": "none", "mode": "transit"},
    {"household": "one", "age": "child"},
    {"age": "senior", "work": "student"},
]


def desk_schema() -> AttributeSchema:
    return AttributeSchema(DESK_ATTRIBUTES)


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


def desk_population_spec(
    size: int = DESK_SIZE, seed: int = DESK_SEED, logit_scale: float = DESK_LOGIT_SCALE
) -> PopulationSpec:
    schema = desk_schema()
    parents: dict[int, tuple[int, ...]] = {}
    cpts: dict[int, np.ndarray] = {}
    for name, (base, effects) in _LOGITS.items():
        k = schema.index_of(name)
        pa = tuple(sorted(schema.index_of(p) for p in effects))
        parents[k] = pa
        rows = []
        for cfg in _parent_configs(schema, pa):
            z = np.asarray(base, dtype=np.float64).copy()
            for p, c in zip(pa, cfg):
                z += np.asarray(effects[schema.names[p]][c])
            rows.append(_softmax(logit_scale * z))
        cpts[k] = np.asarray(rows)
    forbidden = [{schema.index_of(a): schema.category_index(a, v) for a, v in rule.items()} for rule in DESK_FORBIDDEN]
    return PopulationSpec(schema, parents, cpts, forbidden, size, seed)
