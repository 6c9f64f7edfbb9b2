"""Attribute schemas, one-hot encoding and combination indexing.

Records are handled as integer arrays of shape ``(n, K)`` holding category
indices, one column per attribute. An encoded matrix is a float array of
shape ``(n, W)`` made of K column blocks; real data has one-hot blocks and
generator output has blocks on the probability simplex.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class Attribute:
    name: str
    categories: tuple[str, ...]

    @property
    def size(self) -> int:
        return len(self.categories)


class AttributeSchema:
    """Ordered categorical attributes and the one-hot layout they imply."""

    def __init__(self, attributes: Sequence[Attribute | tuple[str, Sequence[str]]]):
        attrs = []
        for a in attributes:
            if not isinstance(a, Attribute):
                name, cats = a
                a = Attribute(str(name), tuple(str(c) for c in cats))
            attrs.append(a)
        self.attributes: tuple[Attribute, ...] = tuple(attrs)
        self._validate()
        self.sizes = np.array([a.size for a in self.attributes], dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)]).astype(np.int64)
        self._name_pos = {a.name: i for i, a in enumerate(self.attributes)}
        self._cat_pos = [{c: j for j, c in enumerate(a.categories)} for a in self.attributes]

    def _validate(self) -> None:
        if not self.attributes:
            raise SchemaError("schema has no attributes")
        names = [a.name for a in self.attributes]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise SchemaError(f"duplicate attribute names: {dupes}")
        for a in self.attributes:
            if a.size < 2:
                raise SchemaError(f"attribute {a.name!r} needs at least 2 categories")
            if len(set(a.categories)) != a.size:
                raise SchemaError(f"attribute {a.name!r} has duplicate category labels")

    def __eq__(self, other) -> bool:
        return isinstance(other, AttributeSchema) and self.attributes == other.attributes

    def __hash__(self) -> int:
        return hash(self.attributes)

    def __repr__(self) -> str:
        return f"AttributeSchema(K={self.K}, W={self.W}, sizes={self.sizes.tolist()})"

    @property
    def K(self) -> int:
        return len(self.attributes)

    @property
    def W(self) -> int:
        return int(self.sizes.sum())

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    @property
    def blocks(self) -> list[tuple[int, int]]:
        return [(int(lo), int(hi)) for lo, hi in zip(self.offsets[:-1], self.offsets[1:])]

    @property
    def n_combinations(self) -> int:
        return math.prod(int(s) for s in self.sizes)

    def index_of(self, name: str) -> int:
        try:
            return self._name_pos[name]
        except KeyError:
            raise SchemaError(f"unknown attribute {name!r}") from None

    def category_index(self, attr: int | str, label: str) -> int:
        k = self.index_of(attr) if isinstance(attr, str) else attr
        try:
            return self._cat_pos[k][label]
        except KeyError:
            raise SchemaError(f"unknown category {label!r} for attribute {self.attributes[k].name!r}") from None

    def to_dict(self) -> dict:
        return {"attributes": [{"name": a.name, "categories": list(a.categories)} for a in self.attributes]}

    @classmethod
    def from_dict(cls, d: dict) -> AttributeSchema:
        try:
            return cls([(a["name"], a["categories"]) for a in d["attributes"]])
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema document: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_schema(path: str | Path) -> AttributeSchema:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    return AttributeSchema.from_dict(doc)


# ---------------------------------------------------------------------------
# records and encoding
# ---------------------------------------------------------------------------

def as_records(records, schema: AttributeSchema) -> np.ndarray:
    """Validate and return records as an ``(n, K)`` int64 array."""
    arr = np.asarray(records, dtype=np.int64)
    if arr.size == 0:
        return arr.reshape(0, schema.K)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != schema.K:
        raise SchemaError(f"records must have {schema.K} columns, got shape {arr.shape}")
    bad = (arr < 0) | (arr >= schema.sizes[None, :])
    if bad.any():
        i, k = map(int, np.argwhere(bad)[0])
        raise SchemaError(f"record {i}: index {arr[i, k]} out of range for attribute {schema.names[k]!r}")
    return arr


def encode(records, schema: AttributeSchema) -> np.ndarray:
    """One-hot encode records into an ``(n, W)`` matrix."""
    recs = as_records(records, schema)
    out = np.zeros((recs.shape[0], schema.W))
    if recs.shape[0]:
        cols = recs + schema.offsets[:-1][None, :]
        np.put_along_axis(out, cols, 1.0, axis=1)
    return out


def check_encoded(matrix: np.ndarray, schema: AttributeSchema, hard: bool = False, atol: float = 1e-9) -> None:
    """Raise unless every block of every row lies on the simplex (one-hot if ``hard``)."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] != schema.W:
        raise SchemaError(f"encoded matrix must have width {schema.W}, got shape {m.shape}")
    if np.any(m < -atol) or np.any(m > 1 + atol):
        raise SchemaError("encoded entries must lie in [0, 1]")
    for lo, hi in schema.blocks:
        if not np.allclose(m[:, lo:hi].sum(axis=1), 1.0, atol=atol, rtol=0):
            raise SchemaError(f"block [{lo}:{hi}] does not sum to 1")
    if hard and not np.all((m == 0.0) | (m == 1.0)):
        raise SchemaError("hard matrix has entries outside {0, 1}")


def discretize(matrix: np.ndarray, schema: AttributeSchema, mode: str = "argmax", seed=None) -> np.ndarray:
    """Turn (relaxed) encoded rows into records.

    ``argmax`` picks the most probable category per block, lowest index on
    ties. ``sample`` draws each attribute independently from its block.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] != schema.W:
        raise SchemaError(f"encoded matrix must have width {schema.W}, got shape {m.shape}")
    if mode not in ("argmax", "sample"):
        raise ValueError(f"unknown discretize mode {mode!r}")
    out = np.empty((m.shape[0], schema.K), dtype=np.int64)
    rng = None
    if mode == "sample":
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    for k, (lo, hi) in enumerate(schema.blocks):
        block = m[:, lo:hi]
        mass = block.sum(axis=1)
        if np.any(mass <= 0):
            raise SchemaError(f"attribute {schema.names[k]!r}: block with zero mass")
        if mode == "argmax":
            out[:, k] = np.argmax(block, axis=1)
        else:
            cdf = np.cumsum(block / mass[:, None], axis=1)
            u = rng.random(m.shape[0])
            out[:, k] = np.minimum((u[:, None] >= cdf).sum(axis=1), hi - lo - 1)
    return out


def decode(matrix: np.ndarray, schema: AttributeSchema) -> np.ndarray:
    return discretize(matrix, schema, "argmax")


# ---------------------------------------------------------------------------
# combination keys and index
# ---------------------------------------------------------------------------

def _radix(schema: AttributeSchema) -> list[int]:
    mult, acc = [], 1
    for s in reversed(schema.sizes.tolist()):
        mult.append(acc)
        acc *= s
    return mult[::-1]


def combination_keys(records, schema: AttributeSchema) -> np.ndarray:
    """Mixed-radix key per record, attribute 0 most significant.

    Keys are int64 when every combination fits in 63 bits and Python ints
    (object array) otherwise.
    """
    recs = as_records(records, schema)
    mult = _radix(schema)
    if schema.n_combinations < 2 ** 63:
        return recs @ np.asarray(mult, dtype=np.int64)
    keys = np.zeros(recs.shape[0], dtype=object)
    for k, m in enumerate(mult):
        keys = keys + recs[:, k].astype(object) * m
    return keys


def keys_to_records(keys, schema: AttributeSchema) -> np.ndarray:
    keys = np.asarray(keys)
    out = np.empty((keys.shape[0], schema.K), dtype=np.int64)
    rem = keys.copy()
    for k in range(schema.K - 1, -1, -1):
        s = int(schema.sizes[k])
        out[:, k] = (rem % s).astype(np.int64)
        rem = rem // s
    return out


@dataclass(frozen=True)
class CombinationIndex:
    """Unique attribute combinations with their instance counts."""

    schema: AttributeSchema
    keys: np.ndarray  # sorted, unique
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __len__(self) -> int:
        return int(self.keys.shape[0])

    def contains(self, keys) -> np.ndarray:
        keys = np.asarray(keys)
        if len(self) == 0 or keys.size == 0:
            return np.zeros(keys.shape, dtype=bool)
        pos = np.searchsorted(self.keys, keys)
        pos = np.minimum(pos, len(self) - 1)
        return self.keys[pos] == keys

    def count_of(self, keys) -> np.ndarray:
        keys = np.asarray(keys)
        hit = self.contains(keys)
        out = np.zeros(keys.shape, dtype=np.int64)
        if hit.any():
            out[hit] = self.counts[np.searchsorted(self.keys, keys[hit])]
        return out

    def records(self) -> np.ndarray:
        return keys_to_records(self.keys, self.schema)

    def as_dict(self) -> dict[tuple[int, ...], int]:
        """Combination (as a tuple of category indices) to instance count."""
        return {tuple(int(v) for v in r): int(c) for r, c in zip(self.records(), self.counts)}


def build_index(records, schema: AttributeSchema) -> CombinationIndex:
    keys = combination_keys(records, schema)
    if keys.size == 0:
        return CombinationIndex(schema, np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))
    uniq, counts = np.unique(keys, return_counts=True)
    return CombinationIndex(schema, uniq, counts.astype(np.int64))


# ---------------------------------------------------------------------------
# CSV datasets
# ---------------------------------------------------------------------------

def read_records_csv(path: str | Path, schema: AttributeSchema) -> np.ndarray:
    """Read a labelled CSV whose header matches the schema's attribute names."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if header != schema.names:
            raise SchemaError(f"{path}: header {header} does not match schema {schema.names}")
        lookup = schema._cat_pos
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != schema.K:
                raise SchemaError(f"{path}:{line_no}: expected {schema.K} fields")
            try:
                rows.append([lookup[k][v] for k, v in enumerate(row)])
            except KeyError as exc:
                raise SchemaError(f"{path}:{line_no}: unknown category label {exc.args[0]!r}") from None
    return np.asarray(rows, dtype=np.int64).reshape(-1, schema.K)


def write_records_csv(path: str | Path, records, schema: AttributeSchema) -> None:
    recs = as_records(records, schema)
    labels = [np.asarray(a.categories, dtype=object) for a in schema.attributes]
    cols = [labels[k][recs[:, k]] for k in range(schema.K)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(schema.names)
        writer.writerows(zip(*cols))
