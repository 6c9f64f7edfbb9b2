"""Masked-attribute embedding network.

The first layer is a per-category embedding table acting linearly on the
one-hot blocks, so a record embeds to the sum of its selected table rows and a
relaxed row embeds to the matching convex combination. A small dense head is
trained to recover randomly masked attributes from the rest; after training
only the table is used to measure distances.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .diffcore import AdamState, DenseNetSpec, Parameters, Tensor, adam_step, forward, grad, init_params, no_grad
from .diffcore import tensor as T
from .schema import AttributeSchema, as_records, decode, encode

log = logging.getLogger(__name__)


@dataclass
class EmbedderSpec:
    dim: int = 16
    hidden: list[int] = field(default_factory=lambda: [64])
    mask_fraction: float = 0.25
    epochs: int = 60
    lr: float = 3e-3
    batch_size: int = 256
    holdout: float = 0.1
    patience: int = 5
    min_rel_improvement: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.mask_fraction < 1.0:
            raise ValueError("mask fraction must be in (0, 1)")
        if self.dim < 1:
            raise ValueError("embedding dimension must be at least 1")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class Embedder:
    schema: AttributeSchema
    spec: EmbedderSpec
    table: np.ndarray  # (W, dim)
    head_spec: DenseNetSpec
    head_params: Parameters
    trained: bool = False
    history: list[dict] = field(default_factory=list)
    heldout_accuracy: float = float("nan")
    attribute_accuracy: list[float] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return int(self.table.shape[1])

    def to_dict(self) -> dict:
        return {
            "schema": self.schema.to_dict(),
            "spec": self.spec.to_dict(),
            "table": {"shape": list(self.table.shape), "data": self.table.ravel().tolist()},
            "head_spec": self.head_spec.to_dict(),
            "head_params": self.head_params.to_dict(),
            "trained": self.trained,
            "history": self.history,
            "heldout_accuracy": self.heldout_accuracy,
            "attribute_accuracy": self.attribute_accuracy,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Embedder:
        tab = d["table"]
        return cls(
            schema=AttributeSchema.from_dict(d["schema"]),
            spec=EmbedderSpec(**d["spec"]),
            table=np.asarray(tab["data"], dtype=np.float64).reshape(tab["shape"]),
            head_spec=DenseNetSpec.from_dict(d["head_spec"]),
            head_params=Parameters.from_dict(d["head_params"]),
            trained=bool(d.get("trained", True)),
            history=list(d.get("history", [])),
            heldout_accuracy=float(d.get("heldout_accuracy", float("nan"))),
            attribute_accuracy=list(d.get("attribute_accuracy", [])),
        )


def embed(embedder: Embedder, batch):
    """Apply the embedding table. Tensors stay differentiable; arrays stay arrays."""
    if isinstance(batch, Tensor):
        if batch.shape[1] != embedder.table.shape[0]:
            raise ValueError(f"batch width {batch.shape[1]} does not match embedder width {embedder.table.shape[0]}")
        return batch @ embedder.table
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != embedder.table.shape[0]:
        raise ValueError(f"batch width {x.shape[-1]} does not match embedder width {embedder.table.shape[0]}")
    return x @ embedder.table


def random_masks(n_rows: int, schema: AttributeSchema, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Boolean (n, K) array with round(fraction * K) (at least one) masked attributes per row."""
    n_mask = max(1, int(np.floor(fraction * schema.K + 0.5)))
    order = np.argsort(rng.random((n_rows, schema.K)), axis=1)
    masked = np.zeros((n_rows, schema.K), dtype=bool)
    np.put_along_axis(masked, order[:, :n_mask], True, axis=1)
    return masked


def _expand(masked: np.ndarray, schema: AttributeSchema) -> np.ndarray:
    return np.repeat(masked.astype(np.float64), schema.sizes, axis=1)


def _predict(table: Tensor | np.ndarray, head_spec: DenseNetSpec, head_params: Parameters, x_masked) -> Tensor:
    return forward(head_spec, head_params, T.as_tensor(x_masked) @ table)


def _masked_ce(probs: Tensor, onehot: np.ndarray, mask_cols: np.ndarray, n_masked: int) -> Tensor:
    logp = T.log(T.clamp_min(probs, 1e-12))
    return -(logp * (onehot * mask_cols)).sum() * (1.0 / n_masked)


def masked_accuracy(embedder: Embedder, onehot: np.ndarray, masked: np.ndarray) -> tuple[float, list[float]]:
    """Share of masked attributes predicted correctly, overall and per attribute."""
    schema = embedder.schema
    with no_grad():
        probs = _predict(embedder.table, embedder.head_spec, embedder.head_params, onehot * (1.0 - _expand(masked, schema)))
    pred = decode(probs.data, schema)
    truth = decode(onehot, schema)
    hit = (pred == truth) & masked
    per_attr = [float(hit[:, k].sum() / masked[:, k].sum()) if masked[:, k].any() else float("nan") for k in range(schema.K)]
    return float(hit.sum() / masked.sum()), per_attr


def train_embedder(sample, schema: AttributeSchema, spec: EmbedderSpec | None = None) -> Embedder:
    """Train the embedding table by masked-attribute reconstruction.

    ``sample`` holds records (``(n, K)`` ints) or their one-hot encoding. A
    held-out share of rows with a fixed mask drives early stopping: training
    ends after ``spec.epochs`` or once held-out accuracy has not improved by
    a relative ``min_rel_improvement`` over ``patience`` epochs.
    """
    spec = spec or EmbedderSpec()
    sample = np.asarray(sample)
    if sample.ndim == 2 and sample.shape[1] == schema.W and sample.dtype.kind == "f":
        onehot = sample.astype(np.float64)
        records = decode(onehot, schema)
    else:
        records = as_records(sample, schema)
        onehot = encode(records, schema)
    n = onehot.shape[0]
    if n < 2:
        raise ValueError("embedder training needs at least 2 rows")
    if np.unique(records, axis=0).shape[0] == 1:
        warnings.warn("sample has a single unique row; embedding carries no contextual signal", RuntimeWarning)

    rng = np.random.default_rng(spec.seed)
    perm = rng.permutation(n)
    n_hold = min(n - 1, max(1, int(round(spec.holdout * n))))
    hold, train = perm[:n_hold], perm[n_hold:]
    x_train, x_hold = onehot[train], onehot[hold]
    hold_masks = random_masks(n_hold, schema, spec.mask_fraction, rng)
    eval_masks = random_masks(x_train.shape[0], schema, spec.mask_fraction, rng)

    bound = np.sqrt(6.0 / schema.K)
    table = Tensor(rng.uniform(-bound, bound, size=(schema.W, spec.dim)), requires_grad=True)
    head_spec = DenseNetSpec(
        [spec.dim, *spec.hidden, schema.W], ["relu"] * len(spec.hidden), head="block_softmax", blocks=schema.blocks
    )
    head_params = init_params(head_spec, int(rng.integers(2**31)))
    params = [table, *head_params.tensors()]
    opt = AdamState(lr=spec.lr, beta1=0.9, beta2=0.999)
    emb = Embedder(schema, spec, table.data, head_spec, head_params)

    def eval_loss() -> float:
        with no_grad():
            cols = _expand(eval_masks, schema)
            probs = _predict(table, head_spec, head_params, x_train * (1.0 - cols))
            return _masked_ce(probs, x_train, cols, x_train.shape[0]).item()

    accs: list[float] = []
    for epoch in range(spec.epochs):
        order = rng.permutation(x_train.shape[0])
        for lo in range(0, len(order), spec.batch_size):
            xb = x_train[order[lo:lo + spec.batch_size]]
            cols = _expand(random_masks(xb.shape[0], schema, spec.mask_fraction, rng), schema)
            probs = _predict(table, head_spec, head_params, xb * (1.0 - cols))
            loss = _masked_ce(probs, xb, cols, xb.shape[0])
            grads = grad(loss, params)
            adam_step(opt, params, [g.data for g in grads])
        emb.table = table.data
        acc, _ = masked_accuracy(emb, x_hold, hold_masks)
        accs.append(acc)
        emb.history.append({"epoch": epoch, "train_loss": eval_loss(), "heldout_accuracy": acc})
        log.debug("embedder epoch %d: loss %.4f acc %.4f", epoch, emb.history[-1]["train_loss"], acc)
        if epoch >= spec.patience:
            before = max(accs[: -spec.patience])
            recent = max(accs[-spec.patience:])
            if recent < before * (1.0 + spec.min_rel_improvement) and before > 0:
                break

    emb.table = table.data.copy()
    emb.trained = True
    emb.heldout_accuracy, emb.attribute_accuracy = masked_accuracy(emb, x_hold, hold_masks)
    return emb
