"""Dense feed-forward networks built on the autodiff tensors."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import tensor as T
from .tensor import Tensor

ACTIVATIONS = ("relu", "leaky_relu", "tanh", "sigmoid")
HEADS = ("linear", "block_softmax", "gaussian")


@dataclass
class DenseNetSpec:
    """Layer widths ``[in, hidden..., out]`` plus activations and output head.

    ``head="block_softmax"`` needs ``blocks`` (column ranges of the one-hot
    layout). ``head="gaussian"`` splits the last layer into mean and
    log-variance halves, so the final width must be even.
    """

    widths: list[int]
    activations: list[str] = field(default_factory=list)
    head: str = "linear"
    blocks: list[tuple[int, int]] | None = None
    gumbel_tau: float | None = None

    def __post_init__(self):
        self.widths = [int(w) for w in self.widths]
        if len(self.widths) < 2:
            raise ValueError("a network needs at least one layer (two widths)")
        if any(w <= 0 for w in self.widths):
            raise ValueError(f"layer widths must be positive: {self.widths}")
        n_hidden = len(self.widths) - 2
        if not self.activations:
            self.activations = ["leaky_relu"] * n_hidden
        if len(self.activations) != n_hidden:
            raise ValueError(f"expected {n_hidden} activations, got {len(self.activations)}")
        for act in self.activations:
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")
        if self.head not in HEADS:
            raise ValueError(f"unknown head {self.head!r}")
        if self.head == "block_softmax":
            if not self.blocks:
                raise ValueError("block_softmax head needs a block layout")
            self.blocks = [(int(lo), int(hi)) for lo, hi in self.blocks]
            if self.blocks[-1][1] != self.widths[-1]:
                raise ValueError("block layout does not cover the output width")
        if self.head == "gaussian" and self.widths[-1] % 2:
            raise ValueError("gaussian head needs an even output width")

    @property
    def n_in(self) -> int:
        return self.widths[0]

    @property
    def n_out(self) -> int:
        return self.widths[-1]

    def to_dict(self) -> dict:
        return {
            "widths": self.widths,
            "activations": self.activations,
            "head": self.head,
            "blocks": [list(b) for b in self.blocks] if self.blocks else None,
            "gumbel_tau": self.gumbel_tau,
        }

    @classmethod
    def from_dict(cls, d: dict) -> DenseNetSpec:
        blocks = d.get("blocks")
        return cls(
            widths=list(d["widths"]),
            activations=list(d.get("activations") or []),
            head=d.get("head", "linear"),
            blocks=[tuple(b) for b in blocks] if blocks else None,
            gumbel_tau=d.get("gumbel_tau"),
        )


@dataclass
class Parameters:
    """Weight matrices and bias vectors, one pair per layer."""

    weights: list[Tensor]
    biases: list[Tensor]
    seed: int | None = None

    def tensors(self) -> list[Tensor]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def arrays(self) -> list[np.ndarray]:
        return [t.data for t in self.tensors()]

    def copy(self) -> Parameters:
        return Parameters(
            [Tensor(w.data.copy(), requires_grad=True) for w in self.weights],
            [Tensor(b.data.copy(), requires_grad=True) for b in self.biases],
            self.seed,
        )

    def to_dict(self) -> dict:
        layers = []
        for w, b in zip(self.weights, self.biases):
            layers.append({
                "weight": {"shape": list(w.shape), "data": w.data.ravel().tolist()},
                "bias": {"shape": list(b.shape), "data": b.data.ravel().tolist()},
            })
        return {"seed": self.seed, "layers": layers}

    @classmethod
    def from_dict(cls, d: dict) -> Parameters:
        weights, biases = [], []
        for layer in d["layers"]:
            w, b = layer["weight"], layer["bias"]
            weights.append(Tensor(np.asarray(w["data"], dtype=np.float64).reshape(w["shape"]), True))
            biases.append(Tensor(np.asarray(b["data"], dtype=np.float64).reshape(b["shape"]), True))
        return cls(weights, biases, d.get("seed"))


def init_params(spec: DenseNetSpec, seed: int) -> Parameters:
    """Uniform fan-in scaled initialisation (Kaiming style), zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.widths[:-1], spec.widths[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(Tensor(rng.uniform(-bound, bound, size=(fan_in, fan_out)), requires_grad=True))
        biases.append(Tensor(np.zeros((1, fan_out)), requires_grad=True))
    return Parameters(weights, biases, seed)


def _activate(x: Tensor, name: str) -> Tensor:
    if name == "leaky_relu":
        return T.leaky_relu(x, 0.2)
    if name == "relu":
        return T.relu(x)
    if name == "tanh":
        return T.tanh(x)
    return T.sigmoid(x)


def check_shapes(spec: DenseNetSpec, params: Parameters) -> None:
    if len(params.weights) != len(spec.widths) - 1:
        raise ValueError("parameter layer count does not match the network spec")
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        expect = (spec.widths[i], spec.widths[i + 1])
        if w.shape != expect or b.shape != (1, expect[1]):
            raise ValueError(f"layer {i}: weight {w.shape} / bias {b.shape}, expected {expect}")


def forward_logits(spec: DenseNetSpec, params: Parameters, x) -> Tensor:
    """Pre-head output of the network (last affine layer, no head)."""
    x = T.as_tensor(x)
    if x.ndim != 2 or x.shape[1] != spec.n_in:
        raise ValueError(f"input shape {x.shape} does not match input width {spec.n_in}")
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if i < last:
            h = _activate(h, spec.activations[i])
    return h


def forward(spec: DenseNetSpec, params: Parameters, x, rng: np.random.Generator | None = None):
    """Network output.

    Returns a tensor for ``linear`` and ``block_softmax`` heads and a
    ``(mean, log_variance)`` pair for the ``gaussian`` head. When the spec sets
    ``gumbel_tau`` and an ``rng`` is given, Gumbel noise is added to the logits
    of a softmax head before tempering.
    """
    h = forward_logits(spec, params, x)
    if not np.all(np.isfinite(h.data)):
        raise FloatingPointError("non-finite values in network output")
    if spec.head == "linear":
        return h
    if spec.head == "gaussian":
        d = spec.n_out // 2
        return h[:, :d], h[:, d:]
    if spec.gumbel_tau is not None and rng is not None:
        u = rng.uniform(1e-12, 1.0, size=h.shape)
        h = (h + (-np.log(-np.log(u)))) * (1.0 / spec.gumbel_tau)
    return T.block_softmax(h, spec.blocks)


def input_gradient_norm(spec: DenseNetSpec, params: Parameters, x) -> Tensor:
    """Per-row ``||d critic(x_i) / d x_i||_2`` as a differentiable (m, 1) tensor.

    The critic must emit one scalar per row. Rows are independent, so the
    gradient of the summed output gives every row's own input gradient.
    """
    if spec.head != "linear" or spec.n_out != 1:
        raise ValueError("input gradient norm needs a scalar-output linear-head critic")
    x_leaf = Tensor(np.asarray(T.as_tensor(x).data), requires_grad=True)
    with T.set_grad_enabled(True):
        out = forward(spec, params, x_leaf)
        (g,) = T.grad(out.sum(), [x_leaf], create_graph=True)
    sq = (g * g).sum(axis=1, keepdims=True)
    if np.any(sq.data == 0.0):
        raise T.GraphError("zero input-gradient norm; its derivative is undefined")
    return T.sqrt(sq)


def n_params(params: Parameters) -> int:
    return int(sum(a.size for a in params.arrays()))


def layer_widths(n_in: int, hidden: Sequence[int], n_out: int) -> list[int]:
    return [int(n_in), *[int(h) for h in hidden], int(n_out)]
