"""Trained-model container, JSON persistence and generation."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..diffcore import DenseNetSpec, Parameters, forward, no_grad
from ..embedder import Embedder
from ..schema import AttributeSchema, discretize
from .config import TrainConfig

HISTORY_COLUMNS = ["epoch", "L_d", "L_g", "L_GP", "L_R", "L_KL", "R_BD", "R_AD"]
GEN_CHUNK = 8192


@dataclass
class Network:
    spec: DenseNetSpec
    params: Parameters

    def to_dict(self) -> dict:
        return {"spec": self.spec.to_dict(), "params": self.params.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> Network:
        return cls(DenseNetSpec.from_dict(d["spec"]), Parameters.from_dict(d["params"]))


@dataclass
class ModelArtifact:
    """A trained WGAN (generator + critic) or VAE (encoder + decoder)."""

    kind: str
    schema: AttributeSchema
    config: TrainConfig
    networks: dict[str, Network]
    history: list[dict] = field(default_factory=list)
    embedder: Embedder | None = None
    embedder_ref: str | None = None
    reference_rows: int | None = None

    @property
    def latent_dim(self) -> int:
        return self.config.latent_dim

    @property
    def generator(self) -> Network:
        return self.networks["generator" if self.kind == "wgan" else "decoder"]

    def to_dict(self, inline_embedder: bool = True) -> dict:
        d = {
            "kind": self.kind,
            "schema": self.schema.to_dict(),
            "latent": {"dim": self.latent_dim, "prior": "standard_normal"},
            "config": self.config.to_dict(),
            "networks": {k: v.to_dict() for k, v in self.networks.items()},
            "history": self.history,
            "reference_rows": self.reference_rows,
            "embedder_ref": self.embedder_ref,
        }
        if inline_embedder and self.embedder is not None:
            d["embedder"] = self.embedder.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ModelArtifact:
        emb = Embedder.from_dict(d["embedder"]) if d.get("embedder") else None
        return cls(
            kind=d["kind"],
            schema=AttributeSchema.from_dict(d["schema"]),
            config=TrainConfig.from_dict(d["config"]),
            networks={k: Network.from_dict(v) for k, v in d["networks"].items()},
            history=list(d.get("history", [])),
            embedder=emb,
            embedder_ref=d.get("embedder_ref"),
            reference_rows=d.get("reference_rows"),
        )

    def save(self, path: str | Path, inline_embedder: bool = True) -> None:
        Path(path).write_text(json.dumps(self.to_dict(inline_embedder)) + "\n", encoding="utf-8")


def load_artifact(path: str | Path) -> ModelArtifact:
    art = ModelArtifact.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    if art.embedder is None and art.embedder_ref:
        ref = Path(art.embedder_ref)
        if not ref.is_absolute():
            ref = Path(path).parent / ref
        art.embedder = Embedder.from_dict(json.loads(ref.read_text(encoding="utf-8")))
    return art


def write_history_csv(path: str | Path, history: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HISTORY_COLUMNS)
        for row in history:
            writer.writerow(["" if row.get(c) is None else repr(row[c]) for c in HISTORY_COLUMNS])


def generate_relaxed(artifact: ModelArtifact, n: int, seed) -> np.ndarray:
    """Generator / decoder simplex output for ``n`` prior draws.

    The latent matrix is drawn in one call, so row i is the same for any
    ``n > i`` with the same seed.
    """
    if n < 1:
        raise ValueError("number of generated rows must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    z = rng.standard_normal((int(n), artifact.latent_dim))
    net = artifact.generator
    noise_rng = rng if net.spec.gumbel_tau is not None else None
    out = np.empty((int(n), artifact.schema.W))
    with no_grad():
        for lo in range(0, int(n), GEN_CHUNK):
            out[lo:lo + GEN_CHUNK] = forward(net.spec, net.params, z[lo:lo + GEN_CHUNK], noise_rng).data
    return out


def generate(artifact: ModelArtifact, n: int, seed, mode: str | None = None) -> np.ndarray:
    """``n`` records: prior draw, generator forward pass, discretization."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    relaxed = generate_relaxed(artifact, n, rng)
    return discretize(relaxed, artifact.schema, mode or artifact.config.discretize_mode, rng)


def finite_or_none(x: float | None) -> float | None:
    if x is None or not math.isfinite(x):
        return None
    return float(x)
