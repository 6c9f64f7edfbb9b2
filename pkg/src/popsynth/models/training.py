"""WGAN-GP and VAE training loops with optional distance regularizers.

The regularizers only enter the generator (WGAN) or the encoder/decoder
(VAE) update, computed on the relaxed generated batch against the training
sample, either on one-hot rows or through a frozen embedder.
"""
from __future__ import annotations

import contextlib
import logging
import math

import numpy as np

from .. import geometry
from ..diffcore import AdamState, DenseNetSpec, Parameters, Tensor, adam_step, forward, grad, init_params, no_grad
from ..diffcore import tensor as T
from ..embedder import Embedder, embed
from ..schema import AttributeSchema, as_records, encode
from .artifact import ModelArtifact, Network, finite_or_none
from .config import TrainConfig
from .losses import gradient_penalty, total_loss_vae, vae_losses, wgan_critic_loss, wgan_generator_loss

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, history: list[dict]):
        super().__init__(message)
        self.history = history


@contextlib.contextmanager
def frozen(params: Parameters):
    tensors = params.tensors()
    for t in tensors:
        t.requires_grad = False
    try:
        yield
    finally:
        for t in tensors:
            t.requires_grad = True


def _prepare(sample, schema: AttributeSchema, config: TrainConfig, embedder: Embedder | None):
    x_all = encode(as_records(sample, schema), schema)
    if x_all.shape[0] < 2:
        raise ValueError("training needs at least 2 sample rows")
    if config.space == "embedded":
        if embedder is None:
            raise ValueError("embedded space needs a trained embedder")
        if embedder.schema != schema:
            raise ValueError("embedder schema does not match the training schema")

        def to_space(x):
            return embed(embedder, x)
    else:
        def to_space(x):
            return x

    ref = None
    if config.gamma_bd or config.gamma_ad:
        ref = geometry.make_reference(
            to_space(x_all), config.space, config.ref_subsample, seed=config.seed
        )
    return x_all, to_space, ref


def _regularizers(fake: Tensor, to_space, ref, config: TrainConfig, row: dict):
    terms = []
    if config.gamma_bd:
        rbd = geometry.r_bd(to_space(fake), ref)
        row["R_BD"].append(rbd.item())
        terms.append(rbd * config.gamma_bd)
    if config.gamma_ad:
        rad = geometry.r_ad(to_space(fake), ref)
        row["R_AD"].append(rad.item())
        terms.append(rad * config.gamma_ad)
    return terms


def _close_epoch(epoch: int, acc: dict[str, list[float]], history: list[dict]) -> dict:
    row = {"epoch": epoch}
    for k, v in acc.items():
        row[k] = finite_or_none(float(np.mean(v))) if v else None
    history.append(row)
    bad = [k for k, v in acc.items() if v and not math.isfinite(float(np.mean(v)))]
    if bad:
        raise TrainingDiverged(f"non-finite {bad} at epoch {epoch}", history)
    return row


def _check(loss: Tensor, what: str, epoch: int, acc: dict, history: list[dict]) -> None:
    if not np.isfinite(loss.data).all():
        history.append({"epoch": epoch, **{k: finite_or_none(float(np.mean(v))) if v else None for k, v in acc.items()}})
        raise TrainingDiverged(f"non-finite {what} at epoch {epoch}", history)


@contextlib.contextmanager
def _guard(epoch: int, acc: dict, history: list[dict]):
    """Turn non-finite network outputs or losses into ``TrainingDiverged``."""
    try:
        yield
    except FloatingPointError as exc:
        history.append({"epoch": epoch, **{k: finite_or_none(float(np.mean(v))) if v else None
                                           for k, v in acc.items()}})
        raise TrainingDiverged(f"{exc} at epoch {epoch}", history) from exc


def _empty_acc() -> dict[str, list[float]]:
    return {k: [] for k in ("L_d", "L_g", "L_GP", "L_R", "L_KL", "R_BD", "R_AD")}


def train_wgan(sample, schema: AttributeSchema, config: TrainConfig | None = None,
               embedder: Embedder | None = None) -> ModelArtifact:
    """Train a WGAN-GP generator on ``sample`` records.

    One epoch is ``len(sample) // batch_size`` generator updates (at least
    one), each preceded by ``n_critic`` critic updates on random batches.
    """
    cfg = (config or TrainConfig()).resolved("wgan")
    x_all, to_space, ref = _prepare(sample, schema, cfg, embedder)
    n, m = x_all.shape[0], min(cfg.batch_size, x_all.shape[0])
    rng = np.random.default_rng(cfg.seed)

    g_spec = DenseNetSpec(
        [cfg.latent_dim, *cfg.hidden, schema.W], ["relu"] * len(cfg.hidden), head="block_softmax",
        blocks=schema.blocks, gumbel_tau=cfg.gumbel_tau if cfg.gumbel else None,
    )
    d_spec = DenseNetSpec([schema.W, *cfg.hidden, 1], ["leaky_relu"] * len(cfg.hidden), head="linear")
    g_params = init_params(g_spec, int(rng.integers(2**31)))
    d_params = init_params(d_spec, int(rng.integers(2**31)))
    g_opt = AdamState(lr=cfg.lr, beta1=cfg.adam_beta1, beta2=cfg.adam_beta2)
    d_opt = AdamState(lr=cfg.lr, beta1=cfg.adam_beta1, beta2=cfg.adam_beta2)
    noise_rng = rng if cfg.gumbel else None

    history: list[dict] = []
    steps = max(1, n // m)
    for epoch in range(cfg.epochs):
        acc = _empty_acc()
        with _guard(epoch, acc, history):
            for _ in range(steps):
                for _ in range(cfg.n_critic):
                    real = x_all[rng.choice(n, m, replace=False)]
                    z = rng.standard_normal((m, cfg.latent_dim))
                    with no_grad():
                        fake = forward(g_spec, g_params, z, noise_rng).data
                    l_d = wgan_critic_loss(forward(d_spec, d_params, real), forward(d_spec, d_params, fake))
                    l_gp = gradient_penalty(d_spec, d_params, real, fake, cfg.gp_lambda, rng)
                    loss = l_d + l_gp
                    _check(loss, "critic loss", epoch, acc, history)
                    grads = grad(loss, d_params.tensors())
                    adam_step(d_opt, d_params.tensors(), [g.data for g in grads])
                    acc["L_d"].append(l_d.item())
                    acc["L_GP"].append(l_gp.item())

                z = rng.standard_normal((m, cfg.latent_dim))
                fake = forward(g_spec, g_params, z, noise_rng)
                with frozen(d_params):
                    l_g = wgan_generator_loss(forward(d_spec, d_params, fake))
                    loss = l_g
                    for term in _regularizers(fake, to_space, ref, cfg, acc):
                        loss = loss + term
                    _check(loss, "generator loss", epoch, acc, history)
                    grads = grad(loss, g_params.tensors())
                adam_step(g_opt, g_params.tensors(), [g.data for g in grads])
                acc["L_g"].append(l_g.item())
        row = _close_epoch(epoch, acc, history)
        log.debug("wgan epoch %d %s", epoch, row)

    return ModelArtifact(
        kind="wgan", schema=schema, config=cfg,
        networks={"generator": Network(g_spec, g_params), "critic": Network(d_spec, d_params)},
        history=history, embedder=embedder if cfg.space == "embedded" else None,
        reference_rows=None if ref is None else ref.n,
    )


def train_vae(sample, schema: AttributeSchema, config: TrainConfig | None = None,
              embedder: Embedder | None = None) -> ModelArtifact:
    """Train a VAE on ``sample`` records with the reparameterization trick.

    Each epoch visits a fresh permutation of the sample in batches; a
    trailing batch with fewer than 2 rows is skipped.
    """
    cfg = (config or TrainConfig()).resolved("vae")
    x_all, to_space, ref = _prepare(sample, schema, cfg, embedder)
    n, m = x_all.shape[0], min(cfg.batch_size, x_all.shape[0])
    rng = np.random.default_rng(cfg.seed)

    e_spec = DenseNetSpec(
        [schema.W, *cfg.hidden, 2 * cfg.latent_dim], ["relu"] * len(cfg.hidden), head="gaussian"
    )
    dec_hidden = list(reversed(cfg.hidden))
    r_spec = DenseNetSpec(
        [cfg.latent_dim, *dec_hidden, schema.W], ["relu"] * len(dec_hidden), head="block_softmax",
        blocks=schema.blocks, gumbel_tau=cfg.gumbel_tau if cfg.gumbel else None,
    )
    e_params = init_params(e_spec, int(rng.integers(2**31)))
    r_params = init_params(r_spec, int(rng.integers(2**31)))
    params = e_params.tensors() + r_params.tensors()
    opt = AdamState(lr=cfg.lr, beta1=cfg.adam_beta1, beta2=cfg.adam_beta2)
    noise_rng = rng if cfg.gumbel else None

    history: list[dict] = []
    for epoch in range(cfg.epochs):
        acc = _empty_acc()
        order = rng.permutation(n)
        with _guard(epoch, acc, history):
            for lo in range(0, n, m):
                idx = order[lo:lo + m]
                if idx.shape[0] < 2:
                    continue
                x = x_all[idx]
                mu, logvar = forward(e_spec, e_params, x)
                eps = rng.standard_normal(mu.shape)
                z = mu + T.exp(logvar * 0.5) * eps
                x_hat = forward(r_spec, r_params, z, noise_rng)
                l_r, l_kl = vae_losses(x, x_hat, mu, logvar, cfg.beta)
                regs = _regularizers(x_hat, to_space, ref, cfg, acc)
                loss = total_loss_vae(l_r, l_kl)
                for term in regs:
                    loss = loss + term
                _check(loss, "VAE loss", epoch, acc, history)
                grads = grad(loss, params)
                adam_step(opt, params, [g.data for g in grads])
                acc["L_R"].append(l_r.item())
                acc["L_KL"].append(l_kl.item())
        row = _close_epoch(epoch, acc, history)
        log.debug("vae epoch %d %s", epoch, row)

    return ModelArtifact(
        kind="vae", schema=schema, config=cfg,
        networks={"encoder": Network(e_spec, e_params), "decoder": Network(r_spec, r_params)},
        history=history, embedder=embedder if cfg.space == "embedded" else None,
        reference_rows=None if ref is None else ref.n,
    )


def train(kind: str, sample, schema: AttributeSchema, config: TrainConfig | None = None,
          embedder: Embedder | None = None) -> ModelArtifact:
    if kind == "wgan":
        return train_wgan(sample, schema, config, embedder)
    if kind == "vae":
        return train_vae(sample, schema, config, embedder)
    raise ValueError(f"unknown model kind {kind!r}")
