"""Loss terms of WGAN-GP and the VAE, plus the regularized totals."""
from __future__ import annotations

import numpy as np

from ..diffcore import DenseNetSpec, Parameters, input_gradient_norm
from ..diffcore import tensor as T
from ..diffcore.tensor import Tensor

LOG_FLOOR = 1e-12


def wgan_critic_loss(d_real, d_fake) -> Tensor:
    """mean(-D(x) + D(G(z)))."""
    d_real, d_fake = T.as_tensor(d_real), T.as_tensor(d_fake)
    if d_real.shape[0] != d_fake.shape[0]:
        raise ValueError("real and fake critic outputs need the same row count")
    return (d_fake - d_real).mean()


def wgan_generator_loss(d_fake) -> Tensor:
    """mean(-D(G(z)))."""
    return -T.as_tensor(d_fake).mean()


def interpolate(real: np.ndarray, fake: np.ndarray, rng) -> np.ndarray:
    """alpha * fake + (1 - alpha) * real with one alpha ~ U[0, 1] per row."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    alpha = rng.random((real.shape[0], 1))
    return alpha * fake + (1.0 - alpha) * real


def gradient_penalty(critic: DenseNetSpec, params: Parameters, real, fake, lam: float, rng) -> Tensor:
    """lam * mean((||grad_x D(x_interp)||_2 - 1)^2), differentiable in the critic parameters."""
    real = np.asarray(T.as_tensor(real).data)
    fake = np.asarray(T.as_tensor(fake).data)
    if real.shape != fake.shape:
        raise ValueError(f"real {real.shape} and fake {fake.shape} batches differ in shape")
    if lam < 0:
        raise ValueError("penalty weight must be non-negative")
    x_mix = interpolate(real, fake, rng)
    norms = input_gradient_norm(critic, params, x_mix)
    return ((norms - 1.0) ** 2).mean() * float(lam)


def vae_losses(x, x_hat, mu, logvar, beta: float = 1.0) -> tuple[Tensor, Tensor]:
    """Reconstruction cross-entropy and beta-weighted KL to N(0, I), both batch means.

    recon = -(1/m) sum x * log(x_hat); kl = (beta/m) sum 0.5 (mu^2 + sigma^2 - 1 - log sigma^2).
    """
    x = np.asarray(T.as_tensor(x).data)
    x_hat, mu, logvar = T.as_tensor(x_hat), T.as_tensor(mu), T.as_tensor(logvar)
    if x.shape != x_hat.shape or mu.shape != logvar.shape or mu.shape[0] != x.shape[0]:
        raise ValueError("VAE loss inputs have inconsistent shapes")
    m = x.shape[0]
    recon = -(T.log(T.clamp_min(x_hat, LOG_FLOOR)) * x).sum() * (1.0 / m)
    kl = ((mu * mu) + T.exp(logvar) - 1.0 - logvar).sum() * (0.5 * beta / m)
    if not (np.isfinite(recon.data) and np.isfinite(kl.data)):
        raise FloatingPointError("non-finite VAE loss")
    return recon, kl


def total_loss_wgan(l_d, l_g, l_gp, r_bd=0.0, r_ad=0.0, gamma_bd: float = 0.0, gamma_ad: float = 0.0):
    """L_d + L_g + L_GP + gamma_bd * R_BD + gamma_ad * R_AD."""
    total = l_d + l_g + l_gp
    if gamma_bd:
        total = total + gamma_bd * r_bd
    if gamma_ad:
        total = total + gamma_ad * r_ad
    return total


def total_loss_vae(l_r, l_kl, r_bd=0.0, r_ad=0.0, gamma_bd: float = 0.0, gamma_ad: float = 0.0):
    """L_R + L_KL + gamma_bd * R_BD + gamma_ad * R_AD."""
    total = l_r + l_kl
    if gamma_bd:
        total = total + gamma_bd * r_bd
    if gamma_ad:
        total = total + gamma_ad * r_ad
    return total
