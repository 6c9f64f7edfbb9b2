"""Generative models: WGAN-GP and VAE over one-hot records."""
from .artifact import ModelArtifact, Network, generate, generate_relaxed, load_artifact, write_history_csv
from .config import TrainConfig
from .losses import (
    gradient_penalty,
    interpolate,
    total_loss_vae,
    total_loss_wgan,
    vae_losses,
    wgan_critic_loss,
    wgan_generator_loss,
)
from .training import TrainingDiverged, train, train_vae, train_wgan

__all__ = [
    "ModelArtifact", "Network", "TrainConfig", "TrainingDiverged", "generate", "generate_relaxed",
    "gradient_penalty", "interpolate", "load_artifact", "total_loss_vae", "total_loss_wgan", "train",
    "train_vae", "train_wgan", "vae_losses", "wgan_critic_loss", "wgan_generator_loss", "write_history_csv",
]
