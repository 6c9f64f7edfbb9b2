from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

DEFAULT_LR = {"wgan": 1e-4, "vae": 1e-3}
DEFAULT_BETAS = {"wgan": (0.5, 0.9), "vae": (0.9, 0.999)}
# a WGAN generator emits near-one-hot rows; a VAE decoder emits categorical probabilities
DEFAULT_DISCRETIZE = {"wgan": "argmax", "vae": "sample"}


@dataclass
class LatentSpec:
    dim: int = 16

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("latent dimension must be at least 1")


@dataclass
class TrainConfig:
    """Hyperparameters shared by the WGAN-GP and VAE training loops.

    ``lr``, ``adam_beta1``, ``adam_beta2`` and ``discretize_mode`` left as
    ``None`` take the per-model defaults in ``DEFAULT_LR``, ``DEFAULT_BETAS``
    and ``DEFAULT_DISCRETIZE``.
    """

    batch_size: int = 256
    epochs: int = 200
    lr: float | None = None
    adam_beta1: float | None = None
    adam_beta2: float | None = None
    n_critic: int = 5
    gp_lambda: float = 10.0
    beta: float = 1.0
    gamma_bd: float = 0.0
    gamma_ad: float = 0.0
    space: str = "discrete"
    ref_subsample: int | None = None
    discretize_mode: str | None = None
    latent_dim: int = 16
    hidden: list[int] = field(default_factory=lambda: [128, 128])
    gumbel: bool = False
    gumbel_tau: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch size must be at least 2")
        if self.n_critic < 1:
            raise ValueError("n_critic must be at least 1")
        for name in ("gp_lambda", "beta", "gamma_bd", "gamma_ad"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.space not in ("discrete", "embedded"):
            raise ValueError(f"unknown space {self.space!r}")
        if self.discretize_mode not in (None, "argmax", "sample"):
            raise ValueError(f"unknown discretize mode {self.discretize_mode!r}")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        LatentSpec(self.latent_dim)
        self.hidden = [int(h) for h in self.hidden]

    def resolved(self, kind: str) -> TrainConfig:
        out = TrainConfig(**asdict(self))
        if out.lr is None:
            out.lr = DEFAULT_LR[kind]
        b1, b2 = DEFAULT_BETAS[kind]
        out.adam_beta1 = b1 if out.adam_beta1 is None else out.adam_beta1
        out.adam_beta2 = b2 if out.adam_beta2 is None else out.adam_beta2
        if out.discretize_mode is None:
            out.discretize_mode = DEFAULT_DISCRETIZE[kind]
        return out

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> TrainConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown training options: {sorted(unknown)}")
        return cls(**d)
