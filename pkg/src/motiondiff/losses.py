"""Training objectives: per-head regression terms, smoothness regulation,
adversarial terms and the weighted total.

Reduction conventions (documented because they fix the meaning of the loss
weights): the three head losses average the squared error over the batch and
all tensor elements; the velocity/acceleration terms take the squared L2 norm
of each per-joint 3-vector difference and average that over batch, frames and
joints. Adversarial terms average per-clip squared score errors over the batch
(least-squares GAN).
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import torch

__all__ = [
    "LossWeights",
    "LossReport",
    "loss_noise",
    "loss_foot",
    "loss_root",
    "loss_velocity",
    "loss_acceleration",
    "loss_disc",
    "loss_generator_adv",
    "total_loss",
]


@dataclass(frozen=True)
class LossWeights:
    """Non-negative weights for (noise, foot, root, adversarial, vel, acc)."""

    noise: float = 1.0
    foot: float = 1.0
    root: float = 1.0
    disc: float = 1.0
    vel: float = 0.01
    acc: float = 0.01

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (v >= 0.0 and v == v and v != float("inf")):
                raise ValueError(f"weight {f.name} must be finite and >= 0, got {v}")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "LossWeights":
        return cls(**{k: float(v) for k, v in d.items()})


@dataclass
class LossReport:
    """Per-term values plus the weighted total; tensor or float fields."""

    noise: object = 0.0
    foot: object = 0.0
    root: object = 0.0
    disc: object = 0.0
    vel: object = 0.0
    acc: object = 0.0
    total: object = 0.0

    def as_floats(self) -> "LossReport":
        def f(v):
            return float(v.detach()) if torch.is_tensor(v) else float(v)

        return LossReport(*(f(getattr(self, fl.name)) for fl in fields(self)))

    def to_dict(self) -> dict:
        return {fl.name: getattr(self, fl.name) for fl in fields(self)}


def _mse(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")
    return (a - b).square().mean()


def loss_noise(eps: torch.Tensor, eps_hat: torch.Tensor) -> torch.Tensor:
    """Mean squared error between true and predicted noise."""
    return _mse(eps, eps_hat)


def loss_foot(f: torch.Tensor, f_hat: torch.Tensor) -> torch.Tensor:
    """MSE between contact labels and predicted contact probabilities."""
    return _mse(f, f_hat)


def loss_root(r: torch.Tensor, r_hat: torch.Tensor) -> torch.Tensor:
    """MSE between true and predicted root trajectory channels."""
    return _mse(r, r_hat)


def loss_velocity(x0_hat: torch.Tensor) -> torch.Tensor:
    """Frame-to-frame smoothness of reconstructed rotations.

    ``x0_hat`` is (..., F, J, 3) with F >= 2. Per-joint difference vectors are
    reduced by squared norm, then averaged over every remaining axis.
    """
    if x0_hat.shape[-3] < 2:
        raise ValueError("need at least 2 frames")
    d = x0_hat[..., 1:, :, :] - x0_hat[..., :-1, :, :]
    return d.square().sum(dim=-1).mean()


def loss_acceleration(x0_hat: torch.Tensor) -> torch.Tensor:
    """Second-difference smoothness of reconstructed rotations (F >= 3)."""
    if x0_hat.shape[-3] < 3:
        raise ValueError("need at least 3 frames")
    d = x0_hat[..., 2:, :, :] - 2.0 * x0_hat[..., 1:-1, :, :] + x0_hat[..., :-2, :, :]
    return d.square().sum(dim=-1).mean()


def _weighted_mean(per_clip: torch.Tensor, clip_weights) -> torch.Tensor:
    if clip_weights is None:
        return per_clip.mean()
    w = clip_weights.to(per_clip.dtype).reshape(per_clip.shape)
    return (w * per_clip).mean()


def loss_disc(disc, real, fake, clip_weights=None) -> torch.Tensor:
    """Critic objective: push real scores to 1 and fake scores to 0.

    ``real``/``fake`` are (rotations, root, contacts) triples. The fake triple
    must already be detached from the generator graph; this loss is meant to
    update the critic only. ``clip_weights`` optionally scales each clip's
    contribution (used to fade adversarial pressure with the noise level of
    the reconstruction a fake was derived from).
    """
    d_real = disc(*real)
    d_fake = disc(*fake)
    return _weighted_mean((d_real - 1.0).square(), clip_weights) + _weighted_mean(
        d_fake.square(), clip_weights
    )


def loss_generator_adv(disc, fake, clip_weights=None) -> torch.Tensor:
    """Non-saturating generator term: push critic scores on fakes toward 1."""
    return _weighted_mean((disc(*fake) - 1.0).square(), clip_weights)


def total_loss(terms: LossReport | dict, weights: LossWeights) -> LossReport:
    """Weighted sum of the six terms; works on floats and on tensors alike."""
    if isinstance(terms, LossReport):
        terms = terms.to_dict()
    get = lambda k: terms.get(k, 0.0)
    total = (
        weights.noise * get("noise")
        + weights.foot * get("foot")
        + weights.root * get("root")
        + weights.disc * get("disc")
        + weights.vel * get("vel")
        + weights.acc * get("acc")
    )
    return LossReport(
        noise=get("noise"),
        foot=get("foot"),
        root=get("root"),
        disc=get("disc"),
        vel=get("vel"),
        acc=get("acc"),
        total=total,
    )
