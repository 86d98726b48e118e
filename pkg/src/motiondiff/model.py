"""Learnable components: the conditional multi-head denoiser and the critic.

The denoiser is a 1-D U-Net over the frame axis with self-attention at the
bottleneck and skip connections by concatenation. Content id, style id and the
diffusion timestep are embedded (learned one-hot projections plus a sinusoidal
timestep table) and injected additively into every residual block. Three heads
branch off the shared final feature map: predicted noise for the rotation
channels, the root trajectory and foot-contact logits.

The critic scores whether a (rotations, root, contacts) triple looks like a
coherent real clip: a 1-D convolutional encoder (3 layers, stride 2), global
average pooling and a linear map to one scalar per clip.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

__all__ = [
    "ModelConfig",
    "ConditioningInfo",
    "DenoiserOutput",
    "ConditionEmbedding",
    "Denoiser",
    "Discriminator",
    "sinusoidal_embedding",
    "one_hot",
]


@dataclass(frozen=True)
class ModelConfig:
    num_joints: int
    num_feet: int
    content_classes: int
    style_classes: int
    timesteps: int
    base_width: int = 64
    attention_heads: int = 4

    @property
    def rotation_channels(self) -> int:
        return self.num_joints * 3

    def to_dict(self) -> dict:
        return {
            "num_joints": self.num_joints,
            "num_feet": self.num_feet,
            "content_classes": self.content_classes,
            "style_classes": self.style_classes,
            "timesteps": self.timesteps,
            "base_width": self.base_width,
            "attention_heads": self.attention_heads,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**{k: int(v) for k, v in d.items()})


@dataclass
class ConditioningInfo:
    """Labels and timestep for one batch; ints broadcast to every clip."""

    content_id: torch.Tensor | int
    style_id: torch.Tensor | int
    timestep: torch.Tensor | int

    def batched(self, batch: int, device=None) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        def expand(v):
            if torch.is_tensor(v):
                return v.long().reshape(-1).to(device)
            return torch.full((batch,), int(v), dtype=torch.long, device=device)

        return expand(self.content_id), expand(self.style_id), expand(self.timestep)


@dataclass
class DenoiserOutput:
    eps_hat: torch.Tensor  # (B, F, J, 3), same shape as the input rotations
    root_hat: torch.Tensor  # (B, F, 4)
    foot_logits: torch.Tensor  # (B, F, feet)


def one_hot(ids: torch.Tensor, num_classes: int) -> torch.Tensor:
    if bool((ids < 0).any()) or bool((ids >= num_classes).any()):
        raise ValueError(f"class id out of range [0, {num_classes})")
    return F.one_hot(ids.long(), num_classes).float()


def sinusoidal_embedding(t: torch.Tensor, dim: int, max_period: float = 10000.0) -> torch.Tensor:
    """Transformer-style sin/cos position features for integer timesteps."""
    half = dim // 2
    freqs = torch.exp(
        -math.log(max_period) * torch.arange(half, dtype=torch.float32, device=t.device) / half
    )
    args = t.float()[:, None] * freqs[None, :]
    emb = torch.cat([torch.sin(args), torch.cos(args)], dim=-1)
    if dim % 2:
        emb = F.pad(emb, (0, 1))
    return emb


class ConditionEmbedding(nn.Module):
    """Concatenated content/style projections and timestep features -> one vector."""

    def __init__(self, cfg: ModelConfig, cond_dim: int):
        super().__init__()
        if cond_dim % 4:
            raise ValueError("cond_dim must be divisible by 4")
        part = cond_dim // 4
        self.cfg = cfg
        self.content_proj = nn.Linear(cfg.content_classes, part)
        self.style_proj = nn.Linear(cfg.style_classes, part)
        self.time_dim = 2 * part
        self.time_proj = nn.Linear(self.time_dim, 2 * part)
        self.mix = nn.Linear(cond_dim, cond_dim)

    def forward(self, content_id: torch.Tensor, style_id: torch.Tensor, timestep: torch.Tensor) -> torch.Tensor:
        if bool((timestep < 1).any()) or bool((timestep > self.cfg.timesteps).any()):
            raise ValueError(f"timestep out of range [1, {self.cfg.timesteps}]")
        c = self.content_proj(one_hot(content_id, self.cfg.content_classes))
        s = self.style_proj(one_hot(style_id, self.cfg.style_classes))
        t = self.time_proj(sinusoidal_embedding(timestep, self.time_dim).to(c.dtype))
        return self.mix(F.silu(torch.cat([c, s, t], dim=-1)))


def _groups(channels: int) -> int:
    for g in (8, 4, 2):
        if channels % g == 0:
            return g
    return 1


class _ResBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, cond_dim: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(_groups(in_ch), in_ch)
        self.conv1 = nn.Conv1d(in_ch, out_ch, 3, padding=1)
        self.cond = nn.Linear(cond_dim, out_ch)
        self.norm2 = nn.GroupNorm(_groups(out_ch), out_ch)
        self.conv2 = nn.Conv1d(out_ch, out_ch, 3, padding=1)
        self.skip = nn.Conv1d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()

    def forward(self, x: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.cond(cond)[:, :, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return h + self.skip(x)


class _SelfAttention(nn.Module):
    def __init__(self, channels: int, heads: int):
        super().__init__()
        if channels % heads:
            raise ValueError(f"channels {channels} not divisible by heads {heads}")
        self.heads = heads
        self.norm = nn.GroupNorm(_groups(channels), channels)
        self.qkv = nn.Conv1d(channels, channels * 3, 1)
        self.out = nn.Conv1d(channels, channels, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, c, f = x.shape
        q, k, v = self.qkv(self.norm(x)).reshape(b, 3, self.heads, c // self.heads, f).unbind(1)
        attn = torch.softmax(torch.einsum("bhdi,bhdj->bhij", q, k) / math.sqrt(c // self.heads), dim=-1)
        h = torch.einsum("bhij,bhdj->bhdi", attn, v).reshape(b, c, f)
        return x + self.out(h)


class Denoiser(nn.Module):
    """Multi-head conditional denoiser over 32-frame motion windows."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        w = cfg.base_width
        cond_dim = 4 * w
        self.embed = ConditionEmbedding(cfg, cond_dim)
        c_in = cfg.rotation_channels

        self.stem = nn.Conv1d(c_in, w, 3, padding=1)
        self.enc0 = _ResBlock(w, w, cond_dim)
        self.down0 = nn.Conv1d(w, 2 * w, 3, stride=2, padding=1)
        self.enc1 = _ResBlock(2 * w, 2 * w, cond_dim)
        self.down1 = nn.Conv1d(2 * w, 2 * w, 3, stride=2, padding=1)

        self.mid1 = _ResBlock(2 * w, 2 * w, cond_dim)
        self.attn = _SelfAttention(2 * w, cfg.attention_heads)
        self.mid2 = _ResBlock(2 * w, 2 * w, cond_dim)

        self.up1 = nn.ConvTranspose1d(2 * w, 2 * w, 4, stride=2, padding=1)
        self.dec1 = _ResBlock(4 * w, 2 * w, cond_dim)
        self.up0 = nn.ConvTranspose1d(2 * w, w, 4, stride=2, padding=1)
        self.dec0 = _ResBlock(2 * w, w, cond_dim)

        self.out_norm = nn.GroupNorm(_groups(w), w)
        self.head_eps = nn.Conv1d(w, c_in, 1)
        self.head_root = nn.Conv1d(w, 4, 1)
        self.head_foot = nn.Conv1d(w, cfg.num_feet, 1)
        # conditioning-dependent gain on a direct input->noise-head skip; at
        # high noise levels the optimal prediction is close to a scaled copy
        # of the input, and this path lets that be learned per channel
        self.skip_gain = nn.Linear(4 * w, c_in)
        # zero-init heads: predictions start at 0 so early training immediately
        # chases the residual instead of un-learning random projections
        for head in (self.head_eps, self.head_root, self.head_foot, self.skip_gain):
            nn.init.zeros_(head.weight)
            nn.init.zeros_(head.bias)

    def forward(self, x_t: torch.Tensor, cond: ConditioningInfo) -> DenoiserOutput:
        if x_t.ndim != 4 or x_t.shape[2] != self.cfg.num_joints or x_t.shape[3] != 3:
            raise ValueError(
                f"x_t must be (B, F, {self.cfg.num_joints}, 3), got {tuple(x_t.shape)}"
            )
        b, frames = x_t.shape[0], x_t.shape[1]
        if frames % 4:
            raise ValueError("frame count must be divisible by 4")
        content, style, timestep = cond.batched(b, device=x_t.device)
        emb = self.embed(content, style, timestep).to(x_t.dtype)

        x_flat = x_t.reshape(b, frames, -1).transpose(1, 2)  # (B, C, F)
        h = self.stem(x_flat)
        s0 = self.enc0(h, emb)
        h = self.down0(s0)
        s1 = self.enc1(h, emb)
        h = self.down1(s1)

        h = self.mid2(self.attn(self.mid1(h, emb)), emb)

        h = self.dec1(torch.cat([self.up1(h), s1], dim=1), emb)
        h = self.dec0(torch.cat([self.up0(h), s0], dim=1), emb)
        h = F.silu(self.out_norm(h))

        eps_flat = self.head_eps(h) + self.skip_gain(emb)[:, :, None] * x_flat
        eps = eps_flat.transpose(1, 2).reshape(b, frames, self.cfg.num_joints, 3)
        root = self.head_root(h).transpose(1, 2)
        foot = self.head_foot(h).transpose(1, 2)
        return DenoiserOutput(eps_hat=eps, root_hat=root, foot_logits=foot)


class Discriminator(nn.Module):
    """Scores the coherence of combined (rotations, root, contact) clips."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        w = cfg.base_width
        c_in = cfg.rotation_channels + 4 + cfg.num_feet
        self.net = nn.Sequential(
            nn.Conv1d(c_in, w, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2),
            nn.Conv1d(w, 2 * w, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2),
            nn.Conv1d(2 * w, 2 * w, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2),
        )
        self.out = nn.Linear(2 * w, 1)
        # zero-init the score head: the critic starts neutral, so adversarial
        # pressure on the denoiser ramps up only as the critic learns
        nn.init.zeros_(self.out.weight)
        nn.init.zeros_(self.out.bias)

    def forward(
        self, x0_like: torch.Tensor, root_like: torch.Tensor, foot_like: torch.Tensor
    ) -> torch.Tensor:
        b, frames = x0_like.shape[0], x0_like.shape[1]
        if root_like.shape[:2] != (b, frames) or foot_like.shape[:2] != (b, frames):
            raise ValueError("rotation, root and foot inputs must share (B, F)")
        h = torch.cat(
            [x0_like.reshape(b, frames, -1), root_like, foot_like], dim=-1
        ).transpose(1, 2)
        h = self.net(h).mean(dim=-1)
        return self.out(h).squeeze(-1)
