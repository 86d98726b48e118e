"""Generation: iterate the reverse chain from Gaussian noise, conditioned on
(content, style), and assemble motion clips from the three heads."""

from __future__ import annotations

import torch

from .model import ConditioningInfo, Denoiser
from .motiondata import WINDOW_LEN, DatasetStats, MotionClip
from .schedule import reverse_step
from .trainer import TrainState

__all__ = ["denoiser_for_sampling", "sample", "sample_trajectory"]

FOOT_THRESHOLD = 0.5


def denoiser_for_sampling(state: TrainState, use_ema: bool = True) -> Denoiser:
    """A detached copy of the denoiser, loaded with EMA weights by default."""
    model = Denoiser(state.model_cfg)
    source = state.ema if use_ema else [p.detach() for p in state.denoiser.parameters()]
    with torch.no_grad():
        for p, s in zip(model.parameters(), source):
            p.copy_(s)
    model.eval()
    return model


def _check_ids(state: TrainState, content_id: int, style_id: int) -> None:
    c, s = state.model_cfg.content_classes, state.model_cfg.style_classes
    if not (0 <= content_id < c):
        raise ValueError(f"content_id must lie in [0, {c}), got {content_id}")
    if not (0 <= style_id < s):
        raise ValueError(f"style_id must lie in [0, {s}), got {style_id}")


def _reverse_chain(
    model: Denoiser,
    state: TrainState,
    content_id: int,
    style_id: int,
    num_clips: int,
    rng: torch.Generator,
    record_every: int | None = None,
):
    sched = state.sched
    shape = (num_clips, WINDOW_LEN, state.model_cfg.num_joints, 3)
    x = torch.randn(shape, generator=rng)
    snapshots = []
    out = None
    with torch.no_grad():
        for t in range(sched.T, 0, -1):
            if record_every is not None and (sched.T - t) % record_every == 0:
                snapshots.append(x.clone())
            out = model(x, ConditioningInfo(content_id, style_id, t))
            z = torch.zeros(shape) if t == 1 else torch.randn(shape, generator=rng)
            x = reverse_step(x, t, out.eps_hat, z, sched)
    if record_every is not None:
        snapshots.append(x.clone())
    return x, out, snapshots


def sample(
    state: TrainState,
    content_id: int,
    style_id: int,
    num_clips: int,
    seed: int = 0,
    use_ema: bool = True,
) -> list[MotionClip]:
    """Draw ``num_clips`` 32-frame clips for one (content, style) pair.

    The rotation chain runs in normalized space; outputs are de-normalized
    with the stats stored at training time. Root and contact channels come
    from the final denoiser call; contact probabilities are thresholded at
    0.5. Deterministic given ``seed``.
    """
    _check_ids(state, content_id, style_id)
    if "stats" not in state.data_meta:
        raise ValueError("checkpoint carries no dataset statistics")
    model = denoiser_for_sampling(state, use_ema)
    rng = torch.Generator().manual_seed(seed)
    x, out, _ = _reverse_chain(model, state, content_id, style_id, num_clips, rng)

    stats = DatasetStats.from_dict(state.data_meta["stats"])
    rot = x.numpy() * stats.rot_std + stats.rot_mean
    root = out.root_hat.numpy() * stats.root_std + stats.root_mean
    foot = (torch.sigmoid(out.foot_logits) > FOOT_THRESHOLD).float().numpy()
    return [
        MotionClip(
            rotations=rot[i],
            root=root[i],
            foot_contact=foot[i],
            content=content_id,
            style=style_id,
        )
        for i in range(num_clips)
    ]


def sample_trajectory(
    state: TrainState,
    content_id: int,
    style_id: int,
    num_clips: int,
    record_every: int,
    seed: int = 0,
    use_ema: bool = True,
) -> list[torch.Tensor]:
    """Snapshots of the (normalized) rotation chain, coarsest first.

    Records x_t at t = T, T - record_every, ... plus the final x_0; with
    ``record_every == T`` that is exactly [x_T, x_0].
    """
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    _check_ids(state, content_id, style_id)
    model = denoiser_for_sampling(state, use_ema)
    rng = torch.Generator().manual_seed(seed)
    _, _, snapshots = _reverse_chain(
        model, state, content_id, style_id, num_clips, rng, record_every=record_every
    )
    return snapshots
