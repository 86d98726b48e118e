"""End-to-end training: noising, multi-head prediction, loss assembly,
alternating adversarial updates, Adam, and EMA tracking.

Determinism contract: given one config (including seed) and one dataset, every
run produces bit-identical parameter trajectories and loss reports. All
randomness flows through a single ``torch.Generator`` owned by the train
state, whose byte state is checkpointed, so resumed runs continue exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import torch

from .checkpointio import load_container, save_container
from .errors import DataError, NumericsError
from .losses import (
    LossReport,
    LossWeights,
    loss_disc,
    loss_foot,
    loss_generator_adv,
    loss_noise,
    loss_root,
    loss_acceleration,
    loss_velocity,
    total_loss,
)
from .model import ConditioningInfo, Denoiser, Discriminator, ModelConfig
from .motiondata import MotionDataset
from .schedule import NoiseSchedule, make_schedule, q_sample, reconstruct_x0

__all__ = [
    "TrainerConfig",
    "desk_preset",
    "paper_preset",
    "AdamState",
    "adam_update",
    "ema_update",
    "TrainState",
    "build_state",
    "train_step",
    "run_training",
    "save_checkpoint",
    "load_checkpoint",
    "stack_training_tensors",
]

# reconstruction clamp in normalized-data units
X0_CLAMP = 3.0


@dataclass(frozen=True)
class TrainerConfig:
    learning_rate: float = 2e-4
    disc_learning_rate: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 128
    timesteps: int = 1000
    ema_decay: float = 0.9999
    weights: LossWeights = field(default_factory=LossWeights)
    use_foot: bool = True
    use_root: bool = True
    use_physical: bool = True
    use_discriminator: bool = True
    seed: int = 0
    steps: int = 100_000
    base_width: int = 64
    sigma_min: float = 1e-4
    sigma_max: float = 0.02
    grad_clip: float | None = None
    checkpoint_every: int = 1000

    def __post_init__(self):
        if not (self.learning_rate > 0 and self.disc_learning_rate > 0):
            raise ValueError("learning rates must be positive")
        for name in ("adam_beta1", "adam_beta2", "ema_decay"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.batch_size < 1 or self.timesteps < 1 or self.steps < 0:
            raise ValueError("batch_size/timesteps/steps out of range")

    def to_dict(self) -> dict:
        d = {}
        for f in fields(self):
            v = getattr(self, f.name)
            d[f.name] = v.to_dict() if isinstance(v, LossWeights) else v
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainerConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise DataError(f"unknown config key: {sorted(unknown)[0]!r}")
        kwargs = dict(d)
        if "weights" in kwargs and isinstance(kwargs["weights"], dict):
            kwargs["weights"] = LossWeights.from_dict(kwargs["weights"])
        return cls(**kwargs)

    def effective_weights(self) -> LossWeights:
        """Loss weights after applying the ablation switches."""
        w = self.weights
        return LossWeights(
            noise=w.noise,
            foot=w.foot if self.use_foot else 0.0,
            root=w.root if self.use_root else 0.0,
            disc=w.disc if self.use_discriminator else 0.0,
            vel=w.vel if self.use_physical else 0.0,
            acc=w.acc if self.use_physical else 0.0,
        )


def desk_preset(**overrides) -> TrainerConfig:
    """Minutes-scale CPU training; sigma_max raised so the chain still ends in
    (near) pure noise at 200 steps, and the learning rate scaled up so 2000
    Adam steps can actually move the parameters."""
    base = dict(
        batch_size=16,
        timesteps=200,
        steps=2000,
        base_width=32,
        sigma_max=0.1,
        learning_rate=1e-3,
        ema_decay=0.995,
        grad_clip=10.0,
        checkpoint_every=1000,
    )
    base.update(overrides)
    return TrainerConfig(**base)


def paper_preset(**overrides) -> TrainerConfig:
    """Full-scale hyperparameters (lr 2e-4, batch 128, T=1000, EMA 0.9999)."""
    return TrainerConfig(**overrides)


@dataclass
class AdamState:
    """First/second moment accumulators plus the shared step counter."""

    step: int
    m: list[torch.Tensor]
    v: list[torch.Tensor]

    @classmethod
    def init(cls, params: list[torch.Tensor]) -> "AdamState":
        return cls(
            step=0,
            m=[torch.zeros_like(p) for p in params],
            v=[torch.zeros_like(p) for p in params],
        )


def adam_update(
    params: list[torch.Tensor],
    grads,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected Adam step, in place. ``None`` grads count as zero."""
    if len(params) != len(state.m):
        raise ValueError("optimizer state does not match parameter list")
    state.step += 1
    bc1 = 1.0 - beta1**state.step
    bc2 = 1.0 - beta2**state.step
    with torch.no_grad():
        for p, g, m, v in zip(params, grads, state.m, state.v):
            if g is None:
                g = torch.zeros_like(p)
            m.mul_(beta1).add_(g, alpha=1.0 - beta1)
            v.mul_(beta2).addcmul_(g, g, value=1.0 - beta2)
            p.addcdiv_(m / bc1, (v / bc2).sqrt().add_(eps), value=-lr)


def ema_update(shadow: list[torch.Tensor], live: list[torch.Tensor], decay: float) -> None:
    """shadow <- decay * shadow + (1 - decay) * live, in place."""
    with torch.no_grad():
        for s, p in zip(shadow, live):
            s.mul_(decay).add_(p, alpha=1.0 - decay)


@dataclass
class TrainState:
    config: TrainerConfig
    model_cfg: ModelConfig
    denoiser: Denoiser
    disc: Discriminator
    ema: list[torch.Tensor]
    opt_g: AdamState
    opt_d: AdamState
    sched: NoiseSchedule
    rng: torch.Generator
    step: int
    data_meta: dict


def _dataset_meta(dataset: MotionDataset) -> dict:
    return {
        "stats": dataset.stats.to_dict(),
        "skeleton": dataset.skeleton.to_dict(),
        "content_names": dataset.content_names,
        "style_names": dataset.style_names,
        "frame_time": dataset.frame_time,
    }


def build_state(config: TrainerConfig, dataset: MotionDataset) -> TrainState:
    """Fresh training state; parameter init is fixed by ``config.seed``."""
    sample = dataset.clips[0]
    model_cfg = ModelConfig(
        num_joints=sample.num_joints,
        num_feet=sample.num_feet,
        content_classes=dataset.num_contents,
        style_classes=dataset.num_styles,
        timesteps=config.timesteps,
        base_width=config.base_width,
    )
    torch.manual_seed(config.seed)
    denoiser = Denoiser(model_cfg)
    disc = Discriminator(model_cfg)
    rng = torch.Generator().manual_seed(config.seed + 1)
    return TrainState(
        config=config,
        model_cfg=model_cfg,
        denoiser=denoiser,
        disc=disc,
        ema=[p.detach().clone() for p in denoiser.parameters()],
        opt_g=AdamState.init(list(denoiser.parameters())),
        opt_d=AdamState.init(list(disc.parameters())),
        sched=make_schedule(config.timesteps, config.sigma_min, config.sigma_max),
        rng=rng,
        step=0,
        data_meta=_dataset_meta(dataset),
    )


def stack_training_tensors(dataset: MotionDataset, indices=None) -> dict:
    """Stack (a subset of) the dataset's clips into batched training tensors."""
    if indices is None:
        indices = range(len(dataset.clips))
    clips = [dataset.clips[i] for i in indices]
    if not clips:
        raise DataError("no clips selected for training")
    return {
        "rot": torch.from_numpy(np.stack([c.rotations for c in clips])),
        "root": torch.from_numpy(np.stack([c.root for c in clips])),
        "foot": torch.from_numpy(np.stack([c.foot_contact for c in clips])),
        "content": torch.tensor([c.content for c in clips], dtype=torch.long),
        "style": torch.tensor([c.style for c in clips], dtype=torch.long),
    }


def _clip_grads(grads, max_norm: float) -> None:
    total = math.sqrt(sum(float(g.square().sum()) for g in grads if g is not None))
    if total > max_norm:
        scale = max_norm / (total + 1e-12)
        for g in grads:
            if g is not None:
                g.mul_(scale)


def train_step(state: TrainState, batch: dict) -> LossReport:
    """One optimization step over a batch; returns the detached loss report.

    Draws per-clip timesteps and noise, forms the noised input, runs the
    denoiser, assembles the weighted multi-task objective, updates the
    denoiser, then (separately, on detached fakes) the critic, then the EMA.
    """
    cfg = state.config
    weights = cfg.effective_weights()
    b = batch["rot"].shape[0]

    t = torch.randint(1, cfg.timesteps + 1, (b,), generator=state.rng)
    eps = torch.randn(batch["rot"].shape, generator=state.rng)
    x_t = q_sample(batch["rot"], t, eps, state.sched)
    out = state.denoiser(x_t, ConditioningInfo(batch["content"], batch["style"], t))

    terms: dict = {"noise": loss_noise(eps, out.eps_hat)}
    foot_prob = torch.sigmoid(out.foot_logits)
    if cfg.use_foot:
        terms["foot"] = loss_foot(batch["foot"], foot_prob)
    if cfg.use_root:
        terms["root"] = loss_root(batch["root"], out.root_hat)
    x0_hat = None
    if cfg.use_physical or cfg.use_discriminator:
        # clamp the reconstruction to the plausible normalized-data range: at
        # high t the 1/sqrt(alpha_bar) factor makes raw x0 estimates (and their
        # gradients) explode, drowning the noise objective
        x0_hat = reconstruct_x0(x_t, t, out.eps_hat, state.sched).clamp(-X0_CLAMP, X0_CLAMP)
    if cfg.use_physical:
        terms["vel"] = loss_velocity(x0_hat)
        terms["acc"] = loss_acceleration(x0_hat)
    adv_weights = None
    if cfg.use_discriminator:
        # adversarial pressure fades with the reconstruction's signal fraction:
        # a fake derived from a nearly-all-noise step can never look real, and
        # chasing it anyway corrupts the noise prediction at high t
        adv_weights = state.sched.alpha_bar[t - 1].float()
        terms["disc"] = loss_generator_adv(
            state.disc, (x0_hat, out.root_hat, foot_prob), clip_weights=adv_weights
        )

    report = total_loss(terms, weights)
    for name, value in report.to_dict().items():
        v = float(value.detach()) if torch.is_tensor(value) else float(value)
        if not math.isfinite(v):
            raise NumericsError(f"non-finite loss at step {state.step + 1}", term=name)

    gen_params = list(state.denoiser.parameters())
    if torch.is_tensor(report.total) and report.total.requires_grad:
        grads = list(torch.autograd.grad(report.total, gen_params, allow_unused=True))
    else:
        grads = [None] * len(gen_params)
    if cfg.grad_clip is not None:
        _clip_grads(grads, cfg.grad_clip)
    adam_update(
        gen_params, grads, state.opt_g,
        cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps,
    )

    if cfg.use_discriminator:
        fake = (x0_hat.detach(), out.root_hat.detach(), foot_prob.detach())
        real = (batch["rot"], batch["root"], batch["foot"])
        d_loss = loss_disc(state.disc, real, fake, clip_weights=adv_weights)
        if not math.isfinite(float(d_loss.detach())):
            raise NumericsError(f"non-finite loss at step {state.step + 1}", term="disc_objective")
        d_params = list(state.disc.parameters())
        d_grads = list(torch.autograd.grad(d_loss, d_params))
        if cfg.grad_clip is not None:
            _clip_grads(d_grads, cfg.grad_clip)
        adam_update(
            d_params, d_grads, state.opt_d,
            cfg.disc_learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps,
        )

    ema_update(state.ema, gen_params, cfg.ema_decay)
    state.step += 1
    return report.as_floats()


def _named(params_module) -> list[tuple[str, torch.Tensor]]:
    return list(params_module.named_parameters())


def save_checkpoint(path: str | Path, state: TrainState) -> None:
    """Everything needed to resume exactly: params, EMA, both optimizers, RNG."""
    meta = {
        "kind": "train_checkpoint",
        "config": state.config.to_dict(),
        "model": state.model_cfg.to_dict(),
        "step": state.step,
        "adam_g_step": state.opt_g.step,
        "adam_d_step": state.opt_d.step,
        "data": state.data_meta,
    }
    tensors: dict[str, np.ndarray] = {}
    gen_named = _named(state.denoiser)
    for name, p in gen_named:
        tensors[f"denoiser/{name}"] = p.detach().numpy()
    for (name, _), s in zip(gen_named, state.ema):
        tensors[f"ema/{name}"] = s.numpy()
    for (name, _), m, v in zip(gen_named, state.opt_g.m, state.opt_g.v):
        tensors[f"adam_g/m/{name}"] = m.numpy()
        tensors[f"adam_g/v/{name}"] = v.numpy()
    disc_named = _named(state.disc)
    for name, p in disc_named:
        tensors[f"disc/{name}"] = p.detach().numpy()
    for (name, _), m, v in zip(disc_named, state.opt_d.m, state.opt_d.v):
        tensors[f"adam_d/m/{name}"] = m.numpy()
        tensors[f"adam_d/v/{name}"] = v.numpy()
    tensors["rng/state"] = state.rng.get_state().numpy()
    save_container(path, meta, tensors)


def load_checkpoint(path: str | Path) -> TrainState:
    meta, tensors = load_container(path)
    if meta.get("kind") != "train_checkpoint":
        raise DataError(f"{path} is not a training checkpoint")
    config = TrainerConfig.from_dict(meta["config"])
    model_cfg = ModelConfig.from_dict(meta["model"])
    denoiser = Denoiser(model_cfg)
    disc = Discriminator(model_cfg)

    def load_into(module, prefix):
        sd = {}
        for name, _ in module.named_parameters():
            key = f"{prefix}/{name}"
            if key not in tensors:
                raise DataError(f"{path}: missing tensor {key!r}")
            sd[name] = torch.from_numpy(tensors[key])
        module.load_state_dict(sd)

    load_into(denoiser, "denoiser")
    load_into(disc, "disc")
    gen_named = _named(denoiser)
    ema = [torch.from_numpy(tensors[f"ema/{name}"].copy()) for name, _ in gen_named]
    opt_g = AdamState(
        step=int(meta["adam_g_step"]),
        m=[torch.from_numpy(tensors[f"adam_g/m/{n}"].copy()) for n, _ in gen_named],
        v=[torch.from_numpy(tensors[f"adam_g/v/{n}"].copy()) for n, _ in gen_named],
    )
    disc_named = _named(disc)
    opt_d = AdamState(
        step=int(meta["adam_d_step"]),
        m=[torch.from_numpy(tensors[f"adam_d/m/{n}"].copy()) for n, _ in disc_named],
        v=[torch.from_numpy(tensors[f"adam_d/v/{n}"].copy()) for n, _ in disc_named],
    )
    rng = torch.Generator()
    rng.set_state(torch.from_numpy(tensors["rng/state"].copy()))
    return TrainState(
        config=config,
        model_cfg=model_cfg,
        denoiser=denoiser,
        disc=disc,
        ema=ema,
        opt_g=opt_g,
        opt_d=opt_d,
        sched=make_schedule(config.timesteps, config.sigma_min, config.sigma_max),
        rng=rng,
        step=int(meta["step"]),
        data_meta=meta["data"],
    )


def run_training(
    config: TrainerConfig,
    dataset: MotionDataset,
    out_dir: str | Path | None = None,
    resume_from: str | Path | None = None,
    train_indices=None,
) -> tuple[TrainState, list[LossReport]]:
    """Train to ``config.steps``, logging one JSON line per step.

    Batches are drawn (with replacement) from the training split through the
    state's generator, so a resumed run replays the exact remaining schedule.
    Returns the final state and the reports produced by this call.
    """
    if resume_from is not None:
        state = load_checkpoint(resume_from)
        if state.config != config:
            raise DataError("resume config does not match checkpoint config")
    else:
        state = build_state(config, dataset)
    if train_indices is None:
        train_indices = dataset.train_indices()
    tensors = stack_training_tensors(dataset, train_indices)
    n = tensors["rot"].shape[0]

    out_dir = Path(out_dir) if out_dir is not None else None
    metrics_fh = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        mode = "a" if resume_from is not None else "w"
        metrics_fh = open(out_dir / "metrics.jsonl", mode)

    reports: list[LossReport] = []
    try:
        while state.step < config.steps:
            idx = torch.randint(0, n, (config.batch_size,), generator=state.rng)
            batch = {
                "rot": tensors["rot"][idx],
                "root": tensors["root"][idx],
                "foot": tensors["foot"][idx],
                "content": tensors["content"][idx],
                "style": tensors["style"][idx],
            }
            report = train_step(state, batch)
            reports.append(report)
            if metrics_fh is not None:
                record = {"step": state.step, **report.to_dict()}
                metrics_fh.write(json.dumps(record, sort_keys=True) + "\n")
            if out_dir is not None and (
                state.step % config.checkpoint_every == 0 or state.step == config.steps
            ):
                save_checkpoint(out_dir / "checkpoint.mck", state)
    finally:
        if metrics_fh is not None:
            metrics_fh.close()
    if out_dir is not None:
        save_checkpoint(out_dir / "checkpoint.mck", state)
    return state, reports
