"""Closed-form diffusion math: schedule construction, forward noising, reverse step.

Timesteps are 1-based everywhere in the public API: ``t = 1`` is the least-noised
step, ``t = T`` the most. Schedule vectors are stored in float64 and the
coefficients are cast to the dtype of the tensors they multiply, so training can
run in float32 while tests can exercise the algebra in float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

__all__ = [
    "NoiseSchedule",
    "make_schedule",
    "q_sample",
    "reconstruct_x0",
    "reverse_step",
]


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step noise magnitudes and the derived closed-form coefficients.

    ``sigma[t-1]`` is the variance injected at step ``t`` and ``alpha_bar[t-1]``
    the cumulative signal retention ``prod_{i<=t} (1 - sigma_i)``. Instances are
    immutable after construction and safe to share across threads.
    """

    T: int
    sigma: torch.Tensor
    alpha_bar: torch.Tensor
    sqrt_alpha_bar: torch.Tensor
    sqrt_one_minus_alpha_bar: torch.Tensor

    @classmethod
    def from_sigmas(cls, sigmas) -> "NoiseSchedule":
        """Build a schedule from an explicit per-step sigma vector."""
        sigma = torch.as_tensor(sigmas, dtype=torch.float64).flatten()
        if sigma.numel() < 1:
            raise ValueError("schedule needs at least one step")
        if not bool(((sigma > 0.0) & (sigma < 1.0)).all()):
            raise ValueError("every sigma must lie strictly inside (0, 1)")
        alpha_bar = torch.cumprod(1.0 - sigma, dim=0)
        return cls(
            T=int(sigma.numel()),
            sigma=sigma,
            alpha_bar=alpha_bar,
            sqrt_alpha_bar=torch.sqrt(alpha_bar),
            sqrt_one_minus_alpha_bar=torch.sqrt(1.0 - alpha_bar),
        )


def make_schedule(T: int, sigma_min: float = 1e-4, sigma_max: float = 0.02) -> NoiseSchedule:
    """Linear sigma schedule from ``sigma_min`` at t=1 to ``sigma_max`` at t=T.

    With ``T == 1`` the single step uses ``sigma_min``.
    """
    if int(T) != T or T < 1:
        raise ValueError(f"T must be a positive integer, got {T!r}")
    if not (0.0 < sigma_min <= sigma_max < 1.0):
        raise ValueError(
            f"need 0 < sigma_min <= sigma_max < 1, got ({sigma_min}, {sigma_max})"
        )
    if T == 1:
        sigma = torch.tensor([sigma_min], dtype=torch.float64)
    else:
        sigma = torch.linspace(sigma_min, sigma_max, T, dtype=torch.float64)
    return NoiseSchedule.from_sigmas(sigma)


def _check_t(t, T: int) -> None:
    if torch.is_tensor(t):
        if t.numel() == 0:
            raise ValueError("t tensor is empty")
        if not bool(((t >= 1) & (t <= T)).all()):
            raise ValueError(f"every t must lie in [1, {T}]")
    else:
        if int(t) != t or not (1 <= int(t) <= T):
            raise ValueError(f"t must lie in [1, {T}], got {t!r}")


def _coef(vec: torch.Tensor, t, like: torch.Tensor) -> torch.Tensor:
    """Look up a 1-based schedule coefficient, shaped to broadcast against ``like``.

    Scalar ``t`` yields a scalar; a 1-D integer tensor of length B yields a
    ``(B, 1, ..., 1)`` view so each batch entry gets its own coefficient.
    """
    if torch.is_tensor(t) and t.ndim > 0:
        idx = t.long().flatten() - 1
        out = vec[idx].to(like.dtype)
        return out.view(out.shape[0], *([1] * (like.ndim - 1)))
    return vec[int(t) - 1].to(like.dtype)


def q_sample(x0: torch.Tensor, t, eps: torch.Tensor, sched: NoiseSchedule) -> torch.Tensor:
    """Noise a clean tensor to step ``t``: ``sqrt(ab_t)*x0 + sqrt(1-ab_t)*eps``.

    ``eps`` is caller-supplied so tests and training control the randomness.
    """
    if x0.shape != eps.shape:
        raise ValueError(f"x0 shape {tuple(x0.shape)} != eps shape {tuple(eps.shape)}")
    _check_t(t, sched.T)
    a = _coef(sched.sqrt_alpha_bar, t, x0)
    b = _coef(sched.sqrt_one_minus_alpha_bar, t, x0)
    return a * x0 + b * eps


def reconstruct_x0(x_t: torch.Tensor, t, eps_hat: torch.Tensor, sched: NoiseSchedule) -> torch.Tensor:
    """Invert :func:`q_sample` given a noise estimate: ``(x_t - sqrt(1-ab_t)*eps_hat) / sqrt(ab_t)``."""
    if x_t.shape != eps_hat.shape:
        raise ValueError(f"x_t shape {tuple(x_t.shape)} != eps_hat shape {tuple(eps_hat.shape)}")
    _check_t(t, sched.T)
    a = _coef(sched.sqrt_alpha_bar, t, x_t)
    b = _coef(sched.sqrt_one_minus_alpha_bar, t, x_t)
    return (x_t - b * eps_hat) / a


def reverse_step(
    x_t: torch.Tensor,
    t: int,
    eps_hat: torch.Tensor,
    z: torch.Tensor,
    sched: NoiseSchedule,
) -> torch.Tensor:
    """One reverse-chain step from ``x_t`` to ``x_{t-1}``.

    ``x_{t-1} = (x_t - sigma_t/sqrt(1-ab_t) * eps_hat) / sqrt(1-sigma_t) + sqrt(sigma_t) * z``

    ``t`` is a scalar (the whole batch shares one step). The final step must be
    deterministic: ``z`` has to be all zeros when ``t == 1``.
    """
    if x_t.shape != eps_hat.shape or x_t.shape != z.shape:
        raise ValueError("x_t, eps_hat and z must share one shape")
    _check_t(t, sched.T)
    t = int(t)
    if t == 1 and bool((z != 0).any()):
        raise ValueError("z must be all zeros at t = 1")
    sigma_t = float(sched.sigma[t - 1])
    b = _coef(sched.sqrt_one_minus_alpha_bar, t, x_t)
    mean = (x_t - (sigma_t / b) * eps_hat) / (1.0 - sigma_t) ** 0.5
    return mean + (sigma_t**0.5) * z
