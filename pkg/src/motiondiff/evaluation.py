"""Quantitative evaluation: a small content classifier, penultimate-feature
extraction, and the Fréchet distance between Gaussian fits of feature sets."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .checkpointio import load_container, save_container
from .errors import DataError, NumericsError
from .motiondata import DatasetStats, MotionDataset, MotionClip, normalize_clips
from .sampler import sample
from .trainer import AdamState, TrainState, adam_update

__all__ = [
    "FidStats",
    "compute_stats",
    "fid",
    "ContentClassifier",
    "ClassifierTrainConfig",
    "train_classifier",
    "save_classifier",
    "load_classifier",
    "extract_features",
    "classify",
    "evaluate_run",
]

FEATURE_DIM = 64


@dataclass
class FidStats:
    """Mean vector and covariance matrix of one feature set."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64).reshape(-1)
        self.sigma = np.asarray(self.sigma, dtype=np.float64)
        d = self.mu.shape[0]
        if self.sigma.shape != (d, d):
            raise ValueError(f"sigma must be ({d}, {d}), got {self.sigma.shape}")
        if np.abs(self.sigma - self.sigma.T).max() > 1e-8:
            raise ValueError("sigma must be symmetric within 1e-8")


def compute_stats(features: np.ndarray) -> FidStats:
    """Gaussian fit of a feature matrix (clips x dims); unbiased covariance."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("features must be a non-empty (N, D) matrix")
    mu = x.mean(axis=0)
    if x.shape[0] == 1:
        sigma = np.zeros((x.shape[1], x.shape[1]))
    else:
        c = x - mu
        sigma = (c.T @ c) / (x.shape[0] - 1)
    sigma = (sigma + sigma.T) / 2.0
    return FidStats(mu=mu, sigma=sigma)


def _sqrtm_psd(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((m + m.T) / 2.0)
    if vals.min() < -1e-6:
        raise NumericsError(f"matrix is not PSD (min eigenvalue {vals.min():.3e})")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def fid(stats_r: FidStats, stats_g: FidStats) -> float:
    """Fréchet distance between two Gaussian fits.

    ``||mu_r - mu_g||^2 + tr(S_g + S_r - 2 (S_r S_g)^(1/2))``, with the matrix
    square root taken through an eigendecomposition of the symmetrized product
    ``A S_g A`` (A = sqrt(S_r)). Eigenvalues below -1e-6 raise; small negatives
    are clamped to zero.
    """
    if stats_r.mu.shape != stats_g.mu.shape:
        raise ValueError("feature dimensions differ")
    diff = stats_r.mu - stats_g.mu
    a = _sqrtm_psd(stats_r.sigma)
    inner = a @ stats_g.sigma @ a
    vals = np.linalg.eigvalsh((inner + inner.T) / 2.0)
    if vals.min() < -1e-6:
        raise NumericsError(f"product matrix is not PSD (min eigenvalue {vals.min():.3e})")
    tr_sqrt = np.sqrt(np.clip(vals, 0.0, None)).sum()
    return float(diff @ diff + np.trace(stats_r.sigma) + np.trace(stats_g.sigma) - 2.0 * tr_sqrt)


class ContentClassifier(nn.Module):
    """Temporal-conv classifier over rotation channels; 64-d penultimate layer."""

    def __init__(self, num_joints: int, num_contents: int, width: int = 48):
        super().__init__()
        self.num_joints = num_joints
        self.num_contents = num_contents
        self.width = width
        c_in = num_joints * 3
        self.conv1 = nn.Conv1d(c_in, width, 5, padding=2)
        self.conv2 = nn.Conv1d(width, width, 3, stride=2, padding=1)
        self.conv3 = nn.Conv1d(width, width, 3, stride=2, padding=1)
        self.penultimate = nn.Linear(width, FEATURE_DIM)
        self.head = nn.Linear(FEATURE_DIM, num_contents)

    def features(self, rot: torch.Tensor) -> torch.Tensor:
        """Penultimate activations for (B, F, J, 3) normalized rotations."""
        b, f = rot.shape[0], rot.shape[1]
        h = rot.reshape(b, f, -1).transpose(1, 2)
        h = F.silu(self.conv1(h))
        h = F.silu(self.conv2(h))
        h = F.silu(self.conv3(h))
        return F.silu(self.penultimate(h.mean(dim=-1)))

    def forward(self, rot: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(rot))


@dataclass(frozen=True)
class ClassifierTrainConfig:
    steps: int = 400
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0
    width: int = 48

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _stack_rotations(clips: list[MotionClip]) -> torch.Tensor:
    return torch.from_numpy(np.stack([c.rotations for c in clips]))


def train_classifier(
    dataset: MotionDataset,
    num_contents: int | None = None,
    config: ClassifierTrainConfig | None = None,
) -> tuple[ContentClassifier, dict]:
    """Train the content classifier on the dataset's training split.

    Deterministic under ``config.seed``. Returns the model plus a meta dict
    (config echo, dataset stats) suitable for :func:`save_classifier`.
    """
    config = config or ClassifierTrainConfig()
    num_contents = num_contents or dataset.num_contents
    clips = [dataset.clips[i] for i in dataset.train_indices()]
    rot = _stack_rotations(clips)
    labels = torch.tensor([c.content for c in clips], dtype=torch.long)

    torch.manual_seed(config.seed)
    clf = ContentClassifier(dataset.clips[0].num_joints, num_contents, config.width)
    params = list(clf.parameters())
    opt = AdamState.init(params)
    rng = torch.Generator().manual_seed(config.seed + 1)

    n = rot.shape[0]
    for _ in range(config.steps):
        idx = torch.randint(0, n, (config.batch_size,), generator=rng)
        logits = clf(rot[idx])
        loss = F.cross_entropy(logits, labels[idx])
        grads = list(torch.autograd.grad(loss, params))
        adam_update(params, grads, opt, config.learning_rate)
    clf.eval()
    meta = {
        "kind": "classifier",
        "config": config.to_dict(),
        "num_joints": dataset.clips[0].num_joints,
        "num_contents": num_contents,
        "stats": dataset.stats.to_dict(),
        "content_names": dataset.content_names,
    }
    return clf, meta


def save_classifier(path, clf: ContentClassifier, meta: dict) -> None:
    tensors = {f"clf/{n}": p.detach().numpy() for n, p in clf.named_parameters()}
    save_container(path, meta, tensors)


def load_classifier(path) -> tuple[ContentClassifier, dict]:
    meta, tensors = load_container(path)
    if meta.get("kind") != "classifier":
        raise DataError(f"{path} is not a classifier checkpoint")
    clf = ContentClassifier(
        int(meta["num_joints"]), int(meta["num_contents"]), int(meta["config"]["width"])
    )
    sd = {n: torch.from_numpy(tensors[f"clf/{n}"]) for n, _ in clf.named_parameters()}
    clf.load_state_dict(sd)
    clf.eval()
    return clf, meta


def extract_features(clf: ContentClassifier, rot: torch.Tensor) -> np.ndarray:
    """(N, 64) penultimate features for normalized rotations (N, F, J, 3)."""
    with torch.no_grad():
        return clf.features(rot).numpy().astype(np.float64)


def classify(clf: ContentClassifier, rot: torch.Tensor) -> np.ndarray:
    with torch.no_grad():
        return clf(rot).argmax(dim=-1).numpy()


def _balanced_counts(n_gen: int, combos: int) -> list[int]:
    counts = [n_gen // combos] * combos
    for i in range(n_gen % combos):
        counts[i] += 1
    return counts


def evaluate_run(
    state: TrainState,
    dataset: MotionDataset,
    clf: ContentClassifier,
    n_gen: int | None = None,
    seed: int = 0,
    use_ema: bool = True,
) -> dict:
    """FID of generated vs held-out clips plus conditioning accuracy.

    Generates ``n_gen`` clips (default: the held-out count) balanced across
    every (content, style) pair, extracts classifier features from normalized
    rotations on both sides, and reports the Fréchet distance together with
    the classifier's accuracy at recovering the requested content labels.
    """
    held = dataset.heldout_indices()
    if not held:
        raise DataError("dataset has no held-out clips")
    if n_gen is None:
        n_gen = len(held)
    stats = dataset.stats

    real_rot = _stack_rotations([dataset.clips[i] for i in held])
    real_features = extract_features(clf, real_rot)

    c_classes = state.model_cfg.content_classes
    s_classes = state.model_cfg.style_classes
    combos = [(c, s) for c in range(c_classes) for s in range(s_classes)]
    counts = _balanced_counts(n_gen, len(combos))
    gen_features = []
    requested = []
    predicted = []
    for (c, s), count in zip(combos, counts):
        if count == 0:
            continue
        clips = sample(state, c, s, count, seed=seed + c * s_classes + s, use_ema=use_ema)
        normed, _ = normalize_clips(clips, stats)
        rot = _stack_rotations(normed)
        gen_features.append(extract_features(clf, rot))
        requested.extend([c] * count)
        predicted.extend(classify(clf, rot).tolist())
    gen_features = np.concatenate(gen_features, axis=0)

    requested = np.asarray(requested)
    predicted = np.asarray(predicted)
    accuracy = float((requested == predicted).mean())
    per_content = {}
    for c in range(c_classes):
        m = requested == c
        name = dataset.content_names[c] if c < len(dataset.content_names) else str(c)
        per_content[name] = float((predicted[m] == c).mean()) if m.any() else float("nan")

    score = fid(compute_stats(real_features), compute_stats(gen_features))
    return {
        "fid": score,
        "content_accuracy": accuracy,
        "per_content_accuracy": per_content,
        "n_gen": int(n_gen),
        "n_real": len(held),
        "seed": int(seed),
    }
