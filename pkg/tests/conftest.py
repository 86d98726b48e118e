import numpy as np
import pytest
import torch

torch.set_num_threads(1)

from motiondiff.motiondata import (
    MotionDataset,
    content_names,
    default_skeleton,
    generate_synthetic,
    normalize_clips,
    style_names,
)
from motiondiff.trainer import build_state, desk_preset, run_training


def make_dataset(num_clips, contents=3, styles=3, seed=11) -> MotionDataset:
    clips = generate_synthetic(num_clips, contents, styles, seed=seed)
    normed, stats = normalize_clips(clips)
    return MotionDataset(
        clips=normed,
        stats=stats,
        skeleton=default_skeleton(),
        content_names=content_names(contents),
        style_names=style_names(styles),
    )


@pytest.fixture(scope="session")
def small_dataset() -> MotionDataset:
    """90 clips, 3 contents x 3 styles; cheap enough for unit tests."""
    return make_dataset(90)


@pytest.fixture(scope="session")
def acceptance_dataset() -> MotionDataset:
    """The 600-clip, 3x3 seeded corpus used by the end-to-end criteria."""
    return make_dataset(600, seed=11)


@pytest.fixture(scope="session")
def desk_runs(acceptance_dataset):
    """Fully trained desk-preset models for three seeds, with wall times."""
    import time

    runs = {}
    for seed in (0, 1, 2):
        t0 = time.monotonic()
        state, reports = run_training(desk_preset(seed=seed), acceptance_dataset)
        runs[seed] = {
            "state": state,
            "reports": reports,
            "train_seconds": time.monotonic() - t0,
        }
    return runs


@pytest.fixture(scope="session")
def physical_off_run(acceptance_dataset):
    import time

    t0 = time.monotonic()
    state, _ = run_training(
        desk_preset(seed=0, use_physical=False), acceptance_dataset
    )
    return {"state": state, "train_seconds": time.monotonic() - t0}


@pytest.fixture(scope="session")
def untrained_state(acceptance_dataset):
    return build_state(desk_preset(seed=999), acceptance_dataset)


@pytest.fixture(scope="session")
def content_classifier(acceptance_dataset):
    import time

    from motiondiff.evaluation import train_classifier

    t0 = time.monotonic()
    clf, meta = train_classifier(acceptance_dataset)
    return {"clf": clf, "meta": meta, "train_seconds": time.monotonic() - t0}
