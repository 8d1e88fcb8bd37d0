"""Hyperparameter search over short training trials.

Each trial trains a fresh model for a fixed small iteration budget with
uniformly sampled hyperparameters and is scored by validation pixel loss
plus landmark error. Trials are seeded deterministically from (master seed,
trial index), so results do not depend on scheduling order, and a diverged
trial scores +inf instead of aborting the search.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from inclg.config import TrainingConfig
from inclg.trainer import Trainer, TrainingDivergedError, streams_from_config, validate

logger = logging.getLogger(__name__)

# ranges ((low, high) tuples or {"low":..,"high":..} dicts) are sampled
# uniformly; lists are sampled as discrete choices
DEFAULT_SEARCH_SPACE = {
    "w_landmark": (0.001, 1.0),
    "lr": (1e-5, 1e-3),
    "lr_decay_factor": (0.5, 1.0),
    "batch_size": [2, 4, 8],
}


def trial_seed(master_seed: int, index: int) -> int:
    return int(np.random.default_rng((master_seed, index)).integers(0, 2**31 - 1))


def sample_point(space: dict, rng: np.random.Generator) -> dict:
    point = {}
    for key, spec in space.items():
        if isinstance(spec, dict):
            point[key] = float(rng.uniform(float(spec["low"]), float(spec["high"])))
        elif isinstance(spec, tuple):
            point[key] = float(rng.uniform(float(spec[0]), float(spec[1])))
        elif isinstance(spec, list):
            point[key] = spec[int(rng.integers(0, len(spec)))]
        else:
            point[key] = spec  # a fixed value pins the dimension
    return point


def run_trial(base_config: TrainingConfig, point: dict, index: int,
              trial_iterations: int) -> float:
    cfg = base_config.with_overrides(
        **point, max_iterations=trial_iterations, seed=trial_seed(base_config.seed, index),
        checkpoint_interval=max(trial_iterations, 1) * 10,
        validation_interval=max(trial_iterations, 1) * 10,
        out_dir=str(base_config.out_dir) + f"/trial_{index:03d}")
    trainer = Trainer(cfg)
    stream, val_loader = streams_from_config(cfg)
    if val_loader is None:
        raise ValueError("hyperparameter search requires validation flists")
    try:
        for _ in range(trial_iterations):
            trainer.train_step(stream.batch_at(trainer.iteration))
        metrics = validate(trainer.generator, val_loader)
    except TrainingDivergedError as exc:
        logger.warning("trial %d diverged (%s); scoring +inf", index, exc)
        return math.inf
    score = metrics["pixel_loss"] + metrics["landmark_error"]
    return score if math.isfinite(score) else math.inf


def hyperparameter_search(base_config: TrainingConfig, search_space: dict | None = None,
                          n_trials: int = 10, trial_iterations: int = 100):
    """Random search; returns (best config, trial log sorted by index)."""
    space = search_space or DEFAULT_SEARCH_SPACE
    unknown = set(space) - TrainingConfig.field_names()
    if unknown:
        raise ValueError(f"search space keys are not config fields: {sorted(unknown)}")
    trials = []
    for index in range(n_trials):
        rng = np.random.default_rng((base_config.seed, 7919, index))
        point = sample_point(space, rng)
        score = run_trial(base_config, point, index, trial_iterations)
        trials.append({"index": index, "point": point, "score": score})
        logger.info("trial %d/%d score=%s point=%s", index + 1, n_trials, score, point)
    best = min(trials, key=lambda t: (t["score"], t["index"]))
    best_config = base_config.with_overrides(**best["point"])
    return best_config, trials


def describe_best(trials) -> str:
    best = min(trials, key=lambda t: (t["score"], t["index"]))
    params = ", ".join(f"{k}={v}" for k, v in best["point"].items())
    return f"best trial {best['index']} score={best['score']:.6f}: {params}"
