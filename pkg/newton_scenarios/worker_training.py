# -*- coding: utf-8 -*-

"""
SGD training of the descriptor encoder against the full scenario bank
"""
from dataclasses import dataclass, field
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from newton_scenarios.errors import LabelError, ParameterError, TrainingError
from newton_scenarios.worker_dynamics import STATES_PER_ENTRY
from newton_scenarios.worker_matching import (
    SUPERVISION,
    EncoderParams,
    FusionConfig,
    ScenarioBank,
    loss_and_gradients,
    output_classes,
)


mlogger = logging.getLogger("newton-scenarios")


DEFAULT_ITERS = 5000


@dataclass(frozen=True)
class TrainingConfig:
    iters: int = DEFAULT_ITERS
    lr_start: float = 1e-1
    lr_end: float = 1e-4
    batch: Optional[int] = 128
    lam: float = 0.5
    seed: int = 0
    supervision: str = "entry"

    def __post_init__(self):
        if self.iters < 0:
            raise ParameterError(f"Iterations must be >= 0, got {self.iters}.")
        if self.batch is not None and self.batch < 1:
            raise ParameterError(f"Batch size must be >= 1, got {self.batch}.")
        if not (self.lr_start > 0 and self.lr_end > 0):
            raise ParameterError("Learning rates must be positive.")
        FusionConfig(self.lam)
        if self.supervision not in SUPERVISION:
            raise ParameterError(
                f"Unknown supervision '{self.supervision}', options: {SUPERVISION}."
            )


@dataclass
class TrainingResult:
    params: EncoderParams
    losses: List[float] = field(default_factory=list)


def learning_rate(iteration: int, cfg: TrainingConfig) -> float:
    """
    Geometric decay from lr_start at the first iteration to lr_end at the last
    """
    if cfg.iters <= 1:
        return cfg.lr_start
    frac = iteration / (cfg.iters - 1)
    return cfg.lr_start * (cfg.lr_end / cfg.lr_start) ** frac


def _stack_dataset(
    dataset: Sequence[Tuple], bank: ScenarioBank, with_states: bool
) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    features = np.stack([np.asarray(item[0], dtype=float) for item in dataset])
    labels = np.array([int(item[1]) for item in dataset])
    known = {e.entry_id for e in bank.catalog}
    unknown = sorted(set(labels.tolist()) - known)
    if unknown:
        raise LabelError(f"Labels {unknown} are not entries of the bank.")
    if not with_states:
        return features, labels, None

    try:
        states = np.array([int(item[2]) for item in dataset])
    except (IndexError, TypeError):
        raise LabelError("State supervision needs a state label for every example.")
    bad = sorted(set(states.tolist()) - set(range(1, STATES_PER_ENTRY + 1)))
    if bad:
        raise LabelError(f"State labels {bad} are outside 1-{STATES_PER_ENTRY}.")
    return features, labels, states


def train_encoder(
    dataset: Sequence[Tuple],
    bank: ScenarioBank,
    config: TrainingConfig,
    init: Optional[EncoderParams] = None,
) -> TrainingResult:
    """
    Trains the encoder and classifier head with minibatch SGD. Every iteration
    penalizes the error over all bank entries; the bank itself stays fixed.
    A config without batch size uses the whole dataset as one fixed batch.
    State supervision trains a head over every entry state and needs
    (raw features, entry_id, state) examples.

    Args:
        dataset:                list of (raw features, entry_id) pairs, or
                                (raw features, entry_id, state) triples
        bank:                   scenario bank
        config:                 TrainingConfig
        init:                   starting parameters, seeded Gaussian encoder
                                with a zero head if omitted

    Returns:
        TrainingResult with final params and per-iteration losses
    """
    if not dataset:
        raise TrainingError("Cannot train on an empty dataset.")

    by_state = config.supervision == "state"
    features, labels, states = _stack_dataset(dataset, bank, by_state)
    classes = output_classes(bank, config.supervision)
    rng = np.random.default_rng(config.seed)
    if init is None:
        params = EncoderParams.initialize(
            bank.descriptor_dim, features.shape[1], classes, rng
        )
    elif init.classes != classes:
        raise ParameterError(
            f"Initial head scores {init.classes} classes, {config.supervision} "
            f"supervision needs {classes}."
        )
    else:
        params = init.copy()

    fusion = FusionConfig(config.lam)
    full = np.arange(len(labels))
    losses = []
    mlogger.info(
        f"Training encoder on {len(labels)} examples for {config.iters} iterations "
        f"(batch {config.batch}, lambda {config.lam}, "
        f"{config.supervision} supervision)."
    )
    for it in range(config.iters):
        if config.batch is None:
            idx = full
        else:
            idx = rng.integers(0, len(labels), size=config.batch)
        batch_states = None if states is None else states[idx].tolist()
        loss, grads = loss_and_gradients(
            features[idx], labels[idx].tolist(), bank, params, fusion, batch_states
        )
        if not math.isfinite(loss):
            raise TrainingError(f"Loss became non-finite at iteration {it}.")
        # step along the loss summed over the output classes, not its mean
        lr = learning_rate(it, config)
        step = lr * classes
        for value, grad in zip(params.arrays(), grads.arrays()):
            value -= step * grad
        losses.append(loss)
        if (it + 1) % 500 == 0:
            mlogger.debug(f"Iteration {it + 1}: loss {loss:.6g}, lr {lr:.3g}.")

    if losses:
        mlogger.info(f"Training finished, final loss {losses[-1]:.6g}.")
    return TrainingResult(params, losses)


def moving_average(values: Sequence[float], window: int = 100) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if window < 1 or len(values) < window:
        raise ParameterError(
            f"Window {window} does not fit a series of {len(values)} values."
        )
    return np.convolve(values, np.ones(window) / window, mode="valid")
