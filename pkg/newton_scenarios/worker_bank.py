# -*- coding: utf-8 -*-

"""
This module builds the scenario bank (simulate, sample, featurize, encode)
and derives closed-loop query sets from it
"""
from dataclasses import dataclass
import logging
from typing import Dict, List, Optional

import numpy as np

from newton_scenarios.catalog import CatalogEntry, build_catalog
from newton_scenarios.errors import ParameterError
from newton_scenarios.worker_camera import Camera, project_flow
from newton_scenarios.worker_dynamics import (
    RAW_FEATURE_LENGTH,
    TrajectoryState,
    sample_states,
    simulate,
    state_raw_features,
)
from newton_scenarios.worker_matching import (
    DESCRIPTOR_DIM,
    EncoderParams,
    ScenarioBank,
    bank_from_columns,
)
from newton_scenarios.worker_metrics import Curve3D


mlogger = logging.getLogger("newton-scenarios")


ENCODERS = ("identity", "random")


@dataclass(frozen=True)
class BankConfig:
    descriptor_dim: int = DESCRIPTOR_DIM
    encoder: str = "identity"
    seed: int = 0

    def __post_init__(self):
        if self.encoder not in ENCODERS:
            raise ParameterError(
                f"Unknown encoder '{self.encoder}', options: {', '.join(ENCODERS)}."
            )
        if self.descriptor_dim < 1:
            raise ParameterError(
                f"Descriptor dimension must be positive, got {self.descriptor_dim}."
            )


@dataclass
class QueryRecord:
    id: str
    features: np.ndarray
    entry_id: Optional[int] = None
    state: Optional[int] = None
    flow: Optional[np.ndarray] = None
    curve: Optional[Curve3D] = None


def bank_encoder(config: BankConfig, classes: int) -> EncoderParams:
    """
    Encoder used to turn raw features into bank descriptors

    Args:
        config:                 BankConfig
        classes:                number of catalog entries

    Returns:
        EncoderParams
    """
    if config.encoder == "identity":
        return EncoderParams.identity(
            config.descriptor_dim, RAW_FEATURE_LENGTH, classes
        )
    rng = np.random.default_rng(config.seed)
    return EncoderParams.initialize(
        config.descriptor_dim, RAW_FEATURE_LENGTH, classes, rng
    )


def entry_raw_features(
    entry: CatalogEntry, states: List[TrajectoryState]
) -> np.ndarray:
    """R x states matrix of raw features"""
    return np.column_stack([state_raw_features(s, entry.viewpoint) for s in states])


def build_bank(
    config: Optional[BankConfig] = None,
    params: Optional[EncoderParams] = None,
    catalog: Optional[List[CatalogEntry]] = None,
) -> ScenarioBank:
    """
    Simulates every scenario once, samples its states and encodes them under
    each of the scenario's viewpoints

    Args:
        config:                 BankConfig, defaults to identity encoder, D=64
        params:                 trained encoder, overrides config.encoder
        catalog:                catalog entries to include, all 66 by default

    Returns:
        ScenarioBank
    """
    if config is None:
        config = BankConfig()
    if catalog is None:
        catalog = build_catalog()
    if params is None:
        params = bank_encoder(config, len(catalog))
    elif params.descriptor_dim != config.descriptor_dim:
        raise ParameterError(
            f"Encoder produces {params.descriptor_dim}-dimensional descriptors, "
            f"bank is configured for {config.descriptor_dim}."
        )

    sampled: Dict[int, List[TrajectoryState]] = {}
    columns = []
    states = {}
    for entry in catalog:
        if entry.scenario_id not in sampled:
            sampled[entry.scenario_id] = sample_states(simulate(entry.scenario_id))
        entry_states = sampled[entry.scenario_id]
        raw = entry_raw_features(entry, entry_states)
        columns.append(params.weight @ raw + params.bias[:, None])
        states[entry.entry_id] = entry_states

    mlogger.info(
        f"Built bank of {len(catalog)} entries from {len(sampled)} scenarios "
        f"(D={params.descriptor_dim}, encoder '{config.encoder}')."
    )
    return bank_from_columns(catalog, columns, states)


def entry_curve(bank: ScenarioBank, entry_id: int, state: int) -> Curve3D:
    """
    World-frame curve of an entry from a 1-based state index to the end;
    the final state yields its position twice
    """
    states = bank.states[entry_id]
    if not 1 <= state <= len(states):
        raise ParameterError(
            f"State {state} out of range 1-{len(states)} for entry {entry_id}."
        )
    points = [s.position for s in states[state - 1 :]]
    if len(points) == 1:
        points.append(points[0])
    return Curve3D(points)


def entry_flow(bank: ScenarioBank, entry_id: int, state: int) -> np.ndarray:
    """
    Image flow direction of an entry's state under the entry's viewpoint;
    resting states give the zero vector
    """
    s = bank.states[entry_id][state - 1]
    if not np.any(s.velocity_dir):
        return np.zeros(2)
    return project_flow(Camera.from_viewpoint(bank.entry(entry_id).viewpoint), s)


def queries_from_bank(bank: ScenarioBank) -> List[QueryRecord]:
    """
    One query per stored state carrying its raw features and full ground
    truth (entry, state, flow, remaining curve)

    Args:
        bank:                   ScenarioBank with stored states

    Returns:
        list of QueryRecord
    """
    records = []
    for entry in bank.catalog:
        states = bank.states[entry.entry_id]
        raw = entry_raw_features(entry, states)
        for k in range(len(states)):
            records.append(
                QueryRecord(
                    id=f"e{entry.entry_id:02d}s{k + 1:02d}",
                    features=raw[:, k],
                    entry_id=entry.entry_id,
                    state=k + 1,
                    flow=entry_flow(bank, entry.entry_id, k + 1),
                    curve=entry_curve(bank, entry.entry_id, k + 1),
                )
            )
    mlogger.debug(f"Derived {len(records)} queries from bank.")
    return records
