# -*- coding: utf-8 -*-

"""
The 12 Newtonian scenarios and the 66 scenario x viewpoint catalog entries
"""
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from numbers import Integral
from typing import Dict, List, Tuple

from newton_scenarios.errors import CatalogError


class MotionClass(Enum):
    PROJECTILE = "projectile"
    LINEAR = "linear"
    FALL = "fall"
    SWING = "swing"
    ROLL = "roll"
    SLIDE = "slide"
    STATIC = "static"
    PUSH = "push"


class ForceMode(Enum):
    IMPULSE = "impulse"
    CONTINUOUS = "continuous"
    NONE = "none"


class Symmetry(Enum):
    FULL = "full"
    AXIAL = "axial"
    HALF = "half"
    POINT = "point"


FULL_AZIMUTHS = (0.0, 45.0, 90.0, 135.0, 180.0, 225.0, 270.0, 315.0)
HALF_AZIMUTHS = (0.0, 45.0, 90.0, 135.0)
AXIAL_ELEVATIONS = (15.0, 45.0, 75.0)
DEFAULT_ELEVATION = 0.0


@dataclass(frozen=True)
class ScenarioSpec:
    id: int
    motion_class: MotionClass
    force_mode: ForceMode
    contact: bool
    symmetry: Symmetry
    description: str


@dataclass(frozen=True, order=True)
class ViewpointSpec:
    azimuth: float
    elevation: float


@dataclass(frozen=True)
class CatalogEntry:
    entry_id: int
    scenario_id: int
    viewpoint: ViewpointSpec

    def to_dict(self) -> Dict:
        return dict(
            entry_id=self.entry_id,
            scenario_id=self.scenario_id,
            azimuth=self.viewpoint.azimuth,
            elevation=self.viewpoint.elevation,
        )


SCENARIOS: Tuple[ScenarioSpec, ...] = (
    ScenarioSpec(
        1,
        MotionClass.PROJECTILE,
        ForceMode.IMPULSE,
        False,
        Symmetry.FULL,
        "horizontal launch from a ledge",
    ),
    ScenarioSpec(
        2, MotionClass.FALL, ForceMode.NONE, False, Symmetry.HALF, "vertical fall"
    ),
    ScenarioSpec(
        3,
        MotionClass.PROJECTILE,
        ForceMode.IMPULSE,
        False,
        Symmetry.FULL,
        "projectile launched from the floor",
    ),
    ScenarioSpec(
        4,
        MotionClass.LINEAR,
        ForceMode.IMPULSE,
        False,
        Symmetry.FULL,
        "airborne straight line",
    ),
    ScenarioSpec(
        5, MotionClass.STATIC, ForceMode.NONE, True, Symmetry.POINT, "stability"
    ),
    ScenarioSpec(
        6,
        MotionClass.FALL,
        ForceMode.NONE,
        False,
        Symmetry.AXIAL,
        "drop onto a plane",
    ),
    ScenarioSpec(
        7,
        MotionClass.SWING,
        ForceMode.IMPULSE,
        False,
        Symmetry.AXIAL,
        "conical swing",
    ),
    ScenarioSpec(
        8,
        MotionClass.PUSH,
        ForceMode.CONTINUOUS,
        True,
        Symmetry.FULL,
        "continuous push on a surface",
    ),
    ScenarioSpec(
        9,
        MotionClass.SLIDE,
        ForceMode.NONE,
        True,
        Symmetry.FULL,
        "slide down an incline",
    ),
    ScenarioSpec(
        10,
        MotionClass.LINEAR,
        ForceMode.IMPULSE,
        True,
        Symmetry.FULL,
        "surface slide slowed by friction",
    ),
    ScenarioSpec(
        11,
        MotionClass.PROJECTILE,
        ForceMode.IMPULSE,
        False,
        Symmetry.AXIAL,
        "vertical rise and fall",
    ),
    ScenarioSpec(
        12,
        MotionClass.SWING,
        ForceMode.NONE,
        False,
        Symmetry.HALF,
        "pendulum swing",
    ),
)


def get_scenario(scenario_id: int) -> ScenarioSpec:
    """
    Returns canonical scenario spec

    Args:
        scenario_id:            scenario number, 1-12

    Returns:
        ScenarioSpec
    """
    if not isinstance(scenario_id, Integral) or not 1 <= scenario_id <= 12:
        raise CatalogError(f"Unknown scenario id '{scenario_id}'.")
    return SCENARIOS[scenario_id - 1]


def enumerate_viewpoints(scenario: ScenarioSpec) -> List[ViewpointSpec]:
    """
    Lists camera views under which a scenario is observed. Views that are
    identical because of the scenario's symmetry are left out.

    Args:
        scenario:               one of the canonical scenario specs

    Returns:
        list of ViewpointSpec ordered by azimuth, then elevation
    """
    if get_scenario(scenario.id) != scenario:
        raise CatalogError(f"Scenario '{scenario.id}' is not a canonical spec.")

    if scenario.symmetry is Symmetry.FULL:
        views = [ViewpointSpec(a, DEFAULT_ELEVATION) for a in FULL_AZIMUTHS]
    elif scenario.symmetry is Symmetry.HALF:
        views = [ViewpointSpec(a, DEFAULT_ELEVATION) for a in HALF_AZIMUTHS]
    elif scenario.symmetry is Symmetry.AXIAL:
        views = [ViewpointSpec(0.0, e) for e in AXIAL_ELEVATIONS]
    else:
        views = [ViewpointSpec(0.0, DEFAULT_ELEVATION)]
    return sorted(views)


@lru_cache(maxsize=1)
def _catalog() -> Tuple[CatalogEntry, ...]:
    entries = []
    for scenario in SCENARIOS:
        for view in enumerate_viewpoints(scenario):
            entries.append(CatalogEntry(len(entries) + 1, scenario.id, view))
    return tuple(entries)


def build_catalog() -> List[CatalogEntry]:
    """
    Builds the flat catalog ordered by (scenario_id, azimuth, elevation)

    Returns:
        list of 66 CatalogEntry
    """
    return list(_catalog())


def lookup(entry_id: int) -> CatalogEntry:
    """
    Finds catalog entry by its id

    Args:
        entry_id:               catalog entry id, 1-66

    Returns:
        CatalogEntry
    """
    entries = _catalog()
    if not isinstance(entry_id, Integral) or not 1 <= entry_id <= len(entries):
        raise CatalogError(
            f"Catalog entry id '{entry_id}' out of range 1-{len(entries)}."
        )
    return entries[entry_id - 1]
