# -*- coding: utf-8 -*-

"""
This module projects 3D trajectories and motion directions onto the image
plane of a catalog viewpoint
"""
from __future__ import annotations

from dataclasses import dataclass
import logging
import math
from typing import TYPE_CHECKING, List, NamedTuple, Sequence, Union

import numpy as np

from newton_scenarios.catalog import ViewpointSpec
from newton_scenarios.errors import FlowUndefinedError, ParameterError, ProjectionError

if TYPE_CHECKING:
    from newton_scenarios.worker_dynamics import Trajectory, TrajectoryState


mlogger = logging.getLogger("newton-scenarios")


CANONICAL_DISTANCE = 10.0
CANONICAL_FOCAL = 1.0
MIN_DEPTH = 1e-9
FLOW_EPS = 1e-9


class ImagePoint(NamedTuple):
    u: float
    v: float


def rotation_matrix(azimuth: float, elevation: float) -> np.ndarray:
    """
    Returns world-to-camera rotation; rows are the camera right, up and
    forward axes expressed in world coordinates (z up)

    Args:
        azimuth:                degrees, 0 shows +x motion moving right
        elevation:              degrees above the horizon

    Returns:
        3x3 orthonormal matrix
    """
    a = math.radians(azimuth)
    e = math.radians(elevation)
    sa, ca = math.sin(a), math.cos(a)
    se, ce = math.sin(e), math.cos(e)
    right = [ca, sa, 0.0]
    up = [-sa * se, ca * se, ce]
    forward = [-sa * ce, ca * ce, -se]
    return np.array([right, up, forward])


@dataclass(frozen=True)
class Camera:
    azimuth: float
    elevation: float
    distance: float = CANONICAL_DISTANCE
    focal: float = CANONICAL_FOCAL

    def __post_init__(self):
        if not self.distance > 0:
            raise ParameterError(
                f"Camera distance must be positive, got {self.distance}."
            )
        if not self.focal > 0:
            raise ParameterError(f"Camera focal must be positive, got {self.focal}.")

    @classmethod
    def from_viewpoint(
        cls,
        view: ViewpointSpec,
        distance: float = CANONICAL_DISTANCE,
        focal: float = CANONICAL_FOCAL,
    ) -> "Camera":
        return cls(view.azimuth, view.elevation, distance, focal)

    @property
    def rotation(self) -> np.ndarray:
        return rotation_matrix(self.azimuth, self.elevation)

    @property
    def center(self) -> np.ndarray:
        return -self.distance * self.rotation[2]

    def to_camera(self, p: Sequence[float]) -> np.ndarray:
        return self.rotation @ (np.asarray(p, dtype=float) - self.center)


def project_point(cam: Camera, p: Sequence[float]) -> ImagePoint:
    """
    Pinhole projection of a world point; v axis points up

    Args:
        cam:                    camera
        p:                      world point

    Returns:
        ImagePoint in normalized image units
    """
    pc = cam.to_camera(p)
    if pc[2] <= MIN_DEPTH:
        raise ProjectionError(
            f"Point {tuple(np.asarray(p, dtype=float))} lies at or behind "
            f"the camera plane (depth {pc[2]:.6g})."
        )
    return ImagePoint(
        float(cam.focal * pc[0] / pc[2]), float(cam.focal * pc[1] / pc[2])
    )


def project_curve(
    cam: Camera, traj: Union[Trajectory, Sequence[TrajectoryState]]
) -> List[ImagePoint]:
    """
    Projects every state position of a trajectory, keeping order and count

    Args:
        cam:                    camera
        traj:                   Trajectory or a sequence of its states

    Returns:
        list of ImagePoint
    """
    states = getattr(traj, "states", traj)
    points = []
    for i, state in enumerate(states):
        try:
            points.append(project_point(cam, state.position))
        except ProjectionError as exc:
            raise ProjectionError(f"State {i} cannot be projected. {exc}") from exc
    return points


def project_direction(
    cam: Camera, position: Sequence[float], direction: Sequence[float]
) -> np.ndarray:
    """
    Normalized image-plane direction of a 3D direction applied at a point,
    i.e. the perspective image velocity of a point moving along it

    Args:
        cam:                    camera
        position:               world point the direction is attached to
        direction:              world direction vector

    Returns:
        2D unit vector, or the zero vector when the motion has no image
        component
    """
    pc = cam.to_camera(position)
    if pc[2] <= MIN_DEPTH:
        raise ProjectionError(
            f"Point {tuple(np.asarray(position, dtype=float))} lies at or behind "
            f"the camera plane (depth {pc[2]:.6g})."
        )
    dc = cam.rotation @ np.asarray(direction, dtype=float)
    flow = np.array(
        [
            dc[0] * pc[2] - pc[0] * dc[2],
            dc[1] * pc[2] - pc[1] * dc[2],
        ]
    ) / (pc[2] ** 2)
    norm = math.hypot(flow[0], flow[1])
    if norm <= FLOW_EPS * np.linalg.norm(dc) / pc[2]:
        return np.zeros(2)
    return flow / norm


def project_flow(cam: Camera, state: TrajectoryState) -> np.ndarray:
    """
    Short-term flow direction of a state as seen by the camera

    Args:
        cam:                    camera
        state:                  trajectory state with a nonzero velocity_dir

    Returns:
        2D unit vector or zero vector (motion along the optical axis)
    """
    if not np.any(state.velocity_dir):
        raise FlowUndefinedError(f"State at t={state.t:.6g} s has no motion.")
    return project_direction(cam, state.position, state.velocity_dir)
