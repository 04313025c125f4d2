# -*- coding: utf-8 -*-

"""
This module simulates the canonical dynamics of the 12 Newtonian scenarios
and samples them into the states stored in the scenario bank
"""
from dataclasses import dataclass, field
import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from newton_scenarios.catalog import ViewpointSpec, get_scenario
from newton_scenarios.errors import ParameterError
from newton_scenarios.worker_camera import rotation_matrix


mlogger = logging.getLogger("newton-scenarios")


GRAVITY = 9.81
SPEED_EPS = 1e-9
STATES_PER_ENTRY = 10
RAW_FEATURE_LENGTH = 10

Vector = Tuple[float, float, float]
Kinematics = Tuple[np.ndarray, np.ndarray, np.ndarray]


@dataclass(frozen=True)
class SimParams:
    gravity: float = GRAVITY
    friction_mu: float = 0.3
    pendulum_length: float = 1.0
    initial_speed: float = 0.0
    initial_direction: Vector = (1.0, 0.0, 0.0)
    duration: float = 1.0
    dt: float = 1e-3
    initial_position: Vector = (0.0, 0.0, 0.25)
    initial_angle: float = 0.5
    incline_angle: float = math.radians(30.0)
    push_accel: float = 5.0
    rest_height: float = 0.25

    def validate(self) -> None:
        if not self.dt > 0:
            raise ParameterError(f"Time step must be positive, got dt={self.dt}.")
        if not self.duration >= 10 * self.dt:
            raise ParameterError(
                f"Duration {self.duration} s is shorter than 10 time steps "
                f"of {self.dt} s."
            )
        if len(self.initial_direction) != 3:
            raise ParameterError("Initial direction must be a 3-vector.")
        norm = float(np.linalg.norm(self.initial_direction))
        if abs(norm - 1.0) > 1e-9:
            raise ParameterError(
                f"Initial direction must be a unit vector, its norm is {norm!r}."
            )
        if len(self.initial_position) != 3:
            raise ParameterError("Initial position must be a 3-vector.")
        if not self.pendulum_length > 0:
            raise ParameterError("Pendulum length must be positive.")
        if not 0.0 < self.initial_angle < math.pi:
            raise ParameterError(
                "Pendulum angle must lie strictly between 0 and pi, "
                f"got {self.initial_angle}."
            )
        if not 0.0 <= self.incline_angle < math.pi / 2:
            raise ParameterError(
                f"Incline angle must lie in [0, pi/2), got {self.incline_angle}."
            )
        if self.gravity < 0 or self.friction_mu < 0 or self.initial_speed < 0:
            raise ParameterError(
                "Gravity, friction and initial speed must not be negative."
            )

    @property
    def direction(self) -> np.ndarray:
        return np.asarray(self.initial_direction, dtype=float)

    @property
    def position(self) -> np.ndarray:
        return np.asarray(self.initial_position, dtype=float)

    @property
    def heading(self) -> np.ndarray:
        """horizontal part of the initial direction, +x when it is vertical"""
        h = np.array([self.initial_direction[0], self.initial_direction[1], 0.0])
        norm = np.linalg.norm(h)
        if norm < 1e-12:
            return np.array([1.0, 0.0, 0.0])
        return h / norm

    @property
    def gravity_vector(self) -> np.ndarray:
        return np.array([0.0, 0.0, -self.gravity])


@dataclass(frozen=True, eq=False)
class TrajectoryState:
    t: float
    position: np.ndarray
    velocity_dir: np.ndarray
    force_dir: np.ndarray
    speed: float
    phase: float = 0.0

    def to_dict(self) -> Dict:
        return dict(
            t=float(self.t),
            phase=float(self.phase),
            speed=float(self.speed),
            position=[float(x) for x in self.position],
            velocity_dir=[float(x) for x in self.velocity_dir],
            force_dir=[float(x) for x in self.force_dir],
        )

    @classmethod
    def from_dict(cls, data: Dict) -> "TrajectoryState":
        return cls(
            t=float(data["t"]),
            position=np.array(data["position"], dtype=float),
            velocity_dir=np.array(data["velocity_dir"], dtype=float),
            force_dir=np.array(data["force_dir"], dtype=float),
            speed=float(data["speed"]),
            phase=float(data["phase"]),
        )


@dataclass
class Trajectory:
    scenario_id: int
    states: List[TrajectoryState]
    params: SimParams = field(default_factory=SimParams)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def positions(self) -> np.ndarray:
        return np.array([s.position for s in self.states])


def integrate_rk4(
    derivative: Callable[[np.ndarray, float], np.ndarray],
    y0: Sequence[float],
    times: np.ndarray,
) -> np.ndarray:
    """
    Fixed-step classical Runge-Kutta integration

    Args:
        derivative:             f(y, t) returning dy/dt
        y0:                     initial state
        times:                  increasing time grid, times[0] is the start

    Returns:
        array of states, one row per time
    """
    n = len(times)
    y = np.zeros((n, len(y0)))
    y[0] = y0
    for i in range(n - 1):
        h = times[i + 1] - times[i]
        k1 = derivative(y[i], times[i])
        k2 = derivative(y[i] + k1 * h / 2.0, times[i] + h / 2.0)
        k3 = derivative(y[i] + k2 * h / 2.0, times[i] + h / 2.0)
        k4 = derivative(y[i] + k3 * h, times[i] + h)
        y[i + 1] = y[i] + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def time_grid(params: SimParams) -> np.ndarray:
    steps = max(int(round(params.duration / params.dt)), 1)
    return np.linspace(0.0, params.duration, steps + 1)


def _ballistic(params: SimParams, t: np.ndarray) -> Kinematics:
    tt = t[:, None]
    v0 = params.initial_speed * params.direction
    g = params.gravity_vector
    pos = params.position + v0 * tt + 0.5 * g * tt ** 2
    vel = v0 + g * tt
    acc = np.tile(g, (len(t), 1))
    return pos, vel, acc


def _drop(params: SimParams, t: np.ndarray) -> Kinematics:
    pos, vel, acc = _ballistic(params, t)
    g = params.gravity
    vz = params.initial_speed * params.direction[2]
    height = params.position[2] - params.rest_height
    disc = vz ** 2 + 2 * g * height
    if g == 0 or disc < 0:
        return pos, vel, acc
    t_land = (vz + math.sqrt(disc)) / g
    resting = t >= t_land
    landing = _ballistic(params, np.array([t_land]))[0][0]
    landing[2] = params.rest_height
    pos[resting] = landing
    vel[resting] = 0.0
    acc[resting] = 0.0
    return pos, vel, acc


def _uniform(params: SimParams, t: np.ndarray) -> Kinematics:
    v0 = params.initial_speed * params.direction
    pos = params.position + v0 * t[:, None]
    vel = np.tile(v0, (len(t), 1))
    return pos, vel, np.zeros((len(t), 3))


def _static(params: SimParams, t: np.ndarray) -> Kinematics:
    pos = np.tile(params.position, (len(t), 1))
    return pos, np.zeros((len(t), 3)), np.zeros((len(t), 3))


def _incline(params: SimParams, t: np.ndarray) -> Kinematics:
    alpha = params.incline_angle
    h = params.heading
    slope = np.array(
        [math.cos(alpha) * h[0], math.cos(alpha) * h[1], -math.sin(alpha)]
    )
    a = params.gravity * (math.sin(alpha) - params.friction_mu * math.cos(alpha))
    v0 = params.initial_speed
    if a <= 0 and v0 == 0:
        return _static(params, t)
    # friction stronger than the slope stops the body for good
    t_stop = v0 / -a if a < 0 else math.inf
    moving = t < t_stop
    tm = np.minimum(t, t_stop)
    s = v0 * tm + 0.5 * a * tm ** 2
    pos = params.position + s[:, None] * slope
    vel = np.where(moving, v0 + a * t, 0.0)[:, None] * slope
    acc = np.where(moving[:, None], a * slope, 0.0)
    return pos, vel, acc


def _friction_slide(params: SimParams, t: np.ndarray) -> Kinematics:
    h = params.heading
    v0 = params.initial_speed
    decel = params.friction_mu * params.gravity
    t_stop = v0 / decel if decel > 0 else math.inf
    moving = t < t_stop
    tm = np.minimum(t, t_stop)
    s = v0 * tm - 0.5 * decel * tm ** 2
    speed = np.where(moving, v0 - decel * t, 0.0)
    pos = params.position + s[:, None] * h
    vel = speed[:, None] * h
    acc = np.where(moving[:, None], -decel * h, 0.0)
    return pos, vel, acc


def _push(params: SimParams, t: np.ndarray) -> Kinematics:
    h = params.heading
    friction = params.friction_mu * params.gravity

    def accel(v: float) -> float:
        if v > SPEED_EPS or params.push_accel > friction:
            return params.push_accel - friction
        return 0.0

    def derivative(y: np.ndarray, _t: float) -> np.ndarray:
        return np.array([y[1], accel(y[1])])

    y = integrate_rk4(derivative, [0.0, params.initial_speed], t)
    pos = params.position + y[:, 0:1] * h
    vel = y[:, 1:2] * h
    acc = np.array([accel(v) for v in y[:, 1]])[:, None] * h
    return pos, vel, acc


def _pendulum_acceleration(
    params: SimParams, pos: np.ndarray, vel: np.ndarray
) -> np.ndarray:
    """net acceleration of a bob: gravity plus rod tension"""
    length = params.pendulum_length
    n = params.position - pos
    n = n / np.linalg.norm(n, axis=1)[:, None]
    v2 = np.sum(vel ** 2, axis=1)
    tension = v2 / length + params.gravity * n[:, 2]
    return params.gravity_vector + tension[:, None] * n


def _planar_pendulum(params: SimParams, t: np.ndarray) -> Kinematics:
    length = params.pendulum_length
    h = params.heading
    w2 = params.gravity / length

    def derivative(y: np.ndarray, _t: float) -> np.ndarray:
        return np.array([y[1], -w2 * math.sin(y[0])])

    y = integrate_rk4(
        derivative, [-params.initial_angle, params.initial_speed / length], t
    )
    theta, omega = y[:, 0], y[:, 1]
    sin, cos = np.sin(theta), np.cos(theta)
    pos = params.position + length * np.column_stack(
        [sin * h[0], sin * h[1], -cos]
    )
    vel = (length * omega)[:, None] * np.column_stack([cos * h[0], cos * h[1], sin])
    return pos, vel, _pendulum_acceleration(params, pos, vel)


def _conical_pendulum(params: SimParams, t: np.ndarray) -> Kinematics:
    length = params.pendulum_length
    w2 = params.gravity / length
    theta0 = params.initial_angle
    h = params.heading
    phi0 = math.atan2(h[1], h[0]) - math.pi / 2

    def derivative(y: np.ndarray, _t: float) -> np.ndarray:
        theta, _phi, dtheta, dphi = y
        st, ct = math.sin(theta), math.cos(theta)
        return np.array(
            [
                dtheta,
                dphi,
                st * ct * dphi ** 2 - w2 * st,
                -2.0 * dtheta * dphi * ct / st,
            ]
        )

    y0 = [theta0, phi0, 0.0, params.initial_speed / (length * math.sin(theta0))]
    y = integrate_rk4(derivative, y0, t)
    theta, phi, dtheta, dphi = y.T
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    pos = params.position + length * np.column_stack([st * cp, st * sp, -ct])
    vel = length * np.column_stack(
        [
            dtheta * ct * cp - dphi * st * sp,
            dtheta * ct * sp + dphi * st * cp,
            dtheta * st,
        ]
    )
    return pos, vel, _pendulum_acceleration(params, pos, vel)


_KINEMATICS: Dict[int, Callable[[SimParams, np.ndarray], Kinematics]] = {
    1: _ballistic,
    2: _ballistic,
    3: _ballistic,
    4: _uniform,
    5: _static,
    6: _drop,
    7: _conical_pendulum,
    8: _push,
    9: _incline,
    10: _friction_slide,
    11: _ballistic,
    12: _planar_pendulum,
}


def pendulum_period(length: float, amplitude: float, gravity: float = GRAVITY) -> float:
    """large-amplitude period, series in the amplitude up to 4th order"""
    return (
        2
        * math.pi
        * math.sqrt(length / gravity)
        * (1 + amplitude ** 2 / 16 + 11 * amplitude ** 4 / 3072)
    )


def canonical_params(scenario_id: int) -> SimParams:
    """
    Returns the canonical parameters of a scenario; durations are chosen so
    the motion completes

    Args:
        scenario_id:            scenario number, 1-12

    Returns:
        SimParams
    """
    get_scenario(scenario_id)
    g = GRAVITY
    mu = 0.3
    rest = 0.25
    diagonal = (math.sqrt(0.5), 0.0, math.sqrt(0.5))

    if scenario_id == 1:
        return SimParams(
            initial_speed=3.0,
            initial_position=(-0.8, 0.0, 2.0),
            duration=math.sqrt(2 * (2.0 - rest) / g),
        )
    if scenario_id == 2:
        return SimParams(
            initial_direction=(0.0, 0.0, -1.0),
            initial_position=(1.0, 0.0, 3.0),
            duration=math.sqrt(2 * (3.0 - rest) / g),
        )
    if scenario_id == 3:
        speed = 6.0
        return SimParams(
            initial_speed=speed,
            initial_direction=diagonal,
            initial_position=(-1.8, 0.0, rest),
            duration=2 * speed * diagonal[2] / g,
        )
    if scenario_id == 4:
        return SimParams(initial_speed=3.0, initial_position=(-1.5, 0.0, 1.0))
    if scenario_id == 5:
        return SimParams(initial_position=(0.0, 0.0, rest))
    if scenario_id == 6:
        return SimParams(
            initial_direction=(0.0, 0.0, -1.0),
            initial_position=(0.0, 0.0, 2.0),
            duration=math.sqrt(2 * (2.0 - rest) / g) + 0.25,
        )
    if scenario_id == 7:
        theta0 = 0.5
        omega = math.sqrt(g / math.cos(theta0))
        return SimParams(
            initial_speed=math.sin(theta0) * omega,
            initial_position=(0.0, 0.0, 2.0),
            initial_angle=theta0,
            duration=2 * math.pi / omega,
        )
    if scenario_id == 8:
        return SimParams(initial_position=(-0.5, 0.0, rest))
    if scenario_id == 9:
        alpha = math.radians(30.0)
        a = g * (math.sin(alpha) - mu * math.cos(alpha))
        return SimParams(
            initial_position=(-0.8, 0.0, 1.25),
            incline_angle=alpha,
            duration=math.sqrt(2 * 2.0 / a),
        )
    if scenario_id == 10:
        speed = 3.0
        return SimParams(
            initial_speed=speed,
            initial_position=(-0.75, 0.0, rest),
            duration=1.25 * speed / (mu * g),
        )
    if scenario_id == 11:
        speed = 5.0
        return SimParams(
            initial_speed=speed,
            initial_direction=(0.0, 0.0, 1.0),
            initial_position=(0.0, 0.0, rest),
            duration=2 * speed / g,
        )
    return SimParams(
        initial_position=(0.0, 0.0, 2.0),
        initial_angle=0.5,
        duration=pendulum_period(1.0, 0.5, g),
    )


def _unit_rows(vectors: np.ndarray, eps: float) -> Tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(vectors, axis=1)
    units = np.zeros_like(vectors)
    moving = norms > eps
    units[moving] = vectors[moving] / norms[moving][:, None]
    return units, norms


def simulate(scenario_id: int, params: Optional[SimParams] = None) -> Trajectory:
    """
    Simulates a scenario on a fixed time grid; closed form where it is exact,
    RK4 for the pendulums and the continuous push

    Args:
        scenario_id:            scenario number, 1-12
        params:                 simulation parameters, canonical when omitted

    Returns:
        Trajectory
    """
    get_scenario(scenario_id)
    if params is None:
        params = canonical_params(scenario_id)
    params.validate()

    times = time_grid(params)
    pos, vel, acc = _KINEMATICS[scenario_id](params, times)
    vdir, speed = _unit_rows(vel, SPEED_EPS)
    fdir, _ = _unit_rows(acc, SPEED_EPS)

    states = [
        TrajectoryState(
            t=float(times[i]),
            position=pos[i],
            velocity_dir=vdir[i],
            force_dir=fdir[i],
            speed=float(speed[i]) if speed[i] > SPEED_EPS else 0.0,
            phase=float(times[i] / params.duration),
        )
        for i in range(len(times))
    ]
    mlogger.debug(
        f"Simulated scenario {scenario_id}: {len(states)} states over "
        f"{params.duration:.4f} s."
    )
    return Trajectory(scenario_id=scenario_id, states=states, params=params)


def sample_indices(count: int, n: int = STATES_PER_ENTRY) -> List[int]:
    """indices round(k(N-1)/(n-1)), rounding half up"""
    return [(2 * k * (count - 1) + (n - 1)) // (2 * (n - 1)) for k in range(n)]


def sample_states(traj: Trajectory, n: int = STATES_PER_ENTRY) -> List[TrajectoryState]:
    """
    Picks n equally spaced states, first and last included

    Args:
        traj:                   simulated trajectory
        n:                      number of states

    Returns:
        list of TrajectoryState
    """
    if n < 2:
        raise ParameterError(f"At least 2 states must be sampled, got {n}.")
    if len(traj.states) < n:
        raise ParameterError(
            f"Trajectory has {len(traj.states)} states, cannot sample {n}."
        )
    return [traj.states[i] for i in sample_indices(len(traj.states), n)]


def state_raw_features(state: TrajectoryState, view: ViewpointSpec) -> np.ndarray:
    """
    Analytic stand-in for a rendered frame: camera-frame position, velocity
    direction, force direction and the normalized phase

    Args:
        state:                  trajectory state
        view:                   catalog viewpoint

    Returns:
        10-component feature vector
    """
    rot = rotation_matrix(view.azimuth, view.elevation)
    return np.concatenate(
        [
            rot @ state.position,
            rot @ state.velocity_dir,
            rot @ state.force_dir,
            [state.phase],
        ]
    )
