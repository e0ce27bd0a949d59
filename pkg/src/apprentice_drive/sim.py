"""Straight-road longitudinal vehicle simulator with a speed limit and a stop sign.

The vehicle is a point mass under a force balance::

    m dv/dt = pedal+ * F_max - pedal- * F_brk - c_d v^2 - F_roll

integrated with semi-implicit Euler.  Rolling resistance opposes motion; at
rest it acts as static resistance of at most ``F_roll`` against the drive
force, so a car at rest never starts rolling backwards or on a light pedal.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .config import RoadConfig, SimConfig, VehicleParams
from .errors import SimulationFault


class Terminal(str, enum.Enum):
    RUNNING = "Running"
    STOPPED = "Stopped"
    CROSSED_SIGN = "CrossedSign"
    TIMEOUT = "TimeOut"

    @property
    def done(self) -> bool:
        return self is not Terminal.RUNNING


@dataclass(frozen=True)
class SimState:
    position: float
    velocity: float
    accel: float = 0.0
    prev_action: float = 0.0
    step_index: int = 0
    slow_steps: int = 0  # consecutive steps with velocity below the stop threshold


@dataclass(frozen=True)
class Observation:
    velocity: float
    d_stop: float
    speed_limit: float
    prev_action: float


@dataclass(frozen=True)
class StepResult:
    next_state: SimState
    terminal: Terminal
    overshoot: bool


def reset(road: RoadConfig, initial_velocity: float) -> SimState:
    if not 0.0 <= initial_velocity <= 30.0:
        raise ValueError(f"initial velocity must lie in [0, 30] m/s, got {initial_velocity}")
    return SimState(position=0.0, velocity=float(initial_velocity))


def clamp_action(action: float) -> float:
    return min(1.0, max(-1.0, action))


def drive_force(pedal: float, params: VehicleParams) -> float:
    if pedal >= 0.0:
        return pedal * params.max_traction_force
    return pedal * params.max_brake_force


def step(
    state: SimState,
    action: float,
    params: VehicleParams,
    road: RoadConfig,
    sim: SimConfig = SimConfig(),
) -> StepResult:
    action = float(action)
    if not (math.isfinite(action) and math.isfinite(state.velocity) and math.isfinite(state.position)):
        raise SimulationFault(f"non-finite input at step {state.step_index}: action={action}, state={state}")
    pedal = clamp_action(action)
    dt = sim.dt
    v = state.velocity

    force = drive_force(pedal, params) - params.drag_coeff * v * v
    if v > 0.0:
        force -= params.rolling_resist_force
    elif force > 0.0:
        force = max(0.0, force - params.rolling_resist_force)
    v_next = max(0.0, v + dt * force / params.mass)
    position = state.position + dt * v_next
    accel = (v_next - v) / dt

    slow = state.slow_steps + 1 if v_next < sim.stop_speed else 0
    index = state.step_index + 1
    nxt = SimState(position, v_next, accel, pedal, index, slow)

    overshoot = position > road.length
    if overshoot:
        terminal = Terminal.CROSSED_SIGN
    elif slow >= sim.stop_steps:
        terminal = Terminal.STOPPED
    elif index >= sim.max_steps:
        terminal = Terminal.TIMEOUT
    else:
        terminal = Terminal.RUNNING
    return StepResult(nxt, terminal, overshoot)


def observe(state: SimState, road: RoadConfig) -> Observation:
    return Observation(
        velocity=state.velocity,
        d_stop=road.length - state.position,
        speed_limit=road.speed_limit,
        prev_action=state.prev_action,
    )


class Env:
    """Stateful convenience wrapper around :func:`reset` / :func:`step`."""

    def __init__(
        self,
        params: VehicleParams = VehicleParams(),
        road: RoadConfig = RoadConfig(),
        sim: SimConfig = SimConfig(),
    ):
        self.params = params
        self.road = road
        self.sim = sim
        self.state: SimState | None = None
        self.terminal = Terminal.RUNNING

    def reset(self, initial_velocity: float) -> Observation:
        self.state = reset(self.road, initial_velocity)
        self.terminal = Terminal.RUNNING
        return observe(self.state, self.road)

    def step(self, action: float) -> tuple[Observation, Terminal]:
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        if self.terminal.done:
            raise RuntimeError(f"episode already ended ({self.terminal.value})")
        result = step(self.state, action, self.params, self.road, self.sim)
        self.state = result.next_state
        self.terminal = result.terminal
        return observe(self.state, self.road), result.terminal
