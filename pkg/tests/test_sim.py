import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apprentice_drive.config import RoadConfig, SimConfig, VehicleParams
from apprentice_drive.errors import SimulationFault
from apprentice_drive.sim import Env, SimState, Terminal, observe, reset, step

ROAD = RoadConfig()
PARAMS = VehicleParams()


def test_reset():
    s = reset(ROAD, 16.667)
    assert (s.position, s.velocity, s.accel, s.prev_action, s.step_index) == (0.0, 16.667, 0.0, 0.0, 0)
    assert reset(ROAD, 0.0).velocity == 0.0
    with pytest.raises(ValueError):
        reset(ROAD, -1.0)
    with pytest.raises(ValueError):
        reset(ROAD, 31.0)


def test_rest_stays_at_rest():
    r = step(reset(ROAD, 0.0), 0.0, PARAMS, ROAD)
    assert r.next_state.velocity == 0.0 and r.next_state.position == 0.0


def test_full_pedal_from_rest():
    r = step(reset(ROAD, 0.0), 1.0, PARAMS, ROAD)
    assert r.next_state.velocity == pytest.approx(0.1 * (4500 - 176) / 1498, abs=1e-12)
    assert r.next_state.velocity == pytest.approx(0.2886, abs=1e-4)


def test_full_brake_deceleration():
    v = 16.667
    r = step(reset(ROAD, v), -1.0, PARAMS, ROAD)
    expected = (12000 + 0.42 * v * v + 176) / 1498
    assert -r.next_state.accel == pytest.approx(expected, rel=1e-12)
    assert -r.next_state.accel == pytest.approx(8.20, abs=1e-2)
    assert -r.next_state.accel > 0.5 * 9.81


def test_action_is_clamped():
    a = step(reset(ROAD, 10.0), 7.0, PARAMS, ROAD).next_state
    b = step(reset(ROAD, 10.0), 1.0, PARAMS, ROAD).next_state
    assert a == b and a.prev_action == 1.0


def test_observe():
    assert observe(SimState(0.0, 1.0), ROAD).d_stop == 300.0
    assert observe(SimState(300.0, 1.0), ROAD).d_stop == 0.0
    assert observe(SimState(305.0, 1.0), ROAD).d_stop == -5.0


def test_terminals():
    s = reset(ROAD, 0.0)
    kinds = []
    for _ in range(3):
        r = step(s, 0.0, PARAMS, ROAD)
        s = r.next_state
        kinds.append(r.terminal)
    assert kinds == [Terminal.RUNNING, Terminal.RUNNING, Terminal.STOPPED]

    r = step(SimState(299.5, 20.0), 1.0, PARAMS, ROAD)
    assert r.terminal is Terminal.CROSSED_SIGN and r.overshoot

    sim = SimConfig(max_steps=5)
    s = reset(ROAD, 5.0)
    for _ in range(5):
        r = step(s, 0.1, PARAMS, ROAD, sim)
        s = r.next_state
    assert r.terminal is Terminal.TIMEOUT


def test_non_finite_faults():
    with pytest.raises(SimulationFault):
        step(reset(ROAD, 5.0), float("nan"), PARAMS, ROAD)
    with pytest.raises(SimulationFault):
        step(SimState(0.0, float("inf")), 0.0, PARAMS, ROAD)


@settings(max_examples=60, deadline=None)
@given(
    v0=st.floats(0, 30),
    actions=st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=200),
)
def test_invariants_under_random_actions(v0, actions):
    road = RoadConfig(length=1e6)
    s = reset(road, v0)
    bound = max(PARAMS.max_traction_force, PARAMS.max_brake_force) / PARAMS.mass + PARAMS.drag_coeff * PARAMS.top_speed**2 / PARAMS.mass
    for a in actions:
        r = step(s, a, PARAMS, road)
        n = r.next_state
        assert n.velocity >= 0.0
        assert n.position >= s.position
        assert -1.0 <= n.prev_action <= 1.0
        assert abs(n.accel) <= bound + 1e-9
        s = n
        if r.terminal.done:
            break


def test_full_pedal_monotone_and_bounded():
    road = RoadConfig(length=1e7)
    s = reset(road, 0.0)
    top = math.sqrt((PARAMS.max_traction_force - PARAMS.rolling_resist_force) / PARAMS.drag_coeff)
    assert PARAMS.top_speed == pytest.approx(top)
    prev = 0.0
    for _ in range(900):
        s = step(s, 1.0, PARAMS, road, SimConfig(max_steps=10**6)).next_state
        assert prev <= s.velocity <= top
        prev = s.velocity


def test_determinism():
    rng = np.random.default_rng(3)
    actions = rng.uniform(-1, 1, 300)

    def run():
        s, out = reset(ROAD, 12.0), []
        for a in actions:
            r = step(s, a, PARAMS, ROAD)
            s = r.next_state
            out.append(s)
            if r.terminal.done:
                break
        return out

    assert run() == run()


def test_env_wrapper():
    env = Env()
    with pytest.raises(RuntimeError):
        env.step(0.0)
    obs = env.reset(0.0)
    assert obs.d_stop == 300.0
    for _ in range(3):
        obs, term = env.step(0.0)
    assert term is Terminal.STOPPED
    with pytest.raises(RuntimeError):
        env.step(0.0)
