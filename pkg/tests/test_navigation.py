import pytest
from hypothesis import given, strategies as st

from linetrace.navigation import (
    NavCommand,
    NavConfig,
    VelocitySetpoint,
    altitude_rate,
    command_to_setpoint,
    decide,
    navigate_frame,
)
from linetrace.tracking import TrackedCentroid

W = 640


def tracked(cx, valid=True):
    return TrackedCentroid(cx, 240.0, None, valid)


def test_decide_zones():
    cfg = NavConfig()
    band = cfg.deadband_fraction * W
    assert decide(tracked(W / 2), W, cfg) is NavCommand.FORWARD
    assert decide(tracked(W / 2 - band - 1), W, cfg) is NavCommand.YAW_LEFT
    assert decide(tracked(W / 2 + band + 1), W, cfg) is NavCommand.YAW_RIGHT
    assert decide(tracked(W / 2, valid=False), W, cfg) is NavCommand.SEARCH


def test_deadband_edges_are_forward():
    cfg = NavConfig()
    band = cfg.deadband_fraction * W
    assert decide(tracked(W / 2 - band), W, cfg) is NavCommand.FORWARD
    assert decide(tracked(W / 2 + band), W, cfg) is NavCommand.FORWARD


def test_setpoints_per_command():
    cfg = NavConfig()
    assert command_to_setpoint(NavCommand.FORWARD, cfg, 1.0) == VelocitySetpoint(0.05, 0.0, 0.0)
    left = command_to_setpoint(NavCommand.YAW_LEFT, cfg, 1.0)
    assert left.vx_body == 0 and left.yaw_rate < 0
    right = command_to_setpoint(NavCommand.YAW_RIGHT, cfg, 1.0)
    assert right.vx_body == 0 and right.yaw_rate > 0
    search = command_to_setpoint(NavCommand.SEARCH, cfg, 1.0)
    assert search == VelocitySetpoint(0.0, cfg.search_yaw_rate, 0.0)


def test_navigate_frame_examples():
    cfg = NavConfig()
    assert navigate_frame(tracked(W / 2), W, cfg, 1.0) == (NavCommand.FORWARD, VelocitySetpoint(0.05, 0.0, 0.0))
    cmd, sp = navigate_frame(tracked(0, valid=False), W, cfg, 1.0)
    assert cmd is NavCommand.SEARCH and sp.vx_body == 0 and sp.yaw_rate == cfg.search_yaw_rate
    cmd, sp = navigate_frame(tracked(W - 1), W, cfg, 1.0)
    assert cmd is NavCommand.YAW_RIGHT and sp.yaw_rate > 0


def test_altitude_law_is_clamped():
    cfg = NavConfig()
    assert altitude_rate(cfg, 0.0) == cfg.max_climb_rate
    assert altitude_rate(cfg, 5.0) == -cfg.max_climb_rate
    assert altitude_rate(cfg, 0.8) == pytest.approx(0.2)
    assert altitude_rate(cfg, 1.0) == 0.0


def test_config_validation():
    with pytest.raises(ValueError):
        NavConfig(deadband_fraction=0.5)
    with pytest.raises(ValueError):
        NavConfig(yaw_rate=0)
    with pytest.raises(ValueError):
        decide(tracked(1.0), 0)


@given(st.floats(0, W), st.booleans(), st.floats(0, 3))
def test_exclusivity_and_bounds(cx, valid, alt):
    cfg = NavConfig()
    _, sp = navigate_frame(tracked(cx, valid), W, cfg, alt)
    if sp.vx_body > 0:
        assert sp.yaw_rate == 0
    if sp.yaw_rate != 0:
        assert sp.vx_body == 0
    assert abs(sp.vx_body) <= cfg.forward_speed
    assert abs(sp.vz) <= cfg.max_climb_rate


@given(st.floats(0, W / 2, exclude_max=True), st.floats(0, 3))
def test_mirror_symmetry(cx, alt):
    cfg = NavConfig()
    cmd_l, sp_l = navigate_frame(tracked(cx), W, cfg, alt)
    cmd_r, sp_r = navigate_frame(tracked(W - cx), W, cfg, alt)
    mirror = {NavCommand.YAW_LEFT: NavCommand.YAW_RIGHT, NavCommand.FORWARD: NavCommand.FORWARD}
    assert mirror[cmd_l] is cmd_r
    assert sp_r == VelocitySetpoint(sp_l.vx_body, -sp_l.yaw_rate, sp_l.vz)
    if cx < W / 2 - cfg.deadband_fraction * W:
        assert sp_l.yaw_rate < 0 and sp_l.vx_body == 0
