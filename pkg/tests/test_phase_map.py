import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ionlaser.errors import ConfigError, InsufficientDataError
from ionlaser.lindblad import ModelParams
from ionlaser.phase_map import (
    PhasePoint,
    Region,
    SweepConfig,
    ThresholdCurve,
    boundary_L2,
    classify,
    solve_point,
    sweep,
    threshold_L1,
)


def logistic_column(g_h, step, width=0.08, height=7.0, g_c=2.0, base=0.05):
    u = np.log10(g_h)
    mean = base + height / (1.0 + np.exp(-(u - math.log10(step)) / width))
    return [PhasePoint(float(g), g_c, float(m), None, True, 0.0) for g, m in zip(g_h, mean)]


@settings(max_examples=40, deadline=None)
@given(st.floats(-1.0, 0.3), st.floats(0.03, 0.3), st.integers(25, 60), st.floats(0.1, 100.0))
def test_l1_recovers_planted_step(log_step, width, points, height):
    g_h = np.logspace(-1.3, 0.6, points)
    spacing = (0.6 + 1.3) / (points - 1)
    star = threshold_L1(logistic_column(g_h, 10**log_step, width, height))
    assert star is not None
    assert abs(math.log10(star) - log_step) <= spacing


def test_l1_invariant_to_rescaling_mean():
    g_h = np.logspace(-1.3, 0.6, 30)
    a = threshold_L1(logistic_column(g_h, 0.3, height=1.0))
    b = threshold_L1(logistic_column(g_h, 0.3, height=250.0))
    assert math.isclose(a, b, rel_tol=1e-12)


def test_l1_no_interior_maximum():
    g_h = np.logspace(-1, 0.5, 12)
    linear = [PhasePoint(float(g), 1.0, float(10 * np.log10(g) + 20), None, True, 0.0) for g in g_h]
    # constant slope: the first maximum is at the edge
    assert threshold_L1(linear) is None
    flat = [PhasePoint(float(g), 1.0, 1.0, None, True, 0.0) for g in g_h]
    assert threshold_L1(flat) is None


def test_l1_ignores_unconverged_and_needs_points():
    g_h = np.logspace(-1.3, 0.6, 25)
    col = logistic_column(g_h, 0.3)
    col[-1] = PhasePoint(col[-1].g_h, 2.0, 1e6, None, False, 0.5, Region.C)
    assert abs(math.log10(threshold_L1(col)) - math.log10(0.3)) < 0.08
    with pytest.raises(InsufficientDataError):
        threshold_L1(col[:4])


def test_l1_log_mean_variant_differs():
    g_h = np.logspace(-1.3, 0.6, 25)
    col = logistic_column(g_h, 0.3, base=0.01)
    assert threshold_L1(col, log_mean=True) < threshold_L1(col)


def test_l2_switch_midpoint():
    flags = [True, True, True, False, False]
    col = [PhasePoint(g, 0.5, 1.0, None, f, 0.0) for g, f in zip([0.01, 0.1, 1.0, 10.0, 100.0], flags)]
    assert math.isclose(boundary_L2(col), math.sqrt(10.0), rel_tol=1e-12)
    assert boundary_L2([PhasePoint(1.0, 1.0, 1.0, None, True, 0.0)] * 3) is None
    assert boundary_L2([PhasePoint(1.0, 1.0, 1.0, None, False, 1.0)] * 3) is None


def test_threshold_curve_interpolation():
    curve = ThresholdCurve(((1.0, 0.1), (10.0, 1.0)), "L1")
    assert math.isclose(curve.at(math.sqrt(10)), math.sqrt(0.1), rel_tol=1e-12)
    assert curve.at(0.1) == pytest.approx(0.1)  # clamped
    assert ThresholdCurve((), "L1").at(1.0) is None


def test_classify():
    l1 = ThresholdCurve(((1.0, 0.3), (4.0, 0.3)), "L1")
    below = PhasePoint(0.1, 2.0, 0.1, 1.8, True, 0.0)
    above = PhasePoint(1.0, 2.0, 5.0, 1.0, True, 0.0)
    failed = PhasePoint(1.0, 2.0, None, None, False, float("nan"))
    assert classify(below, l1) is Region.A
    assert classify(above, l1) is Region.B
    assert classify(failed, l1) is Region.C
    empty = ThresholdCurve((), "L1")
    assert classify(below, empty) is Region.A
    assert classify(above, empty) is Region.B


def test_config_validation():
    with pytest.raises(ConfigError):
        SweepConfig((0.1, 0.2), (1.0, 2.0, 3.0))
    with pytest.raises(ConfigError):
        SweepConfig((0.1, 0.3, 0.2), (1.0, 2.0, 3.0))
    with pytest.raises(ConfigError):
        SweepConfig((0.1, 0.2, 0.3), (1.0, 2.0, 3.0), gamma_c=-1.0)
    with pytest.raises(ConfigError):
        SweepConfig((0.1, 0.2, 0.3), (1.0, 2.0, 3.0), workers=0)
    cfg = SweepConfig.log_grid((0.05, 4.0), 5, (0.5, 4.0), 3)
    assert cfg.cells()[:2] == [(0, 0), (0, 1)] and len(cfg.cells()) == 15


def test_solve_point_turns_failures_into_c():
    p = solve_point(ModelParams(0.0, 0.0, fock_cutoff=4))
    assert p.region is Region.C and not p.converged and math.isnan(p.leak)
    assert p.error.startswith("AmbiguityError")


def test_solve_point_leak_flag():
    ok = solve_point(ModelParams(0.1, 2.0, fock_cutoff=20))
    assert ok.converged and ok.g2_zero is not None and ok.region is None
    bad = solve_point(ModelParams(3.0, 0.5, fock_cutoff=8))
    assert not bad.converged and bad.region is Region.C


@pytest.fixture(scope="module")
def small_config():
    return SweepConfig.log_grid((0.05, 3.0), 7, (0.5, 2.0), 3, fock_cutoff=15)


def test_sweep_parallel_matches_serial(small_config):
    serial = sweep(small_config)
    parallel = sweep(SweepConfig(**{**small_config.__dict__, "workers": 2}))
    assert serial.points == parallel.points
    assert serial.l1 == parallel.l1 and serial.l2 == parallel.l2


def test_sweep_resume_uses_done_cells(small_config):
    full = sweep(small_config)
    cells = small_config.cells()
    done = {c: p for c, p in zip(cells[:10], full.points[:10])}
    seen = []
    resumed = sweep(small_config, done=done, callback=lambda c, p: seen.append(c))
    assert seen == cells[10:]
    assert resumed.points == full.points


def test_sweep_regions_topology(small_config):
    res = sweep(small_config)
    for p in res.points:
        assert p.region in (Region.A, Region.B, Region.C)
        if not p.converged:
            assert p.region is Region.C
    # at the strongest cooling the weakest heating sits in the thermal region
    first = next(p for p in res.points if p.g_c == small_config.g_c_axis[-1])
    assert first.region is Region.A
