"""Sweeps of the (g_h, g_c) plane, region labels and the L1/L2 curves."""
from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import ConfigError, InsufficientDataError, IonLaserError
from .lindblad import ModelParams, build_liouvillian
from .observables import MEAN_FLOOR, g2_zero, phonon_number_distribution
from .solvers import DEFAULT_OPTIONS, LEAK_THRESHOLD, SolverOptions, default_leak_levels, steady_state

log = logging.getLogger(__name__)

MIN_L1_POINTS = 5
G2_BAND = 0.1


class Region(str, enum.Enum):
    A = "A"  # thermal
    B = "B"  # phonon laser
    C = "C"  # not converged at this cutoff


@dataclass(frozen=True)
class SweepConfig:
    g_h_axis: tuple
    g_c_axis: tuple
    fock_cutoff: int = 60
    gamma_h: float = 1.0
    gamma_c: float = 100.0
    solver: SolverOptions = DEFAULT_OPTIONS
    workers: int = 1
    leak_threshold: float = LEAK_THRESHOLD

    def __post_init__(self):
        object.__setattr__(self, "g_h_axis", tuple(float(v) for v in self.g_h_axis))
        object.__setattr__(self, "g_c_axis", tuple(float(v) for v in self.g_c_axis))
        for name in ("g_h_axis", "g_c_axis"):
            axis = np.asarray(getattr(self, name))
            if len(axis) < 3:
                raise ConfigError(name, "needs at least 3 points")
            if np.any(axis <= 0) or np.any(np.diff(axis) <= 0):
                raise ConfigError(name, "must be positive and strictly ascending")
        if self.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        # parameter validation happens here, before any solve
        self.params_for(self.g_h_axis[0], self.g_c_axis[0])

    @classmethod
    def log_grid(cls, g_h_range, n_h, g_c_range, n_c, **kw) -> SweepConfig:
        g_h = np.logspace(math.log10(g_h_range[0]), math.log10(g_h_range[1]), n_h)
        g_c = np.logspace(math.log10(g_c_range[0]), math.log10(g_c_range[1]), n_c)
        return cls(tuple(g_h), tuple(g_c), **kw)

    def params_for(self, g_h: float, g_c: float) -> ModelParams:
        return ModelParams(g_h, g_c, self.gamma_h, self.gamma_c, self.fock_cutoff)

    def cells(self) -> list[tuple[int, int]]:
        """Grid indices ``(i_c, i_h)`` in row-major order over g_c."""
        return [(i, j) for i in range(len(self.g_c_axis)) for j in range(len(self.g_h_axis))]


@dataclass(frozen=True)
class PhasePoint:
    g_h: float
    g_c: float
    mean_n: Optional[float]
    g2_zero: Optional[float]
    converged: bool
    leak: float
    region: Optional[Region] = None
    g2_zero_literal: Optional[float] = None
    residual: Optional[float] = None
    error: Optional[str] = None


@dataclass(frozen=True)
class ThresholdCurve:
    points: tuple  # ((g_c, g_h_star), ...) ascending in g_c
    method: str

    def at(self, g_c: float) -> Optional[float]:
        """Log-log interpolated g_h on the curve, clamped at the ends."""
        if not self.points:
            return None
        gc, gh = np.log10(np.array(self.points, dtype=float)).T
        return float(10 ** np.interp(math.log10(g_c), gc, gh))


@dataclass(frozen=True)
class SweepResult:
    config: SweepConfig
    points: tuple
    l1: ThresholdCurve
    l2: ThresholdCurve
    no_threshold: tuple = field(default=())  # g_c values where L1 was not detected


def solve_point(
    params: ModelParams,
    opts: SolverOptions = DEFAULT_OPTIONS,
    leak_threshold: float = LEAK_THRESHOLD,
) -> PhasePoint:
    """Steady state and statistics for one grid cell; solver failures become C points."""
    try:
        res = steady_state(build_liouvillian(params), opts)
    except IonLaserError as exc:
        return PhasePoint(params.g_h, params.g_c, None, None, False, float("nan"),
                          Region.C, error=f"{type(exc).__name__}: {exc}")
    dist = phonon_number_distribution(res.rho_ss)
    converged = res.leak <= leak_threshold
    g2 = g2_lit = None
    if converged and dist.mean > MEAN_FLOOR:
        z = g2_zero(res.rho_ss)
        g2, g2_lit = z.normally_ordered, z.literal
    return PhasePoint(
        params.g_h, params.g_c, dist.mean, g2, converged, res.leak,
        None if converged else Region.C, g2_lit, res.residual,
    )


def _solve_cell(args):
    params, opts, leak_threshold = args
    return solve_point(params, opts, leak_threshold)


def solve_cells(config: SweepConfig, cells: Sequence[tuple[int, int]],
                callback: Optional[Callable] = None) -> dict:
    """Solve the given grid cells; results keyed by cell index, independent of completion order."""
    jobs = [
        (config.params_for(config.g_h_axis[j], config.g_c_axis[i]), config.solver, config.leak_threshold)
        for i, j in cells
    ]
    out = {}
    if config.workers == 1 or len(jobs) <= 1:
        results = map(_solve_cell, jobs)
        for cell, point in zip(cells, results):
            out[cell] = point
            if callback:
                callback(cell, point)
        return out
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        for cell, point in zip(cells, pool.map(_solve_cell, jobs, chunksize=1)):
            out[cell] = point
            if callback:
                callback(cell, point)
    return out


def sweep(config: SweepConfig, done: Optional[Mapping] = None,
          callback: Optional[Callable] = None) -> SweepResult:
    """Solve every grid cell, extract L1/L2 and label regions.

    ``done`` maps already solved cells to their points (for resumed runs).
    """
    done = dict(done or {})
    todo = [c for c in config.cells() if c not in done]
    done.update(solve_cells(config, todo, callback))
    points = [done[c] for c in config.cells()]
    columns = _columns(points)
    l1_pts, missing = [], []
    for g_c, col in columns:
        try:
            star = threshold_L1(col)
        except InsufficientDataError:
            star = None
        if star is None:
            missing.append(g_c)
        else:
            l1_pts.append((g_c, star))
    l2_pts = []
    for g_c, col in columns:
        edge = boundary_L2(col)
        if edge is not None:
            l2_pts.append((g_c, edge))
    l1 = ThresholdCurve(tuple(l1_pts), "L1-derivative")
    l2 = ThresholdCurve(tuple(l2_pts), "L2-convergence")
    labeled = tuple(replace(p, region=classify(p, l1)) for p in points)
    return SweepResult(config, labeled, l1, l2, tuple(missing))


def _columns(points: Iterable[PhasePoint]) -> list[tuple[float, list[PhasePoint]]]:
    cols: dict[float, list[PhasePoint]] = {}
    for p in points:
        cols.setdefault(p.g_c, []).append(p)
    return [(g_c, sorted(cols[g_c], key=lambda q: q.g_h)) for g_c in sorted(cols)]


def threshold_L1(column: Sequence[PhasePoint], log_mean: bool = False) -> Optional[float]:
    """Threshold g_h at the maximum slope of ``<n>`` against ``log10 g_h``.

    Central differences on the converged points, then a parabola through the
    maximum and its two neighbours. Returns ``None`` when the maximum slope is
    not interior (no jump inside the column). With ``log_mean`` the slope of
    ``log10 <n>`` is used instead.
    """
    pts = sorted(
        (p for p in column if p.converged and p.mean_n is not None and p.mean_n > 0),
        key=lambda p: p.g_h,
    )
    if len(pts) < MIN_L1_POINTS:
        raise InsufficientDataError(f"need >= {MIN_L1_POINTS} converged points, got {len(pts)}")
    u = np.log10([p.g_h for p in pts])
    y = np.array([p.mean_n for p in pts])
    if log_mean:
        y = np.log10(y)
    slope = (y[2:] - y[:-2]) / (u[2:] - u[:-2])
    # first maximum, with rounding-level ties going to the smallest g_h
    top = slope.max()
    k = int(np.argmax(slope >= top - 1e-9 * abs(top)))
    if slope[k] <= 0 or k == 0 or k == len(slope) - 1:
        return None
    xs = u[k:k + 3]  # abscissae of slope[k-1], slope[k], slope[k+1]
    ys = slope[k - 1:k + 2]
    a, b, _ = np.polyfit(xs - xs[1], ys, 2)
    shift = -b / (2 * a) if a < 0 else 0.0
    shift = float(np.clip(shift, xs[0] - xs[1], xs[2] - xs[1]))
    return float(10 ** (xs[1] + shift))


def boundary_L2(column: Sequence[PhasePoint]) -> Optional[float]:
    """g_h midway (in log10) across the first converged/non-converged switch.

    Returns ``None`` if the column is entirely converged or entirely diverged.
    """
    pts = sorted(column, key=lambda p: p.g_h)
    flags = [p.converged for p in pts]
    if all(flags) or not any(flags):
        return None
    # last converged point next to the first non-converged one, scanning away
    # from the converged side
    start_conv = flags[0]
    for i in range(1, len(flags)):
        if flags[i] != start_conv:
            lo, hi = pts[i - 1].g_h, pts[i].g_h
            return float(10 ** (0.5 * (math.log10(lo) + math.log10(hi))))
    return None


def classify(point: PhasePoint, l1: Optional[ThresholdCurve]) -> Region:
    """C if unconverged, else A/B by position relative to L1.

    Without any L1 estimate the zero-delay statistics decide: bunched
    (``g2(0) > 1 + G2_BAND``) is A, otherwise B.
    """
    if not point.converged:
        return Region.C
    star = l1.at(point.g_c) if l1 is not None else None
    if star is None:
        if point.g2_zero is None:
            return Region.A
        return Region.A if point.g2_zero > 1 + G2_BAND else Region.B
    return Region.A if point.g_h < star else Region.B
