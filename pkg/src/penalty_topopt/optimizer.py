"""Projected gradient descent with a bisection line search.

Each outer iteration freezes the inner state at the current binary design,
takes an explicit step against the descent field, projects onto the binary
volume-feasible set and bisects the step size until the penalized objective
strictly decreases.  Because the inner variables are re-minimized after every
accepted step, the recorded objective decreases strictly from one accepted
iterate to the next.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .objective import ObjectiveBreakdown

log = logging.getLogger(__name__)

MAX_TRIALS = 60
EQUAL_RTOL = 1e-14
R_MAX_FACTOR = 1000.0
R_MAX_GROWTH = 10.0


def gradient_step(chi, d, r) -> np.ndarray:
    """Explicit update ``chi - r d`` (no clamping)."""
    return np.asarray(chi, dtype=float) - r * np.asarray(d, dtype=float)


def project_volume(chi_bar, beta: float, mode: str = "inequality") -> np.ndarray:
    """L1-nearest binary field with material fraction at most ``beta``.

    Inequality mode keeps the cells strictly above the threshold
    ``c = inf{c : #{chi_bar > c} <= floor(beta N)}``; ties at ``c`` become
    void, so a constant field projects to all zeros.  Equality mode keeps
    exactly ``floor(beta N)`` cells, preferring larger values and then lower
    element indices.
    """
    chi_bar = np.asarray(chi_bar, dtype=float)
    if not np.all(np.isfinite(chi_bar)):
        raise ValueError("cannot project a field with non-finite values")
    flat = chi_bar.ravel()
    n = flat.size
    m = int(math.floor(beta * n + 1e-9))
    out = np.zeros(n)
    if mode == "equality":
        order = np.argsort(-flat, kind="stable")
        out[order[:m]] = 1.0
    elif mode == "inequality":
        if m >= n:
            out[:] = 1.0
        else:
            # (m+1)-th largest value is the threshold
            c = np.partition(flat, n - m - 1)[n - m - 1]
            out[flat > c] = 1.0
    else:
        raise ValueError(f"unknown constraint mode {mode!r}")
    return out.reshape(chi_bar.shape)


def r_min_init(d) -> float | None:
    """``1 / (2 max|d|)``: smaller steps cannot reorder any pair of cells.

    Returns ``None`` when ``d`` vanishes identically (no descent direction).
    """
    dmax = float(np.max(np.abs(d)))
    if dmax == 0.0:
        return None
    return 0.5 / dmax


@dataclass
class LineSearchState:
    r_min: float
    r_max: float
    trial_count: int = 0

    @property
    def r(self) -> float:
        return 0.5 * (self.r_min + self.r_max)


@dataclass
class LineSearchResult:
    chi: np.ndarray
    breakdown: ObjectiveBreakdown
    accepted: bool
    r: float
    trials: int
    evaluations: int


def line_search(physics, state, d, L_k: float | None = None, r_min: float | None = None,
                r_max_factor: float = R_MAX_FACTOR, max_trials: int = MAX_TRIALS) -> LineSearchResult:
    """Bisection line search on the step size.

    ``physics`` supplies ``eval_L(chi, state)`` and the resolved parameters;
    ``state`` is the frozen inner state at ``chi_k = state.chi``.  The search
    stops at the first trial with a strict decrease, or returns ``chi_k``
    unchanged when an increase is caused by a move of at most ``delta``
    (L1 measure), or when the trial budget runs out.
    """
    params = physics.params
    chi_k = state.chi
    L_k = state.breakdown.total if L_k is None else L_k
    cell = physics.grid.cell_area
    unchanged = LineSearchResult(chi_k, state.breakdown, False, 0.0, 0, 0)

    r0 = r_min_init(d) if r_min is None else r_min
    if r0 is None:
        return unchanged
    ls = LineSearchState(r0, r_max_factor * r0)
    expanding = True
    evaluations = 0
    r = ls.r
    while ls.trial_count < max_trials:
        ls.trial_count += 1
        r = ls.r
        trial = project_volume(gradient_step(chi_k, d, r), params.beta, params.constraint)
        moved = float(np.sum(np.abs(trial - chi_k))) * cell
        if moved == 0.0:
            # no cell changed: grow the step
            if expanding:
                ls.r_min, ls.r_max = ls.r_max, ls.r_max * R_MAX_GROWTH
            else:
                ls.r_min = r
            continue
        try:
            bd = physics.eval_L(trial, state)
        except Exception as exc:
            raise RuntimeError(f"objective evaluation failed at line-search trial "
                               f"{ls.trial_count} (r={r:.6g})") from exc
        evaluations += 1
        diff = bd.total - L_k
        if abs(diff) <= EQUAL_RTOL * abs(L_k):
            ls.r_max = r
            expanding = False
            if moved <= params.delta:
                break
        elif diff > 0:
            ls.r_max = r
            expanding = False
            if moved <= params.delta:
                break
        else:
            return LineSearchResult(trial, bd, True, r, ls.trial_count, evaluations)
    return LineSearchResult(chi_k, state.breakdown, False, r, ls.trial_count, evaluations)


@dataclass(frozen=True)
class IterateRecord:
    """Objective values at one accepted iterate (fresh inner state)."""

    iter: int
    L: float
    J: float
    perimeter: float
    volume: float
    r: float
    trials: int
    seconds: float
    penalty: float = 0.0


@dataclass
class OptimizationResult:
    chi: np.ndarray
    history: list[IterateRecord]
    reason: str
    state: object = None
    total_trials: int = 0
    total_backtracks: int = 0
    total_evaluations: int = 0
    n_solves: int = 0
    max_volume_excess: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.history)

    @property
    def final_L(self) -> float:
        return self.state.breakdown.total


def _check_feasible(chi, params, n_cells) -> float:
    vol = float(np.sum(chi))
    if params.constraint == "inequality":
        excess = vol - params.beta * n_cells
    else:
        excess = abs(vol - params.beta * n_cells) - 1.0
    if excess > 1e-9:
        raise RuntimeError(f"projection produced an infeasible design (volume {vol} cells)")
    return max(excess, 0.0)


def _is_binary(chi) -> bool:
    return bool(np.all((chi == 0.0) | (chi == 1.0)))


def optimize(physics, chi0=None, max_iters: int | None = None,
             callback: Callable[[IterateRecord], None] | None = None,
             snapshot: Callable[[IterateRecord, np.ndarray], None] | None = None) -> OptimizationResult:
    """Outer descent loop shared by both physics.

    ``chi0`` defaults to the uniform field ``beta``.  A non-binary start is
    binarized by one projected step that is accepted unconditionally, and
    recorded as iteration 1.  The loop ends after two consecutive line
    searches without progress (the second one with a ten times wider step
    interval), when the descent field vanishes, or when the iteration budget
    is spent.  ``callback`` receives every accepted record and ``snapshot``
    the record together with a copy of the accepted design.
    """
    params = physics.params
    grid = physics.grid
    n_cells = grid.n_elements
    max_iters = params.max_outer_iters if max_iters is None else max_iters
    chi = np.full(grid.shape, params.beta) if chi0 is None else \
        np.asarray(chi0, dtype=float).reshape(grid.shape).copy()
    history: list[IterateRecord] = []
    total_trials = total_backtracks = total_evaluations = 0
    t_start = time.perf_counter()

    state = physics.state(chi)
    if max_iters == 0:
        return OptimizationResult(chi, history, "iteration budget", state,
                                  n_solves=physics.n_solves)

    def record(state, r, trials):
        # fires once per accepted iterate
        bd = state.breakdown
        rec = IterateRecord(len(history) + 1, bd.total, physics.physical_objective(state),
                            bd.perimeter_value, bd.volume, r, trials,
                            time.perf_counter() - t_start, bd.penalty)
        history.append(rec)
        if callback is not None:
            callback(rec)
        if snapshot is not None:
            snapshot(rec, state.chi.copy())
        return rec

    excess = 0.0
    reason = "iteration budget"
    if not _is_binary(chi):
        d = physics.descent_field(state)
        r = r_min_init(d)
        if r is None:
            r = 0.0
        chi = project_volume(gradient_step(chi, d, r), params.beta, params.constraint)
        excess = max(excess, _check_feasible(chi, params, n_cells))
        state = physics.state(chi)
        total_trials += 1
        record(state, r, 1)

    stalls = 0
    while len(history) < max_iters:
        d = physics.descent_field(state)
        if r_min_init(d) is None:
            reason = "no descent direction"
            break
        res = line_search(physics, state, d,
                          r_max_factor=R_MAX_FACTOR * (R_MAX_GROWTH if stalls else 1.0))
        total_trials += res.trials
        total_backtracks += max(res.trials - 1, 0)
        total_evaluations += res.evaluations
        if not res.accepted:
            stalls += 1
            log.debug("line search stalled (%d) after %d trials", stalls, res.trials)
            if stalls >= 2:
                reason = "converged"
                break
            continue
        stalls = 0
        excess = max(excess, _check_feasible(res.chi, params, n_cells))
        new_state = physics.state(res.chi)
        if new_state.breakdown.total > res.breakdown.total + 1e-9 * abs(res.breakdown.total):
            log.warning("fresh inner state raised the objective: %.17g > %.17g",
                        new_state.breakdown.total, res.breakdown.total)
        state = new_state
        chi = res.chi
        record(state, res.r, res.trials)

    result = OptimizationResult(chi, history, reason, state, total_trials, total_backtracks,
                                total_evaluations, physics.n_solves, excess)
    if hasattr(physics, "max_reciprocity_error"):
        result.extra["max_reciprocity_error"] = physics.max_reciprocity_error
    return result


def optimize_mech(problem, params=None, chi0=None, callback=None, method=None):
    """Run the mechanism loop for a problem configuration."""
    physics = problem.build(params=params, method=method)
    return optimize(physics, problem.initial_design() if chi0 is None else chi0,
                    callback=callback)


def optimize_heat(problem, params=None, chi0=None, callback=None, method=None):
    """Run the heat-dissipation loop for a problem configuration."""
    physics = problem.build(params=params, method=method)
    return optimize(physics, problem.initial_design() if chi0 is None else chi0,
                    callback=callback)
