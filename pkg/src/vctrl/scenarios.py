"""Scenario runner and CSV writers.

Every number is written with ``format(x, ".10g")`` (10 significant digits) so
that identical runs give byte-identical files.
"""

from __future__ import annotations

import logging
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import r0 as r0mod
from .config import RunConfig
from .errors import ParameterError
from .integrator import Trajectory
from .model import CONTROL_NAMES, STATE_NAMES, ControlTriple
from .ocp import (
    CHANNELS,
    OcpProblem,
    OcpSolution,
    evaluate_cost,
    multistart,
    scenario_weights,
    single_control_problem,
    solve,
)
from .policy import ControlBounds, ControlPolicy

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NOT_CONVERGED = 3

SUMMARY_COLUMNS = ("run", "objective", "peak_i_h", "peak_time", "r0_initial", "iterations", "converged")

FIGURES = ("fig1a", "fig1b", "fig1c", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8")


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".10g")


def _write_rows(path: Path, header, rows, comment: str | None = None) -> Path:
    lines = []
    if comment is not None:
        lines.append(f"# {comment}")
    lines.append(",".join(header))
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")
    return path


def write_trajectory(path: Path, traj: Trajectory) -> Path:
    rows = (np.concatenate([[t], x]) for t, x in zip(traj.times, traj.states))
    return _write_rows(path, ("t",) + STATE_NAMES, rows)


def _step_rows(policy: ControlPolicy):
    rows = [np.concatenate([[t], u]) for t, u in zip(policy.breakpoints[:-1], policy.values)]
    rows.append(np.concatenate([[policy.breakpoints[-1]], policy.values[-1]]))
    return rows


def write_controls(path: Path, policy: ControlPolicy) -> Path:
    return _write_rows(path, ("t",) + CONTROL_NAMES, _step_rows(policy))


def write_grid(path: Path, grid: r0mod.R0Grid) -> Path:
    comment = (
        f"x_name={grid.x_name},y_name={grid.y_name},"
        f"fixed_name={grid.fixed_name},fixed_value={fmt(grid.fixed_value)}"
    )
    rows = (
        (x, y, grid.values[i, j])
        for i, y in enumerate(grid.y)
        for j, x in enumerate(grid.x)
    )
    return _write_rows(path, ("x", "y", "r0"), rows, comment)


def write_threshold(path: Path, points, pair, fixed_name, fixed_value) -> Path:
    comment = f"x_name={pair[1]},y_name={pair[0]},fixed_name={fixed_name},fixed_value={fmt(fixed_value)}"
    return _write_rows(path, ("x", "y"), points, comment)


def write_summary(path: Path, rows) -> Path:
    return _write_rows(path, SUMMARY_COLUMNS, rows)


def write_curve(path: Path, times, name: str, values) -> Path:
    return _write_rows(path, ("t", name), zip(times, values))


def build_problem(cfg: RunConfig) -> OcpProblem:
    return OcpProblem(
        params=cfg.params,
        weights=cfg.weights,
        t_f=cfg.t_f,
        n_intervals=cfg.intervals,
        integrator=cfg.integrator,
        bounds=ControlBounds.default(cfg.alpha_min),
    )


def optimize(cfg: RunConfig, prob: OcpProblem) -> OcpSolution:
    if cfg.multistart > 0:
        best, _ = multistart(prob, cfg.multistart, cfg.seed, max_iter=cfg.max_iter)
        return best
    return solve(prob, max_iter=cfg.max_iter)


def _summary_row(run: str, prob: OcpProblem, policy: ControlPolicy, objective, traj, iterations, converged):
    i_h = traj.column("i_h")
    k = int(np.argmax(i_h))
    r0_init = r0mod.r0_closed_form(ControlTriple(*policy.values[0]), prob.params)
    return (run, objective, i_h[k], traj.times[k], r0_init, iterations, converged)


def _solution_row(run, prob, sol: OcpSolution):
    return _summary_row(run, prob, sol.policy, sol.objective, sol.trajectory, sol.iterations, sol.converged)


def run(cfg: RunConfig) -> int:
    """Execute ``cfg.scenario`` and write its CSV files into ``cfg.output_dir``.

    Returns ``EXIT_NOT_CONVERGED`` when an optimization stops without meeting
    its convergence test; the files are written regardless.
    """
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    prob = build_problem(cfg)
    scenario = cfg.scenario
    log.info("running scenario %s into %s", scenario, out)

    if scenario == "simulate":
        try:
            policy = prob.policy(np.tile(np.asarray(cfg.controls, dtype=float), (prob.n_intervals, 1)))
        except ParameterError as exc:
            raise ParameterError(f"controls outside their box: {exc}") from None
        objective, traj = evaluate_cost(policy, prob)
        write_trajectory(out / "trajectory.csv", traj)
        write_controls(out / "controls.csv", policy)
        write_summary(out / "summary.csv", [_summary_row("simulate", prob, policy, objective, traj, 0, True)])
        return EXIT_OK

    if scenario == "r0-point":
        value = r0mod.r0_closed_form(cfg.controls, cfg.params)
        write_summary(out / "summary.csv", [("r0-point", None, None, None, value, None, None)])
        return EXIT_OK

    if scenario == "r0-sweep":
        pair = cfg.r0_pair
        grid = r0mod.sweep(pair, cfg.r0_fixed, cfg.r0_resolution, cfg.params, cfg.alpha_min)
        pts = r0mod.threshold_curve(pair, grid.fixed_value, cfg.r0_resolution, cfg.params, cfg.alpha_min)
        write_grid(out / "r0_grid.csv", grid)
        write_threshold(out / "r0_threshold.csv", pts, pair, grid.fixed_name, grid.fixed_value)
        return EXIT_OK

    if scenario in ("optimize", "optimize-single", "compare"):
        if scenario == "optimize-single":
            if cfg.single is None:
                raise ParameterError("optimize-single needs a control channel (single = ...)")
            prob = single_control_problem(cfg.single, prob)
        sol = optimize(cfg, prob)
        write_trajectory(out / "trajectory.csv", sol.trajectory)
        write_controls(out / "controls.csv", sol.policy)
        rows = [_solution_row("optimized", prob, sol)]
        if scenario == "compare":
            base = prob.no_control_policy()
            objective, traj = evaluate_cost(base, prob)
            write_trajectory(out / "baseline_trajectory.csv", traj)
            rows.append(_summary_row("baseline", prob, base, objective, traj, 0, True))
        write_summary(out / "summary.csv", rows)
        return EXIT_OK if sol.converged else EXIT_NOT_CONVERGED

    raise ParameterError(f"unknown scenario {scenario!r}")


class FigureRuns:
    """Lazily solved optimal-control runs shared between figures."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.base = build_problem(cfg)
        self._cache: dict[tuple, OcpSolution] = {}
        self.all_converged = True

    def case(self, name: str) -> OcpSolution:
        return self._get(("case", name), replace(self.base, weights=scenario_weights(name)))

    def single(self, channel: str) -> OcpSolution:
        return self._get(("single", channel), single_control_problem(channel, self.base))

    def _get(self, key, prob) -> OcpSolution:
        if key not in self._cache:
            sol = optimize(self.cfg, prob)
            self.all_converged &= sol.converged
            self._cache[key] = sol
        return self._cache[key]

    def no_control(self) -> Trajectory:
        return evaluate_cost(self.base.no_control_policy(), self.base)[1]


_SINGLE_FIGURES = {"fig6": "adulticide", "fig7": "larvicide", "fig8": "mechanical"}


def emit_figure_data(which: str, cfg: RunConfig, runs: FigureRuns | None = None) -> list[Path]:
    """Write one ``<figure>_<curve>.csv`` per plotted curve of ``which``."""
    if which not in FIGURES:
        raise ParameterError(f"unknown figure {which!r}; expected one of {FIGURES}")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    runs = runs or FigureRuns(cfg)
    written: list[Path] = []

    def curve(name, times, column, values):
        written.append(write_curve(out / f"{which}_{name}.csv", times, column, values))

    def step_curve(name, policy: ControlPolicy, control: str):
        rows = [(r[0], r[1 + CONTROL_NAMES.index(control)]) for r in _step_rows(policy)]
        written.append(_write_rows(out / f"{which}_{name}.csv", ("t", control), rows))

    if which.startswith("fig1"):
        pair = r0mod.PAIRS["abc".index(which[-1])]
        grid = r0mod.sweep(pair, None, cfg.r0_resolution, cfg.params, cfg.alpha_min)
        pts = r0mod.threshold_curve(pair, grid.fixed_value, cfg.r0_resolution, cfg.params, cfg.alpha_min)
        written.append(write_grid(out / f"{which}_r0_grid.csv", grid))
        written.append(write_threshold(out / f"{which}_threshold.csv", pts, pair, grid.fixed_name, grid.fixed_value))
    elif which == "fig2":
        sol = runs.case("A")
        base = runs.no_control()
        curve("optimal_i_h", sol.trajectory.times, "i_h", sol.trajectory.column("i_h"))
        curve("no_control_i_h", base.times, "i_h", base.column("i_h"))
    elif which == "fig3":
        sol = runs.case("A")
        for control in CONTROL_NAMES:
            step_curve(control, sol.policy, control)
    elif which == "fig4":
        for case in "ABC":
            traj = runs.case(case).trajectory
            curve(f"case_{case}", traj.times, "i_h", traj.column("i_h"))
    elif which == "fig5":
        for control in CONTROL_NAMES:
            for case in "ABC":
                step_curve(f"{control}_case_{case}", runs.case(case).policy, control)
    else:
        channel = _SINGLE_FIGURES[which]
        control = CONTROL_NAMES[CHANNELS[channel][0]]
        for label, sol in (("all_controls", runs.case("A")), (f"{channel}_only", runs.single(channel))):
            step_curve(f"{label}_{control}", sol.policy, control)
            curve(f"{label}_i_h", sol.trajectory.times, "i_h", sol.trajectory.column("i_h"))
    return written
