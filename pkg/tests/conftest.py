from dataclasses import replace

import pytest

from vctrl.model import default_params
from vctrl.ocp import OcpProblem, evaluate_cost, scenario_weights, single_control_problem, solve


@pytest.fixture
def params():
    return default_params()


class SolvedRuns:
    """Full-size (t_f=84, N=84) solves, computed once per session."""

    def __init__(self):
        self.base = OcpProblem()
        self._cache = {}

    def problem(self, key):
        kind, name = key
        if kind == "case":
            return replace(self.base, weights=scenario_weights(name))
        return single_control_problem(name, self.base)

    def __getitem__(self, key):
        if key not in self._cache:
            self._cache[key] = solve(self.problem(key))
        return self._cache[key]

    def no_control(self, key=("case", "A")):
        prob = self.problem(key)
        return evaluate_cost(prob.no_control_policy(), prob)


@pytest.fixture(scope="session")
def solved():
    return SolvedRuns()
