import math

import numpy as np
import pytest

from dfmhd.problems import manufactured_2d, zero_problem
from dfmhd.solvers import CGConfig
from dfmhd.studies import convergence_space, convergence_time, fitted_order, iteration_profile


def test_fitted_order_examples():
    taus = np.array([0.1, 0.05, 0.025])
    assert fitted_order(taus, 3.0 * taus ** 2) == pytest.approx(2.0, abs=1e-12)
    assert fitted_order(taus, 0.5 * taus ** 3.5) == pytest.approx(3.5, abs=1e-12)


def test_zero_problem_has_zero_errors():
    rows = convergence_space(zero_problem(2), [6, 8], 2, 0.01, 0.05)
    for r in rows:
        assert r["err_u_H1"] <= 1e-13 and r["err_B_Hcurl"] <= 1e-13
        assert r["iters_median"] == 1


def test_space_sweep_decreases_and_reports_rate():
    rows = convergence_space(manufactured_2d(), [8, 12, 16], 2, 0.001, 0.01)
    e = [r["err_u_H1"] for r in rows]
    assert e[0] > e[1] > e[2]
    assert math.isnan(rows[0]["fitted_order"]) and rows[1]["fitted_order"] > 0


def test_failed_sweep_entry_is_recorded_as_nan():
    rows = convergence_time(manufactured_2d(), 8, 1, [0.05, 0.03], 0.1)
    assert not math.isnan(rows[0]["err_u_H1"])
    assert math.isnan(rows[1]["err_u_H1"]) and math.isnan(rows[1]["iters_median"])
    rows = convergence_space(manufactured_2d(), [8], 1, 0.01, 0.02, CGConfig(maxiter=1))
    assert math.isnan(rows[0]["err_u_H1"])


def test_iteration_profile_counts_steps():
    res = iteration_profile(manufactured_2d(), 8, 2, 0.01, 5)
    s = res.column("subiters")
    assert len(s) == 4 and np.all(s >= 1)
