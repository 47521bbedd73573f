"""Fixed-point solvers: damped Picard, Anderson mixing, batch semantics."""

import csv

import numpy as np
import pytest

from helpers import spawn_rng
from hopeq.solvers import (
    ANDERSON,
    DIVERGENCE_CUTOFF,
    PICARD,
    SolverConfig,
    anderson_solve,
    picard_solve,
    relative_residual,
    solve_batch,
    write_trace_csv,
)


def affine(a, c):
    return lambda s: a * s + c


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(method="newton")
    with pytest.raises(ValueError):
        SolverConfig(damping=0.0)
    with pytest.raises(ValueError):
        SolverConfig(damping=1.5)
    with pytest.raises(ValueError):
        SolverConfig(max_iters=0)
    with pytest.raises(ValueError):
        SolverConfig(tol=0.0)
    with pytest.raises(ValueError):
        SolverConfig(anderson_window=0)
    with pytest.raises(ValueError):
        SolverConfig(tikhonov=-1e-10)


def test_relative_residual_conventions():
    assert relative_residual(np.zeros(3), np.zeros(3)) == 0.0
    assert relative_residual(np.zeros(3), np.ones(3)) == np.inf
    assert relative_residual(np.ones(3), np.ones(3)) == 0.0
    assert relative_residual(np.array([2.0]), np.array([1.0])) == pytest.approx(0.5)


def test_picard_iteration_counts_on_the_reference_map():
    # f(s) = s/2 + 1 from 0, tol 1e-4: 14 plain steps, 29 at damping 1/2
    res = picard_solve(affine(0.5, 1.0), np.zeros(1), SolverConfig(tol=1e-4))
    assert res.converged and res.iterations == 14
    np.testing.assert_allclose(res.equilibrium, [2.0], atol=1e-3)

    res_damped = picard_solve(
        affine(0.5, 1.0), np.zeros(1), SolverConfig(tol=1e-4, damping=0.5)
    )
    assert res_damped.converged and res_damped.iterations == 29


def test_identity_map_converges_immediately():
    res = picard_solve(lambda s: s, np.array([3.0, -1.0]), SolverConfig())
    assert res.converged and res.iterations == 1
    assert res.trace == [0.0]


def test_origin_crossing_is_not_divergence():
    # f(s) = -s at damping 1/2 jumps straight onto the fixed point 0; the
    # first step's residual is inf (zero denominator) yet nothing diverged
    res = picard_solve(affine(-1.0, 0.0), np.ones(1), SolverConfig(damping=0.5))
    assert res.converged and not res.diverged
    assert res.iterations == 2
    assert res.trace[0] == np.inf and res.trace[1] == 0.0


def test_expansive_map_is_flagged_divergent():
    res = picard_solve(affine(3.0, 1.0), np.ones(1), SolverConfig(max_iters=100))
    assert res.diverged and not res.converged
    # 1.5 * 3^n - 0.5 first exceeds the norm cutoff at n = 13
    assert res.iterations == 13
    assert float(np.abs(res.equilibrium[0])) > DIVERGENCE_CUTOFF


def test_budget_exhaustion_reports_unconverged():
    res = picard_solve(affine(0.999, 1.0), np.zeros(1), SolverConfig(max_iters=5, tol=1e-12))
    assert not res.converged and not res.diverged
    assert res.iterations == 5


def test_anderson_solves_a_scalar_affine_map_at_iteration_two():
    # two iterates of a line determine it; the mixing step then lands on the
    # fixed point up to the Tikhonov bias, negligible at this residual scale
    f = affine(0.1, 1.8)
    cfg = SolverConfig(method=ANDERSON, max_iters=2, tol=1e-15)
    res = anderson_solve(f, np.array([-110.0]), cfg)
    assert res.iterations == 2
    x2 = float(res.equilibrium[0])
    assert abs(x2 - 2.0) < 1e-12
    assert abs(float(f(res.equilibrium)[0]) - x2) < 1e-12


def test_anderson_tikhonov_bias_at_unit_scale():
    # on a unit-scale map the lambda = 1e-10 regularization leaves a visible
    # (and bounded) bias at iteration 2: about 6 lambda for f(s) = s/2 + 1
    cfg = SolverConfig(method=ANDERSON, max_iters=2, tol=1e-15)
    res = anderson_solve(affine(0.5, 1.0), np.zeros(1), cfg)
    err = abs(float(res.equilibrium[0]) - 2.0)
    assert 1e-11 < err < 1e-8


def test_anderson_beats_picard_on_contractive_affine_maps():
    rng = spawn_rng(0)
    for _ in range(5):
        q1, _ = np.linalg.qr(rng.normal(size=(50, 50)))
        q2, _ = np.linalg.qr(rng.normal(size=(50, 50)))
        a = q1 @ np.diag(rng.uniform(0.3, 0.9, 50)) @ q2.T
        c = rng.normal(size=50)
        f = lambda s: s @ a.T + c
        cfg_p = SolverConfig(method=PICARD, tol=1e-6, max_iters=2000)
        cfg_a = SolverConfig(method=ANDERSON, tol=1e-6, max_iters=2000)
        res_p = picard_solve(f, np.zeros(50), cfg_p)
        res_a = anderson_solve(f, np.zeros(50), cfg_a)
        assert res_p.converged and res_a.converged
        assert res_a.iterations < res_p.iterations
        fixed = np.linalg.solve(np.eye(50) - a, c)
        np.testing.assert_allclose(res_a.equilibrium, fixed, atol=1e-4)


def test_batch_rows_freeze_independently():
    rates = np.array([[0.2], [0.9]])
    f = lambda s: rates * s + 1.0
    cfg = SolverConfig(tol=1e-6, max_iters=300)
    res = solve_batch(f, np.zeros((2, 1)), cfg)
    assert res.converged.all() and not res.diverged.any()
    assert res.first_converged[0] < res.first_converged[1]
    assert res.iterations[0] < res.iterations[1]
    # frozen rows stop paying for updates
    assert res.update_count < 2 * 1 * int(res.iterations[1])
    np.testing.assert_allclose(res.states[:, 0], [1.25, 10.0], rtol=1e-5)


def test_batch_without_early_stop_runs_the_full_budget():
    rates = np.array([[0.2], [0.9]])
    f = lambda s: rates * s + 1.0
    cfg = SolverConfig(tol=1e-6, max_iters=60)
    res = solve_batch(f, np.zeros((2, 1)), cfg, early_stop=False)
    np.testing.assert_array_equal(res.iterations, [60, 60])
    assert res.update_count == 60 * 2 * 1
    assert res.first_converged[0] > 0
    assert res.converged[0]


def test_batch_divergence_freezes_only_the_bad_row():
    rates = np.array([[0.5], [3.0]])
    f = lambda s: rates * s + 1.0
    cfg = SolverConfig(tol=1e-6, max_iters=200)
    res = solve_batch(f, np.array([[0.0], [1.0]]), cfg)
    assert res.converged[0] and not res.converged[1]
    assert not res.diverged[0] and res.diverged[1]
    assert res.iterations[1] == 13
    np.testing.assert_allclose(res.states[0], [2.0], atol=1e-4)


def test_batch_trace_masks_frozen_rows():
    rates = np.array([[0.1], [0.8]])
    f = lambda s: rates * s + 1.0
    cfg = SolverConfig(tol=1e-8, max_iters=100)
    res = solve_batch(f, np.zeros((2, 1)), cfg, record_trace=True)
    n0, n1 = int(res.iterations[0]), int(res.iterations[1])
    assert res.trace.shape == (n1, 2)
    assert np.all(np.isfinite(res.trace[:n0, 0]))
    assert np.all(np.isnan(res.trace[n0:, 0]))
    assert np.all(np.isfinite(res.trace[:, 1]))


def test_update_count_override():
    res = picard_solve(affine(0.5, 1.0), np.zeros(1), SolverConfig(tol=1e-4),
                       updates_per_iter=7)
    assert res.update_count == 7 * res.iterations


def test_solve_batch_rejects_flat_input():
    with pytest.raises(ValueError, match="batch"):
        solve_batch(lambda s: s, np.zeros(4), SolverConfig())


def test_trace_csv_round_trip(tmp_path):
    path = tmp_path / "trace.csv"
    write_trace_csv(path, {3: [float("inf"), 0.25, 0.01], 0: [1.0, 0.5]})
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["sample_id", "iteration", "relative_residual"]
    # sorted by sample, iterations 1-based, residuals round-trip as floats
    assert [r[0] for r in rows[1:]] == ["0", "0", "3", "3", "3"]
    assert [r[1] for r in rows[1:]] == ["1", "2", "1", "2", "3"]
    assert [float(r[2]) for r in rows[1:]] == [1.0, 0.5, np.inf, 0.25, 0.01]
