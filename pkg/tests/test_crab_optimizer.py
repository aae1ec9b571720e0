import numpy as np
import pytest

from annealing.crab_optimizer import (
    OptimizerConfig,
    OptResult,
    RestartRecord,
    cost,
    linear_baseline,
    nelder_mead,
    optimize_crab,
    resolve_seed,
    restart_seed,
    simulate,
    sweep_T,
    threshold_time,
)
from annealing.cd_baseline import CDConfig, evolve_with_cd
from annealing.crab_schedule import REFERENCE_21_PARAMS, CrabParams, CrabSchedule
from annealing.encoding import dominant_readout
from annealing.exceptions import OptimizationError
from annealing.pauli_algebra import basis_label

QUICK = dict(n_c=2, restarts=2, max_iterations=15, steps=200, seed=7)


def test_simplex_finds_bowl_minimum():
    cfg = OptimizerConfig(max_iterations=2000, f_tol=1e-14, x_tol=1e-10)
    result = nelder_mead(lambda x: float(np.sum(x ** 2)), [1.0, 1.0, -0.5], cfg)
    assert result.fun < 1e-8
    assert result.termination in ("f_tol", "x_tol")


def test_simplex_finds_shifted_quadratic():
    cfg = OptimizerConfig(max_iterations=2000, f_tol=1e-14, x_tol=1e-10)
    result = nelder_mead(lambda x: (x[0] - 3.0) ** 2 + 2.0 * (x[1] + 2.0) ** 2, [0.0, 0.0], cfg)
    assert result.x == pytest.approx([3.0, -2.0], abs=1e-4)
    assert np.all(np.diff(result.trace) <= 0)
    assert result.evaluations == result.evaluations_per_iteration[-1]


def test_simplex_iteration_cap():
    cfg = OptimizerConfig(max_iterations=3)
    result = nelder_mead(lambda x: float(np.sum(x ** 2)), [5.0, 5.0], cfg)
    assert result.termination == "max_iterations"
    assert result.iterations == 3
    assert len(result.trace) == 3


def test_simplex_rejects_non_finite_objective():
    with pytest.raises(OptimizationError):
        nelder_mead(lambda x: float("nan"), [0.0], OptimizerConfig())


def test_zero_coefficients_cost_equals_linear_energy(inst21):
    cfg = OptimizerConfig(steps=200)
    params = CrabParams.zeros(T=0.5, r=(0.1, -0.2))
    assert cost(params, inst21, cfg) == pytest.approx(
        linear_baseline(inst21, 0.5, steps=200).energy, abs=1e-12
    )


def test_infidelity_cost_kind(inst21):
    cfg = OptimizerConfig(steps=200, cost_kind="infidelity")
    params = CrabParams.zeros(T=0.5, r=(0.0,))
    assert cost(params, inst21, cfg) == pytest.approx(
        linear_baseline(inst21, 0.5, steps=200).infidelity, abs=1e-12
    )


def test_reference_coefficients_beat_linear_ramp(inst21):
    crab = simulate(inst21, CrabSchedule(REFERENCE_21_PARAMS))
    linear = linear_baseline(inst21, 0.5)
    assert crab.infidelity < 0.1
    assert crab.infidelity < linear.infidelity


def test_restart_seeds_are_reproducible():
    assert restart_seed(7, 0) == restart_seed(7, 0)
    assert restart_seed(7, 0) != restart_seed(7, 1)
    assert resolve_seed(3) == 3
    assert resolve_seed(None) >= 0


def test_optimization_is_deterministic_for_a_seed(inst21):
    cfg = OptimizerConfig(**QUICK)
    first = optimize_crab(inst21, 0.5, cfg)
    second = optimize_crab(inst21, 0.5, cfg)
    assert first.master_seed == 7
    assert first.best_cost == second.best_cost
    assert [rec.r for rec in first.per_restart] == [rec.r for rec in second.per_restart]
    assert first.per_restart[0].seed != first.per_restart[1].seed


def test_optimization_never_ends_above_linear_ramp(inst21):
    cfg = OptimizerConfig(**QUICK)
    result = optimize_crab(inst21, 0.5, cfg)
    assert result.best_cost <= linear_baseline(inst21, 0.5, steps=200).energy + 1e-12
    assert result.best_cost == min(rec.final_cost for rec in result.per_restart)
    assert result.best_params.n_c == 2
    for trace in result.traces:
        assert len(trace) > 0
        assert np.all(np.diff(trace) <= 0)


def test_parallel_restarts_match_serial(inst21):
    serial = optimize_crab(inst21, 0.3, OptimizerConfig(**{**QUICK, "max_iterations": 5}))
    parallel = optimize_crab(inst21, 0.3, OptimizerConfig(**{**QUICK, "max_iterations": 5,
                                                             "workers": 2}))
    assert [rec.final_cost for rec in parallel.per_restart] == pytest.approx(
        [rec.final_cost for rec in serial.per_restart]
    )


def test_transfer_strategy_records_noiseless_infidelity(inst21):
    cfg = OptimizerConfig(**{**QUICK, "restarts": 1, "max_iterations": 5, "gamma": 0.04,
                             "noise_strategy": "transfer"})
    record = optimize_crab(inst21, 0.3, cfg).per_restart[0]
    assert record.noiseless_infidelity is not None
    assert 0.0 <= record.final_infidelity <= 1.0
    assert record.final_infidelity != record.noiseless_infidelity


def test_sweep_keys_and_validation(inst21):
    cfg = OptimizerConfig(**{**QUICK, "restarts": 1, "max_iterations": 3})
    results = sweep_T(inst21, [0.2, 0.1], cfg)
    assert list(results) == [0.2, 0.1]
    with pytest.raises(ValueError):
        sweep_T(inst21, [], cfg)
    with pytest.raises(ValueError):
        sweep_T(inst21, [0.1, -1.0], cfg)


def _fake_result(T, trace):
    record = RestartRecord(index=0, seed=1, r=[0.0], A=[0.0], B=[0.0], final_cost=trace[-1],
                           final_infidelity=trace[-1], iterations=len(trace),
                           evaluations=len(trace), termination="max_iterations", trace=trace)
    return OptResult(T=T, master_seed=1, best_params=CrabParams.zeros(T, (0.0,)),
                     best_cost=trace[-1], best_infidelity=trace[-1], infidelity_mean=trace[-1],
                     infidelity_std=0.0, per_restart=[record])


def test_threshold_time_picks_first_converging_duration():
    sweep = {
        0.5: _fake_result(0.5, [0.5, 0.01]),
        0.1: _fake_result(0.1, [0.9, 0.8]),
        0.2: _fake_result(0.2, [0.6, 0.05]),
    }
    assert threshold_time(sweep) == 0.2
    assert threshold_time(sweep, level=0.001) is None


@pytest.mark.slow
def test_21_reaches_low_infidelity_above_speed_limit(inst21):
    cfg = OptimizerConfig(restarts=3, seed=1)
    result = optimize_crab(inst21, 0.5, cfg)
    assert result.best_infidelity <= 1e-2


def test_simplex_traces_never_increase():
    rng = np.random.default_rng(19)
    cfg = OptimizerConfig(max_iterations=40)
    for _ in range(100):
        dim = int(rng.integers(1, 6))
        center = rng.normal(size=dim)
        scales = rng.uniform(0.1, 10.0, size=dim)
        result = nelder_mead(lambda x: float(np.sum(scales * (x - center) ** 2)),
                             rng.normal(size=dim), cfg)
        assert np.all(np.diff(result.trace) <= 0)
        assert result.fun == result.trace[-1]


@pytest.mark.slow
def test_21_threshold_behaviour(inst21):
    cfg = OptimizerConfig(restarts=3, max_iterations=300, seed=5)
    sweep = sweep_T(inst21, [0.05, 0.1, 0.2, 0.3], cfg)
    assert sweep[0.3].best_infidelity * 10 <= sweep[0.1].best_infidelity
    t_c = threshold_time(sweep)
    assert t_c is not None and 0.09 <= t_c <= 0.35


@pytest.mark.slow
def test_21_crossover_with_counter_diabatic_driving(inst21):
    cfg = OptimizerConfig(restarts=3, max_iterations=300, seed=2)
    fast_crab = optimize_crab(inst21, 0.05, cfg)
    fast_cd = evolve_with_cd(inst21, None, 0.05, CDConfig())
    assert fast_cd.infidelity < fast_crab.best_infidelity

    slow_crab = optimize_crab(inst21, 0.5, OptimizerConfig(restarts=3, seed=1))
    slow_cd = evolve_with_cd(inst21, None, 0.5, CDConfig())
    assert slow_crab.best_infidelity < slow_cd.infidelity


@pytest.mark.slow
def test_21_noisy_crab_beats_counter_diabatic_driving(inst21):
    cfg = OptimizerConfig(restarts=2, max_iterations=300, seed=4, gamma=0.04)
    crab = optimize_crab(inst21, 0.5, cfg)
    cd = evolve_with_cd(inst21, None, 0.5, CDConfig(), gamma=0.04)
    assert crab.best_infidelity < cd.infidelity


def _solution_population(inst, T, cfg):
    result = optimize_crab(inst, T, cfg)
    state = simulate(inst, CrabSchedule(result.best_params)).state
    return float(state.probabilities()[inst.solutions[0]]), state


@pytest.mark.slow
def test_2479_end_to_end(inst2479):
    cfg = OptimizerConfig(restarts=4, max_iterations=1000, seed=3)
    assert basis_label(inst2479.solutions[0], 4) == "0010"
    population, state = _solution_population(inst2479, 2.0, cfg)
    assert population >= 0.9
    assert int(np.argmax(state.probabilities())) == inst2479.solutions[0]
    assert dominant_readout(state, inst2479) == (67, 37)

    short, _ = _solution_population(inst2479, 0.75, cfg)
    assert short < population
