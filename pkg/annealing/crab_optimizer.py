"""CRAB coefficient optimization with a Nelder-Mead simplex and random restarts."""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from annealing.crab_schedule import CrabParams, CrabSchedule, LinearSchedule, Schedule, sample_frequencies
from annealing.dynamics import EvolutionConfig, evolve
from annealing.encoding import FactorInstance, initial_hamiltonian, solution_fidelity
from annealing.exceptions import OptimizationError
from annealing.pauli_algebra import QuantumState, expectation, materialize

logger = logging.getLogger(__name__)

# Simplex coefficients: reflection, expansion, contraction, shrink.
REFLECT, EXPAND, CONTRACT, SHRINK = 1.0, 2.0, 0.5, 0.5


class OptimizerConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_c: int = Field(default=4, ge=1)
    restarts: int = Field(default=10, ge=1)
    max_iterations: int = Field(default=2000, ge=1)
    simplex_init_scale: float = Field(default=0.3, gt=0)
    f_tol: float = Field(default=1e-10, gt=0)
    x_tol: float = Field(default=1e-8, gt=0)
    seed: Optional[int] = Field(default=None, ge=0)
    cost_kind: Literal["energy", "infidelity"] = "energy"
    gamma: float = Field(default=0.0, ge=0)
    noise_strategy: Literal["optimize", "transfer"] = "optimize"
    independent_cos: bool = False
    field_strength: float = Field(default=10.0, gt=0)
    steps: int = Field(default=1000, ge=10)
    workers: int = Field(default=1, ge=1)

    @property
    def dynamics_kind(self) -> str:
        return "open" if self.gamma > 0 else "closed"


class RestartRecord(BaseModel):
    index: int
    seed: int
    r: List[float]
    r_cos: Optional[List[float]] = None
    A: List[float]
    B: List[float]
    final_cost: float
    final_infidelity: float
    iterations: int
    evaluations: int
    termination: str
    trace: List[float] = Field(default_factory=list)
    cost_trace: List[float] = Field(default_factory=list)
    noiseless_infidelity: Optional[float] = None


class OptResult(BaseModel):
    T: float
    master_seed: int
    best_params: CrabParams
    best_cost: float
    best_infidelity: float
    infidelity_mean: float
    infidelity_std: float
    per_restart: List[RestartRecord]

    @property
    def traces(self) -> List[List[float]]:
        return [rec.trace for rec in self.per_restart]

    @property
    def best_restart(self) -> RestartRecord:
        return min(self.per_restart, key=lambda rec: rec.final_cost)


@dataclass
class NelderMeadResult:
    x: np.ndarray
    fun: float
    iterations: int
    evaluations: int
    termination: str
    trace: List[float] = field(default_factory=list)
    # Cumulative objective evaluations at the end of each iteration.
    evaluations_per_iteration: List[int] = field(default_factory=list)


def nelder_mead(f: Callable[[np.ndarray], float], x0: Sequence[float],
                cfg: OptimizerConfig) -> NelderMeadResult:
    """Minimize ``f`` with the downhill simplex method.

    The initial simplex is x0 plus ``cfg.simplex_init_scale`` along each axis.
    Iteration stops when the spread of simplex values drops below ``cfg.f_tol``,
    the simplex diameter drops below ``cfg.x_tol`` or ``cfg.max_iterations`` is
    reached.

    Args:
        f: Objective; must return a finite value everywhere it is evaluated.
        x0: Starting point.
        cfg: Iteration limits and tolerances.

    Returns:
        NelderMeadResult with the best vertex and its per-iteration best values.
    """
    n_evals = 0

    def evaluate(x: np.ndarray) -> float:
        nonlocal n_evals
        n_evals += 1
        value = float(f(x))
        if not np.isfinite(value):
            raise OptimizationError(f"Objective returned {value} at x = {x.tolist()}")
        return value

    x0 = np.asarray(x0, dtype=float)
    dim = x0.shape[0]
    simplex = np.vstack([x0] + [x0 + cfg.simplex_init_scale * np.eye(dim)[i] for i in range(dim)])
    values = np.array([evaluate(x) for x in simplex])

    trace: List[float] = []
    evals_at: List[int] = []
    termination = "max_iterations"
    iterations = 0
    while iterations < cfg.max_iterations:
        order = np.argsort(values, kind="stable")
        simplex, values = simplex[order], values[order]
        if values[-1] - values[0] < cfg.f_tol:
            termination = "f_tol"
            break
        if np.max(np.linalg.norm(simplex[1:] - simplex[0], axis=1)) < cfg.x_tol:
            termination = "x_tol"
            break
        iterations += 1

        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + REFLECT * (centroid - worst)
        fr = evaluate(xr)
        if values[0] <= fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
        elif fr < values[0]:
            xe = centroid + EXPAND * (xr - centroid)
            fe = evaluate(xe)
            if fe < fr:
                simplex[-1], values[-1] = xe, fe
            else:
                simplex[-1], values[-1] = xr, fr
        else:
            if fr < values[-1]:
                xc = centroid + CONTRACT * (xr - centroid)
                fc = evaluate(xc)
                accepted = fc <= fr
            else:
                xc = centroid + CONTRACT * (worst - centroid)
                fc = evaluate(xc)
                accepted = fc < values[-1]
            if accepted:
                simplex[-1], values[-1] = xc, fc
            else:
                best = simplex[0]
                for i in range(1, dim + 1):
                    simplex[i] = best + SHRINK * (simplex[i] - best)
                    values[i] = evaluate(simplex[i])
        trace.append(float(np.min(values)))
        evals_at.append(n_evals)

    i_best = int(np.argmin(values))
    return NelderMeadResult(
        x=simplex[i_best].copy(),
        fun=float(values[i_best]),
        iterations=iterations,
        evaluations=n_evals,
        termination=termination,
        trace=trace,
        evaluations_per_iteration=evals_at,
    )


@dataclass(frozen=True)
class ScheduleEvaluation:
    cost: float
    energy: float
    infidelity: float
    state: QuantumState


class ControlProblem:
    """Final-state objective of one instance at fixed T, g, steps and γ.

    Dense H0 and Hp are built once; every call records the cost and the
    ground-space infidelity of the evaluated schedule.
    """

    def __init__(self, inst: FactorInstance, T: float, g: float = 10.0, steps: int = 1000,
                 gamma: float = 0.0, cost_kind: str = "energy"):
        self.inst = inst
        self.cost_kind = cost_kind
        self.h0 = materialize(initial_hamiltonian(inst.n_qubits, g)).matrix
        self.hp = materialize(inst.hamiltonian).matrix
        self.psi0 = QuantumState.plus_state(inst.n_qubits)
        self.evolution = EvolutionConfig(T=T, steps=steps, gamma=gamma)
        self.costs: List[float] = []
        self.infidelities: List[float] = []

    def evaluate(self, sched: Schedule) -> ScheduleEvaluation:
        state = evolve(self.h0, self.hp, sched, self.psi0, self.evolution).state
        energy = max(0.0, expectation(self.inst.hamiltonian, state))
        infid = 1.0 - solution_fidelity(state, self.inst)
        cost = energy if self.cost_kind == "energy" else infid
        return ScheduleEvaluation(cost=cost, energy=energy, infidelity=infid, state=state)

    def objective(self, template: CrabParams) -> Callable[[np.ndarray], float]:
        def f(x: np.ndarray) -> float:
            result = self.evaluate(CrabSchedule(template.with_coefficients(x)))
            self.costs.append(result.cost)
            self.infidelities.append(result.infidelity)
            return result.cost

        return f


def cost(params: CrabParams, inst: FactorInstance, cfg: OptimizerConfig) -> float:
    """Final energy <Hp> (or ground-space infidelity) after evolving |+>^n under the CRAB schedule."""
    problem = ControlProblem(inst, params.T, cfg.field_strength, cfg.steps, cfg.gamma, cfg.cost_kind)
    return problem.evaluate(CrabSchedule(params)).cost


def simulate(inst: FactorInstance, sched: Schedule, g: float = 10.0, steps: int = 1000,
             gamma: float = 0.0) -> ScheduleEvaluation:
    """Evolve |+>^n under ``sched`` and report energy and infidelity."""
    return ControlProblem(inst, sched.T, g, steps, gamma).evaluate(sched)


def linear_baseline(inst: FactorInstance, T: float, g: float = 10.0, steps: int = 1000,
                    gamma: float = 0.0) -> ScheduleEvaluation:
    return simulate(inst, LinearSchedule(T), g, steps, gamma)


def restart_seed(master_seed: int, index: int) -> int:
    """Counter-derived seed of restart ``index``."""
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1)[0])


def resolve_seed(seed: Optional[int]) -> int:
    """Use ``seed`` or draw a fresh entropy seed that is recorded for replay."""
    if seed is not None:
        return seed
    return int(np.random.SeedSequence().entropy)


def _running_min(values: Sequence[float]) -> np.ndarray:
    return np.minimum.accumulate(np.asarray(values, dtype=float))


def run_restart(inst: FactorInstance, T: float, cfg: OptimizerConfig, index: int,
                master_seed: int) -> RestartRecord:
    """One restart: fresh offsets, start from A = B = 0, simplex search."""
    seed = restart_seed(master_seed, index)
    freqs = sample_frequencies(cfg.n_c, T, seed, cfg.independent_cos)
    template = CrabParams.zeros(T, freqs.r, freqs.r_cos, seed)
    transfer = cfg.gamma > 0 and cfg.noise_strategy == "transfer"
    search_gamma = 0.0 if transfer else cfg.gamma
    problem = ControlProblem(inst, T, cfg.field_strength, cfg.steps, search_gamma, cfg.cost_kind)
    nm = nelder_mead(problem.objective(template), template.coefficients, cfg)

    best_infid = _running_min(problem.infidelities)
    trace = [float(best_infid[n - 1]) for n in nm.evaluations_per_iteration]
    best = template.with_coefficients(nm.x)
    final = problem.evaluate(CrabSchedule(best))
    noiseless = None
    if transfer:
        noiseless = final.infidelity
        noisy = ControlProblem(inst, T, cfg.field_strength, cfg.steps, cfg.gamma, cfg.cost_kind)
        final = noisy.evaluate(CrabSchedule(best))
    logger.info(
        "Restart %d (seed %d) of %s at T=%g: cost %.3e, infidelity %.3e after %d iterations (%s)",
        index, seed, inst.label, T, final.cost, final.infidelity, nm.iterations, nm.termination,
    )
    return RestartRecord(
        index=index,
        seed=seed,
        r=list(best.r),
        r_cos=list(best.r_cos) if best.r_cos is not None else None,
        A=list(best.A),
        B=list(best.B),
        final_cost=final.cost,
        final_infidelity=final.infidelity,
        iterations=nm.iterations,
        evaluations=nm.evaluations,
        termination=nm.termination,
        trace=trace,
        cost_trace=nm.trace,
        noiseless_infidelity=noiseless,
    )


def _params_of(record: RestartRecord, T: float) -> CrabParams:
    return CrabParams(
        T=T,
        r=tuple(record.r),
        A=tuple(record.A),
        B=tuple(record.B),
        r_cos=tuple(record.r_cos) if record.r_cos is not None else None,
        seed=record.seed,
    )


def optimize_crab(inst: FactorInstance, T: float, cfg: OptimizerConfig) -> OptResult:
    """Multi-restart CRAB optimization at fixed T.

    Args:
        inst: Instance to anneal towards.
        T: Total evolution time.
        cfg: Optimizer and dynamics settings; ``cfg.workers > 1`` runs restarts
            in a process pool.

    Returns:
        OptResult with the best restart and mean/std of final infidelities.
    """
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    master = resolve_seed(cfg.seed)
    indices = list(range(cfg.restarts))
    if cfg.workers > 1 and cfg.restarts > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, cfg.restarts)) as pool:
            records = list(pool.map(run_restart, [inst] * len(indices), [T] * len(indices),
                                    [cfg] * len(indices), indices, [master] * len(indices)))
    else:
        records = [run_restart(inst, T, cfg, k, master) for k in indices]

    best = min(records, key=lambda rec: (rec.final_cost, rec.index))
    infids = np.array([rec.final_infidelity for rec in records])
    return OptResult(
        T=T,
        master_seed=master,
        best_params=_params_of(best, T),
        best_cost=best.final_cost,
        best_infidelity=best.final_infidelity,
        infidelity_mean=float(infids.mean()),
        infidelity_std=float(infids.std()),
        per_restart=records,
    )


def sweep_T(inst: FactorInstance, T_list: Sequence[float], cfg: OptimizerConfig) -> Dict[float, OptResult]:
    """Independent ``optimize_crab`` runs, keyed by T in the order given."""
    if not T_list:
        raise ValueError("T_list must not be empty")
    bad = [T for T in T_list if not T > 0]
    if bad:
        raise ValueError(f"All T must be positive, got {bad}")
    results: Dict[float, OptResult] = {}
    for T in T_list:
        results[float(T)] = optimize_crab(inst, float(T), cfg)
        logger.info("Sweep point T=%g done: best infidelity %.3e", T, results[float(T)].best_infidelity)
    return results


def threshold_time(sweep: Dict[float, OptResult], level: float = 0.1) -> Optional[float]:
    """First T (ascending) at which some restart's infidelity trace drops below ``level``."""
    for T in sorted(sweep):
        for rec in sweep[T].per_restart:
            if rec.trace and min(rec.trace) < level:
                return T
    return None
