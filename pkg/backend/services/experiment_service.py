"""Experiment orchestration shared by the CLI and the HTTP API."""
import csv
import logging
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

from pydantic import ValidationError

from annealing import __version__
from annealing.cd_baseline import CDConfig, cd_sweep
from annealing.crab_optimizer import (
    OptimizerConfig,
    OptResult,
    linear_baseline,
    optimize_crab,
    resolve_seed,
    simulate,
    sweep_T,
    threshold_time,
)
from annealing.crab_schedule import CrabSchedule, LinearSchedule, Schedule, schedule_from_dict
from annealing.dynamics import EvolutionConfig, evolve, export_trajectory_csv, instantaneous_populations
from annealing.encoding import (
    FactorInstance,
    VerificationReport,
    basis_populations,
    dominant_readout,
    initial_hamiltonian,
    parse_instance,
    readout,
    resolve_instance,
    verify_instance,
)
from annealing.exceptions import AmbiguousReadoutError, InstanceError, ReadoutError, ScheduleError
from annealing.pauli_algebra import QuantumState, basis_label, materialize
from annealing.spectral_analysis import SpectrumCurve, export_spectrum_csv, min_gap, qsl, spectrum_curve
from backend.config import settings
from backend.models import (
    ExperimentConfig,
    FactorResult,
    InstanceSummary,
    ReplayResult,
    RunRecord,
    SpectrumSummary,
    SweepRow,
)

logger = logging.getLogger(__name__)

# Default sweep grid as multiples of the instance's speed-limit time.
DEFAULT_SWEEP_FACTORS = (0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0)
# Population trajectories: at most this many time rows, levels P_0..P_7.
TRAJECTORY_ROWS = 500
TRAJECTORY_LEVELS = 7

ProgressCallback = Callable[[str], None]


class ExperimentService:
    """Runs spectrum, optimize, sweep, factor and verify experiments."""

    @staticmethod
    def load_instance(cfg: ExperimentConfig) -> FactorInstance:
        """
        Resolve the instance argument of a config.

        Args:
            cfg: Experiment configuration

        Returns:
            FactorInstance (built-in, custom direct, or from a file; relative
            file names are also looked up in the instances directory)
        """
        spec = str(cfg.instance).strip()
        if not spec.isdigit() and not os.path.exists(spec):
            candidate = Path(settings.instances_dir) / spec
            if candidate.exists():
                spec = str(candidate)
        return resolve_instance(spec, weighted=cfg.weighted)

    @staticmethod
    def summarize(inst: FactorInstance) -> InstanceSummary:
        return InstanceSummary(
            omega=inst.omega,
            label=inst.label,
            method=inst.method,
            n_qubits=inst.n_qubits,
            solutions=[basis_label(i, inst.n_qubits) for i in inst.solutions],
        )

    @staticmethod
    def optimizer_config(cfg: ExperimentConfig, seed: Optional[int] = None) -> OptimizerConfig:
        return OptimizerConfig(
            n_c=cfg.n_c,
            restarts=cfg.restarts,
            max_iterations=cfg.max_iterations,
            simplex_init_scale=settings.simplex_init_scale,
            f_tol=settings.f_tol,
            x_tol=settings.x_tol,
            seed=seed if seed is not None else cfg.seed,
            cost_kind=cfg.cost_kind,
            gamma=cfg.gamma,
            noise_strategy=cfg.noise_strategy,
            independent_cos=cfg.independent_cos,
            field_strength=cfg.g,
            steps=cfg.steps,
            workers=cfg.workers,
        )

    @staticmethod
    def cd_config(cfg: ExperimentConfig) -> CDConfig:
        return CDConfig(
            epsilon_r=settings.cd_epsilon_r,
            coupling_scope=settings.cd_coupling_scope,
            field_strength=cfg.g,
        )

    @staticmethod
    def output_path(cfg: ExperimentConfig, inst: FactorInstance, suffix: str = ".json") -> Path:
        if cfg.output:
            base = Path(cfg.output)
            return base if base.suffix == suffix else base.with_suffix(suffix)
        return Path(settings.results_dir) / f"{cfg.command}-{inst.label}{suffix}"

    def make_record(self, cfg: ExperimentConfig, inst: FactorInstance, result: dict,
                    master_seed: Optional[int] = None, files: Optional[List[str]] = None) -> RunRecord:
        # The echoed config alone must replay the run.
        if master_seed is not None and cfg.seed is None:
            cfg = cfg.model_copy(update={"seed": master_seed})
        return RunRecord(
            version=__version__,
            timestamp=datetime.now(timezone.utc),
            config=cfg,
            instance=self.summarize(inst),
            master_seed=master_seed,
            result=result,
            files=files or [],
        )

    @staticmethod
    def write_record(record: RunRecord, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            f.write(record.model_dump_json(indent=2))
        logger.info("Wrote %s", path)
        return path

    # spectrum

    def spectrum(self, cfg: ExperimentConfig, inst: Optional[FactorInstance] = None,
                 write: bool = True) -> Tuple[SpectrumSummary, SpectrumCurve]:
        """
        Gap curves, minimum gap and speed-limit time of an instance.

        Args:
            cfg: Experiment configuration (uses g and n_points)
            inst: Already resolved instance, if any
            write: Write the gap table as CSV

        Returns:
            (SpectrumSummary, SpectrumCurve)
        """
        inst = inst or self.load_instance(cfg)
        curve = spectrum_curve(initial_hamiltonian(inst.n_qubits, cfg.g), inst.hamiltonian, cfg.n_points)
        delta, s_min = min_gap(curve)
        csv_path = None
        if write:
            csv_path = str(export_spectrum_csv(self.output_path(cfg, inst, ".csv"), curve))
            logger.info("Wrote %s", csv_path)
        summary = SpectrumSummary(
            delta_min=delta,
            s_at_min=s_min,
            t_qsl=qsl(delta),
            ground_degeneracy=curve.ground_degeneracy,
            n_points=cfg.n_points,
            csv_path=csv_path,
        )
        return summary, curve

    # optimize

    @staticmethod
    def _opt_result_dict(result: OptResult) -> dict:
        return result.model_dump(mode="json")

    @staticmethod
    def write_traces(result: OptResult, base: Path) -> List[str]:
        """One CSV per restart: iteration, best cost, best infidelity."""
        paths = []
        base.parent.mkdir(parents=True, exist_ok=True)
        for rec in result.per_restart:
            path = base.parent / f"{base.stem}-T{result.T:g}-restart{rec.index}.csv"
            with open(path, "w", newline="", encoding="utf-8") as f:
                writer = csv.writer(f)
                writer.writerow(["iteration", "best_cost", "best_infidelity"])
                for i, (c, infid) in enumerate(zip(rec.cost_trace, rec.trace), start=1):
                    writer.writerow([i, repr(c), repr(infid)])
            paths.append(str(path))
        return paths

    def optimize(self, cfg: ExperimentConfig, progress: Optional[ProgressCallback] = None) -> RunRecord:
        """
        CRAB optimization of one instance at fixed T.

        Args:
            cfg: Experiment configuration (T required)
            progress: Optional status callback

        Returns:
            RunRecord with the optimization result and readout
        """
        inst = self.load_instance(cfg)
        master = resolve_seed(cfg.seed)
        opt_cfg = self.optimizer_config(cfg, master)
        if progress:
            progress(f"Optimizing {inst.label} at T={cfg.T:g} with {cfg.restarts} restarts")
        result = optimize_crab(inst, cfg.T, opt_cfg)
        best = CrabSchedule(result.best_params)
        final = simulate(inst, best, cfg.g, cfg.steps, cfg.gamma)
        out = self.output_path(cfg, inst)
        files = self.write_traces(result, out)
        if cfg.gamma == 0:
            files.append(str(self.write_trajectory(inst, best, cfg, out)))
            files.append(str(self.write_trajectory(inst, LinearSchedule(cfg.T), cfg, out)))
        else:
            logger.info("Skipping population trajectories: they need a pure state (gamma=%g)", cfg.gamma)
        payload = self._opt_result_dict(result)
        payload["schedule"] = best.to_dict()
        payload["populations"] = basis_populations(final.state)
        payload["readout"] = self._try_readout(final.state, inst)
        record = self.make_record(cfg, inst, payload, master, files + [str(out)])
        self.write_record(record, out)
        return record

    @staticmethod
    def write_trajectory(inst: FactorInstance, sched: Schedule, cfg: ExperimentConfig, base: Path) -> Path:
        """Instantaneous-eigenstate populations along a closed anneal under ``sched``."""
        kind = sched.to_dict()["kind"]
        evo_cfg = EvolutionConfig(T=sched.T, steps=cfg.steps, record_trajectory=True,
                                  record_stride=max(1, cfg.steps // TRAJECTORY_ROWS))
        h0 = materialize(initial_hamiltonian(inst.n_qubits, cfg.g)).matrix
        hp = materialize(inst.hamiltonian).matrix
        traj = evolve(h0, hp, sched, QuantumState.plus_state(inst.n_qubits), evo_cfg).trajectory
        populations = instantaneous_populations(traj, h0, hp, sched)
        path = base.parent / f"{base.stem}-T{sched.T:g}-{kind}-trajectory.csv"
        export_trajectory_csv(path, traj, sched, populations, inst.solutions, k_max=TRAJECTORY_LEVELS)
        logger.info("Wrote %s", path)
        return path

    def replay(self, record_path: Union[str, Path], gamma: Optional[float] = None,
               steps: Optional[int] = None) -> ReplayResult:
        """
        Re-run the best schedule stored in an optimize record.

        Args:
            record_path: Result document written by ``optimize``
            gamma: Dephasing rate (default: the recorded one)
            steps: Integration steps (default: the recorded ones)

        Returns:
            ReplayResult with the recorded and the replayed infidelity
        """
        path = Path(record_path)
        if not path.exists():
            raise InstanceError(f"Result file not found: {path}")
        try:
            record = RunRecord.model_validate_json(path.read_text(encoding="utf-8"))
        except ValidationError as e:
            raise InstanceError(f"Malformed result file {path}: {e}") from e
        if "schedule" not in record.result:
            raise ScheduleError(f"{path} holds no schedule; only optimize records can be replayed")
        cfg = record.config
        sched = schedule_from_dict(record.result["schedule"])
        inst = self.load_instance(cfg)
        gamma = cfg.gamma if gamma is None else gamma
        steps = cfg.steps if steps is None else steps
        final = simulate(inst, sched, cfg.g, steps, gamma)
        return ReplayResult(
            T=sched.T,
            gamma=gamma,
            steps=steps,
            recorded_infidelity=record.result.get("best_infidelity"),
            infidelity=final.infidelity,
            energy=final.energy,
            readout=self._try_readout(final.state, inst),
        )

    @staticmethod
    def _try_readout(state, inst: FactorInstance) -> Optional[dict]:
        try:
            a, b, kind = ExperimentService.decode_factors(state, inst)
        except ReadoutError as e:
            logger.warning("Readout of %s failed: %s", inst.label, e)
            return None
        return {"a": a, "b": b, "readout": kind}

    @staticmethod
    def decode_factors(state, inst: FactorInstance) -> Tuple[int, int, str]:
        """Expectation readout, falling back to the dominant basis state when a bit is ambiguous."""
        try:
            a, b = readout(state, inst, settings.readout_ambiguity)
            return a, b, "expectation"
        except AmbiguousReadoutError as e:
            logger.warning("%s; falling back to the dominant basis state", e)
            a, b = dominant_readout(state, inst)
            return a, b, "dominant"

    # sweep

    def sweep(self, cfg: ExperimentConfig, progress: Optional[ProgressCallback] = None) -> RunRecord:
        """
        Infidelity versus T for the requested methods.

        Args:
            cfg: Experiment configuration (T_list optional; defaults to multiples of T_QSL)
            progress: Optional status callback

        Returns:
            RunRecord whose result holds the sweep rows, T_QSL and the CRAB threshold time
        """
        inst = self.load_instance(cfg)
        summary, _ = self.spectrum(cfg, inst, write=False)
        if cfg.T_list:
            T_list = [float(T) for T in cfg.T_list]
        elif cfg.T:
            T_list = [cfg.T]
        else:
            T_list = [round(f * summary.t_qsl, 4) for f in DEFAULT_SWEEP_FACTORS]
        master = resolve_seed(cfg.seed)
        rows: List[SweepRow] = []
        crab_results: Dict[float, OptResult] = {}
        for done, method in enumerate(cfg.methods, start=1):
            if progress:
                progress(f"{method} over {len(T_list)} values of T ({done}/{len(cfg.methods)})")
            if method == "crab":
                crab_results = sweep_T(inst, T_list, self.optimizer_config(cfg, master))
                rows += [self._crab_row(T, r, cfg.restarts) for T, r in crab_results.items()]
            elif method == "linear":
                for T in T_list:
                    infid = linear_baseline(inst, T, cfg.g, cfg.steps, cfg.gamma).infidelity
                    rows.append(self._single_row("linear", T, infid))
            else:
                for res in cd_sweep(inst, T_list, self.cd_config(cfg), cfg.gamma, cfg.steps):
                    rows.append(self._single_row("cd", res.T, res.infidelity))
            logger.info("Sweep of %s with %s done", inst.label, method)

        out = self.output_path(cfg, inst)
        table = self.write_sweep_table(rows, out.with_suffix(".csv"))
        files = [str(table)]
        for result in crab_results.values():
            files += self.write_traces(result, out)
        payload = {
            "T_list": T_list,
            "t_qsl": summary.t_qsl,
            "delta_min": summary.delta_min,
            "rows": [row.model_dump() for row in rows],
            "threshold_time": threshold_time(crab_results) if crab_results else None,
            "crab": {repr(T): self._opt_result_dict(r) for T, r in crab_results.items()},
        }
        record = self.make_record(cfg, inst, payload, master, files + [str(out)])
        self.write_record(record, out)
        return record

    @staticmethod
    def _crab_row(T: float, result: OptResult, restarts: int) -> SweepRow:
        return SweepRow(method="crab", T=T, infidelity_mean=result.infidelity_mean,
                        infidelity_std=result.infidelity_std,
                        infidelity_best=result.best_infidelity, restarts=restarts)

    @staticmethod
    def _single_row(method: str, T: float, infid: float) -> SweepRow:
        return SweepRow(method=method, T=T, infidelity_mean=infid, infidelity_std=0.0,
                        infidelity_best=infid, restarts=1)

    @staticmethod
    def write_sweep_table(rows: List[SweepRow], path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        fields = list(SweepRow.model_fields)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=fields)
            writer.writeheader()
            for row in rows:
                writer.writerow(row.model_dump())
        return path

    # factor / verify

    def factor(self, cfg: ExperimentConfig) -> FactorResult:
        """
        Optimize a schedule, anneal, and read out a·b = ω.

        Args:
            cfg: Experiment configuration (T required)

        Returns:
            FactorResult with the factors and the readout path used
        """
        inst = self.load_instance(cfg)
        opt_cfg = self.optimizer_config(cfg, resolve_seed(cfg.seed))
        result = optimize_crab(inst, cfg.T, opt_cfg)
        final = simulate(inst, CrabSchedule(result.best_params), cfg.g, cfg.steps, cfg.gamma)
        a, b, kind = self.decode_factors(final.state, inst)
        populations = basis_populations(final.state)
        top = dict(sorted(populations.items(), key=lambda kv: -kv[1])[:8])
        return FactorResult(omega=inst.omega, a=a, b=b, readout=kind,
                            infidelity=final.infidelity, populations=top)

    def verify(self, cfg: ExperimentConfig) -> VerificationReport:
        inst = self.load_instance(cfg)
        return verify_instance(inst)

    @staticmethod
    def save_instance(text: str, filename: str) -> Tuple[FactorInstance, Path, VerificationReport]:
        """
        Validate an uploaded instance document and store it.

        Args:
            text: JSON instance document
            filename: Original file name

        Returns:
            (instance, stored path, verification report)
        """
        inst = parse_instance(text)
        report = verify_instance(inst)
        name = Path(filename).name
        if not name.endswith(".json"):
            raise InstanceError("Instance files must have a .json extension")
        path = Path(settings.instances_dir) / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        logger.info("Stored instance %s at %s", inst.label, path)
        return inst, path, report


# Global service instance
experiment_service = ExperimentService()
