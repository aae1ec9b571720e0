"""Spectra along the interpolation path, the minimum gap and the speed-limit estimate."""
import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
from scipy.optimize import minimize_scalar

from annealing.dynamics import OperatorLike, as_matrix
from annealing.exceptions import DimensionMismatchError, SpectrumError
from annealing.pauli_algebra import eigvals_hermitian

logger = logging.getLogger(__name__)

DEGENERACY_TOL = 1e-9
REFINE_XTOL = 1e-4


@dataclass(frozen=True)
class SpectrumCurve:
    """Level separations E_k(s) - E_0(s) on a uniform s grid.

    ``gaps`` has shape (len(s_grid), 2^n); column 0 is identically zero.
    """

    s_grid: np.ndarray
    gaps: np.ndarray
    h0: np.ndarray = field(repr=False)
    hp: np.ndarray = field(repr=False)

    @property
    def n_levels(self) -> int:
        return self.gaps.shape[1]

    @property
    def ground_degeneracy(self) -> int:
        """Number of levels within DEGENERACY_TOL of the ground energy at s = 1."""
        return int(np.count_nonzero(self.gaps[-1] < DEGENERACY_TOL))

    def column(self, s_index: int) -> np.ndarray:
        return self.gaps[s_index]


def _pencil_levels(m0: np.ndarray, mp: np.ndarray, s_values: np.ndarray) -> np.ndarray:
    s = np.asarray(s_values, dtype=float)[:, None, None]
    return eigvals_hermitian((1.0 - s) * m0 + s * mp)


def spectrum_curve(h0: OperatorLike, hp: OperatorLike, n_points: int = 201) -> SpectrumCurve:
    """Eigenvalues of (1 - s)·H0 + s·Hp on ``n_points`` uniformly spaced s in [0, 1].

    Args:
        h0: Initial Hamiltonian.
        hp: Problem Hamiltonian.
        n_points: Grid size, at least 11.

    Returns:
        SpectrumCurve with gaps relative to the instantaneous ground energy.
    """
    if n_points < 11:
        raise SpectrumError(f"n_points must be >= 11, got {n_points}")
    m0, mp = as_matrix(h0), as_matrix(hp)
    if m0.shape != mp.shape:
        raise DimensionMismatchError(f"H0 {m0.shape} and Hp {mp.shape} disagree")
    s_grid = np.linspace(0.0, 1.0, n_points)
    levels = _pencil_levels(m0, mp, s_grid)
    gaps = np.clip(levels - levels[:, :1], 0.0, None)
    logger.debug("Spectrum of %d levels on %d grid points", m0.shape[0], n_points)
    return SpectrumCurve(s_grid=s_grid, gaps=gaps, h0=m0, hp=mp)


def _gap_index(curve: SpectrumCurve) -> int:
    d = curve.ground_degeneracy
    if d >= curve.n_levels:
        raise SpectrumError("All levels are degenerate at s = 1; no gap exists")
    return d


def min_gap(curve: SpectrumCurve) -> Tuple[float, float]:
    """Smallest separation above the terminal ground space along the path.

    With a unique terminal ground state this is min_s E_1 - E_0. For a d-fold
    degenerate terminal ground space the d lowest levels are treated as one band
    and E_d - E_0 is used. The grid minimum is refined by golden-section search
    between its neighbours.

    Returns:
        (Δ_min, s at the minimum).
    """
    d = _gap_index(curve)
    coarse = curve.gaps[:, d]
    i = int(np.argmin(coarse))
    best_gap, best_s = float(coarse[i]), float(curve.s_grid[i])
    if 0 < i < len(curve.s_grid) - 1:

        def gap_at(s: float) -> float:
            levels = _pencil_levels(curve.h0, curve.hp, np.array([s]))[0]
            return float(levels[d] - levels[0])

        bracket = (curve.s_grid[i - 1], curve.s_grid[i], curve.s_grid[i + 1])
        try:
            res = minimize_scalar(gap_at, bracket=bracket, method="golden",
                                  options={"xtol": REFINE_XTOL})
            if res.fun < best_gap and 0.0 <= res.x <= 1.0:
                best_gap, best_s = float(res.fun), float(res.x)
        except ValueError as e:
            logger.debug("Golden-section refinement skipped: %s", e)
    if best_gap <= 0.0:
        raise SpectrumError(f"Gap closes at s = {best_s:.4f}; the path has a level crossing")
    return best_gap, best_s


def qsl(delta_min: float) -> float:
    """Two-level speed-limit estimate T_QSL = π / Δ_min."""
    if not delta_min > 0:
        raise SpectrumError(f"Δ_min must be positive, got {delta_min}")
    return math.pi / delta_min


def export_spectrum_csv(path: Union[str, Path], curve: SpectrumCurve,
                        k_max: Optional[int] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    top = curve.n_levels - 1 if k_max is None else min(k_max, curve.n_levels - 1)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["s"] + [f"E_{k}-E_0" for k in range(1, top + 1)])
        for s, row in zip(curve.s_grid, curve.gaps):
            writer.writerow([repr(float(s))] + [repr(float(g)) for g in row[1: top + 1]])
    return path
