"""Per-energy stationary data: modes, frame, couplings, phases, fast tables.

Everything downstream (coefficient ODE, scattering matrix, wave-packet
synthesis) consumes one of these bundles.  For energy sweeps the bundles
share a single x-grid so that coefficient tables can be stacked and the
oscillatory ODE right-hand side stays a vectorized Horner evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import numerics
from .errors import SemiwaveError
from .frame import (
    CouplingMatrix, EigenFrame, PhaseTable, coupling_matrix, kato_transport,
    phase_functions,
)
from .modes import ModeField, refined_grid, track_modes, variation_grid
from .symbol import ModelSpec

__all__ = ["StationaryData", "build_stationary", "build_stationary_many",
           "TOL_PROFILES", "EPSILON_FLOOR"]

# (ode rtol, ode atol, oscillation nodes per period)
TOL_PROFILES = {
    "fast": (1e-8, 1e-10, 6),
    "default": (1e-10, 1e-12, 12),
    "strict": (1e-11, 1e-13, 16),
}

# below this the 12-nodes-per-period step rule is not affordable at desk scale
EPSILON_FLOOR = 0.005


@dataclass
class StationaryData:
    """Everything needed to integrate coefficients at one energy."""

    model: ModelSpec
    E: float
    field: ModeField
    frame: EigenFrame
    coupling: CouplingMatrix
    phases: PhaseTable
    a_stack: numerics.SplineStack        # md*md coupling entries, row-major
    anti_stack: numerics.SplineStack     # md antiderivatives I_j (anchored at 0)

    @property
    def n_modes(self) -> int:
        return self.field.n_modes

    @property
    def grid(self) -> np.ndarray:
        return self.field.grid

    def max_mode_spread(self) -> float:
        return float(np.max(self.field.values) - np.min(self.field.values))

    def coupling_l1(self) -> float:
        """int ||M|| dx bound used for tail certificates."""
        a = np.abs(self.coupling.a).sum(axis=(1, 2))
        return float(np.trapezoid(a, self.grid))


def _build_tables(field: ModeField, coupling: CouplingMatrix,
                  phases: PhaseTable) -> tuple:
    md = field.n_modes
    grid = field.grid
    a_funcs = [coupling.a[:, j, l] for j in range(md) for l in range(md)]
    a_stack = numerics.SplineStack(grid, a_funcs)
    # quartic antiderivative pieces, stacked by hand (SplineStack is cubic)
    anti = [phases.antiderivatives[j] for j in range(md)]
    anchor = phases.anchor

    class AntiStack:
        def __init__(self):
            self.x = grid
            self.c = np.stack([p.c for p in anti], axis=0)  # (md, 5, N-1)
            self.anchor = anchor

        def __call__(self, x: float) -> np.ndarray:
            idx = np.searchsorted(self.x, x, side="right") - 1
            idx = min(max(idx, 0), len(self.x) - 2)
            dx = x - self.x[idx]
            c = self.c[:, :, idx]
            out = c[:, 0]
            for p in range(1, c.shape[1]):
                out = out * dx + c[:, p]
            return out - self.anchor

    return a_stack, AntiStack()


def build_stationary(model: ModelSpec, E: float,
                     grid: Optional[np.ndarray] = None,
                     *, h_max: float = 0.01, gap_factor: float = 250.0,
                     check_routes: bool = True) -> StationaryData:
    if grid is None:
        grid = refined_grid(model, E, h_max=h_max, gap_factor=gap_factor)
    field = track_modes(model, E, grid)
    if len(field.grid) != len(grid):
        raise SemiwaveError(
            "tracking refined the supplied grid; rebuild with a denser grid"
        )
    fr = kato_transport(model, E, field)
    tol = 1e-5 if check_routes else np.inf
    cpl = coupling_matrix(fr, model, E, tol=tol)
    ph = phase_functions(field, model)
    a_stack, anti = _build_tables(field, cpl, ph)
    return StationaryData(model=model, E=E, field=field, frame=fr, coupling=cpl,
                          phases=ph, a_stack=a_stack, anti_stack=anti)


def build_stationary_many(model: ModelSpec, energies: Sequence[float],
                          *, h_max: float = 0.04, points_per_width: float = 40.0,
                          progress: bool = False) -> list:
    """Bundles on a shared grid; the route cross-check runs on sentinels only.

    The shared grid follows the variation-width rule at the lower window
    edge (narrowest gaps, widest coupling peaks of the sweep).
    """
    energies = list(energies)
    e_ref = min(energies)
    grid = variation_grid(model, e_ref, h_max=h_max, points_per_width=points_per_width)
    sentinels = {0, len(energies) // 2, len(energies) - 1}
    out = []
    for i, E in enumerate(energies):
        out.append(build_stationary(model, float(E), grid,
                                    check_routes=(i in sentinels)))
    return out
