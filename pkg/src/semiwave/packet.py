"""Time-dependent wave packets: synthesis, free asymptotics, transition profile.

Solutions are superpositions over an energy window of stationary solutions,
weighted by a density Q(E, eps) = exp(-G/eps) exp(-iJ/eps) P(E, eps) that
localizes the packet.  The exponentially small transmitted piece on the
partner mode n = pi(j) is governed, for small eps, by the decay exponent
alpha(E) = G(E) + Im(loop action) minimized at E*; its leading term is a
windowed Gaussian in momentum space around k* = k_n(+inf, E*), evaluated
either by quadrature or, for quadratic asymptotic dispersion, in closed
form as a freely spreading Gaussian.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from . import expr
from .errors import (
    MinimizerAtBoundary, QuadratureError, SemiwaveError, ValidationFailure,
)
from .frame import loop_prefactor
from .modes import detect_real_crossings, locate_branch_point, branch_point_seed
from .numerics import segment_gauss, trapezoid_l2
from .scatter import action_integral, integrate_coefficients_batch
from .stationary import StationaryData, build_stationary_many
from .symbol import ModelSpec, companion_limit

__all__ = [
    "EnergyDensity", "WaveField", "DiagnosticsConfig", "TransitionProfile",
    "InverseDispersion", "SynthesisPipeline", "density_from_dict",
    "energy_node_count", "glue_asymptotic", "inverse_dispersion",
    "transition_profile", "leading_term", "gaussian_closed_form",
    "localization_report", "cone_decay_check", "classify_channels",
    "velocity_bounds",
]


# ---------------------------------------------------------------------------
# Energy densities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyDensity:
    """Q(E, eps) = exp(-G(E)/eps) exp(-i J(E)/eps) P(E, eps) on the window."""

    E0: float
    g: float
    G: expr.Expression
    J: expr.Expression
    P: expr.Expression
    window: Tuple[float, float]

    def q(self, E, eps: float):
        Gv = expr.evaluate(self.G, {"E": E})
        Jv = expr.evaluate(self.J, {"E": E})
        Pv = expr.evaluate(self.P, {"E": E, "eps": eps})
        return np.exp(-np.real(Gv) / eps) * np.exp(-1j * np.real(Jv) / eps) * Pv

    def g_value(self, E):
        return np.real(expr.evaluate(self.G, {"E": E}))

    def p_value(self, E, eps: float):
        return expr.evaluate(self.P, {"E": E, "eps": eps})

    def validate(self, eps_max: float = 0.1) -> Dict[str, float]:
        lo, hi = self.window
        if not lo < self.E0 < hi:
            raise ValidationFailure("density peak E0 must be interior to the window")
        Es = np.linspace(lo, hi, 101)
        Gv = np.real(expr.evaluate(self.G, {"E": Es}))
        if np.min(Gv) < -1e-12:
            raise ValidationFailure("G must be nonnegative on the window")
        if abs(self.g_value(self.E0)) > 1e-12 * max(1.0, self.g):
            raise ValidationFailure("G(E0) must vanish")
        h = 1e-4 * (hi - lo)
        g_fit = (self.g_value(self.E0 + h) - 2 * self.g_value(self.E0)
                 + self.g_value(self.E0 - h)) / h ** 2
        if abs(g_fit - self.g) > 1e-6 * max(1.0, self.g):
            raise ValidationFailure(
                f"curvature of G at E0 is {g_fit:.8g}, declared g={self.g:.8g}"
            )
        p_bound = 0.0
        dp_bound = 0.0
        for eps in (eps_max, eps_max / 2, eps_max / 10):
            Pv = expr.evaluate(self.P, {"E": Es, "eps": eps})
            Pv = np.atleast_1d(np.asarray(Pv, dtype=complex))
            p_bound = max(p_bound, float(np.max(np.abs(Pv))))
            dP = expr.evaluate(expr.derivative(self.P, "E"), {"E": Es, "eps": eps})
            dP = np.atleast_1d(np.asarray(dP, dtype=complex))
            dp_bound = max(dp_bound, float(np.max(np.abs(dP))))
        if not (np.isfinite(p_bound) and np.isfinite(dp_bound)):
            raise ValidationFailure("P or its energy derivative is unbounded")
        return {"g_fit": float(g_fit), "p_bound": p_bound, "dp_bound": dp_bound}


def density_from_dict(doc: Dict, window: Tuple[float, float]) -> EnergyDensity:
    dens = EnergyDensity(
        E0=float(doc["E0"]), g=float(doc["g"]),
        G=expr.parse(str(doc.get("G", f"{doc['g']}*(E-{doc['E0']})^2/2"))),
        J=expr.parse(str(doc.get("J", "0"))),
        P=expr.parse(str(doc.get("P", "1"))),
        window=(float(window[0]), float(window[1])),
    )
    dens.validate()
    return dens


# ---------------------------------------------------------------------------
# Wave fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WaveField:
    t: float
    x: np.ndarray
    values: np.ndarray            # (Nx, d) complex
    provenance: str
    deriv_order: int = 0

    def l2_norm(self) -> float:
        return trapezoid_l2(self.values, self.x)

    def restricted_mass(self, lo: float, hi: float) -> float:
        mask = (self.x >= lo) & (self.x <= hi)
        if not np.any(mask):
            return 0.0
        return trapezoid_l2(self.values[mask], self.x[mask]) ** 2


@dataclass(frozen=True)
class DiagnosticsConfig:
    beta: float = 0.4             # in (0, 1/2)
    alpha_loc: float = 0.7        # in (1/2, 1)
    tau: float = 0.4              # in (0, 1/2)
    k_plus: float = 0.0           # velocity bounds; 0 means "compute from model"
    k_minus: float = 0.0
    mass_threshold: float = 0.99


def energy_node_count(window: Tuple[float, float], eps: float, t: float,
                      x_extent: float, k_slope: float,
                      n_min: int = 64, n_max: int = 6000) -> int:
    """Nodes needed to resolve exp(-i(tE + x k(E))/eps) over the window."""
    width = abs(window[1] - window[0])
    phase = width * (abs(t) + abs(x_extent) * abs(k_slope)) / eps
    return int(min(max(n_min, math.ceil(0.75 * phase) + 16), n_max))


# ---------------------------------------------------------------------------
# Inverse asymptotic dispersion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InverseDispersion:
    """E_j^side(k): inverse of E -> k_j(side inf, E) on the energy window.

    energy() interpolates the inverse through exactly computed samples;
    derivatives use high-order stencils on direct eigenvalue evaluations so
    that the Gaussian parameters inherit no spline noise.
    """

    model: ModelSpec
    mode: int
    side: int
    window: Tuple[float, float]
    k_window: Tuple[float, float]
    _k_of_E: CubicSpline
    _E_of_k: CubicSpline
    _quadratic: bool

    def _k_exact(self, E: float) -> float:
        ev = np.linalg.eigvals(companion_limit(self.model, self.side, float(E)))
        return float(np.sort(ev.real)[self.mode - 1])

    def energy(self, k):
        out = self._E_of_k(np.asarray(k, dtype=float))
        return out if np.ndim(k) else float(out)

    def dk_dE(self, E):
        scalar = np.ndim(E) == 0
        Es = np.atleast_1d(np.asarray(E, dtype=float))
        h = 1e-4 * max(1.0, abs(self.window[1] - self.window[0]))
        out = np.array([
            (self._k_exact(e - 2 * h) - 8 * self._k_exact(e - h)
             + 8 * self._k_exact(e + h) - self._k_exact(e + 2 * h)) / (12 * h)
            for e in Es
        ])
        return float(out[0]) if scalar else out

    def _dk2_dE2(self, E: float) -> float:
        h = 1e-3 * max(1.0, abs(self.window[1] - self.window[0]))
        return (-self._k_exact(E - 2 * h) + 16 * self._k_exact(E - h)
                - 30 * self._k_exact(E) + 16 * self._k_exact(E + h)
                - self._k_exact(E + 2 * h)) / (12 * h ** 2)

    def dE_dk(self, k):
        scalar = np.ndim(k) == 0
        ks = np.atleast_1d(np.asarray(k, dtype=float))
        Es = np.atleast_1d(self.energy(ks))
        out = np.array([1.0 / self.dk_dE(float(e)) for e in Es])
        return float(out[0]) if scalar else out

    def d2E_dk2(self, k):
        E = float(self.energy(k))
        kp = self.dk_dE(E)
        kpp = self._dk2_dE2(E)
        return -kpp / kp ** 3

    @property
    def is_quadratic(self) -> bool:
        return self._quadratic


def _asymptotic_mode_table(model: ModelSpec, side: int, n_nodes: int = 201):
    lo, hi = model.energy_window
    Es = np.linspace(lo, hi, n_nodes)
    md = model.n_modes
    vals = np.empty((n_nodes, md))
    for i, E in enumerate(Es):
        ev = np.linalg.eigvals(companion_limit(model, side, float(E)))
        vals[i] = np.sort(ev.real)
    return Es, vals


def inverse_dispersion(model: ModelSpec, mode: int, side: int) -> InverseDispersion:
    """Monotone inversion of the asymptotic dispersion; validates GV."""
    Es, vals = _asymptotic_mode_table(model, side, 801)
    k_sorted = vals[:, mode - 1]
    spline = CubicSpline(Es, k_sorted)
    slopes = spline(Es, 1)
    if np.min(np.abs(slopes)) < 1e-6:
        raise ValidationFailure(
            f"asymptotic dispersion of mode {mode} at side {side:+d} has "
            "vanishing energy derivative on the window"
        )
    if np.any(slopes > 0) and np.any(slopes < 0):
        raise ValidationFailure("asymptotic dispersion is not monotone on the window")
    k_lo, k_hi = sorted((float(k_sorted[0]), float(k_sorted[-1])))
    if k_sorted[0] < k_sorted[-1]:
        inv_spline = CubicSpline(k_sorted, Es)
    else:
        inv_spline = CubicSpline(k_sorted[::-1], Es[::-1])
    quad_flag = (mode, side) in model.quadratic_dispersion
    inv = InverseDispersion(model=model, mode=mode, side=side,
                            window=(float(Es[0]), float(Es[-1])),
                            k_window=(k_lo, k_hi), _k_of_E=spline,
                            _E_of_k=inv_spline, _quadratic=quad_flag)
    if quad_flag:
        # global test: E(k) must be a quadratic polynomial on the window
        ks = np.linspace(k_lo, k_hi, 33)[1:-1]
        Evals = inv.energy(ks)
        coeffs = np.polynomial.polynomial.polyfit(ks, Evals, 2)
        resid = np.max(np.abs(np.polynomial.polynomial.polyval(ks, coeffs) - Evals))
        scale = max(1.0, float(np.max(np.abs(Evals))))
        if resid > 1e-8 * scale:
            raise ValidationFailure(
                f"quadratic-dispersion flag declared for mode {mode} side {side:+d} "
                f"but the quadratic fit residual is {resid:.3e}"
            )
    return inv


def velocity_bounds(model: ModelSpec) -> Tuple[float, float]:
    """(K_minus, K_plus): extremes of 1/|dk_j/dE(side inf, E)| over the window."""
    inv_slopes = []
    for side in (-1, +1):
        Es, vals = _asymptotic_mode_table(model, side, 41)
        for j in range(vals.shape[1]):
            sl = np.gradient(vals[:, j], Es)
            inv_slopes.extend((1.0 / np.abs(sl)).tolist())
    return float(np.min(inv_slopes)), float(np.max(inv_slopes))


def classify_channels(slope_minus: float, slope_plus: float, t: float):
    """Which glued asymptotic pieces carry mass for large |t|.

    Arguments are the signs (or values) of dk_j/dE at -inf and +inf and the
    time; returns a tuple of sides among ("-", "+") whose asymptotic wave
    survives in the glued approximation.
    """
    prod = slope_minus * slope_plus
    tp = t * slope_plus
    if prod < 0 and tp < 0:
        return ("-", "+")
    if prod > 0 and tp > 0:
        return ("-",)
    if prod > 0 and tp < 0:
        return ("+",)
    return ()


# ---------------------------------------------------------------------------
# Synthesis pipeline
# ---------------------------------------------------------------------------

def _smoothstep(x: np.ndarray) -> np.ndarray:
    u = np.clip(x, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


class SynthesisPipeline:
    """Stationary data on a Gauss-Legendre energy grid plus solved coefficients.

    The pipeline fixes the quadrature nodes and an x-sampling of the shared
    stationary grid once; coefficient trajectories are solved per eps (one
    batched integration) and cached, after which exact, asymptotic, glued
    and leading-term fields are cheap assemblies.
    """

    def __init__(self, model: ModelSpec, density: EnergyDensity, *,
                 n_energy: int, j_in: int = 1, dx: float = 0.02,
                 tol_profile: str = "default", h_max: float = 0.04,
                 points_per_width: float = 40.0):
        self.model = model
        self.density = density
        self.j_in = j_in
        self.tol_profile = tol_profile
        lo, hi = density.window
        self.e_nodes, self.e_weights = segment_gauss(lo, hi, n_energy)
        self.datas: List[StationaryData] = build_stationary_many(
            model, self.e_nodes, h_max=h_max, points_per_width=points_per_width)
        grid = self.datas[0].grid
        stride = max(1, int(round(dx / max(np.median(np.diff(grid)), 1e-6))))
        idx = np.arange(0, len(grid), stride)
        if idx[-1] != len(grid) - 1:
            idx = np.append(idx, len(grid) - 1)
        self.x_index = idx
        self.x_sample = grid[idx]
        self._traj_cache: Dict[float, list] = {}

    @property
    def n_modes(self) -> int:
        return self.datas[0].n_modes

    def trajectories(self, eps: float) -> list:
        key = round(float(eps), 12)
        if key not in self._traj_cache:
            md = self.n_modes
            c0 = np.zeros(md, dtype=complex)
            c0[self.j_in - 1] = 1.0
            self._traj_cache[key] = integrate_coefficients_batch(
                self.datas, eps, c0, x_eval=self.x_sample,
                tol_profile=self.tol_profile)
        return self._traj_cache[key]

    def coefficient_limits(self, eps: float, side: int) -> np.ndarray:
        """(N_E, md) limits of the coefficients on the requested side."""
        trajs = self.trajectories(eps)
        if side > 0:
            return np.stack([t.c_right for t in trajs], axis=0)
        return np.stack([t.c_left for t in trajs], axis=0)

    # -- exact superposition -------------------------------------------------

    def field_grid(self, x_lo: float, x_hi: float, dx: float) -> np.ndarray:
        """A grid aligned with the sampled stationary columns inside the
        truncation radius and uniform beyond it.

        exact_field is only evaluated at such grids: on the aligned points
        every x-dependent ingredient (coefficients, phases, polarization) is
        a table value rather than an interpolation.
        """
        X = self.model.truncation
        pieces = []
        if x_lo < -X:
            pieces.append(np.arange(x_lo, -X, dx))
        lo_in, hi_in = max(x_lo, -X), min(x_hi, X)
        if hi_in > lo_in:
            stride = max(1, int(round(dx / max(np.median(np.diff(self.x_sample)), 1e-9))))
            sel = self.x_sample[(self.x_sample >= lo_in) & (self.x_sample <= hi_in)]
            pieces.append(sel[::stride])
        if x_hi > X:
            pieces.append(np.arange(X + dx, x_hi + dx / 2, dx))
        grid = np.unique(np.concatenate(pieces))
        return grid

    def exact_field(self, eps: float, t: float, x_grid: np.ndarray,
                    deriv_order: int = 0) -> WaveField:
        """Quadrature of the decomposition-form integrand over the window.

        Points inside the truncation radius are snapped to the sampled
        stationary columns (the returned field carries the snapped grid);
        beyond the radius the integrand is continued with its certified
        asymptotic values.
        """
        model = self.model
        d = model.d
        md = self.n_modes
        X = model.truncation
        trajs = self.trajectories(eps)
        x_grid = np.asarray(x_grid, dtype=float)
        inside = np.abs(x_grid) <= X - 1e-9
        col = np.searchsorted(self.x_sample, x_grid[inside])
        col = np.clip(col, 0, len(self.x_sample) - 1)
        use_left = (col > 0) & (np.abs(self.x_sample[np.maximum(col - 1, 0)]
                                       - x_grid[inside])
                                < np.abs(self.x_sample[col] - x_grid[inside]))
        col[use_left] -= 1
        x_out = x_grid.copy()
        x_out[inside] = self.x_sample[col]

        out = np.zeros((len(x_grid), d), dtype=complex)
        qvals = self.density.q(self.e_nodes, eps)
        masks = {side: (x_out < -X + 1e-9) if side < 0 else (x_out > X - 1e-9)
                 for side in (-1, +1)}
        for n, data in enumerate(self.datas):
            w = self.e_weights[n] * qvals[n] * np.exp(-1j * t * self.e_nodes[n] / eps)
            c_tab = trajs[n].c                      # (n_sample, md)
            ph = data.phases
            fr = data.frame
            vals = np.zeros((len(x_grid), d), dtype=complex)
            for j in range(md):
                I_in = ph.integral(x_out[inside], j)
                cj = c_tab[col, j]
                phij = fr.phi[self.x_index, j, :d][col]
                contrib = (cj * np.exp(-1j * I_in / eps))[:, None] * phij
                if deriv_order:
                    kj = ph.mode_splines[j](x_out[inside]) ** deriv_order
                    contrib = contrib * kj[:, None]
                vals[inside] += contrib
                for side in (-1, +1):
                    mask = masks[side]
                    if not np.any(mask):
                        continue
                    k_inf = ph.k_limit(side)[j]
                    omega = ph.omega(side)[j]
                    c_lim = trajs[n].c_left[j] if side < 0 else trajs[n].c_right[j]
                    phi_inf = fr.polarization_limit(side)[j]
                    amp = c_lim * np.exp(-1j * (k_inf * x_out[mask] + omega) / eps)
                    if deriv_order:
                        amp = amp * k_inf ** deriv_order
                    vals[mask] += amp[:, None] * phi_inf[None, :]
            out += w * vals
        return WaveField(t=t, x=x_out, values=out, provenance="exact",
                         deriv_order=deriv_order)

    # -- free asymptotic waves ------------------------------------------------

    def asymptotic_field(self, eps: float, t: float, side: int, j: int,
                         x_grid: np.ndarray, deriv_order: int = 0,
                         c_limits: Optional[np.ndarray] = None) -> WaveField:
        """Free wave on mode j built from the coefficient limits on a side."""
        d = self.model.d
        x_grid = np.asarray(x_grid, dtype=float)
        if c_limits is None:
            c_limits = self.coefficient_limits(eps, side)[:, j - 1]
        qvals = self.density.q(self.e_nodes, eps)
        k_inf = np.array([dat.phases.k_limit(side)[j - 1] for dat in self.datas])
        omega = np.array([dat.phases.omega(side)[j - 1] for dat in self.datas])
        phi_inf = np.stack([dat.frame.polarization_limit(side)[j - 1]
                            for dat in self.datas], axis=0)      # (N_E, d)
        weight = self.e_weights * qvals * np.exp(-1j * (t * self.e_nodes + omega) / eps)
        weight = weight * c_limits
        if deriv_order:
            weight = weight * k_inf ** deriv_order
        phase = np.exp(-1j * np.outer(x_grid, k_inf) / eps)     # (Nx, N_E)
        out = (phase * weight[None, :]) @ phi_inf                # (Nx, d)
        tag = f"asymptotic{'+' if side > 0 else '-'}"
        return WaveField(t=t, x=x_grid, values=out, provenance=tag,
                         deriv_order=deriv_order)

    def momentum_norm(self, eps: float, side: int, j: int,
                      deriv_order: int = 0) -> float:
        """k-space L2 norm of the asymptotic wave on mode j.

        The free wave is sqrt(2 pi eps) times the rescaled Fourier transform
        of c Q phi exp(-i(omega + tE)/eps) k^l dE/dk expressed in k; by the
        isometry its x-norm equals sqrt(2 pi eps) times the k-norm, which is
        an ordinary window integral with density |c Q phi|^2 k^(2l) |dE/dk|.
        Time independent by construction (Plancherel).
        """
        inv = inverse_dispersion(self.model, j, side)
        c_limits = self.coefficient_limits(eps, side)[:, j - 1]
        qvals = self.density.q(self.e_nodes, eps)
        phi_norm = np.array([np.linalg.norm(dat.frame.polarization_limit(side)[j - 1])
                             for dat in self.datas])
        k_inf = np.array([dat.phases.k_limit(side)[j - 1] for dat in self.datas])
        amp = np.abs(c_limits * qvals) * phi_norm
        if deriv_order:
            amp = amp * np.abs(k_inf) ** deriv_order
        dEdk = np.abs(1.0 / inv.dk_dE(self.e_nodes))
        norm_sq = 2 * math.pi * eps * float(np.sum(self.e_weights * amp ** 2 * dEdk))
        return math.sqrt(norm_sq)


def glue_asymptotic(left: WaveField, right: WaveField) -> WaveField:
    """Blend the two one-sided free waves with a smoothstep on [0, 1]."""
    if left.t != right.t or len(left.x) != len(right.x) or \
            not np.allclose(left.x, right.x):
        raise SemiwaveError("glue requires identical grids and times")
    w = _smoothstep(left.x)[:, None]
    vals = w * right.values + (1.0 - w) * left.values
    return WaveField(t=left.t, x=left.x, values=vals, provenance="glued",
                     deriv_order=left.deriv_order)


# ---------------------------------------------------------------------------
# Transition profile: decay exponent, phase, Gaussian parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransitionProfile:
    """All scalars and evaluators entering the transmitted-wave leading term."""

    j: int
    n: int                         # pi(j)
    E_star: float
    k_star: float
    dE_dk: float                   # at k_star
    d2E_dk2: float
    lambda1: float
    lambda2: complex
    theta_star: complex
    alpha_spline: CubicSpline
    kappa_spline: CubicSpline
    inverse: InverseDispersion
    density: EnergyDensity
    polarization: np.ndarray       # phi_n(+inf, E*) in the transported gauge
    action_star: complex           # signed loop action at E*, Im > 0
    energies: np.ndarray
    alpha_values: np.ndarray
    kappa_values: np.ndarray

    def alpha(self, E):
        return self.alpha_spline(E)

    def kappa(self, E):
        return self.kappa_spline(E)

    def alpha_min(self) -> float:
        return float(self.alpha_spline(self.E_star))

    def gaussian_weight(self, k):
        """Lambda(k) = lambda2/2 (k-k*)^2 + i lambda1 (k-k*)."""
        dk = np.asarray(k) - self.k_star
        return 0.5 * self.lambda2 * dk ** 2 + 1j * self.lambda1 * dk


def _minimize_spline(spline: CubicSpline, lo: float, hi: float,
                     tol: float = 1e-10) -> float:
    """Golden-section bracketing followed by Newton on the derivative."""
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - gr * (b - a)
    d = a + gr * (b - a)
    fc, fd = spline(c), spline(d)
    for _ in range(200):
        if b - a < 1e-6 * (hi - lo):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = spline(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = spline(d)
    x = 0.5 * (a + b)
    dspl = spline.derivative()
    d2spl = dspl.derivative()
    for _ in range(60):
        g = dspl(x)
        h = d2spl(x)
        if h == 0:
            break
        step = g / h
        x_new = min(max(x - step, lo), hi)
        if abs(x_new - x) < tol:
            x = x_new
            break
        x = x_new
    return float(x)


def transition_profile(model: ModelSpec, density: EnergyDensity, j: int, *,
                       n_nodes: int = 21, crossing=None,
                       theta_frame=None) -> TransitionProfile:
    """Sample the loop action over the window and assemble the profile.

    alpha(E) = G(E) - Im(raw action), kappa(E) = J(E) + Re(raw action)
    + omega_n(+inf, E), the raw action being the loop integral of the
    continued incoming mode along the canonical loop (decaying sign
    enforced downstream).  E* minimizes alpha in the interior; the Gaussian
    parameters follow from the splines and the inverse dispersion at k*.
    """
    from .modes import refined_grid, track_modes
    from .frame import kato_transport, phase_functions

    if crossing is None:
        crossing = detect_real_crossings(model.with_delta(0.0), density.E0)
    pi = crossing.permutation_pi
    n = pi[j - 1]
    if n == j:
        raise SemiwaveError(f"mode {j} undergoes no transition")
    upward = n > j
    steps = list(range(j, n)) if upward else list(range(j, n, -1))

    lo, hi = density.window
    energies = np.linspace(lo, hi, n_nodes)
    raw_actions = np.zeros(n_nodes, dtype=complex)
    omegas = np.zeros(n_nodes)
    seeds: Dict[Tuple[int, int], complex] = {}
    for idx, E in enumerate(energies):
        E = float(E)
        grid = refined_grid(model, E, h_max=0.02, gap_factor=100.0)
        fld = track_modes(model, E, grid)
        ph = phase_functions(fld, model)
        omegas[idx] = ph.omega_right[n - 1]
        for l in steps:
            pair = (l, l + 1) if upward else (l - 1, l)
            seed = seeds.get(pair)
            if seed is None:
                seed = branch_point_seed(model, E, pair, fld)
            bp = locate_branch_point(model, E, pair, seed)
            if not upward:
                from dataclasses import replace as _replace
                bp = _replace(bp, z0=bp.z0.conjugate())
            seeds[pair] = bp.z0
            act = action_integral(model, E, bp, l)
            raw_actions[idx] += act.raw

    g_vals = np.real(expr.evaluate(density.G, {"E": energies}))
    j_vals = np.real(expr.evaluate(density.J, {"E": energies}))
    if np.ndim(g_vals) == 0:
        g_vals = np.full(n_nodes, float(g_vals))
    if np.ndim(j_vals) == 0:
        j_vals = np.full(n_nodes, float(j_vals))
    alpha_vals = g_vals - raw_actions.imag
    kappa_vals = j_vals + raw_actions.real + omegas
    alpha_spline = CubicSpline(energies, alpha_vals)
    kappa_spline = CubicSpline(energies, kappa_vals)

    E_star = _minimize_spline(alpha_spline, lo, hi)
    margin = (hi - lo) / (n_nodes - 1)
    if E_star - lo < 0.5 * margin or hi - E_star < 0.5 * margin:
        raise MinimizerAtBoundary(
            f"decay exponent minimized at E={E_star:.6g}, too close to the "
            f"window [{lo}, {hi}]"
        )
    alpha_pp = float(alpha_spline(E_star, 2))
    if alpha_pp <= 0:
        raise SemiwaveError("decay exponent curvature must be positive at E*")

    inv = inverse_dispersion(model, n, +1)
    k_star = float(inv._k_of_E(E_star))
    dEdk = float(inv.dE_dk(k_star))
    d2E = float(inv.d2E_dk2(k_star))
    kap_p = float(kappa_spline(E_star, 1))
    kap_pp = float(kappa_spline(E_star, 2))
    lam1 = dEdk * kap_p
    lam2 = dEdk ** 2 * alpha_pp + 1j * (kap_pp * dEdk ** 2 + kap_p * d2E)
    if lam2.real <= 0:
        raise SemiwaveError("Re lambda2 must be positive")

    # loop prefactor and polarization at E*
    grid = refined_grid(model, E_star, h_max=0.02, gap_factor=100.0)
    fld = track_modes(model, E_star, grid)
    fr = kato_transport(model, E_star, fld) if theta_frame is None else theta_frame
    theta_star = 0.0 + 0.0j
    for l in steps:
        pair = (l, l + 1) if upward else (l - 1, l)
        seed = seeds.get(pair) or branch_point_seed(model, E_star, pair, fld)
        bp = locate_branch_point(model, E_star, pair, seed)
        if not upward:
            from dataclasses import replace as _replace
            bp = _replace(bp, z0=bp.z0.conjugate())
        pref = loop_prefactor(model, E_star, bp, frame=fr)
        theta_star += complex(pref.theta[l - 1])
    pol = fr.polarization_limit(+1)[n - 1].copy()

    # interpolated raw action at E*, reported with the decaying sign
    raw_spline_re = CubicSpline(energies, raw_actions.real)
    raw_spline_im = CubicSpline(energies, raw_actions.imag)
    raw_star = complex(raw_spline_re(E_star) + 1j * raw_spline_im(E_star))
    action_star = -raw_star if raw_star.imag < 0 else raw_star

    return TransitionProfile(
        j=j, n=n, E_star=E_star, k_star=k_star, dE_dk=dEdk, d2E_dk2=d2E,
        lambda1=lam1, lambda2=lam2, theta_star=theta_star,
        alpha_spline=alpha_spline, kappa_spline=kappa_spline, inverse=inv,
        density=density, polarization=pol, action_star=action_star,
        energies=energies, alpha_values=alpha_vals, kappa_values=kappa_vals,
    )


def _leading_prefactor(profile: TransitionProfile, eps: float,
                       deriv_order: int) -> np.ndarray:
    dens = profile.density
    p_star = dens.p_value(profile.E_star, eps)
    alpha_star = profile.alpha_min()
    kappa_star = float(profile.kappa_spline(profile.E_star))
    # |dE/dk|: the momentum window is integrated as an increasing set, so a
    # decreasing asymptotic dispersion contributes its Jacobian modulus (the
    # signed derivative lives on in lambda1 and lambda2)
    scalar = (math.sqrt(2 * math.pi * eps) * p_star
              * math.exp(-alpha_star / eps)
              * cmath.exp(-1j * kappa_star / eps)
              * cmath.exp(-1j * profile.theta_star)
              * abs(profile.dE_dk))
    if deriv_order:
        scalar = scalar * profile.k_star ** deriv_order
    return scalar * profile.polarization


def leading_term(profile: TransitionProfile, eps: float, t: float,
                 x_grid: np.ndarray, deriv_order: int = 0,
                 n_k: Optional[int] = None, _converge_check: bool = False) -> WaveField:
    """Momentum-window quadrature of the Gaussian leading term."""
    k_lo, k_hi = profile.inverse.k_window
    x_grid = np.asarray(x_grid, dtype=float)
    if n_k is None:
        span = abs(profile.inverse.window[1] - profile.inverse.window[0])
        x_extent = float(np.max(np.abs(x_grid))) if len(x_grid) else 1.0
        phase = (abs(t) * span + x_extent * (k_hi - k_lo)) / eps
        n_k = int(min(max(96, math.ceil(0.75 * phase) + 16), 20000))
    ks, ws = segment_gauss(k_lo, k_hi, n_k)
    Es = profile.inverse.energy(ks)
    g = np.exp(-profile.gaussian_weight(ks) / eps) * ws
    phases = np.exp(-1j * (np.outer(x_grid, ks) + t * Es[None, :]) / eps)
    fourier = (phases @ g) / math.sqrt(2 * math.pi * eps)
    values = np.outer(fourier, _leading_prefactor(profile, eps, deriv_order))
    if _converge_check:
        ref = leading_term(profile, eps, t, x_grid, deriv_order, n_k=2 * n_k)
        delta = trapezoid_l2(values - ref.values, x_grid)
        denom = max(ref.l2_norm(), 1e-300)
        if delta / denom > 1e-7:
            raise QuadratureError(
                f"leading-term quadrature not converged: {delta/denom:.2e}"
            )
    return WaveField(t=t, x=x_grid, values=values, provenance="leading",
                     deriv_order=deriv_order)


def gaussian_closed_form(profile: TransitionProfile, eps: float, t: float,
                         x_grid: np.ndarray, deriv_order: int = 0) -> WaveField:
    """Closed-form freely spreading Gaussian; requires quadratic dispersion."""
    if not profile.inverse.is_quadratic:
        raise SemiwaveError(
            "closed form requires the quadratic-dispersion flag for the "
            f"target mode {profile.n} on the + side"
        )
    x_grid = np.asarray(x_grid, dtype=float)
    M = profile.lambda2 + 1j * profile.d2E_dk2 * t
    if M.real <= 0:
        raise SemiwaveError("Re(lambda2 + i d2E/dk2 t) must stay positive")
    N = profile.lambda1 + profile.dE_dk * t + x_grid
    carrier = np.exp(-1j * (profile.k_star * x_grid
                            + t * profile.inverse.energy(profile.k_star)) / eps)
    envelope = np.exp(-N ** 2 / (2 * eps * M)) / np.sqrt(M)
    values = np.outer(carrier * envelope, _leading_prefactor(profile, eps, deriv_order))
    return WaveField(t=t, x=x_grid, values=values, provenance="gaussian",
                     deriv_order=deriv_order)


# ---------------------------------------------------------------------------
# Localization diagnostics
# ---------------------------------------------------------------------------

def localization_report(field: WaveField, profile: TransitionProfile,
                        cfg: DiagnosticsConfig, eps: float) -> Dict[str, float]:
    """Mass fraction inside the moving window C_t and the center offset."""
    t = field.t
    if abs(t) < 1.0:
        raise SemiwaveError("localization report requires |t| >= 1")
    k_ball = np.linspace(profile.k_star - eps ** cfg.tau,
                         profile.k_star + eps ** cfg.tau, 33)
    k_lo, k_hi = profile.inverse.k_window
    k_ball = np.clip(k_ball, k_lo, k_hi)
    centers = np.array([-profile.inverse.dE_dk(k) * t for k in k_ball])
    lo = float(np.min(centers)) - abs(t) ** cfg.alpha_loc
    hi = float(np.max(centers)) + abs(t) ** cfg.alpha_loc
    if field.x[0] > lo or field.x[-1] < hi:
        raise SemiwaveError(
            f"field grid [{field.x[0]:.4g}, {field.x[-1]:.4g}] does not cover "
            f"the localization window [{lo:.4g}, {hi:.4g}]"
        )
    total = field.l2_norm() ** 2
    inside = field.restricted_mass(lo, hi)
    dens = np.abs(field.values) ** 2
    while dens.ndim > 1:
        dens = dens.sum(axis=-1)
    x_cm = float(np.trapezoid(dens * field.x, field.x)
                 / max(np.trapezoid(dens, field.x), 1e-300))
    target = -profile.dE_dk * t
    return {
        "fraction": inside / max(total, 1e-300),
        "window": (lo, hi),
        "center_of_mass": x_cm,
        "center_target": target,
        "center_offset": abs(x_cm - target),
        "center_bound": abs(t) ** cfg.alpha_loc,
    }


def cone_decay_check(samples: Sequence[Tuple[float, float, float]],
                     cfg: DiagnosticsConfig) -> Dict[str, object]:
    """Products |x| ||phi|| over an outside-cone (x, t, norm) sample set.

    Reports the products grouped by time and whether they grow under |x|
    doubling; purely diagnostic, assertions live with the caller.
    """
    by_t: Dict[float, List[Tuple[float, float]]] = {}
    for x, t, norm in samples:
        by_t.setdefault(float(t), []).append((float(x), float(norm)))
    report = {"products": {}, "non_increasing": True}
    for t, rows in by_t.items():
        rows.sort(key=lambda r: abs(r[0]))
        prods = [(abs(x), abs(x) * nv) for x, nv in rows]
        report["products"][t] = prods
        for (x1, p1), (x2, p2) in zip(prods, prods[1:]):
            if x2 >= 1.9 * x1 and p2 > p1 * 1.05:
                report["non_increasing"] = False
    return report
