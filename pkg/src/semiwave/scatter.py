"""Coefficient ODE, scattering matrix, contour actions, transition asymptotics.

The expansion coefficients c(x) of a stationary solution over the
transported frame obey dc/dx = M(x) c with
M_jl = a_jl(x) exp(i (I_j(x) - I_l(x)) / eps); the phases are evaluated from
the antiderivative tables, never re-integrated, so the integrator only has
to resolve the oscillation of the solution itself.  The scattering matrix
maps coefficient limits on the left to limits on the right.

The exponentially small off-diagonal elements predicted analytically come
from loop integrals of the modes around complex branch points together with
the frame monodromy factors; upward transitions (toward higher labels) use
negatively oriented loops in the upper half plane, downward ones positively
oriented loops around the conjugate points.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from .errors import NoConvergence, QuadratureError, SemiwaveError
from .frame import LoopPrefactor, loop_prefactor
from .modes import (
    BranchPoint, CrossingReport, canonical_loop, continue_along_path,
    detect_real_crossings,
)
from .numerics import gauss_legendre
from .stationary import EPSILON_FLOOR, StationaryData, TOL_PROFILES
from .symbol import ModelSpec

__all__ = [
    "CoefficientTrajectory", "ScatteringRecord", "ActionRecord", "WkbElement",
    "AvoidedCrossingFit", "integrate_coefficients", "s_matrix",
    "action_integral", "wkb_element", "avoided_crossing_fit", "decay_rate_fit",
]


# ---------------------------------------------------------------------------
# Coefficient ODE
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoefficientTrajectory:
    E: float
    eps: float
    x_eval: np.ndarray          # points where c was recorded (includes ends)
    c: np.ndarray               # (n_pts, md)
    c_left: np.ndarray          # (md,)
    c_right: np.ndarray         # (md,)
    tail_certificate: float     # bound on |c(+-X) - c(+-inf)|
    initial: np.ndarray

    @property
    def limits(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.c_left, self.c_right


def _ode_controls(data: StationaryData, eps: float, tol_profile: str):
    if eps < EPSILON_FLOOR:
        raise ValueError(
            f"eps={eps} below the resolvable floor {EPSILON_FLOOR}; the "
            "oscillation step rule would be violated"
        )
    rtol, atol, npp = TOL_PROFILES[tol_profile]
    spread = data.max_mode_spread()
    max_step = 2 * math.pi * eps / (max(spread, 1e-6) * npp)
    return rtol, atol, max_step


def _tail_certificate(data: StationaryData, sup_c: float) -> float:
    """|c(X) - c(inf)| <= int_X^inf ||M|| sup|c|, with the declared decay."""
    model = data.model
    X = model.truncation
    nu = model.decay_exponent
    grid = data.grid
    a_norm = np.abs(data.coupling.a).sum(axis=(1, 2))
    edge = np.abs(grid) > 0.85 * X
    C = float(np.max(a_norm[edge] * np.abs(grid[edge]) ** (2.0 + nu))) if edge.any() else 0.0
    return C / ((1.0 + nu) * X ** (1.0 + nu)) * sup_c


def integrate_coefficients(data: StationaryData, eps: float,
                           c_init: Sequence[complex],
                           x_eval: Optional[np.ndarray] = None,
                           tol_profile: str = "default") -> CoefficientTrajectory:
    """Integrate dc/dx = M c across the truncated line, left to right."""
    md = data.n_modes
    c0 = np.asarray(c_init, dtype=complex)
    if c0.shape != (md,):
        raise ValueError(f"initial coefficient vector must have length {md}")
    rtol, atol, max_step = _ode_controls(data, eps, tol_profile)
    grid = data.grid
    a_stack, anti = data.a_stack, data.anti_stack

    def rhs(x, y):
        a = a_stack(x).reshape(md, md)
        phase = np.exp(1j * anti(x) / eps)
        M = a * phase[:, None] / phase[None, :]
        return M @ y

    if x_eval is None:
        t_eval = np.array([grid[0], grid[-1]])
    else:
        t_eval = np.asarray(x_eval, dtype=float)
    sol = solve_ivp(rhs, (grid[0], grid[-1]), c0, method="DOP853",
                    t_eval=t_eval, rtol=rtol, atol=atol, max_step=max_step)
    if not sol.success:
        raise NoConvergence(f"coefficient integration failed: {sol.message}")
    c = sol.y.T
    sup_c = float(np.max(np.abs(c)))
    cert = _tail_certificate(data, sup_c)
    return CoefficientTrajectory(E=data.E, eps=eps, x_eval=sol.t, c=c,
                                 c_left=c0.copy(), c_right=c[-1].copy(),
                                 tail_certificate=cert, initial=c0.copy())


def integrate_coefficients_batch(datas: Sequence[StationaryData], eps: float,
                                 c_init: Sequence[complex],
                                 x_eval: Optional[np.ndarray] = None,
                                 tol_profile: str = "default") -> List[CoefficientTrajectory]:
    """One joint integration for many energies sharing a grid.

    The oscillatory stepping cost is paid once for the whole batch; the
    right-hand side stays a stacked Horner evaluation plus one batched
    matrix-vector product.
    """
    if not datas:
        return []
    md = datas[0].n_modes
    grid = datas[0].grid
    for d in datas:
        if len(d.grid) != len(grid) or d.n_modes != md:
            raise SemiwaveError("batched energies must share one grid")
    B = len(datas)
    rtol, atol, max_step = _ode_controls(datas[0], eps, tol_profile)
    a_coeffs = np.concatenate([d.a_stack.coeffs for d in datas], axis=0)
    anti_coeffs = np.stack([d.anti_stack.c for d in datas], axis=0)  # (B, md, 5, N-1)
    anchors = np.stack([d.anti_stack.anchor for d in datas], axis=0)
    x_breaks = grid

    c0 = np.asarray(c_init, dtype=complex)
    y0 = np.tile(c0, B)

    def rhs(x, y):
        idx = np.searchsorted(x_breaks, x, side="right") - 1
        idx = min(max(idx, 0), len(x_breaks) - 2)
        dx = x - x_breaks[idx]
        ac = a_coeffs[:, :, idx]
        a = (((ac[:, 0] * dx + ac[:, 1]) * dx + ac[:, 2]) * dx + ac[:, 3])
        a = a.reshape(B, md, md)
        ic = anti_coeffs[:, :, :, idx]
        I = ic[:, :, 0]
        for p in range(1, ic.shape[2]):
            I = I * dx + ic[:, :, p]
        I = I - anchors
        ph = np.exp(1j * I / eps)
        M = a * (ph[:, :, None] / ph[:, None, :])
        c = y.reshape(B, md)
        return np.einsum("bjl,bl->bj", M, c).ravel()

    if x_eval is None:
        t_eval = np.array([grid[0], grid[-1]])
    else:
        t_eval = np.asarray(x_eval, dtype=float)
    sol = solve_ivp(rhs, (grid[0], grid[-1]), y0, method="DOP853",
                    t_eval=t_eval, rtol=rtol, atol=atol, max_step=max_step)
    if not sol.success:
        raise NoConvergence(f"batched coefficient integration failed: {sol.message}")
    out = []
    ys = sol.y.T.reshape(len(sol.t), B, md)
    for b, d in enumerate(datas):
        c = ys[:, b, :]
        cert = _tail_certificate(d, float(np.max(np.abs(c))))
        out.append(CoefficientTrajectory(E=d.E, eps=eps, x_eval=sol.t, c=c,
                                         c_left=c0.copy(), c_right=c[-1].copy(),
                                         tail_certificate=cert, initial=c0.copy()))
    return out


# ---------------------------------------------------------------------------
# Scattering matrix
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScatteringRecord:
    E: float
    eps: float
    delta: float
    S: np.ndarray                    # (md, md)
    unitarity_defect: float
    tail_certificate: float


def s_matrix(data: StationaryData, eps: float,
             tol_profile: str = "default") -> ScatteringRecord:
    """Columns are the right limits of unit-initial-condition solutions."""
    md = data.n_modes
    rtol, atol, max_step = _ode_controls(data, eps, tol_profile)
    grid = data.grid
    a_stack, anti = data.a_stack, data.anti_stack

    def rhs(x, y):
        a = a_stack(x).reshape(md, md)
        phase = np.exp(1j * anti(x) / eps)
        M = a * phase[:, None] / phase[None, :]
        return (M @ y.reshape(md, md)).ravel()

    sol = solve_ivp(rhs, (grid[0], grid[-1]), np.eye(md, dtype=complex).ravel(),
                    method="DOP853", rtol=rtol, atol=atol, max_step=max_step)
    if not sol.success:
        raise NoConvergence(f"scattering integration failed: {sol.message}")
    S = sol.y[:, -1].reshape(md, md)
    defect = float(np.linalg.norm(S.conj().T @ S - np.eye(md), 2))
    cert = _tail_certificate(data, float(np.max(np.abs(S))))
    return ScatteringRecord(E=data.E, eps=eps, delta=data.model.delta, S=S,
                            unitarity_defect=defect, tail_certificate=cert)


# ---------------------------------------------------------------------------
# Contour action integrals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ActionRecord:
    pair: Tuple[int, int]
    z0: complex
    mode: int                        # 1-based label the single-mode integral follows
    raw: complex                     # loop integral of k_mode, canonical orientation
    adjusted: complex                # sign-fixed so Im > 0 (decaying convention)
    flipped: bool
    pair_diff: complex               # loop integral of (k_i - k_j)
    pair_sum: complex                # loop integral of (k_i + k_j)
    nodes: int


def action_integral(model: ModelSpec, E: float, bp: BranchPoint, mode: int,
                    *, basepoint: float = 0.0, tol: float = 1e-10,
                    n0: int = 24, max_n: int = 3072) -> ActionRecord:
    """Loop integrals of the continued modes around one branch point.

    Per-segment Gauss-Legendre quadrature with continuity-tracked values;
    the node count doubles until all three integrals settle below ``tol``.
    The sum integral of the pair is analytic inside the loop and must vanish.
    """
    segs = canonical_loop(bp.z0, bp.loop_radius, basepoint=basepoint)
    i_lab, j_lab = bp.pair
    md = model.n_modes
    prev = None
    n = n0
    while n <= max_n:
        integrals = np.zeros(md, dtype=complex)
        # walk the loop through every segment's GL nodes in order
        start_vals = None
        carry = None
        for seg in segs:
            t, w = gauss_legendre(n)
            t = 0.5 * (t + 1.0)
            w = 0.5 * w
            zs = seg.point(t)
            dzs = seg.dpoint(t)
            z_a = complex(seg.point(np.array(0.0)))
            z_b = complex(seg.point(np.array(1.0)))
            pts = np.concatenate([[z_a], zs, [z_b]])
            res = continue_along_path(model, E, pts, start=carry)
            carry = res.values
            if start_vals is None:
                start_vals = res.samples[0]
            vals = res.samples[1:-1]     # (n, md)
            integrals += np.einsum("t,tj,t->j", w, vals, dzs)
        cur = integrals
        if prev is not None and np.max(np.abs(cur - prev)) < tol:
            break
        prev = cur
        n *= 2
    else:
        raise QuadratureError("action integral did not converge under doubling")

    raw = complex(cur[mode - 1])
    pair_diff = complex(cur[i_lab - 1] - cur[j_lab - 1])
    pair_sum = complex(cur[i_lab - 1] + cur[j_lab - 1])
    flipped = raw.imag < 0
    adjusted = -raw if flipped else raw
    return ActionRecord(pair=bp.pair, z0=bp.z0, mode=mode, raw=raw,
                        adjusted=adjusted, flipped=flipped,
                        pair_diff=pair_diff, pair_sum=pair_sum, nodes=n)


# ---------------------------------------------------------------------------
# Asymptotic (WKB) scattering elements
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WkbElement:
    j: int
    target: int                      # pi(j)
    eps: float
    value: complex
    total_im_action: float
    total_theta: complex
    factors: Tuple[dict, ...]


def _mirror(bp: BranchPoint) -> BranchPoint:
    return replace(bp, z0=bp.z0.conjugate())


def wkb_element(model: ModelSpec, E: float, eps: float, j: int,
                crossing: CrossingReport,
                branch_points: Dict[Tuple[int, int], BranchPoint],
                frame=None,
                prefactors: Optional[Dict[Tuple[int, int], LoopPrefactor]] = None,
                actions: Optional[Dict[Tuple[int, int], ActionRecord]] = None) -> WkbElement:
    """Product formula for the element S_{pi(j), j}.

    One factor per intermediate avoided crossing: the analytic continuation
    identity gives c_{pi0(l)}(+inf) = exp(-i loop_int(k_l)/eps - i theta_l),
    with the loop around the upper-half-plane branch point (negatively
    oriented) for upward steps and around its conjugate (positively
    oriented) for downward steps.  ``prefactors``/``actions`` may cache the
    upward-loop computations keyed by pair; anything missing is computed,
    which requires ``frame`` for the loop transport.
    """
    pi = crossing.permutation_pi
    target = pi[j - 1]
    if target == j:
        raise SemiwaveError(f"mode {j} has no avoided-crossing transition")
    upward = target > j
    steps = range(j, target) if upward else range(j, target, -1)
    value = 1.0 + 0.0j
    total_im = 0.0
    total_theta = 0.0 + 0.0j
    parts = []
    for l in steps:
        pair = (l, l + 1) if upward else (l - 1, l)
        bp = branch_points.get(pair)
        if bp is None:
            raise SemiwaveError(f"missing branch point for pair {pair}")
        if not upward:
            bp = _mirror(bp)
        act = None
        if upward and actions is not None:
            cached = actions.get(pair)
            if cached is not None and cached.mode == l:
                act = cached
        if act is None:
            act = action_integral(model, E, bp, l)
        pref = prefactors.get(pair) if (upward and prefactors is not None) else None
        if pref is None:
            pref = loop_prefactor(model, E, bp, frame=frame)
        theta_l = complex(pref.theta[l - 1])
        factor = cmath.exp(-1j * (act.raw / eps) - 1j * theta_l)
        value *= factor
        total_im += -act.raw.imag        # decay rate contribution
        total_theta += theta_l
        parts.append({"pair": pair, "action": act.raw, "theta": theta_l,
                      "z0": bp.z0})
    return WkbElement(j=j, target=target, eps=eps, value=value,
                      total_im_action=total_im, total_theta=total_theta,
                      factors=tuple(parts))


# ---------------------------------------------------------------------------
# Avoided-crossing quadratic-form fit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AvoidedCrossingFit:
    pair: Tuple[int, int]
    x0: float
    a: float
    b: float
    c_coef: float
    D: float
    residual: float
    slope_consistency: float


def avoided_crossing_fit(model: ModelSpec, E0: float, pair: Tuple[int, int],
                         *, h: float = 2.5e-4, rel_tol: float = 1e-4,
                         max_shrink: int = 6) -> AvoidedCrossingFit:
    """Least-squares fit of the squared gap to a^2 u^2 + 2 c u d + b^2 d^2.

    Samples the tracked squared gap on a stencil in (u, delta); the cubic
    remainder forces h to shrink until the relative fit residual passes.
    D = (pi/4) (a^2 b^2 - c^2) / a^3 governs the small-delta decay rate.
    """
    report = detect_real_crossings(model.with_delta(0.0), E0)
    matches = [e for e in report.entries if e.pair == tuple(sorted(pair))]
    if not matches:
        raise SemiwaveError(f"no real crossing found for pair {pair}")
    x0 = matches[0].x
    slope0 = matches[0].slope
    i, j = pair[0] - 1, pair[1] - 1

    delta_base = min(max(model.delta / 2, 1e-3), 0.05)

    def gap2(u: float, dlt: float) -> float:
        m = model.with_delta(dlt)
        from .symbol import companion
        ev = np.sort(np.linalg.eigvals(companion(m, x0 + u, E0)).real)
        return float((ev[j] - ev[i]) ** 2)

    hh = h
    for _ in range(max_shrink):
        # the cubic remainder scales with the stencil, so u and delta samples
        # shrink together until the relative residual passes; pure powers of
        # delta beyond quadratic are absorbed by nuisance columns so they
        # cannot leak into the much smaller u^2 signal
        deltas = np.array([0.5, 1.0, 2.0]) * delta_base
        us = np.array([-2 * hh, -hh, 0.0, hh, 2 * hh])
        rows, rhs = [], []
        for u in us:
            for dlt in deltas:
                rows.append([u * u, 2 * u * dlt, dlt * dlt, dlt ** 3, dlt ** 4])
                rhs.append(gap2(u, dlt))
        A = np.asarray(rows)
        y = np.asarray(rhs)
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        resid = float(np.linalg.norm(A @ coef - y) / np.linalg.norm(y))
        if resid <= rel_tol:
            break
        hh *= 0.5
        delta_base *= 0.5
    else:
        raise NoConvergence("quadratic-form fit residual did not settle")
    a2, c_coef, b2 = float(coef[0]), float(coef[1]), float(coef[2])
    if a2 <= 0 or b2 <= 0 or a2 * b2 - c_coef ** 2 <= 0:
        raise SemiwaveError(
            f"quadratic form not positive (a^2={a2:.3e}, b^2={b2:.3e}, c={c_coef:.3e})"
        )
    a = math.sqrt(a2)
    b = math.sqrt(b2)
    D = math.pi / 4.0 * (a2 * b2 - c_coef ** 2) / a ** 3
    return AvoidedCrossingFit(pair=tuple(pair), x0=x0, a=a, b=b, c_coef=c_coef,
                              D=D, residual=resid,
                              slope_consistency=abs(a - slope0))


# ---------------------------------------------------------------------------
# Decay-rate extrapolation used by the acceptance sweep
# ---------------------------------------------------------------------------

def decay_rate_fit(eps_values: Sequence[float], amplitudes: Sequence[float]):
    """Extrapolate -eps ln|S| to eps -> 0 by a linear fit in eps.

    Returns (rate, slope): rate is the epsilon->0 intercept, the estimate of
    the decay exponent; slope absorbs the prefactor's logarithm.
    """
    eps_values = np.asarray(eps_values, dtype=float)
    y = -eps_values * np.log(np.asarray(amplitudes, dtype=float))
    A = np.stack([np.ones_like(eps_values), eps_values], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[0]), float(coef[1])
