"""Parallel-transported eigenvector frames, couplings, phases, loop factors.

The companion matrix H(x, E) is diagonalized along the grid and its
eigenvectors are fixed by the transport condition P_j dPhi_j/dx = 0: the
frame Phi_j(x) = W(x) Phi_j(0) where W solves dW/dx = sum_j (dP_j/dx) P_j W.
This removes all gauge freedom up to one constant per mode, makes the
coefficient ODE's diagonal vanish identically, and extends along complex
paths, where a closed loop around a branch point returns the frame up to a
permutation and the per-mode factors computed by loop_prefactor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.linalg import expm

from .errors import (
    GapTooSmall, NoConvergence, ParallelismResidual, RouteDiscrepancy,
    SemiwaveError, TailBoundExceeded,
)
from .modes import BranchPoint, ModeField, canonical_loop, loop_points
from .symbol import ModelSpec, companion, reduced_matrix
from . import numerics

__all__ = [
    "EigenFrame", "CouplingMatrix", "PhaseTable", "LoopPrefactor",
    "spectral_projectors", "kato_transport", "coupling_matrix",
    "phase_functions", "loop_prefactor", "canonical_polarization_direct",
]


# ---------------------------------------------------------------------------
# Projectors
# ---------------------------------------------------------------------------

def spectral_projectors(H: np.ndarray, eigenvalues: np.ndarray) -> np.ndarray:
    """Eigenprojectors via the product formula P_j = prod (H - k_l)/(k_j - k_l).

    Exact for diagonalizable H with simple spectrum; the minimum gap guards
    the conditioning.
    """
    H = np.asarray(H, dtype=complex)
    ev = np.asarray(eigenvalues, dtype=complex)
    md = H.shape[0]
    scale = max(1.0, float(np.max(np.abs(ev))))
    for i in range(md):
        for j in range(i + 1, md):
            if abs(ev[i] - ev[j]) < 1e-10 * scale:
                raise GapTooSmall(f"eigenvalue gap {abs(ev[i]-ev[j]):.2e} below tolerance")
    out = np.empty((md, md, md), dtype=complex)
    eye = np.eye(md, dtype=complex)
    for j in range(md):
        P = eye.copy()
        for l in range(md):
            if l == j:
                continue
            P = P @ (H - ev[l] * eye) / (ev[j] - ev[l])
        out[j] = P
    return out


def _stacked_frames(model: ModelSpec, E: float, grid: np.ndarray,
                    labels: np.ndarray):
    """Right/left eigenvector stacks matched to the given eigenvalue labels.

    labels: (N, md) eigenvalues ordered by branch label.  Returns
    (right, left) of shape (N, md, md) with vectors as rows; the left rows
    are the bilinear duals (rows of the inverse eigenvector matrix), so
    v_j^T r_l = delta_jl exactly.
    """
    H = companion(model, grid, E)
    w, vec = np.linalg.eig(H)
    N, md = labels.shape
    order = np.argmin(np.abs(w[:, None, :] - labels[:, :, None].astype(complex)), axis=2)
    if not np.all(np.sort(order, axis=1) == np.arange(md)[None, :]):
        raise SemiwaveError("eigenvalue matching collision while building frames")
    cols = np.take_along_axis(vec, order[:, None, :], axis=2)
    left = np.linalg.inv(cols)          # rows are the duals
    right = cols.transpose(0, 2, 1)     # rows are the eigenvectors
    return right, left


def _projector_stack(right: np.ndarray, left: np.ndarray) -> np.ndarray:
    """P[n, j] = |r_j><v_j| with v the bilinear dual (already normalized)."""
    return np.einsum("nja,njb->njab", right, left)


def _generator_table(model: ModelSpec, E: float, field: ModeField) -> np.ndarray:
    """G(x) = sum_j (dP_j/dx) P_j on the grid, dP by 5-point central stencils.

    The stencil step is tied to the local grid spacing, which the tracking
    refinement has already bounded by the local gap.
    """
    grid, labels = field.grid, field.values
    N, md = labels.shape
    spacing = np.empty(N)
    spacing[:-1] = np.diff(grid)
    spacing[-1] = spacing[-2]
    spacing[1:] = np.minimum(spacing[1:], np.diff(grid))
    h = np.clip(0.25 * spacing, 1e-7, 1e-3)

    right0, left0 = _stacked_frames(model, E, grid, labels)
    P0 = _projector_stack(right0, left0)

    stencil_P = []
    for shift in (-2, -1, 1, 2):
        pts = grid + shift * h
        # labels at the shifted points: nearest continuation of the node labels
        w = np.linalg.eigvals(companion(model, pts, E))
        order = np.argmin(np.abs(w[:, None, :] - labels[:, :, None].astype(complex)), axis=2)
        if not np.all(np.sort(order, axis=1) == np.arange(md)[None, :]):
            raise SemiwaveError("stencil eigenvalue matching collision")
        lab = np.take_along_axis(w, order, axis=1).real
        r, l = _stacked_frames(model, E, pts, lab)
        stencil_P.append(_projector_stack(r, l))
    Pm2, Pm1, Pp1, Pp2 = stencil_P
    dP = (Pm2 - 8 * Pm1 + 8 * Pp1 - Pp2) / (12 * h)[:, None, None, None]
    G = np.einsum("njab,njbc->nac", dP, P0)
    return G


@dataclass(frozen=True)
class EigenFrame:
    """Kato-transported companion eigenvectors and their duals on the grid."""

    E: float
    grid: np.ndarray
    mode_values: np.ndarray      # (N, md)
    phi: np.ndarray              # (N, md, md): Phi_j(x_i) = phi[i, j]
    duals: np.ndarray            # (N, md, md): bilinear duals of H, v^T r = 1
    generator: np.ndarray        # (N, md, md): sum_j (dP_j) P_j
    phi_base: np.ndarray         # (md, md): Phi_j(0)
    base_index: int
    transport_residual: float
    intertwining_residual: float
    d: int                       # polarization block size

    @property
    def n_modes(self) -> int:
        return self.phi.shape[1]

    def polarization(self) -> np.ndarray:
        """Canonical polarization vectors: first d components of Phi_j."""
        return self.phi[:, :, : self.d]

    def polarization_limit(self, side: int) -> np.ndarray:
        idx = -1 if side > 0 else 0
        return self.phi[idx, :, : self.d]


def _gauge_fix(vectors: np.ndarray) -> np.ndarray:
    """Deterministic gauge: unit norm, fixed-weight projection real positive.

    The phase reference is a weighted component sum rather than the largest
    component: at symmetric points different components can tie in modulus
    and a pivoting rule would flip signs erratically under parameter sweeps.
    """
    out = vectors.copy()
    md = out.shape[1]
    weights = [1.0 / np.arange(1, md + 1),
               (-1.0) ** np.arange(md) / np.sqrt(np.arange(2, md + 2))]
    for j in range(out.shape[0]):
        v = out[j] / np.linalg.norm(out[j])
        for w in weights:
            s = w @ v
            if abs(s) > 0.05:
                break
        else:
            pivot = np.argmax(np.abs(v))
            s = v[pivot]
        out[j] = v * (np.conj(s) / abs(s))
    return out


def kato_transport(model: ModelSpec, E: float, field: ModeField,
                   rtol: float = 1e-10, atol: float = 1e-12) -> EigenFrame:
    """Integrate the transport equation and return the frame on the grid."""
    grid = field.grid
    if not np.any(np.isclose(grid, 0.0, atol=1e-12)):
        raise SemiwaveError("frame grid must contain the basepoint x = 0")
    i0 = int(np.argmin(np.abs(grid)))
    md = field.n_modes

    G = _generator_table(model, E, field)
    gstack = numerics.SplineStack(grid, [G[:, a, b] for a in range(md) for b in range(md)])

    def rhs(x, y):
        g = gstack(x).reshape(md, md)
        W = y.reshape(md, md)
        return (g @ W).ravel()

    W = np.empty((len(grid), md, md), dtype=complex)
    W[i0] = np.eye(md)
    directions = [(slice(i0 + 1, None), (grid[i0], grid[-1]))]
    if i0 > 0:
        directions.append((slice(i0 - 1, None, -1), (grid[i0], grid[0])))
    for sl, span in directions:
        t_eval = grid[sl]
        if len(t_eval) == 0:
            continue
        sol = solve_ivp(rhs, span, np.eye(md, dtype=complex).ravel(),
                        t_eval=t_eval, method="DOP853", rtol=rtol, atol=atol)
        if not sol.success:
            raise NoConvergence(f"transport integration failed: {sol.message}")
        W[sl] = sol.y.T.reshape(len(t_eval), md, md)

    right0, left0 = _stacked_frames(model, E, grid, field.values)
    phi_base = _gauge_fix(right0[i0])
    phi = np.einsum("nab,jb->nja", W, phi_base)
    # duals scaled against the transported frame: v_j^T Phi_j = 1
    duals = left0.copy()
    scale = np.einsum("nja,nja->nj", duals, phi)
    duals = duals / scale[:, :, None]

    # residuals: Kato condition P_j dPhi_j = 0 via the generator identity
    P = _projector_stack(right0, left0)
    dphi = np.einsum("nab,njb->nja", G, phi)
    kato_res = 0.0
    inter_res = 0.0
    for j in range(md):
        proj = np.einsum("nab,nb->na", P[:, j], dphi[:, j])
        kato_res = max(kato_res, float(np.max(np.abs(proj)) / max(np.max(np.abs(phi[:, j])), 1e-300)))
    # intertwining at a few probe nodes
    probes = np.linspace(0, len(grid) - 1, min(9, len(grid))).astype(int)
    for n in probes:
        for j in range(md):
            r = W[n] @ P[i0, j] - P[n, j] @ W[n]
            inter_res = max(inter_res, float(np.max(np.abs(r))))
    return EigenFrame(E=E, grid=grid, mode_values=field.values, phi=phi,
                      duals=duals, generator=G, phi_base=phi_base, base_index=i0,
                      transport_residual=kato_res, intertwining_residual=inter_res,
                      d=model.d)


# ---------------------------------------------------------------------------
# Coupling coefficients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CouplingMatrix:
    """Off-diagonal transition couplings a_jl(x) and the phase data."""

    E: float
    grid: np.ndarray
    a: np.ndarray                # (N, md, md), zero diagonal
    route_discrepancy: float     # max relative disagreement of the two routes

    @property
    def n_modes(self) -> int:
        return self.a.shape[1]


def _poly_matrices(model: ModelSpec, E: float, grid: np.ndarray):
    return [reduced_matrix(model, grid, E, l) for l in range(model.m + 1)]


def _eval_symbol_stack(N_l: List[np.ndarray], k: np.ndarray, order: int = 0):
    """R (order 0) or its k-derivatives evaluated at per-node k values."""
    m = len(N_l) - 1
    out = None
    for l in range(m, order - 1, -1):
        coeff = 1.0
        if order == 1:
            coeff = l
        elif order == 2:
            coeff = l * (l - 1)
        term = coeff * N_l[l]
        out = term if out is None else out * k[:, None, None] + term
    if out is None:
        out = np.zeros_like(N_l[0])
    return out


def _null_vectors_transpose(R: np.ndarray) -> np.ndarray:
    """Smallest right singular vectors of R^T: the bilinear duals of ker R."""
    _, _, vh = np.linalg.svd(np.swapaxes(R, -1, -2))
    return np.conj(vh[..., -1, :])


def coupling_matrix(frame: EigenFrame, model: ModelSpec, E: float,
                    tol: float = 1e-5) -> CouplingMatrix:
    """Couplings by the transport route, cross-checked against the symbol route.

    Route 1:  a_jl = - <Phi_j^dual, dPhi_l/dx> / <Phi_j^dual, Phi_j>, with
    dPhi_l = G Phi_l exact along the transported frame.
    Route 2:  the explicit formula in terms of the polarization vectors, the
    symbol and its k-derivatives, and dk_l/dx.
    """
    grid = frame.grid
    md = frame.n_modes
    d = frame.d
    dphi = np.einsum("nab,njb->nja", frame.generator, frame.phi)
    denom = np.einsum("nja,nja->nj", frame.duals, frame.phi)
    a1 = -np.einsum("nja,nla->njl", frame.duals, dphi) / denom[:, :, None]
    for j in range(md):
        a1[:, j, j] = 0.0

    # symbol route, with its own derivative discretization (splined phi)
    N_l = _poly_matrices(model, E, grid)
    k = frame.mode_values
    phi = frame.phi[:, :, :d]
    dphi_small = np.empty_like(phi)
    for j in range(md):
        for c in range(d):
            dphi_small[:, j, c] = CubicSpline(grid, phi[:, j, c])(grid, 1)
    kspl = [CubicSpline(grid, k[:, j]) for j in range(md)]
    dk = np.stack([s(grid, 1) for s in kspl], axis=1)
    R_at = [_eval_symbol_stack(N_l, k[:, l], 0) for l in range(md)]
    dR_at = [_eval_symbol_stack(N_l, k[:, l], 1) for l in range(md)]
    duals_small = np.empty((len(grid), md, d), dtype=complex)
    for j in range(md):
        duals_small[:, j] = _null_vectors_transpose(R_at[j])

    # dk/dx term: the stacked-eigenvector algebra gives the polynomial
    # coefficient sum_p (p-1) k_j^{q-p} k_l^{p-2} = d/dk_l of the divided
    # difference, i.e. dR/dk(k_l) + R(k_l)/(k_j - k_l) after killing R(k_j)
    # against the left kernel vector.
    a2 = np.zeros_like(a1)
    for j in range(md):
        denom2 = np.einsum("na,nab,nb->n", duals_small[:, j], dR_at[j], phi[:, j])
        for l in range(md):
            if l == j:
                continue
            gap = k[:, j] - k[:, l]
            t1 = np.einsum("na,nab,nb->n", duals_small[:, j], R_at[l], dphi_small[:, l])
            t2 = dk[:, l] * (
                np.einsum("na,nab,nb->n", duals_small[:, j], dR_at[l], phi[:, l])
                + np.einsum("na,nab,nb->n", duals_small[:, j], R_at[l], phi[:, l]) / gap
            )
            a2[:, j, l] = (t1 + t2) / (gap * denom2)

    # relative comparison, regularized at the discretization noise floor: the
    # routes use independent derivative discretizations whose absolute noise
    # (~1e-10 amax) dominates wherever the coupling itself has decayed below
    # ~1e-4 amax, so the comparison degrades to an absolute one there
    amax = float(np.max(np.abs(a1)))
    mask = np.abs(a1) > 1e-12
    disc = 0.0
    if np.any(mask) and amax > 0:
        floor = 1e-4 * amax
        disc = float(np.max(np.abs(a1 - a2)[mask] / (np.abs(a1)[mask] + floor)))
    if disc > tol:
        raise RouteDiscrepancy(
            f"coupling routes disagree by {disc:.3e} (tolerance {tol:g})"
        )
    return CouplingMatrix(E=E, grid=grid, a=a1, route_discrepancy=disc)


# ---------------------------------------------------------------------------
# Phases
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseTable:
    """Antiderivatives of the modes and asymptotic phase data.

    I_j(x) = int_0^x k_j; Delta_jl(x) = I_j(x) - I_l(x); omega_j(side) is the
    centered tail integral with certified truncation error.
    """

    E: float
    grid: np.ndarray
    mode_splines: tuple
    antiderivatives: tuple
    anchor: np.ndarray           # I_j at x=0 offsets, shape (md,)
    k_left: np.ndarray
    k_right: np.ndarray
    omega_left: np.ndarray
    omega_right: np.ndarray
    tail_certificates: np.ndarray  # (md, 2): bound on the omega tails

    @property
    def n_modes(self) -> int:
        return len(self.anchor)

    def integral(self, x, j: int):
        """I_j(x) = int_0^x k_j(u) du."""
        return self.antiderivatives[j](x) - self.anchor[j]

    def delta(self, x, j: int, l: int):
        return self.integral(x, j) - self.integral(x, l)

    def k_limit(self, side: int) -> np.ndarray:
        return self.k_right if side > 0 else self.k_left

    def omega(self, side: int) -> np.ndarray:
        return self.omega_right if side > 0 else self.omega_left

    def remainder(self, x, j: int, side: int):
        """r_j(x) = I_j(x) - x k_j(side inf) - omega_j(side inf)."""
        k_inf = self.k_limit(side)[j]
        return self.integral(x, j) - x * k_inf - self.omega(side)[j]


def phase_functions(field: ModeField, model: ModelSpec,
                    tail_rel_tol: float = 1e-10) -> PhaseTable:
    grid, vals = field.grid, field.values
    md = field.n_modes
    X = model.truncation
    nu = model.decay_exponent
    splines = tuple(CubicSpline(grid, vals[:, j]) for j in range(md))
    antis = tuple(s.antiderivative() for s in splines)
    anchor = np.array([a(0.0) for a in antis])

    omega_l = np.empty(md)
    omega_r = np.empty(md)
    certs = np.empty((md, 2))
    for j in range(md):
        k_l, k_r = field.asymptotic_left[j], field.asymptotic_right[j]
        I = lambda x: antis[j](x) - anchor[j]
        omega_r[j] = I(grid[-1]) - grid[-1] * k_r
        omega_l[j] = I(grid[0]) - grid[0] * k_l
        for side, (edge, k_inf) in enumerate(((grid[0], k_l), (grid[-1], k_r))):
            xs = np.linspace(0.85 * edge, edge, 9)
            decay = np.abs(splines[j](xs) - k_inf) * np.abs(xs) ** (2.0 + nu)
            C = float(np.max(decay))
            certs[j, side] = C / ((1.0 + nu) * abs(edge) ** (1.0 + nu))
    for j in range(md):
        bound = tail_rel_tol * max(abs(omega_l[j]), abs(omega_r[j]), 0.1)
        if certs[j].max() > bound:
            raise TailBoundExceeded(
                f"omega tail certificate {certs[j].max():.3e} exceeds {bound:.3e} "
                f"for mode {j + 1}; increase the truncation radius"
            )
    return PhaseTable(E=field.E, grid=grid, mode_splines=splines,
                      antiderivatives=antis, anchor=anchor,
                      k_left=field.asymptotic_left.copy(),
                      k_right=field.asymptotic_right.copy(),
                      omega_left=omega_l, omega_right=omega_r,
                      tail_certificates=certs)


# ---------------------------------------------------------------------------
# Loop monodromy prefactors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LoopPrefactor:
    theta: np.ndarray            # (md,) complex, exp(-i theta_j) = sigma_j
    permutation: Tuple[int, ...]
    residual: float
    radius: float


def _transport_along(model: ModelSpec, E: float, pts: np.ndarray,
                     start_labels: np.ndarray):
    """Kato transport along a polyline: returns (W_end, eigenvalue samples)."""
    md = len(start_labels)
    H = companion(model, pts, E)
    w_r, vec_r = np.linalg.eig(H)
    n = len(pts)
    values = np.empty((n, md), dtype=complex)
    P = np.empty((n, md, md, md), dtype=complex)
    prev = start_labels.astype(complex)
    for i in range(n):
        order = _nearest_order(prev, w_r[i])
        values[i] = w_r[i][order]
        r_cols = vec_r[i][:, order]
        l = np.linalg.inv(r_cols)        # rows: bilinear duals
        P[i] = np.einsum("aj,jb->jab", r_cols, l)
        prev = values[i]
    W = np.eye(md, dtype=complex)
    eye = np.eye(md, dtype=complex)
    for i in range(n - 1):
        dP = P[i + 1] - P[i]
        Pmid = 0.5 * (P[i + 1] + P[i])
        gen = np.einsum("jab,jbc->ac", dP, Pmid)
        if np.max(np.abs(gen)) > 0.2:
            step = expm(gen)
        else:
            # sixth-order Taylor; the generator per step is small by design
            step = eye.copy()
            term = eye
            for order in range(1, 7):
                term = term @ gen / order
                step = step + term
        W = step @ W
    return W, values


def _nearest_order(prev: np.ndarray, new: np.ndarray) -> np.ndarray:
    order = np.argmin(np.abs(new[None, :] - prev[:, None]), axis=1)
    if len(set(order.tolist())) != len(prev):
        raise SemiwaveError("eigenvalue matching collision during loop transport")
    return order


def _theta_gap(t1: np.ndarray, t2: np.ndarray) -> float:
    """Distance between theta vectors modulo the 2 pi branch of the log."""
    d = np.asarray(t1) - np.asarray(t2)
    re = (d.real + np.pi) % (2 * np.pi) - np.pi
    return float(np.max(np.hypot(re, d.imag)))


def loop_prefactor(model: ModelSpec, E: float, bp: BranchPoint,
                   frame: Optional[EigenFrame] = None, basepoint: float = 0.0,
                   radius: Optional[float] = None, n_base: int = 220,
                   tol: float = 1e-6) -> LoopPrefactor:
    """Continue the frame around the canonical loop and read off the factors.

    Each transported Phi_j must return parallel to Phi_{pi0(j)}; theta_j is
    i log of the proportionality scalar (principal branch).  Consistency is
    enforced under step doubling and against a shrunken loop radius.
    """
    if radius is None:
        radius = bp.loop_radius
    if frame is None:
        raise ValueError("loop_prefactor requires the transported frame at the basepoint")

    def run(rad: float, n: int):
        segs = canonical_loop(bp.z0, rad, basepoint=basepoint)
        pts = loop_points(segs, n)
        start = np.sort(np.linalg.eigvals(companion(model, basepoint, E)).real)
        W, values = _transport_along(model, E, pts, start)
        # permutation from the eigenvalue continuation
        perm = []
        for j in range(len(start)):
            tgt = int(np.argmin(np.abs(start - values[-1][j].real)))
            perm.append(tgt + 1)
        if sorted(perm) != list(range(1, len(start) + 1)):
            raise SemiwaveError("loop continuation did not return a permutation")
        return W, tuple(perm)

    md = model.n_modes
    prev_theta = None
    n = n_base
    for _ in range(7):
        W, perm = run(radius, n)
        phi0 = frame.phi_base
        theta = np.empty(md, dtype=complex)
        resid = 0.0
        for j in range(md):
            transported = W @ phi0[j]
            target = phi0[perm[j] - 1]
            sigma = (np.vdot(target, transported)) / (np.vdot(target, target))
            resid = max(resid, float(np.linalg.norm(transported - sigma * target)
                                     / np.linalg.norm(transported)))
            theta[j] = 1j * np.log(sigma)
        if resid > 1e-6:
            n *= 2
            prev_theta = None
            continue
        if prev_theta is not None and _theta_gap(theta, prev_theta) < 0.1 * tol:
            break
        prev_theta = theta
        n *= 2
    else:
        raise NoConvergence("loop prefactor did not converge under step doubling")
    if resid > 1e-6:
        raise ParallelismResidual(f"transported frame residual {resid:.3e}")

    # radius-consistency check
    W2, perm2 = run(0.8 * radius, n)
    if perm2 != perm:
        raise SemiwaveError("loop permutation changed with radius")
    theta2 = np.empty(md, dtype=complex)
    for j in range(md):
        transported = W2 @ frame.phi_base[j]
        target = frame.phi_base[perm[j] - 1]
        sigma = np.vdot(target, transported) / np.vdot(target, target)
        theta2[j] = 1j * np.log(sigma)
    if _theta_gap(theta2, theta) > tol:
        raise SemiwaveError(
            f"theta changed by {_theta_gap(theta2, theta):.3e} between radii"
        )
    return LoopPrefactor(theta=theta, permutation=perm, residual=resid, radius=radius)


# ---------------------------------------------------------------------------
# Canonical polarization by the direct normalization integral
# ---------------------------------------------------------------------------

def canonical_polarization_direct(model: ModelSpec, E: float, field: ModeField,
                                  j: int) -> np.ndarray:
    """Second route to phi_j: alpha_j(x) xi_j(x) with the normalization integral.

    xi_j is a smooth (phase-aligned) kernel family of R(x, E, k_j(x)); the
    scalar alpha solves d log alpha = -(<xi+, dR/dk dxi> + (dk/2) <xi+, d2R/dk2 xi>)
    / <xi+, dR/dk xi>.  Used as an independent cross-check of the transported
    frame; both are normalized to coincide at x = 0.
    """
    grid, vals = field.grid, field.values
    md = field.n_modes
    jj = j - 1
    N_l = _poly_matrices(model, E, grid)
    k = vals[:, jj]
    R = _eval_symbol_stack(N_l, k, 0)
    dR = _eval_symbol_stack(N_l, k, 1)
    d2R = _eval_symbol_stack(N_l, k, 2)
    # smooth kernel family: smallest right singular vector, phase-aligned
    _, _, vh = np.linalg.svd(R)
    xi = np.conj(vh[:, -1, :])
    for i in range(1, len(grid)):
        c = np.vdot(xi[i - 1], xi[i])
        xi[i] *= np.conj(c) / abs(c)
    xi_dual = _null_vectors_transpose(R)

    xi_spl = [CubicSpline(grid, xi[:, c]) for c in range(model.d)]
    dxi = np.stack([s(grid, 1) for s in xi_spl], axis=1)
    kspl = CubicSpline(grid, k)
    dk = kspl(grid, 1)

    num = (np.einsum("na,nab,nb->n", xi_dual, dR, dxi)
           + 0.5 * dk * np.einsum("na,nab,nb->n", xi_dual, d2R, xi))
    den = np.einsum("na,nab,nb->n", xi_dual, dR, xi)
    f = num / den
    F = CubicSpline(grid, f).antiderivative()
    log_alpha = -(F(grid) - F(0.0))
    alpha = np.exp(log_alpha)
    return alpha[:, None] * xi
