"""Dispersion branches: real-axis tracking, crossings, complex branch points.

Labels are assigned in ascending order at the left edge of the grid and
propagated by a minimal-total-distance assignment between consecutive
nodes.  Off the real axis sorting is meaningless, so continuation along a
path uses the same nearest-matching engine; a square-root branch point
encircled once then shows up as a transposition of the two labels involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment, minimize_scalar

from .errors import (
    AmbiguousLabeling, CollapsedToRealAxis, LeftStrip, MatchingAmbiguity,
    NoConvergence, NonRealMode, SemiwaveError, TangentialCrossing,
)
from .symbol import ModelSpec, companion, companion_limit

__all__ = [
    "ModeField", "CrossingReport", "BranchPoint", "ContinuationResult",
    "default_grid", "refined_grid", "variation_grid", "track_modes", "asymptotic_modes",
    "detect_real_crossings", "branch_point_seed", "locate_branch_point",
    "continue_along_path", "canonical_loop", "loop_points",
]

_IM_TOL = 1e-8
_ASSIGN_TIE = 1e-10


# ---------------------------------------------------------------------------
# Data containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModeField:
    """Labelled real dispersion branches k_j(x, E) on a grid."""

    E: float
    delta: float
    grid: np.ndarray          # (N,)
    values: np.ndarray        # (N, md) real, column j = branch with label j+1
    asymptotic_left: np.ndarray   # (md,) ordered by label
    asymptotic_right: np.ndarray  # (md,) ordered by label
    permutation_pi: Tuple[int, ...]  # 1-based: label j -> ascending rank at +inf

    @property
    def n_modes(self) -> int:
        return self.values.shape[1]

    def min_gap(self) -> float:
        gaps = np.diff(np.sort(self.values, axis=1), axis=1)
        return float(gaps.min())


@dataclass(frozen=True)
class CrossingEntry:
    x: float
    pair: Tuple[int, int]   # 1-based labels (i, j), i < j
    slope: float            # symmetric-fit slope of the gap, > 0 for generic


@dataclass(frozen=True)
class CrossingReport:
    E: float
    entries: Tuple[CrossingEntry, ...]
    permutation_pi: Tuple[int, ...]  # 1-based, from the swap sequence
    ac_satisfied: bool
    messages: Tuple[str, ...] = ()

    @property
    def count(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class BranchPoint:
    pair: Tuple[int, int]    # 1-based labels
    z0: complex
    loop_radius: float
    s_residual: float
    s_prime: complex


@dataclass(frozen=True)
class ContinuationResult:
    values: np.ndarray                 # (md,) end values ordered by start label
    permutation: Optional[Tuple[int, ...]]  # 1-based, closed paths only
    samples: Optional[np.ndarray] = None    # (n_pts, md) values at requested points


# ---------------------------------------------------------------------------
# Matching engine
# ---------------------------------------------------------------------------

def _match(prev: np.ndarray, new: np.ndarray,
           lenient: Optional[Tuple[int, int]] = None) -> np.ndarray:
    """Return new values reordered to follow the labels of ``prev``.

    Raises AmbiguousLabeling when the optimal and runner-up assignments are
    closer than the tie threshold, unless the ambiguity is confined to the
    ``lenient`` index pair (used while homing in on a branch point, where the
    tracked pair is symmetric in the objective).
    """
    md = len(prev)
    cost = np.abs(prev[:, None] - new[None, :])
    rows, cols = linear_sum_assignment(cost)
    best = cost[rows, cols].sum()
    order = np.empty(md, dtype=int)
    order[rows] = cols

    # cheap uniqueness guard: healthy separation means no runner-up nearby
    if md > 1:
        pair_d = np.abs(new[:, None] - new[None, :]) + np.diag(np.full(md, np.inf))
        mingap = float(pair_d.min())
        movement = float(np.max(cost[rows, cols]))
        if mingap > 4.0 * movement + 1e-9:
            return new[order]
        # full runner-up computation
        second = np.inf
        alt_order = None
        for k in range(md):
            c2 = cost.copy()
            c2[k, order[k]] = np.inf
            try:
                r2, col2 = linear_sum_assignment(c2)
            except ValueError:
                continue
            total = c2[r2, col2].sum()
            if total < second:
                second = total
                o2 = np.empty(md, dtype=int)
                o2[r2] = col2
                alt_order = o2
        if second - best < _ASSIGN_TIE and alt_order is not None:
            moved = {i for i in range(md) if alt_order[i] != order[i]}
            allowed = set() if lenient is None else set(lenient)
            # harmless ties: the alternative assigns numerically identical
            # values (a collapsing cluster), or the ambiguity stays within
            # the tracked pair, or it concerns only spectator modes while a
            # pair is being driven into its branch point
            scale = 1.0 + float(np.max(np.abs(new)))
            coincide = all(
                abs(new[order[i]] - new[alt_order[i]]) <= 1e-5 * scale
                for i in moved
            )
            spectators_only = bool(allowed) and not (moved & allowed)
            if not (moved.issubset(allowed) or spectators_only or coincide):
                raise MatchingAmbiguity(
                    f"label assignment tie (best {best:.3e}, runner-up {second:.3e})"
                )
    return new[order]


def _eigvals(model: ModelSpec, z, E: float) -> np.ndarray:
    return np.linalg.eigvals(companion(model, z, E))


# ---------------------------------------------------------------------------
# Real-axis tracking
# ---------------------------------------------------------------------------

def default_grid(model: ModelSpec, n_min: int = 801) -> np.ndarray:
    X = model.truncation
    n = max(n_min, int(math.ceil(2 * X / 0.05)) + 1)
    return np.linspace(-X, X, n)


def variation_grid(model: ModelSpec, E: float, *, h_max: float = 0.04,
                   h_min: float = 5e-4, points_per_width: float = 40.0) -> np.ndarray:
    """Grid whose density follows the local variation width of the modes.

    The eigenvector rotation at an avoided crossing happens over a window of
    width roughly gap/|d gap/dx|; away from crossings the coefficients vary
    on the O(1) scale of the model and the cap h_max rules.  Cheaper than
    the gap-based rule for energy sweeps, at spline accuracy still well
    beyond the coefficient-ODE tolerances.
    """
    X = model.truncation
    coarse = track_modes(model, E, np.linspace(-X, X, max(401, int(X / 0.05) | 1)))
    md = coarse.values.shape[1]
    if md == 1:
        return refined_grid(model, E, h_max=h_max, h_min=h_min, gap_factor=40.0)
    gaps = np.diff(np.sort(coarse.values, axis=1), axis=1)
    mingap = gaps.min(axis=1)
    slope = np.abs(np.gradient(mingap, coarse.grid))
    # the slope vanishes at the gap minimum itself; use the neighborhood max
    # so the width estimate reflects how fast the gap opens nearby
    from scipy.ndimage import maximum_filter1d
    h0 = float(np.median(np.diff(coarse.grid)))
    radius = max(1, int(round(1.0 / h0)))
    slope_eff = maximum_filter1d(slope, size=2 * radius + 1, mode="nearest")
    width = np.clip(mingap / np.maximum(slope_eff, mingap / 5.0), None, 5.0)
    target = np.clip(width / points_per_width, h_min, h_max)
    pieces = [np.array([-X])]
    for i in range(len(coarse.grid) - 1):
        a, b = coarse.grid[i], coarse.grid[i + 1]
        h = min(target[i], target[i + 1])
        n = max(1, int(math.ceil((b - a) / h)))
        pieces.append(np.linspace(a, b, n + 1)[1:])
    grid = np.concatenate(pieces)
    if not np.any(np.isclose(grid, 0.0, atol=1e-12)):
        grid = np.sort(np.append(grid, 0.0))
    return grid


def refined_grid(model: ModelSpec, E: float, *, h_max: float = 0.01,
                 h_min: float = 5e-4, gap_factor: float = 250.0) -> np.ndarray:
    """Grid dense enough for spline-quality frames and couplings.

    The local spacing follows the minimum mode gap (narrow avoided crossings
    squeeze the eigenvector rotation into a window of that width), capped
    globally by ``h_max``.  Always contains 0 and the truncation endpoints.
    """
    X = model.truncation
    coarse = track_modes(model, E, np.linspace(-X, X, max(401, int(X / 0.05) | 1)))
    gaps = np.diff(np.sort(coarse.values, axis=1), axis=1)
    if gaps.size:
        mingap = np.minimum(gaps.min(axis=1), 10.0)
        target = np.clip(mingap / gap_factor, h_min, h_max)
    else:
        target = np.full(len(coarse.grid), h_max)
    pieces = [np.array([-X])]
    for i in range(len(coarse.grid) - 1):
        a, b = coarse.grid[i], coarse.grid[i + 1]
        h = min(target[i], target[i + 1])
        n = max(1, int(math.ceil((b - a) / h)))
        pieces.append(np.linspace(a, b, n + 1)[1:])
    grid = np.concatenate(pieces)
    if not np.any(np.isclose(grid, 0.0, atol=1e-12)):
        grid = np.sort(np.append(grid, 0.0))
    return grid


def _real_eig_grid(model: ModelSpec, E: float, grid: np.ndarray) -> np.ndarray:
    ev = np.linalg.eigvals(companion(model, grid, E))
    worst = float(np.max(np.abs(ev.imag)))
    if worst > _IM_TOL * max(1.0, float(np.max(np.abs(ev)))):
        raise NonRealMode(
            f"companion spectrum has |Im| = {worst:.3e} at E={E}; hypothesis of "
            "real modes fails on this grid"
        )
    return np.sort(ev.real, axis=1)


def track_modes(model: ModelSpec, E: float, grid: Optional[np.ndarray] = None,
                *, max_rounds: int = 40, h_floor: float = 1e-6) -> ModeField:
    """Track labelled branches over the grid, refining adaptively.

    An interval is bisected whenever some branch moves by more than 0.2x the
    local minimum gap across it.  For delta > 0 the labels stay in ascending
    order throughout (no crossings); the refinement guards the labelling and
    the downstream interpolation equally.
    """
    if grid is None:
        grid = default_grid(model)
    grid = np.asarray(grid, dtype=float)
    values = _real_eig_grid(model, E, grid)

    for _ in range(max_rounds):
        gaps = np.diff(values, axis=1)
        mingap = gaps.min(axis=1) if gaps.size else np.full(len(grid), np.inf)
        move = np.max(np.abs(np.diff(values, axis=0)), axis=1)
        local = np.minimum(mingap[:-1], mingap[1:])
        bad = (move > 0.2 * local) & (np.diff(grid) > h_floor)
        if not np.any(bad):
            break
        mids = 0.5 * (grid[:-1][bad] + grid[1:][bad])
        grid = np.sort(np.concatenate([grid, mids]))
        values = _real_eig_grid(model, E, grid)
    else:
        raise NoConvergence("mode-tracking grid refinement did not settle")

    # sorted-ascending is the minimal-total-distance labelling on the line;
    # verify there is no genuine degeneracy lurking at a node
    md = values.shape[1]
    if md > 1 and model.delta > 0:
        node_gap = float(np.min(np.diff(values, axis=1)))
        scale = max(1.0, float(np.max(np.abs(values))))
        if node_gap < 5e-11 * scale:
            raise AmbiguousLabeling(
                f"near-coincident modes (gap {node_gap:.3e}) at a grid node with delta > 0"
            )

    left, right, pi = _asymptotics_for(model, E, values)
    return ModeField(E=E, delta=model.delta, grid=grid, values=values,
                     asymptotic_left=left, asymptotic_right=right,
                     permutation_pi=pi)


def _limit_eigs(model: ModelSpec, side: int, E: float) -> np.ndarray:
    ev = np.linalg.eigvals(companion_limit(model, side, E))
    if np.max(np.abs(ev.imag)) > _IM_TOL * max(1.0, np.max(np.abs(ev))):
        raise NonRealMode(f"asymptotic spectrum not real at side {side:+d}")
    ev = np.sort(ev.real)
    if ev.size > 1 and np.min(np.diff(ev)) <= 1e-12 * max(1.0, np.max(np.abs(ev))):
        raise SemiwaveError(f"degenerate asymptotic spectrum at side {side:+d}")
    return ev


def _asymptotics_for(model: ModelSpec, E: float, values: np.ndarray):
    left_sorted = _limit_eigs(model, -1, E)
    right_sorted = _limit_eigs(model, +1, E)
    # left labels ascend by convention; right limits follow the tracked
    # right-edge ordering
    right_edge = values[-1]
    order = np.argsort(np.argsort(right_edge))
    right = right_sorted[order]
    pi = tuple(int(r) + 1 for r in np.argsort(np.argsort(right)))
    return left_sorted, right, pi


def asymptotic_modes(model: ModelSpec, E: float,
                     field: Optional[ModeField] = None):
    """Asymptotic mode values on both sides and the net permutation pi.

    For delta > 0 the labels never reorder (pi is the identity).  At
    delta = 0 the permutation encodes the real-crossing pattern and is taken
    from the crossing report.
    """
    if model.delta > 0:
        if field is None:
            field = track_modes(model, E)
        return field.asymptotic_left, field.asymptotic_right, field.permutation_pi
    report = detect_real_crossings(model, E)
    left_sorted = _limit_eigs(model, -1, E)
    right_sorted = _limit_eigs(model, +1, E)
    pi = report.permutation_pi
    right = np.array([right_sorted[pi[j] - 1] for j in range(len(pi))])
    return left_sorted, right, pi


# ---------------------------------------------------------------------------
# Real crossings at delta = 0
# ---------------------------------------------------------------------------

def detect_real_crossings(model: ModelSpec, E: float,
                          grid: Optional[np.ndarray] = None,
                          *, gap_tol: float = 1e-10,
                          slope_tol: float = 1e-8) -> CrossingReport:
    """Locate transversal real crossings of the delta = 0 modes.

    Works on the sorted branch values: a crossing is a locus where an
    adjacent sorted gap dips to zero.  The label bookkeeping (which analytic
    branches swap positions) is reconstructed from the left-to-right swap
    sequence, which also yields the asymptotic permutation.
    """
    model0 = model.with_delta(0.0)
    if grid is None:
        grid = default_grid(model0)
    field = track_modes(model0, E, grid, h_floor=1e-4)
    xs, vals = field.grid, field.values
    md = vals.shape[1]
    scale = max(1.0, float(np.max(np.abs(vals))))

    def sorted_gap(x: float, p: int) -> float:
        ev = np.sort(_eigvals(model0, x, E).real)
        return float(ev[p + 1] - ev[p])

    raw = []
    for p in range(md - 1):
        g = vals[:, p + 1] - vals[:, p]
        interior = np.where((g[1:-1] <= g[:-2]) & (g[1:-1] <= g[2:]))[0] + 1
        for idx in interior:
            if g[idx] > 0.2 * scale:
                continue
            lo, hi = xs[max(idx - 1, 0)], xs[min(idx + 1, len(xs) - 1)]
            res = minimize_scalar(lambda x: sorted_gap(x, p), bounds=(lo, hi),
                                  method="bounded",
                                  options={"xatol": 1e-12})
            gap_min = float(res.fun)
            if gap_min < gap_tol * scale:
                raw.append((float(res.x), p))

    # de-duplicate minima found from adjacent starting nodes
    raw.sort()
    crossings: List[Tuple[float, int]] = []
    for x, p in raw:
        if crossings and p == crossings[-1][1] and abs(x - crossings[-1][0]) < 1e-6:
            continue
        crossings.append((x, p))

    # reconstruct which labels swap at each crossing
    position_of = list(range(md))   # label index (0-based) at each sorted slot
    entries = []
    messages: List[str] = []
    by_x: dict = {}
    for x, p in crossings:
        by_x.setdefault(round(x, 9), []).append(p)
    for x_key in sorted(by_x):
        slots = sorted(by_x[x_key])
        for a, b in zip(slots, slots[1:]):
            if b == a + 1:
                raise SemiwaveError(
                    f"coincident crossings sharing a mode near x={x_key}; "
                    "only simple two-mode crossings are supported"
                )
        for p in slots:
            h = 1e-4
            slope = (sorted_gap(x_key + h, p) + sorted_gap(x_key - h, p)) / (2 * h)
            slope_fine = (sorted_gap(x_key + h / 4, p)
                          + sorted_gap(x_key - h / 4, p)) / (h / 2)
            # a transversal crossing has an h-independent symmetric fit; a
            # tangential one shrinks proportionally to h
            if slope < slope_tol or slope_fine < 0.5 * slope:
                raise TangentialCrossing(
                    f"crossing at x={x_key:.6g} has slope {slope:.3e} "
                    f"(refined {slope_fine:.3e})"
                )
            i_label = position_of[p]
            j_label = position_of[p + 1]
            lo, hi = min(i_label, j_label), max(i_label, j_label)
            entries.append(CrossingEntry(x=float(x_key), pair=(lo + 1, hi + 1),
                                         slope=float(slope)))
            position_of[p], position_of[p + 1] = position_of[p + 1], position_of[p]

    # final permutation: label j sits at sorted slot pi(j) on the right
    pi = [0] * md
    for slot, label in enumerate(position_of):
        pi[label] = slot + 1
    ac_ok = True
    seen_pairs = set()
    partners: dict = {}
    for e in entries:
        if e.pair in seen_pairs:
            ac_ok = False
            messages.append(f"pair {e.pair} crosses more than once")
        seen_pairs.add(e.pair)
        partners.setdefault(e.pair[0], []).append(e.pair[1])
        partners.setdefault(e.pair[1], []).append(e.pair[0])
    for label, others in partners.items():
        above = [o for o in others if o > label]
        below = [o for o in others if o < label]
        if above and below:
            ac_ok = False
            messages.append(
                f"mode {label} crosses both higher and lower labels {others}"
            )
    return CrossingReport(E=E, entries=tuple(entries), permutation_pi=tuple(pi),
                          ac_satisfied=ac_ok, messages=tuple(messages))


# ---------------------------------------------------------------------------
# Continuation off the real axis
# ---------------------------------------------------------------------------

def _continue_segment(model: ModelSpec, E: float, z_from: complex,
                      vals_from: np.ndarray, z_to: complex,
                      lenient: Optional[Tuple[int, int]] = None,
                      max_depth: int = 48) -> np.ndarray:
    """March from z_from to z_to, matching eigenvalues by continuity.

    The step is halved until every eigenvalue moves by less than 0.3x the
    local minimum gap (the lenient pair, if any, is excluded from the gap
    since its members may legitimately coalesce near a branch point).
    """
    md = len(vals_from)

    def local_min_gap(v: np.ndarray) -> float:
        best = np.inf
        for i in range(md):
            for j in range(i + 1, md):
                if lenient is not None and {i, j} == set(lenient):
                    continue
                best = min(best, abs(v[i] - v[j]))
        return best if best < np.inf else 1.0

    z = z_from
    vals = vals_from
    remaining = z_to - z
    depth = 0
    while abs(remaining) > 0:
        step = remaining
        for _ in range(max_depth):
            z_try = z + step
            new = _match(vals, _eigvals(model, z_try, E), lenient=lenient)
            movement = float(np.max(np.abs(new - vals)))
            allowed = 0.3 * min(local_min_gap(vals), local_min_gap(new))
            if movement <= allowed or abs(step) < 1e-12:
                break
            step = step / 2.0
            depth += 1
        else:
            raise NoConvergence("continuation step underflow")
        z = z_try
        vals = new
        remaining = z_to - z
    return vals


def continue_along_path(model: ModelSpec, E: float,
                        path: Sequence[complex],
                        start: Optional[np.ndarray] = None,
                        lenient: Optional[Tuple[int, int]] = None) -> ContinuationResult:
    """Transport labelled eigenvalues along a polyline of complex points.

    ``start`` defaults to the ascending real spectrum at path[0] (which must
    then lie on the real axis).  For a closed path the returned permutation
    maps each start label to the label whose start value the continuation
    landed on.
    """
    path = [complex(p) for p in path]
    if start is None:
        start_vals = np.sort(_eigvals(model, path[0], E).real).astype(complex)
    else:
        start_vals = np.asarray(start, dtype=complex)
    vals = start_vals.copy()
    samples = np.empty((len(path), len(vals)), dtype=complex)
    samples[0] = vals
    for s in range(1, len(path)):
        vals = _continue_segment(model, E, path[s - 1], vals, path[s], lenient=lenient)
        samples[s] = vals
    permutation = None
    if abs(path[-1] - path[0]) < 1e-12:
        perm = []
        for j in range(len(vals)):
            dists = np.abs(start_vals - vals[j])
            tgt = int(np.argmin(dists))
            rest = np.delete(dists, tgt)
            if rest.size and dists[tgt] > 0.25 * rest.min():
                raise MatchingAmbiguity(
                    "closed-path continuation did not land cleanly on a start label"
                )
            perm.append(tgt + 1)
        if sorted(perm) != list(range(1, len(vals) + 1)):
            raise MatchingAmbiguity("closed-path landing is not a permutation")
        permutation = tuple(perm)
    return ContinuationResult(values=vals, permutation=permutation, samples=samples)


# ---------------------------------------------------------------------------
# Branch points
# ---------------------------------------------------------------------------

def branch_point_seed(model: ModelSpec, E: float, pair: Tuple[int, int],
                      field: Optional[ModeField] = None) -> complex:
    """First-order seed x* + i gap / (2 a) from the local linear model."""
    if field is None:
        field = track_modes(model, E)
    i, j = pair[0] - 1, pair[1] - 1
    gap = np.abs(field.values[:, j] - field.values[:, i])
    idx = int(np.argmin(gap))
    x_star = float(field.grid[idx])
    gap_min = float(gap[idx])
    # curvature of the squared gap gives the delta=0 slope a
    h = 0.05
    model_here = model

    def gap2(x):
        ev = np.sort(_eigvals(model_here, x, E).real)
        return (ev[j] - ev[i]) ** 2

    second = (gap2(x_star + h) - 2 * gap2(x_star) + gap2(x_star - h)) / h ** 2
    a = math.sqrt(max(second, 1e-12) / 2.0)
    return x_star + 1j * gap_min / (2.0 * max(a, 1e-6))


def locate_branch_point(model: ModelSpec, E: float, pair: Tuple[int, int],
                        seed: complex, *, max_iter: int = 60,
                        anchor: Optional[float] = None) -> BranchPoint:
    """Newton iteration on the single-valued squared gap s(z) = (k_i - k_j)^2.

    Eigenvalues at complex z are obtained by continuity tracking along the
    segment from a real anchor; the derivative is a central difference along
    the tracked pair.
    """
    md = model.n_modes
    i, j = pair[0] - 1, pair[1] - 1
    if not (0 <= i < j < md):
        raise ValueError(f"invalid pair {pair} for md={md}")
    Y = model.strip_half_width
    if abs(seed.imag) >= Y:
        raise LeftStrip(f"seed {seed:.4g} outside the strip |Im z| < {Y}")
    x_anchor = float(seed.real) if anchor is None else float(anchor)
    vals = np.sort(_eigvals(model, x_anchor, E).real).astype(complex)
    scale = max(1.0, float(np.max(np.abs(vals))) ** 2)
    lenient = (i, j)

    z = complex(x_anchor)
    state = vals

    def move_to(z_new: complex, z_old: complex, v: np.ndarray) -> np.ndarray:
        return _continue_segment(model, E, z_old, v, z_new, lenient=lenient)

    state = move_to(seed, z, state)
    z = seed

    def s_of(v: np.ndarray) -> complex:
        return (v[i] - v[j]) ** 2

    converged = False
    for _ in range(max_iter):
        if abs(z.imag) >= Y or abs(z.real) > 2 * model.truncation:
            raise LeftStrip(f"branch-point iteration left the strip at z={z:.4g}")
        s = s_of(state)
        h = max(1e-7, 1e-7 * abs(z))
        vp = move_to(z + h, z, state)
        vm = move_to(z - h, z, state)
        ds = (s_of(vp) - s_of(vm)) / (2 * h)
        if ds == 0:
            raise NoConvergence("vanishing derivative of the squared gap")
        step = -s / ds
        max_step = 0.5 * max(abs(z.imag), 0.05)
        if abs(step) > max_step:
            step *= max_step / abs(step)
        state = move_to(z + step, z, state)
        z = z + step
        if abs(s_of(state)) < 1e-12 * scale and abs(step) < 1e-12 * (1 + abs(z)):
            converged = True
            break
    if not converged:
        raise NoConvergence(f"branch-point Newton did not converge (last z={z:.6g})")
    if abs(z.imag) <= 1e-10:
        raise CollapsedToRealAxis(f"branch point collapsed to the real axis: {z:.3e}")

    s_res = abs(s_of(state))
    h = max(1e-6, 1e-6 * abs(z))
    vp = move_to(z + h, z, state)
    vm = move_to(z - h, z, state)
    s_prime = (s_of(vp) - s_of(vm)) / (2 * h)
    if abs(s_prime) <= 1e-8 * scale:
        raise NoConvergence(
            f"squared gap derivative {abs(s_prime):.3e} too small at z0; "
            "branch point is not generic"
        )
    radius = 0.4 * abs(z.imag)
    radius = min(radius, 0.45 * (Y - abs(z.imag)))
    return BranchPoint(pair=(i + 1, j + 1), z0=z, loop_radius=float(radius),
                       s_residual=float(s_res), s_prime=complex(s_prime))


# ---------------------------------------------------------------------------
# Canonical loops
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LoopSegment:
    kind: str                 # "line" | "arc"
    a: complex                # line start / arc centre
    b: complex                # line end   / unused for arcs
    radius: float = 0.0
    angle_start: float = 0.0
    angle_end: float = 0.0

    def point(self, t: np.ndarray) -> np.ndarray:
        """Position for parameter t in [0, 1]."""
        t = np.asarray(t, dtype=float)
        if self.kind == "line":
            return self.a + (self.b - self.a) * t
        ang = self.angle_start + (self.angle_end - self.angle_start) * t
        return self.a + self.radius * np.exp(1j * ang)

    def dpoint(self, t: np.ndarray) -> np.ndarray:
        """dz/dt for parameter t in [0, 1]."""
        t = np.asarray(t, dtype=float)
        if self.kind == "line":
            return np.full(t.shape, self.b - self.a, dtype=complex)
        span = self.angle_end - self.angle_start
        ang = self.angle_start + span * t
        return 1j * self.radius * span * np.exp(1j * ang)


def canonical_loop(z0: complex, radius: float, basepoint: float = 0.0) -> List[LoopSegment]:
    """Loop based at ``basepoint``: real leg, vertical leg, full circle, return.

    Negatively oriented (clockwise) around branch points in the upper half
    plane, positively oriented for their conjugates.
    """
    x0, y0 = z0.real, z0.imag
    upper = y0 > 0
    join = x0 + 1j * (y0 - radius if upper else y0 + radius)
    segs: List[LoopSegment] = []
    if abs(basepoint - x0) > 1e-14:
        segs.append(LoopSegment("line", complex(basepoint), complex(x0)))
    segs.append(LoopSegment("line", complex(x0), join))
    if upper:
        segs.append(LoopSegment("arc", z0, 0j, radius, -np.pi / 2, -np.pi / 2 - 2 * np.pi))
    else:
        segs.append(LoopSegment("arc", z0, 0j, radius, np.pi / 2, np.pi / 2 + 2 * np.pi))
    segs.append(LoopSegment("line", join, complex(x0)))
    if abs(basepoint - x0) > 1e-14:
        segs.append(LoopSegment("line", complex(x0), complex(basepoint)))
    return segs


def loop_points(segments: Sequence[LoopSegment], per_segment: int) -> np.ndarray:
    """Polyline sampling of a loop, de-duplicating segment junctions."""
    pts: List[complex] = []
    for seg in segments:
        t = np.linspace(0.0, 1.0, per_segment + 1)
        zs = seg.point(t)
        if pts:
            zs = zs[1:]
        pts.extend(zs.tolist())
    return np.asarray(pts, dtype=complex)
