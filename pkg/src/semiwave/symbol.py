"""Total symbol of the operator and its companion linearization.

A model declares d x d expression-valued coefficient matrices A[l, n] so that
the symbol is R(x, E, k) = sum_{l,n} A[l,n](x, delta) k^l E^n.  The reduced
matrices N_l(x, E) = sum_n A[l,n] E^n turn the dispersion relation
det R(x,E,k) = 0 into a polynomial eigenvalue problem in k, solved through
the block companion matrix H(x, E) of size md x md.

Asymptotic coefficient values are declared in the model (expressions in
delta only), never extrapolated; a tail validator cross-checks the declared
limits against evaluation near the truncation radius.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from . import expr
from .errors import PoleDetected, SchemaError, SingularLeadingMatrix

__all__ = [
    "ModelSpec", "reduced_matrix", "symbol_matrix", "symbol_matrix_dk",
    "companion", "companion_limit", "pole_screen", "tail_fit",
    "model_from_dict", "model_to_dict",
]

Side = int  # -1 for x -> -inf, +1 for x -> +inf

_COND_LIMIT = 1e12


@dataclass(frozen=True)
class ModelSpec:
    """Declarative description of one operator symbol.

    coeffs maps (l, n) to a d x d nested list of Expressions in (x, delta);
    missing entries are zero.  limits maps (l, n, side) to expression
    matrices in delta only.  quadratic_dispersion lists (mode_index, side)
    pairs for which the asymptotic inverse dispersion is exactly quadratic.
    """

    name: str
    d: int
    m: int
    r: int
    delta: float
    coeffs: Mapping[Tuple[int, int], tuple]
    limits: Mapping[Tuple[int, int, Side], tuple]
    energy_window: Tuple[float, float]
    strip_half_width: float
    decay_exponent: float
    truncation: float
    quadratic_dispersion: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.r < 1:
            raise SchemaError("at least one time derivative is required (r >= 1)")
        if self.energy_window[0] >= self.energy_window[1]:
            raise SchemaError("empty energy window")
        if self.delta < 0:
            raise SchemaError("delta must be >= 0")
        if self.decay_exponent <= 0.5:
            raise SchemaError("decay exponent must exceed 1/2")

    @property
    def n_modes(self) -> int:
        return self.m * self.d

    def with_delta(self, delta: float) -> "ModelSpec":
        return replace(self, delta=delta)

    def coeff_block(self, l: int, n: int):
        return self.coeffs.get((l, n))

    def limit_block(self, l: int, n: int, side: Side):
        return self.limits.get((l, n, side))


def _eval_block(block, bindings, shape, dtype=complex):
    """Evaluate a d x d expression matrix; None means the zero block.

    Scalar bindings give a (d, d) array; an array binding of shape (N,)
    gives (N, d, d).
    """
    d = shape
    sizes = [np.shape(v) for v in bindings.values() if np.ndim(v) > 0]
    if sizes:
        out = np.zeros(sizes[0] + (d, d), dtype=dtype)
    else:
        out = np.zeros((d, d), dtype=dtype)
    if block is None:
        return out
    for i in range(d):
        for j in range(d):
            e = block[i][j]
            if e is None:
                continue
            val = expr.evaluate(e, bindings, check=False)
            out[..., i, j] = val
    return out


def reduced_matrix(model: ModelSpec, z, E: float, l: int):
    """N_l(z, E): Horner evaluation in E of the coefficient matrices."""
    if not 0 <= l <= model.m:
        raise ValueError(f"derivative order l={l} outside 0..{model.m}")
    bindings = {"x": z, "delta": model.delta}
    acc = _eval_block(model.coeff_block(l, model.r), bindings, model.d)
    for n in range(model.r - 1, -1, -1):
        acc = acc * E + _eval_block(model.coeff_block(l, n), bindings, model.d)
    return acc


def _reduced_matrix_limit(model: ModelSpec, side: Side, E: float, l: int):
    bindings = {"delta": model.delta}
    acc = _eval_block(model.limit_block(l, model.r, side), bindings, model.d)
    for n in range(model.r - 1, -1, -1):
        acc = acc * E + _eval_block(model.limit_block(l, n, side), bindings, model.d)
    return acc


def symbol_matrix(model: ModelSpec, z, E: float, k):
    """R(z, E, k) = sum_l N_l(z, E) k^l."""
    acc = reduced_matrix(model, z, E, model.m)
    k = np.asarray(k, dtype=complex) if np.ndim(k) else k
    for l in range(model.m - 1, -1, -1):
        acc = acc * k + reduced_matrix(model, z, E, l)
    return acc


def symbol_matrix_dk(model: ModelSpec, z, E: float, k, order: int = 1):
    """Derivative of R with respect to k (order 1 or 2)."""
    acc = None
    for l in range(model.m, order - 1, -1):
        coeff = l if order == 1 else l * (l - 1)
        term = coeff * reduced_matrix(model, z, E, l)
        acc = term if acc is None else acc * k + term
    if acc is None:
        shape = np.shape(z) + (model.d, model.d) if np.ndim(z) else (model.d, model.d)
        return np.zeros(shape, dtype=complex)
    return acc


def _companion_from_blocks(n_blocks, d, nm, blocks):
    """Assemble the block companion matrix from N_m^{-1} N_l solves."""
    single = nm.ndim == 2
    if single:
        nm = nm[None]
        blocks = [b[None] for b in blocks]
    npts = nm.shape[0]
    md = n_blocks * d
    H = np.zeros((npts, md, md), dtype=complex)
    conds = np.linalg.cond(nm)
    if np.any(conds > _COND_LIMIT) or not np.all(np.isfinite(conds)):
        raise SingularLeadingMatrix(
            f"leading reduced matrix condition number exceeds {_COND_LIMIT:g}"
        )
    for p in range(n_blocks - 1):
        H[:, p * d:(p + 1) * d, (p + 1) * d:(p + 2) * d] = np.eye(d)
    base = (n_blocks - 1) * d
    for l in range(n_blocks):
        solved = np.linalg.solve(nm, blocks[l])
        H[:, base:, l * d:(l + 1) * d] = -solved
    return H[0] if single else H


def companion(model: ModelSpec, z, E: float):
    """H(z, E): spectrum equals the root set of det R(z, E, .) in k."""
    nm = reduced_matrix(model, z, E, model.m)
    blocks = [reduced_matrix(model, z, E, l) for l in range(model.m)]
    return _companion_from_blocks(model.m, model.d, nm, blocks)


def companion_limit(model: ModelSpec, side: Side, E: float):
    """Companion matrix built from the declared asymptotic coefficients."""
    nm = _reduced_matrix_limit(model, side, E, model.m)
    blocks = [_reduced_matrix_limit(model, side, E, l) for l in range(model.m)]
    return _companion_from_blocks(model.m, model.d, nm, blocks)


# ---------------------------------------------------------------------------
# Model-level validators
# ---------------------------------------------------------------------------

def pole_screen(model: ModelSpec, nx: int = 41, ny: int = 21) -> None:
    """Evaluate every coefficient entry on a strip-covering grid.

    Any non-finite value rejects the model (cheap analyticity sanity check).
    """
    xs = np.linspace(-model.truncation, model.truncation, nx)
    ys = np.linspace(-model.strip_half_width, model.strip_half_width, ny)
    zs = (xs[:, None] + 1j * ys[None, :]).ravel()
    for (l, n), block in model.coeffs.items():
        for i in range(model.d):
            for j in range(model.d):
                e = block[i][j]
                if e is None:
                    continue
                vals = expr.evaluate(e, {"x": zs, "delta": model.delta}, check=False)
                if not np.all(np.isfinite(vals)):
                    bad = zs[~np.isfinite(np.asarray(vals))][0]
                    raise PoleDetected(
                        f"coefficient A[{l},{n}][{i},{j}] of model {model.name!r} "
                        f"is non-finite near z={bad:.4g}"
                    )


def tail_fit(model: ModelSpec, E: Optional[float] = None) -> Dict[str, float]:
    """Check the declared limits against evaluation near the truncation radius.

    Fits the tail constant c at X/2 from sup |x|^(2+nu) ||A(x)-A(inf)|| and
    requires the bound c / X^(2+nu) to hold at X on both sides.
    """
    X = model.truncation
    nu = model.decay_exponent
    worst_ratio = 0.0
    fitted_c = 0.0
    for side in (-1, +1):
        for (l, n), block in model.coeffs.items():
            lim_block = model.limit_block(l, n, side)
            a_half = _eval_block(block, {"x": side * X / 2.0, "delta": model.delta}, model.d)
            a_full = _eval_block(block, {"x": side * X * 1.0, "delta": model.delta}, model.d)
            a_inf = _eval_block(lim_block, {"delta": model.delta}, model.d)
            c = np.linalg.norm(a_half - a_inf, 2) * (X / 2.0) ** (2.0 + nu)
            fitted_c = max(fitted_c, float(c))
            bound = max(float(c), 1e-300) / X ** (2.0 + nu)
            err_full = float(np.linalg.norm(a_full - a_inf, 2))
            # allow an absolute floor at round-off scale
            ratio = err_full / max(bound, 1e-14)
            worst_ratio = max(worst_ratio, ratio)
    return {"fitted_c": fitted_c, "worst_ratio": worst_ratio, "passed": worst_ratio <= 1.0}


# ---------------------------------------------------------------------------
# Serialization (the JSON model-file schema used by the CLI)
# ---------------------------------------------------------------------------

_REQUIRED_FIELDS = (
    "name", "d", "m", "r", "delta", "A", "A_limits", "energy_window",
    "strip_half_width", "decay_exponent", "truncation",
)


def _parse_block(raw, d, where):
    if raw is None:
        return None
    if len(raw) != d or any(len(row) != d for row in raw):
        raise SchemaError(f"{where}: expected a {d}x{d} matrix of expression strings")
    return tuple(
        tuple(None if cell in (None, "", "0") else expr.parse(str(cell)) for cell in row)
        for row in raw
    )


def model_from_dict(doc: Mapping) -> ModelSpec:
    missing = [f for f in _REQUIRED_FIELDS if f not in doc]
    if missing:
        raise SchemaError(f"model document missing fields: {missing}")
    d, m, r = int(doc["d"]), int(doc["m"]), int(doc["r"])
    coeffs = {}
    for key, raw in doc["A"].items():
        l, n = (int(s) for s in key.split(","))
        if not (0 <= l <= m and 0 <= n <= r):
            raise SchemaError(f"A[{key}] outside declared orders")
        coeffs[(l, n)] = _parse_block(raw, d, f"A[{key}]")
    limits = {}
    for key, raw in doc["A_limits"].items():
        l, n, side_txt = key.split(",")
        side = -1 if side_txt.strip() == "-" else +1
        limits[(int(l), int(n), side)] = _parse_block(raw, d, f"A_limits[{key}]")
    for (l, n) in coeffs:
        for side in (-1, +1):
            if (l, n, side) not in limits:
                raise SchemaError(f"A_limits missing entry for (l={l}, n={n}, side={'+' if side > 0 else '-'})")
    quad = frozenset(
        (int(mode), -1 if side == "-" else +1)
        for mode, side in doc.get("quadratic_dispersion", [])
    )
    model = ModelSpec(
        name=str(doc["name"]),
        d=d, m=m, r=r,
        delta=float(doc["delta"]),
        coeffs=coeffs,
        limits=limits,
        energy_window=(float(doc["energy_window"][0]), float(doc["energy_window"][1])),
        strip_half_width=float(doc["strip_half_width"]),
        decay_exponent=float(doc["decay_exponent"]),
        truncation=float(doc["truncation"]),
        quadratic_dispersion=quad,
    )
    pole_screen(model)
    return model


def model_to_dict(model: ModelSpec) -> Dict:
    def dump_block(block):
        if block is None:
            return None
        return [["0" if e is None else expr.pretty(e) for e in row] for row in block]

    return {
        "name": model.name,
        "d": model.d, "m": model.m, "r": model.r,
        "delta": model.delta,
        "A": {f"{l},{n}": dump_block(b) for (l, n), b in sorted(model.coeffs.items())},
        "A_limits": {
            f"{l},{n},{'+' if side > 0 else '-'}": dump_block(b)
            for (l, n, side), b in sorted(model.limits.items())
        },
        "energy_window": list(model.energy_window),
        "strip_half_width": model.strip_half_width,
        "decay_exponent": model.decay_exponent,
        "truncation": model.truncation,
        "quadratic_dispersion": [
            [mode, "+" if side > 0 else "-"] for mode, side in sorted(model.quadratic_dispersion)
        ],
    }
