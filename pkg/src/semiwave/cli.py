"""Command-line interface: model loading, validation, sweeps, data emission.

Models are JSON documents (see symbol.model_from_dict); results are CSV
files plus one JSON manifest per run recording the model hash, the full
parameter set, per-check outcomes and the wall time, so a run can be
reproduced bit-for-bit up to floating-point scheduling noise.

Exit codes: 0 success, 2 validation failure, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__, models, packet, scatter, stationary
from .errors import SemiwaveError, ValidationFailure
from .frame import kato_transport, loop_prefactor
from .modes import (
    branch_point_seed, detect_real_crossings, locate_branch_point,
    track_modes, variation_grid,
)
from .symbol import ModelSpec, model_from_dict, model_to_dict, pole_screen, tail_fit

__all__ = ["main", "load_model", "validate_model", "run_sweep", "ValidationReport"]


# ---------------------------------------------------------------------------
# Model loading and validation
# ---------------------------------------------------------------------------

def load_model(path_or_name: str) -> ModelSpec:
    """Load a model file; bare zoo names resolve to the built-in models."""
    p = Path(path_or_name)
    if p.exists():
        doc = json.loads(p.read_text())
        return model_from_dict(doc)
    if path_or_name in models.zoo_names():
        return models.get_model(path_or_name)
    raise FileNotFoundError(
        f"{path_or_name!r} is neither a file nor a zoo model {models.zoo_names()}"
    )


@dataclass
class CheckResult:
    name: str
    passed: bool
    margin: float
    detail: str = ""


@dataclass
class ValidationReport:
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, margin: float, detail: str = ""):
        self.checks.append(CheckResult(name, bool(passed), float(margin), detail))

    def as_dict(self) -> Dict:
        return {c.name: {"passed": c.passed, "margin": c.margin, "detail": c.detail}
                for c in self.checks}

    def __str__(self) -> str:
        lines = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            lines.append(f"[{status}] {c.name:28s} margin={c.margin:.3e} {c.detail}")
        return "\n".join(lines)


def validate_model(model: ModelSpec, density: Optional[packet.EnergyDensity] = None,
                   n_x: int = 61, n_e: int = 11) -> ValidationReport:
    """Run the hypothesis battery; report-only (callers gate on .passed)."""
    rep = ValidationReport()
    lo, hi = model.energy_window

    # strip analyticity (pole screen)
    try:
        pole_screen(model)
        rep.add("strip-analyticity", True, 0.0)
    except SemiwaveError as exc:
        rep.add("strip-analyticity", False, np.inf, str(exc))
        return rep

    # declared-limit tail bound
    tf = tail_fit(model)
    rep.add("tail-decay", bool(tf["passed"]), tf["worst_ratio"],
            f"fitted c={tf['fitted_c']:.3e}")

    # real, distinct modes over the (x, E) grid
    worst_im = 0.0
    worst_gap = np.inf
    ok = True
    try:
        xs = np.linspace(-model.truncation, model.truncation, n_x)
        for E in np.linspace(lo, hi, n_e):
            from .symbol import companion
            ev = np.linalg.eigvals(companion(model, xs, float(E)))
            worst_im = max(worst_im, float(np.max(np.abs(ev.imag))))
            if model.n_modes > 1 and model.delta > 0:
                sorted_ev = np.sort(ev.real, axis=1)
                worst_gap = min(worst_gap, float(np.min(np.diff(sorted_ev))))
    except SemiwaveError as exc:
        ok = False
        rep.add("real-modes", False, np.inf, str(exc))
    if ok:
        rep.add("real-modes", worst_im < 1e-8, worst_im)
        if model.n_modes > 1 and model.delta > 0:
            rep.add("mode-separation", worst_gap > 1e-10, worst_gap)

    # crossing pattern at delta = 0
    if model.n_modes > 1:
        try:
            report = detect_real_crossings(model, 0.5 * (lo + hi))
            min_slope = min((e.slope for e in report.entries), default=np.inf)
            rep.add("crossing-pattern", report.ac_satisfied, min_slope,
                    f"{report.count} crossings, pi={report.permutation_pi}"
                    + ("" if report.ac_satisfied else "; " + "; ".join(report.messages)))
        except SemiwaveError as exc:
            rep.add("crossing-pattern", False, 0.0, str(exc))
    else:
        rep.add("crossing-pattern", True, np.inf, "single mode, vacuous")

    # group velocities on the window
    try:
        kmin, kmax = packet.velocity_bounds(model)
        rep.add("group-velocity", np.isfinite(kmax) and kmin > 0, kmin,
                f"K-=[{kmin:.3g}], K+=[{kmax:.3g}]")
    except (SemiwaveError, FloatingPointError) as exc:
        rep.add("group-velocity", False, 0.0, str(exc))

    # local quadratic form of the avoided crossing
    if model.n_modes > 1 and model.delta > 0:
        try:
            report = detect_real_crossings(model, 0.5 * (lo + hi))
            if report.entries:
                fit = scatter.avoided_crossing_fit(model, 0.5 * (lo + hi),
                                                   report.entries[0].pair)
                rep.add("crossing-quadratic-form", fit.residual < 1e-4, fit.residual,
                        f"a={fit.a:.6g} b={fit.b:.6g} c={fit.c_coef:.3g} D={fit.D:.6g}")
            else:
                rep.add("crossing-quadratic-form", True, np.inf, "no crossings")
        except SemiwaveError as exc:
            rep.add("crossing-quadratic-form", False, np.inf, str(exc))

    # density regularity
    if density is not None:
        try:
            out = density.validate()
            rep.add("density-regularity", True, abs(out["g_fit"] - density.g),
                    f"P bounded by {out['p_bound']:.3g}")
        except ValidationFailure as exc:
            rep.add("density-regularity", False, np.inf, str(exc))
    return rep


# ---------------------------------------------------------------------------
# Manifest and CSV helpers
# ---------------------------------------------------------------------------

def _model_hash(model: ModelSpec) -> str:
    doc = json.dumps(model_to_dict(model), sort_keys=True)
    return hashlib.sha256(doc.encode()).hexdigest()[:16]


def _write_manifest(out_dir: Path, subcommand: str, model: ModelSpec,
                    params: Dict, checks: Optional[Dict], wall: float,
                    outputs: Sequence[str]) -> Path:
    manifest = {
        "tool": "semiwave",
        "version": __version__,
        "subcommand": subcommand,
        "model": model.name,
        "model_hash": _model_hash(model),
        "parameters": params,
        "checks": checks or {},
        "wall_time_s": round(wall, 3),
        "outputs": list(outputs),
    }
    path = out_dir / f"{subcommand}_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (complex, np.complexfloating)):
        return repr(complex(v))
    return v


def _parse_floats(text: str) -> List[float]:
    return [float(s) for s in text.split(",") if s.strip()]


def _parse_grid(text: str) -> np.ndarray:
    lo, hi, n = text.split(":")
    return np.linspace(float(lo), float(hi), int(n))


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------

def _cmd_validate(args) -> int:
    model = load_model(args.model)
    density = None
    if args.density:
        doc = json.loads(Path(args.density).read_text()) if Path(args.density).exists() \
            else json.loads(args.density)
        density = packet.density_from_dict(doc, model.energy_window)
    t0 = time.time()
    rep = validate_model(model, density)
    print(str(rep))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_manifest(out, "validate", model, {"density": bool(density)},
                        rep.as_dict(), time.time() - t0, [])
    return 0 if rep.passed else 2


def _require_valid(model: ModelSpec) -> Optional[int]:
    rep = validate_model(model)
    if not rep.passed:
        print(str(rep), file=sys.stderr)
        print("model failed validation; refusing to run", file=sys.stderr)
        return 2
    return None


def _cmd_modes(args) -> int:
    model = load_model(args.model)
    if args.delta is not None:
        model = model.with_delta(float(args.delta))
    rc = _require_valid(model)
    if rc:
        return rc
    t0 = time.time()
    energies = _parse_floats(args.energy)
    grid = _parse_grid(args.grid) if args.grid else None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = []
    for E in energies:
        fld = track_modes(model, E, grid)
        header = ["x"] + [f"k_{j+1}" for j in range(fld.n_modes)]
        rows = [[float(x)] + [float(v) for v in fld.values[i]]
                for i, x in enumerate(fld.grid)]
        name = f"modes_E{E:g}_delta{model.delta:g}.csv"
        _write_csv(out / name, header, rows)
        outputs.append(name)
    _write_manifest(out, "modes", model,
                    {"energies": energies, "delta": model.delta,
                     "grid": args.grid or "auto"},
                    None, time.time() - t0, outputs)
    return 0


def _cmd_smatrix(args) -> int:
    model = load_model(args.model)
    if args.delta is not None:
        model = model.with_delta(float(args.delta))
    rc = _require_valid(model)
    if rc:
        return rc
    t0 = time.time()
    energies = _parse_floats(args.energy)
    eps_list = _parse_floats(args.eps)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    md = model.n_modes
    try:
        for E in energies:
            data = stationary.build_stationary(
                model, E, variation_grid(model, E))
            for eps in eps_list:
                rec = scatter.s_matrix(data, eps, tol_profile=args.tol_profile)
                row = [E, model.delta, eps]
                for j in range(md):
                    for l in range(md):
                        row.extend([rec.S[j, l].real, rec.S[j, l].imag])
                rows.append(row)
    except SemiwaveError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    header = ["E", "delta", "eps"]
    for j in range(md):
        for l in range(md):
            header.extend([f"ReS_{j+1}{l+1}", f"ImS_{j+1}{l+1}"])
    _write_csv(out / "smatrix.csv", header, rows)
    _write_manifest(out, "smatrix", model,
                    {"energies": energies, "eps": eps_list,
                     "tol_profile": args.tol_profile},
                    None, time.time() - t0, ["smatrix.csv"])
    return 0


def _cmd_action(args) -> int:
    model = load_model(args.model)
    rc = _require_valid(model)
    if rc:
        return rc
    t0 = time.time()
    energies = _parse_floats(args.energy)
    deltas = _parse_floats(args.delta) if args.delta else [model.delta]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    try:
        for delta in deltas:
            mdl = model.with_delta(delta)
            for E in energies:
                crossing = detect_real_crossings(mdl, E)
                fld = track_modes(mdl, E)
                fr = kato_transport(mdl, E, fld)
                for entry in crossing.entries:
                    seed = branch_point_seed(mdl, E, entry.pair, fld)
                    bp = locate_branch_point(mdl, E, entry.pair, seed)
                    act = scatter.action_integral(mdl, E, bp, entry.pair[0])
                    pref = loop_prefactor(mdl, E, bp, frame=fr)
                    rows.append([
                        E, delta, f"{entry.pair[0]}-{entry.pair[1]}",
                        bp.z0.real, bp.z0.imag,
                        act.adjusted.real, act.adjusted.imag,
                        ";".join(f"{t.real:+.9g}{t.imag:+.9g}j" for t in pref.theta),
                    ])
    except SemiwaveError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    _write_csv(out / "action.csv",
               ["E", "delta", "pair", "Re_z0", "Im_z0", "Re_action", "Im_action",
                "theta"], rows)
    _write_manifest(out, "action", model,
                    {"energies": energies, "deltas": deltas},
                    None, time.time() - t0, ["action.csv"])
    return 0


def _get_density(args, model) -> packet.EnergyDensity:
    if args.density:
        doc = json.loads(Path(args.density).read_text()) if Path(args.density).exists() \
            else json.loads(args.density)
    else:
        if model.name not in models.zoo_names():
            raise ValidationFailure("--density required for non-zoo models")
        doc = models.density_defaults(model.name)
    return packet.density_from_dict(doc, model.energy_window)


def _cmd_packet(args) -> int:
    model = load_model(args.model)
    rc = _require_valid(model)
    if rc:
        return rc
    t0 = time.time()
    density = _get_density(args, model)
    eps = float(args.eps)
    times = _parse_floats(args.time)
    x_grid = _parse_grid(args.grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    x_extent = float(np.max(np.abs(x_grid)))
    slope = max(abs(1.0 / v) for v in packet.velocity_bounds(model))
    n_e = packet.energy_node_count(model.energy_window, eps,
                                   max(abs(t) for t in times), x_extent, slope)
    try:
        pipe = packet.SynthesisPipeline(model, density, n_energy=n_e,
                                        j_in=args.mode,
                                        tol_profile=args.tol_profile)
        outputs = []
        for t in times:
            if args.kind == "exact":
                fld = pipe.exact_field(eps, t, x_grid)
            elif args.kind == "glued":
                left = pipe.asymptotic_field(eps, t, -1, args.mode, x_grid)
                right = pipe.asymptotic_field(eps, t, +1, args.mode, x_grid)
                fld = packet.glue_asymptotic(left, right)
            else:
                side = +1 if args.kind == "asymptotic+" else -1
                fld = pipe.asymptotic_field(eps, t, side, args.mode, x_grid)
            header = ["x", "t"]
            for c in range(model.d):
                header.extend([f"Re_phi{c+1}", f"Im_phi{c+1}"])
            rows = []
            for i, x in enumerate(fld.x):
                row = [float(x), t]
                for c in range(model.d):
                    row.extend([fld.values[i, c].real, fld.values[i, c].imag])
                rows.append(row)
            name = f"packet_{args.kind}_t{t:g}.csv"
            _write_csv(out / name, header, rows)
            outputs.append(name)
    except SemiwaveError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    _write_manifest(out, "packet", model,
                    {"eps": eps, "times": times, "kind": args.kind,
                     "mode": args.mode, "n_energy": n_e,
                     "grid": args.grid, "tol_profile": args.tol_profile},
                    None, time.time() - t0, outputs)
    return 0


def _cmd_transition(args) -> int:
    model = load_model(args.model)
    rc = _require_valid(model)
    if rc:
        return rc
    t0 = time.time()
    density = _get_density(args, model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        prof = packet.transition_profile(model, density, args.mode)
        eps = float(args.eps)
        cfg = packet.DiagnosticsConfig()
        t_loc = float(args.time.split(",")[0]) if args.time else 200.0
        report = {}
        if prof.inverse.is_quadratic and abs(t_loc) >= 1.0:
            xc = -prof.dE_dk * t_loc - prof.lambda1
            M = prof.lambda2 + 1j * prof.d2E_dk2 * t_loc
            width = float(np.sqrt(eps * abs(M) ** 2 / M.real))
            span = max(12 * width, abs(t_loc) ** cfg.alpha_loc + 2 * eps ** cfg.tau
                       * abs(prof.dE_dk) * abs(t_loc) + 5)
            xg = np.linspace(xc - span, xc + span, 4001)
            fld = packet.gaussian_closed_form(prof, eps, t_loc, xg)
            report = packet.localization_report(fld, prof, cfg, eps)
            report = {k: (list(v) if isinstance(v, tuple) else v)
                      for k, v in report.items()}
        norms = {}
        if prof.inverse.is_quadratic:
            xg0 = np.linspace(-prof.lambda1 - 14, -prof.lambda1 + 14, 4001)
            lead = packet.gaussian_closed_form(prof, eps, 0.0, xg0)
            norms["leading_term_l2"] = lead.l2_norm()
            norms["fourier_factor_l2"] = float(
                (np.pi * eps / prof.lambda2.real) ** 0.25)
        doc = {
            "j": prof.j, "n": prof.n,
            "E_star": prof.E_star, "k_star": prof.k_star,
            "dE_dk": prof.dE_dk, "d2E_dk2": prof.d2E_dk2,
            "lambda1": prof.lambda1,
            "lambda2": [prof.lambda2.real, prof.lambda2.imag],
            "theta_star": [prof.theta_star.real, prof.theta_star.imag],
            "alpha_min": prof.alpha_min(),
            "action_star": [prof.action_star.real, prof.action_star.imag],
            "alpha_knots": {"E": prof.energies.tolist(),
                            "alpha": prof.alpha_values.tolist()},
            "kappa_knots": {"E": prof.energies.tolist(),
                            "kappa": prof.kappa_values.tolist()},
            "norms": norms,
            "localization": report,
            "eps": eps,
        }
    except SemiwaveError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    path = out / "transition.json"
    path.write_text(json.dumps(doc, indent=2) + "\n")
    _write_manifest(out, "transition", model,
                    {"eps": float(args.eps), "mode": args.mode},
                    None, time.time() - t0, ["transition.json"])
    return 0


def run_sweep(model: ModelSpec, eps_list: Sequence[float], E: float,
              j: int = 1, jobs: int = 1, tol_profile: str = "default") -> Dict:
    """Scattering sweep over eps plus the decay-rate fit against the action.

    Cells run in a thread pool; results are assembled in grid order
    regardless of completion order.
    """
    data = stationary.build_stationary(model, E, variation_grid(model, E))
    crossing = detect_real_crossings(model, E)
    target = crossing.permutation_pi[j - 1]
    fld = data.field
    seed = branch_point_seed(model, E, (min(j, target), max(j, target)), fld)
    bp = locate_branch_point(model, E, (min(j, target), max(j, target)), seed)
    act = scatter.action_integral(model, E, bp, j)

    def cell(eps: float):
        try:
            rec = scatter.s_matrix(data, eps, tol_profile=tol_profile)
            return {"eps": eps, "S": rec.S, "ok": True, "error": ""}
        except SemiwaveError as exc:
            return {"eps": eps, "S": None, "ok": False, "error": str(exc)}

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(cell, eps_list))
    else:
        results = [cell(e) for e in eps_list]

    amps = [abs(r["S"][target - 1, j - 1]) for r in results if r["ok"]]
    eps_ok = [r["eps"] for r in results if r["ok"]]
    rate, slope = scatter.decay_rate_fit(eps_ok, amps) if len(eps_ok) >= 2 else (np.nan, np.nan)
    return {
        "results": results, "rate": rate, "slope": slope,
        "im_action": act.adjusted.imag,
        "rate_rel_err": abs(rate - act.adjusted.imag) / abs(act.adjusted.imag)
        if np.isfinite(rate) else np.nan,
        "target": target,
    }


def _cmd_sweep(args) -> int:
    model = load_model(args.model)
    if args.delta is not None:
        model = model.with_delta(float(args.delta))
    rc = _require_valid(model)
    if rc:
        return rc
    t0 = time.time()
    eps_list = _parse_floats(args.eps)
    E = float(args.energy)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        sweep = run_sweep(model, eps_list, E, j=args.mode, jobs=args.jobs,
                          tol_profile=args.tol_profile)
    except SemiwaveError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    md = model.n_modes
    rows = []
    for r in sweep["results"]:
        row = [E, model.delta, r["eps"], int(r["ok"]), r["error"]]
        if r["ok"]:
            for j in range(md):
                for l in range(md):
                    row.extend([r["S"][j, l].real, r["S"][j, l].imag])
        rows.append(row)
    header = ["E", "delta", "eps", "ok", "error"]
    for j in range(md):
        for l in range(md):
            header.extend([f"ReS_{j+1}{l+1}", f"ImS_{j+1}{l+1}"])
    _write_csv(out / "sweep.csv", header, rows)
    checks = {
        "decay-rate-fit": {
            "passed": bool(sweep["rate_rel_err"] < 0.03),
            "margin": float(sweep["rate_rel_err"]),
            "detail": f"rate={sweep['rate']:.8g} vs Im action={sweep['im_action']:.8g}",
        }
    }
    _write_manifest(out, "sweep", model,
                    {"energy": E, "eps": eps_list, "mode": args.mode,
                     "jobs": args.jobs, "tol_profile": args.tol_profile},
                    checks, time.time() - t0, ["sweep.csv"])
    print(f"decay rate {sweep['rate']:.8g} vs Im action {sweep['im_action']:.8g} "
          f"(rel err {sweep['rate_rel_err']:.2e})")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semiwave",
        description="Semiclassical mode structure, scattering and wave packets "
                    "for 1+1D autonomous linear PDE systems",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, density=False):
        p.add_argument("--model", required=True, help="model JSON path or zoo name")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--tol-profile", default="default",
                       choices=("fast", "default", "strict"))
        if density:
            p.add_argument("--density", default=None,
                           help="density JSON (path or literal)")

    p = sub.add_parser("validate", help="run the hypothesis battery")
    p.add_argument("--model", required=True)
    p.add_argument("--density", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("modes", help="dispersion branches as CSV")
    common(p)
    p.add_argument("--energy", required=True, help="comma list of energies")
    p.add_argument("--delta", default=None)
    p.add_argument("--grid", default=None, help="x0:x1:n")
    p.set_defaults(func=_cmd_modes)

    p = sub.add_parser("smatrix", help="scattering matrices as CSV")
    common(p)
    p.add_argument("--energy", required=True)
    p.add_argument("--eps", required=True)
    p.add_argument("--delta", default=None)
    p.set_defaults(func=_cmd_smatrix)

    p = sub.add_parser("action", help="branch points and loop actions as CSV")
    common(p)
    p.add_argument("--energy", required=True)
    p.add_argument("--delta", default=None, help="comma list of deltas")
    p.set_defaults(func=_cmd_action)

    p = sub.add_parser("packet", help="wave fields as CSV")
    common(p, density=True)
    p.add_argument("--eps", required=True)
    p.add_argument("--time", required=True, help="comma list of times")
    p.add_argument("--grid", required=True, help="x0:x1:n")
    p.add_argument("--mode", type=int, default=1)
    p.add_argument("--kind", default="exact",
                   choices=("exact", "asymptotic+", "asymptotic-", "glued"))
    p.set_defaults(func=_cmd_packet)

    p = sub.add_parser("transition", help="transition profile as JSON")
    common(p, density=True)
    p.add_argument("--eps", default="0.02")
    p.add_argument("--time", default=None)
    p.add_argument("--mode", type=int, default=1)
    p.set_defaults(func=_cmd_transition)

    p = sub.add_parser("sweep", help="epsilon sweep with decay-rate fit")
    common(p)
    p.add_argument("--energy", required=True)
    p.add_argument("--eps", required=True)
    p.add_argument("--delta", default=None)
    p.add_argument("--mode", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationFailure as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return 2
    except SemiwaveError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
