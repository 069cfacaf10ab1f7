"""Acceptance suite: one test per criterion, printed as pass/fail lines.

Run with `pytest tests/test_acceptance.py -s` to see every line.  All
tolerances are fixed here; heavy pipelines are shared through module-scoped
fixtures.  Two checks are known-red measurement artifacts and carry the
analysis in their failure messages (see notes in the repository history):
the asymptotic-element ratio trend on the exactly solvable two-level model
(A3b) and the literal Gaussian-factor norm constant (A7a).
"""

import time

import numpy as np
import pytest

from semiwave import expr, models, packet, scatter
from semiwave.frame import loop_prefactor
from semiwave.modes import (
    branch_point_seed, detect_real_crossings, locate_branch_point, track_modes,
)
from semiwave.numerics import relative_l2_distance, trapezoid_l2
from semiwave.stationary import build_stationary

E_A2 = 1.5


def report(tag: str, ok: bool, detail: str) -> None:
    print(f"[{tag}] {'PASS' if ok else 'FAIL'} - {detail}")


# ---------------------------------------------------------------------------
# shared fixtures
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def adiab2_block():
    model = models.get_model("adiabatic2")
    data = build_stationary(model, E_A2)
    crossing = detect_real_crossings(model, E_A2)
    seed = branch_point_seed(model, E_A2, (1, 2), data.field)
    bp = locate_branch_point(model, E_A2, (1, 2), seed)
    act = scatter.action_integral(model, E_A2, bp, 1)
    pref = loop_prefactor(model, E_A2, bp, frame=data.frame)
    return {"model": model, "data": data, "crossing": crossing, "bp": bp,
            "action": act, "prefactor": pref}


@pytest.fixture(scope="module")
def bo2_profile():
    model = models.get_model("bo2")
    dens = packet.density_from_dict(models.density_defaults("bo2"),
                                    model.energy_window)
    return packet.transition_profile(model, dens, 1)


@pytest.fixture(scope="module")
def bo2_pipe():
    model = models.get_model("bo2")
    dens = packet.density_from_dict(models.density_defaults("bo2"),
                                    model.energy_window)
    return packet.SynthesisPipeline(model, dens, n_energy=200, j_in=1, dx=0.02)


# ---------------------------------------------------------------------------
# A1: exact-solution oracle on the solvable scalar model
# ---------------------------------------------------------------------------

def test_a1_exact_solution_oracle():
    t0 = time.time()
    model = models.get_model("scalar_tanh")
    dens = packet.density_from_dict(models.density_defaults("scalar_tanh"),
                                    model.energy_window)
    pipe = packet.SynthesisPipeline(model, dens, n_energy=80, dx=0.02)
    from semiwave.numerics import segment_gauss
    nodes, weights = segment_gauss(*model.energy_window, 400)
    q = dens.q(nodes, 1.0)

    def oracle(u):
        return (np.exp(-1j * np.outer(np.atleast_1d(u), nodes))
                * (weights * q)[None, :]).sum(axis=1)

    worst = 0.0
    for t in (-20.0, 0.0, 20.0):
        xg = pipe.field_grid(-30, 30, 0.04)
        fld = pipe.exact_field(1.0, t, xg)
        worst = max(worst, float(np.max(np.abs(
            fld.values[:, 0] - oracle(t + np.log(np.cosh(fld.x)))))))
    wall = time.time() - t0
    ok = worst < 1e-6 and wall < 10.0
    report("A1", ok, f"max abs err {worst:.2e} (tol 1e-6), wall {wall:.1f}s (<10s)")
    assert worst < 1e-6
    assert wall < 10.0


# ---------------------------------------------------------------------------
# A2: trivial scattering for the constant-coefficient model
# ---------------------------------------------------------------------------

def test_a2_trivial_smatrix():
    model = models.get_model("const2")
    data = build_stationary(model, E_A2)
    worst = 0.0
    for eps in (0.05, 0.02):
        rec = scatter.s_matrix(data, eps)
        worst = max(worst, float(np.linalg.norm(rec.S - np.eye(2), 2)))
    ok = worst < 1e-8
    report("A2", ok, f"max ||S - I|| = {worst:.2e} (tol 1e-8)")
    assert ok


# ---------------------------------------------------------------------------
# A3: Landau-Zener decay rate and amplitude-ratio trend
# ---------------------------------------------------------------------------

EPS_SWEEP = (0.1, 0.05, 1.0 / 30.0, 0.025, 0.02)


@pytest.fixture(scope="module")
def adiab2_sweep(adiab2_block):
    t0 = time.time()
    blk = adiab2_block
    amps, ratios = [], {}
    for eps in EPS_SWEEP:
        rec = scatter.s_matrix(blk["data"], eps)
        wk = scatter.wkb_element(blk["model"], E_A2, eps, 1, blk["crossing"],
                                 {(1, 2): blk["bp"]}, frame=blk["data"].frame,
                                 prefactors={(1, 2): blk["prefactor"]},
                                 actions={(1, 2): blk["action"]})
        amps.append(abs(rec.S[1, 0]))
        ratios[eps] = abs(rec.S[1, 0] / wk.value - 1.0)
    return {"amps": amps, "ratios": ratios, "wall": time.time() - t0}


def test_a3a_decay_rate_fit(adiab2_block, adiab2_sweep):
    rate, _ = scatter.decay_rate_fit(EPS_SWEEP, adiab2_sweep["amps"])
    target = adiab2_block["action"].adjusted.imag
    rel = abs(rate - target) / target
    wall = adiab2_sweep["wall"]
    ok = rel < 0.03 and wall < 180.0
    report("A3a", ok,
           f"fit rate {rate:.8f} vs Im action {target:.8f} (rel {rel:.2e}, "
           f"tol 3%), wall {wall:.0f}s (<180s)")
    assert rel < 0.03
    assert wall < 180.0


def test_a3b_amplitude_ratio_trend(adiab2_sweep):
    r005, r002 = adiab2_sweep["ratios"][0.05], adiab2_sweep["ratios"][0.02]
    ok = r002 < r005
    report("A3b", ok,
           f"|ratio-1| at eps=0.02 is {r002:.2e} vs {r005:.2e} at eps=0.05 "
           "(criterion: smaller at 0.02)")
    assert ok, (
        f"|ratio-1|(0.02)={r002:.3e} is not below |ratio-1|(0.05)={r005:.3e}. "
        "This two-level tanh model satisfies the asymptotic element formula to "
        "below the integrator noise floor (both measured deviations are ODE "
        "tolerance artifacts scaling like err_abs/|S21|, which grows as eps "
        "shrinks), so the trend gate compares noise floors; see the decisions "
        "ledger for the measurement study."
    )


# ---------------------------------------------------------------------------
# A4: delta-square law of the pair action
# ---------------------------------------------------------------------------

def test_a4_delta_square_law(adiab2_block):
    fit = scatter.avoided_crossing_fit(adiab2_block["model"], E_A2, (1, 2))
    ratios = []
    measured_over_D = []
    for delta in (0.05, 0.1, 0.2):
        m = models.get_model("adiabatic2", delta=delta)
        fld = track_modes(m, E_A2)
        seed = branch_point_seed(m, E_A2, (1, 2), fld)
        bp = locate_branch_point(m, E_A2, (1, 2), seed)
        act = scatter.action_integral(m, E_A2, bp, 1)
        ratios.append(abs(act.pair_diff.imag) / delta ** 2)
        measured_over_D.append(abs(act.pair_diff.imag) / (fit.D * delta ** 2))
    spread = (max(ratios) - min(ratios)) / np.mean(ratios)
    ok = spread < 0.05
    report("A4", ok,
           f"Im pair action / delta^2 = {np.round(ratios, 5).tolist()} "
           f"(spread {spread:.2%}, tol 5%); measured/(D delta^2) = "
           f"{np.round(measured_over_D, 4).tolist()} (convention factor "
           "logged, not gated)")
    assert ok


# ---------------------------------------------------------------------------
# A5: analyticity null test on every computed loop
# ---------------------------------------------------------------------------

def test_a5_analyticity_null(adiab2_block):
    loops = [adiab2_block["action"]]
    for delta in (0.05, 0.2):
        m = models.get_model("adiabatic2", delta=delta)
        fld = track_modes(m, E_A2)
        seed = branch_point_seed(m, E_A2, (1, 2), fld)
        bp = locate_branch_point(m, E_A2, (1, 2), seed)
        loops.append(scatter.action_integral(m, E_A2, bp, 1))
    b = models.get_model("bo2")
    fldb = track_modes(b, 2.25)
    for pair in ((1, 2), (3, 4)):
        seed = branch_point_seed(b, 2.25, pair, fldb)
        bp = locate_branch_point(b, 2.25, pair, seed)
        loops.append(scatter.action_integral(b, 2.25, bp, pair[0]))
    worst = max(abs(a.pair_sum) / (1e-9 * abs(a.pair_diff)) for a in loops)
    ok = worst < 1.0
    report("A5", ok,
           f"max |loop(k_i+k_j)| / (1e-9 |loop(k_i-k_j)|) = {worst:.3f} over "
           f"{len(loops)} loops")
    assert ok


# ---------------------------------------------------------------------------
# A6: transmitted-wave leading term (quadratic dispersion)
# ---------------------------------------------------------------------------

def test_a6a_leading_vs_closed_form(bo2_profile):
    t0 = time.time()
    prof = bo2_profile
    eps = 0.02
    worst = 0.0
    for t in (0.0, 100.0):
        M = prof.lambda2 + 1j * prof.d2E_dk2 * t
        width = float(np.sqrt(eps * abs(M) ** 2 / M.real))
        xc = -prof.dE_dk * t - prof.lambda1
        xg = np.linspace(xc - 9 * width, xc + 9 * width, 2400)
        lt = packet.leading_term(prof, eps, t, xg)
        gc = packet.gaussian_closed_form(prof, eps, t, xg)
        worst = max(worst, relative_l2_distance(lt.values, gc.values, xg))
    ok = worst < 1e-6
    report("A6a", ok, f"max rel L2 quadrature-vs-closed-form = {worst:.2e} "
                      f"(tol 1e-6), wall {time.time()-t0:.0f}s")
    assert ok


def test_a6b_leading_vs_numeric_coefficients(bo2_profile, bo2_pipe):
    t0 = time.time()
    prof, pipe = bo2_profile, bo2_pipe
    xc = -prof.lambda1
    xg = np.linspace(xc - 4, xc + 4, 401)
    rels = []
    for eps in (0.04, 0.02, 0.01):
        aw = pipe.asymptotic_field(eps, 0.0, +1, prof.n, xg)
        lt = packet.leading_term(prof, eps, 0.0, xg)
        rels.append(relative_l2_distance(lt.values, aw.values, xg))
    wall = time.time() - t0
    decreasing = rels[0] > rels[1] > rels[2]
    ok = decreasing and rels[-1] < 0.25 and wall < 300.0
    report("A6b", ok,
           f"rel L2 over eps (0.04, 0.02, 0.01) = "
           f"{np.round(rels, 4).tolist()} (decreasing={decreasing}, "
           f"last<0.25), wall {wall:.0f}s (<300s)")
    assert decreasing
    assert rels[-1] < 0.25
    assert wall < 300.0


# ---------------------------------------------------------------------------
# A7: norm law of the Gaussian momentum factor
# ---------------------------------------------------------------------------

def test_a7a_fourier_factor_norm(bo2_profile):
    prof = bo2_profile
    eps = 0.02
    xg = np.linspace(-prof.lambda1 - 12, -prof.lambda1 + 12, 4001)
    lt = packet.leading_term(prof, eps, 0.0, xg)
    pref = float(np.linalg.norm(packet._leading_prefactor(prof, eps, 0)))
    measured = lt.l2_norm() / pref
    target = (2 * np.pi * eps / (prof.dE_dk ** 2
                                 * float(prof.alpha_spline(prof.E_star, 2)))) ** 0.25
    rel = abs(measured - target) / target
    ok = rel < 0.01
    report("A7a", ok,
           f"Fourier-factor norm {measured:.8f} vs (2 pi eps / Re lambda2)^(1/4) "
           f"= {target:.8f} (rel {rel:.2%}, tol 1%)")
    assert ok, (
        f"measured {measured:.8f} vs literal constant {target:.8f} "
        f"(rel {rel:.2%}). The measured norm equals "
        f"(pi eps / Re lambda2)^(1/4) = "
        f"{(np.pi * eps / prof.lambda2.real) ** 0.25:.8f} to 1e-6: the "
        "Gaussian integral of exp(-Re lambda2 z^2) is sqrt(pi / Re lambda2), "
        "so the quoted 2 pi constant is off by 2^(1/4); see the decisions "
        "ledger."
    )


def test_a7b_norm_time_invariance(bo2_profile):
    prof = bo2_profile
    eps = 0.02
    norms = []
    for t in (0.0, 50.0, 200.0):
        xc = -prof.dE_dk * t - prof.lambda1
        M = prof.lambda2 + 1j * prof.d2E_dk2 * t
        width = float(np.sqrt(eps * abs(M) ** 2 / M.real))
        xg = np.linspace(xc - 14 * width, xc + 14 * width, 8001)
        norms.append(packet.gaussian_closed_form(prof, eps, t, xg).l2_norm())
    drift = (max(norms) - min(norms)) / norms[0]
    ok = drift < 1e-8
    report("A7b", ok, f"leading-term norm drift over t in (0, 50, 200) = "
                      f"{drift:.2e} (tol 1e-8)")
    assert ok


# ---------------------------------------------------------------------------
# A8: localization of the transmitted packet
# ---------------------------------------------------------------------------

def test_a8_localization(bo2_profile):
    prof = bo2_profile
    eps, t = 0.02, 200.0
    cfg = packet.DiagnosticsConfig(alpha_loc=0.7, tau=0.4)
    xc = -prof.dE_dk * t - prof.lambda1
    M = prof.lambda2 + 1j * prof.d2E_dk2 * t
    width = float(np.sqrt(eps * abs(M) ** 2 / M.real))
    span = abs(t) ** 0.7 + eps ** 0.4 * abs(prof.dE_dk) * t + 20 * width
    xg = np.linspace(xc - span, xc + span, 6001)
    fld = packet.gaussian_closed_form(prof, eps, t, xg)
    rep = packet.localization_report(fld, prof, cfg, eps)
    ok = rep["fraction"] >= 0.99 and rep["center_offset"] <= rep["center_bound"]
    report("A8", ok,
           f"mass fraction in C_t = {rep['fraction']:.6f} (>=0.99), center "
           f"offset {rep['center_offset']:.3f} <= |t|^0.7 = {rep['center_bound']:.1f}")
    assert rep["fraction"] >= 0.99
    assert rep["center_offset"] <= rep["center_bound"]


# ---------------------------------------------------------------------------
# A9: scattering convergence of glued asymptotics
# ---------------------------------------------------------------------------

def _glued_products(pipe, eps, times, n_modes, x_lo_of_t, x_hi_of_t, dx):
    products = []
    for t in times:
        xg = pipe.field_grid(x_lo_of_t(t), x_hi_of_t(t), dx)
        exact = pipe.exact_field(eps, t, xg)
        glued_sum = None
        for j in range(1, n_modes + 1):
            left = pipe.asymptotic_field(eps, t, -1, j, exact.x)
            right = pipe.asymptotic_field(eps, t, +1, j, exact.x)
            g = packet.glue_asymptotic(left, right)
            glued_sum = g.values if glued_sum is None else glued_sum + g.values
        err = trapezoid_l2(exact.values - glued_sum, exact.x)
        products.append(err * abs(t))
    return products


def test_a9_scattering_convergence():
    t0 = time.time()
    times = (10.0, 20.0, 40.0)
    scalar = models.get_model("scalar_tanh")
    dens_s = packet.EnergyDensity(E0=1.3, g=10.0, G=expr.parse("10*(E-1.3)^2/2"),
                                  J=expr.parse("0"), P=expr.parse("1"),
                                  window=scalar.energy_window)
    pipe_s = packet.SynthesisPipeline(scalar, dens_s, n_energy=120, dx=0.02)
    prod_s = _glued_products(pipe_s, 1.0, times, 1,
                             lambda t: -t - 14, lambda t: t + 14, 0.05)

    a2 = models.get_model("adiabatic2")
    dens_a = packet.EnergyDensity(E0=1.45, g=6.0, G=expr.parse("6*(E-1.45)^2/2"),
                                  J=expr.parse("0"), P=expr.parse("1"),
                                  window=a2.energy_window)
    pipe_a = packet.SynthesisPipeline(a2, dens_a, n_energy=280, j_in=1, dx=0.015)
    prod_a = _glued_products(pipe_a, 0.05, times, 2,
                             lambda t: -t - 25, lambda t: 8, 0.015)

    ratio_s = max(prod_s) / min(prod_s)
    ratio_a = max(prod_a) / min(prod_a)
    ok = ratio_s < 2.0 and ratio_a < 2.0
    report("A9", ok,
           f"||exact-glued|| * t: scalar {np.round(prod_s, 5).tolist()} "
           f"(max/min {ratio_s:.2f}), two-level {np.round(prod_a, 5).tolist()} "
           f"(max/min {ratio_a:.2f}); both < 2, wall {time.time()-t0:.0f}s")
    assert ratio_s < 2.0
    assert ratio_a < 2.0


# ---------------------------------------------------------------------------
# A10: structural invariant battery
# ---------------------------------------------------------------------------

def test_a10_structural_invariants(adiab2_block, bo2_pipe):
    from semiwave.frame import spectral_projectors
    from semiwave.symbol import companion
    blk = adiab2_block
    model, data = blk["model"], blk["data"]
    lines = []

    # projector identities on model samples
    worst_p = 0.0
    for x in (-1.0, 0.0, 0.5):
        H = companion(model, x, E_A2)
        ev = np.sort(np.linalg.eigvals(H).real)
        P = spectral_projectors(H, ev)
        worst_p = max(worst_p, float(np.linalg.norm(P.sum(0) - np.eye(2))))
        for j in range(2):
            worst_p = max(worst_p,
                          float(np.linalg.norm(P[j] @ P[j] - P[j])),
                          float(np.linalg.norm(H @ P[j] - ev[j] * P[j])))
    lines.append(f"projectors {worst_p:.1e}")
    assert worst_p < 1e-9

    # transport residuals
    lines.append(f"kato {data.frame.transport_residual:.1e}")
    assert data.frame.transport_residual < 1e-7
    assert data.frame.intertwining_residual < 1e-8

    # coupling routes and zero diagonal
    lines.append(f"routes {data.coupling.route_discrepancy:.1e}")
    assert data.coupling.route_discrepancy < 1e-5
    assert float(np.max(np.abs(np.diagonal(data.coupling.a, axis1=1, axis2=2)))) == 0.0

    # Parseval for the bo2 pipeline's asymptotic wave; the x-window stays
    # inside the range the energy quadrature resolves (|x| k'(E) width / eps
    # below the node budget) and the packet is ~1 wide, so truncation tails
    # are far below the tolerance
    eps = 0.04
    xg = np.linspace(-25, 25, 4001)
    aw = bo2_pipe.asymptotic_field(eps, 0.0, +1, 1, xg)
    k_norm = bo2_pipe.momentum_norm(eps, +1, 1)
    parseval = abs(aw.l2_norm() - k_norm) / k_norm
    lines.append(f"parseval {parseval:.1e}")
    assert parseval < 1e-6

    # Schwarz symmetries: expression level and action conjugation
    z = 0.7 + 0.21j
    e = expr.parse("tanh(x)*exp(-x^2)+sech(x)")
    schwarz = abs(expr.evaluate(e, {"x": np.conj(z)})
                  - np.conj(expr.evaluate(e, {"x": z})))
    import dataclasses
    act_low = scatter.action_integral(
        model, E_A2, dataclasses.replace(blk["bp"], z0=blk["bp"].z0.conjugate()), 1)
    schwarz_act = abs(act_low.raw - np.conj(blk["action"].raw))
    lines.append(f"schwarz {max(schwarz, schwarz_act):.1e}")
    assert schwarz < 1e-12
    assert schwarz_act < 1e-9

    # monodromy squares to the identity
    pref = blk["prefactor"]
    pi0 = pref.permutation
    squared = tuple(pi0[p - 1] for p in pi0)
    lines.append(f"pi0={pi0}")
    assert squared == (1, 2)

    report("A10", True, "; ".join(lines))
