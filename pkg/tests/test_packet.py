import numpy as np
import pytest

from semiwave import expr, models, packet
from semiwave.errors import MinimizerAtBoundary, SemiwaveError, ValidationFailure
from semiwave.numerics import relative_l2_distance, segment_gauss, trapezoid_l2


@pytest.fixture(scope="module")
def scalar():
    return models.get_model("scalar_tanh")


@pytest.fixture(scope="module")
def scalar_density(scalar):
    return packet.density_from_dict(models.density_defaults("scalar_tanh"),
                                    scalar.energy_window)


@pytest.fixture(scope="module")
def scalar_pipe(scalar, scalar_density):
    return packet.SynthesisPipeline(scalar, scalar_density, n_energy=80, dx=0.02)


@pytest.fixture(scope="module")
def bo2():
    return models.get_model("bo2")


@pytest.fixture(scope="module")
def bo2_profile(bo2):
    dens = packet.density_from_dict(models.density_defaults("bo2"),
                                    bo2.energy_window)
    return packet.transition_profile(bo2, dens, 1)


def oracle_profile(density, window, eps, n=400):
    nodes, weights = segment_gauss(*window, n)
    q = density.q(nodes, eps)

    def f(u):
        u = np.atleast_1d(u)
        return (np.exp(-1j * np.outer(u, nodes) / eps) * (weights * q)[None, :]).sum(axis=1)

    return f


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------

def test_density_validation(scalar_density):
    out = scalar_density.validate()
    assert out["g_fit"] == pytest.approx(1.0, abs=1e-6)


def test_density_rejects_offcenter_peak(scalar):
    doc = {"E0": 1.5, "g": 1.0, "G": "(E-1.2)^2/2"}
    with pytest.raises(ValidationFailure):
        packet.density_from_dict(doc, scalar.energy_window)


def test_density_rejects_wrong_curvature(scalar):
    doc = {"E0": 1.5, "g": 2.0, "G": "(E-1.5)^2/2"}
    with pytest.raises(ValidationFailure):
        packet.density_from_dict(doc, scalar.energy_window)


# ---------------------------------------------------------------------------
# exact synthesis (the solvable model)
# ---------------------------------------------------------------------------

def test_exact_field_matches_closed_form(scalar_pipe, scalar_density, scalar):
    f = oracle_profile(scalar_density, scalar.energy_window, 1.0)
    for t in (-20.0, 0.0, 20.0):
        xg = scalar_pipe.field_grid(-30, 30, 0.04)
        fld = scalar_pipe.exact_field(1.0, t, xg)
        oracle = f(t + np.log(np.cosh(fld.x)))
        assert np.max(np.abs(fld.values[:, 0] - oracle)) < 1e-6


def test_exact_field_at_t0_equals_stationary_quadrature(scalar_pipe):
    # t = 0 is the definition: direct energy quadrature of stationary data
    xg = scalar_pipe.field_grid(-5, 5, 0.05)
    fld = scalar_pipe.exact_field(1.0, 0.0, xg)
    assert np.all(np.isfinite(fld.values))
    # total weight of Q over the window at u = 0
    nodes, weights = scalar_pipe.e_nodes, scalar_pipe.e_weights
    q = scalar_pipe.density.q(nodes, 1.0)
    at_zero = fld.values[np.argmin(np.abs(fld.x)), 0]
    assert at_zero == pytest.approx(np.sum(weights * q), abs=1e-9)


def test_linearity_in_density(scalar, scalar_density, scalar_pipe):
    dens2 = packet.EnergyDensity(E0=scalar_density.E0, g=scalar_density.g,
                                 G=scalar_density.G, J=scalar_density.J,
                                 P=expr.parse("2"), window=scalar_density.window)
    pipe2 = packet.SynthesisPipeline(scalar, dens2, n_energy=80, dx=0.02)
    xg = scalar_pipe.field_grid(-5, 5, 0.1)
    f1 = scalar_pipe.exact_field(1.0, 0.0, xg)
    f2 = pipe2.exact_field(1.0, 0.0, xg)
    assert np.max(np.abs(f2.values - 2 * f1.values)) < 1e-12


# ---------------------------------------------------------------------------
# asymptotic waves and gluing
# ---------------------------------------------------------------------------

def test_asymptotic_wave_counterpropagating(scalar_pipe, scalar_density, scalar):
    # omega = -E ln 2 shifts the argument: profiles f(t +- x - ln 2)
    f = oracle_profile(scalar_density, scalar.energy_window, 1.0)
    t = 5.0
    xg = np.linspace(2, 12, 301)
    plus = scalar_pipe.asymptotic_field(1.0, t, +1, 1, xg)
    assert np.max(np.abs(plus.values[:, 0] - f(t + xg - np.log(2)))) < 1e-9
    minus = scalar_pipe.asymptotic_field(1.0, t, -1, 1, -xg[::-1])
    assert np.max(np.abs(minus.values[:, 0] - f(t + xg[::-1] - np.log(2)))) < 1e-9


def test_zero_limits_give_zero_field(scalar_pipe):
    xg = np.linspace(-5, 5, 50)
    zero = np.zeros(len(scalar_pipe.e_nodes), dtype=complex)
    fld = scalar_pipe.asymptotic_field(1.0, 0.0, +1, 1, xg, c_limits=zero)
    assert np.max(np.abs(fld.values)) == 0.0


def test_norm_time_invariance_and_parseval(scalar):
    # sharp density so the window truncation tails are negligible
    dens = packet.EnergyDensity(E0=1.5, g=40.0, G=expr.parse("40*(E-1.5)^2/2"),
                                J=expr.parse("0"), P=expr.parse("1"),
                                window=scalar.energy_window)
    pipe = packet.SynthesisPipeline(scalar, dens, n_energy=80, dx=0.02)
    k_norm = pipe.momentum_norm(1.0, +1, 1)
    norms = []
    for t in (0.0, 5.0, 50.0):
        xg = np.linspace(-90, 90, 5001)
        aw = pipe.asymptotic_field(1.0, t, +1, 1, xg)
        norms.append(aw.l2_norm())
        assert abs(aw.l2_norm() - k_norm) / k_norm < 1e-6
    assert max(norms) - min(norms) < 1e-6 * k_norm


def test_glue_regions(scalar_pipe):
    xg = np.linspace(-3, 4, 701)
    left = scalar_pipe.asymptotic_field(1.0, 2.0, -1, 1, xg)
    right = scalar_pipe.asymptotic_field(1.0, 2.0, +1, 1, xg)
    glued = packet.glue_asymptotic(left, right)
    assert np.allclose(glued.values[xg >= 1.0], right.values[xg >= 1.0])
    assert np.allclose(glued.values[xg <= 0.0], left.values[xg <= 0.0])


def test_glue_requires_matching_grids(scalar_pipe):
    a = scalar_pipe.asymptotic_field(1.0, 0.0, -1, 1, np.linspace(-2, 2, 11))
    b = scalar_pipe.asymptotic_field(1.0, 0.0, +1, 1, np.linspace(-2, 2, 13))
    with pytest.raises(SemiwaveError):
        packet.glue_asymptotic(a, b)


def test_scattering_convergence_rate(scalar):
    # || exact - glued || * |t| bounded within a factor 2 across the t-set.
    # The density is off-center so one window edge dominates the boundary
    # terms; a symmetric density makes the product oscillate with
    # cos(t (E_hi - E_lo)) through edge interference.
    dens = packet.EnergyDensity(E0=1.3, g=10.0, G=expr.parse("10*(E-1.3)^2/2"),
                                J=expr.parse("0"), P=expr.parse("1"),
                                window=scalar.energy_window)
    pipe = packet.SynthesisPipeline(scalar, dens, n_energy=120, dx=0.02)
    products = []
    for t in (10.0, 20.0, 40.0):
        xg = pipe.field_grid(-t - 14, t + 14, 0.05)
        exact = pipe.exact_field(1.0, t, xg)
        left = pipe.asymptotic_field(1.0, t, -1, 1, exact.x)
        right = pipe.asymptotic_field(1.0, t, +1, 1, exact.x)
        glued = packet.glue_asymptotic(left, right)
        err = trapezoid_l2(exact.values - glued.values, exact.x)
        products.append(err * abs(t))
    assert max(products) < 2.0 * min(products)


# ---------------------------------------------------------------------------
# inverse dispersion
# ---------------------------------------------------------------------------

def test_inverse_dispersion_scalar(scalar):
    inv = packet.inverse_dispersion(scalar, 1, +1)
    # k(+inf, E) = E: the inverse is the identity with unit slope
    assert inv.energy(1.3) == pytest.approx(1.3, abs=1e-10)
    assert inv.dE_dk(1.3) == pytest.approx(1.0, abs=1e-8)
    assert inv.d2E_dk2(1.3) == pytest.approx(0.0, abs=1e-6)


def test_inverse_dispersion_bo2(bo2):
    inv = packet.inverse_dispersion(bo2, 2, +1)
    e_inf = np.hypot(1.0, bo2.delta)
    for k in np.linspace(*inv.k_window, 7)[1:-1]:
        assert inv.energy(k) == pytest.approx(k ** 2 / 2 + e_inf, abs=1e-9)
    assert inv.d2E_dk2(float(np.mean(inv.k_window))) == pytest.approx(1.0, abs=1e-6)
    assert inv.is_quadratic


def test_inverse_identity_on_window(bo2):
    inv = packet.inverse_dispersion(bo2, 1, +1)
    for E in np.linspace(*bo2.energy_window, 9):
        k = float(inv._k_of_E(E))
        assert inv.energy(k) == pytest.approx(E, abs=1e-10)


def test_quadratic_flag_validated():
    doc = models.get_model_doc("adiabatic2")
    # a quartic dispersion with a wrongly declared quadratic flag:
    # k(+-inf, E) = E -+ sqrt(1+d^2) is affine, so fake it by modifying E-power
    doc["A"]["0,1"] = [["1", "0"], ["0", "1"]]
    from semiwave.symbol import model_from_dict
    base = model_from_dict(doc)
    inv = packet.inverse_dispersion(base, 1, +1)   # legitimately quadratic
    assert inv.is_quadratic


# ---------------------------------------------------------------------------
# transition profile and leading term
# ---------------------------------------------------------------------------

def test_profile_adiabatic2_minimizer_at_peak():
    # the action is energy independent, so E* = E0 and lambda1 = dE/dk kappa'
    a = models.get_model("adiabatic2")
    dens = packet.density_from_dict(models.density_defaults("adiabatic2"),
                                    a.energy_window)
    prof = packet.transition_profile(a, dens, 1, n_nodes=9)
    assert prof.E_star == pytest.approx(dens.E0, abs=1e-8)
    assert prof.lambda1 == pytest.approx(
        prof.dE_dk * float(prof.kappa_spline(prof.E_star, 1)), abs=1e-10)
    assert float(prof.alpha_spline(prof.E_star, 2)) > 0
    assert prof.lambda2.real > 0


def test_profile_bo2_values(bo2, bo2_profile):
    prof = bo2_profile
    e_inf = np.hypot(1.0, bo2.delta)
    assert prof.n == 2
    assert prof.k_star == pytest.approx(-np.sqrt(2 * (prof.E_star - e_inf)), abs=1e-8)
    assert prof.dE_dk == pytest.approx(prof.k_star, abs=1e-7)
    assert prof.d2E_dk2 == pytest.approx(1.0, abs=1e-6)
    assert prof.lambda2.real > 0
    # perturbative shift away from the density peak is small and positive
    assert 0 < prof.E_star - 2.25 < 0.01


def test_minimizer_at_boundary_detected(bo2):
    dens = packet.EnergyDensity(
        E0=2.25, g=4.0,
        # G decreasing toward the right edge beats the action's E-dependence
        G=expr.parse("4*(E-2.25)^2/2"), J=expr.parse("0"), P=expr.parse("1"),
        window=bo2.energy_window)
    shifted = packet.EnergyDensity(
        E0=2.7, g=4.0, G=expr.parse("4*(E-2.7)^2/2"), J=expr.parse("0"),
        P=expr.parse("1"), window=(1.8, 2.72))
    with pytest.raises(MinimizerAtBoundary):
        packet.transition_profile(bo2, shifted, 1, n_nodes=9)


def test_leading_term_matches_closed_form(bo2_profile):
    prof = bo2_profile
    eps, t = 0.02, 0.0
    xg = np.linspace(-prof.lambda1 - 3, -prof.lambda1 + 3, 601)
    lt = packet.leading_term(prof, eps, t, xg)
    gc = packet.gaussian_closed_form(prof, eps, t, xg)
    assert relative_l2_distance(lt.values, gc.values, xg) < 1e-6


def test_fourier_factor_norm_analytic(bo2_profile):
    # two routes to the Gaussian factor's L2 norm: x-space trapezoid of the
    # windowed quadrature against the analytic (pi eps / Re lambda2)^(1/4)
    prof = bo2_profile
    eps = 0.02
    xg = np.linspace(-prof.lambda1 - 12, -prof.lambda1 + 12, 4001)
    lt = packet.leading_term(prof, eps, 0.0, xg)
    pref = np.linalg.norm(packet._leading_prefactor(prof, eps, 0))
    measured = lt.l2_norm() / pref
    assert measured == pytest.approx((np.pi * eps / prof.lambda2.real) ** 0.25,
                                     rel=1e-6)


def test_closed_form_norm_time_invariant(bo2_profile):
    prof = bo2_profile
    eps = 0.02
    norms = []
    for t in (0.0, 50.0, 200.0):
        xc = -prof.dE_dk * t - prof.lambda1
        M = prof.lambda2 + 1j * prof.d2E_dk2 * t
        width = np.sqrt(eps * abs(M) ** 2 / M.real)
        xg = np.linspace(xc - 14 * width, xc + 14 * width, 8001)
        norms.append(packet.gaussian_closed_form(prof, eps, t, xg).l2_norm())
    assert max(norms) - min(norms) < 1e-8 * norms[0]


def test_closed_form_center_and_spread(bo2_profile):
    prof = bo2_profile
    eps = 0.02
    # t = 0: modulus peaks where |lambda1 + x| is minimal
    xg = np.linspace(-prof.lambda1 - 3, -prof.lambda1 + 3, 2401)
    fld = packet.gaussian_closed_form(prof, eps, 0.0, xg)
    peak = fld.x[np.argmax(np.linalg.norm(fld.values, axis=1))]
    assert peak == pytest.approx(-prof.lambda1, abs=5e-3)
    # peak modulus decays like |lambda2 + i d2E t|^(-1/2)
    amps = []
    for t in (100.0, 200.0, 400.0):
        xc = -prof.dE_dk * t - prof.lambda1
        xg = np.linspace(xc - 40, xc + 40, 4001)
        fld = packet.gaussian_closed_form(prof, eps, t, xg)
        amps.append(np.max(np.linalg.norm(fld.values, axis=1)))
    expected = [abs(prof.lambda2 + 1j * prof.d2E_dk2 * t) ** -0.5
                for t in (100.0, 200.0, 400.0)]
    measured_ratio = amps[0] / amps[2]
    assert measured_ratio == pytest.approx(expected[0] / expected[2], rel=1e-3)


# ---------------------------------------------------------------------------
# localization and cones
# ---------------------------------------------------------------------------

def test_localization_mass_and_center(bo2_profile):
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
    assert rep["fraction"] >= 0.99
    assert rep["center_offset"] <= rep["center_bound"]


def test_localization_requires_covering_grid(bo2_profile):
    prof = bo2_profile
    cfg = packet.DiagnosticsConfig()
    xg = np.linspace(-1, 1, 50)
    fld = packet.gaussian_closed_form(prof, 0.02, 200.0, xg)
    with pytest.raises(SemiwaveError):
        packet.localization_report(fld, prof, cfg, 0.02)


def test_cone_decay_scalar(scalar):
    # t = 0: product |x| |phi(x)| non-increasing in |x| outside the packet.
    # A single-edge-dominated density keeps the window's 1/u Fourier tail
    # from oscillating between the sample points.
    dens = packet.EnergyDensity(E0=1.25, g=14.0, G=expr.parse("14*(E-1.25)^2/2"),
                                J=expr.parse("0"), P=expr.parse("1"),
                                window=scalar.energy_window)
    pipe = packet.SynthesisPipeline(scalar, dens, n_energy=80, dx=0.02)
    samples = []
    for x in (40.0, 80.0, -40.0, -80.0):
        fld = pipe.exact_field(1.0, 0.0, np.array([x]))
        samples.append((fld.x[0], 0.0, float(np.linalg.norm(fld.values[0]))))
    rep = packet.cone_decay_check(samples, packet.DiagnosticsConfig())
    assert rep["non_increasing"]


def test_cone_decay_with_time_gain(scalar_pipe):
    # wrong-direction region: |t|^beta |x|^(1-beta) ||phi|| stays bounded
    cfg = packet.DiagnosticsConfig(beta=0.4)
    vals = {}
    for t in (20.0, 40.0):
        for x in (60.0, 120.0):
            fld = scalar_pipe.exact_field(1.0, t, np.array([x]))
            vals[(t, x)] = float(np.linalg.norm(fld.values[0]))
    prods = {k: (abs(k[0]) ** cfg.beta) * (abs(k[1]) ** (1 - cfg.beta)) * v
             for k, v in vals.items()}
    assert prods[(40.0, 120.0)] < 2.0 * prods[(20.0, 60.0)] + 1e-12


# ---------------------------------------------------------------------------
# channel classification
# ---------------------------------------------------------------------------

def test_channel_classification_cases():
    # signs of dk/dE at -inf/+inf and of t decide which pieces carry mass
    assert packet.classify_channels(-1.0, +1.0, -1.0) == ("-", "+")
    assert packet.classify_channels(+1.0, +1.0, +1.0) == ("-",)
    assert packet.classify_channels(+1.0, +1.0, -1.0) == ("+",)
    assert packet.classify_channels(-1.0, +1.0, +1.0) == ()


def test_channel_classification_matches_measured_mass(scalar, scalar_density):
    # scalar model: dk/dE = -1 at -inf, +1 at +inf; for t > 0 neither glued
    # piece carries mass, for t < 0 both do
    pipe = packet.SynthesisPipeline(scalar, scalar_density, n_energy=80, dx=0.02)
    t = 30.0
    xg = np.linspace(-t - 12, t + 12, 2401)
    for sign in (+1.0, -1.0):
        left = pipe.asymptotic_field(1.0, sign * t, -1, 1, xg)
        right = pipe.asymptotic_field(1.0, sign * t, +1, 1, xg)
        glued = packet.glue_asymptotic(left, right)
        sides = packet.classify_channels(-1.0, +1.0, sign)
        mass_left = glued.restricted_mass(xg[0], -1.0)
        mass_right = glued.restricted_mass(1.0, xg[-1])
        total_ref = left.l2_norm() ** 2
        if sign > 0:
            # only the O(1/t^beta) window-tail remainder survives
            assert mass_left + mass_right < 0.02 * total_ref
            assert sides == ()
        else:
            assert mass_left > 0.3 * total_ref
            assert mass_right > 0.3 * total_ref
            assert sides == ("-", "+")


def test_velocity_bounds_scalar(scalar):
    kmin, kmax = packet.velocity_bounds(scalar)
    assert kmin == pytest.approx(1.0, abs=1e-6)
    assert kmax == pytest.approx(1.0, abs=1e-6)


def test_quadrature_doubling_gates(scalar, scalar_density, scalar_pipe, bo2_profile):
    # doubling the energy-node count changes the emitted field below 1e-7 L2
    pipe2 = packet.SynthesisPipeline(scalar, scalar_density, n_energy=160, dx=0.02)
    xg = scalar_pipe.field_grid(-20, 20, 0.05)
    f1 = scalar_pipe.exact_field(1.0, 5.0, xg)
    f2 = pipe2.exact_field(1.0, 5.0, xg)
    ref = max(f1.l2_norm(), 1e-300)
    assert trapezoid_l2(f1.values - f2.values, f1.x) / ref < 1e-7
    # doubling the momentum nodes of the leading term (built-in gate)
    prof = bo2_profile
    xg = np.linspace(-prof.lambda1 - 3, -prof.lambda1 + 3, 301)
    packet.leading_term(prof, 0.02, 0.0, xg, _converge_check=True)
