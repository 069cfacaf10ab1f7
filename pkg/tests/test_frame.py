import numpy as np
import pytest
from scipy.integrate import quad

from semiwave import models
from semiwave.errors import GapTooSmall
from semiwave.frame import (
    canonical_polarization_direct, coupling_matrix, kato_transport,
    loop_prefactor, phase_functions, spectral_projectors,
)
from semiwave.modes import (
    branch_point_seed, locate_branch_point, refined_grid, track_modes,
)

E_MID = 1.5


@pytest.fixture(scope="module")
def adiab2():
    return models.get_model("adiabatic2")


@pytest.fixture(scope="module")
def adiab2_frame(adiab2):
    field = track_modes(adiab2, E_MID, refined_grid(adiab2, E_MID))
    return field, kato_transport(adiab2, E_MID, field)


# ---------------------------------------------------------------------------
# projectors
# ---------------------------------------------------------------------------

def test_projectors_diagonal_matrix():
    H = np.diag([1.0, 2.0, 3.0]).astype(complex)
    P = spectral_projectors(H, np.array([1.0, 2.0, 3.0]))
    for j in range(3):
        unit = np.zeros((3, 3))
        unit[j, j] = 1.0
        assert np.allclose(P[j], unit)


def test_projectors_match_resolvent_contour():
    rng = np.random.default_rng(1)
    H = rng.normal(size=(4, 4))
    ev = np.linalg.eigvals(H)
    while np.max(np.abs(ev.imag)) > 1e-12 or np.min(
            np.abs(np.subtract.outer(ev, ev) + np.eye(4))) < 0.2:
        H = rng.normal(size=(4, 4))
        ev = np.linalg.eigvals(H)
    ev = np.sort(ev.real)
    P = spectral_projectors(H.astype(complex), ev)
    # oracle: resolvent contour integral on a circle around each eigenvalue
    for j in range(4):
        radius = 0.45 * min(abs(ev[j] - ev[l]) for l in range(4) if l != j)
        thetas = np.linspace(0, 2 * np.pi, 401)[:-1]
        acc = np.zeros((4, 4), dtype=complex)
        for th in thetas:
            lam = ev[j] + radius * np.exp(1j * th)
            dlam = 1j * radius * np.exp(1j * th)
            acc += np.linalg.inv(lam * np.eye(4) - H) * dlam
        oracle = acc / (2j * np.pi * len(thetas)) * (2 * np.pi)
        assert np.max(np.abs(P[j] - oracle)) < 1e-9


def test_projectors_idempotent_on_model_samples(adiab2):
    from semiwave.symbol import companion
    for x in (-2.0, 0.0, 0.7):
        H = companion(adiab2, x, E_MID)
        ev = np.sort(np.linalg.eigvals(H).real)
        P = spectral_projectors(H, ev)
        for j in range(2):
            assert np.linalg.norm(P[j] @ P[j] - P[j]) < 1e-10
        assert np.linalg.norm(P.sum(axis=0) - np.eye(2)) < 1e-10


def test_projectors_reject_tiny_gap():
    H = np.diag([1.0, 1.0 + 1e-12]).astype(complex)
    with pytest.raises(GapTooSmall):
        spectral_projectors(H, np.array([1.0, 1.0 + 1e-12]))


# ---------------------------------------------------------------------------
# transport
# ---------------------------------------------------------------------------

def test_transport_constant_model_is_identity():
    c = models.get_model("const2")
    field = track_modes(c, E_MID)
    fr = kato_transport(c, E_MID, field)
    # frame vectors stay constant when the projectors do not move
    drift = np.max(np.abs(fr.phi - fr.phi[fr.base_index][None, :, :]))
    assert drift < 1e-10
    assert fr.transport_residual < 1e-12


def test_transport_residuals_adiabatic2(adiab2_frame):
    _, fr = adiab2_frame
    assert fr.transport_residual < 1e-7
    assert fr.intertwining_residual < 1e-8


def test_canonical_polarization_two_routes(adiab2, adiab2_frame):
    field, fr = adiab2_frame
    for j in (1, 2):
        direct = canonical_polarization_direct(adiab2, E_MID, field, j)
        transported = fr.phi[:, j - 1, :2]
        i0 = fr.base_index
        pivot = int(np.argmax(np.abs(transported[i0])))
        scale = transported[i0, pivot] / direct[i0, pivot]
        rel = (np.max(np.linalg.norm(transported - scale * direct, axis=1))
               / np.max(np.linalg.norm(transported, axis=1)))
        assert rel < 1e-7


# ---------------------------------------------------------------------------
# couplings
# ---------------------------------------------------------------------------

def test_coupling_zero_for_constant_model():
    c = models.get_model("const2")
    field = track_modes(c, E_MID)
    fr = kato_transport(c, E_MID, field)
    cm = coupling_matrix(fr, c, E_MID)
    assert np.max(np.abs(cm.a)) < 1e-12


def test_coupling_peak_value_adiabatic2(adiab2, adiab2_frame):
    # two-level mixing angle tan(theta) = delta/tanh(x) gives
    # |a_12(0)| = theta'(0)/2 = 1/(2 delta) = 2 at delta = 1/4
    field, fr = adiab2_frame
    cm = coupling_matrix(fr, adiab2, E_MID)
    i0 = fr.base_index
    assert abs(cm.a[i0, 0, 1]) == pytest.approx(2.0, abs=1e-6)
    assert abs(cm.a[i0, 1, 0]) == pytest.approx(2.0, abs=1e-6)
    assert cm.route_discrepancy < 1e-5


def test_coupling_diagonal_zero_and_tail(adiab2, adiab2_frame):
    field, fr = adiab2_frame
    cm = coupling_matrix(fr, adiab2, E_MID)
    assert np.max(np.abs(cm.a[:, [0, 1], [0, 1]])) == 0.0
    it = int(np.argmin(np.abs(field.grid - 15.0)))
    assert abs(cm.a[it, 0, 1]) < 1e-8


# ---------------------------------------------------------------------------
# phases
# ---------------------------------------------------------------------------

def test_phase_integral_scalar_tanh():
    m = models.get_model("scalar_tanh")
    field = track_modes(m, E_MID, refined_grid(m, E_MID))
    ph = phase_functions(field, m)
    assert ph.integral(3.0, 0) == pytest.approx(E_MID * np.log(np.cosh(3.0)), abs=1e-10)
    # omega(+inf, E) = E int_0^inf (tanh - 1) = -E ln 2, same on the left
    assert ph.omega_right[0] == pytest.approx(-E_MID * np.log(2), abs=1e-10)
    assert ph.omega_left[0] == pytest.approx(-E_MID * np.log(2), abs=1e-10)


def test_phase_antisymmetry(adiab2, adiab2_frame):
    field, _ = adiab2_frame
    ph = phase_functions(field, adiab2)
    for x in (-3.0, 0.0, 1.7):
        assert ph.delta(x, 0, 0) == pytest.approx(0.0, abs=1e-14)
        assert ph.delta(x, 0, 1) == pytest.approx(-ph.delta(x, 1, 0), abs=1e-12)
    assert ph.delta(0.0, 0, 1) == pytest.approx(0.0, abs=1e-14)


def test_phase_remainder_tail_decay(adiab2, adiab2_frame):
    # |r_j(x)| |x|^(1+nu) bounded on the tail
    field, _ = adiab2_frame
    ph = phase_functions(field, adiab2)
    xs = np.linspace(12.0, 19.5, 12)
    for j in range(2):
        prods = np.abs([ph.remainder(x, j, +1) for x in xs]) * xs ** 2
        assert prods.max() < 1e-6


def test_omega_against_quadrature_oracle(adiab2, adiab2_frame):
    field, _ = adiab2_frame
    ph = phase_functions(field, adiab2)
    rho_inf = np.hypot(1.0, adiab2.delta)
    for j, sgn in ((0, -1.0), (1, 1.0)):
        oracle = quad(lambda y: sgn * (np.hypot(np.tanh(y), adiab2.delta) - rho_inf),
                      0, 50, limit=200)[0]
        assert ph.omega_right[j] == pytest.approx(oracle, abs=1e-9)


# ---------------------------------------------------------------------------
# loop prefactors
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def adiab2_loop(adiab2, adiab2_frame):
    field, fr = adiab2_frame
    seed = branch_point_seed(adiab2, E_MID, (1, 2), field)
    bp = locate_branch_point(adiab2, E_MID, (1, 2), seed)
    return bp, loop_prefactor(adiab2, E_MID, bp, frame=fr)


def test_loop_prefactor_two_level(adiab2_loop):
    bp, lp = adiab2_loop
    assert lp.permutation == (2, 1)
    factors = np.exp(-1j * lp.theta)
    # real-symmetric two-level monodromy: one +1 and one -1, product -1
    assert factors[0] * factors[1] == pytest.approx(-1.0, abs=1e-7)
    assert sorted(np.round(factors.real).tolist()) == [-1.0, 1.0]
    assert np.max(np.abs(factors.imag)) < 1e-7


def test_trivial_loop_prefactor(adiab2, adiab2_frame):
    from semiwave.modes import BranchPoint
    _, fr = adiab2_frame
    # a tiny loop far from any branch point
    fake = BranchPoint(pair=(1, 2), z0=4.0 + 0.2j, loop_radius=0.05,
                       s_residual=0.0, s_prime=1.0)
    lp = loop_prefactor(adiab2, E_MID, fake, frame=fr)
    assert lp.permutation == (1, 2)
    assert np.max(np.abs(lp.theta)) < 1e-7


def test_double_traversal_composition(adiab2, adiab2_frame, adiab2_loop):
    # traversing twice composes the factors: theta_j(2 loop) =
    # theta_j + theta_{pi0(j)} mod 2 pi, and pi0^2 = id
    from semiwave.frame import _transport_along
    from semiwave.modes import canonical_loop, loop_points
    from semiwave.symbol import companion
    _, fr = adiab2_frame
    bp, lp = adiab2_loop
    pts = loop_points(canonical_loop(bp.z0, bp.loop_radius), 1600)
    double = np.concatenate([pts, pts[1:]])
    start = np.sort(np.linalg.eigvals(companion(models.get_model("adiabatic2"),
                                                0.0, E_MID)).real)
    W2, _ = _transport_along(models.get_model("adiabatic2"), E_MID, double, start)
    for j in range(2):
        transported = W2 @ fr.phi_base[j]
        target = fr.phi_base[j]          # pi0 squared = identity
        sigma = np.vdot(target, transported) / np.vdot(target, target)
        resid = np.linalg.norm(transported - sigma * target)
        assert resid / np.linalg.norm(transported) < 1e-5
        expected = np.exp(-1j * (lp.theta[j] + lp.theta[lp.permutation[j] - 1]))
        assert sigma == pytest.approx(expected, abs=1e-4)


def test_prefactor_product_radius_independent(adiab2, adiab2_frame, adiab2_loop):
    _, fr = adiab2_frame
    bp, lp = adiab2_loop
    lp_small = loop_prefactor(adiab2, E_MID, bp, frame=fr, radius=0.6 * bp.loop_radius)
    prod_ref = np.exp(-1j * lp.theta[0]) * np.exp(-1j * lp.theta[1])
    prod_small = np.exp(-1j * lp_small.theta[0]) * np.exp(-1j * lp_small.theta[1])
    assert prod_small == pytest.approx(prod_ref, abs=1e-6)
    assert np.isfinite(prod_small)


def test_polarization_tail_decay(adiab2, adiab2_frame):
    # || phi_j(x) - phi_j(+inf) || |x|^(1+nu) bounded on the tail
    field, fr = adiab2_frame
    tail = field.grid > 0.75 * field.grid[-1]
    xs = field.grid[tail]
    for j in range(2):
        drift = np.linalg.norm(fr.phi[tail, j, :] - fr.phi[-1, j, :][None, :],
                               axis=1)
        prods = drift * xs ** 2
        assert prods.max() < 1e-6
