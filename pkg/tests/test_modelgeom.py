import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from conftest import rank_two_model
from gmn_forge import modeldata as mdl
from gmn_forge import modelgeom as mg
from gmn_forge import semiflat as sf
from gmn_forge.forms import (PotentialConnection, basis_one_forms, exterior_derivative, fd_jacobian,
                             holo_symplectic_certificate, wedge)
from gmn_forge.modeldata import Charge, FieldPoint, ModelError

TWO_PI = 2 * np.pi


def _point(md, rng, zeta=1.0, scale=0.7):
    r = md.r
    while True:
        u = scale * (rng.uniform(-1, 1, r) + 1j * rng.uniform(-1, 1, r))
        if np.min(np.abs(mdl.light_Z(md, u))) > 0.05:
            break
    return FieldPoint.make(u, rng.uniform(0.2, TWO_PI - 0.2, r), rng.uniform(0, TWO_PI, r), zeta)


def _dark(md):
    return md.with_lights([mdl.LightCharge(lc.c, lc.z0, lc.theta0, 0, lc.cut) for lc in md.lights])


# -- sectorial decompositions ---------------------------------------------------

def test_good_decomposition_single_light(ov):
    # Z = u at u = -1 puts the BPS ray of +gamma on angle 0
    dec = mg.good_decomposition(ov, [-1.0], K=5)
    w = np.pi / 5
    assert abs(np.mod(dec.phi0, w)) > 1e-3
    assert abs(dec.margin(mg.bps_angles(ov, [-1.0]).ravel()) - w / 2) < 1e-12
    assert len(dec.rays()) == 10


def test_goodness_false_on_ray(ov):
    dec = mg.SectorDecomposition(5, 0.0)
    assert not dec.is_good(mg.bps_angles(ov, [-1.0]).ravel())
    with pytest.raises(ModelError):
        mg.ymodel(ov, Charge.magnetic(ov, 0), FieldPoint.make([-1.0], [0.3], [0.2], 0.5j), dec)
    with pytest.raises(ValueError):
        mg.SectorDecomposition(4, 0.1)


def test_decomposition_covers_all_light_rays(multi):
    u = [1.1 + 0.5j]
    dec = mg.good_decomposition(multi, u)
    ang = mg.bps_angles(multi, u).ravel()
    assert ang.size == 8
    bound = (np.pi / dec.K) / (4 * multi.n_lights)
    assert dec.margin(ang) >= bound
    assert all(1 <= dec.sector_index(a) <= 2 * dec.K for a in ang)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0, TWO_PI), st.integers(5, 8))
def test_decomposition_margin_property(rad, arg, K):
    # the chosen base angle is optimal against a brute-force scan
    md = mdl.build_multi_ov([0.4, 0.4, -0.3, -0.5], [0.1, 0.2, 0.3, 0.4])
    u = [rad * np.exp(1j * arg)]
    if np.min(np.abs(mdl.light_Z(md, u))) < 1e-6:
        return
    ang = mg.bps_angles(md, u).ravel()
    dec = mg.good_decomposition(md, u, K)
    w = np.pi / K
    scan = max(mg.SectorDecomposition(K, p).margin(ang) for p in np.linspace(0, w, 2001))
    assert dec.margin(ang) >= scan - 1e-12
    assert 0 <= dec.phi0 < w


# -- ray integrals -------------------------------------------------------------------

def _on_ray_setup(md, u):
    Z = mdl.light_Z(md, u)[0]
    return Z, float(np.angle(-Z))


def test_ray_integral_jump(ov):
    u = [0.6 + 0.4j]
    Z, phi = _on_ray_setup(ov, u)
    th = mdl.light_theta(ov, [0.9])[0]
    for rad in (0.3, 0.8, 2.0):
        zeta = rad * np.exp(1j * phi)
        pt = FieldPoint.make(u, [0.9], [0.3], zeta)
        jump = mg.ray_integral(ov, 0, 1, pt, phi, "-") - mg.ray_integral(ov, 0, 1, pt, phi, "+")
        X = np.exp(Z / zeta + 1j * th + zeta * np.conj(Z))
        assert abs(jump - 4j * np.pi * np.log1p(-X)) < 1e-9


def test_ray_integral_against_direct_quadrature(ov):
    u = [0.6 + 0.4j]
    Z, phi = _on_ray_setup(ov, u)
    th = mdl.light_theta(ov, [0.9])[0]
    zeta = 0.9 * np.exp(1j * (phi + 0.7))
    pt = FieldPoint.make(u, [0.9], [0.3], zeta)

    def g(s, part):
        zp = np.exp(1j * phi + s)
        X = np.exp(Z / zp + 1j * th + zp * np.conj(Z))
        v = (zp + zeta) / (zp - zeta) * np.log(1 - X)
        return v.real if part == 0 else v.imag

    ref = sum(integrate.quad(g, -40, 40, args=(k,), epsabs=1e-13, limit=400)[0] * (1j) ** k for k in (0, 1))
    assert abs(mg.ray_integral(ov, 0, 1, pt, phi) - ref) < 1e-9


def test_ray_integral_bessel_series(ov):
    # as zeta -> 0 the kernel tends to 1 and each power of X integrates to 2 K0(2n|Z|)
    u = [0.6 + 0.4j]
    Z, phi = _on_ray_setup(ov, u)
    th = mdl.light_theta(ov, [0.9])[0]
    pt = FieldPoint.make(u, [0.9], [0.3], 1e-9 * np.exp(1j * (phi + 1.0)))
    n = np.arange(1, 80)
    ref = -2 * np.sum(np.exp(1j * n * th) * special.k0(2 * n * abs(Z)) / n)
    assert abs(mg.ray_integral(ov, 0, 1, pt, phi) - ref) < 1e-7


def test_ray_integral_large_central_charge(ov):
    pt = FieldPoint.make([10j], [0.9], [0.3], 0.7)
    Z, phi = _on_ray_setup(ov, [10j])
    assert abs(mg.ray_integral(ov, 0, 1, pt, phi)) < 1e-7


# -- model coordinates ------------------------------------------------------------

def test_local_charge_is_semiflat(multi):
    pt = FieldPoint.make([1.1 + 0.4j], [0.7], [0.2], 0.6 + 0.3j)
    dec = mg.good_decomposition(multi, pt.u)
    g = Charge.electric(multi, 0)
    assert mg.xmodel(multi, g, pt, dec) == sf.xsf(multi, g, pt)


@pytest.mark.parametrize("md_name", ["multi", "rank2"])
def test_xmodel_reality(md_name, request):
    md = request.getfixturevalue(md_name)
    rng = np.random.default_rng(6)
    pt = _point(md, rng)
    dec = mg.good_decomposition(md, pt.u)
    for z in (0.5 + 0.2j, 1.3 - 0.7j, -0.2 + 0.9j):
        p1 = FieldPoint.make(pt.u, pt.theta_e, pt.theta_m, z)
        p2 = FieldPoint.make(pt.u, pt.theta_e, pt.theta_m, -1 / np.conj(z))
        for i in range(md.r):
            g = Charge.magnetic(md, i)
            assert abs(np.conj(mg.xmodel(md, g, p1, dec)) * mg.xmodel(md, g, p2, dec) - 1) < 1e-10


@pytest.mark.parametrize("md_name", ["ov", "multi", "rank2"])
def test_mn_identity(md_name, request):
    md = request.getfixturevalue(md_name)
    rng = np.random.default_rng(13)
    pt = _point(md, rng)
    dec = mg.good_decomposition(md, pt.u)
    V = mg.potential_connection(md, pt.u, pt.theta_e).V
    T = mdl.tau(md, pt.u)
    for rad in (0.3, 1.0, 2.5):
        z = rad * np.exp(1j * np.pi / 7)
        M, N = mg.mn_matrices(md, FieldPoint.make(pt.u, pt.theta_e, pt.theta_m, z), dec)
        res = V - (T + M).imag - (1 - rad ** 2) / (1 + rad ** 2) * N
        assert np.max(np.abs(res)) < 1e-7


def test_dark_lights_reduce_to_semiflat(multi):
    dark = _dark(multi)
    pt = FieldPoint.make([0.9 + 0.3j], [0.7], [0.2], 0.6 + 0.3j)
    dec = mg.good_decomposition(dark, pt.u)
    M, N = mg.mn_matrices(dark, pt, dec)
    assert np.all(M == 0) and np.all(N == 0)
    np.testing.assert_array_equal(mg.varpi_model(dark, pt).coeffs, sf.varpi_sf(dark, pt).coeffs)
    np.testing.assert_array_equal(mg.darboux_model(dark, pt), sf.darboux_sf(dark, pt))


# -- potentials and connections --------------------------------------------------------

def test_potential_positive_at_random_points(multi):
    rng = np.random.default_rng(23)
    for _ in range(100):
        u = np.pi * 0.95 * np.sqrt(rng.uniform()) * np.exp(1j * rng.uniform(0, TWO_PI))
        if np.min(np.abs(mdl.light_Z(multi, [u]))) < 1e-3:
            continue
        V = mg.potential_connection(multi, [u], rng.uniform(0, TWO_PI, 1)).V
        assert V[0, 0] > 0


def test_excised_point_rejected(ov):
    with pytest.raises(ModelError):
        mg.potential_connection(ov, [0.0], [0.0])


@pytest.mark.parametrize("chart", ["A", "Aprime"])
@pytest.mark.parametrize("md_name", ["ov", "rank2"])
def test_curvature_is_dA(md_name, chart, request):
    md = request.getfixturevalue(md_name)
    rng = np.random.default_rng(31)
    pt = _point(md, rng)
    r = md.r
    F = mg.potential_connection(md, pt.u, pt.theta_e, chart, curvature=True).F

    def Af(x):
        return mg.potential_connection(md, x[2 * r:3 * r] + 1j * x[3 * r:], x[:r], chart).A

    G, _ = fd_jacobian(Af, pt.frame_vector(), 1e-4)  # G[i, l, k] = d_k A_il
    dA = np.einsum("ilk->ikl", G) - G
    assert np.max(np.abs(dA - F)) < 1e-6


def test_potential_approaches_tau_far_away(ov):
    for aZ in (2.0, 3.0, 5.0):
        u = [aZ * np.exp(0.4j)]
        V = mg.potential_connection(ov, u, [1.3]).V[0, 0]
        bound = np.sqrt(np.pi / aZ) / (np.exp(2 * aZ) - 1) / (4 * np.pi)
        assert abs(V - mdl.tau(ov, u).imag[0, 0]) <= bound


# -- the twistor family ------------------------------------------------------------------

@pytest.mark.parametrize("md_name", ["ov", "multi", "rank2"])
def test_varpi_three_routes(md_name, request):
    md = request.getfixturevalue(md_name)
    rng = np.random.default_rng(2)
    pt = _point(md, rng, zeta=0.8 * np.exp(0.3j))
    dec = mg.good_decomposition(md, pt.u)
    W = mg.varpi_model(md, pt).coeffs
    assert np.max(np.abs(mg.varpi_model_bessel(md, pt).coeffs - W)) < 1e-10
    assert np.max(np.abs(mg.varpi_model_fd(md, pt, dec).coeffs - W)) < 1e-7


def test_bessel_route_twenty_points(multi):
    rng = np.random.default_rng(19)
    for _ in range(20):
        pt = _point(multi, rng, zeta=rng.uniform(0.3, 2) * np.exp(1j * rng.uniform(0, TWO_PI)))
        W = mg.varpi_model(multi, pt).coeffs
        assert np.max(np.abs(mg.varpi_model_bessel(multi, pt).coeffs - W)) < 1e-10


def test_sector_and_continuation_independence(multi):
    pt = FieldPoint.make([0.8 + 0.6j], [1.1], [0.4], 0.7 * np.exp(0.9j))
    dec = mg.good_decomposition(multi, pt.u)
    other = mg.SectorDecomposition(7, dec.phi0 + 0.05)
    assert other.is_good(mg.bps_angles(multi, pt.u).ravel())
    a = mg.varpi_model_fd(multi, pt, dec).coeffs
    b = mg.varpi_model_fd(multi, pt, other).coeffs
    assert np.max(np.abs(a - b)) < 1e-7
    for cont in ("+", "-"):
        c = mg.varpi_model_fd(multi, pt, dec, continuation=cont).coeffs
        assert np.max(np.abs(a - c)) < 1e-7


@pytest.mark.parametrize("md_name", ["ov", "rank2"])
def test_closed_and_holo_symplectic(md_name, request):
    md = request.getfixturevalue(md_name)
    rng = np.random.default_rng(41)
    pt = _point(md, rng)
    z = 0.6 + 0.3j

    def Wf(x):
        return mg.varpi_model(md, FieldPoint.from_frame(x, z)).coeffs

    dW, _ = exterior_derivative(Wf, pt.frame_vector(), 1e-3)
    assert np.max(np.abs(dW)) < 1e-5
    assert holo_symplectic_certificate(Wf(pt.frame_vector())).ok


def test_laurent_reality(rank2):
    rng = np.random.default_rng(43)
    pt = _point(rank2, rng)
    wp, w3, wm = mg.omega_forms_model(rank2, pt.u, pt.theta_e)
    assert np.max(np.abs(wm - wp.conj())) < 1e-12
    assert np.max(np.abs(w3.imag)) < 1e-12


# -- Darboux coordinates ---------------------------------------------------------------

@pytest.mark.parametrize("md_name", ["ov", "rank2"])
def test_darboux_model(md_name, request):
    md = request.getfixturevalue(md_name)
    rng = np.random.default_rng(47)
    pt = _point(md, rng)
    r = md.r
    wp, _, _ = mg.omega_forms_model(md, pt.u, pt.theta_e)
    dz, _ = fd_jacobian(lambda x: mg.darboux_model(md, FieldPoint.from_frame(x)), pt.frame_vector(), 1e-3)
    _, _, da, _ = basis_one_forms(r)
    assert np.max(np.abs(wp - sum(wedge(da[i], dz[i]) for i in range(r)))) < 1e-8
    a, b = mg.darboux_jacobian_model(md, pt), mg.darboux_jacobian_model_closed(md, pt)
    assert abs(a - b) <= 1e-8 * b


def test_darboux_correction_series(ov):
    # z^model - z against an independent Bessel sum over n != 0, both signs of the light
    pt = FieldPoint.make([0.5 + 0.3j], [1.2], [0.4])
    Z = mdl.light_Z(ov, pt.u)[0]
    th = mdl.light_theta(ov, pt.theta_e)[0]
    n = np.concatenate([np.arange(-200, 0), np.arange(1, 201)])
    one = -np.sum(np.exp(1j * n * th) * special.k0(2 * abs(n * Z)) / n) / (8 * np.pi ** 2)
    # -gamma contributes (-c) e^{-in theta}, the same series
    ref = 2 * one
    diff = mg.darboux_model(ov, pt) - sf.darboux_sf(ov, pt)
    assert abs(diff[0] - ref) < 1e-12


# -- primed and Taub-NUT charts -----------------------------------------------------------

def test_theta_prime_without_lights():
    md = mdl.ModelData(1, (1,), (), (np.array([[1j]]),), mdl.Domain((0j,), (1.0,)))
    pt = FieldPoint.make([0.3], [0.2], [1.7])
    np.testing.assert_array_equal(mg.theta_prime(md, pt), pt.theta_m)


def test_theta_prime_rejects_zero_angle(ov):
    with pytest.raises(ModelError):
        mg.theta_prime(ov, FieldPoint.make([0.5j], [0.0], [0.1]))


@pytest.mark.parametrize("md_name", ["ov", "multi", "rank2"])
def test_primed_jacobian_is_one(md_name, request):
    md = request.getfixturevalue(md_name)
    pt = _point(md, np.random.default_rng(53))
    assert abs(mg.primed_jacobian(md, pt) - 1) < 1e-10


def test_primed_pullback(ov):
    pt = FieldPoint.make([0.7 + 0.5j], [0.9], [0.4], 1.0)
    Wp = mg.varpi_model(ov, pt, chart="Aprime").coeffs

    def Fp(x):
        q = FieldPoint.from_frame(x)
        return np.concatenate([q.theta_e, mg.theta_prime(ov, q), q.u.real, q.u.imag])

    Jp, _ = fd_jacobian(Fp, pt.frame_vector(), 1e-4)
    assert np.max(np.abs(Jp.T @ Wp @ Jp - mg.varpi_model(ov, pt).coeffs)) < 1e-9


@settings(max_examples=50, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_moment_map_inversion(a, b, c, d):
    w1, w2 = complex(a, b), complex(c, d)
    if abs(w2) < 1e-6:
        return
    th, Z = mg.TNChart.moment(w1, w2)
    v1, v2 = mg.TNChart.invert_moment(th, Z, np.angle(w2))
    assert abs(v1 - w1) < 1e-9 and abs(v2 - w2) < 1e-9


def test_moment_map_values():
    th, Z = mg.TNChart.moment(1 + 1j, 0.5)
    assert abs(th + 0.5 * (2 - 0.25)) < 1e-15
    assert abs(Z - 0.5j * (1 + 1j) * 0.5) < 1e-15


def test_tn_potential_and_jacobian(ov):
    tn = mg.tn_chart(ov, [0])
    y = np.array([0.6, 0.0, 0.8, 0.0])  # |q| = 1
    xf = tn.to_fiber_frame(y)
    pt = mg.tn_potential_connection(ov, tn, xf[2] + 1j * xf[3], xf[:1])
    assert abs(pt.V[0, 0] - 2.0) < 1e-14
    y2 = np.array([0.0, np.sqrt(2), np.sqrt(2), 0.0])  # |q| = 2
    assert abs(tn.chart_jacobian(y2) - 0.5) < 1e-12
    for q in (1e-1, 1e-2):
        yq = q * np.array([0.3, 0.5, -0.6, 0.2]) / np.linalg.norm([0.3, 0.5, -0.6, 0.2])
        assert abs(tn.chart_jacobian(yq) - q * q / 8) < 1e-10 * q * q
        Jn, _ = fd_jacobian(tn.to_fiber_frame, yq, q * 1e-3)
        assert np.max(np.abs(tn.jacobian(yq) - Jn)) < 1e-8 * np.max(np.abs(Jn))


def test_tn_difference_bounded(ov, rank2):
    for md, S in ((ov, [0]), (rank2, [0])):
        tn = mg.tn_chart(md, S)
        base = np.zeros(4 * md.r)
        if md.r > 1:
            base[4:] = [0.3, 0.2, 0.05, -0.1]
        rep = mg.tn_difference_study(md, tn, base)
        assert rep["bounded"]
        assert max(rep["sup_norm"]) < 10


def test_tn_forms_closed_near_fiber(ov):
    tn = mg.tn_chart(ov, [0])
    q = 1e-2
    y = q * np.array([0.3, 0.5, -0.6, 0.2]) / np.linalg.norm([0.3, 0.5, -0.6, 0.2])
    m, _ = mg.tn_forms(ov, tn, y, 0.7 + 0.2j)
    dW, _ = exterior_derivative(lambda yy: mg.tn_forms(ov, tn, yy, 0.7 + 0.2j)[0].coeffs, y, 1e-3 * q)
    assert np.max(np.abs(dW)) < 1e-5 / q
    assert holo_symplectic_certificate(m.coeffs).ok


def test_tn_chart_errors(ov):
    with pytest.raises(ModelError):
        mg.tn_chart(ov, [0]).jacobian(np.array([0.3, 0.1, 0.0, 0.0]))
    with pytest.raises(ModelError):
        mg.tn_chart(ov, [])
    md2 = ov.with_lights([mdl.LightCharge(lc.c, lc.z0, lc.theta0, 2, lc.cut) for lc in ov.lights])
    with pytest.raises(ModelError):
        mg.tn_chart(md2, [0])


# -- metric -------------------------------------------------------------------------

def test_flat_metric():
    pc = PotentialConnection(np.eye(1), np.zeros((1, 4)), "A", (1,))
    np.testing.assert_allclose(mg.metric_gh(pc), np.diag([1.0, 1.0, 4.0, 4.0]), atol=1e-15)


def test_metric_rejects_singular_potential():
    with pytest.raises(ValueError):
        mg.metric_gh(PotentialConnection(np.zeros((1, 1)), np.zeros((1, 4)), "A", (1,)))


def test_metric_positive_iff_potential_positive():
    rng = np.random.default_rng(59)
    for _ in range(50):
        B = rng.normal(size=(2, 2))
        V = B @ B.T + rng.uniform(-1.5, 0.5) * np.eye(2)
        if abs(np.linalg.det(V)) < 1e-6:
            continue
        pc = PotentialConnection(V, rng.normal(size=(2, 8)), "A", (1, 2))
        assert (np.linalg.eigvalsh(mg.metric_gh(pc))[0] > 0) == (np.linalg.eigvalsh(V)[0] > 0)


def test_metric_reduces_to_four_dimensional_form():
    V, a = 1.7, np.array([0.2, -0.4, 0.3, 0.5])
    g = mg.metric_gh(PotentialConnection(np.array([[V]]), a[None, :], "A", (1,)))
    eta = np.array([0.0, 1.0, 0.0, 0.0]) + a
    ref = 4 * V * np.diag([0.25, 0.0, 1.0, 1.0]) + np.outer(eta, eta) / V
    np.testing.assert_allclose(g, ref, atol=1e-14)


@pytest.mark.parametrize("md_name", ["ov", "rank2"])
def test_metric_compatibility(md_name, request):
    md = request.getfixturevalue(md_name)
    pt = _point(md, np.random.default_rng(61))
    pc = mg.potential_connection(md, pt.u, pt.theta_e)
    wp, w3, _ = mg.omega_forms_model(md, pt.u, pt.theta_e)
    g = mg.metric_gh(pc)
    J = mg.complex_structure(wp)
    assert np.max(np.abs(J @ J + np.eye(4 * md.r))) < 1e-10
    assert mg.compatibility_residual(g, J, w3) < 1e-8
    assert np.linalg.eigvalsh(g)[0] > 0


def test_rank_two_fixture_is_valid():
    md = rank_two_model()
    assert md.r == 2 and md.n_lights == 3
