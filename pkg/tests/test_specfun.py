import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from gmn_forge import specfun as sfn

TWO_PI = 2 * np.pi


# -- Bessel functions ---------------------------------------------------------

@pytest.mark.parametrize("y", np.geomspace(1e-6, 700, 60))
def test_k0_k1_against_scipy(y):
    for ours, ref in ((sfn.bessel_k0, special.k0e), (sfn.bessel_k1, special.k1e)):
        val = ours(y) * np.exp(y)
        assert abs(val - ref(y)) <= 1e-12 * abs(ref(y))


def test_k0_integral_representation():
    # oscillatory Fourier integral of 1/sqrt(1+t^2)
    val, err = integrate.quad(lambda t: 1.0 / np.sqrt(1 + t * t), 0, np.inf, weight="cos", wvar=1.0)
    assert abs(sfn.bessel_k0(1.0) - val) < 1e-10
    assert abs(sfn.bessel_k0(1.0) - float(mpmath.besselk(0, 1))) < 1e-15


def test_k0_bounds_and_small_argument():
    assert sfn.bessel_k0(2.0) <= np.sqrt(np.pi / 4) * np.exp(-2.0)
    # K0(y) + log(y) -> log 2 - Euler gamma
    for y in (1e-4, 1e-6, 1e-8):
        assert abs(sfn.bessel_k0(y) + np.log(y) - (np.log(2) - np.euler_gamma)) < 1e-6


def test_bessel_rejects_nonpositive():
    with pytest.raises(sfn.SpecfunError):
        sfn.bessel_k0(0.0)
    with pytest.raises(sfn.SpecfunError):
        sfn.bessel_k1(-1.0)


# -- the potential function T ----------------------------------------------------

def _t_oracle(w, theta, M=20000):
    # brute-force lattice window plus the leading 1/m^2 tail correction
    m = np.arange(-M, M + 1)
    terms = np.pi / np.sqrt(4 * abs(w) ** 2 + (TWO_PI * m + theta) ** 2) - sfn.kappa(m)
    return float(np.sum(terms))


@pytest.mark.parametrize("w,theta", [(0.5, np.pi), (0.1 + 0.2j, 0.4), (2.0j, 5.5), (0.05, 3.0)])
def test_t_lattice_oracle(w, theta):
    assert abs(sfn.T_lattice(w, theta) - _t_oracle(w, theta)) < 1e-5


def test_t_symmetries_and_values():
    for w, th in [(0.3, 1.0), (1.2 + 0.5j, 2.5), (0.01, 0.3)]:
        assert abs(sfn.T_lattice(w, th) - sfn.T_lattice(w, -th)) < 1e-13
        assert abs(sfn.T_lattice(w, th) - sfn.T_lattice(w, th + TWO_PI)) < 1e-12
    assert abs(sfn.T_lattice(0.5, np.pi) - sfn.T_bessel(0.5, np.pi)) < 1e-9
    assert np.isfinite(sfn.T_lattice(0.0, np.pi))
    with pytest.raises(sfn.SpecfunError):
        sfn.T_lattice(0.0, 0.0)
    with pytest.raises(sfn.SpecfunError):
        sfn.T_bessel(0.0, 1.0)


def test_t_bessel_bound_random_points():
    rng = np.random.default_rng(5)
    for _ in range(50):
        w = rng.uniform(0.05, 3.0) * np.exp(1j * rng.uniform(0, TWO_PI))
        th = rng.uniform(0, TWO_PI)
        assert abs(sfn.T_bessel(w, th) + np.log(abs(w) / np.pi)) <= sfn.T_bound(w)


def test_t_contour_examples():
    assert abs(sfn.T_contour(1.0, np.pi / 3) - sfn.T_bessel(1.0, np.pi / 3)) < 1e-8
    v = sfn.T_contour(1.0, 0.0) + np.log(1.0 / np.pi)
    assert v > 0
    rng = np.random.default_rng(9)
    for _ in range(20):
        Z = rng.uniform(0.1, 3) * np.exp(1j * rng.uniform(0, TWO_PI))
        th = rng.uniform(0.01, TWO_PI - 0.01)
        assert abs(sfn.T_contour(Z, th) - sfn.T_bessel(Z, th)) < 1e-8


def test_contour_integrand_bound():
    # on the BPS ray X = e^{i theta} e^{-2|Z| cosh s}
    s = np.linspace(-6, 6, 1001)
    for aZ in (0.1, 1.0, 4.0):
        X = np.exp(1j * 0.7 - 2 * aZ * np.cosh(s))
        assert np.all(np.abs(X) <= np.exp(-2 * aZ) * (1 + 1e-15))


def test_harmonicity():
    # Laplacian of 4 dw dwbar + dtheta^2: (T_xx + T_yy)/4 + T_tt
    h = 1e-3
    for w, t in [(0.6 + 0.2j, 1.3), (0.2 - 0.4j, 4.0), (1.5j, 2.2)]:
        f = lambda dx, dy, dt: sfn.T_lattice(w + dx + 1j * dy, t + dt)
        c = f(0, 0, 0)
        lap = ((f(h, 0, 0) + f(-h, 0, 0) + f(0, h, 0) + f(0, -h, 0) - 4 * c) / 4
               + (f(0, 0, h) + f(0, 0, -h) - 2 * c)) / h ** 2
        assert abs(lap) < 1e-4


def test_k1_derivative_consistency():
    for aw, th in [(0.4, 1.0), (1.1, 2.7)]:
        h = 1e-5
        d = -(sfn.T_bessel(aw + h, th) - sfn.T_bessel(aw - h, th)) / (2 * h)
        n = np.arange(1, 200)
        series = 1.0 / aw + 4 * np.sum(n * np.cos(n * th) * special.k1(2 * n * aw))
        assert abs(d - series) < 1e-7


# -- sign sums ------------------------------------------------------------------

def _sgn_oracle(aZ, theta, M=200000):
    m = np.arange(-M, M + 1)
    x = theta + TWO_PI * m
    # pair the tails symmetrically; the remainder is O(|Z|^2/M^2)
    return float(np.sum(x / np.sqrt(4 * aZ * aZ + x * x) - np.sign(m + 0.5 * np.sign(theta))))


@pytest.mark.parametrize("aZ,theta", [(0.3, 1.0), (1.0, 4.0), (10.0, 1.0), (0.01, 0.2)])
def test_q_sum_against_oracle(aZ, theta):
    full = _sgn_oracle(aZ, theta)
    q = full - (theta / np.sqrt(4 * aZ * aZ + theta * theta) - 1.0)
    assert abs(sfn.Q_sum(aZ, theta) - q) < 1e-6


def test_q_sum_large_z_value():
    # frozen from the independent oracle above; the sum does not vanish for |Z| = 10
    ref = _sgn_oracle(10.0, 1.0) - (1.0 / np.sqrt(401.0) - 1.0)
    assert abs(sfn.Q_sum(10.0, 1.0) - ref) < 1e-6
    assert abs(ref) > 1e-2


def test_q_sum_domain():
    with pytest.raises(sfn.SpecfunError):
        sfn.Q_sum(1.0, 0.0)
    with pytest.raises(sfn.SpecfunError):
        sfn.Q_sum(1.0, TWO_PI)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 4.0), st.floats(0.01, TWO_PI - 0.01))
def test_connection_sum_two_routes(aZ, theta):
    assert abs(sfn.A_lattice_sum(aZ, theta) - sfn.A_bessel_sum(aZ, theta)) < 1e-9


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(0.01, TWO_PI - 0.01))
def test_connection_sum_odd(aZ, theta):
    assert abs(sfn.A_lattice_sum(aZ, TWO_PI - theta) + sfn.A_lattice_sum(aZ, theta)) < 1e-12


def test_connection_sum_smooth_near_zero_angle():
    for aZ in (1e-3, 0.1, 1.0):
        vals = [sfn.A_lattice_sum(aZ, t) for t in (-1e-6, 1e-9, 1e-6)]
        assert np.all(np.isfinite(vals))
        assert abs(vals[0] + vals[2]) < 1e-10
        assert abs(vals[2] - vals[0]) < 1e-3
    with pytest.raises(sfn.SpecfunError):
        sfn.A_lattice_sum(0.0, 0.0)
