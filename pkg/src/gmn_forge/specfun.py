"""Modified Bessel functions and the periodic potential ``T(w, theta)``.

``T`` is the 2 pi-periodic harmonic function

    T(w, theta) = sum_m ( pi / sqrt(4|w|^2 + (2 pi m + theta)^2) - kappa_m ),
    kappa_m = (1/2) log((2|m| + 1) / (2|m| - 1)),  kappa_0 = 0,

with Fourier form ``-log(|w|/pi) + sum_{n != 0} e^{i n theta} K0(2 |n w|)``.
Three independent evaluators are provided: the lattice sum with an exact
Hurwitz-zeta tail, the Bessel series and a trapezoid rule on the ray where
``exp(Z/zeta + i theta + zeta conj(Z))`` is real and decaying.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "SeriesControl",
    "SpecfunError",
    "bessel_k0",
    "bessel_k1",
    "kappa",
    "T_lattice",
    "T_bessel",
    "T_contour",
    "T_value",
    "T_bound",
    "sgn_sum",
    "Q_sum",
    "A_lattice_sum",
    "A_bessel_sum",
    "K0_cos_sum",
    "K0_sin_over_n_sum",
]

EULER_GAMMA = 0.5772156649015329
TWO_PI = 2.0 * np.pi


class SpecfunError(ValueError):
    pass


@dataclass(frozen=True)
class SeriesControl:
    """Truncation controls.

    Attributes
    ----------
    abs_tol : float
        Target absolute accuracy of series and tails.
    max_terms : int
        Cap on Bessel-series terms.
    lattice_cutoff : int
        Minimum half-width ``M`` of the explicit lattice window.
    """

    abs_tol: float = 1e-14
    max_terms: int = 20000
    lattice_cutoff: int = 8

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise SpecfunError("abs_tol must be positive")


DEFAULT = SeriesControl()


# -- Bessel K0, K1 -----------------------------------------------------------

_SERIES_TERMS = 30
_ASYM_SWITCH = 25.0


def _k_series(y, nu):
    # power series about 0, used for y < 2
    q = 0.25 * y * y
    lg = np.log(0.5 * y) + EULER_GAMMA
    if nu == 0:
        term = np.ones_like(y)
        i0 = np.ones_like(y)
        acc = np.zeros_like(y)
        h = 0.0
        for k in range(1, _SERIES_TERMS):
            term = term * q / (k * k)
            h += 1.0 / k
            i0 = i0 + term
            acc = acc + term * h
        return -lg * i0 + acc
    # K1(y) = 1/y + log(y/2) I1(y) - (y/4) sum (psi(k+1)+psi(k+2)) q^k / (k!(k+1)!)
    term = np.ones_like(y)
    psi1 = -EULER_GAMMA
    psi2 = 1.0 - EULER_GAMMA
    i1 = np.ones_like(y)
    acc = (psi1 + psi2) * term
    for k in range(1, _SERIES_TERMS):
        term = term * q / (k * (k + 1))
        psi1 += 1.0 / k
        psi2 += 1.0 / (k + 1)
        i1 = i1 + term
        acc = acc + (psi1 + psi2) * term
    return 1.0 / y + np.log(0.5 * y) * 0.5 * y * i1 - 0.25 * y * acc


def _k_quad_scaled(y, nu):
    h = 0.0625
    tmax = np.arccosh(1.0 + 40.0 / np.min(y)) + h
    t = np.arange(0.0, tmax, h)
    w = np.full(t.shape, h)
    w[0] = 0.5 * h
    f = np.exp(-np.multiply.outer(y, np.cosh(t) - 1.0))
    if nu:
        f = f * np.cosh(nu * t)
    return (f @ w) * np.exp(-y)


def _k_asym(y, nu):
    mu = 4.0 * nu * nu
    term = np.ones_like(y)
    acc = np.ones_like(y)
    for k in range(1, 16):
        term = term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * y)
        acc = acc + term
    return np.sqrt(np.pi / (2.0 * y)) * np.exp(-y) * acc


def _bessel_k(y, nu):
    y = np.asarray(y, dtype=float)
    if np.any(~(y > 0)):
        raise SpecfunError("Bessel K requires y > 0")
    scalar = y.ndim == 0
    y = np.atleast_1d(y)
    out = np.empty_like(y)
    lo = y < 2.0
    hi = y >= _ASYM_SWITCH
    mid = ~lo & ~hi
    if lo.any():
        out[lo] = _k_series(y[lo], nu)
    if mid.any():
        out[mid] = _k_quad_scaled(y[mid], nu)
    if hi.any():
        out[hi] = _k_asym(y[hi], nu)
    return out[0] if scalar else out


def bessel_k0(y):
    """Modified Bessel function ``K0(y)`` for ``y > 0``.

    Power series below 2, exponentially convergent trapezoid rule on the
    integral ``int_0^inf exp(-y cosh t) dt`` up to 25, and the asymptotic
    expansion (15 terms) beyond, where its error is below double precision.
    """
    return _bessel_k(y, 0)


def bessel_k1(y):
    """Modified Bessel function ``K1(y)`` for ``y > 0`` (same scheme as K0)."""
    return _bessel_k(y, 1)


def kappa(m):
    """Regularizing constants ``kappa_m``; ``kappa_0 = 0``."""
    m = np.abs(np.asarray(m, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        k = 0.5 * np.log((2 * m + 1) / (2 * m - 1))
    return np.where(m == 0, 0.0, k)


# -- lattice sums ------------------------------------------------------------

def _binom_half(kmax):
    # binom(-1/2, k)
    b = [1.0]
    for k in range(1, kmax + 1):
        b.append(b[-1] * (-0.5 - (k - 1)) / k)
    return np.array(b)


_BH = _binom_half(60)


def _window(a, s, ctl):
    # a = |w|^2/pi^2, |s| <= 1; the tail expansion needs a/(M+1-|s|)^2 small
    return int(max(ctl.lattice_cutoff, np.ceil(3.0 * np.sqrt(a)) + 2))


def _reduce(theta, lo):
    """Representative of theta mod 2 pi in ``[lo, lo + 2 pi)``."""
    return lo + np.mod(theta - lo, TWO_PI)


def T_lattice(w, theta, ctl: SeriesControl = DEFAULT) -> float:
    """Lattice-sum evaluation of ``T(w, theta)``.

    The window ``|m| <= M`` is summed explicitly; the tail of the paired
    terms is expanded binomially in ``|w|^2 / (m +- s)^2`` and summed in
    closed form with Hurwitz zeta and digamma values.
    """
    aw = abs(complex(w))
    t = float(_reduce(float(theta), -np.pi))
    if aw == 0.0 and abs(t) < 1e-300:
        raise SpecfunError("T is singular at w = 0, theta = 0 mod 2 pi")
    s = t / TWO_PI
    a = (aw / np.pi) ** 2
    M = _window(a, s, ctl)
    m = np.arange(-M, M + 1)
    x = m + s
    head = np.sum(0.5 / np.sqrt(a + x * x) - kappa(m))
    # tail: m > M paired with -m
    q1, q2 = M + 1 + s, M + 1 - s
    tail = 0.5 * (2 * special.digamma(M + 1) - special.digamma(q1) - special.digamma(q2))
    j = np.arange(3, 61, 2)
    tail -= np.sum(2.0 ** (1 - j) / j * special.zeta(j, M + 1))
    k = np.arange(1, 40)
    terms = 0.5 * _BH[k] * a ** k * (special.zeta(2 * k + 1, q1) + special.zeta(2 * k + 1, q2))
    tail += np.sum(terms)
    return float(head + tail)


def sgn_sum(absZ, theta, ctl: SeriesControl = DEFAULT) -> float:
    """``sum_m ( x_m / sqrt(4|Z|^2 + x_m^2) - sgn x_m )``, ``x_m = 2 pi m + theta``."""
    t = float(theta)
    if abs(t / TWO_PI - round(t / TWO_PI)) < 1e-15 and absZ == 0:
        raise SpecfunError("sign sum is undefined at Z = 0, theta = 0")
    s0 = t / TWO_PI
    shift = np.floor(s0 + 0.5)
    s = s0 - shift  # in [-1/2, 1/2)
    a = (absZ / np.pi) ** 2
    M = _window(a, s, ctl)
    m = np.arange(-M, M + 1)
    x = m + s
    head = np.sum(x / np.sqrt(a + x * x) - np.sign(x))
    k = np.arange(1, 40)
    q1, q2 = M + 1 + s, M + 1 - s
    tail = np.sum(_BH[k] * a ** k * (special.zeta(2 * k, q1) - special.zeta(2 * k, q2)))
    return float(head + tail)


def Q_sum(absZ, theta, ctl: SeriesControl = DEFAULT) -> float:
    """Sign sum without the ``m = 0`` term, for ``theta`` in ``(0, 2 pi)``."""
    t = float(theta)
    if not (0.0 < t < TWO_PI):
        raise SpecfunError("Q_sum needs theta in (0, 2 pi)")
    full = sgn_sum(absZ, t, ctl)
    return full - (t / np.sqrt(4 * absZ * absZ + t * t) - 1.0)


def A_lattice_sum(absZ, theta, ctl: SeriesControl = DEFAULT) -> float:
    """Smooth regularized sign sum of the connection.

    Equals :func:`sgn_sum` minus ``(theta_hat - pi)/pi`` where
    ``theta_hat`` is the representative in ``(0, 2 pi)``; it is a smooth
    periodic odd function of ``theta`` whenever ``Z != 0``.
    """
    t = float(_reduce(float(theta), 0.0))
    if t == 0.0:
        if absZ == 0:
            raise SpecfunError("connection sum is undefined at Z = 0, theta = 0")
        # odd and 2 pi-periodic in theta, hence zero here
        return 0.0
    return sgn_sum(absZ, t, ctl) - (t - np.pi) / np.pi


def A_bessel_sum(absZ, theta, n_max: int = None, ctl: SeriesControl = DEFAULT) -> float:
    """``(4|Z|/pi) sum_{n>0} sin(n theta) K1(2 n |Z|)``."""
    n = _bessel_terms(absZ, ctl, n_max)
    return float(4.0 * absZ / np.pi * np.sum(np.sin(n * theta) * bessel_k1(2.0 * n * absZ)))


def _bessel_terms(absZ, ctl, n_max=None):
    if absZ <= 0:
        raise SpecfunError("Bessel series needs |Z| > 0")
    if n_max is None:
        # K_nu(2n|Z|) <~ e^{-2n|Z|} sqrt(pi/(4n|Z|)) (1 + 1/(2n|Z|))
        n_max = int(np.ceil((-np.log(ctl.abs_tol) + 2.0) / (2.0 * absZ))) + 2
        n_max = min(n_max, ctl.max_terms)
    return np.arange(1, n_max + 1, dtype=float)


def K0_cos_sum(absZ, theta, ctl: SeriesControl = DEFAULT) -> float:
    """``sum_{n != 0} e^{i n theta} K0(2 |n Z|) = 2 sum_{n>0} cos(n theta) K0(2 n |Z|)``."""
    n = _bessel_terms(absZ, ctl)
    return float(2.0 * np.sum(np.cos(n * theta) * bessel_k0(2.0 * n * absZ)))


def K0_sin_over_n_sum(absZ, theta, ctl: SeriesControl = DEFAULT) -> float:
    """``sum_{n>0} sin(n theta) K0(2 n |Z|) / n``."""
    n = _bessel_terms(absZ, ctl)
    return float(np.sum(np.sin(n * theta) * bessel_k0(2.0 * n * absZ) / n))


def T_bessel(w, theta, ctl: SeriesControl = DEFAULT) -> float:
    """Fourier-Bessel evaluation ``-log(|w|/pi) + sum_{n!=0} e^{i n theta} K0(2|n w|)``."""
    aw = abs(complex(w))
    if aw == 0.0:
        raise SpecfunError("T_bessel needs w != 0")
    return float(-np.log(aw / np.pi) + K0_cos_sum(aw, theta, ctl))


def T_bound(w) -> float:
    """Bound ``sqrt(pi/|w|) / (e^{2|w|} - 1)`` on ``|T + log(|w|/pi)|``."""
    aw = abs(complex(w))
    return float(np.sqrt(np.pi / aw) / np.expm1(2.0 * aw))


def _ray_integral_ratio(absZ, theta, h, smax):
    # int ds X/(1-X), X = e^{i theta} e^{-2|Z| cosh s}, trapezoid on [-smax, smax]
    s = np.arange(-smax, smax + 0.5 * h, h)
    X = np.exp(1j * theta - 2.0 * absZ * np.cosh(s))
    return h * np.sum(X / (1.0 - X)), np.max(np.abs(X))


def T_contour(Z, theta, ctl: SeriesControl = DEFAULT, h: float = None) -> float:
    """``T`` from the ray integrals of ``X / (1 - X)`` for the charge and its partner.

    With ``zeta = -(Z/|Z|) e^s`` the semi-flat function on the ray is
    ``X = e^{i theta} e^{-2|Z| cosh s}``.  The trapezoid rule converges
    geometrically because the nearest poles sit at ``|Im s| = pi/2``.
    """
    aZ = abs(complex(Z))
    if aZ == 0.0:
        raise SpecfunError("T_contour needs Z != 0")
    t = float(_reduce(float(theta), -np.pi))
    # the decay bound on the ray is e^{-2|Z|}; near theta = 0 and small |Z|
    # the integrand peaks sharply, so the step follows the peak width
    if h is None:
        h = min(0.05, 0.25 * max(abs(t), 1e-3) / (1.0 + aZ)) if aZ < 0.5 else 0.05
    smax = np.arccosh(max(1.0, (-np.log(ctl.abs_tol) + 5.0) / (2.0 * aZ))) + 1.0
    Ip, xmax = _ray_integral_ratio(aZ, t, h, smax)
    Im, _ = _ray_integral_ratio(aZ, -t, h, smax)
    if not xmax <= np.exp(-2.0 * aZ) * (1 + 1e-12):
        raise SpecfunError("ray bound |X| <= e^{-2|Z|} violated")
    val = 0.5 * (Ip + Im)
    if abs(val.imag) > 1e-8 * max(1.0, abs(val.real)):
        raise SpecfunError(f"contour quadrature not real: {val}")
    return float(-np.log(aZ / np.pi) + val.real)


def T_value(w, theta, ctl: SeriesControl = DEFAULT) -> float:
    """Production evaluator of ``T``: the lattice sum (smooth in all arguments)."""
    return T_lattice(w, theta, ctl)
