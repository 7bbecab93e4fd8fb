"""Model geometry: ray-integral coordinates, potentials and twistor forms.

The model coordinates correct the semi-flat ones by integrals along the
boundary rays of a sectorial decomposition of the ``zeta`` plane,

    Y_g = Y^sf_g - (1/4 pi i) sum_{g'} Omega <g, g'>
          int_{r(g')} dz'/z' (z' + zeta)/(z' - zeta) log(1 - X^sf_{g'}(z')),

where the sum runs over both signs of every light charge.  The same
geometry has a Gibbons-Hawking description with

    V = Im tau_tilde + (1/2 pi) sum Omega D D^T T(Z, theta),
    A = -Re tau d theta_e + (1/2) sum Omega D d arg Z S(|Z|, theta),

``D = c / p`` and ``S`` the smooth regularized sign sum.  Three
independent routes to ``varpi`` are provided: the explicit assembly
(lattice sums), the Fourier-Bessel form, and finite differences of the
quadrature coordinates.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import modeldata as mdl
from . import specfun as sfn
from .forms import (PotentialConnection, TwoFormSample, basis_one_forms, fd_jacobian, frame_labels,
                    gh_assemble, laurent_split, wedge, wirtinger_columns)
from .modeldata import Charge, FieldPoint, ModelData, ModelError
from .semiflat import darboux_sf, varpi_from_logs, varpi_sf, ysf

log = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi

__all__ = [
    "SectorDecomposition",
    "bps_angles",
    "good_decomposition",
    "ray_integral",
    "ymodel",
    "xmodel",
    "ymodel_correction",
    "mn_matrices",
    "dargZ_rows",
    "potential_connection",
    "curvature_from_V",
    "varpi_model",
    "varpi_model_bessel",
    "varpi_model_fd",
    "omega_forms_model",
    "darboux_model",
    "darboux_jacobian_model",
    "darboux_jacobian_model_closed",
    "theta_prime",
    "theta_tn",
    "primed_jacobian",
    "TNChart",
    "tn_chart",
    "tn_potential_connection",
    "tn_forms",
    "tn_difference_study",
    "metric_gh",
    "complex_structure",
    "compatibility_residual",
]


def _wrap(x):
    """Angle in ``(-pi, pi]``."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=float), TWO_PI)


# -- sectorial decompositions ------------------------------------------------

@dataclass(frozen=True)
class SectorDecomposition:
    """``2K`` half-open sectors ``[phi0 + (A-1) pi/K, phi0 + A pi/K)``, ``A = 1..2K``."""

    K: int
    phi0: float

    def __post_init__(self):
        if self.K < 5:
            raise ValueError("sectorial decompositions need K >= 5")

    @property
    def width(self) -> float:
        return np.pi / self.K

    def ray_angle(self, A: int) -> float:
        return float(self.phi0 + A * self.width)

    def rays(self) -> np.ndarray:
        return self.phi0 + self.width * np.arange(1, 2 * self.K + 1)

    def sector_index(self, angle) -> int:
        """Index ``A`` in ``1..2K`` of the sector containing ``angle``."""
        t = np.mod(float(angle) - self.phi0, TWO_PI)
        return int(np.floor(t / self.width)) % (2 * self.K) + 1

    def boundary_ray(self, angle, shift: int = 0) -> float:
        """Counterclockwise boundary ray of the sector of ``angle``, moved by ``shift`` sectors."""
        return self.ray_angle(self.sector_index(angle) + shift)

    def margin(self, angles) -> float:
        """Least angular distance from ``angles`` to any ray."""
        a = np.atleast_1d(np.asarray(angles, dtype=float))
        if a.size == 0:
            return np.inf
        t = np.mod(a - self.phi0, self.width)
        return float(np.min(np.minimum(t, self.width - t)))

    def is_good(self, angles, tol: float = 0.0) -> bool:
        return self.margin(angles) > tol


def bps_angles(md: ModelData, u) -> np.ndarray:
    """Angles of the rays ``-Z R+`` of all light charges, both signs, shape ``(L, 2)``."""
    Z = mdl.light_Z(md, u)
    return np.stack([np.angle(-Z), np.angle(Z)], axis=1).reshape(-1, 2)


def good_decomposition(md: ModelData, u, K: int = 5) -> SectorDecomposition:
    """Decomposition maximizing the least distance between rays and BPS rays.

    The rays are periodic modulo ``pi / K`` so the optimum is the midpoint
    of the largest gap of the BPS angles reduced modulo ``pi / K``; ties go
    to the smallest ``phi0`` in ``[0, pi / K)``.
    """
    w = np.pi / K
    ang = bps_angles(md, u).ravel()
    if ang.size == 0:
        return SectorDecomposition(K, 0.5 * w)
    t = np.sort(np.mod(ang, w))
    gaps = np.diff(np.concatenate([t, [t[0] + w]]))
    mids = np.mod(t + 0.5 * gaps, w)
    best = np.max(gaps)
    cand = mids[gaps >= best - 1e-12]
    return SectorDecomposition(K, float(np.min(cand)))


# -- ray quadrature ----------------------------------------------------------

def _light_data(md: ModelData, k: int, sign: int, pt: FieldPoint):
    Z = sign * mdl.light_Z(md, pt.u)[k]
    th = sign * mdl.light_theta(md, pt.theta_e)[k]
    return complex(Z), float(th)


def _xsf_light(Z, th, zp):
    return np.exp(Z / zp + 1j * th + zp * np.conj(Z))


def _ray_quadrature(Z, th, phi, poles, integrand, side="-", tol=1e-15, rotate=0.35):
    """``int_0^inf dz'/z' g(z')`` along the ray ``arg z' = phi``.

    ``poles`` is a list of ``(location, residue)`` where ``residue`` is the
    residue of ``g(z')/z'``.  The contour is turned away from nearby poles
    and the residues crossed on the way are added back, so the result is the
    value on the ray itself.  A pole exactly on the ray is counted according
    to ``side``: ``'-'`` means the contour sits clockwise of it (the pole is
    treated as lying counterclockwise), ``'+'`` the opposite.
    """
    ell = float(np.angle(-Z))
    pole_ang = [float(np.angle(P)) for P, _ in poles]

    def pole_dist(a):
        if not pole_ang:
            return np.pi
        return float(np.min(np.abs(_wrap(np.asarray(pole_ang) - a))))

    cands = [phi] + [phi + s * d for d in (rotate, 0.5 * rotate, 0.25 * rotate) for s in (1, -1)]
    cands = [c for c in cands if abs(_wrap(c - ell)) < np.pi / 2 - 0.35]
    if not cands:
        raise sfn.SpecfunError("ray is too far from the BPS ray for convergence")
    score = [pole_dist(c) for c in cands]
    phic = cands[int(np.argmax(score))] if score[0] < 0.2 else phi
    d_pole = pole_dist(phic)
    psi = _wrap(phic - ell)
    d_strip = np.pi / 2 - abs(psi)
    h = min(0.05, d_pole / 10.0, d_strip / 10.0)
    aZ = abs(Z)
    decay = 2.0 * aZ * np.cos(psi)
    if decay <= 0:
        raise sfn.SpecfunError("integrand does not decay along the ray")
    smax = np.arccosh(max(1.0, (-np.log(tol) + 8.0) / decay)) + 1.0
    n = int(np.ceil(smax / h))
    s = h * np.arange(-n, n + 1)
    zp = np.exp(1j * phic + s)
    val = h * np.sum(integrand(zp))
    # residues between the true ray and the working contour
    delta = _wrap(phic - phi)
    for (P, res), a in zip(poles, pole_ang):
        off = _wrap(a - phi)
        on = abs(off) < 1e-12
        if delta > 0 and ((0 < off < delta and not on) or (on and side == "-")):
            val += TWO_PI * 1j * res
        elif delta < 0 and ((delta < off < 0 and not on) or (on and side == "+")):
            val -= TWO_PI * 1j * res
        elif delta == 0 and on:
            raise sfn.SpecfunError("pole on the contour")
    return complex(val)


def ray_integral(md: ModelData, k: int, sign: int, pt: FieldPoint, phi: float, side: str = "-") -> complex:
    """``int_{arg z' = phi} dz'/z' (z' + zeta)/(z' - zeta) log(1 - X^sf(z'))`` for light ``sign * k``.

    For ``zeta`` on the ray the value is the limit from the counterclockwise
    side when ``side='-'`` (contour displaced clockwise) and from the
    clockwise side when ``side='+'``.
    """
    Z, th = _light_data(md, k, sign, pt)
    zeta = pt.zeta

    def g(zp):
        return (zp + zeta) / (zp - zeta) * np.log1p(-_xsf_light(Z, th, zp))

    with np.errstate(over="ignore", invalid="ignore"):
        # only used when the contour crosses the pole
        res = 2.0 * np.log1p(-_xsf_light(Z, th, zeta))
    return _ray_quadrature(Z, th, phi, [(zeta, res)], g, side)


def _pair_y(charge: Charge, md: ModelData, k: int) -> int:
    # <g, light_k> = sum_i y_i c_ki
    return int(np.dot(np.asarray(charge.y, dtype=np.int64), np.asarray(md.lights[k].c, dtype=np.int64)))


def ymodel(md: ModelData, charge: Charge, pt: FieldPoint, dec: SectorDecomposition,
           continuation: Optional[str] = None, side: str = "-", cut_side=None) -> complex:
    """``log X^model`` for ``charge`` at ``pt``.

    Parameters
    ----------
    dec : SectorDecomposition
        Must be good at ``pt.u``.
    continuation : {None, '+', '-'}
        Use the ray one sector counterclockwise (``'+'``) or clockwise of
        the default one.
    side : {'-', '+'}
        Convention for ``zeta`` exactly on an integration ray.
    """
    return complex(ysf(md, charge, pt, cut_side) - ymodel_correction(md, charge, pt, dec, continuation, side))


def ymodel_correction(md: ModelData, charge: Charge, pt: FieldPoint, dec: SectorDecomposition,
                      continuation: Optional[str] = None, side: str = "-") -> complex:
    """``ysf - ymodel``: the sum of ray integrals divided by ``4 pi i``."""
    shift = {None: 0, "none": 0, "+": 1, "-": -1}[continuation]
    ang = bps_angles(md, pt.u)
    if not dec.is_good(ang.ravel()):
        raise ModelError("sectorial decomposition is not good at this point", "decomposition")
    corr = 0j
    for k, lc in enumerate(md.lights):
        pk = _pair_y(charge, md, k)
        if pk == 0 or lc.omega == 0:
            continue
        for j, sgn in enumerate((1, -1)):
            phi = dec.boundary_ray(ang[k, j], shift)
            corr += lc.omega * sgn * pk * ray_integral(md, k, sgn, pt, phi, side)
    return complex(corr / (4j * np.pi))


def xmodel(md: ModelData, charge: Charge, pt: FieldPoint, dec: SectorDecomposition,
           continuation: Optional[str] = None, side: str = "-", cut_side=None) -> complex:
    """Model coordinate ``X^model = exp(ymodel)``."""
    return complex(np.exp(ymodel(md, charge, pt, dec, continuation, side, cut_side)))


# -- zeta independence --------------------------------------------------------

def mn_matrices(md: ModelData, pt: FieldPoint, dec: SectorDecomposition, side: str = "-"):
    """Kernel-weighted ray integrals ``M`` and ``N`` of the nondegeneracy identity.

    With ``K(z') = (z' + zeta)/(z' - zeta) + (1 - conj(zeta) z')/(1 + conj(zeta) z')``:

    ``M = -1/(4 pi i (1/zeta + conj zeta)) sum Omega D D^T int K (-X/z')/(1 - X)``,
    ``N = -1/(8 pi i) sum Omega D D^T int K (-i X)/(1 - X)``.

    Returns
    -------
    M : ndarray, complex, shape (r, r)
    N : ndarray, shape (r, r)
        Real part; the imaginary part is rounding.
    """
    r = md.r
    zeta = pt.zeta
    anti = -1.0 / np.conj(zeta)
    ang = bps_angles(md, pt.u)
    M = np.zeros((r, r), dtype=complex)
    N = np.zeros((r, r), dtype=complex)
    D = md.D
    for k, lc in enumerate(md.lights):
        if lc.omega == 0:
            continue
        W = lc.omega * np.outer(D[k], D[k])
        for j, sgn in enumerate((1, -1)):
            Z, th = _light_data(md, k, sgn, pt)
            phi = dec.boundary_ray(ang[k, j])

            def kern(zp):
                return (zp + zeta) / (zp - zeta) + (1 - np.conj(zeta) * zp) / (1 + np.conj(zeta) * zp)

            def ratio(zp):
                X = _xsf_light(Z, th, zp)
                return X / (1 - X)

            def fM(zp):
                return -ratio(zp) / zp

            def fN(zp):
                return -1j * ratio(zp)

            for f, acc in ((fM, "M"), (fN, "N")):
                poles = [(zeta, 2.0 * f(zeta)), (anti, -2.0 * f(anti))]
                val = _ray_quadrature(Z, th, phi, poles, lambda zp, f=f: kern(zp) * f(zp), side)
                if acc == "M":
                    M += W * val
                else:
                    N += W * val
    M *= -1.0 / (4j * np.pi * (1.0 / zeta + np.conj(zeta)))
    N *= -1.0 / (8j * np.pi)
    return M, N.real


# -- potentials and connections -------------------------------------------------

def dargZ_rows(md: ModelData, u) -> np.ndarray:
    """Frame coefficients of ``d arg Z_k``, shape ``(L, 4r)``."""
    r = md.r
    Z = mdl.light_Z(md, u)
    out = np.zeros((md.n_lights, 4 * r))
    if md.n_lights == 0:
        return out
    g = md.D / Z[:, None]
    out[:, 2 * r:3 * r] = g.imag
    out[:, 3 * r:] = g.real
    return out


def _T(Z, th, ctl):
    if abs(Z) > 0.25:
        return sfn.T_bessel(Z, th, ctl)
    return sfn.T_lattice(Z, th, ctl)


def _theta_hat(th):
    return np.mod(th, TWO_PI)


def _V(md: ModelData, u, theta_e, ctl) -> np.ndarray:
    Z = mdl.light_Z(md, u)
    th = mdl.light_theta(md, theta_e)
    V = mdl.tau_tilde(md, u).imag.copy()
    for k in range(md.n_lights):
        if md.omega[k]:
            V += md.omega[k] * np.outer(md.D[k], md.D[k]) * _T(Z[k], th[k], ctl) / TWO_PI
    return V


def _sign_factor(md, k, absZ, th, chart, S, ctl):
    if chart == "A":
        return sfn.A_lattice_sum(absZ, th, ctl)
    if chart == "TN" and k in S:
        t = float(_wrap(th))
        return sfn.sgn_sum(absZ, t, ctl) + np.sign(t) - 1.0
    t = float(_theta_hat(th))
    if t == 0.0:
        raise ModelError("the primed chart is undefined where a light angle vanishes", "chart")
    return sfn.sgn_sum(absZ, t, ctl)


def potential_connection(md: ModelData, u, theta_e, chart: str = "A", side=None, S: Sequence[int] = (),
                         curvature: bool = False, ctl: sfn.SeriesControl = sfn.DEFAULT,
                         h: float = 1e-4) -> PotentialConnection:
    """Gibbons-Hawking data at ``(u, theta_e)``.

    Parameters
    ----------
    chart : {'A', 'Aprime', 'TN'}
        ``'A'`` pairs with the unprimed fiber angles and uses ``Re tau``;
        ``'Aprime'`` pairs with the primed angles and uses ``Re tau_tilde``
        and the plain sign sum; ``'TN'`` is the primed chart with the angles
        of the lights in ``S`` lifted to ``(-pi, pi]``.
    curvature : bool
        Also return ``F_i`` assembled from derivatives of ``V``.
    """
    u = np.atleast_1d(np.asarray(u, dtype=complex))
    theta_e = np.atleast_1d(np.asarray(theta_e, dtype=float))
    r = md.r
    Z = mdl.light_Z(md, u)
    th = mdl.light_theta(md, theta_e)
    for k in range(md.n_lights):
        if md.omega[k] and abs(Z[k]) == 0 and np.mod(th[k], TWO_PI) == 0:
            raise ModelError("point lies on the excised locus Z = 0, theta = 0", "A3")
    V = _V(md, u, theta_e, ctl)
    A = np.zeros((r, 4 * r))
    if chart == "A":
        A[:, :r] = -mdl.tau(md, u, side).real
    elif chart in ("Aprime", "TN"):
        A[:, :r] = -mdl.tau_tilde(md, u).real
    else:
        raise ValueError(f"unknown chart {chart!r}")
    dargs = dargZ_rows(md, u) if md.n_lights else None
    for k in range(md.n_lights):
        if not md.omega[k]:
            continue
        if Z[k] == 0:
            raise ModelError("d arg Z is undefined on the singular fiber; use the TN chart", "chart")
        f = _sign_factor(md, k, abs(Z[k]), th[k], chart, S, ctl)
        A += 0.5 * md.omega[k] * np.outer(md.D[k], dargs[k]) * f
    F = curvature_from_V(md, u, theta_e, ctl, h) if curvature else None
    return PotentialConnection(V, A, chart, md.p, F, {"S": tuple(S)})


def curvature_from_V(md: ModelData, u, theta_e, ctl=sfn.DEFAULT, h: float = 1e-4) -> np.ndarray:
    """Curvature 2-forms from first derivatives of ``V``.

    ``F_i = sum_jk [ 2i d_{theta_i} V_jk da_j ^ dabar_k
                     + i d_{a_k} V_ij dtheta_j ^ da_k - i d_{abar_k} V_ij dtheta_j ^ dabar_k ]``,
    the unique combination making the assembled family closed.
    """
    r = md.r
    x0 = np.concatenate([np.atleast_1d(theta_e).astype(float), np.atleast_1d(u).real, np.atleast_1d(u).imag])

    def Vf(x):
        return _V(md, x[r:2 * r] + 1j * x[2 * r:], x[:r], ctl)

    G, _ = fd_jacobian(Vf, x0, h)  # G[i, j, k]
    dth = G[:, :, :r]
    da = 0.5 * (G[:, :, r:2 * r] - 1j * G[:, :, 2 * r:])
    dab = 0.5 * (G[:, :, r:2 * r] + 1j * G[:, :, 2 * r:])
    dte, _, dA, dAb = basis_one_forms(r)
    F = np.zeros((r, 4 * r, 4 * r), dtype=complex)
    for i in range(r):
        for j in range(r):
            for k in range(r):
                F[i] += 2j * dth[j, k, i] * wedge(dA[j], dAb[k])
                F[i] += 1j * da[i, j, k] * wedge(dte[j], dA[k])
                F[i] -= 1j * dab[i, j, k] * wedge(dte[j], dAb[k])
    return F.real


# -- twistor forms -------------------------------------------------------------

def varpi_model(md: ModelData, pt: FieldPoint, chart: str = "A", side=None, S: Sequence[int] = (),
                ctl: sfn.SeriesControl = sfn.DEFAULT) -> TwoFormSample:
    """Explicit Gibbons-Hawking assembly of ``varpi^model(zeta)`` in the frame of ``chart``.

    ``dY_e ^ [p^{-1} d(fiber) + A + V (zeta^{-1} da - zeta dabar)] / (4 pi i)``.
    """
    pc = potential_connection(md, pt.u, pt.theta_e, chart, side, S, ctl=ctl)
    fiber = {"A": "theta_m", "Aprime": "theta_m'", "TN": "theta_m''"}[chart]
    return TwoFormSample(frame_labels(md.r, fiber), gh_assemble(md.p, pc.V, pc.A, pt.zeta))


def varpi_model_bessel(md: ModelData, pt: FieldPoint, side=None, ctl: sfn.SeriesControl = sfn.DEFAULT) -> TwoFormSample:
    """Fourier-Bessel form: semi-flat plus one correction per sign pair.

    ``(1/8 pi^2 i) Omega dY_g ^ [ K0sum (zeta^{-1} dZ - zeta dZbar) + 4|Z| K1sin d arg Z ]``
    with ``K0sum = sum_{n != 0} e^{in theta} K0(2|nZ|)`` and
    ``K1sin = sum_{n>0} sin(n theta) K1(2n|Z|)``.
    """
    r = md.r
    W = varpi_sf(md, pt, side).coeffs.copy()
    dte, dtm, da, dab = basis_one_forms(r)
    Z = mdl.light_Z(md, pt.u)
    th = mdl.light_theta(md, pt.theta_e)
    dargs = dargZ_rows(md, pt.u)
    z = pt.zeta
    for k in range(md.n_lights):
        if not md.omega[k]:
            continue
        D = md.D[k]
        dZ = D @ da
        dZb = D @ dab
        dY = dZ / z + 1j * (D @ dte) + z * dZb
        aZ = abs(Z[k])
        kc = sfn.K0_cos_sum(aZ, th[k], ctl)
        ks1 = np.pi / (4 * aZ) * sfn.A_bessel_sum(aZ, th[k], ctl=ctl)
        rhs = kc * (dZ / z - z * dZb) + 4 * aZ * ks1 * dargs[k]
        W += md.omega[k] * wedge(dY, rhs) / (8j * np.pi ** 2)
    return TwoFormSample(frame_labels(r), W)


def varpi_model_fd(md: ModelData, pt: FieldPoint, dec: SectorDecomposition, h: float = 1e-3,
                   continuation=None, cut_side=None) -> TwoFormSample:
    """``varpi^model`` from Richardson differences of the quadrature coordinates."""
    r = md.r
    dte, dtm, da, dab = basis_one_forms(r)
    z = pt.zeta
    dYe = da / z + 1j * dte + z * dab
    mags = [Charge.magnetic(md, i) for i in range(r)]

    def F(x):
        q = FieldPoint.from_frame(x, z)
        return np.array([ymodel(md, g, q, dec, continuation, cut_side=cut_side) for g in mags])

    dYm, _ = fd_jacobian(F, pt.frame_vector(), h)
    return TwoFormSample(frame_labels(r), varpi_from_logs(md.p, dYe, dYm))


def omega_forms_model(md: ModelData, u, theta_e, chart: str = "A", side=None, S=(), ctl=sfn.DEFAULT):
    """``(w_+, w_3, w_-)`` of the model family by Laurent extraction on the unit circle."""
    r = md.r

    def f(z):
        return varpi_model(md, FieldPoint.make(u, theta_e, np.zeros(r), z), chart, side, S, ctl).coeffs

    return laurent_split(f)


# -- Darboux coordinates ----------------------------------------------------------

def darboux_model(md: ModelData, pt: FieldPoint, side=None, ctl=sfn.DEFAULT) -> np.ndarray:
    """``z^model = z^sf - (i / 2 pi^2) sum_pairs Omega D sum_{n>0} sin(n theta) K0(2n|Z|)/n``."""
    z = darboux_sf(md, pt, side).astype(complex)
    Z = mdl.light_Z(md, pt.u)
    th = mdl.light_theta(md, pt.theta_e)
    for k in range(md.n_lights):
        if md.omega[k]:
            z -= 1j / (2 * np.pi ** 2) * md.omega[k] * md.D[k] * sfn.K0_sin_over_n_sum(abs(Z[k]), th[k], ctl)
    return z


def _complex_columns(J, md):
    r = md.r
    J = np.asarray(J, dtype=complex).copy()
    J[:, r:2 * r] *= md.pvec[None, :]
    return wirtinger_columns(J, r, slice(2 * r, 3 * r), slice(3 * r, 4 * r))


def darboux_jacobian_model(md: ModelData, pt: FieldPoint, h: float = 1e-3, side=None) -> float:
    """``|det d(a, abar, z^model, conj z^model) / d(theta_e, theta_m/p, a, abar)|`` by differences."""

    def F(x):
        q = FieldPoint.from_frame(x, pt.zeta)
        zz = darboux_model(md, q, side)
        return np.concatenate([q.u, q.u.conj(), zz, zz.conj()])

    J, _ = fd_jacobian(F, pt.frame_vector(), h)
    return float(abs(np.linalg.det(_complex_columns(J, md))))


def darboux_jacobian_model_closed(md: ModelData, pt: FieldPoint, ctl=sfn.DEFAULT) -> float:
    """``(2 pi)^{-2r} 2^r det V``."""
    V = _V(md, pt.u, pt.theta_e, ctl)
    return float((2 * np.pi) ** (-2 * md.r) * 2.0 ** md.r * abs(np.linalg.det(V)))


# -- primed and Taub-NUT charts ------------------------------------------------------

def _lifted_theta(md: ModelData, theta_e, S=()):
    th = mdl.light_theta(md, theta_e)
    out = _theta_hat(th)
    for k in S:
        out[k] = _wrap(th[k])
    return out


def theta_tn(md: ModelData, pt: FieldPoint, S: Sequence[int] = (), side=None) -> np.ndarray:
    """Fiber angles ``theta_m - sum Omega c (2 arg Z + pi)(theta - pi) / 4 pi``.

    Light angles are taken in ``(0, 2 pi)``, except those in ``S`` which are
    lifted to ``(-pi, pi]``; ``arg Z`` uses the cut-adapted branch.
    """
    th = _lifted_theta(md, pt.theta_e, S)
    Z = mdl.light_Z(md, pt.u)
    args = mdl.cut_arg(Z, md.cuts, side) if md.n_lights else np.zeros(0)
    out = pt.theta_m.astype(float).copy()
    for k in range(md.n_lights):
        out -= md.omega[k] * md.C[k] * (2 * args[k] + np.pi) * (th[k] - np.pi) / (4 * np.pi)
    return out


def theta_prime(md: ModelData, pt: FieldPoint, side=None) -> np.ndarray:
    """Primed fiber angles (light angles in ``(0, 2 pi)``)."""
    th = _theta_hat(mdl.light_theta(md, pt.theta_e))
    if np.any(th == 0):
        raise ModelError("the primed chart is undefined where a light angle vanishes", "chart")
    return theta_tn(md, pt, (), side)


def primed_jacobian(md: ModelData, pt: FieldPoint, h: float = 1e-4, side=None) -> float:
    """Determinant of ``d(theta_e, theta', a) / d(theta_e, theta, a)`` by differences."""
    r = md.r

    def F(x):
        q = FieldPoint.from_frame(x, pt.zeta)
        return np.concatenate([q.theta_e, theta_prime(md, q, side), q.u.real, q.u.imag])

    J, _ = fd_jacobian(F, pt.frame_vector(), h)
    return float(np.linalg.det(J))


@dataclass
class TNChart:
    """Taub-NUT chart around a point of the singular fiber.

    ``S`` lists the active lights (one quaternion ``q = w1 + w2 j`` each);
    ``pivot`` the columns of ``D_S`` that are traded for the quaternions,
    chosen so that ``det M = +-1``.  The chart vector is
    ``(Re w1, Im w1, Re w2, Im w2)`` per light followed by
    ``(theta_e, theta'', Re a, Im a)`` of the remaining indices.
    """

    md: ModelData
    S: Tuple[int, ...]
    pivot: Tuple[int, ...]
    rest: Tuple[int, ...]
    M: np.ndarray
    N: np.ndarray

    @property
    def s(self) -> int:
        return len(self.S)

    def frame(self) -> List[str]:
        lab = []
        for k in self.S:
            lab += [f"re_w1_{k}", f"im_w1_{k}", f"re_w2_{k}", f"im_w2_{k}"]
        for j in self.rest:
            lab += [f"theta_e{j + 1}", f"theta_m''{j + 1}", f"re_a{j + 1}", f"im_a{j + 1}"]
        return lab

    # moment maps
    @staticmethod
    def moment(w1, w2):
        """``theta = -(|w1|^2 - |w2|^2)/2``, ``Z = (i/2) w1 w2``."""
        return -0.5 * (abs(w1) ** 2 - abs(w2) ** 2), 0.5j * w1 * w2

    @staticmethod
    def invert_moment(theta, Z, arg_w2):
        """Quaternion ``(w1, w2)`` with the given moment map and ``arg w2``."""
        rad = np.sqrt(theta * theta + 4 * abs(Z) ** 2)
        B = theta + rad
        A = -theta + rad
        w2 = np.sqrt(max(B, 0.0)) * np.exp(1j * arg_w2)
        if abs(Z) > 0:
            w1 = np.sqrt(max(A, 0.0)) * np.exp(1j * (np.angle(-2j * Z) - arg_w2))
        else:
            w1 = np.sqrt(max(A, 0.0)) + 0j
        return complex(w1), complex(w2)

    def to_fiber_frame(self, y) -> np.ndarray:
        """Chart vector to ``(theta_e, theta'', Re a, Im a)``."""
        md, s, r = self.md, self.s, self.md.r
        y = np.asarray(y, dtype=float)
        w1 = y[0:4 * s:4] + 1j * y[1:4 * s:4]
        w2 = y[2:4 * s:4] + 1j * y[3:4 * s:4]
        th, Z = self.moment(w1, w2)
        rest = y[4 * s:].reshape(-1, 4) if r > s else np.zeros((0, 4))
        te = np.zeros(r)
        x = np.zeros(r)
        a = np.zeros(r, dtype=complex)
        R = list(self.rest)
        P = list(self.pivot)
        te[R] = rest[:, 0]
        x[R] = rest[:, 1]
        a[R] = rest[:, 2] + 1j * rest[:, 3]
        Sx = list(self.S)
        Minv = np.linalg.inv(self.M)
        te[P] = Minv @ (th - md.theta0[Sx] - self.N @ te[R])
        a[P] = Minv @ (Z - md.z0[Sx] - self.N @ a[R])
        x[P] = self.M.T @ np.angle(w2)
        return np.concatenate([te, x, a.real, a.imag])

    def from_fiber_frame(self, xf) -> np.ndarray:
        """Inverse of :meth:`to_fiber_frame` (angles of ``w2`` from ``theta''``)."""
        md, s, r = self.md, self.s, self.md.r
        xf = np.asarray(xf, dtype=float)
        te, x = xf[:r], xf[r:2 * r]
        a = xf[2 * r:3 * r] + 1j * xf[3 * r:]
        Sx = list(self.S)
        th = md.D[Sx] @ te + md.theta0[Sx]
        Z = md.D[Sx] @ a + md.z0[Sx]
        argw2 = np.linalg.solve(self.M.T, x[list(self.pivot)])
        y = []
        for t, z, ag in zip(th, Z, argw2):
            w1, w2 = self.invert_moment(float(_wrap(t)), complex(z), float(ag))
            y += [w1.real, w1.imag, w2.real, w2.imag]
        for j in self.rest:
            y += [te[j], x[j], a[j].real, a[j].imag]
        return np.asarray(y)

    def jacobian(self, y) -> np.ndarray:
        """Analytic ``d(theta_e, theta'', Re a, Im a) / d(chart vector)``."""
        md, s, r = self.md, self.s, self.md.r
        y = np.asarray(y, dtype=float)
        n = 4 * r
        J = np.zeros((n, n))
        Minv = np.linalg.inv(self.M)
        P = list(self.pivot)
        for sig in range(s):
            c = 4 * sig
            w1 = y[c] + 1j * y[c + 1]
            w2 = y[c + 2] + 1j * y[c + 3]
            if w2 == 0:
                raise ModelError("the fiber angle arg w2 is undefined where w2 = 0", "chart")
            dth = np.array([-w1.real, -w1.imag, w2.real, w2.imag])
            dZ = np.array([0.5j * w2, -0.5 * w2, 0.5j * w1, -0.5 * w1])
            darg = np.array([0.0, 0.0, (1 / w2).imag, (1 / w2).real])
            for ii, i in enumerate(P):
                J[i, c:c + 4] = Minv[ii, sig] * dth
                J[2 * r + i, c:c + 4] = (Minv[ii, sig] * dZ).real
                J[3 * r + i, c:c + 4] = (Minv[ii, sig] * dZ).imag
                J[r + i, c:c + 4] = self.M.T[ii, sig] * darg
        MinvN = Minv @ self.N
        for jj, j in enumerate(self.rest):
            c = 4 * s + 4 * jj
            J[j, c] = 1.0
            J[r + j, c + 1] = 1.0
            J[2 * r + j, c + 2] = 1.0
            J[3 * r + j, c + 3] = 1.0
            for ii, i in enumerate(P):
                J[i, c] = -MinvN[ii, jj]
                J[2 * r + i, c + 2] = -MinvN[ii, jj]
                J[3 * r + i, c + 3] = -MinvN[ii, jj]
        return J

    def chart_jacobian(self, y) -> float:
        """``|det d(a, abar, theta_e, theta'') / d(w1, w1bar, w2, w2bar, ...)|``.

        Rows ``(Re a, Im a)`` become ``(a, abar)`` and chart columns become
        Wirtinger derivatives.
        """
        r, s = self.md.r, self.s
        J = self.jacobian(y).astype(complex)
        T = np.eye(4 * r, dtype=complex)
        for i in range(r):
            T[2 * r + i, 2 * r + i], T[2 * r + i, 3 * r + i] = 1, 1j
            T[3 * r + i, 2 * r + i], T[3 * r + i, 3 * r + i] = 1, -1j
        J = T @ J
        for sig in range(s):
            c = 4 * sig
            for a_, b_ in ((c, c + 1), (c + 2, c + 3)):
                dx, dy = J[:, a_].copy(), J[:, b_].copy()
                J[:, a_], J[:, b_] = 0.5 * (dx - 1j * dy), 0.5 * (dx + 1j * dy)
        for jj in range(r - s):
            c = 4 * s + 4 * jj + 2
            dx, dy = J[:, c].copy(), J[:, c + 1].copy()
            J[:, c], J[:, c + 1] = 0.5 * (dx - 1j * dy), 0.5 * (dx + 1j * dy)
        return float(abs(np.linalg.det(J)))

    def q_norm2(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return np.array([np.sum(y[4 * i:4 * i + 4] ** 2) for i in range(self.s)])


def tn_chart(md: ModelData, S: Sequence[int]) -> TNChart:
    """Build the Taub-NUT chart for the active lights ``S``.

    Raises
    ------
    ModelError
        If some ``Omega != 1`` or no unimodular choice of pivot columns exists.
    """
    import itertools

    S = tuple(int(k) for k in S)
    if not S:
        raise ModelError("no active lights: nothing to compare", "A5")
    if any(md.lights[k].omega != 1 for k in S):
        raise ModelError("the Taub-NUT chart needs Omega = 1 on active lights", "A5")
    Mt = md.D[list(S)]
    r, s = md.r, len(S)
    for P in itertools.combinations(range(r), s):
        Mp = Mt[:, list(P)]
        if abs(abs(np.linalg.det(Mp)) - 1.0) < 1e-9:
            R = tuple(j for j in range(r) if j not in P)
            return TNChart(md, S, tuple(P), R, Mp, Mt[:, list(R)])
    raise ModelError("active lights do not span a primitive sublattice", "A5")


def tn_potential_connection(md: ModelData, tn: TNChart, u, theta_e) -> PotentialConnection:
    """``V^TN = 1 + sum_S D D^T / |q|^2`` and ``A^TN = (1/2) sum_S D d arg Z (theta/sqrt(4|Z|^2+theta^2) - 1)``."""
    r = md.r
    Z = mdl.light_Z(md, u)
    th = mdl.light_theta(md, theta_e)
    dargs = dargZ_rows(md, u)
    V = np.eye(r)
    A = np.zeros((r, 4 * r))
    for k in tn.S:
        t = float(_wrap(th[k]))
        rad = np.sqrt(4 * abs(Z[k]) ** 2 + t * t)
        V += np.outer(md.D[k], md.D[k]) / (2 * rad)
        A += 0.5 * np.outer(md.D[k], dargs[k]) * (t / rad - 1.0)
    return PotentialConnection(V, A, "TN", md.p)


def _pullback(W, J):
    return J.T @ W @ J


def tn_forms(md: ModelData, tn: TNChart, y, zeta, ctl=sfn.DEFAULT):
    """Model and Taub-NUT forms at chart vector ``y``, both in the chart frame.

    Returns
    -------
    model, tn : TwoFormSample
    """
    xf = tn.to_fiber_frame(y)
    r = md.r
    u = xf[2 * r:3 * r] + 1j * xf[3 * r:]
    te = xf[:r]
    J = tn.jacobian(y)
    pc = potential_connection(md, u, te, "TN", S=tn.S, ctl=ctl)
    Wm = gh_assemble(md.p, pc.V, pc.A, zeta)
    pt = tn_potential_connection(md, tn, u, te)
    Wt = gh_assemble(md.p, pt.V, pt.A, zeta)
    fr = tn.frame()
    return TwoFormSample(fr, _pullback(Wm, J)), TwoFormSample(fr, _pullback(Wt, J))


def tn_difference_study(md: ModelData, tn: TNChart, base_y, radii=(1e-1, 1e-2, 1e-3), zeta=1.0,
                        direction=None) -> Dict[str, object]:
    """Sup norm of ``varpi^model - varpi^TN`` in the chart frame as ``|q|`` shrinks.

    ``base_y`` fixes the non-quaternion coordinates; each quaternion is
    placed at ``|q| = radius`` along ``direction`` (default ``w2 = w1``).
    """
    s = tn.s
    if direction is None:
        direction = np.tile(np.array([1.0, 0.0, 1.0, 0.0]) / np.sqrt(2.0), s)
    direction = np.asarray(direction, dtype=float)
    out = []
    for rad in radii:
        y = np.asarray(base_y, dtype=float).copy()
        for i in range(s):
            d = direction[4 * i:4 * i + 4]
            y[4 * i:4 * i + 4] = rad * d / np.linalg.norm(d)
        m, t = tn_forms(md, tn, y, zeta)
        out.append(float(np.max(np.abs(m.coeffs - t.coeffs))))
    out = np.asarray(out)
    growth = float(np.max(out[1:] / np.maximum(out[:-1], 1e-300))) if len(out) > 1 else 1.0
    return {"radii": list(radii), "sup_norm": out.tolist(), "max_growth": growth, "bounded": bool(growth <= 2.0)}


# -- metric --------------------------------------------------------------------

def metric_gh(pc: PotentialConnection) -> np.ndarray:
    """``g = 4 sum V_ij (da_i dabar_j + dtheta_i dtheta_j / 4) + sum (V^-1)_ij eta_i eta_j``.

    ``eta_i = p_i^{-1} d(fiber_i) + A_i``.  Returned as a real symmetric
    matrix in the working frame.

    Raises
    ------
    ValueError
        If ``V`` is singular.
    """
    V = np.asarray(pc.V, dtype=float)
    r = V.shape[0]
    if abs(np.linalg.det(V)) < 1e-300:
        raise ValueError("V is singular")
    dte, dtm, da, dab = basis_one_forms(r)
    eta = dtm.real / np.asarray(pc.p, dtype=float)[:, None] + np.asarray(pc.A)
    g = np.zeros((4 * r, 4 * r))
    for i in range(r):
        for j in range(r):
            dadab = 0.5 * (np.outer(da[i], dab[j]) + np.outer(dab[j], da[i]))
            g += 4 * V[i, j] * (dadab.real + 0.25 * np.outer(dte[i].real, dte[j].real))
    g += eta.T @ np.linalg.inv(V) @ eta
    return 0.5 * (g + g.T)


def complex_structure(w_plus) -> np.ndarray:
    """Real endomorphism whose ``+i`` eigen-1-forms span the row space of ``w_plus``."""
    W = np.asarray(w_plus, dtype=complex)
    n = W.shape[0]
    U, sv, Vh = np.linalg.svd(W)
    Phi = (U[:, : n // 2].conj().T @ W)  # independent (1,0)-forms as rows
    B = np.concatenate([Phi, Phi.conj()], axis=0)
    Dg = np.diag(np.concatenate([1j * np.ones(n // 2), -1j * np.ones(n // 2)]))
    J = np.linalg.solve(B, Dg @ B)
    return J.real


def compatibility_residual(g, J, w3, scale: float = 4 * np.pi) -> float:
    """``max |g(J., .) - scale * w3|`` with ``g(JX, Y) = X^T J^T g Y``."""
    lhs = np.asarray(J).T @ np.asarray(g)
    return float(np.max(np.abs(lhs - scale * np.asarray(w3).real)))
