"""Semi-flat twistor family on the local model.

With ``Y_g = Z_g / zeta + i theta_g + zeta conj(Z_g)`` the semi-flat form is

    varpi_sf = -(1/4 pi) sum_i p_i^{-1} dY_{e_i} ^ dY_{m_i},

equivalently ``(1/8 pi) <dlog X ^ dlog X>`` with the dual pairing
``<e*_i, m*_i> = -1/p_i``.  Its Laurent pieces are
``w_+ = sum da_i ^ dz_i`` with Darboux coordinates
``z_i = (theta_m_i / p_i - sum_j tau_ij theta_e_j) / 2 pi`` and a real
``w_3``.
"""
from __future__ import annotations

import numpy as np

from . import modeldata as mdl
from .forms import (PotentialConnection, TwoFormSample, basis_one_forms, fd_jacobian, frame_labels,
                    gh_assemble, laurent_split, wedge, wirtinger_columns)
from .modeldata import Charge, FieldPoint, ModelData

__all__ = [
    "xsf",
    "ysf",
    "tau",
    "dY_forms_sf",
    "varpi_sf",
    "varpi_from_logs",
    "omega_forms_sf",
    "darboux_sf",
    "gh_decompose_sf",
    "jacobian_sf",
    "jacobian_sf_closed",
    "darboux_jacobian_sf",
    "darboux_jacobian_sf_closed",
    "period_matrix",
    "reassemble_sf",
    "fiber_restriction",
    "fiber_kahler_sf",
]


def tau(md: ModelData, u, side=None) -> np.ndarray:
    """Period matrix at ``u`` (see :func:`gmn_forge.modeldata.tau`)."""
    return mdl.tau(md, u, side)


def _charge_theta(md: ModelData, charge: Charge, pt: FieldPoint) -> float:
    n = np.asarray(charge.n if charge.n else (0,) * md.n_lights, dtype=float)
    return float(np.dot(charge.x, pt.theta_e) + np.dot(charge.y, pt.theta_m) + n @ md.theta0)


def ysf(md: ModelData, charge: Charge, pt: FieldPoint, side=None) -> complex:
    """``log X^sf = Z / zeta + i theta + zeta conj(Z)`` (no refinement sign)."""
    if pt.zeta == 0:
        raise ValueError("zeta = 0 is outside the twistor family")
    Z = mdl.central_charge(md, charge, pt.u, side)
    return Z / pt.zeta + 1j * _charge_theta(md, charge, pt) + pt.zeta * np.conj(Z)


def xsf(md: ModelData, charge: Charge, pt: FieldPoint, refinement=None, side=None) -> complex:
    """Semi-flat coordinate ``X^sf_charge(zeta)``.

    Parameters
    ----------
    refinement : callable, optional
        Sign function on charges (for example a
        :class:`gmn_forge.lattice.QuadraticRefinement` composed with the
        charge coordinates); multiplies the exponential.
    """
    val = np.exp(ysf(md, charge, pt, side))
    if refinement is not None:
        val = refinement(charge) * val
    return complex(val)


def dY_forms_sf(md: ModelData, pt: FieldPoint, side=None):
    """Frame coefficients of ``dY_{e_i}`` and ``dY_{m_i}`` (rows)."""
    dte, dtm, da, dab = basis_one_forms(md.r)
    T = mdl.tau(md, pt.u, side)
    z = pt.zeta
    dZm = md.pvec[:, None] * (T @ da)
    dZmb = md.pvec[:, None] * (T.conj() @ dab)
    dYe = da / z + 1j * dte + z * dab
    dYm = dZm / z + 1j * dtm + z * dZmb
    return dYe, dYm


def varpi_from_logs(p, dYe, dYm) -> np.ndarray:
    """``-(1/4 pi) sum_i p_i^{-1} dYe_i ^ dYm_i`` from 1-form rows."""
    W = np.zeros((dYe.shape[1],) * 2, dtype=complex)
    for i, pi in enumerate(p):
        W -= wedge(dYe[i], dYm[i]) / pi
    return W / (4.0 * np.pi)


def varpi_sf(md: ModelData, pt: FieldPoint, side=None) -> TwoFormSample:
    """Semi-flat holomorphic symplectic form at ``pt`` in the standard frame."""
    dYe, dYm = dY_forms_sf(md, pt, side)
    return TwoFormSample(frame_labels(md.r), varpi_from_logs(md.p, dYe, dYm))


def omega_forms_sf(md: ModelData, u, theta_e=None, theta_m=None, side=None):
    """``(w_+, w_3, w_-)`` of the semi-flat family by Laurent extraction."""
    r = md.r
    te = np.zeros(r) if theta_e is None else theta_e
    tm = np.zeros(r) if theta_m is None else theta_m

    def f(z):
        return varpi_sf(md, FieldPoint.make(u, te, tm, z), side).coeffs

    return laurent_split(f)


def darboux_sf(md: ModelData, pt: FieldPoint, side=None) -> np.ndarray:
    """``z_i = (theta_m_i / p_i - sum_j tau_ij theta_e_j) / 2 pi`` with lifted angles."""
    T = mdl.tau(md, pt.u, side)
    return (pt.theta_m / md.pvec - T @ pt.theta_e) / (2.0 * np.pi)


def gh_decompose_sf(md: ModelData, pt: FieldPoint, side=None) -> PotentialConnection:
    """Gibbons-Hawking data ``V = Im tau``, ``A_i = -sum_j Re tau_ij d theta_e_j``."""
    T = mdl.tau(md, pt.u, side)
    r = md.r
    A = np.zeros((r, 4 * r))
    A[:, :r] = -T.real
    return PotentialConnection(T.imag.copy(), A, "A", md.p)


def reassemble_sf(md: ModelData, pc: PotentialConnection, zeta) -> np.ndarray:
    return gh_assemble(md.p, pc.V, pc.A, zeta)


def _sf_real_coordinates(md: ModelData, zeta, side=None):
    # (Im Y_e, Im Y_m / p, Re Y_e, Re Y_m / p) as a function of the frame vector
    def F(x):
        pt = FieldPoint.from_frame(x, zeta)
        Ze = pt.u
        Zm = mdl.z_magnetic(md, pt.u, side)
        Ye = Ze / zeta + 1j * pt.theta_e + zeta * np.conj(Ze)
        Ym = (Zm / zeta + 1j * pt.theta_m + zeta * np.conj(Zm)) / md.pvec
        return np.concatenate([Ye.imag, Ym.imag, Ye.real, Ym.real])

    return F


def _to_complex_columns(J, md: ModelData):
    r = md.r
    J = np.asarray(J, dtype=complex).copy()
    # d/d(theta_m / p) = p d/d theta_m
    J[:, r:2 * r] *= md.pvec[None, :]
    return wirtinger_columns(J, r, slice(2 * r, 3 * r), slice(3 * r, 4 * r))


def jacobian_sf(md: ModelData, pt: FieldPoint, h: float = 1e-3, side=None) -> float:
    """``|det|`` of ``d(Im Y_e, Im Y_m/p, Re Y_e, Re Y_m/p) / d(theta_e, theta_m/p, a, abar)``.

    The derivatives in ``a`` are Richardson-extrapolated central
    differences of the central charges, independent of the analytic ``tau``.
    """
    F = _sf_real_coordinates(md, pt.zeta, side)
    J, _ = fd_jacobian(F, pt.frame_vector(), h)
    return float(abs(np.linalg.det(_to_complex_columns(J, md))))


def jacobian_sf_closed(md: ModelData, pt: FieldPoint, side=None) -> float:
    """``|(1/zeta + conj zeta)/2|^{2r} 2^r det Im tau``."""
    z = pt.zeta
    T = mdl.tau(md, pt.u, side)
    return float(abs((1.0 / z + np.conj(z)) / 2.0) ** (2 * md.r) * 2.0 ** md.r * abs(np.linalg.det(T.imag)))


def darboux_jacobian_sf(md: ModelData, pt: FieldPoint, h: float = 1e-3, side=None) -> float:
    """``|det d(a, abar, z, zbar) / d(theta_e, theta_m/p, a, abar)|`` by finite differences."""

    def F(x):
        q = FieldPoint.from_frame(x, pt.zeta)
        z = darboux_sf(md, q, side)
        return np.concatenate([q.u, q.u.conj(), z, z.conj()])

    J, _ = fd_jacobian(F, pt.frame_vector(), h)
    return float(abs(np.linalg.det(_to_complex_columns(J, md))))


def darboux_jacobian_sf_closed(md: ModelData, pt: FieldPoint, side=None) -> float:
    """``(2 pi)^{-2r} 2^r det Im tau``."""
    T = mdl.tau(md, pt.u, side)
    return float((2 * np.pi) ** (-2 * md.r) * 2.0 ** md.r * abs(np.linalg.det(T.imag)))


def period_matrix(md: ModelData, u, side=None) -> np.ndarray:
    """Normalized period matrix ``(diag(p_r/p_i) | p_r tau)``."""
    T = mdl.tau(md, u, side)
    pr = md.p[-1]
    return np.concatenate([np.diag([pr // pi for pi in md.p]).astype(complex), pr * T], axis=1)


def fiber_restriction(W, r: int) -> np.ndarray:
    """Restrict a 2-form to the torus fiber, the ``(theta_e, theta_m)`` block."""
    return np.asarray(W)[:2 * r, :2 * r]


def fiber_kahler_sf(md: ModelData, u, side=None) -> np.ndarray:
    """Fiber restriction of ``w_3`` written through the Darboux coordinates.

    Returns ``(i/2)(1/4 pi)(2 pi)^2 sum (Im tau)^{-1}_ij dz_i ^ d zbar_j``,
    which equals ``(1/4 pi) sum p_i^{-1} d theta_e_i ^ d theta_m_i``.  The
    ``(2 pi)^2`` undoes the normalization of ``z``.
    """
    r = md.r
    T = mdl.tau(md, u, side)
    Vi = np.linalg.inv(T.imag)
    dz = np.zeros((r, 2 * r), dtype=complex)
    dz[:, :r] = -T / (2 * np.pi)
    dz[:, r:] = np.diag(1.0 / md.pvec) / (2 * np.pi)
    W = np.zeros((2 * r, 2 * r), dtype=complex)
    for i in range(r):
        for j in range(r):
            W += Vi[i, j] * wedge(dz[i], dz[j].conj())
    return 1j * np.pi / 2.0 * W
