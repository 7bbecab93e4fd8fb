"""Coefficient-matrix calculus for 2-forms in the real frame.

A 2-form ``w = (1/2) sum W_kl dx_k ^ dx_l`` is stored as the antisymmetric
matrix ``W``; a 1-form is a coefficient vector.  The working frame is
``(theta_e_1..r, theta_m_1..r, Re a_1..r, Im a_1..r)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

__all__ = [
    "TwoFormSample",
    "PotentialConnection",
    "frame_labels",
    "basis_one_forms",
    "wedge",
    "gh_assemble",
    "laurent_split",
    "fd_derivative",
    "fd_jacobian",
    "exterior_derivative",
    "pfaffian",
    "HoloSymplecticCertificate",
    "holo_symplectic_certificate",
    "wirtinger_columns",
]


def frame_labels(r: int, fiber: str = "theta_m") -> List[str]:
    idx = range(1, r + 1)
    return ([f"theta_e{i}" for i in idx] + [f"{fiber}{i}" for i in idx]
            + [f"re_a{i}" for i in idx] + [f"im_a{i}" for i in idx])


@dataclass
class TwoFormSample:
    """Complex antisymmetric coefficient matrix in a declared frame."""

    frame: List[str]
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        n = len(self.frame)
        if self.coeffs.shape != (n, n):
            raise ValueError("coefficient matrix does not match the frame")

    def antisymmetry_residual(self) -> float:
        return float(np.max(np.abs(self.coeffs + self.coeffs.T)))

    def to_json(self) -> dict:
        return {"frame": list(self.frame), "re": self.coeffs.real.tolist(), "im": self.coeffs.imag.tolist()}

    def dumps(self) -> str:
        return json.dumps(self.to_json())


@dataclass
class PotentialConnection:
    """Gibbons-Hawking data at a point.

    Attributes
    ----------
    V : ndarray, shape (r, r)
    A : ndarray, shape (r, 4r)
        Connection 1-forms as rows of frame coefficients.
    chart : str
        ``'A'`` (unprimed fiber angle), ``'Aprime'`` or ``'TN'``.
    F : ndarray, shape (r, 4r, 4r), optional
        Curvature 2-forms.
    p : tuple of int
    """

    V: np.ndarray
    A: np.ndarray
    chart: str
    p: Sequence[int]
    F: Optional[np.ndarray] = None
    extra: dict = field(default_factory=dict)


def basis_one_forms(r: int):
    """Frame coefficient vectors of ``d theta_e``, ``d theta_m``, ``da``, ``d abar``."""
    n = 4 * r
    E = np.eye(n)
    dte = E[:r].astype(complex)
    dtm = E[r:2 * r].astype(complex)
    da = E[2 * r:3 * r] + 1j * E[3 * r:]
    dab = E[2 * r:3 * r] - 1j * E[3 * r:]
    return dte, dtm, da, dab


def wedge(a, b) -> np.ndarray:
    """Coefficient matrix of ``a ^ b`` for 1-forms ``a``, ``b``."""
    a = np.asarray(a)
    b = np.asarray(b)
    return np.outer(a, b) - np.outer(b, a)


def gh_assemble(p, V, A, zeta, fiber_forms=None) -> np.ndarray:
    """``(1/4 pi i) sum_i dlogX_e_i ^ [p_i^{-1} d fiber_i + A_i + V_ij (zeta^-1 da_j - zeta dabar_j)]``.

    ``zeta = 0`` or ``inf`` is not allowed; use :func:`laurent_split` for
    the individual forms.
    """
    V = np.asarray(V)
    r = V.shape[0]
    dte, dtm, da, dab = basis_one_forms(r)
    if fiber_forms is None:
        fiber_forms = dtm
    zeta = complex(zeta)
    W = np.zeros((4 * r, 4 * r), dtype=complex)
    dY = da / zeta + 1j * dte + zeta * dab
    eta = fiber_forms / np.asarray(p, dtype=float)[:, None] + np.asarray(A) + V @ (da / zeta - zeta * dab)
    for i in range(r):
        W += wedge(dY[i], eta[i])
    return W / (4j * np.pi)


def laurent_split(func: Callable[[complex], np.ndarray], rho: float = 1.0):
    """Split ``w(zeta) = -(i/2 zeta) w_+ + w_3 - (i/2) zeta w_-``.

    Samples at ``zeta = rho, i rho, -rho`` and solves the 3-term Laurent
    system exactly.
    """
    zs = np.array([rho, 1j * rho, -rho], dtype=complex)
    vals = np.stack([np.asarray(func(z)) for z in zs])
    Mx = np.stack([1.0 / zs, np.ones(3), zs], axis=1)
    coef = np.linalg.solve(Mx, vals.reshape(3, -1)).reshape(vals.shape)
    wp = 2j * coef[0]
    w3 = coef[1]
    wm = 2j * coef[2]
    return wp, w3, wm


def fd_derivative(f: Callable, x, k: int, h: float, richardson: bool = True):
    """Central difference of ``f`` along coordinate ``k``; Richardson at ``h/2``."""
    x = np.asarray(x, dtype=float)

    def cd(hh):
        e = np.zeros_like(x)
        e[k] = hh
        return (np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * hh)

    d1 = cd(h)
    if not richardson:
        return d1, np.zeros_like(np.abs(d1))
    d2 = cd(0.5 * h)
    dr = (4.0 * d2 - d1) / 3.0
    return dr, np.abs(dr - d2)


def fd_jacobian(f: Callable, x, h, richardson: bool = True):
    """Jacobian ``J[..., k] = d f / d x_k`` with per-coordinate steps ``h``."""
    x = np.asarray(x, dtype=float)
    hs = np.broadcast_to(np.asarray(h, dtype=float), x.shape)
    cols, errs = [], []
    for k in range(x.size):
        d, e = fd_derivative(f, x, k, hs[k], richardson)
        cols.append(d)
        errs.append(e)
    return np.stack(cols, axis=-1), np.stack(errs, axis=-1)


def exterior_derivative(W: Callable, x, h, richardson: bool = True):
    """Finite-difference ``dW`` of a 2-form field; returns ``(dW, err)``.

    ``dW[k, l, m] = d_k W_lm + d_l W_mk + d_m W_kl``.
    """
    G, E = fd_jacobian(W, x, h, richardson)  # G[l, m, k] = d_k W_lm
    dW = np.einsum("lmk->klm", G) + np.einsum("mkl->klm", G) + np.einsum("klm->klm", G)
    err = np.einsum("lmk->klm", E) + np.einsum("mkl->klm", E) + np.einsum("klm->klm", E)
    return dW, err


def pfaffian(A) -> complex:
    """Pfaffian of an antisymmetric matrix by pivoted elimination."""
    A = np.array(A, dtype=complex)
    n = A.shape[0]
    if n % 2:
        return 0.0
    pf = 1.0 + 0j
    for k in range(0, n - 1, 2):
        piv = k + 1 + int(np.argmax(np.abs(A[k, k + 1:])))
        if piv != k + 1:
            A[[k + 1, piv]] = A[[piv, k + 1]]
            A[:, [k + 1, piv]] = A[:, [piv, k + 1]]
            pf = -pf
        if A[k, k + 1] == 0:
            return 0.0 + 0j
        pf *= A[k, k + 1]
        if k + 2 < n:
            tau = A[k, k + 2:] / A[k, k + 1]
            A[k + 2:, k + 2:] += np.outer(A[k + 1, k + 2:], tau) - np.outer(tau, A[k + 1, k + 2:])
    return pf


@dataclass
class HoloSymplecticCertificate:
    """Rank, kernel-splitting and top-wedge margins of a complex 2-form."""

    rank: int
    expected_rank: int
    kernel_margin: float
    top_wedge: float

    @property
    def ok(self) -> bool:
        return self.rank == self.expected_rank and self.kernel_margin > 1e-8 and self.top_wedge > 0


def holo_symplectic_certificate(W, rtol: float = 1e-9) -> HoloSymplecticCertificate:
    """Certify that ``W`` has rank ``2r`` and ``ker W + ker conj(W)`` is everything.

    ``kernel_margin`` is the least singular value of the stacked, orthonormal
    kernel bases; ``top_wedge`` is the normalized ``|w^r ^ conj(w)^r|``,
    read off as the middle coefficient of ``Pf(W + s conj(W))``.
    """
    W = np.asarray(W, dtype=complex)
    n = W.shape[0]
    r2 = n // 2
    scale = max(np.max(np.abs(W)), 1e-300)
    Wn = W / scale
    sv = np.linalg.svd(Wn, compute_uv=False)
    rank = int(np.sum(sv > rtol * sv[0]))
    _, _, Vh = np.linalg.svd(Wn)
    K = Vh[r2:].conj().T
    S = np.concatenate([K, K.conj()], axis=1)
    margin = float(np.linalg.svd(S, compute_uv=False)[-1])
    N = 2 * n + 2
    s = np.exp(2j * np.pi * np.arange(N) / N)
    pf = np.array([pfaffian(Wn + sj * Wn.conj()) for sj in s])
    coeff = np.mean(pf * s ** (-(n // 4)))
    return HoloSymplecticCertificate(rank, r2, margin, float(abs(coeff)))


def wirtinger_columns(J, r: int, re_slice: slice, im_slice: slice):
    """Replace ``(d/dx, d/dy)`` column blocks by ``(d/da, d/dabar)``."""
    J = np.asarray(J, dtype=complex)
    dx = J[:, re_slice]
    dy = J[:, im_slice]
    out = J.copy()
    out[:, re_slice] = 0.5 * (dx - 1j * dy)
    out[:, im_slice] = 0.5 * (dx + 1j * dy)
    return out
