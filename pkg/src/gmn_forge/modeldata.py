"""Local model data: light charges, central charges, tau, monodromy, assumptions.

Charges of the extended lattice are triples ``(x, y, n)``: ``x`` are the
coefficients on the electric basis ``e_i``, ``y`` on the magnetic basis
``m_i`` and ``n`` the flavor coefficients, one per stored light charge.
Light charge ``k`` is ``(c_k / p, 0, unit_k)``.  Pairings are

    <g, g'> = sum_i p_i (y_i x'_i - x_i y'_i),

so flavor directions pair trivially and ``<m_i, light_k> = c_{k,i}``.

Each light charge is stored once per sign pair.  Sums over the full set of
light charges are folded into pair sums; the branch of ``log(Z / pi)`` is
the cut-adapted one with ``arg Z`` in ``[cut, cut + 2 pi)`` and the partner
uses ``log(-Z / pi) = log(Z / pi) + i pi``.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from . import lattice

__all__ = [
    "LightCharge",
    "Domain",
    "ModelData",
    "FieldPoint",
    "Charge",
    "ModelError",
    "build_multi_ov",
    "model_from_json",
    "model_to_json",
    "light_Z",
    "light_theta",
    "cut_arg",
    "log_pi",
    "tau_tilde",
    "tau",
    "z_magnetic",
    "central_charge",
    "pairing",
    "monodromy_map",
    "cut_monodromy",
    "a6_matrix",
    "AssumptionReport",
    "check_assumptions",
    "f_function",
    "f_root",
]

log = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


class ModelError(ValueError):
    """Invalid model data; ``assumption`` names the violated condition."""

    def __init__(self, msg, assumption="data"):
        super().__init__(msg)
        self.assumption = assumption


@dataclass(frozen=True)
class LightCharge:
    """One representative of a sign pair of light charges.

    Attributes
    ----------
    c : tuple of int
        Pairings with the magnetic basis; ``p_i`` divides ``c_i``.
    z0 : complex
        Constant part of the central charge.
    theta0 : float
        Constant part of the fiber angle, in ``[0, 2 pi)``.
    omega : int
        Non-negative BPS index.
    cut : float
        Direction of the branch cut of ``log Z`` in the ``Z`` plane.
    """

    c: Tuple[int, ...]
    z0: complex = 0j
    theta0: float = 0.0
    omega: int = 1
    cut: float = -np.pi / 2


@dataclass(frozen=True)
class Domain:
    """Polydisk ``|a_i - center_i| < radii_i``."""

    center: Tuple[complex, ...]
    radii: Tuple[float, ...]

    def contains(self, u) -> bool:
        u = np.atleast_1d(np.asarray(u, dtype=complex))
        return bool(np.all(np.abs(u - np.asarray(self.center)) < np.asarray(self.radii)))


@dataclass(frozen=True)
class ModelData:
    """Immutable local model.

    Attributes
    ----------
    r : int
    p : tuple of int
        Elementary divisors ``p_1 | ... | p_r``.
    lights : tuple of LightCharge
    tau_coeffs : tuple of ndarray
        ``tau_coeffs[d]`` has shape ``(r,) * (d + 2)`` and is fully
        symmetric; ``tau_tilde_ij(a) = sum_d T[d][i, j, k...] a_k ...``.
    domain : Domain
    """

    r: int
    p: Tuple[int, ...]
    lights: Tuple[LightCharge, ...]
    tau_coeffs: Tuple[np.ndarray, ...]
    domain: Domain
    name: str = ""
    multi_ov: Optional[dict] = field(default=None, compare=False)

    def __post_init__(self):
        if self.r < 1 or len(self.p) != self.r:
            raise ModelError("r must be positive and match len(p)")
        for i, pi in enumerate(self.p):
            if pi <= 0:
                raise ModelError("divisors must be positive")
            if i and pi % self.p[i - 1]:
                raise ModelError("divisors must form a chain p_1 | p_2 | ...")
        for k, lc in enumerate(self.lights):
            if len(lc.c) != self.r:
                raise ModelError(f"light {k}: c has wrong length")
            if any(ci % pi for ci, pi in zip(lc.c, self.p)):
                raise ModelError(f"light {k}: p_i must divide c_i", "A3")
            if lc.omega < 0 or int(lc.omega) != lc.omega:
                raise ModelError(f"light {k}: omega must be a non-negative integer", "A2")
            if not (0.0 <= lc.theta0 < TWO_PI):
                raise ModelError(f"light {k}: theta0 must lie in [0, 2 pi)")
        for d, T in enumerate(self.tau_coeffs):
            T = np.asarray(T)
            if T.shape != (self.r,) * (d + 2):
                raise ModelError(f"tau_tilde degree {d} coefficient has shape {T.shape}")
            for perm in itertools.permutations(range(d + 2)):
                if not np.allclose(T, np.transpose(T, perm), atol=1e-14):
                    raise ModelError("tau_tilde coefficients must be fully symmetric")

    @property
    def n_lights(self) -> int:
        return len(self.lights)

    @property
    def pvec(self) -> np.ndarray:
        return np.asarray(self.p, dtype=float)

    @property
    def C(self) -> np.ndarray:
        """Integer matrix of pairings ``c_{k,i}``, shape ``(L, r)``."""
        return np.array([lc.c for lc in self.lights], dtype=float).reshape(-1, self.r)

    @property
    def D(self) -> np.ndarray:
        """Electric coefficients ``c_{k,i} / p_i`` of the lights."""
        return self.C / self.pvec

    @property
    def omega(self) -> np.ndarray:
        return np.array([lc.omega for lc in self.lights], dtype=float)

    @property
    def z0(self) -> np.ndarray:
        return np.array([lc.z0 for lc in self.lights], dtype=complex)

    @property
    def theta0(self) -> np.ndarray:
        return np.array([lc.theta0 for lc in self.lights], dtype=float)

    @property
    def cuts(self) -> np.ndarray:
        return np.array([lc.cut for lc in self.lights], dtype=float)

    def with_lights(self, lights) -> "ModelData":
        return ModelData(self.r, self.p, tuple(lights), self.tau_coeffs, self.domain, self.name)


@dataclass(frozen=True)
class FieldPoint:
    """Evaluation point: base ``u``, fiber angles and twistor parameter."""

    u: np.ndarray
    theta_e: np.ndarray
    theta_m: np.ndarray
    zeta: complex = 1.0
    chart: str = "unprimed"

    @classmethod
    def make(cls, u, theta_e, theta_m, zeta=1.0, chart="unprimed"):
        return cls(np.atleast_1d(np.asarray(u, dtype=complex)),
                   np.atleast_1d(np.asarray(theta_e, dtype=float)),
                   np.atleast_1d(np.asarray(theta_m, dtype=float)), complex(zeta), chart)

    def frame_vector(self) -> np.ndarray:
        """Real coordinates ``(theta_e, theta_m, Re a, Im a)``."""
        return np.concatenate([self.theta_e, self.theta_m, self.u.real, self.u.imag])

    @classmethod
    def from_frame(cls, x, zeta=1.0, chart="unprimed"):
        x = np.asarray(x, dtype=float)
        r = x.size // 4
        return cls(x[2 * r:3 * r] + 1j * x[3 * r:], x[:r].copy(), x[r:2 * r].copy(), complex(zeta), chart)


@dataclass(frozen=True)
class Charge:
    """Charge ``(x, y, n)`` in electric, magnetic and flavor coordinates."""

    x: Tuple
    y: Tuple
    n: Tuple = ()

    @classmethod
    def electric(cls, md: ModelData, i: int) -> "Charge":
        x = [0] * md.r
        x[i] = 1
        return cls(tuple(x), (0,) * md.r, (0,) * md.n_lights)

    @classmethod
    def magnetic(cls, md: ModelData, i: int) -> "Charge":
        y = [0] * md.r
        y[i] = 1
        return cls((0,) * md.r, tuple(y), (0,) * md.n_lights)

    @classmethod
    def light(cls, md: ModelData, k: int, sign: int = 1) -> "Charge":
        lc = md.lights[k]
        n = [0] * md.n_lights
        n[k] = sign
        return cls(tuple(sign * ci // pi for ci, pi in zip(lc.c, md.p)), (0,) * md.r, tuple(n))

    def vector(self, md: ModelData) -> np.ndarray:
        n = self.n if self.n else (0,) * md.n_lights
        return np.array(list(self.x) + list(self.y) + list(n), dtype=np.int64)

    @classmethod
    def from_vector(cls, md: ModelData, v) -> "Charge":
        v = [int(t) for t in v]
        r = md.r
        return cls(tuple(v[:r]), tuple(v[r:2 * r]), tuple(v[2 * r:]))


# -- evaluation of central charges -------------------------------------------

def light_Z(md: ModelData, u) -> np.ndarray:
    """Central charges ``Z_k(u) = sum_i (c_ki / p_i) u_i + z0_k``."""
    u = np.atleast_1d(np.asarray(u, dtype=complex))
    return md.D @ u + md.z0


def light_theta(md: ModelData, theta_e) -> np.ndarray:
    """Fiber angles of the lights, ``sum_i (c_ki / p_i) theta_e_i + theta0_k``."""
    return md.D @ np.atleast_1d(np.asarray(theta_e, dtype=float)) + md.theta0


def cut_arg(Z, cut, side=None):
    """``arg Z`` in ``[cut, cut + 2 pi)``.

    ``side='-'`` (clockwise of the cut) returns ``cut + 2 pi`` on the cut,
    ``side='+'`` returns ``cut``.
    """
    Z = np.asarray(Z, dtype=complex)
    cut = np.broadcast_to(np.asarray(cut, dtype=float), Z.shape)
    t = np.mod(np.angle(Z) - cut, TWO_PI)
    if side is not None:
        on = np.minimum(t, TWO_PI - t) < 1e-12
        t = np.where(on, TWO_PI if side == "-" else 0.0, t)
    return cut + t


def log_pi(Z, cut, side=None):
    """``log(Z / pi)`` on the cut-adapted branch."""
    Z = np.asarray(Z, dtype=complex)
    return np.log(np.abs(Z) / np.pi) + 1j * cut_arg(Z, cut, side)


def tau_tilde(md: ModelData, u) -> np.ndarray:
    u = np.atleast_1d(np.asarray(u, dtype=complex))
    out = np.zeros((md.r, md.r), dtype=complex)
    for T in md.tau_coeffs:
        T = np.asarray(T, dtype=complex)
        while T.ndim > 2:
            T = T @ u
        out += T
    return out


def _z_tilde(md: ModelData, u) -> np.ndarray:
    u = np.atleast_1d(np.asarray(u, dtype=complex))
    out = np.zeros(md.r, dtype=complex)
    for d, T in enumerate(md.tau_coeffs):
        T = np.asarray(T, dtype=complex)
        while T.ndim > 1:
            T = T @ u
        out += T / (d + 1)
    return md.pvec * out


def _pair_weights(md: ModelData):
    """``Omega_k (c_k/p) (c_k/p)^T`` stacked, shape ``(L, r, r)``."""
    D = md.D
    return md.omega[:, None, None] * D[:, :, None] * D[:, None, :]


def tau(md: ModelData, u, side=None) -> np.ndarray:
    """Period matrix ``tau = tau_tilde + sum_pairs W (L / 2 pi i + 1/4)``."""
    Z = light_Z(md, u)
    if np.any(Z == 0):
        raise ModelError("tau is singular where a light central charge vanishes", "A3")
    L = log_pi(Z, md.cuts, side)
    fac = L / (2j * np.pi) + 0.25
    return tau_tilde(md, u) + np.einsum("k,kij->ij", fac, _pair_weights(md))


def z_magnetic(md: ModelData, u, side=None) -> np.ndarray:
    """Magnetic central charges ``Z_{m_i}(u)``."""
    Z = light_Z(md, u)
    L = log_pi(Z, md.cuts, side)
    pair = Z * (L - 1.0) / (2j * np.pi) + Z / 4.0
    return _z_tilde(md, u) + (md.omega * pair) @ md.C


def central_charge(md: ModelData, charge: Charge, u, side=None) -> complex:
    """``Z_charge(u)`` with the stored branch convention.

    Raises
    ------
    ModelError
        If the charge has magnetic part and ``u`` lies on a cut without a
        side choice (``'-'`` clockwise, ``'+'`` counterclockwise).
    """
    x = np.asarray(charge.x, dtype=float)
    y = np.asarray(charge.y, dtype=float)
    n = np.asarray(charge.n if charge.n else (0,) * md.n_lights, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=complex))
    val = x @ u + n @ md.z0
    if np.any(y):
        if side is None and md.n_lights:
            Z = light_Z(md, u)
            t = np.mod(np.angle(Z) - md.cuts, TWO_PI)
            if np.any((np.minimum(t, TWO_PI - t) < 1e-12) & (md.C @ y != 0)):
                raise ModelError("point lies on a branch cut; choose side '+' or '-'")
        val = val + y @ z_magnetic(md, u, side)
    return complex(val)


def pairing(md: ModelData, g1: Charge, g2: Charge):
    """``<g1, g2> = sum p_i (y1_i x2_i - x1_i y2_i)``."""
    return sum(p * (b1 * a2 - a1 * b2) for p, a1, b1, a2, b2 in zip(md.p, g1.x, g1.y, g2.x, g2.y))


def monodromy_map(md: ModelData, winding: Sequence[int]) -> np.ndarray:
    """Integer matrix of ``g -> g - sum_k n_k <g, g_k> Omega_k g_k``.

    The sum runs over stored sign pairs, which equals half the sum over all
    light charges.  Acts on column vectors ``(x, y, n)``.
    """
    r, L = md.r, md.n_lights
    dim = 2 * r + L
    A = np.eye(dim, dtype=np.int64)
    for k, nk in enumerate(winding):
        if not nk:
            continue
        gk = Charge.light(md, k).vector(md)
        # <g, g_k> = sum_i y_i c_ki is linear in the y block
        row = np.zeros(dim, dtype=np.int64)
        row[r:2 * r] = np.asarray(md.lights[k].c, dtype=np.int64)
        A -= int(nk) * int(md.lights[k].omega) * np.outer(gk, row)
    return A


def cut_monodromy(md: ModelData, lights: Sequence[int]) -> np.ndarray:
    """Gluing map across the cuts of ``lights``: ``Z_g`` clockwise equals ``Z_{rho g}`` counterclockwise."""
    w = [0] * md.n_lights
    for k in lights:
        w[k] = -1
    return monodromy_map(md, w)


def charge_pairing_matrix(md: ModelData) -> np.ndarray:
    """Matrix ``G`` with ``<g, g'> = g^T G g'`` on ``(x, y, n)`` vectors."""
    r, L = md.r, md.n_lights
    G = np.zeros((2 * r + L, 2 * r + L), dtype=np.int64)
    for i, p in enumerate(md.p):
        G[r + i, i] = p
        G[i, r + i] = -p
    return G


# -- constructions -----------------------------------------------------------

def build_multi_ov(m, y, p: int = 1, cut: float = -np.pi / 2) -> ModelData:
    """Multi-Ooguri-Vafa model with singular fibers at ``m`` and flavor data ``y``.

    Parameters
    ----------
    m : sequence of complex
        Positions of the singular fibers; must sum to zero, ``|m_j| < pi``.
    y : sequence of float
        Flavor angles are ``2 pi y``; ``sum y`` must be an integer.
    p : int
        Nonzero elementary divisor.

    Returns
    -------
    ModelData
        ``r = 1``, lights ``c = (p)``, ``z0 = -m_j``, ``theta0_j`` the
        representative in ``[0, 2 pi)`` of ``2 pi sum_{k<j} y_k``, and a
        constant background that makes ``tau = (1/2 pi i) sum log((u - m_j)/pi)``.
    """
    m = np.atleast_1d(np.asarray(m, dtype=complex))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if m.size != y.size or m.size == 0:
        raise ModelError("m and y must be nonempty and of equal length", "data")
    if abs(m.sum()) > 1e-12:
        raise ModelError("sum of m must vanish", "A3")
    if abs(y.sum() - round(y.sum())) > 1e-12:
        raise ModelError("sum of y must be an integer", "A3")
    if np.any(np.abs(m) >= np.pi):
        raise ModelError("|m_j| must be smaller than pi", "A1")
    p = int(p)
    if p == 0:
        raise ModelError("p must be nonzero")
    pa = abs(p)
    partial = np.concatenate([[0.0], np.cumsum(y)[:-1]])
    th0 = np.mod(TWO_PI * partial, TWO_PI)
    th0 = np.where(th0 >= TWO_PI, 0.0, th0)
    lights = tuple(LightCharge((p,), complex(-mj), float(t), 1, cut) for mj, t in zip(m, th0))
    # the constant background removes the +1/4 per pair from tau
    n = m.size
    tau0 = np.full((1, 1), -0.25 * n * (p / pa) ** 2, dtype=complex)
    md = ModelData(1, (pa,), lights, (tau0,), Domain((0j,), (np.pi,)), name="multi_ov",
                   multi_ov={"m": [[float(v.real), float(v.imag)] for v in m], "y": list(map(float, y)), "p": p})
    return md


def model_from_json(obj: dict) -> ModelData:
    """Parse a model config (full form or ``{"multi_ov": {...}}`` shorthand)."""
    if "multi_ov" in obj:
        mo = obj["multi_ov"]
        m = [complex(*v) if isinstance(v, (list, tuple)) else complex(v) for v in mo["m"]]
        return build_multi_ov(m, mo["y"], mo.get("p", 1))
    try:
        r = int(obj["r"])
        p = tuple(int(v) for v in obj["p"])
        lights = []
        for lj in obj.get("lights", []):
            z0 = lj.get("z0", [0.0, 0.0])
            lights.append(LightCharge(tuple(int(v) for v in lj["c"]), complex(z0[0], z0[1]),
                                      float(lj.get("theta0", 0.0)) % TWO_PI, int(lj.get("omega", 1)),
                                      float(lj.get("cut", -np.pi / 2))))
        coeffs = []
        tt = obj.get("tau_tilde", {})
        for d, T in enumerate(tt.get("coeffs", [])):
            arr = np.asarray(T, dtype=float if not _has_complex(T) else complex)
            if arr.dtype != complex and arr.ndim == d + 3 and arr.shape[-1] == 2:
                arr = arr[..., 0] + 1j * arr[..., 1]
            coeffs.append(arr.astype(complex))
        if not coeffs:
            coeffs = [np.eye(r, dtype=complex) * 1j * float(tt.get("imag_const", 1.0))]
        dom = obj.get("domain", {})
        center = tuple(complex(*c) for c in dom.get("center", [[0.0, 0.0]] * r))
        radii = tuple(float(v) for v in dom.get("radii", [np.pi] * r))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"malformed model config: {exc}", "schema") from exc
    return ModelData(r, p, tuple(lights), tuple(coeffs), Domain(center, radii), name=obj.get("name", ""))


def _has_complex(T) -> bool:
    return any(isinstance(v, complex) for v in np.ravel(np.asarray(T, dtype=object)))


def model_to_json(md: ModelData) -> dict:
    if md.multi_ov is not None:
        return {"multi_ov": md.multi_ov}
    return {
        "r": md.r,
        "p": list(md.p),
        "lights": [{"c": list(lc.c), "z0": [lc.z0.real, lc.z0.imag], "theta0": lc.theta0,
                    "omega": lc.omega, "cut": lc.cut} for lc in md.lights],
        "tau_tilde": {"coeffs": [np.stack([np.asarray(T).real, np.asarray(T).imag], -1).tolist()
                                 for T in md.tau_coeffs]},
        "domain": {"center": [[c.real, c.imag] for c in md.domain.center], "radii": list(md.domain.radii)},
    }


# -- assumptions -------------------------------------------------------------

def f_function(r):
    """``f(r) = -(1/2pi) log(r/pi) - 1 / (2 sqrt(pi) sqrt(r) (e^{2r} - 1))``."""
    r = np.asarray(r, dtype=float)
    return -np.log(r / np.pi) / TWO_PI - 1.0 / (2.0 * np.sqrt(np.pi) * np.sqrt(r) * np.expm1(2.0 * r))


def _f_prime(r):
    s = np.sqrt(r)
    e = np.expm1(2.0 * r)
    g = s * e
    dg = 0.5 / s * e + s * 2.0 * (e + 1.0)
    return -1.0 / (TWO_PI * r) + dg / (2.0 * np.sqrt(np.pi) * g * g)


def f_root(method: str = "bisection", tol: float = 1e-13) -> float:
    """Root of :func:`f_function` on ``(0, pi)``.

    ``f`` is increasing below its root and changes sign once on
    ``[0.1, 1]``.  ``method`` is ``'bisection'`` (hand-written) or
    ``'newton'``; ``'brentq'`` uses scipy as a third route.
    """
    lo, hi = 0.1, 1.0
    if method == "bisection":
        flo = f_function(lo)
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            fm = f_function(mid)
            if (fm < 0) == (flo < 0):
                lo, flo = mid, fm
            else:
                hi = mid
        return 0.5 * (lo + hi)
    if method == "newton":
        x = 0.4
        for _ in range(100):
            step = f_function(x) / _f_prime(x)
            x -= step
            if abs(step) < tol:
                break
        return float(x)
    if method == "brentq":
        return float(brentq(f_function, lo, hi, xtol=tol))
    raise ValueError(f"unknown method {method!r}")


def a6_matrix(md: ModelData, u) -> np.ndarray:
    """``Im tau - (1/(2 sqrt pi)) sum_pairs W / (sqrt|Z| (e^{2|Z|} - 1))``."""
    Z = np.abs(light_Z(md, u))
    corr = md.omega / (np.sqrt(Z) * np.expm1(2.0 * Z)) / (2.0 * np.sqrt(np.pi))
    D = md.D
    return tau(md, u).imag - np.einsum("k,ki,kj->ij", corr, D, D)


@dataclass
class AssumptionReport:
    """Outcome of :func:`check_assumptions`; ``failures`` names violations."""

    u: np.ndarray
    zero_lights: List[int]
    special_sets: List[Tuple[int, ...]]
    a5_ok: bool
    a6_ok: bool
    a6_min_eig: float
    shell: Tuple[float, float]
    grid_zeros: int
    partial_sums_distinct: Optional[bool]
    failures: List[str]

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return {
            "u": [[float(v.real), float(v.imag)] for v in self.u],
            "zero_lights": self.zero_lights,
            "special_sets": [list(s) for s in self.special_sets],
            "A5": self.a5_ok,
            "A6": self.a6_ok,
            "A6_min_eigenvalue": self.a6_min_eig,
            "shell": list(self.shell),
            "grid_zeros": self.grid_zeros,
            "partial_sums_distinct": self.partial_sums_distinct,
            "failures": self.failures,
            "ok": self.ok,
        }


def _consistent_mod_2pi(Cint: List[List[int]], b: np.ndarray, tol=1e-9) -> bool:
    """Does ``C theta = b (mod 2 pi)`` have a real solution ``theta``?"""
    Dm, U, _ = lattice.smith_normal_form(Cint)
    rank = sum(1 for i in range(min(len(Dm), len(Dm[0]))) if Dm[i][i])
    Ub = np.asarray(U, dtype=float) @ (b / TWO_PI)
    rest = Ub[rank:]
    return bool(np.all(np.abs(rest - np.round(rest)) < tol))


def check_assumptions(md: ModelData, u2, shell=None, n_grid: int = 720, n_shell: int = 256,
                      zero_tol: float = 1e-12) -> AssumptionReport:
    """Check the smoothness (A5) and positivity (A6) conditions at ``u2``.

    A5: for every fiber angle where a set ``S`` of lights with
    ``Z(u2) = 0`` has ``theta = 0`` simultaneously, their electric images
    must be a basis of a primitive sublattice.  The sets are enumerated
    exactly with a Smith-form solvability test; for ``r = 1`` a grid scan of
    ``n_grid`` angles plus the exact zeros is also recorded.

    A6: the matrix of :func:`a6_matrix` is positive definite on the shell
    ``inner < |u - center| < outer`` (default inner radius
    ``max |Z zero| + r0 + 0.05``, outer the domain radius).
    """
    u2 = np.atleast_1d(np.asarray(u2, dtype=complex))
    failures: List[str] = []
    Z = light_Z(md, u2) if md.n_lights else np.zeros(0, complex)
    zero = [k for k in range(md.n_lights) if abs(Z[k]) < zero_tol and md.lights[k].omega]
    Dint = [[ci // pi for ci, pi in zip(md.lights[k].c, md.p)] for k in range(md.n_lights)]
    special = []
    a5 = True
    for size in range(1, len(zero) + 1):
        for T in itertools.combinations(zero, size):
            b = -np.array([md.lights[k].theta0 for k in T])
            if not _consistent_mod_2pi([Dint[k] for k in T], b):
                continue
            special.append(T)
            vecs = [Dint[k] + [0] * md.r for k in T]
            try:
                prim = lattice.is_primitive(vecs)
            except lattice.LatticeError:
                prim = False
            if not prim:
                a5 = False
    if not a5:
        failures.append("A5")
    grid_zeros = 0
    if md.r == 1 and zero:
        th = np.linspace(0.0, TWO_PI, n_grid, endpoint=False)
        exact = []
        for k in zero:
            d = Dint[k][0]
            if d:
                exact.extend((-md.lights[k].theta0 + TWO_PI * j) / d for j in range(abs(d)))
        th = np.concatenate([th, np.mod(exact, TWO_PI)])
        for t in th:
            vals = np.mod(np.array([Dint[k][0] * t + md.lights[k].theta0 for k in zero]), TWO_PI)
            hit = np.minimum(vals, TWO_PI - vals) < 1e-9
            grid_zeros += int(hit.any())
            if hit.sum() > 1:
                if "A5" not in failures:
                    failures.append("A5")
                a5 = False
    partial = None
    if md.multi_ov is not None:
        partial = True
        m = np.array([complex(*v) for v in md.multi_ov["m"]])
        th0 = md.theta0
        for i in range(m.size):
            J = np.flatnonzero(np.abs(m - m[i]) < 1e-12)
            vals = np.sort(np.mod(th0[J], TWO_PI))
            if J.size > 1:
                gaps = np.diff(np.concatenate([vals, [vals[0] + TWO_PI]]))
                if np.any(gaps < 1e-9):
                    partial = False
    # A6 on the shell
    center = np.asarray(md.domain.center)
    if shell is None:
        zero_r = max([float(np.max(np.abs(u2 - center)))] + [0.0])
        if md.multi_ov is not None:
            zero_r = max(abs(complex(*v)) for v in md.multi_ov["m"])
        shell = (zero_r + f_root() + 0.05, float(min(md.domain.radii)))
    inner, outer = shell
    min_eig = np.inf
    if md.n_lights and inner < outer:
        rng = np.random.default_rng(12345)
        for _ in range(n_shell):
            rad = inner + (outer - inner) * rng.uniform(0.02, 0.98)
            direction = rng.normal(size=md.r) + 1j * rng.normal(size=md.r)
            direction /= np.linalg.norm(direction)
            u = center + rad * direction
            if np.any(np.abs(light_Z(md, u)) < 1e-9):
                continue
            ev = np.linalg.eigvalsh(a6_matrix(md, u))
            min_eig = min(min_eig, float(ev[0]))
    elif not md.n_lights:
        min_eig = float(np.linalg.eigvalsh(tau_tilde(md, u2).imag)[0])
    a6 = bool(min_eig > 0)
    if not a6:
        failures.append("A6")
    log.debug("assumptions at %s: %s", u2, failures)
    return AssumptionReport(u2, zero, special, a5, a6, float(min_eig), (float(inner), float(outer)),
                            grid_zeros, partial, failures)
