"""Pass/fail certificates for the twistor and Riemann-Hilbert hypotheses.

A :class:`Certificate` stores the residuals of one check over a sample set;
its verdict is ``max <= tol``.  Bundles are merged in name order so that a
run is reproducible given the model, the sample plan and the seed.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import qmc

from . import modeldata as mdl
from . import modelgeom as mg
from . import semiflat as sf
from .forms import (exterior_derivative, gh_assemble, holo_symplectic_certificate, laurent_split)
from .modeldata import Charge, FieldPoint, ModelData

log = logging.getLogger(__name__)

__all__ = [
    "Certificate",
    "CertificateBundle",
    "SamplePlan",
    "TNSample",
    "sample_points",
    "certify_twistor",
    "certify_rh_properties",
    "certify_potentials",
    "flip_eigenvalue",
    "negative_controls",
]

DEFAULT_ZETAS = (0.6 * np.exp(0.4j), 1.0 * np.exp(2.1j), 1.7 * np.exp(-0.9j))


@dataclass
class Certificate:
    """Residual summary of one check; ``verdict`` is ``max <= tol``."""

    name: str
    points: int
    max: float
    mean: float
    tol: float
    verdict: bool
    details: dict = field(default_factory=dict)

    @classmethod
    def from_residuals(cls, name, residuals, tol, **details) -> "Certificate":
        r = np.asarray(residuals, dtype=float).ravel()
        if r.size == 0:
            return cls(name, 0, 0.0, 0.0, float(tol), True, details)
        mx = float(np.max(r)) if np.all(np.isfinite(r)) else float("inf")
        return cls(name, int(r.size), mx, float(np.mean(r)), float(tol), bool(mx <= tol), details)

    def line(self) -> str:
        tag = "PASS" if self.verdict else "FAIL"
        return f"{tag} {self.name}: max={self.max:.3e} mean={self.mean:.3e} tol={self.tol:.1e} n={self.points}"


@dataclass
class CertificateBundle:
    certificates: List[Certificate]

    def __post_init__(self):
        self.certificates = sorted(self.certificates, key=lambda c: c.name)

    @property
    def ok(self) -> bool:
        return all(c.verdict for c in self.certificates)

    def __getitem__(self, name) -> Certificate:
        for c in self.certificates:
            if c.name == name:
                return c
        raise KeyError(name)

    def merge(self, other: "CertificateBundle") -> "CertificateBundle":
        return CertificateBundle(self.certificates + other.certificates)

    def to_json(self) -> dict:
        return {"ok": self.ok, "certificates": [asdict(c) for c in self.certificates]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, default=float)


# -- sample plans --------------------------------------------------------------

@dataclass(frozen=True)
class SamplePlan:
    """Seeded low-discrepancy sample over the model domain.

    Attributes
    ----------
    n_points : int
        Ordinary points, in the unprimed chart.
    tn_points : int
        Points in Taub-NUT charts, with ``|q|`` log-spaced between
        ``tn_radii``.
    radius_fraction : float
        Base points are drawn from the polydisk shrunk by this factor.
    exclusion : float
        Radius of the excluded tubes around singular fibers and cuts.
    """

    n_points: int = 25
    tn_points: int = 5
    seed: int = 0
    zetas: Tuple[complex, ...] = DEFAULT_ZETAS
    radius_fraction: float = 0.8
    exclusion: float = 1e-2
    tn_radii: Tuple[float, float] = (1e-1, 1e-2)
    h: float = 1e-3


@dataclass
class TNSample:
    chart: mg.TNChart
    y: np.ndarray
    q: float


def _near_excised(md: ModelData, u, eps) -> bool:
    Z = mdl.light_Z(md, u)
    for k in range(md.n_lights):
        if abs(Z[k]) < eps:
            return True
        # distance from Z to the cut ray
        d = np.exp(1j * md.cuts[k])
        t = (Z[k] * np.conj(d)).real
        if t > 0 and abs((Z[k] * np.conj(d)).imag) < eps:
            return True
    return False


def sample_points(md: ModelData, plan: SamplePlan):
    """Ordinary points and Taub-NUT samples for ``plan``.

    Returns
    -------
    points : list of FieldPoint
    tn : list of TNSample
    """
    r = md.r
    eng = qmc.Halton(d=4 * r, scramble=True, seed=plan.seed)
    center = np.asarray(md.domain.center, dtype=complex)
    radii = np.asarray(md.domain.radii, dtype=float) * plan.radius_fraction
    pts = []
    tries = 0
    while len(pts) < plan.n_points and tries < 100 * max(plan.n_points, 1):
        tries += 1
        x = eng.random(1)[0]
        rho = radii * np.sqrt(x[:r])
        u = center + rho * np.exp(2j * np.pi * x[r:2 * r])
        if _near_excised(md, u, plan.exclusion):
            continue
        pts.append(FieldPoint.make(u, 2 * np.pi * x[2 * r:3 * r], 2 * np.pi * x[3 * r:]))
    tn = []
    active = [k for k, lc in enumerate(md.lights) if lc.omega == 1]
    if plan.tn_points and active:
        eng2 = qmc.Halton(d=4 * r, scramble=True, seed=plan.seed + 1)
        qs = np.geomspace(plan.tn_radii[0], plan.tn_radii[1], plan.tn_points)
        for i, q in enumerate(qs):
            k = active[i % len(active)]
            chart = mg.tn_chart(md, [k])
            x = eng2.random(1)[0]
            w = x[:4] - 0.5
            w = q * w / np.linalg.norm(w)
            rest = []
            for jj, j in enumerate(chart.rest):
                base = center[j] + 0.3 * radii[j] * np.exp(2j * np.pi * x[4 + jj])
                rest += [2 * np.pi * x[(4 + jj) % (4 * r)], 0.5, base.real, base.imag]
            tn.append(TNSample(chart, np.concatenate([w, rest]), float(q)))
    return pts, tn


# -- form evaluators -------------------------------------------------------------

def _form_field(md: ModelData, family: str, zeta, chart=None):
    """Return ``W(x)`` on the chart's coordinate vector."""
    if chart is None:
        if family == "sf":
            return lambda x: sf.varpi_sf(md, FieldPoint.from_frame(x, zeta)).coeffs
        return lambda x: mg.varpi_model(md, FieldPoint.from_frame(x, zeta)).coeffs

    def W(y):
        m, _ = mg.tn_forms(md, chart, y, zeta)
        return m.coeffs

    return W


def _pc_and_metric(md: ModelData, family, x, chart=None):
    r = md.r
    if chart is None:
        pt = FieldPoint.from_frame(x)
        if family == "sf":
            pc = sf.gh_decompose_sf(md, pt)
        else:
            pc = mg.potential_connection(md, pt.u, pt.theta_e)
        return pc, mg.metric_gh(pc)
    xf = chart.to_fiber_frame(x)
    pc = mg.potential_connection(md, xf[2 * r:3 * r] + 1j * xf[3 * r:], xf[:r], "TN", S=chart.S)
    J = chart.jacobian(x)
    return pc, J.T @ mg.metric_gh(pc) @ J


def _holo_residual(W) -> Tuple[float, float, float]:
    c = holo_symplectic_certificate(W)
    bad = float(abs(c.rank - c.expected_rank)) + (0.0 if c.ok else 1.0)
    return bad, c.kernel_margin, c.top_wedge


def certify_twistor(md: ModelData, plan: SamplePlan = SamplePlan(), family: str = "model",
                    tol_closed: float = 1e-5, tol_real: float = 1e-10) -> CertificateBundle:
    """Closedness, holomorphic-symplectic, reality, positivity and signature checks.

    Parameters
    ----------
    family : {'model', 'sf'}
        The Taub-NUT samples are used only for the model family.
    """
    pts, tns = sample_points(md, plan)
    if family != "model":
        tns = []
    samples = [(p.frame_vector(), None, 1.0) for p in pts] + [(t.y, t.chart, t.q) for t in tns]
    closed, holo, holo_p, real, vpos, gpos, compat = [], [], [], [], [], [], []
    margins, wedges, vmins, gmins = [], [], [], []
    for x, chart, q in samples:
        step = plan.h * (min(1.0, q) if chart is not None else 1.0)
        for z in plan.zetas:
            Wf = _form_field(md, family, z, chart)
            dW, err = exterior_derivative(Wf, x, step)
            scale = max(1.0, float(np.max(np.abs(Wf(x)))))
            closed.append(float(np.max(np.abs(dW))) / scale)
            W = Wf(x)
            b, mgn, tw = _holo_residual(W)
            holo.append(b)
            margins.append(mgn)
            wedges.append(tw)
            Wr = _form_field(md, family, -1.0 / np.conj(z), chart)(x)
            real.append(float(np.max(np.abs(W - Wr.conj()))) / scale)
        wp, w3, wm = laurent_split(lambda z: _form_field(md, family, z, chart)(x))
        b, mgn, tw = _holo_residual(wp)
        holo_p.append(b)
        margins.append(mgn)
        wedges.append(tw)
        pc, g = _pc_and_metric(md, family, x, chart)
        lv = float(np.min(np.linalg.eigvalsh(pc.V)))
        lg = float(np.min(np.linalg.eigvalsh(g)))
        vmins.append(lv)
        gmins.append(lg)
        vpos.append(max(0.0, -lv) + (1.0 if lv <= 0 else 0.0))
        gpos.append(max(0.0, -lg) + (1.0 if lg <= 0 else 0.0))
        J = mg.complex_structure(wp)
        compat.append(mg.compatibility_residual(g, J, w3) / max(1.0, float(np.max(np.abs(g)))))
    tag = f"{family}."
    certs = [
        Certificate.from_residuals(tag + "closedness", closed, tol_closed, h=plan.h, richardson=True,
                                   zetas=[str(z) for z in plan.zetas], tn_points=len(tns)),
        Certificate.from_residuals(tag + "holo_symplectic", holo, 0.0,
                                   min_kernel_margin=float(np.min(margins)), min_top_wedge=float(np.min(wedges))),
        Certificate.from_residuals(tag + "holo_symplectic_omega_plus", holo_p, 0.0),
        Certificate.from_residuals(tag + "reality", real, tol_real),
        Certificate.from_residuals(tag + "potential_positive", vpos, 0.0, min_eigenvalue=float(np.min(vmins))),
        Certificate.from_residuals(tag + "metric_positive", gpos, 0.0, min_eigenvalue=float(np.min(gmins))),
        Certificate.from_residuals(tag + "metric_compatible", compat, 1e-8),
    ]
    return CertificateBundle(certs)


def flip_eigenvalue(pc, index: int = 0):
    """Copy of ``pc`` with one eigenvalue of ``V`` negated (negative control)."""
    w, U = np.linalg.eigh(pc.V)
    w = w.copy()
    w[index] = -w[index]
    out = mg.PotentialConnection((U * w) @ U.T, pc.A.copy(), pc.chart, pc.p, pc.F, dict(pc.extra))
    return out


def certify_potentials(pcs: Sequence, name: str = "potential_positive") -> CertificateBundle:
    """Positivity of ``V`` and of the metric for explicit potential data."""
    vpos, gpos = [], []
    for pc in pcs:
        lv = float(np.min(np.linalg.eigvalsh(pc.V)))
        vpos.append(max(0.0, -lv) + (1.0 if lv <= 0 else 0.0))
        lg = float(np.min(np.linalg.eigvalsh(mg.metric_gh(pc))))
        gpos.append(max(0.0, -lg) + (1.0 if lg <= 0 else 0.0))
    return CertificateBundle([Certificate.from_residuals(name, vpos, 0.0),
                              Certificate.from_residuals("metric_positive", gpos, 0.0)])


# -- Riemann-Hilbert properties ---------------------------------------------------

def _populated_rays(md: ModelData, u, dec: mg.SectorDecomposition):
    ang = mg.bps_angles(md, u)
    rays: Dict[float, List[Tuple[int, int]]] = {}
    for k, lc in enumerate(md.lights):
        if lc.omega == 0:
            continue
        for j, s in enumerate((1, -1)):
            phi = dec.boundary_ray(ang[k, j])
            key = round(float(np.mod(phi, 2 * np.pi)), 12)
            rays.setdefault(key, []).append((k, s))
    return rays


def _ktransform_log(md: ModelData, charge: Charge, pt: FieldPoint, lights):
    # log of prod (1 - X_g')^{Omega <g, g'>} over the lights on a ray
    out = 0j
    Z = mdl.light_Z(md, pt.u)
    th = mdl.light_theta(md, pt.theta_e)
    for k, s in lights:
        pk = s * mg._pair_y(charge, md, k)
        X = np.exp(s * Z[k] / pt.zeta + 1j * s * th[k] + pt.zeta * s * np.conj(Z[k]))
        out += md.lights[k].omega * pk * np.log1p(-X)
    return out


def certify_rh_properties(md: ModelData, plan: SamplePlan = SamplePlan(n_points=6, tn_points=0),
                          dec: Optional[mg.SectorDecomposition] = None, K: int = 5,
                          radius: float = 0.8, eps: float = 1e-6) -> CertificateBundle:
    """Jump, reality, holomorphy and small-``zeta`` checks for the model coordinates.

    Jumps are measured on genuinely off-ray points ``zeta e^{+-i eps}`` and
    Richardson-extrapolated to ``eps -> 0``; crossing a ray clockwise must
    multiply ``X_g`` by ``prod (1 - X_g')^{Omega <g, g'>}``.
    """
    pts, _ = sample_points(md, plan)
    jump, jump_local, reality, holo, limit = [], [], [], [], []
    for pt in pts:
        d = dec if dec is not None else mg.good_decomposition(md, pt.u, K)
        charges = [Charge.magnetic(md, i) for i in range(md.r)]
        local = [Charge.electric(md, i) for i in range(md.r)]
        for phi, lights in sorted(_populated_rays(md, pt.u, d).items()):
            z0 = radius * np.exp(1j * phi)

            def ratio(e, g):
                a = FieldPoint.make(pt.u, pt.theta_e, pt.theta_m, z0 * np.exp(-1j * e))
                b = FieldPoint.make(pt.u, pt.theta_e, pt.theta_m, z0 * np.exp(1j * e))
                return mg.ymodel(md, g, a, d) - mg.ymodel(md, g, b, d)

            on = FieldPoint.make(pt.u, pt.theta_e, pt.theta_m, z0)
            for g in charges:
                pred = _ktransform_log(md, g, on, lights)
                ext = 2 * ratio(eps / 2, g) - ratio(eps, g)
                jump.append(abs(np.exp(ext) - np.exp(pred)) / max(1.0, abs(np.exp(pred))))
            for g in local:
                jump_local.append(abs(2 * ratio(eps / 2, g) - ratio(eps, g)))
        g = charges[0]
        for z in plan.zetas:
            a = FieldPoint.make(pt.u, pt.theta_e, pt.theta_m, z)
            b = FieldPoint.make(pt.u, pt.theta_e, pt.theta_m, -1.0 / np.conj(z))
            reality.append(abs(np.conj(mg.xmodel(md, g, a, d)) * mg.xmodel(md, g, b, d) - 1.0))
            # d/d zetabar by central differences in Re and Im of zeta
            hz = 1e-4 * abs(z)

            def Y(w):
                return mg.ymodel(md, g, FieldPoint.make(pt.u, pt.theta_e, pt.theta_m, w), d)

            dx = (Y(z + hz) - Y(z - hz)) / (2 * hz)
            dy = (Y(z + 1j * hz) - Y(z - 1j * hz)) / (2 * hz)
            holo.append(abs(0.5 * (dx + 1j * dy)) / max(1.0, abs(dx)))
        # zeta -> 0 along a direction away from every ray
        if md.n_lights:
            Zk = mdl.light_Z(md, pt.u)[0]
            direction = np.angle(-Zk) + np.pi / 3
            seq = []
            for n in range(7, 13):
                w = 10.0 ** (-n) * np.exp(1j * direction)
                q = FieldPoint.make(pt.u, pt.theta_e, pt.theta_m, w)
                seq.append(-mg.ymodel_correction(md, g, q, d))
            limit.append(float(np.max(np.abs(np.diff(np.exp(seq))))))
    certs = [
        Certificate.from_residuals("rh.jump", jump, 1e-6, eps=eps, extrapolation="richardson"),
        Certificate.from_residuals("rh.jump_local", jump_local, 1e-8),
        Certificate.from_residuals("rh.reality", reality, 1e-10),
        Certificate.from_residuals("rh.holomorphy", holo, 1e-6, h_rel=1e-4),
        Certificate.from_residuals("rh.small_zeta_limit", limit, 1e-6),
    ]
    return CertificateBundle(certs)


# -- negative controls -------------------------------------------------------------

def negative_controls(md: ModelData, plan: SamplePlan = SamplePlan(n_points=3, tn_points=0)) -> CertificateBundle:
    """Deliberately broken inputs; every inner check must fail.

    The returned bundle passes when each corrupted input is detected:
    a flipped eigenvalue of ``V``, a non-closed perturbation of the form,
    a degenerate form, a broken multi-OV constraint, and a sectorial
    decomposition with a ray placed on a BPS ray.
    """
    pts, _ = sample_points(md, plan)
    detected = {}
    pcs = [mg.potential_connection(md, p.u, p.theta_e) for p in pts]
    detected["flipped_V"] = not certify_potentials([flip_eigenvalue(pc) for pc in pcs]).ok
    x = pts[0].frame_vector()
    z = plan.zetas[0]
    base = _form_field(md, "model", z)
    r = md.r

    def bent(y):
        W = base(y).copy()
        W[0, 2 * r] += y[2 * r + 1]
        W[2 * r, 0] -= y[2 * r + 1]
        return W

    dW, _ = exterior_derivative(bent, x, plan.h)
    detected["non_closed_form"] = bool(np.max(np.abs(dW)) > 1e-5)
    W = base(x)
    Wd = W.copy()
    Wd[0, :] = 0.0
    Wd[:, 0] = 0.0
    detected["degenerate_form"] = not holo_symplectic_certificate(Wd).ok
    try:
        mdl.build_multi_ov([0.3, 0.2], [0.5, 0.5])
        detected["broken_sum_m"] = False
    except mdl.ModelError:
        detected["broken_sum_m"] = True
    if md.n_lights:
        ang = mg.bps_angles(md, pts[0].u)[0, 0]
        bad = mg.SectorDecomposition(5, float(np.mod(ang, np.pi / 5)))
        try:
            mg.ymodel(md, Charge.magnetic(md, 0), FieldPoint.make(pts[0].u, pts[0].theta_e, pts[0].theta_m, 0.5), bad)
            detected["ray_on_bps_ray"] = False
        except mdl.ModelError:
            detected["ray_on_bps_ray"] = True
    res = [0.0 if v else 1.0 for v in detected.values()]
    return CertificateBundle([Certificate.from_residuals("negative_controls", res, 0.0, detected=detected)])
