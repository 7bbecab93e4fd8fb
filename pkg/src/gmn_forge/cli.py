"""Command-line interface ``gmn-forge``.

Subcommands: ``frobenius``, ``check-data``, ``eval``, ``verify``, ``region``
and ``export``.  Floats are written with ``repr`` (shortest round-trip
decimal), CSV files follow RFC 4180 with CRLF line endings, and an invalid
model exits with status 2 after naming the failed assumption.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import lattice
from . import modeldata as mdl
from . import modelgeom as mg
from . import verify as vf
from .modeldata import FieldPoint, ModelError

log = logging.getLogger("gmn_forge")


def _setup_logging():
    level = os.environ.get("GMN_FORGE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def fmt(x) -> str:
    """Shortest round-trip decimal of a float."""
    return repr(float(x))


def _load_json(path: str):
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        line = text.splitlines()[exc.lineno - 1] if exc.lineno - 1 < len(text.splitlines()) else ""
        raise click.ClickException(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}\n  {line}")


def _load_model(path: str) -> mdl.ModelData:
    obj = _load_json(path)
    if not isinstance(obj, dict):
        raise ModelError("model config must be a JSON object", "schema")
    return mdl.model_from_json(obj)


def _invalid_model(exc: ModelError):
    click.echo(f"invalid model: {exc} [failed assumption: {exc.assumption}]", err=True)
    sys.exit(2)


def _parse_complex(s: str) -> complex:
    s = s.strip().replace(" ", "").replace("i", "j")
    try:
        return complex(s)
    except ValueError:
        raise click.BadParameter(f"cannot parse complex number {s!r}")


def _parse_zetas(spec: str):
    return [_parse_complex(v) for v in spec.split(",") if v.strip()]


def _parse_grid(spec: str):
    """``RE0:RE1:NR,IM0:IM1:NI`` -> list of complex base points (row major)."""
    try:
        parts = [tuple(p.split(":")) for p in spec.split(",")]
        (a0, a1, na), (b0, b1, nb) = parts
        xs = np.linspace(float(a0), float(a1), int(na))
        ys = np.linspace(float(b0), float(b1), int(nb))
    except ValueError:
        raise click.BadParameter("grid must look like RE0:RE1:NR,IM0:IM1:NI")
    return [complex(x, y) for y in ys for x in xs]


def _write_csv(path: Path, header, rows):
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    path.write_text(buf.getvalue(), newline="")


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


@click.group()
def main():
    """Model hyper-Kahler geometries: evaluation and certification."""
    _setup_logging()


@main.command()
@click.argument("input_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Directory for basis.json.")
def frobenius(input_file, out):
    """Frobenius basis of the pairing in INPUT_FILE ({"pairing": [[...]]})."""
    obj = _load_json(input_file)
    if not isinstance(obj, dict) or "pairing" not in obj:
        raise click.ClickException(f"{input_file}: expected an object with key 'pairing'")
    try:
        lat = lattice.SymplecticLattice.from_json(obj)
        fb = lattice.frobenius_basis(lat)
    except lattice.LatticeError as exc:
        raise click.ClickException(f"{input_file}: {exc}")
    rep = fb.to_json()
    rep["divisors"] = list(fb.p)
    rep["dual_divisors"] = [str(v) for v in lattice.dual_divisors(fb)]
    rep["violations"] = fb.violations(lat)
    text = json.dumps(rep, sort_keys=True)
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "basis.json").write_text(text + "\n")
    click.echo(text)


@main.command("check-data")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--u", "u_spec", default=None, help="Point u2 (comma-separated complex); default: the singular fibers.")
def check_data(model_path, u_spec):
    """Validate a model and its smoothness and positivity assumptions."""
    try:
        md = _load_model(model_path)
        if u_spec:
            pts = [np.array(_parse_zetas(u_spec))]
        elif md.multi_ov is not None:
            pts = [np.array([complex(*v)]) for v in md.multi_ov["m"]]
        else:
            pts = [np.asarray(md.domain.center, dtype=complex)]
        reports = [mdl.check_assumptions(md, u) for u in pts]
    except ModelError as exc:
        _invalid_model(exc)
    click.echo(json.dumps([r.to_json() for r in reports], sort_keys=True, default=float))
    failed = sorted({f for r in reports for f in r.failures})
    if failed:
        click.echo(f"invalid model: assumption(s) {', '.join(failed)} failed", err=True)
        sys.exit(2)


def _eval_row(md, u, te, tm, z, form):
    pt = FieldPoint.make(np.atleast_1d(u), te, tm, z if z is not None else 1.0)
    try:
        pc = mg.potential_connection(md, pt.u, pt.theta_e)
        if form == "varpi":
            W = mg.varpi_model(md, pt).coeffs
        else:
            W = mg.omega_forms_model(md, pt.u, pt.theta_e)[0]
    except (ModelError, ValueError) as exc:
        log.warning("skipping u=%s: %s", u, exc)
        return None
    n = W.shape[0]
    iu = np.triu_indices(n, 1)
    vals = [u.real, u.imag, te[0], tm[0]]
    if z is not None:
        vals += [z.real, z.imag]
    vals += list(pc.V.ravel()) + list(pc.A.ravel())
    vals += list(W[iu].real) + list(W[iu].imag)
    return [fmt(v) for v in vals]


@main.command("eval")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--zeta", "zeta_spec", default="1", help="Comma-separated twistor parameters.")
@click.option("--grid", "grid_spec", default="-2:2:5,-2:2:5", help="RE0:RE1:NR,IM0:IM1:NI for the first base coordinate.")
@click.option("--theta", "theta_spec", default="0.5,0.25", help="theta_e,theta_m (broadcast over coordinates).")
@click.option("--form", type=click.Choice(["varpi", "omega_plus"]), default="varpi")
@click.option("--jobs", default=1, show_default=True, type=int)
def eval_cmd(model_path, out, zeta_spec, grid_spec, theta_spec, form, jobs):
    """Evaluate V, A and the 2-form on a grid and write eval.csv.

    Columns: u_re, u_im, theta_e, theta_m, [zeta_re, zeta_im], V_ij (row
    major), A_ik (row major over the frame theta_e, theta_m, Re a, Im a),
    then the real and imaginary parts of the upper-triangular form
    coefficients.  Points on the excised locus are skipped.
    """
    try:
        md = _load_model(model_path)
    except ModelError as exc:
        _invalid_model(exc)
    zetas = _parse_zetas(zeta_spec)
    if form == "varpi" and any(z == 0 for z in zetas):
        raise click.BadParameter("zeta = 0 is outside the twistor family; use --form omega_plus", param_hint="--zeta")
    te_s, tm_s = (float(v) for v in theta_spec.split(","))
    r = md.r
    te = np.full(r, te_s)
    tm = np.full(r, tm_s)
    center = np.asarray(md.domain.center, dtype=complex)
    jobs_list = []
    for u1 in _parse_grid(grid_spec):
        u = center.copy()
        u[0] = u1
        for z in (zetas if form == "varpi" else [None]):
            jobs_list.append((u, z))
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as ex:
        rows = list(ex.map(lambda a: _eval_row(md, a[0][0] if r == 1 else a[0], te, tm, a[1], form), jobs_list))
    n = 4 * r
    header = ["u_re", "u_im", "theta_e", "theta_m"] + (["zeta_re", "zeta_im"] if form == "varpi" else [])
    header += [f"V_{i}{j}" for i in range(r) for j in range(r)]
    header += [f"A_{i}_{k}" for i in range(r) for k in range(n)]
    iu = np.triu_indices(n, 1)
    header += [f"W_{i}_{j}_re" for i, j in zip(*iu)] + [f"W_{i}_{j}_im" for i, j in zip(*iu)]
    Path(out).mkdir(parents=True, exist_ok=True)
    _write_csv(Path(out) / "eval.csv", header, [row for row in rows if row is not None])
    click.echo(str(Path(out) / "eval.csv"))


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), default=None)
@click.option("--family", type=click.Choice(["model", "sf", "both"]), default="model")
@click.option("--points", default=10, show_default=True, type=int)
@click.option("--tn-points", default=3, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--tol", default=1e-5, show_default=True, type=float, help="Closedness tolerance.")
@click.option("--rh/--no-rh", default=True, help="Include the Riemann-Hilbert checks.")
@click.option("--jobs", default=1, show_default=True, type=int)
def verify(model_path, out, family, points, tn_points, seed, tol, rh, jobs):
    """Run the certificate suite; exit 0 iff every certificate passes."""
    try:
        md = _load_model(model_path)
    except ModelError as exc:
        _invalid_model(exc)
    plan = vf.SamplePlan(n_points=points, tn_points=tn_points, seed=seed)
    tasks = []
    fams = ["model", "sf"] if family == "both" else [family]
    for fam in fams:
        tasks.append(lambda fam=fam: vf.certify_twistor(md, plan, fam, tol_closed=tol))
    if rh and md.n_lights:
        tasks.append(lambda: vf.certify_rh_properties(md, vf.SamplePlan(n_points=max(1, points // 5), tn_points=0,
                                                                          seed=seed)))
    tasks.append(lambda: vf.negative_controls(md, vf.SamplePlan(n_points=3, tn_points=0, seed=seed)))
    try:
        with ThreadPoolExecutor(max_workers=max(1, jobs)) as ex:
            bundles = list(ex.map(lambda t: t(), tasks))
    except ModelError as exc:
        _invalid_model(exc)
    bundle = bundles[0]
    for b in bundles[1:]:
        bundle = bundle.merge(b)
    for c in bundle.certificates:
        click.echo(c.line())
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "certificates.json").write_text(bundle.dumps() + "\n")
    sys.exit(0 if bundle.ok else 1)


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), default=None)
def region(model_path, out):
    """Positivity region report: root r0 of f, shell radii and margins."""
    try:
        md = _load_model(model_path)
    except ModelError as exc:
        _invalid_model(exc)
    r0 = mdl.f_root()
    rep = {"r0": r0, "r0_newton": mdl.f_root("newton")}
    if md.multi_ov is not None:
        mmax = max(abs(complex(*v)) for v in md.multi_ov["m"])
        rep["max_abs_m"] = mmax
        shells = {"minimal": None}
        if mmax < np.pi / 2:
            shells["annulus"] = (np.pi - 1.0, np.pi)
        for name, shell in shells.items():
            a = mdl.check_assumptions(md, np.array([0j]), shell=shell)
            rep[name] = {"shell": list(a.shell), "min_eigenvalue": a.a6_min_eig, "positive": a.a6_ok}
    else:
        a = mdl.check_assumptions(md, np.asarray(md.domain.center))
        rep["minimal"] = {"shell": list(a.shell), "min_eigenvalue": a.a6_min_eig, "positive": a.a6_ok}
    text = json.dumps(rep, sort_keys=True)
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "region.json").write_text(text + "\n")
    click.echo(text)


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--n", "npts", default=200, show_default=True, type=int)
def export(model_path, out, npts):
    """Write plot-ready data: f(r), V along a radial line, model JSON."""
    try:
        md = _load_model(model_path)
    except ModelError as exc:
        _invalid_model(exc)
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    rs = np.linspace(0.05, np.pi, npts)
    _write_csv(d / "f_curve.csv", ["r", "f"], [[fmt(r), fmt(mdl.f_function(r))] for r in rs])
    center = np.asarray(md.domain.center, dtype=complex)
    rows = []
    for t in np.linspace(0.05, 0.95 * md.domain.radii[0], npts):
        u = center.copy()
        u[0] = center[0] + t * np.exp(0.3j)
        try:
            pc = mg.potential_connection(md, u, np.zeros(md.r))
        except (ModelError, ValueError):
            continue
        rows.append([fmt(t)] + [fmt(v) for v in np.linalg.eigvalsh(pc.V)])
    _write_csv(d / "potential_radial.csv", ["t"] + [f"V_eig{i}" for i in range(md.r)], rows)
    _write_json(d / "model.json", mdl.model_to_json(md))
    click.echo(str(d))


if __name__ == "__main__":
    main()
