"""Experiment drivers: configuration, stability sweeps, probes and reconstruction.

Every driver takes an :class:`ExperimentConfig`.  Configurations are plain
dataclasses that round-trip through TOML files and JSON sidecars, and all
randomness is drawn from generators seeded by ``cfg.seed`` so that repeated
runs write identical CSV files.
"""

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from . import dtn as dtn_mod
from . import fem
from . import geometry as geo
from .deformation import (
    build_field,
    collar_triangulation,
    vertex_field,
)
from .errors import (
    DescentStalled,
    FeatureUnderResolved,
    InadmissibleIterate,
    PolystabError,
)
from .shape_calculus import (
    F_prime_boundary,
    F_prime_distributed,
    F_value,
    _solutions,
    derivative_matrix,
    derivative_norm_probe,
    pullback_dtn,
    vertex_fraction_derivatives,
)

# ---------------------------------------------------------------- configuration


@dataclass
class BaseShape:
    """Reference inclusion: an axis-aligned cube or a polyhedron read from OFF."""

    kind: str = "cube"
    center: tuple = (0.5, 0.5, 0.4)
    side: float = 0.3
    path: str = ""

    def build(self):
        if self.kind == "cube":
            return geo.cube_polyhedron(self.center, self.side)
        if self.kind == "off":
            return geo.read_off(self.path)
        raise ValueError(f"unknown base shape {self.kind!r}")


@dataclass
class FamilyConfig:
    """One-parameter perturbation family of the base inclusion.

    ``scaling`` scales about the centroid by ``1 + m``; ``translation``
    shifts by ``m * direction``; ``vertex`` moves one vertex by
    ``m * direction`` (``vertex = -1`` picks the vertex maximising
    ``x + y + z``).  ``magnitudes`` is the schedule of ``m``.
    """

    kind: str = "scaling"
    magnitudes: tuple = (0.005, 0.01, 0.02, 0.05)
    direction: tuple = (0.0, 0.0, 1.0)
    vertex: int = -1

    def member(self, p0, magnitude):
        m = float(magnitude)
        d = np.asarray(self.direction, dtype=float)
        if self.kind == "scaling":
            return p0.scaled(1.0 + m)
        if self.kind == "translation":
            return p0.translated(m * d / np.linalg.norm(d))
        if self.kind == "vertex":
            return displaced_vertex(p0, self.vertex, m * d / np.linalg.norm(d))
        raise ValueError(f"unknown family kind {self.kind!r}")


@dataclass
class ProbeConfig:
    """Singular-pairing probe and shape-derivative check settings.

    The probe point sits on a face of the base inclusion; the second
    inclusion is the base shifted by ``shift`` and the sources approach the
    face along ``normal`` at the listed ``distances``.  The derivative check
    uses the family member of size ``derivative_magnitude`` and centred
    differences with the steps ``fd_steps``.
    """

    point: tuple = (0.5, 0.5, 0.55)
    normal: tuple = (0.0, 0.0, 1.0)
    shift: tuple = (0.0, 0.0, -0.1)
    distances: tuple = (0.0375, 0.01875, 0.009375, 0.0046875)
    t_list: tuple = (0.4, 0.2, 0.1, 0.05)
    fd_steps: tuple = (0.2, 0.1, 0.05, 0.025)
    derivative_magnitude: float = 0.04


@dataclass
class ReconstructConfig:
    """Synthetic single-vertex target and descent options.

    ``jacobian`` selects the linearisation: ``"fraction"`` differentiates
    the mesh DtN map through the element volume fractions, ``"distributed"``
    uses the distributed shape derivative of the elementary vertex fields.
    """

    vertex: int = -1
    displacement: tuple = (0.0, 0.0, 0.05)
    noise: float = 0.0
    max_iter: int = 25
    step_tol: float = 1e-5
    objective_floor: float = 1e-14
    max_backtracks: int = 20
    damping: float = 1e-2
    jacobian: str = "fraction"


@dataclass
class ExperimentConfig:
    name: str = "default"
    domain: fem.DomainSpec = field(default_factory=fem.DomainSpec)
    prior: geo.AprioriData = field(default_factory=geo.AprioriData)
    base: BaseShape = field(default_factory=BaseShape)
    family: FamilyConfig = field(default_factory=FamilyConfig)
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    reconstruct: ReconstructConfig = field(default_factory=ReconstructConfig)
    h: float = 1 / 24
    rho_factor: float = 3.0
    basis_stride: int = 1
    seed: int = 0
    output_dir: str = "results"

    @property
    def k(self):
        return self.prior.k

    @property
    def rho(self):
        return self.rho_factor * self.h

    def to_dict(self):
        return _plain(asdict(self))

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        sub = {
            "domain": fem.DomainSpec,
            "prior": geo.AprioriData,
            "base": BaseShape,
            "family": FamilyConfig,
            "probe": ProbeConfig,
            "reconstruct": ReconstructConfig,
        }
        kwargs = {}
        for f in fields(cls):
            if f.name not in data:
                continue
            value = data.pop(f.name)
            if f.name in sub:
                value = _build(sub[f.name], value)
            elif f.name == "h":
                value = _number(value)
            kwargs[f.name] = value
        if data:
            raise ValueError(f"unknown configuration keys: {sorted(data)}")
        return cls(**kwargs)


def _number(value):
    """Float from a number or a fraction string such as ``"1/24"``."""
    if isinstance(value, str):
        return float(Fraction(value))
    return float(value)


def _build(cls, values):
    names = {f.name: f for f in fields(cls)}
    unknown = set(values) - set(names)
    if unknown:
        raise ValueError(f"unknown keys for {cls.__name__}: {sorted(unknown)}")
    out = {}
    for key, value in values.items():
        if isinstance(value, list):
            value = tuple(value)
        elif key == "theta0" or key == "cap_angle":
            value = _angle(value)
        out[key] = value
    return cls(**out)


def _angle(value):
    """Angle in radians; strings like ``"pi/6"`` are accepted."""
    if isinstance(value, str):
        text = value.replace(" ", "")
        if text.startswith("pi"):
            rest = text[2:]
            return math.pi / float(rest[1:]) if rest.startswith("/") else math.pi * (float(rest[1:]) if rest else 1.0)
        return float(text)
    return float(value)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def bundled_configs():
    """Names of the configuration files shipped with the package."""
    root = resources.files("polystab") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def load_config(source="default"):
    """Read a TOML configuration from a path or a bundled name."""
    import tomli

    path = Path(source)
    if path.suffix == ".toml" and path.exists():
        text = path.read_text()
    elif str(source) in bundled_configs():
        text = (resources.files("polystab") / "configs" / f"{source}.toml").read_text()
    else:
        raise FileNotFoundError(f"no configuration file or bundled config named {source!r}")
    return ExperimentConfig.from_dict(tomli.loads(text))


# ---------------------------------------------------------------- output


def write_csv(path, header, rows):
    """CSV with ``repr``-exact floats so repeated runs compare byte for byte."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_plain(payload), indent=2, sort_keys=True, default=float) + "\n")
    return path


def metadata(cfg, **extra):
    meta = {
        "config": cfg.to_dict(),
        "h": cfg.h,
        "rho": cfg.rho,
        "k": cfg.k,
        "seed": cfg.seed,
        "surrogate": "S^-1/4 (.) S^-1/4, S = stiffness + mass on the accessible face",
    }
    meta.update(extra)
    return meta


# ---------------------------------------------------------------- shared set-up


def displaced_vertex(poly, vertex, displacement):
    """Copy of ``poly`` with one vertex moved (faces may become non-planar)."""
    if vertex < 0:
        vertex = int(np.argmax(poly.vertices.sum(axis=1)))
    v = poly.vertices.copy()
    v[vertex] += np.asarray(displacement, dtype=float)
    return poly.moved(v)


@dataclass(eq=False)
class Context:
    """Reference mesh, basis and DtN matrix shared by the drivers."""

    cfg: ExperimentConfig
    p0: geo.Polyhedron
    mesh: fem.TetMesh
    basis: dtn_mod.BoundaryBasis
    dtn0: dtn_mod.DtNMatrix

    @classmethod
    def build(cls, cfg):
        p0 = cfg.base.build()
        mesh = fem.mesh_domain(cfg.domain, [p0], h=cfg.h, k=cfg.k)
        basis = dtn_mod.BoundaryBasis.from_mesh(mesh, stride=cfg.basis_stride)
        return cls(cfg, p0, mesh, basis, dtn_mod.dtn_matrix(mesh, basis, keep_lifts=True))

    def basis_on(self, mesh):
        return dtn_mod.BoundaryBasis(mesh, self.basis.nodes)

    def dtn_of(self, poly):
        """DtN matrix of another inclusion on the same lattice."""
        mesh = self.mesh.with_polyhedra([poly])
        fem.check_resolution([poly], self.cfg.h)
        return dtn_mod.dtn_matrix(mesh, self.basis_on(mesh))


def hausdorff_spacing(cfg):
    return cfg.h / 4


# ---------------------------------------------------------------- stability sweep


@dataclass
class StabilityRecord:
    """Distances and DtN/derivative norms for one member of a family."""

    magnitude: float
    d_boundary: float = float("nan")
    d_solid: float = float("nan")
    d_modified: float = float("nan")
    vertex_distance: float = float("nan")
    dtn_diff: float = float("nan")
    derivative_norm: float = float("nan")
    admissible: bool = False
    status: str = "ok"
    message: str = ""

    @property
    def lipschitz_ratio(self):
        """``d_H / |Lambda_0 - Lambda_1|`` (nan when both vanish)."""
        return _ratio(self.d_boundary, self.dtn_diff)

    @property
    def derivative_ratio(self):
        """``|F'(0)| / d_H``."""
        return _ratio(self.derivative_norm, self.d_boundary)

    @property
    def solid_ratio(self):
        return _ratio(self.d_solid, self.d_boundary)

    @property
    def vertex_ratio(self):
        return _ratio(self.vertex_distance, self.d_boundary)

    HEADER = (
        "magnitude", "d_boundary", "d_solid", "d_modified", "vertex_distance", "dtn_diff",
        "derivative_norm", "lipschitz_ratio", "derivative_ratio", "admissible", "status", "message",
    )

    def row(self):
        return (
            self.magnitude, self.d_boundary, self.d_solid, self.d_modified, self.vertex_distance,
            self.dtn_diff, self.derivative_norm, self.lipschitz_ratio, self.derivative_ratio,
            int(self.admissible), self.status, self.message,
        )


def _ratio(a, b):
    if b == 0 or not np.isfinite(b):
        return float("nan")
    return float(a / b)


def _spread(values):
    v = np.asarray([x for x in values if np.isfinite(x) and x > 0])
    return float(v.max() / v.min()) if len(v) else float("nan")


@dataclass
class SweepResult:
    records: list
    summary: dict
    meta: dict


def stability_sweep(cfg, context=None, validate=True):
    """Evaluate every member of the configured family against the base.

    A failure inside one member is recorded in its ``status`` and does not
    stop the sweep.  The summary reports the empirical Lipschitz constant
    ``max d_H / |Delta Lambda|``, the spread of that ratio (flagged as a
    blow-up above 10) and the spread of ``|F'(0)| / d_H``.
    """
    ctx = Context.build(cfg) if context is None else context
    p0 = ctx.p0
    spacing = hausdorff_spacing(cfg)
    box = (cfg.domain.lower, cfg.domain.upper)
    records = []
    for mag in cfg.family.magnitudes:
        rec = StabilityRecord(float(mag))
        try:
            p1 = cfg.family.member(p0, mag)
            rec.admissible = validate_member(p1, cfg) if validate else True
            rec.d_boundary = geo.hausdorff_boundary(p0, p1, spacing)
            rec.d_solid = geo.hausdorff_solid(p0, p1, spacing)
            rec.d_modified = geo.modified_distance(p0, p1, box, resolution=cfg.h / 2, spacing=spacing)
            pairing = geo.match_vertices(p0, p1)
            rec.vertex_distance = pairing.max_distance
            U = build_field(p0, p1, pairing, cfg.prior)
            probe = derivative_norm_probe(U, ctx.basis, ctx.mesh, dtn=ctx.dtn0)
            rec.derivative_norm = probe.norm
            rec.dtn_diff = dtn_mod.dtn_norm_diff(ctx.dtn0.matrix, ctx.dtn_of(p1).matrix, ctx.basis)
        except PolystabError as exc:
            rec.status = "failed"
            rec.message = f"{type(exc).__name__}: {exc}"
        records.append(rec)
    ok = [r for r in records if r.status == "ok"]
    lips = [r.lipschitz_ratio for r in ok]
    summary = {
        "members": len(records),
        "failed": len(records) - len(ok),
        "empirical_lipschitz": float(np.nanmax(lips)) if ok else float("nan"),
        "lipschitz_spread": _spread(lips),
        "blow_up": bool(_spread(lips) > 10),
        "derivative_ratio_min": float(np.nanmin([r.derivative_ratio for r in ok])) if ok else float("nan"),
        "derivative_ratio_spread": _spread([r.derivative_ratio for r in ok]),
        "solid_ratio_band": _band([r.solid_ratio for r in ok]),
        "vertex_ratio_max": float(np.nanmax([r.vertex_ratio for r in ok])) if ok else float("nan"),
        "modified_le_boundary": bool(all(r.d_modified <= r.d_boundary + cfg.h / 2 for r in ok)),
        "d_boundary_span": _spread([r.d_boundary for r in ok]),
    }
    meta = metadata(cfg, family=asdict(cfg.family), hausdorff_spacing=spacing, voxel=cfg.h / 2,
                    note="empirical max-ratio over this family, not the stability constant itself")
    return SweepResult(records, summary, meta)


def _band(values):
    v = [x for x in values if np.isfinite(x)]
    return [float(min(v)), float(max(v))] if v else [float("nan"), float("nan")]


def validate_member(poly, cfg):
    rep = geo.validate_admissibility(poly, cfg.domain, cfg.prior)
    return rep.passed


def write_sweep(result, outdir, stem="sweep"):
    outdir = Path(outdir)
    write_csv(outdir / f"{stem}.csv", StabilityRecord.HEADER, [r.row() for r in result.records])
    write_json(outdir / f"{stem}.json", {"summary": result.summary, "metadata": result.meta})
    return outdir / f"{stem}.csv"


# ---------------------------------------------------------------- Taylor gap


@dataclass
class TaylorGapResult:
    rows: list
    remainder_order: float
    meta: dict

    HEADER = ("magnitude", "d_boundary", "dtn_diff", "derivative_norm", "remainder", "remainder_fraction")


def taylor_gap_probe(cfg, context=None):
    """First-order prediction error of the DtN map along the family.

    For each member the moved DtN matrix ``Lambda_1`` is computed with the
    pulled-back conductivity on the reference mesh, ``F'(0)`` with the
    distributed form, and the remainder ``|Lambda_1 - Lambda_0 - F'(0)|``
    in the surrogate norm.  ``remainder_order`` is the log-log slope of
    the remainder against ``d_H``.
    """
    ctx = Context.build(cfg) if context is None else context
    p0, basis = ctx.p0, ctx.basis
    rows = []
    for mag in cfg.family.magnitudes:
        p1 = cfg.family.member(p0, mag)
        d_h = geo.hausdorff_boundary(p0, p1, hausdorff_spacing(cfg))
        U = build_field(p0, p1, geo.match_vertices(p0, p1), cfg.prior)
        lam1 = pullback_dtn(U, 1.0, basis, ctx.mesh).matrix
        delta = lam1 - ctx.dtn0.matrix
        deriv = derivative_matrix(U, ctx.mesh, ctx.dtn0.lifts)
        dn = dtn_mod.surrogate_norm(delta, basis)
        fn = dtn_mod.surrogate_norm(deriv, basis)
        rem = dtn_mod.surrogate_norm(delta - deriv, basis)
        rows.append((float(mag), d_h, dn, fn, rem, _ratio(rem, fn)))
    d = np.array([r[1] for r in rows])
    rem = np.array([r[4] for r in rows])
    ok = (d > 0) & (rem > 0)
    order = float(np.polyfit(np.log(d[ok]), np.log(rem[ok]), 1)[0]) if ok.sum() >= 2 else float("nan")
    meta = metadata(cfg, family=asdict(cfg.family), moved_dtn="pullback conductivity gamma A(1) on the reference mesh")
    return TaylorGapResult(rows, order, meta)


# ---------------------------------------------------------------- derivative check


def probe_data(x):
    """Boundary voltage ``sin(pi x) sin(pi y)``, zero on the box side faces."""
    return np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])


def probe_data_tilted(x):
    return probe_data(x) * (1.0 + x[:, 0])


def probe_data_odd(x):
    """``sin(2 pi x) sin(pi y)``: odd about ``x = 1/2``.

    Its field crosses the inclusion sideways, so normal and tangential
    gradients on the faces have different weights.  This makes the
    swapped-polarization control clearly distinguishable.
    """
    return np.sin(2 * np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])


@dataclass
class DerivativeCheck:
    distributed: float
    boundary: float
    swapped: float
    rows: list
    order: float
    meta: dict

    HEADER = ("t", "fd", "error")

    @property
    def form_gap(self):
        """Relative gap between the boundary and distributed forms."""
        return abs(self.boundary - self.distributed) / abs(self.distributed)

    @property
    def swapped_gap(self):
        return abs(self.swapped - self.distributed) / abs(self.distributed)


def derivative_probe(cfg, f=probe_data_odd, g=probe_data_odd):
    """Distributed and boundary forms of ``F'(0)`` against centred differences.

    The field carries the base inclusion onto the family member of size
    ``probe.derivative_magnitude``.  ``F(t)`` is evaluated in pullback form,
    and ``order`` is the log-log slope of the finite-difference error over
    ``probe.fd_steps``.  The boundary form is also evaluated with the
    polarization eigenvalues swapped, as a negative control.
    """
    p0 = cfg.base.build()
    mesh = fem.mesh_domain(cfg.domain, [p0], h=cfg.h, k=cfg.k)
    p1 = cfg.family.member(p0, cfg.probe.derivative_magnitude)
    U = build_field(p0, p1, geo.match_vertices(p0, p1), cfg.prior)
    sol = _solutions(mesh, f, g)
    dist = F_prime_distributed(U, f, g, mesh, solutions=sol).value
    bnd = F_prime_boundary(U, f, g, mesh, solutions=sol).value
    swp = F_prime_boundary(U, f, g, mesh, solutions=sol, swapped=True).value
    rows = []
    for t in cfg.probe.fd_steps:
        fd = (F_value(U, t, f, g, mesh) - F_value(U, -t, f, g, mesh)) / (2 * t)
        rows.append((float(t), float(fd), abs(fd - dist)))
    t = np.array([r[0] for r in rows])
    err = np.array([r[2] for r in rows])
    ok = err > 0
    order = float(np.polyfit(np.log(t[ok]), np.log(err[ok]), 1)[0]) if ok.sum() >= 2 else float("nan")
    meta = metadata(cfg, magnitude=cfg.probe.derivative_magnitude, family=asdict(cfg.family),
                    fd_form="pullback", distributed=dist, boundary=bnd, swapped=swp, order=order)
    return DerivativeCheck(dist, bnd, swp, rows, order, meta)


# ---------------------------------------------------------------- singular probe


def singular_probe_run(cfg):
    """Singular pairing ``|S(xi, xi)|`` as the sources approach a face."""
    p0 = cfg.base.build()
    p1 = p0.translated(cfg.probe.shift)
    mesh = fem.mesh_domain(cfg.domain, [], h=cfg.h, k=cfg.k, augmented=True)
    return dtn_mod.singular_probe(
        mesh, p0, p1, cfg.probe.point, cfg.probe.normal, cfg.probe.distances,
        edge_margin=cfg.prior.r0 / 4,
    )


def alessandrini_run(cfg, shift=(0.0, 0.0, 0.05), h=None, rtol=1e-10):
    """Alessandrini identity for the base inclusion and a translated copy.

    The two sources sit half way up the augmentation, slightly off its
    axis, so their mollified supports stay outside the physical domain.
    """
    h = cfg.h if h is None else h
    p0 = cfg.base.build()
    p1 = p0.translated(shift)
    sharp = fem.mesh_domain(cfg.domain, [], h=h, k=cfg.k, augmented=True)
    omega = fem.mesh_domain(cfg.domain, [], h=h, k=cfg.k)
    axis, top = cfg.domain.sigma_axis, cfg.domain.upper[cfg.domain.sigma_axis]
    mid = 0.5 * (np.asarray(cfg.domain.lower) + np.asarray(cfg.domain.upper))
    y, z = mid.copy(), mid.copy()
    y[axis] = z[axis] = top + cfg.domain.augment_depth / 2
    tangent = [d for d in range(3) if d != axis]
    y[tangent[1]] -= 0.05
    z[tangent[0]] -= 0.05
    z[tangent[1]] += 0.05
    return dtn_mod.alessandrini_residual(sharp, omega, p0, p1, y, z, rho=cfg.rho_factor * h, rtol=rtol)


# ---------------------------------------------------------------- concentric spheres


def sphere_eigenvalue(h, k=2.0, radius=0.5, inner_radius=0.25):
    """Degree-one DtN eigenvalue of a two-phase ball and its exact value.

    The discrete value is the Rayleigh quotient ``<Lambda g, g> / |g|^2``
    for ``g = x_3`` on the mapped ball mesh, with the boundary mass matrix
    in the denominator.
    """
    spec = fem.DomainSpec(shape="ball", radius=radius, inner_radius=inner_radius)
    mesh = fem.mesh_domain(spec, [], h=h, k=k)
    g = np.zeros(mesh.n_nodes)
    bnd = mesh.dirichlet_mask
    g[bnd] = mesh.nodes[bnd, 2] - spec.center[2]
    solver = fem.DirichletSolver(mesh)
    u = solver.solve(g)
    f, _ = mesh.boundary_faces
    x = mesh.nodes
    area = 0.5 * np.linalg.norm(np.cross(x[f[:, 1]] - x[f[:, 0]], x[f[:, 2]] - x[f[:, 0]]), axis=1)
    gv = g[f]
    l2 = np.sum(area / 12 * (gv.sum(axis=1) ** 2 + (gv ** 2).sum(axis=1)))
    a = inner_radius / radius
    mu = (k - 1) / (k + 2)
    exact = (1 + 2 * mu * a ** 3) / (1 - mu * a ** 3) / radius
    return float(g @ (solver.K @ u) / l2), float(exact)


# ---------------------------------------------------------------- reconstruction


@dataclass
class ReconstructionResult:
    poly: geo.Polyhedron
    trace: list
    status: str
    meta: dict = field(default_factory=dict)

    HEADER = ("iteration", "objective", "step", "damping", "vertex_error", "d_boundary")

    @property
    def objectives(self):
        return [row[1] for row in self.trace]


def iterate_admissible(poly, cfg):
    """Cheap subset of the admissibility checks for descent iterates.

    Inclusion margin, edge lengths, dihedral and face angles and mesh
    resolution are checked; the sampled cone test is skipped.
    """
    prior = cfg.prior
    if poly.signed_volume <= 0:
        return "orientation"
    if np.min(cfg.domain.distance_to_boundary(poly.vertices)) < prior.r0:
        return "inclusion"
    if poly.edge_lengths.min() < prior.r0:
        return "edge_length"
    if not np.all(geo._in_band(geo.dihedral_angles(poly), prior.theta0)):
        return "dihedral"
    if not np.all(geo._in_band(geo.face_angles(poly), prior.theta0)):
        return "face_angle"
    try:
        fem.check_resolution([poly], cfg.h)
    except FeatureUnderResolved:
        return "resolution"
    return ""


class _Forward:
    """Objective ``J = |W (Lambda_D - Lambda_target) W|_F^2 / 2`` on one mesh."""

    def __init__(self, ctx, target):
        self.ctx = ctx
        self.target = np.asarray(target)
        self.weight = ctx.basis.norm_weight

    def residual(self, lam):
        return self.weight @ (lam - self.target) @ self.weight

    def evaluate(self, poly, keep_lifts=False):
        mesh = self.ctx.mesh.with_polyhedra([poly])
        dtn = dtn_mod.dtn_matrix(mesh, self.ctx.basis_on(mesh), keep_lifts=keep_lifts)
        r = self.residual(dtn.matrix)
        return 0.5 * float(np.sum(r * r)), r, mesh, dtn

    def jacobian(self, poly, mesh, dtn, method="fraction"):
        """Columns ``W dLambda W`` for unit moves of every vertex coordinate."""
        if method == "fraction":
            mats = vertex_fraction_derivatives(poly, mesh, dtn.lifts)
            return np.column_stack([(self.weight @ m @ self.weight).ravel() for m in mats.reshape(-1, *mats.shape[2:])])
        if method != "distributed":
            raise ValueError(f"unknown jacobian {method!r}")
        collar = collar_triangulation(poly, self.ctx.cfg.prior)
        cols = []
        for v in range(poly.n_vertices):
            for axis in range(3):
                U = vertex_field(poly, v, np.eye(3)[axis], self.ctx.cfg.prior, collar=collar)
                cols.append((self.weight @ derivative_matrix(U, mesh, dtn.lifts) @ self.weight).ravel())
        return np.column_stack(cols)


def synthetic_target(cfg, context=None):
    """Same-mesh DtN matrix of the displaced-vertex target (labelled inverse crime)."""
    ctx = Context.build(cfg) if context is None else context
    truth = displaced_vertex(ctx.p0, cfg.reconstruct.vertex, cfg.reconstruct.displacement)
    lam = ctx.dtn_of(truth).matrix
    if cfg.reconstruct.noise > 0:
        rng = np.random.default_rng(cfg.seed)
        e = rng.standard_normal(lam.shape)
        e = 0.5 * (e + e.T)
        lam = lam + cfg.reconstruct.noise * np.linalg.norm(lam) / np.linalg.norm(e) * e
    return truth, lam


def reconstruct(target, initial, cfg, context=None, truth=None):
    """Vertex descent on the DtN misfit.

    Levenberg-Marquardt iteration on the weighted residual: each step solves
    ``(H + lam diag H) s = -g`` with ``H = Jac^T Jac`` and ``g = Jac^T r``.
    A trial that does not decrease ``J`` or fails :func:`iterate_admissible`
    is rejected and retried with ``lam`` four times larger (a shorter step
    closer to the gradient direction); after an accepted step ``lam`` is
    divided by three.  Iteration stops when the accepted step is below
    ``step_tol``, ``J`` falls under ``objective_floor`` times its initial
    value, or ``max_iter`` is reached.
    """
    opts = cfg.reconstruct
    ctx = Context.build(cfg) if context is None else context
    fwd = _Forward(ctx, target)
    poly = initial
    J, r, mesh, dtn = fwd.evaluate(poly, keep_lifts=True)
    J0 = J
    lam = opts.damping
    trace = [(0, J, 0.0, lam, *_errors(poly, truth, cfg))]
    status = "max_iter"
    for it in range(1, opts.max_iter + 1):
        if J <= opts.objective_floor * max(J0, 1e-300):
            status = "objective_floor"
            break
        jac = fwd.jacobian(poly, mesh, dtn, opts.jacobian)
        g = jac.T @ r.ravel()
        H = jac.T @ jac
        diag = np.maximum(np.diag(H), 1e-300)
        accepted, reason, size = None, "", 0.0
        for _ in range(opts.max_backtracks + 1):
            step = -np.linalg.solve(H + lam * np.diag(diag), g).reshape(-1, 3)
            size = float(np.abs(step).max())
            if size < opts.step_tol:
                break
            trial = poly.moved(poly.vertices + step)
            reason = iterate_admissible(trial, cfg)
            if not reason:
                out = fwd.evaluate(trial, keep_lifts=True)
                if out[0] < J:
                    accepted = (trial, *out)
                    break
            lam *= 4.0
        if accepted is None:
            if size < opts.step_tol:
                status = "step_tol"
                break
            if reason:
                raise InadmissibleIterate(f"step still inadmissible ({reason}) after {opts.max_backtracks} retries")
            raise DescentStalled(f"no decrease of J = {J:.3e} after {opts.max_backtracks} retries")
        poly, J, r, mesh, dtn = accepted
        lam = max(lam / 3.0, 1e-12)
        trace.append((it, J, size, lam, *_errors(poly, truth, cfg)))
    meta = metadata(
        cfg,
        status=status,
        inverse_crime=True,
        method="Levenberg-Marquardt",
        jacobian=opts.jacobian,
    )
    return ReconstructionResult(poly, trace, status, meta)


def _errors(poly, truth, cfg):
    if truth is None:
        return float("nan"), float("nan")
    err = float(np.max(np.linalg.norm(poly.vertices - truth.vertices, axis=1)))
    return err, geo.hausdorff_boundary(poly, truth, hausdorff_spacing(cfg))


def write_reconstruction(result, outdir, stem="reconstruct"):
    outdir = Path(outdir)
    write_csv(outdir / f"{stem}.csv", ReconstructionResult.HEADER, result.trace)
    geo.write_off(result.poly, outdir / f"{stem}.off")
    write_json(outdir / f"{stem}.json", result.meta)
    return outdir / f"{stem}.csv"


__all__ = [
    "BaseShape",
    "Context",
    "DerivativeCheck",
    "ExperimentConfig",
    "FamilyConfig",
    "ProbeConfig",
    "ReconstructConfig",
    "ReconstructionResult",
    "StabilityRecord",
    "SweepResult",
    "TaylorGapResult",
    "bundled_configs",
    "derivative_probe",
    "displaced_vertex",
    "iterate_admissible",
    "load_config",
    "metadata",
    "reconstruct",
    "singular_probe_run",
    "sphere_eigenvalue",
    "stability_sweep",
    "synthetic_target",
    "taylor_gap_probe",
    "write_csv",
    "write_json",
    "write_reconstruction",
    "write_sweep",
]
