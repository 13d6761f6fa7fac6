"""Acceptance criteria.

Each test prints one ``criterion N: PASS|FAIL`` line with the measured
values; the lines are repeated in the pytest terminal summary.  Run with

    pytest tests/test_acceptance.py -s
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from polystab import cli
from polystab import deformation as dfm
from polystab import dtn
from polystab import geometry as geo
from polystab import harness as hs

from conftest import ACCEPTANCE_LINES

slow = pytest.mark.slow


def report(n, ok, text):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {text}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


@pytest.fixture(scope="module")
def cfg():
    return hs.load_config("default")


@pytest.fixture(scope="module")
def sweep(cfg):
    t0 = time.perf_counter()
    res = hs.stability_sweep(cfg)
    return res, time.perf_counter() - t0


# ---------------------------------------------------------------- 1


@slow
def test_concentric_spheres_eigenvalue():
    t0 = time.perf_counter()
    errs = []
    for h in (1 / 24, 1 / 48):
        val, exact = hs.sphere_eigenvalue(h)
        errs.append(abs(val - exact) / exact)
    elapsed = time.perf_counter() - t0
    order = np.log2(errs[0] / errs[1])
    ok = errs[0] <= 1e-2 and order >= 1.5 and elapsed <= 120
    report(1, ok, f"rel. error {errs[0]:.3e} (h=1/24), {errs[1]:.3e} (h=1/48), order {order:.2f}, {elapsed:.0f} s")


# ---------------------------------------------------------------- 2


def test_biphase_fundamental_solution():
    rng = np.random.default_rng(0)
    worst_value = worst_flux = 0.0
    for k in (0.1, 0.5, 2.0, 10.0):
        for y in rng.normal(size=(5, 3)):
            x = rng.normal(size=(100, 3))
            x[:, 2] = 0.0
            v_lo, g_lo = dtn.biphase_fundamental(dtn.BiphasePlane(k=k), x, y)
            # same medium described from the other side: k times (1 above, 1/k below)
            v, g = dtn.biphase_fundamental(dtn.BiphasePlane(normal=(0, 0, -1), k=1 / k), x, y)
            v_up, g_up = v / k, g / k
            worst_value = max(worst_value, np.abs(v_up - v_lo).max() / np.abs(v_lo).max())
            worst_flux = max(worst_flux, np.abs(k * g_up[:, 2] - g_lo[:, 2]).max() / np.abs(g_lo[:, 2]).max())
    x, y = rng.normal(size=(100, 3)), rng.normal(size=3)
    v1, _ = dtn.biphase_fundamental(dtn.BiphasePlane(k=1.0), x, y)
    v0, _ = dtn.laplace_fundamental(x, y)
    reduce = np.abs(v1 - v0).max() / np.abs(v0).max()
    ok = worst_value <= 1e-12 and worst_flux <= 1e-12 and reduce <= 1e-14
    report(2, ok, f"value jump {worst_value:.1e}, flux jump {worst_flux:.1e}, k=1 vs Laplace {reduce:.1e}")


# ---------------------------------------------------------------- 3


@slow
def test_alessandrini_identity(cfg):
    # both sides share one discretization; solve to roundoff so the residual is the identity's
    coarse = hs.alessandrini_run(cfg, h=cfg.h, rtol=1e-14)
    fine = hs.alessandrini_run(cfg, h=cfg.h / 2, rtol=1e-14)
    ok = coarse.residual <= 1e-2 and fine.residual <= coarse.residual
    report(3, ok, f"residual {coarse.residual:.2e} (h=1/24), {fine.residual:.2e} (h=1/48), "
                  f"volume side {coarse.volume_side:.4e}")


# ---------------------------------------------------------------- 4


@slow
def test_shape_derivative(cfg):
    fine = replace(cfg, h=1 / 40)
    t0 = time.perf_counter()
    chk = hs.derivative_probe(fine)
    elapsed = time.perf_counter() - t0
    ok = chk.order >= 0.9 and chk.form_gap < 0.05 and chk.swapped_gap > 0.2
    report(4, ok, f"FD order {chk.order:.2f}, distributed {chk.distributed:.4e}, boundary {chk.boundary:.4e} "
                  f"(gap {chk.form_gap:.2%}), swapped gap {chk.swapped_gap:.1%}, h=1/40, {elapsed:.0f} s")


# ---------------------------------------------------------------- 5


def test_material_matrix_derivative(cfg):
    p0 = cfg.base.build()
    p1 = cfg.family.member(p0, 0.02)
    U = dfm.build_field(p0, p1, geo.match_vertices(p0, p1), cfg.prior)
    x = U.sample_points(seed=cfg.seed)
    x = x[np.random.default_rng(cfg.seed).choice(len(x), 100, replace=False)]
    du = dfm.eval_jacobian(U, x)
    cal = dfm.cal_A_from_jacobian(du)
    ts = np.array([1e-2, 1e-3, 1e-4])
    err = np.array([np.abs((dfm.material_from_jacobian(du, t) - np.eye(3)) / t - cal).max() for t in ts])
    order = np.polyfit(np.log(ts), np.log(err), 1)[0]
    report(5, order >= 0.9, f"errors {', '.join(f'{e:.2e}' for e in err)}, order {order:.2f}")


# ---------------------------------------------------------------- 6


def test_vector_field_properties(cfg):
    p0 = cfg.base.build()
    prior = cfg.prior
    rng = np.random.default_rng(cfg.seed)
    spacing = hs.hausdorff_spacing(cfg)
    interp = affine = support = 0.0
    ratios = []
    for m in cfg.family.magnitudes:
        p1 = cfg.family.member(p0, m)
        pairing = geo.match_vertices(p0, p1)
        U = dfm.build_field(p0, p1, pairing, prior)
        interp = max(interp, np.abs(dfm.eval_field(U, p0.vertices) - pairing.displacements).max())
        lam = rng.dirichlet(np.ones(3), size=(len(U.corners), 10))
        pts = np.einsum("tsk,tkx->tsx", lam, U.corners)
        expect = np.einsum("tsk,tkc->tsc", lam, U.values)
        got = dfm.eval_field(U, pts.reshape(-1, 3)).reshape(expect.shape)
        affine = max(affine, np.abs(got - expect).max() / np.abs(U.values).max())
        x = rng.uniform(0, 1, size=(2000, 3))
        far = geo.distance_to_boundary(p0, x) > prior.r0 / 4
        support = max(support, np.abs(dfm.eval_field(U, x[far])).max())
        ratios.append((U.sup_norm + U.lipschitz) / geo.hausdorff_boundary(p0, p1, spacing))
    band = max(ratios) / min(ratios)
    ok = interp <= prior.eps_geom and affine <= 1e-12 and support == 0.0 and band <= 2.0
    report(6, ok, f"vertex error {interp:.1e}, affinity {affine:.1e}, outside support {support:.1e}, "
                  f"(sup+Lip)/d_H in [{min(ratios):.2f}, {max(ratios):.2f}] (band {band:.2f} <= 2)")


# ---------------------------------------------------------------- 7


@slow
def test_geometry_inequalities(cfg, sweep):
    res, _ = sweep
    p0 = cfg.base.build()
    spacing = hs.hausdorff_spacing(cfg)
    box = (cfg.domain.lower, cfg.domain.upper)
    rows = [(r.d_modified, r.d_boundary, r.solid_ratio, r.vertex_ratio) for r in res.records]
    # the other two family kinds, geometry only
    for kind, direction in (("translation", (0.3, -0.2, 1.0)), ("vertex", (0.0, 0.0, 1.0))):
        fam = replace(cfg.family, kind=kind, direction=direction)
        for m in fam.magnitudes:
            p1 = fam.member(p0, m)
            db = geo.hausdorff_boundary(p0, p1, spacing)
            rows.append((
                geo.modified_distance(p0, p1, box, resolution=cfg.h / 2, spacing=spacing),
                db,
                geo.hausdorff_solid(p0, p1, spacing) / db,
                geo.match_vertices(p0, p1).max_distance / db,
            ))
    rows = np.array(rows)
    below = bool(np.all(rows[:, 0] <= rows[:, 1]))
    solid = (rows[:, 2].min(), rows[:, 2].max())
    vert = rows[:, 3].max()
    ok = below and solid[0] >= 0.2 and solid[1] <= 1.0 + 1e-9 and vert <= np.sqrt(3)
    report(7, ok, f"d_mu <= d_H on {len(rows)} pairs: {below}, solid/boundary in [{solid[0]:.3f}, {solid[1]:.3f}] "
                  f"(band [0.2, 1]), vertex/d_H max {vert:.3f} (C = sqrt 3)")


# ---------------------------------------------------------------- 8


@slow
def test_singular_blow_up(cfg):
    t0 = time.perf_counter()
    probe = hs.singular_probe_run(cfg)
    elapsed = time.perf_counter() - t0
    octaves = np.log2(probe.distances.max() / probe.distances.min())
    ok = -1.3 <= probe.slope <= -0.7 and octaves >= 3 - 1e-9 and elapsed <= 600
    report(8, ok, f"slope {probe.slope:.3f} over {octaves:.0f} octaves, {elapsed:.0f} s")


# ---------------------------------------------------------------- 9


@slow
def test_three_spheres(cfg):
    recs = dtn.three_spheres_test(n_samples=200, degree=5, seed=cfg.seed)
    bad = sum(r.violated for r in recs)
    report(9, bad == 0, f"{bad} violations over {len(recs)} polynomials, max ratio {max(r.ratio for r in recs):.4f}")


# ---------------------------------------------------------------- 10


@slow
def test_lipschitz_stability(sweep):
    res, elapsed = sweep
    s = res.summary
    ok = (s["failed"] == 0 and s["d_boundary_span"] >= 10 * (1 - 1e-3) and s["lipschitz_spread"] <= 10
          and s["derivative_ratio_min"] > 0 and s["derivative_ratio_spread"] <= 4 and elapsed <= 1800)
    report(10, ok, f"d_H span {s['d_boundary_span']:.2f}, d_H/|dLambda| spread {s['lipschitz_spread']:.3f}, "
                   f"|F'(0)|/d_H min {s['derivative_ratio_min']:.3e} spread {s['derivative_ratio_spread']:.3f}, "
                   f"{elapsed:.0f} s")


# ---------------------------------------------------------------- 11


@slow
def test_reconstruction(cfg):
    run = replace(cfg, reconstruct=replace(cfg.reconstruct, max_iter=8))
    ctx = hs.Context.build(run)
    truth, target = hs.synthetic_target(run, ctx)
    res = hs.reconstruct(target, ctx.p0, run, ctx, truth)
    J = np.array(res.objectives)
    err = res.trace[-1][4]
    goal = max(run.h, 0.005)
    ok = err <= goal and bool(np.all(np.diff(J) < 0))
    report(11, ok, f"vertex error {res.trace[0][4]:.4f} -> {err:.4f} (goal {goal:.4f}) in {res.trace[-1][0]} steps, "
                   f"J {J[0]:.2e} -> {J[-1]:.2e} monotone {bool(np.all(np.diff(J) < 0))}")


# ---------------------------------------------------------------- 12


def test_determinism(tmp_path):
    same = []
    for cmd, stem, extra in (("dtn", "dtn", []), ("three-spheres", "three_spheres", ["--samples", "20"])):
        out = []
        for run in ("a", "b"):
            d = tmp_path / f"{stem}_{run}"
            cli.main([cmd, "quick", "-o", str(d), *extra])
            out.append((d / f"{stem}.csv").read_bytes())
        same.append(out[0] == out[1])
    report(12, all(same), f"dtn.csv identical {same[0]}, three_spheres.csv identical {same[1]}")
