"""Acceptance criteria 1 to 9.

Each ``criterion_N`` function runs one criterion at its stated tolerance and
returns a list of ``(label, passed, detail)`` parts.  Under pytest every part
is asserted and a per-criterion verdict line appears in the terminal summary;
run as a script (``python3 tests/test_acceptance.py``) the verdict lines are
printed directly.
"""
from __future__ import annotations

import math
import sys
import time
from functools import lru_cache

import numpy as np
import pytest

from conedelta import bracket, discretize, eigensolve, profiles, trial, weyl
from conedelta.geometry import ConeModel

QUARTER = ConeModel(1.0, math.pi / 4)
EIGHTH = ConeModel(1.0, math.pi / 8)
THR = -0.25


def _timed(fn, *args, **kw):
    t = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t


# ------------------------------------------------------------- shared runs

@lru_cache(maxsize=None)
def box_run(alpha: float, box: float, h: float, k: int = 4, bump: tuple | None = None):
    """Eigen report plus assembly/solve wall time for a square box."""
    model = ConeModel(alpha, math.pi / 4)
    t = time.perf_counter()
    grid = discretize.build_grid(model, box, box, h)
    if bump is None:
        pencil = discretize.assemble(grid, model)
    else:
        gen = discretize.Generatrix.bump(model.theta, *bump)
        pencil = discretize.assemble_deformed(grid, model, gen)
    rep = eigensolve.lowest_eigs(pencil, k=k, keep_vectors=True)
    return pencil, rep, time.perf_counter() - t


def _monotone(reports, tol=1e-8):
    return all(np.all(b.eigenvalues[: len(a.eigenvalues)] <= a.eigenvalues + tol)
               for a, b in zip(reports, reports[1:]))


# --------------------------------------------------------------- criteria

def criterion_1():
    t0 = time.perf_counter()
    parts = []
    ns = [8.0, 16.0, 32.0, 64.0]
    for p in (0.0, 0.5, 1.0):
        d = [weyl.weyl_defect(n, p, QUARTER).defect for n in ns]
        dec = all(b < a for a, b in zip(d, d[1:]))
        parts.append((f"p={p:g} decreasing", dec, "defects " + ", ".join(f"{x:.4g}" for x in d)))
        parts.append((f"p={p:g} ratio", d[-1] <= d[0] / 4, f"d64/d8 = {d[-1] / d[0]:.4f} <= 0.25"))
        dd = weyl.weyl_defect(64.0, p, QUARTER, detune=0.1).defect
        parts.append((f"p={p:g} detuned", dd >= 0.05, f"detuned d64 = {dd:.4f} >= 0.05"))
    el = time.perf_counter() - t0
    parts.append(("runtime", el <= 60.0, f"{el:.1f} s <= 60 s"))
    return parts


def criterion_2():
    t0 = time.perf_counter()
    bounds = [bracket.threshold_lower_bound(n, QUARTER).bound for n in (100.0, 400.0, 1600.0)]
    parts = [("below threshold", all(b <= THR for b in bounds), "bounds " + ", ".join(f"{b:.6f}" for b in bounds)),
             ("increasing", all(y > x for x, y in zip(bounds, bounds[1:])), "monotone in n")]
    dist = [THR - b for b in bounds]
    ratios = [y / x for x, y in zip(dist, dist[1:])]
    parts.append(("halving", all(0.35 <= r <= 0.65 for r in ratios),
                  "ratios " + ", ".join(f"{r:.3f}" for r in ratios) + " in 0.5 +- 30%"))
    mu = bracket.mu_neumann_delta(1.0, 10.0).mu
    oracle = bracket.mu_dense_oracle(1.0, 10.0)
    rel = abs(mu - oracle) / abs(oracle)
    parts.append(("mu oracle", rel <= 1e-6, f"relative difference {rel:.2e} <= 1e-6"))
    el = time.perf_counter() - t0
    parts.append(("runtime", el <= 10.0, f"{el:.2f} s <= 10 s"))
    return parts


def criterion_3():
    t0 = time.perf_counter()
    parts = []
    a = QUARTER.alpha
    for p in (0.0, 1.0):
        nsq, gsq = weyl.weyl_norms(64.0, p, QUARTER)
        en = abs(nsq / (2 / a) - 1)
        eg = abs(gsq / ((p * p + a * a / 4) * 2 / a) - 1)
        parts.append((f"p={p:g} norm", en <= 0.01, f"norm rel err {en:.2e} <= 1%"))
        parts.append((f"p={p:g} grad", eg <= 0.02, f"grad rel err {eg:.2e} <= 2%"))
    el = time.perf_counter() - t0
    parts.append(("runtime", el <= 10.0, f"{el:.2f} s <= 10 s"))
    return parts


def _chi1_b1():
    return profiles.make_hardy_poly(1.0)


def criterion_4_asymptotics():
    chi1 = _chi1_b1()
    L = trial.sn_limit(EIGHTH, chi1)
    closed = 2 * (10 - 10 / (4 * math.sin(math.pi / 8) ** 2))
    vals = {n: trial.compute_sn(n, EIGHTH, chi1).s_n_scaled for n in (50.0, 100.0, 200.0)}
    errs = [abs(vals[n] - L) / abs(L) for n in (50.0, 100.0, 200.0)]
    return [("limit closed form", abs(L - closed) <= 1e-12 * abs(closed), f"L = {L:.6f}"),
            ("rel err at n=200", errs[-1] <= 0.10,
             "S_n n^4 = " + ", ".join(f"{vals[n]:.4g}" for n in vals) + f"; rel err(200) = {errs[-1]:.3g} <= 0.1"),
            ("error decreasing", all(y < x for x, y in zip(errs, errs[1:])),
             "rel errs " + ", ".join(f"{e:.3g}" for e in errs))]


def criterion_4_certificate():
    cert, el = _timed(trial.build_certificate, EIGHTH, _chi1_b1())
    rec = all(b == a * a + a for a, b in zip(cert.n_seq, cert.n_seq[1:]))
    return [("gamma", cert.gamma > 0, f"gamma = {cert.gamma:.4f}, N = {cert.n_start}"),
            ("recursion", rec and trial.supports_disjoint(cert.n_seq), f"n_k = {cert.n_seq}"),
            ("bounds", all(b < -0.25 for b in cert.bounds), "exact bounds below -1/4"),
            ("runtime", el <= 60.0, f"{el:.1f} s <= 60 s")]


def criterion_5():
    t0 = time.perf_counter()
    chi = profiles.make_hardy_poly(1.0)
    parts = [("pi/8 passes", profiles.hardy_check(chi, math.pi / 8).satisfied, "b=1 at pi/8"),
             ("pi/6 fails", not profiles.hardy_check(chi, math.pi / 6).satisfied, "b=1 at pi/6")]
    for name, th in (("pi/8", math.pi / 8), ("pi/4", math.pi / 4), ("pi/3", math.pi / 3), ("4pi/9", 4 * math.pi / 9)):
        b = profiles.select_hardy_exponent(th, 0.1)
        ok = profiles.hardy_check(profiles.make_hardy_poly(b), th).satisfied
        parts.append((f"select {name}", ok, f"b({name}) = {b:.4f}"))
    el = time.perf_counter() - t0
    parts.append(("runtime", el <= 1.0, f"{el:.3f} s <= 1 s"))
    return parts


def criterion_6():
    runs = [box_run(1.0, B, 0.25) for B in (24.0, 48.0, 96.0)]
    _, rep48, _ = runs[1]
    below = rep48.eigenvalues[rep48.eigenvalues < THR]
    res_ok = len(below) and float(np.max(rep48.residuals[rep48.eigenvalues < THR])) <= 1e-8
    counts = [r[1].count_below_threshold for r in runs]
    el = sum(r[2] for r in runs)
    return [("two eigenvalues at box 48", len(below) >= 2 and bool(res_ok),
             f"lambda = {', '.join(f'{x:.6f}' for x in rep48.eigenvalues[:2])}; {len(below)} below -0.25"),
            ("count increasing", all(y > x for x, y in zip(counts, counts[1:])),
             f"count_below(-0.25) over boxes 24/48/96 = {counts}"),
            ("runtime", el <= 300.0, f"{el:.1f} s <= 300 s")]


def criterion_7():
    parts = []
    lam_h = [box_run(1.0, 24.0, h, k=1)[1].eigenvalues[0] for h in (0.5, 0.25, 0.125)]
    order = math.log2((lam_h[0] - lam_h[1]) / (lam_h[1] - lam_h[2]))
    parts.append(("richardson", 1.5 <= order <= 2.5, f"order {order:.3f} in [1.5, 2.5]"))
    reps = [box_run(1.0, B, 0.25)[1] for B in (24.0, 48.0, 96.0)]
    parts.append(("box monotone", _monotone(reps), "each lambda_i non-increasing in box"))
    l1 = box_run(1.0, 24.0, 0.25, k=1)[1].eigenvalues[0]
    l2 = box_run(2.0, 12.0, 0.125, k=1)[1].eigenvalues[0]
    ratio = l2 / l1
    parts.append(("scaling", abs(ratio / 4 - 1) <= 0.02, f"lambda(2)/lambda(1) = {ratio:.10f}, target 4 +- 2%"))
    worst = 0.0
    for B in (24.0, 48.0, 96.0):
        pencil, rep, _ = box_run(1.0, B, 0.25)
        X = rep.vectors
        G = X.T @ (pencil.mass[:, None] * X)
        worst = max(worst, float(np.max(np.abs(G - np.eye(G.shape[0])))))
    parts.append(("M-orthogonality", worst <= 1e-8, f"max |X^T M X - I| = {worst:.2e}"))
    return parts


def criterion_8():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240611)
    worst = 0.0
    for _ in range(20):
        th = rng.uniform(0.2, 1.3)
        model = ConeModel(rng.uniform(0.3, 3.0), th)
        f = trial.random_test_function(model, rng)
        red = trial.reduced_form_value(f)
        w3 = trial.weighted_3d_form_value(f)
        worst = max(worst, abs(w3 - red) / abs(red))
    el = time.perf_counter() - t0
    return [("identity", worst <= 1e-8, f"max relative difference {worst:.2e} <= 1e-8 over 20 functions"),
            ("runtime", el <= 30.0, f"{el:.1f} s <= 30 s")]


BUMP = (4.0, 0.5)


def criterion_9():
    parts = []
    # undeformed polyline through the same pipeline
    grid = discretize.build_grid(QUARTER, 24.0, 24.0, 0.25)
    s = np.linspace(0.0, 10.0, 11)
    poly = np.column_stack([s * math.sin(QUARTER.theta), s * math.cos(QUARTER.theta)])
    gen = discretize.Generatrix.from_polyline(poly, QUARTER.theta)
    lam_poly = eigensolve.lowest_eigs(discretize.assemble_deformed(grid, QUARTER, gen), k=4).eigenvalues
    lam_ray = box_run(1.0, 24.0, 0.25)[1].eigenvalues
    diff = float(np.max(np.abs(lam_poly - lam_ray)))
    parts.append(("polyline reproduction", diff <= 1e-10, f"max |lambda_poly - lambda_ray| = {diff:.1e}"))
    runs = [box_run(1.0, B, 0.25, 4, BUMP) for B in (24.0, 48.0, 96.0)]
    reps = [r[1] for r in runs]
    worst = max(float(r.residuals.max()) for r in reps)
    parts.append(("residuals", worst <= 1e-8, f"max residual {worst:.1e}"))
    parts.append(("box monotone", _monotone(reps), "deformed lambda_i non-increasing in box"))
    counts = [r.count_below_threshold for r in reps]
    parts.append(("count trend", all(y > x for x, y in zip(counts, counts[1:])),
                  f"bump R0=4 amp=0.5 count_below(-0.25) over boxes 24/48/96 = {counts}"))
    return parts


# ------------------------------------------------------------------ pytest

def _check(number, parts, record_criterion):
    failed = [p for p in parts if not p[1]]
    for label, ok, detail in parts:
        record_criterion(number, ok, f"{label}: {detail}")
    assert not failed, "; ".join(f"{l}: {d}" for l, _, d in failed)


def test_criterion_1_weyl_defects(record_criterion):
    _check(1, criterion_1(), record_criterion)


def test_criterion_2_bracketing(record_criterion):
    _check(2, criterion_2(), record_criterion)


def test_criterion_3_weyl_norm_limits(record_criterion):
    _check(3, criterion_3(), record_criterion)


def test_criterion_4_sn_asymptotics(record_criterion):
    _check(4, criterion_4_asymptotics(), record_criterion)


def test_criterion_4_certificate(record_criterion):
    _check(4, criterion_4_certificate(), record_criterion)


def test_criterion_5_hardy_gate(record_criterion):
    _check(5, criterion_5(), record_criterion)


@pytest.mark.slow
def test_criterion_6_discrete_spectrum(record_criterion):
    _check(6, criterion_6(), record_criterion)


@pytest.mark.slow
def test_criterion_7_numerical_properties(record_criterion):
    _check(7, criterion_7(), record_criterion)


def test_criterion_8_reduction_identity(record_criterion):
    _check(8, criterion_8(), record_criterion)


@pytest.mark.slow
def test_criterion_9_local_deformation(record_criterion):
    _check(9, criterion_9(), record_criterion)


ALL = [(1, criterion_1), (2, criterion_2), (3, criterion_3),
       (4, lambda: criterion_4_asymptotics() + criterion_4_certificate()), (5, criterion_5),
       (6, criterion_6), (7, criterion_7), (8, criterion_8), (9, criterion_9)]


def main(argv=None) -> int:
    wanted = {int(x) for x in (argv or [])} or {k for k, _ in ALL}
    status = 0
    for k, fn in ALL:
        if k not in wanted:
            continue
        parts = fn()
        ok = all(p[1] for p in parts)
        status |= not ok
        print(f"criterion {k}: {'PASS' if ok else 'FAIL'} | " + "; ".join(f"{l}: {d}" for l, _, d in parts),
              flush=True)
    return status


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
