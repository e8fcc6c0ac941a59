"""Command line interface.

Subcommands: ``spectrum``, ``certify``, ``weyl``, ``bracket``, ``sweep``.
Options may also come from a ``key = value`` file given with ``--config``;
flags on the command line win.  Exit status: 0 success, 1 invalid input or
configuration, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import bracket, discretize, eigensolve, profiles, trial, weyl
from .errors import ConeDeltaError, InvalidInput, NumericalFailure
from .geometry import ConeModel
from .report import SpectralReport, versions

log = logging.getLogger("conedelta")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).replace(",", " ").split()]


def _b_exp(text):
    return "auto" if str(text).strip().lower() == "auto" else float(text)


# dest -> (type, default, help); shared by flags and the config file
COMMON = {
    "alpha": (float, 1.0, "coupling strength alpha > 0"),
    "theta_deg": (float, None, "cone half-angle in degrees"),
    "theta": (float, None, "cone half-angle in radians"),
    "out_dir": (str, ".", "output directory"),
    "name": (str, None, "output file stem (default: the subcommand)"),
    "format": (str, "csv", "output format: csv or json"),
    "emit_plot_data": (bool, False, "also write <name>.dat with two columns"),
    "seed": (int, 0, "seed for randomized checks"),
    "workers": (int, 1, "worker processes for sweeps"),
}
SPECIFIC = {
    "spectrum": {
        "rmax": (float, None, "box size r_max (default 24/alpha)"),
        "zext": (float, None, "half height of the box (default r_max)"),
        "h": (float, None, "mesh width (default 0.25/alpha)"),
        "k": (int, 8, "number of eigenpairs"),
        "shift": (float, None, "shift below the wanted eigenvalues"),
        "tol": (float, 1e-8, "residual tolerance"),
        "generatrix": (str, None, "polyline file with 'r z' rows"),
        "bump": (_floats, None, "bump deformation 'R0,amplitude'"),
    },
    "certify": {
        "b_exp": (_b_exp, "auto", "Hardy profile exponent or 'auto'"),
        "margin": (float, 0.1, "Hardy margin for the automatic exponent"),
        "k_max": (int, 4, "number of certified eigenvalues"),
        "safety": (float, 0.5, "fraction of the limit constant used for gamma"),
        "cap": (float, 1e6, "largest n searched for N"),
        "sn_list": (_floats, [50.0, 100.0, 200.0], "n values for the S_n table"),
    },
    "weyl": {
        "p_list": (_floats, [0.0, 0.5, 1.0], "wavenumbers p"),
        "n_list": (_floats, [8.0, 16.0, 32.0, 64.0], "family indices n"),
        "detune": (float, 0.1, "energy offset for the non-decay check"),
        "eps": (float, None, "plateau width (default min(0.5, tan(theta)/2))"),
    },
    "bracket": {
        "n_list": (_floats, [100.0, 400.0, 1600.0], "bracketing parameters n"),
        "beta": (float, 1.0, "delta strength for the 1D checks"),
        "length": (float, 10.0, "interval length for the oracle check"),
        "l_list": (_floats, [4.0, 8.0, 16.0, 32.0], "interval lengths for the exponential fit"),
    },
    "sweep": {
        "boxes": (_floats, [24.0, 48.0, 96.0], "box sizes (times 1/alpha)"),
        "hs": (_floats, [0.5, 0.25, 0.125], "mesh widths for the order check (times 1/alpha)"),
        "h": (float, None, "mesh width for the box sweep (default 0.25/alpha)"),
        "order_box": (float, None, "box for the order check (default 24/alpha)"),
        "k": (int, 4, "eigenvalues tracked in the box sweep"),
        "scale_c": (float, 2.0, "dilation factor for the scaling check"),
    },
}
PLOT_COLUMNS = {
    "spectrum": ("index", "eigenvalue"),
    "certify": ("k", "bound_minus_threshold"),
    "weyl": ("n", "defect"),
    "bracket": ("n", "bound"),
    "sweep": ("box", "lambda_1"),
}


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment; keys use ``-`` or ``_``."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInput(f"{path}:{lineno}: expected 'key = value'")
        key, val = (x.strip() for x in line.split("=", 1))
        out[key.replace("-", "_")] = val
    return out


def _convert(typ, val, key):
    if val is None:
        return None
    if typ is bool:
        if isinstance(val, bool):
            return val
        s = str(val).strip().lower()
        if s in ("1", "true", "yes", "on"):
            return True
        if s in ("0", "false", "no", "off"):
            return False
        raise InvalidInput(f"{key}: expected a boolean, got {val!r}")
    try:
        return typ(val)
    except (TypeError, ValueError) as exc:
        raise InvalidInput(f"{key}: cannot parse {val!r}") from exc


@dataclass
class RunConfig:
    command: str
    values: dict = field(default_factory=dict)

    def __getattr__(self, key):
        try:
            return self.__dict__["values"][key]
        except KeyError as exc:
            raise AttributeError(key) from exc

    @property
    def model(self) -> ConeModel:
        return ConeModel(self.values["alpha"], self.values["theta_rad"])

    def echo(self) -> dict:
        return {"command": self.command, **{k: v for k, v in self.values.items()}}

    def validate(self) -> None:
        v = self.values
        a = v["alpha"]
        if not (isinstance(a, float) and math.isfinite(a) and a > 0):
            raise InvalidInput(f"alpha must be a positive number, got {a!r}")
        if v.get("theta") is not None and v.get("theta_deg") is not None:
            raise InvalidInput("give either --theta or --theta-deg, not both")
        if v.get("theta") is not None:
            th = v["theta"]
        elif v.get("theta_deg") is not None:
            th = math.radians(v["theta_deg"])
        else:
            th = math.pi / 4
        if not 0.0 < th < math.pi / 2:
            deg = math.degrees(th)
            raise InvalidInput(f"theta must lie strictly between 0 and 90 degrees, got {deg:g} degrees")
        v["theta_rad"] = th
        if v["format"] not in ("csv", "json"):
            raise InvalidInput(f"--format must be csv or json, got {v['format']!r}")
        if v["workers"] < 1:
            raise InvalidInput("--workers must be >= 1")
        for key in ("rmax", "zext", "h", "tol", "margin", "cap", "length", "beta", "scale_c", "order_box"):
            if v.get(key) is not None and not v[key] > 0:
                raise InvalidInput(f"{key} must be > 0, got {v[key]!r}")
        if self.command == "weyl" and v.get("eps") is not None and not 0 < v["eps"] < math.tan(th):
            raise InvalidInput(f"eps must lie in (0, tan(theta)) = (0, {math.tan(th):.4g})")
        if self.command == "certify":
            if v["b_exp"] != "auto" and not v["b_exp"] > 0.5:
                raise InvalidInput("b_exp must exceed 1/2")
            if not 0 < v["safety"] < 1 or not 0 < v["margin"] < 1:
                raise InvalidInput("safety and margin must lie in (0, 1)")
        if self.command == "spectrum" and v.get("bump") is not None and len(v["bump"]) != 2:
            raise InvalidInput("--bump takes 'R0,amplitude'")
        for key in ("n_list", "l_list", "sn_list", "boxes"):
            if v.get(key) is not None:
                xs = v[key]
                if not xs or any(b <= a for a, b in zip(xs, xs[1:])):
                    raise InvalidInput(f"{key} must be a non-empty ascending list")
        if v.get("hs") is not None:
            xs = v["hs"]
            if len(xs) < 3 or any(b >= a for a, b in zip(xs, xs[1:])) or xs[-1] <= 0:
                raise InvalidInput("hs must list at least three positive mesh widths, coarse to fine")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_options(p, table):
    for dest, (typ, default, help_) in table.items():
        flag = "--" + dest.replace("_", "-")
        flags = [flag]
        if dest == "k":
            flags = ["-k", "--k"]
        if typ is bool:
            p.add_argument(*flags, dest=dest, action="store_const", const=True, default=None, help=help_)
        else:
            p.add_argument(*flags, dest=dest, default=None, type=str, help=f"{help_} [default: {default}]")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="conedelta", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key = value file; flags override it")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, table in SPECIFIC.items():
        p = sub.add_parser(name, help=f"run the {name} computation")
        p.add_argument("--config", dest="sub_config", help=argparse.SUPPRESS)
        _add_options(p, COMMON)
        _add_options(p, table)
    return parser


def make_config(argv=None) -> RunConfig:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    cfg_path = args.config or getattr(args, "sub_config", None)
    file_vals = read_config(cfg_path) if cfg_path else {}
    table = {**COMMON, **SPECIFIC[args.command]}
    unknown = set(file_vals) - set(table)
    if unknown:
        raise InvalidInput(f"unknown config keys: {', '.join(sorted(unknown))}")
    values = {}
    for dest, (typ, default, _) in table.items():
        raw = getattr(args, dest)
        if raw is None:
            raw = file_vals.get(dest)
        values[dest] = _convert(typ, raw, dest) if raw is not None else default
    cfg = RunConfig(args.command, values)
    cfg.validate()
    return cfg


def _pool_map(fn, items, workers):
    """Map in input order, optionally over a process pool."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as ex:
        return list(ex.map(fn, items))


# ------------------------------------------------------------------ spectrum

def _generatrix(cfg: RunConfig, model: ConeModel):
    if cfg.generatrix:
        return discretize.Generatrix.from_file(cfg.generatrix, model.theta)
    if cfg.bump:
        R0, amp = cfg.bump
        return discretize.Generatrix.bump(model.theta, R0, amp)
    return None


def run_spectrum(cfg: RunConfig) -> SpectralReport:
    model = cfg.model
    a = model.alpha
    rmax = cfg.rmax or 24.0 / a
    zext = cfg.zext or rmax
    h = cfg.h or 0.25 / a
    t0 = time.perf_counter()
    grid = discretize.build_grid(model, rmax, zext, h)
    gen = _generatrix(cfg, model)
    pencil = discretize.assemble(grid, model, gen) if gen is None or gen.straight else \
        discretize.assemble_deformed(grid, model, gen)
    t1 = time.perf_counter()
    rep = eigensolve.lowest_eigs(pencil, k=cfg.k, shift=cfg.shift, tol=cfg.tol)
    t2 = time.perf_counter()
    thr = model.threshold
    rows = [{"index": i + 1, "eigenvalue": float(l), "residual": float(r), "below_threshold": bool(l < thr)}
            for i, (l, r) in enumerate(zip(rep.eigenvalues, rep.residuals))]
    out = SpectralReport("spectrum", cfg.echo(), ["index", "eigenvalue", "residual", "below_threshold"], rows)
    out.sections["eigen"] = rep.to_dict()
    out.sections["pencil"] = pencil.describe()
    lower = bracket.global_lower_bound(model)
    out.sections["global_lower_bound"] = lower
    out.add_check("residuals", float(rep.residuals.max()) if len(rep.residuals) else 0.0,
                  f"<= {cfg.tol:g}", bool(rep.converged))
    out.add_check("bracketing_consistency", float(rep.eigenvalues.min()) - lower, ">= 0",
                  bracket.bracketing_consistency(rep, lower))
    out.add_check("count_below_threshold", rep.count_below_threshold, "informational", True)
    out.provenance = {"versions": versions(), "timings": {"assemble": t1 - t0, "solve": t2 - t1}}
    return out


# ------------------------------------------------------------------- certify

def run_certify(cfg: RunConfig) -> SpectralReport:
    model = cfg.model
    b = profiles.select_hardy_exponent(model.theta, cfg.margin) if cfg.b_exp == "auto" else cfg.b_exp
    chi1 = profiles.make_hardy_poly(b)
    hardy = profiles.hardy_check(chi1, model.theta)
    if not hardy.satisfied:
        raise InvalidInput(f"Hardy condition fails for b_exp={b:g} at theta={math.degrees(model.theta):g} "
                           f"degrees (margin {hardy.margin:.3g}); no certificate exists for this profile")
    t0 = time.perf_counter()
    L = trial.sn_limit(model, chi1)
    table = [trial.compute_sn(n, model, chi1).to_dict() for n in cfg.sn_list]
    cert = trial.build_certificate(model, chi1, k_max=cfg.k_max, safety=cfg.safety, cap=cfg.cap)
    t1 = time.perf_counter()
    thr = Fraction(model.alpha) ** 2 / 4
    rows = []
    for k, (nk, bnd, sc, er) in enumerate(zip(cert.n_seq, cert.bounds, cert.member_sn_scaled,
                                              cert.member_errors), 1):
        rows.append({"k": k, "n_k": nk, "bound": bnd, "bound_minus_threshold": float(bnd + thr),
                     "sn_scaled": sc, "sn_error": er})
    cols = ["k", "n_k", "bound", "bound_minus_threshold", "sn_scaled", "sn_error"]
    out = SpectralReport("certify", cfg.echo(), cols, rows)
    out.sections.update({"b_exp": b, "hardy": hardy.to_dict(), "limit_L": L, "sn_table": table,
                         "certificate": {"gamma": cert.gamma, "n_start": cert.n_start, "n_seq": cert.n_seq,
                                         "bounds": cert.bounds, "safety": cert.safety,
                                         "evaluations": cert.evaluations, "chi1": cert.chi1}})
    rec = all(b2 == a2 * a2 + a2 for a2, b2 in zip(cert.n_seq, cert.n_seq[1:]))
    out.add_check("gamma_positive", cert.gamma, "> 0", cert.gamma > 0)
    out.add_check("recursion", cert.n_seq, "n_{k+1} = n_k^2 + n_k", rec)
    out.add_check("supports_disjoint", True, "pairwise", trial.supports_disjoint(cert.n_seq))
    out.add_check("bounds_below_threshold", [str(x) for x in cert.bounds], "< -alpha^2/4",
                  all(x < -thr for x in cert.bounds))
    out.provenance = {"versions": versions(), "timings": {"certify": t1 - t0}}
    return out


# ---------------------------------------------------------------------- weyl

def _weyl_point(args):
    n, p, alpha, theta, detune, eps = args
    model = ConeModel(alpha, theta)
    d = weyl.weyl_defect(n, p, model, 0.0, eps)
    dd = weyl.weyl_defect(n, p, model, detune, eps)
    return d, dd


def run_weyl(cfg: RunConfig) -> SpectralReport:
    model = cfg.model
    t0 = time.perf_counter()
    pts = [(n, p, model.alpha, model.theta, cfg.detune, cfg.eps) for p in cfg.p_list for n in cfg.n_list]
    res = _pool_map(_weyl_point, pts, cfg.workers)
    rows = []
    for (n, p, *_), (d, dd) in zip(pts, res):
        rows.append({"p": p, "n": n, "defect": d.defect, "detuned_defect": dd.defect, "norm_sq": d.norm_sq,
                     "grad_sq": d.grad_sq, "target_energy": d.target_energy, "rho": d.rho})
    cols = ["p", "n", "defect", "detuned_defect", "norm_sq", "grad_sq", "target_energy", "rho"]
    out = SpectralReport("weyl", cfg.echo(), cols, rows)
    fits = {}
    for p in cfg.p_list:
        sel = [r for r in rows if r["p"] == p]
        d0, d1 = sel[0]["defect"], sel[-1]["defect"]
        if len(sel) >= 2:
            q = -np.polyfit(np.log([r["n"] for r in sel]), np.log([r["defect"] for r in sel]), 1)[0]
            fits[str(p)] = float(q)
        out.add_check(f"decay_p={p:g}", d1 / d0, "<= 0.25", d1 <= d0 / 4.0)
        out.add_check(f"detuned_p={p:g}", sel[-1]["detuned_defect"], ">= 0.05", sel[-1]["detuned_defect"] >= 0.05)
        jr = weyl.jump_residual(cfg.n_list[0], p, model, cfg.eps)
        out.add_check(f"jump_p={p:g}", jr, "== 0", jr == 0.0)
    out.sections["fitted_exponents"] = fits
    out.sections["supports_disjoint"] = weyl.dyadic_supports_disjoint(cfg.n_list)
    out.provenance = {"versions": versions(), "timings": {"weyl": time.perf_counter() - t0}}
    return out


# ------------------------------------------------------------------- bracket

def _bound_point(args):
    n, alpha, theta = args
    return bracket.threshold_lower_bound(n, ConeModel(alpha, theta))


def run_bracket(cfg: RunConfig) -> SpectralReport:
    model = cfg.model
    t0 = time.perf_counter()
    bounds = _pool_map(_bound_point, [(n, model.alpha, model.theta) for n in cfg.n_list], cfg.workers)
    thr = model.threshold
    rows = [{"n": b.n, "c_n": b.c_n, "mu": b.mu_val, "bound": b.bound, "distance": thr - b.bound}
            for b in bounds]
    out = SpectralReport("bracket", cfg.echo(), ["n", "c_n", "mu", "bound", "distance"], rows)
    mu = bracket.mu_neumann_delta(cfg.beta, cfg.length)
    oracle = bracket.mu_dense_oracle(cfg.beta, cfg.length)
    rel = abs(mu.mu - oracle) / abs(oracle)
    C, verified = bracket.ey02_fit(cfg.beta, cfg.l_list)
    out.sections.update({"mu": mu.to_dict(), "oracle": oracle, "ey02": {"C": C, "verified": verified},
                         "decay_rate": bracket.observed_decay_rate(cfg.beta, cfg.l_list)})
    out.add_check("below_threshold", max(r["bound"] for r in rows), "<= -alpha^2/4",
                  all(r["bound"] <= thr for r in rows))
    out.add_check("monotone", [r["bound"] for r in rows], "increasing",
                  all(b > a for a, b in zip([r["bound"] for r in rows], [r["bound"] for r in rows][1:])))
    ratios = [b["distance"] / a["distance"] for a, b in zip(rows, rows[1:])]
    out.add_check("halving", ratios, "0.5 +- 30% per 4x step (when steps are 4x)",
                  all(0.35 <= r <= 0.65 for r in ratios))
    out.add_check("mu_oracle", rel, "<= 1e-6 relative", rel <= 1e-6)
    out.add_check("ey02_fit", C, "fitted law bounds longer intervals", verified)
    out.provenance = {"versions": versions(), "timings": {"bracket": time.perf_counter() - t0}}
    return out


# --------------------------------------------------------------------- sweep

def _eig_point(args):
    alpha, theta, rmax, h, k = args
    model = ConeModel(alpha, theta)
    pencil = discretize.assemble(discretize.build_grid(model, rmax, rmax, h), model)
    rep = eigensolve.lowest_eigs(pencil, k=k)
    return rep.eigenvalues.tolist(), rep.residuals.tolist(), rep.count_below_threshold


def richardson_order(l_coarse: float, l_mid: float, l_fine: float) -> float:
    """Observed order ``log2((l(2h) - l(h)) / (l(h) - l(h/2)))``."""
    return math.log2((l_coarse - l_mid) / (l_mid - l_fine))


def run_sweep(cfg: RunConfig) -> SpectralReport:
    model = cfg.model
    a, th = model.alpha, model.theta
    h = cfg.h or 0.25 / a
    obox = cfg.order_box or 24.0 / a
    t0 = time.perf_counter()
    c = cfg.scale_c
    jobs = ([("box", (a, th, B / a, h, cfg.k)) for B in cfg.boxes]
            + [("h", (a, th, obox, hh / a, 1)) for hh in cfg.hs]
            + [("scale", (a, th, obox, h, 1)), ("scale", (c * a, th, obox / c, h / c, 1))])
    res = _pool_map(_eig_point, [j[1] for j in jobs], cfg.workers)
    rows = []
    for (kind, (al, _, box, hh, _)), (lam, resid, cnt) in zip(jobs, res):
        rows.append({"kind": kind, "alpha": al, "box": box, "h": hh, "lambda_1": lam[0],
                     "max_residual": max(resid), "count_below": cnt})
    cols = ["kind", "alpha", "box", "h", "lambda_1", "max_residual", "count_below"]
    out = SpectralReport("sweep", cfg.echo(), cols, rows)
    box_res = [r for (kind, _), r in zip(jobs, res) if kind == "box"]
    ok_mono = all(np.all(np.asarray(b[0][: len(a_[0])]) <= np.asarray(a_[0]) + 1e-8)
                  for a_, b in zip(box_res, box_res[1:]))
    out.add_check("box_monotone", [r[0] for r in box_res], "non-increasing within 1e-8", ok_mono)
    counts = [r[2] for r in box_res]
    out.add_check("count_increasing", counts, "strictly increasing",
                  all(y > x for x, y in zip(counts, counts[1:])))
    hl = [r[0][0] for (kind, _), r in zip(jobs, res) if kind == "h"]
    if len(hl) >= 3:
        order = richardson_order(*hl[:3])
        out.add_check("richardson_order", order, "in [1.5, 2.5]", 1.5 <= order <= 2.5)
    sc = [r[0][0] for (kind, _), r in zip(jobs, res) if kind == "scale"]
    ratio = sc[1] / sc[0]
    out.add_check("scaling", ratio, f"== {c * c:g} within 2%", abs(ratio / (c * c) - 1.0) <= 0.02)
    out.provenance = {"versions": versions(), "timings": {"sweep": time.perf_counter() - t0}}
    return out


RUNNERS = {"spectrum": run_spectrum, "certify": run_certify, "weyl": run_weyl, "bracket": run_bracket,
           "sweep": run_sweep}


def main(argv=None) -> int:
    try:
        cfg = make_config(argv)
    except SystemExit as exc:  # argparse: --help or a usage error
        return int(exc.code or 0)
    except InvalidInput as exc:
        print(f"conedelta: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"conedelta: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    np.random.seed(cfg.seed)
    try:
        rep = RUNNERS[cfg.command](cfg)
    except InvalidInput as exc:
        print(f"conedelta: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"conedelta: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ConeDeltaError as exc:  # pragma: no cover
        print(f"conedelta: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    name = cfg.name or cfg.command
    plot = PLOT_COLUMNS[cfg.command] if cfg.emit_plot_data else None
    paths = rep.write(cfg.out_dir, name, cfg.format, plot)
    for p in paths:
        print(p)
    for key, chk in rep.checks.items():
        print(f"{'PASS' if chk['passed'] else 'FAIL'} {key}: {chk['value']} (target {chk['target']})")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
