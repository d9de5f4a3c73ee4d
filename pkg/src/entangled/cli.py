"""Command-line interface.

Every command writes one JSON report ``{command, config, results, ledger}``
(to ``--out`` or standard output).  Reports contain no timestamps and are
serialised with sorted keys, so the same configuration and seed give
byte-identical output.

Exit status: 0 on success, 1 when a verification step fails (a ledger slack
below the tolerance, or a failed acceptance criterion), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from . import __version__

COMMANDS = ("decompose", "bump-check", "eval-form", "eval-tp", "eval-dyadic", "eval-triangular",
            "verify-telescoping", "replay-proof", "probe-norm", "selftest")

DEFAULT_CONFIG: Dict[str, Any] = {
    "grid": {"L": 16.0, "N": 32},
    # t_min / t_max of null select the default rule for the grid
    "quadrature": {"M": 256, "t_min": None, "t_max": None},
    "symbol": "cone-eta",
    "seed": 0,
    "tolerance": 1e-6,
    "threads": None,
    "inputs": {"fields": None, "kind": "gaussian-random-trig", "band": 6, "index": 0},
    "windows": {"u": [0.0], "v": [0.0], "alpha": [1.0, 1.5], "alpha_max": 64.0, "alpha_nodes": 128},
    "decompose": {"L": 8.0, "N": 64, "order": 2, "scales": 8, "reproduction_tol": 1e-3},
    "dyadic": {"depth_min": None, "depth_max": None},
    "telescoping": {"rtol": 3e-3},
    "replay": {"spatial": True, "negative_control": False, "pair_defect": 0.1},
    "probe": {"kind": "gaussian-random-trig", "starts": 10, "max_iter": 200, "band": 6},
    "selftest": {"full": False, "criteria": None},
}


class UsageError(Exception):
    """Bad configuration or missing input; exit status 2."""


# -- configuration -----------------------------------------------------------------------

def _merge(base: dict, extra: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if k not in out:
            raise UsageError(f"unknown config key {path + k!r}")
        if isinstance(out[k], dict):
            if not isinstance(v, dict):
                raise UsageError(f"config key {path + k!r} must be an object")
            out[k] = _merge(out[k], v, path + k + ".")
        else:
            out[k] = v
    return out


def _set_path(cfg: dict, dotted: str, value: Any):
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            raise UsageError(f"unknown config key {dotted!r}")
        node = node[k]
    if keys[-1] not in node:
        raise UsageError(f"unknown config key {dotted!r}")
    node[keys[-1]] = value


def load_config(path: Optional[str] = None, overrides: Optional[List[str]] = None) -> dict:
    """Defaults, then the JSON file at ``path``, then ``key.path=value`` overrides.

    Override values are parsed as JSON when possible (``1e-3``, ``[0, 1]``,
    ``null``) and taken as strings otherwise.
    """
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise UsageError(f"config file {path} not found") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"malformed config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError(f"malformed config {path}: top level must be an object")
        cfg = _merge(cfg, data)
    for item in overrides or []:
        if "=" not in item:
            raise UsageError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        _set_path(cfg, key.strip(), value)
    return cfg


def _as_list(x) -> list:
    return list(x) if isinstance(x, (list, tuple)) else [x]


# -- building blocks ---------------------------------------------------------------------------

def _grid(cfg):
    from .grid import Grid1D

    try:
        return Grid1D(float(cfg["grid"]["L"]), int(cfg["grid"]["N"]))
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid grid: {exc}") from None


def _quadrature(cfg, grid):
    from .grid import ScaleQuadrature

    qc = cfg["quadrature"]
    M = int(qc["M"])
    if qc["t_min"] is None and qc["t_max"] is None:
        return ScaleQuadrature.for_grid(grid, M)
    t_min = float(qc["t_min"]) if qc["t_min"] is not None else 4 * grid.spacing
    t_max = float(qc["t_max"]) if qc["t_max"] is not None else grid.L
    return ScaleQuadrature.log_midpoint(t_min, t_max, M)


def _read(path):
    from .grid import read_field

    try:
        return read_field(path)
    except FileNotFoundError:
        raise UsageError(f"input file {path} not found") from None


def _inputs(cfg):
    """The four input fields: from EF2D files, or generated from the seed."""
    from .forms import QuadInput
    from .grid import SampledField2D
    from .probe import EnsembleSpec, random_quadruple

    ic = cfg["inputs"]
    paths = ic["fields"]
    if paths:
        paths = _as_list(paths)
        if len(paths) == 1:
            paths = paths * 4
        if len(paths) != 4:
            raise UsageError("inputs.fields needs one or four paths")
        fields = [_read(p) for p in paths]
        grid = fields[0].grid
        cfg["grid"] = {"L": grid.L, "N": grid.N}
        real = all(np.max(np.abs(f.values.imag), initial=0.0) <= 1e-12 for f in fields)
        fields = [SampledField2D(grid, f.values.real if real else f.values, real=real) for f in fields]
        try:
            return QuadInput(*fields)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    grid = _grid(cfg)
    try:
        spec = EnsembleSpec(kind=ic["kind"], count=1, seed=int(cfg["seed"]), grid=grid, band=int(ic["band"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return random_quadruple(spec, int(ic["index"]))


def _symbol(cfg, grid):
    from .symbols import BUILTIN_SYMBOLS, Symbol2D, builtin_symbol

    name = cfg["symbol"]
    if name in BUILTIN_SYMBOLS:
        return builtin_symbol(name, grid)
    if not Path(str(name)).exists():
        raise UsageError(f"symbol {name!r} is neither a built-in ({', '.join(sorted(BUILTIN_SYMBOLS))}) "
                         "nor an existing file")
    from .grid import read_field

    f = read_field(name, domain="frequency")
    if f.grid != grid:
        raise UsageError(f"symbol file grid {f.grid} does not match the input grid {grid}")
    return Symbol2D(grid, f.values, name=Path(name).name)


def _num(z):
    z = complex(z)
    return z.real if z.imag == 0 else {"re": z.real, "im": z.imag}


def _entry(*args, **kw):
    from .telescope import ledger_entry

    return ledger_entry(*args, **kw)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


# -- commands ------------------------------------------------------------------------------------

def cmd_decompose(cfg, out_dir):
    from .grid import Grid1D, ScaleQuadrature
    from .symbols import coefficients_mu_t, cone_partition, cz_seminorm_estimate, reproduce, slice_mt

    dc = cfg["decompose"]
    grid = Grid1D(float(dc["L"]), int(dc["N"]))
    m = _symbol(cfg, grid)
    order = int(dc["order"])
    try:
        m_xi, m_eta = cone_partition(m, order)
        base = cz_seminorm_estimate(m, order)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    quad = ScaleQuadrature.for_grid(grid, int(cfg["quadrature"]["M"]))
    rep, covered = reproduce(m, quad)
    err = float(np.max(np.abs(rep - m.values)[covered], initial=0.0))
    ts = np.geomspace(quad.t_min, quad.t_max, int(dc["scales"]))
    rows, certs = [], []
    for t in ts:
        try:
            cf = coefficients_mu_t(slice_mt(m_eta, float(t)))
            certs.append(cf.certificate)
            rows.append((float(t), cf.certificate))
        except ValueError as exc:
            rows.append((float(t), "unavailable"))
            certs.append(None)
            last_error = str(exc)
    results = [
        {"label": "symbol class estimate", "symbol": m.name, "order": order, "value": base},
        {"label": "cone pieces", "kappa_xi": m_xi.meta["kappa"], "kappa_eta": m_eta.meta["kappa"]},
        {"label": "scale reproduction", "max_error_on_covered_bins": err, "covered_bins": int(covered.sum()),
         "t_min": quad.t_min, "t_max": quad.t_max, "M": quad.M},
        {"label": "coefficient decay certificate (eta cone)", "weight_power": 12,
         "scales": ts.tolist(), "certificates": certs},
    ]
    ledger = [_entry("reproduction", "scale reproduction error on covered bins <= tolerance",
                     err, float(dc["reproduction_tol"]))]
    finite = [c for c in certs if c is not None]
    if finite:
        top = max(finite)
        ledger.append(_entry("coefficients", "largest weighted coefficient", top, top, "info",
                             finite=math.isfinite(top)))
    else:
        ledger.append(_entry("coefficients", f"no scale resolvable: {last_error}", 0.0, 0.0, "info"))
    if out_dir is not None:
        _write_csv(out_dir / "decompose_scales.csv", ["t", "certificate"], rows)
    return results, ledger


def cmd_bump_check(cfg, out_dir):
    from .bump import build_f, build_h, dump_csv, smoothness_probe

    fam, hp = build_f(), build_h()
    e = fam.eps
    x = np.linspace(-6.0, 6.0, 24001)
    fx = fam.f(x)
    d = np.linspace(0.0, 1.5, 6001)
    vals = {
        "f(2)": float(fam.f(np.array([2.0]))[0]),
        "support": float(np.max(np.abs(fx[(x <= 1.0) | (x >= 3.0)]), initial=0.0)),
        "evenness": float(np.max(np.abs(fam.f(2.0 + d) - fam.f(2.0 - d)))),
        "plateau": float(np.max(np.abs(fam.f(np.linspace(1 + e, 3 - e, 4001)) - 1.0))),
    }
    ledger = [
        _entry("bump", "f(2) = 1", vals["f(2)"], 1.0, "eq"),
        _entry("bump", "f vanishes outside (1, 3)", vals["support"], 1e-12),
        _entry("bump", "f even about 2", vals["evenness"], 1e-12),
        _entry("bump", "f = 1 on the plateau", vals["plateau"], 1e-12),
    ]
    probes = []
    for name, w, x0 in (("f_sqrt", fam.f_sqrt, 1.0), ("f_sqrt", fam.f_sqrt, 3.0),
                        ("h_sqrt", hp.sqrt, -3.0), ("h_sqrt", hp.sqrt, 3.0)):
        r = smoothness_probe(w, x0, max_order=3)
        probes.append({"function": name, "x0": x0, "slopes": r.slopes.tolist(), "sup": r.sup.tolist(),
                       "bounded": bool(np.all(r.bounded))})
        ledger.append(_entry("smoothness", f"{name} derivative growth at {x0:g} (slope <= 0.25)",
                             float(np.max(r.slopes)), r.blowup_threshold))
    ctrl = smoothness_probe(lambda s: np.abs(s) ** 0.5, 0.0, max_order=3)
    ledger.append(_entry("negative control", "|x|^(1/2) first derivative diverges (slope > 0.25)",
                         ctrl.blowup_threshold, float(ctrl.slopes[0])))
    results = [{"label": "bump invariants", **vals, "eps": fam.eps, "h0": hp.h0},
               {"label": "smoothness probes", "probes": probes},
               {"label": "negative control", "slopes": ctrl.slopes.tolist()}]
    if out_dir is not None:
        dump_csv(out_dir / "bump.csv")
    return results, ledger


def cmd_eval_form(cfg, out_dir):
    from .forms import entangled_spectrum, pair_with_symbol, product_form
    from .oracles import MAX_BRUTE_N, brute_kernel_form
    from .symbols import symbol_to_kernel

    q = _inputs(cfg)
    m = _symbol(cfg, q.grid)
    B = entangled_spectrum(q)
    try:
        val = pair_with_symbol(B, m)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    results = [{"label": "Lambda_m(F1, F2, F3, F4)", "value": _num(val), "evaluator": "spectral",
                "symbol": m.name}]
    ledger = []
    if m.name == "one":
        pf = product_form(q)
        results.append({"label": "sum F1 F2 F3 F4 dx^2", "value": _num(pf)})
        ledger.append(_entry("product form", "constant symbol equals the pointwise product form",
                             float(np.real(val)), float(np.real(pf)), "eq"))
    if q.grid.N <= MAX_BRUTE_N:
        brute = brute_kernel_form(q.grid, q.arrays, symbol_to_kernel(m).values)
        ledger.append(_entry("oracle", "spectral value equals the kernel sum",
                             float(np.real(val)), float(np.real(brute)), "eq"))
    return results, ledger


def cmd_eval_tp(cfg, out_dir):
    from .forms import twisted_paraproduct

    q = _inputs(cfg)
    m = _symbol(cfg, q.grid)
    val = twisted_paraproduct(q.F1, q.F2, q.F3, m)
    return [{"label": "T(F1, F2, F3) = Lambda(F1, F2, F3, 1)", "value": _num(val), "symbol": m.name}], []


def cmd_eval_dyadic(cfg, out_dir):
    from .forms import dyadic_form
    from .oracles import MAX_BRUTE_N, brute_dyadic

    q = _inputs(cfg)
    dc = cfg["dyadic"]
    rng = None
    if dc["depth_min"] is not None or dc["depth_max"] is not None:
        levels = int(math.log2(q.grid.N))
        rng = (int(dc["depth_min"] or 0), int(levels - 1 if dc["depth_max"] is None else dc["depth_max"]))
    try:
        rep = dyadic_form(q, rng)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    depths = rep.meta["depths"]
    results = [{"label": "dyadic form", "value": rep.value, "depths": depths,
                "per_depth": np.asarray(rep.per_scale).tolist()}]
    ledger = []
    if q.grid.N <= MAX_BRUTE_N and q.grid.N <= 8:
        ledger.append(_entry("oracle", "fast dyadic sum equals the explicit kernel sum", rep.value,
                             brute_dyadic(q.grid, q.arrays, depths), "eq"))
    if out_dir is not None:
        _write_csv(out_dir / "dyadic_depths.csv", ["depth", "value"], zip(depths, rep.per_scale))
    return results, ledger


def cmd_eval_triangular(cfg, out_dir):
    from .forms import triangular_form

    q = _inputs(cfg)
    val = triangular_form(q.F1, q.F2, q.F3)
    return [{"label": "triangular form", "value": _num(val)}], []


def cmd_verify_telescoping(cfg, out_dir):
    from .forms import entangled_spectrum
    from .symbols import build_psi_v, root_window
    from .telescope import certify_pair, derived_window, ftc_check, gaussian_window, telescoping_identity_check

    q = _inputs(cfg)
    g = q.grid
    quad = _quadrature(cfg, g)
    alphas = [float(a) for a in _as_list(cfg["windows"]["alpha"])]
    if len(alphas) == 1:
        alphas = alphas * 2
    ledger, results = [], []
    pairs = []
    for a in alphas[:2]:
        p = certify_pair(gaussian_window(a), derived_window(a), g, method="closed", tol=1e-10, strict=False)
        pairs.append(p)
        ledger.append(_entry("pair certificate", f"(g, h) dilation residual, alpha = {a:g}", p.residual, 1e-10))
    for v in _as_list(cfg["windows"]["v"]):
        p = certify_pair(root_window(), build_psi_v(float(v)), g, tol=float(cfg["tolerance"]), strict=False)
        ledger.append(_entry("pair certificate", f"(phi, psi) dilation residual, v = {float(v):g}",
                             p.residual, float(cfg["tolerance"]), method=p.method))
    if not all(p.certified for p in pairs):
        return results, ledger
    B = entangled_spectrum(q)
    chk = telescoping_identity_check(q, pairs[0], pairs[1], quad, B)
    results.append({"label": "telescoping identity", "alphas": alphas[:2], **chk})
    ledger.append(_entry("telescoping identity", "relative gap between scale integral and endpoints",
                         chk["relative_gap"], float(cfg["telescoping"]["rtol"])))
    ftc = ftc_check(pairs[0], pairs[1], g, quad.t_min, quad.t_max)
    ledger.append(_entry("fundamental theorem", "per-bin gap of the scale integral (fine rule)", ftc, 1e-10))
    if out_dir is not None:
        from .forms import WindowQuad, single_scale_batch

        p1, p2 = pairs
        a = single_scale_batch(B, WindowQuad(p1.sigma, p1.sigma, p2.rho, p2.rho), quad.nodes).real
        b = single_scale_batch(B, WindowQuad(p1.rho, p1.rho, p2.sigma, p2.sigma), quad.nodes).real
        _write_csv(out_dir / "telescoping_scales.csv", ["t", "weight", "sigma_rho", "rho_sigma"],
                   zip(quad.nodes, quad.weights, a, b))
    return results, ledger


def cmd_replay_proof(cfg, out_dir):
    from .telescope import ProofReplay, uniformity_certificate

    q = _inputs(cfg)
    quad = _quadrature(cfg, q.grid)
    rc = cfg["replay"]
    wc = cfg["windows"]
    defect = float(rc["pair_defect"]) if rc["negative_control"] else 0.0
    try:
        rep = ProofReplay(q, quad, float(wc["alpha_max"]), int(wc["alpha_nodes"]), float(cfg["tolerance"]),
                          pair_defect=defect)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    results, ledger = [], []
    for u in _as_list(wc["u"]):
        for v in _as_list(wc["v"]):
            r = rep.run(float(u), float(v), strict=False, spatial=bool(rc["spatial"]))
            meta = dict(r.meta)
            results.append({"label": "proof replay", "value": float(np.real(r.value)), **meta})
            for e in r.ledger:
                ledger.append({**e, "u": float(u), "v": float(v)})
    if not rep.degenerate:
        cert = uniformity_certificate(rep)
        results.append({"label": "(u, v) uniformity", "sup_C_u_C_minus_u": cert["sup"], "argsup": cert["argsup"],
                        "uniform_constant": cert["uniform_constant"],
                        "uniform_constant_raw": cert["uniform_constant_raw"]})
        for res in results[:-1]:
            ledger.append(_entry("uniformity", f"constant at (u, v) = ({res['u']:g}, {res['v']:g}) "
                                 "<= uniform constant", res["normalised_constant"], cert["uniform_constant"]))
    if defect:
        results.append({"label": "negative control", "pair_defect": defect})
    if out_dir is not None and results and results[0].get("label") == "proof replay":
        r0 = rep.run(float(_as_list(wc["u"])[0]), float(_as_list(wc["v"])[0]), strict=False, spatial=False)
        _write_csv(out_dir / "replay_scales.csv", ["t", "weight", "abs_L_t"],
                   zip(quad.nodes, quad.weights, np.asarray(r0.per_scale if r0.per_scale is not None
                                                            else np.zeros(quad.M))))
    return results, ledger


def cmd_probe_norm(cfg, out_dir):
    from .grid import write_field
    from .probe import AscentConfig, EnsembleSpec, probe_norm

    g = _grid(cfg)
    pc = cfg["probe"]
    try:
        spec = EnsembleSpec(kind=pc["kind"], count=int(pc["starts"]), seed=int(cfg["seed"]), grid=g,
                            band=int(pc["band"]))
        acfg = AscentConfig(max_iter=int(pc["max_iter"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    m = _symbol(cfg, g)
    est = probe_norm(m, spec, acfg)
    res = {"label": "empirical norm (lower bound)", "symbol": m.name, **est.to_dict()}
    res["stats"] = {k: v for k, v in est.stats.items() if k not in ("spec", "config")}
    ledger = [_entry("ascent", "best trace nondecreasing (smallest increment)",
                     0.0, float(np.min(np.diff(est.trace), initial=0.0)))]
    ledger.append(_entry("ascent", "best ratio", est.best, est.best, "info", finite=math.isfinite(est.best)))
    if out_dir is not None and est.best_quad is not None:
        files = []
        for j, F in enumerate(est.best_quad.fields, 1):
            p = out_dir / f"argmax_F{j}.ef2d"
            write_field(p, F)
            files.append(p.name)
        res["argmax_files"] = files
        _write_csv(out_dir / "probe_trace.csv", ["iteration", "ratio"], enumerate(est.trace))
    return [res], ledger


def cmd_selftest(cfg, out_dir):
    from .acceptance import run_all

    sc = cfg["selftest"]
    numbers = [int(n) for n in _as_list(sc["criteria"])] if sc["criteria"] is not None else None

    def show(r):
        print(r.line(), file=sys.stderr, flush=True)

    rs = run_all(bool(sc["full"]), numbers, callback=show)
    results = [r.to_dict() for r in rs]
    ledger = [_entry(f"criterion {r.number}", r.title, 0.0 if r.passed else 1.0, 0.0) for r in rs]
    return results, ledger


HANDLERS = {
    "decompose": cmd_decompose,
    "bump-check": cmd_bump_check,
    "eval-form": cmd_eval_form,
    "eval-tp": cmd_eval_tp,
    "eval-dyadic": cmd_eval_dyadic,
    "eval-triangular": cmd_eval_triangular,
    "verify-telescoping": cmd_verify_telescoping,
    "replay-proof": cmd_replay_proof,
    "probe-norm": cmd_probe_norm,
    "selftest": cmd_selftest,
}


# -- report ---------------------------------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        # JSON has no infinities; keep them readable
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    if isinstance(x, (complex, np.complexfloating)):
        return _jsonable(_num(x))
    return x


def failures(ledger: List[dict], tol: float) -> List[dict]:
    return [e for e in ledger if e.get("slack") is not None and e["slack"] < -tol]


def run(command: str, cfg: dict, out_dir: Optional[Path] = None) -> tuple:
    """Run one command; returns ``(report, exit_status)``."""
    if command not in HANDLERS:
        raise UsageError(f"unknown command {command!r}")
    results, ledger = HANDLERS[command](cfg, out_dir)
    bad = failures(ledger, float(cfg["tolerance"]))
    if command == "selftest":
        bad = [e for e in ledger if e["slack"] < 0]
    report = {"command": command, "config": cfg, "results": results, "ledger": ledger,
              "failed": [f"{e['step']}: {e['label']}" for e in bad], "version": __version__}
    return _jsonable(report), (1 if bad else 0)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="entangled", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry, e.g. grid.N=64 or windows.u=[0,1]")
    common.add_argument("--out", help="write the JSON report here instead of standard output")
    common.add_argument("--out-dir", help="directory for CSV series and field files")
    common.add_argument("--N", type=int, help="grid size (grid.N)")
    common.add_argument("--L", type=float, help="period (grid.L)")
    common.add_argument("--M", type=int, help="scale quadrature nodes (quadrature.M)")
    common.add_argument("--seed", type=int, help="seed for generated inputs")
    common.add_argument("--symbol", help="built-in symbol name or EF2D file on the dual grid")
    common.add_argument("--fields", nargs="+", metavar="EF2D", help="one or four input field files")
    common.add_argument("--threads", type=int, help="cap on numerical library threads")
    helps = {
        "decompose": "cone partition, scale reproduction and coefficient decay of a symbol",
        "bump-check": "invariants and smoothness of the bump profiles (CSV dump with --out-dir)",
        "eval-form": "evaluate Lambda_m on four fields",
        "eval-tp": "evaluate the twisted paraproduct",
        "eval-dyadic": "evaluate the dyadic model form",
        "eval-triangular": "evaluate the triangular form",
        "verify-telescoping": "certify window pairs and check the telescoping identity",
        "replay-proof": "replay the positivity argument with a per-step ledger",
        "probe-norm": "gradient ascent on the normalised form (lower bounds only)",
        "selftest": "run the acceptance suite",
    }
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "replay-proof":
            sp.add_argument("--negative-control", action="store_true",
                            help="break the first window pair; the run must fail at the telescoping step")
        if name == "selftest":
            sp.add_argument("--full", action="store_true", help="full ensemble sizes (slow)")
            sp.add_argument("--criteria", type=int, nargs="+", help="subset of criteria")
        if name == "probe-norm":
            sp.add_argument("--starts", type=int, help="number of random starts (probe.starts)")
            sp.add_argument("--max-iter", type=int, help="ascent iteration cap (probe.max_iter)")
    return p


def _apply_flags(cfg: dict, args) -> None:
    flat = {"grid.N": args.N, "grid.L": args.L, "quadrature.M": args.M, "seed": args.seed,
            "symbol": args.symbol, "inputs.fields": args.fields, "threads": args.threads}
    if getattr(args, "negative_control", False):
        flat["replay.negative_control"] = True
    if getattr(args, "full", False):
        flat["selftest.full"] = True
    flat["selftest.criteria"] = getattr(args, "criteria", None)
    flat["probe.starts"] = getattr(args, "starts", None)
    flat["probe.max_iter"] = getattr(args, "max_iter", None)
    for k, v in flat.items():
        if v is not None:
            _set_path(cfg, k, v)


def _limit_threads(n: Optional[int]):
    if not n:
        return None
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return None
    return threadpool_limits(n)


def main(argv: Optional[List[str]] = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    try:
        cfg = load_config(args.config, args.set)
        _apply_flags(cfg, args)
        _limit_threads(cfg["threads"])
        out_dir = None
        if args.out_dir:
            out_dir = Path(args.out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
        report, status = run(args.command, cfg, out_dir)
    except UsageError as exc:
        print(f"entangled {args.command}: error: {exc}", file=sys.stderr)
        return 2
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    for item in report["failed"]:
        print(f"entangled {args.command}: verification failed at {item}", file=sys.stderr)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
