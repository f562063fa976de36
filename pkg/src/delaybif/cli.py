"""Command line front end: ``delaybif <subcommand> --config <path> [--out <dir>] [--seed <n>]``.

The configuration is a JSON document with a ``schema_version``, exactly one
parameter block (``physical`` or ``dimensionless``) and exactly one block
named after the subcommand. Every run writes CSV/SVG/JSON artifacts and a
``manifest.json`` listing each file with its SHA-256 digest.

Exit status: 0 on success, 2 on an invalid configuration (nothing written),
3 on numerical failure (artifacts written so far are kept, together with
``failure.json``).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import analytic, lyapunov, spectrum
from .model import InvalidParameterError, lower_equilibrium, params_from_config, swing_jet
from .plotting import emit_plot

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SUBCOMMANDS = ("stability-chart", "hopf-table", "spectrum-sweep", "simulate", "poincare", "branch", "cascade")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

_num = {"type": "number"}
_pair = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_pos_int = {"type": "integer", "minimum": 1}


def _block(props):
    return {"type": "object", "properties": props, "additionalProperties": False}


_SIM = {
    "t_end": {"type": "number", "exclusiveMinimum": 0},
    "dt": {"type": "number", "exclusiveMinimum": 0},
    "initial": _pair,
    "perturbation": {"type": "number", "minimum": 0},
    "tol": {"type": "number", "minimum": 1e-12, "maximum": 1e-3},
}

SUBCOMMAND_SCHEMAS = {
    "stability-chart": _block({
        "tau_range": _pair, "atilde_range": _pair,
        "tau_points": _pos_int, "atilde_points": _pos_int,
        "n_upper": {"type": "integer", "minimum": 0},
        "codim2_n_upper": {"type": "integer", "minimum": 0},
        "plot": {"type": "boolean"},
    }),
    "hopf-table": _block({"n_upper": {"type": "integer", "minimum": 0}}),
    "spectrum-sweep": _block({
        "tau_range": _pair, "points": _pos_int, "k": _pos_int, "count": _pos_int,
        "plot": {"type": "boolean"},
    }),
    "simulate": _block(dict(_SIM)),
    "poincare": _block(dict(_SIM, **{
        "normal": _pair, "offset": _num, "direction": {"enum": [-1, 1]},
        "x1_bounds": _pair, "x2_bounds": _pair, "t_min": {"type": "number", "minimum": 0},
    })),
    "branch": _block({
        "family": {"enum": [1, 2]}, "n": {"type": "integer", "minimum": 0},
        "tau_range": _pair, "max_steps": _pos_int,
        "switch_period_doubling": {"type": "boolean"},
        "plot": {"type": "boolean"},
    }),
    "cascade": _block({
        "window": _pair, "max_doublings": {"type": "integer", "minimum": 0},
        "family": {"enum": [1, 2]}, "n": {"type": "integer", "minimum": 0},
        "tau_inf": _num,
    }),
}

_PARAM_BLOCK = {"type": "object", "additionalProperties": _num}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": dict(
        {"schema_version": {"const": SCHEMA_VERSION},
         "physical": _PARAM_BLOCK, "dimensionless": _PARAM_BLOCK,
         "output": {"type": "string"},
         "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
         "tolerances": _block({
             "integrator": {"type": "number", "minimum": 1e-12, "maximum": 1e-3},
             "defect": {"type": "number", "minimum": 1e-12, "maximum": 1e-3},
             "event": {"type": "number", "minimum": 1e-10, "maximum": 1e-1},
         })},
        **SUBCOMMAND_SCHEMAS),
    "required": ["schema_version"],
    "additionalProperties": False,
}


class ConfigError(ValueError):
    """The configuration does not satisfy the schema."""


class NumericalFailure(RuntimeError):
    """A computation did not produce a trustworthy result."""


def load_config(doc, subcommand):
    """Validate a configuration mapping for ``subcommand``.

    Returns
    -------
    (SwingParams, dict)
        Parameters and the subcommand options.
    """
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(exc.message) from None
    present = [k for k in SUBCOMMANDS if k in doc]
    if present and present != [subcommand]:
        raise ConfigError(f"config holds blocks {present}, expected only '{subcommand}'")
    try:
        params = params_from_config(doc)
    except (InvalidParameterError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    return params, dict(doc.get(subcommand, {}))


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


class Artifacts:
    """Writes files into the output directory and keeps their digests."""

    def __init__(self, out):
        self.out = Path(out)
        self.files = {}

    def _put(self, name, data: bytes):
        path = self.out / name
        path.write_bytes(data)
        self.files[name] = hashlib.sha256(data).hexdigest()

    def csv(self, name, header, rows):
        import io

        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        self._put(name, buf.getvalue().encode())

    def json(self, name, obj):
        self._put(name, (json.dumps(obj, indent=2, sort_keys=True, default=_fmt) + "\n").encode())

    def svg(self, name, text):
        self._put(name, text.encode())

    def manifest(self, subcommand, status, config_digest):
        doc = {
            "subcommand": subcommand,
            "status": status,
            "config_sha256": config_digest,
            "files": [{"name": k, "sha256": v} for k, v in sorted(self.files.items())],
        }
        data = (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode()
        (self.out / "manifest.json").write_bytes(data)
        return doc


# subcommands -----------------------------------------------------------------

def _stability_chart(params, opt, art, ctx):
    tr = opt.get("tau_range", [0.0, 50.0])
    ar = opt.get("atilde_range", [0.03, 0.25])
    taus = np.linspace(tr[0], tr[1], opt.get("tau_points", 201))
    ats = np.linspace(ar[0], ar[1], opt.get("atilde_points", 111))
    c = params.c
    chart = analytic.stability_chart(params.a, c, taus, ats)
    art.csv("chart.csv", ["tau", "atilde", "n_u"],
            ((t, a, chart.n_u[i, j]) for i, a in enumerate(ats) for j, t in enumerate(taus)))
    curves = analytic.hopf_curves(params.a, c, ats, tr[1], opt.get("n_upper", 32))
    art.csv("hopf_curves.csv", ["family", "n", "atilde", "tau"],
            ((f, n, a, t) for (f, n), pts in curves.items() for a, t in pts))
    m = opt.get("codim2_n_upper", 3)
    pts = analytic.codim2_points(params.a, ar, params.w, tuple(tr), m, m)
    rows = []
    for p in pts:
        idx = tuple(p.indices) + (None, None)
        freq = tuple(p.frequencies) + (None, None)
        rows.append((p.kind.value, p.location[0], p.location[1], freq[0], freq[1], idx[0], idx[1]))
    art.csv("codim2.csv", ["kind", "tau", "second_parameter", "omega1", "omega2", "n", "m"],
            ([("" if v is None else v) for v in r] for r in rows))
    if opt.get("plot", True):
        table = {"tau": [], "atilde": [], "n_u": []}
        for i, a in enumerate(ats):
            for j, t in enumerate(taus):
                table["tau"].append(t)
                table["atilde"].append(a)
                table["n_u"].append(chart.n_u[i, j])
        art.svg("chart.svg", emit_plot(table, {"x": "tau", "y": ["atilde"], "kind": "scatter",
                                               "color_by": "n_u", "ylabel": "atilde"}))


def _hopf_table(params, opt, art, ctx):
    n_upper = opt.get("n_upper", 5)
    rows = []
    for hc in lyapunov.classify_all_hopf(params, n_upper):
        p, r = hc.point, hc.report
        rows.append((p.n, p.family, p.tau, p.omega, r.sign, r.criticality.value, r.branch_side.value))
    rows.sort(key=lambda r: r[2])
    art.csv("hopf_table.csv", ["n", "family", "tau", "omega", "sign_L", "criticality", "branch_side"], rows)
    table = analytic.hopf_table(params, n_upper)
    summary = {"a": params.a, "atilde": params.atilde, "w": params.w, "c": params.c}
    if table.omega is not None:
        us = analytic.unstable_set(table)
        summary.update(omega1=table.omega.omega1, omega2=table.omega.omega2,
                       n_max=us.n_max, n_max_ordinal=us.n_max_ordinal)
    art.json("hopf_summary.json", summary)


def _spectrum_sweep(params, opt, art, ctx):
    tr = opt.get("tau_range", [0.0, 30.0])
    k = opt.get("k", 4)
    taus = np.linspace(tr[0], tr[1], opt.get("points", 600))
    sw = spectrum.abscissa_sweep(params, taus, k=k, count=max(opt.get("count", 8), k))
    cols = [f"re_{i + 1}" for i in range(k)]
    art.csv("sweep.csv", ["tau"] + cols + ["n_u"],
            ((t, *sw.real_parts[i], sw.n_u[i]) for i, t in enumerate(taus)))
    if opt.get("plot", True):
        table = {"tau": taus}
        table.update({c: sw.real_parts[:, i] for i, c in enumerate(cols)})
        art.svg("sweep.svg", emit_plot(table, {"x": "tau", "y": cols, "hline": 0.0, "ylabel": "Re lambda"}))


def _initial(opt, ctx):
    from .simulate import Constant

    x0 = np.array(opt.get("initial", [0.1, 0.0]), dtype=float)
    eps = opt.get("perturbation", 0.0)
    if eps:
        x0 = x0 + eps * ctx["rng"].standard_normal(2)
    return Constant(tuple(float(v) for v in x0))


def _trajectory(params, opt, ctx):
    from .simulate import integrate

    phi = _initial(opt, ctx)
    tol = opt.get("tol", ctx["tolerances"].get("integrator", 1e-8))
    return phi, integrate(params, phi, opt.get("t_end", 200.0), tol)


def _simulate(params, opt, art, ctx):
    phi, traj = _trajectory(params, opt, ctx)
    t, x = traj.sample(opt.get("dt", 0.1))
    art.csv("trajectory.csv", ["t", "x1", "x2"], ((ti, xi[0], xi[1]) for ti, xi in zip(t, x)))
    art.json("simulation.json", {"initial_function": "constant", "initial_value": list(phi.x),
                                 "offset": traj.offset, "steps": len(traj.t) - 1})


def _poincare(params, opt, art, ctx):
    from .simulate import Section, poincare_section

    phi, traj = _trajectory(params, opt, ctx)
    inf = math.inf
    bounds = (tuple(opt.get("x1_bounds", (-inf, inf))), tuple(opt.get("x2_bounds", (-inf, inf))))
    sec = Section(tuple(opt.get("normal", (0.0, 1.0))), opt.get("offset", 0.0), opt.get("direction", -1), bounds)
    cr = poincare_section(traj, sec, t_min=opt.get("t_min", 0.0))
    art.csv("crossings.csv", ["t", "x1", "x2", "ambiguous"], ((c.t, c.x[0], c.x[1], c.ambiguous) for c in cr))
    art.json("simulation.json", {"initial_function": "constant", "initial_value": list(phi.x),
                                 "offset": traj.offset, "crossings": len(cr)})


def _settings(ctx, **kw):
    from dataclasses import replace

    from .periodic.branch import ContinuationSettings

    s = ContinuationSettings(**kw)
    tol = ctx["tolerances"]
    if "defect" in tol:
        s = replace(s, defect_tol=tol["defect"])
    if "event" in tol:
        s = replace(s, event_tol=tol["event"])
    return s


def _hopf_point(params, family, n):
    table = analytic.hopf_table(params, max(n, 0))
    if table.omega is None:
        raise ConfigError("no Hopf points for these parameters")
    for hp in table.points():
        if hp.family == family and hp.n == n:
            return hp
    raise ConfigError(f"no Hopf point ({family}, {n})")


def _write_branch(art, name, br):
    rows = []
    for p in br.points:
        lo, hi = p.orbit.extents
        mu = np.sort(np.abs(p.floquet.nontrivial))[::-1]
        rows.append((p.tau, p.period, lo, hi, ";".join(_fmt(m) for m in mu), p.floquet.stability.name.lower()))
    art.csv(f"{name}_orbits.csv", ["tau", "T", "min_x1", "max_x1", "abs_multipliers", "stability"], rows)
    ev = []
    for e in br.events:
        evid = {k: (abs(v) if isinstance(v, complex) else v) for k, v in e.evidence.items()}
        if isinstance(e.evidence.get("multiplier"), complex):
            mu = e.evidence["multiplier"]
            evid = dict(evid, multiplier_re=mu.real, multiplier_im=mu.imag)
            del evid["multiplier"]
        ev.append((e.kind.value, e.tau_at, e.period, e.bracket[0], e.bracket[1],
                   json.dumps(evid, sort_keys=True, default=_fmt)))
    art.csv(f"{name}_events.csv", ["kind", "tau", "period", "bracket_lo", "bracket_hi", "evidence"], ev)
    return rows


def _branch(params, opt, art, ctx):
    from .periodic.branch import continue_branch, hopf_seed, period_doubling_seed
    from .periodic.events import EventKind

    hp = _hopf_point(params, opt.get("family", 1), opt.get("n", 0))
    tr = opt.get("tau_range", [0.0, hp.tau + 5.0])
    s = _settings(ctx, max_steps=opt.get("max_steps", 2000))
    br = continue_branch(hopf_seed(params, hp), tr, s)
    rows = _write_branch(art, "branch", br)
    summary = {"origin": list(br.origin), "stop_reason": br.stop_reason, "points": len(br.points)}
    if opt.get("plot", True) and rows:
        art.svg("branch.svg", emit_plot({"tau": [r[0] for r in rows], "min_x1": [r[2] for r in rows],
                                         "max_x1": [r[3] for r in rows]}, {"kind": "envelope"}))
    if opt.get("switch_period_doubling", False):
        pds = [e for e in br.events if e.kind is EventKind.PERIOD_DOUBLING]
        if pds:
            br2 = continue_branch(period_doubling_seed(pds[0].orbit), tr, s)
            _write_branch(art, "doubled", br2)
            summary["doubled"] = {"from_tau": pds[0].tau_at, "stop_reason": br2.stop_reason,
                                  "points": len(br2.points)}
    art.json("branch_summary.json", summary)
    if len(br.points) < 2:
        raise NumericalFailure(f"branch did not leave the Hopf point: {br.stop_reason}")


def _cascade(params, opt, art, ctx):
    from .periodic.cascade import cascade_scan, feigenbaum_ratios, log_fit

    window = tuple(opt.get("window", [5.0, 12.22]))
    seed = None
    if "family" in opt or "n" in opt:
        seed = _hopf_point(params, opt.get("family", 1), opt.get("n", 0))
    steps = cascade_scan(params, window, opt.get("max_doublings", 6), seed=seed, settings=_settings(ctx))
    art.csv("cascade.csv", ["index", "tau_pd", "T"], ((s.index, s.tau, s.period) for s in steps))
    taus = [s.tau for s in steps]
    fit = {"doublings": len(steps)}
    tau_inf = opt.get("tau_inf", 12.21308)
    if len(taus) >= 3 and all(t < tau_inf for t in taus):
        slope, icpt, r2 = log_fit(taus, tau_inf)
        fit.update(tau_inf=tau_inf, slope=slope, intercept=icpt, r2=r2,
                   spacing_ratios=list(feigenbaum_ratios(taus)))
    art.json("cascade_fit.json", fit)


HANDLERS = {
    "stability-chart": _stability_chart,
    "hopf-table": _hopf_table,
    "spectrum-sweep": _spectrum_sweep,
    "simulate": _simulate,
    "poincare": _poincare,
    "branch": _branch,
    "cascade": _cascade,
}


def run(subcommand, doc, out=None, seed=None):
    """Execute one subcommand on a configuration mapping.

    Returns
    -------
    (int, dict or None)
        Exit status and the manifest (``None`` when nothing was written).
    """
    try:
        params, opt = load_config(doc, subcommand)
    except ConfigError as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_CONFIG, None
    out = Path(out or doc.get("output") or ".")
    try:
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise PermissionError(out)
    except OSError as exc:
        log.error("output directory not writable: %s", exc)
        return EXIT_CONFIG, None
    seed = doc.get("seed", 0) if seed is None else seed
    ctx = {"rng": np.random.default_rng(seed), "tolerances": doc.get("tolerances", {})}
    digest = hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()
    art = Artifacts(out)
    from .periodic.branch import ConvergenceError
    from .periodic.floquet import FloquetAccuracyError
    from .simulate import StepSizeError

    try:
        HANDLERS[subcommand](params, opt, art, ctx)
    except ConfigError as exc:
        log.error("invalid configuration: %s", exc)
        for name in art.files:
            (out / name).unlink(missing_ok=True)
        return EXIT_CONFIG, None
    except (NumericalFailure, ConvergenceError, FloquetAccuracyError, StepSizeError,
            ArithmeticError, np.linalg.LinAlgError, InvalidParameterError) as exc:
        log.error("numerical failure: %s", exc)
        art.json("failure.json", {"error": type(exc).__name__, "message": str(exc)})
        return EXIT_NUMERIC, art.manifest(subcommand, "failed", digest)
    return EXIT_OK, art.manifest(subcommand, "ok", digest)


def main(argv=None):
    parser = argparse.ArgumentParser(prog="delaybif", description=__doc__.splitlines()[0])
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="JSON configuration file")
    parser.add_argument("--out", help="output directory (default: config 'output' or cwd)")
    parser.add_argument("--seed", type=int, help="random seed (overrides the config)")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        log.error("seed must be an unsigned 64-bit integer")
        return EXIT_CONFIG
    try:
        doc = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        log.error("cannot read configuration: %s", exc)
        return EXIT_CONFIG
    status, _ = run(args.subcommand, doc, args.out, args.seed)
    return status


if __name__ == "__main__":
    sys.exit(main())
