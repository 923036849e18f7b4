"""Command-line front end.

    dscharge <task> [--config FILE] [--model NAME --m --a --lambda --t --psi-range]
                    [--out FILE] [--csv FILE] [--seed N]

Settings are taken from built-in defaults, then the JSON config file, then
command-line flags; later sources win.  Exit status is 0 on success, 1 for a
malformed configuration (the offending field is named as a JSON pointer) and
2 when the computation hits a domain or singularity error, in which case a
diagnostic JSON document is written instead of the report.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import chart_atlas, models
from .charges import ExtrapolationSpec, QuadratureSpec, charge_report, hyperbolic_charges
from .errors import DSChargeError, ParameterError
from .initial_data import find_horizon_spherical
from .tensor_kernel import DerivativeConfig, constraints

TASKS = ("charges", "horizon", "constraints", "chart", "verify")

# the Kerr-de Sitter slice is differentiated numerically twice over; the
# extrapolated stencil keeps its truncation error well below the tolerance
_RICHARDSON = DerivativeConfig("auto", richardson=True)


class ConfigError(Exception):
    def __init__(self, pointer, message):
        super().__init__(f"{pointer}: {message}")
        self.pointer = pointer
        self.message = message

    def to_dict(self):
        return {"error": "ConfigError", "field": self.pointer, "message": self.message}


# ---------------------------------------------------------------------------
# config validation


def _num(v, ptr, *, positive=False, nonneg=False, integer=False, minimum=None):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(ptr, "expected a number")
    if not np.isfinite(v):
        raise ConfigError(ptr, "expected a finite number")
    if integer and int(v) != v:
        raise ConfigError(ptr, "expected an integer")
    if positive and not v > 0:
        raise ConfigError(ptr, "must be positive")
    if nonneg and v < 0:
        raise ConfigError(ptr, "must be non-negative")
    if minimum is not None and v < minimum:
        raise ConfigError(ptr, f"must be at least {minimum}")
    return int(v) if integer else float(v)


def _choice(v, ptr, allowed):
    if v not in allowed:
        raise ConfigError(ptr, f"expected one of {list(allowed)}")
    return v


def _pair(v, ptr):
    if not isinstance(v, list) or len(v) != 2:
        raise ConfigError(ptr, "expected a list of two numbers")
    lo, hi = (_num(x, f"{ptr}/{k}") for k, x in enumerate(v))
    if not 0 < lo < hi:
        raise ConfigError(ptr, "expected 0 < lo < hi")
    return [lo, hi]


def _section(cfg, key, fields):
    sec = cfg.get(key, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"/{key}", "expected an object")
    out = {}
    for k, v in sec.items():
        if k not in fields:
            raise ConfigError(f"/{key}/{k}", "unknown field")
        out[k] = fields[k](v, f"/{key}/{k}")
    return out


_MODEL_FIELDS = {
    "model": lambda v, p: _choice(v, p, models.MODEL_NAMES),
    "m": lambda v, p: _num(v, p, nonneg=True),
    "a": lambda v, p: _num(v, p),
    "lambda": lambda v, p: _num(v, p, positive=True),
    "t": lambda v, p: _num(v, p),
    "psi_range": lambda v, p: _choice(v, p, ("standard", "shifted")),
    "slicing": lambda v, p: _choice(v, p, ("planar", "hyperbolic")),
}
_QUAD_FIELDS = {
    "n_theta": lambda v, p: _num(v, p, integer=True, minimum=8),
    "n_psi": lambda v, p: _num(v, p, integer=True, minimum=16),
}
_EXTRAP_FIELDS = {
    "count": lambda v, p: _num(v, p, integer=True, minimum=3),
    "r0_factor": lambda v, p: _num(v, p, positive=True),
    "ratio": lambda v, p: _num(v, p, minimum=1.0000001),
    "R0_factor": lambda v, p: _num(v, p, positive=True),
    "dR_factor": lambda v, p: _num(v, p, positive=True),
    "s": lambda v, p: None if v is None else _num(v, p, positive=True),
}
_HORIZON_FIELDS = {
    "sign": lambda v, p: _choice(v, p, ("future", "past")),
    "bracket": _pair,
}
_CONSTRAINT_FIELDS = {
    "n_points": lambda v, p: _num(v, p, integer=True, minimum=1),
    "r_range": _pair,
}


def _coords(v, p):
    if not isinstance(v, list) or len(v) != 4:
        raise ConfigError(p, "expected a list of four numbers")
    return [_num(x, f"{p}/{k}") for k, x in enumerate(v)]


_CHART_FIELDS = {
    "from": lambda v, p: _choice(v, p, [c.value for c in chart_atlas.ChartId]),
    "to": lambda v, p: _choice(v, p, [c.value for c in chart_atlas.ChartId] + ["static"]),
    "coords": _coords,
}
_VERIFY_FIELDS = {
    "lambda_mismatch": lambda v, p: _num(v, p),
}
_TOP = {"task", "model", "quadrature", "extrapolation", "out", "csv", "seed",
        "horizon", "constraints", "chart", "verify"}


def validate_config(cfg):
    """Normalized copy of a config document; raises :class:`ConfigError`."""
    if not isinstance(cfg, dict):
        raise ConfigError("/", "expected a JSON object")
    for k in cfg:
        if k not in _TOP:
            raise ConfigError(f"/{k}", "unknown field")
    out = {
        "model": _section(cfg, "model", _MODEL_FIELDS),
        "quadrature": _section(cfg, "quadrature", _QUAD_FIELDS),
        "extrapolation": _section(cfg, "extrapolation", _EXTRAP_FIELDS),
        "horizon": _section(cfg, "horizon", _HORIZON_FIELDS),
        "constraints": _section(cfg, "constraints", _CONSTRAINT_FIELDS),
        "chart": _section(cfg, "chart", _CHART_FIELDS),
        "verify": _section(cfg, "verify", _VERIFY_FIELDS),
    }
    if "task" in cfg:
        out["task"] = _choice(cfg["task"], "/task", TASKS)
    for k in ("out", "csv"):
        if k in cfg:
            if not isinstance(cfg[k], str) or not cfg[k]:
                raise ConfigError(f"/{k}", "expected a path string")
            out[k] = cfg[k]
    out["seed"] = _num(cfg["seed"], "/seed", integer=True, nonneg=True) if "seed" in cfg else 0
    return out


def build_parser():
    p = argparse.ArgumentParser(prog="dscharge", description="Charges and checks for asymptotically de Sitter initial data.")
    p.add_argument("task", choices=TASKS)
    p.add_argument("--config", help="JSON job file; flags override its fields")
    p.add_argument("--model", choices=models.MODEL_NAMES)
    p.add_argument("--m", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--t", type=float)
    p.add_argument("--psi-range", choices=("standard", "shifted"))
    p.add_argument("--slicing", choices=("planar", "hyperbolic"))
    p.add_argument("--n-theta", type=int)
    p.add_argument("--n-psi", type=int)
    p.add_argument("--out", help="report path (default stdout)")
    p.add_argument("--csv", help="CSV of per-radius raw charges")
    p.add_argument("--seed", type=int)
    g = p.add_argument_group("horizon")
    g.add_argument("--sign", choices=("future", "past"))
    g.add_argument("--bracket", type=float, nargs=2, metavar=("LO", "HI"))
    g = p.add_argument_group("constraints")
    g.add_argument("--n-points", type=int)
    g = p.add_argument_group("chart")
    g.add_argument("--from", dest="src", choices=[c.value for c in chart_atlas.ChartId])
    g.add_argument("--to", dest="dst", choices=[c.value for c in chart_atlas.ChartId] + ["static"])
    g.add_argument("--coords", type=float, nargs=4)
    g.add_argument("--r", type=float, help="radial coordinate (with --t and optional --theta, --psi)")
    g.add_argument("--theta", type=float)
    g.add_argument("--psi", type=float)
    g = p.add_argument_group("verify")
    g.add_argument("--lambda-mismatch", type=float, help="offset added to Lambda in the constraint checks")
    return p


def merge(args, file_cfg):
    """Flags over file over defaults, validated as one document."""
    cfg = json.loads(json.dumps(file_cfg))
    cfg["task"] = args.task

    def put(section, key, value):
        if value is not None:
            cfg.setdefault(section, {})
            if not isinstance(cfg[section], dict):
                raise ConfigError(f"/{section}", "expected an object")
            cfg[section][key] = value

    for key, val in (("model", args.model), ("m", args.m), ("a", args.a), ("lambda", args.lam),
                     ("t", args.t), ("psi_range", args.psi_range), ("slicing", args.slicing)):
        put("model", key, val)
    put("quadrature", "n_theta", args.n_theta)
    put("quadrature", "n_psi", args.n_psi)
    put("horizon", "sign", args.sign)
    put("horizon", "bracket", None if args.bracket is None else list(args.bracket))
    put("constraints", "n_points", args.n_points)
    put("chart", "from", args.src)
    put("chart", "to", args.dst)
    put("verify", "lambda_mismatch", args.lambda_mismatch)
    if args.coords is not None:
        put("chart", "coords", list(args.coords))
    elif args.r is not None:
        put("chart", "polar", [args.t or 0.0, args.r, args.theta if args.theta is not None else np.pi / 2,
                               args.psi or 0.0])
    for key in ("out", "csv", "seed"):
        if getattr(args, key) is not None:
            cfg[key] = getattr(args, key)
    polar = cfg.get("chart", {}).pop("polar", None)
    out = validate_config(cfg)
    if polar is not None:
        out["chart"]["polar"] = polar
    return out


# ---------------------------------------------------------------------------
# tasks


def _descriptor(cfg):
    d = {"model": "mcvittie", "m": 1.0, "a": 0.5, "lambda": 10.0, "t": 0.0,
         "psi_range": "standard", "slicing": "planar"}
    d.update(cfg["model"])
    if d["model"] != "kerr-ds":
        d.pop("a")
        d.pop("psi_range")
    if d["model"] != "de-sitter":
        d.pop("slicing")
    if d["model"] == "de-sitter":
        d.pop("m")
    return d


def _quadrature(cfg):
    return QuadratureSpec(**cfg["quadrature"])


def _extrapolation(cfg):
    return ExtrapolationSpec(**cfg["extrapolation"])


def task_charges(cfg):
    d = models.build(_descriptor(cfg))
    rep = charge_report(d, _quadrature(cfg), _extrapolation(cfg))
    return rep.to_dict(), rep.to_csv()


def task_horizon(cfg):
    desc = _descriptor(cfg)
    if desc["model"] == "kerr-ds":
        raise ParameterError("the spherical horizon finder needs spherically symmetric data", field="/model/model")
    d = models.build(desc)
    sign = cfg["horizon"].get("sign", "future")
    bracket = cfg["horizon"].get("bracket")
    expected = None
    if desc["model"] == "mcvittie":
        p = models.McVittieParams(desc["m"], desc["lambda"], desc["t"])
        expected = p.horizon_radius
        if bracket is None:
            bracket = [0.6 * expected, 1.6 * expected] if expected > 0 else [0.1, 1.0]
    if bracket is None:
        bracket = [0.1 * desc["lambda"], desc["lambda"]]
    res = find_horizon_spherical(d, sign, tuple(bracket))
    return {
        "task": "horizon",
        "model": desc,
        "sign": sign,
        "bracket": bracket,
        "radius": res.radius,
        "residual": res.residual,
        "tolerance": 1e-10,
        "iterations": res.iterations,
        "expected": expected,
    }, None


def _sample_points(desc, rng, n, r_range):
    lam = desc["lambda"]
    hyper = desc.get("slicing") == "hyperbolic"
    if r_range is None:
        if desc["model"] == "mcvittie":
            rh = models.McVittieParams(desc["m"], lam, desc["t"]).horizon_radius
            r_range = [max(1.5 * rh, 1e-3), 20.0]
        elif desc["model"] == "kerr-ds":
            A = np.exp(desc["t"] / lam)
            r_range = [2 * lam / A, 15 * lam / A]
        else:
            r_range = [0.5 * lam, 5 * lam]
    lo, hi = r_range
    r = lo + (hi - lo) * rng.random(n)
    u = rng.uniform(-0.95, 0.95, n)
    psi = rng.uniform(0, 2 * np.pi, n)
    if hyper:
        return np.stack([r, np.arccos(u), psi], axis=-1), r_range
    s = np.sqrt(1 - u**2)
    return r[:, None] * np.stack([s * np.cos(psi), s * np.sin(psi), u], axis=-1), r_range


def _derivatives(desc):
    return _RICHARDSON if desc["model"] == "kerr-ds" else DerivativeConfig()


def task_constraints(cfg):
    desc = _descriptor(cfg)
    d = models.build(desc)
    rng = np.random.default_rng(cfg["seed"])
    n = cfg["constraints"].get("n_points", 50)
    x, r_range = _sample_points(desc, rng, n, cfg["constraints"].get("r_range"))
    c = constraints(d.g, d.K, d.Lambda, x, _derivatives(desc))
    return {
        "task": "constraints",
        "model": desc,
        "seed": cfg["seed"],
        "n_points": n,
        "r_range": r_range,
        "max_abs_T00": float(np.max(np.abs(c.T00))),
        "max_abs_T0i": float(np.max(c.T0i_norm)),
        "min_dec_margin": float(np.min(c.dec_margin)),
        "tolerance": 1e-8,
    }, None


def task_chart(cfg):
    ch = cfg["chart"]
    lam = cfg["model"].get("lambda", 10.0)
    src = chart_atlas.ChartId.parse(ch.get("from", "planar-upper"))
    dst = ch.get("to", "static")
    if "coords" in ch:
        coords = np.array(ch["coords"], float)
    elif "polar" in ch:
        t, r, th, ps = ch["polar"]
        if src in (chart_atlas.ChartId.PLANAR_UPPER, chart_atlas.ChartId.PLANAR_LOWER):
            coords = np.array([t, r * np.sin(th) * np.cos(ps), r * np.sin(th) * np.sin(ps), r * np.cos(th)])
        else:
            coords = np.array([t, r, th, ps])
    else:
        raise ConfigError("/chart/coords", "coordinates required (--coords or --t/--r)")
    out = {"task": "chart", "from": src.value, "lambda": lam, "input": coords}
    if dst == "static" and src is chart_atlas.ChartId.PLANAR_UPPER:
        r = float(np.linalg.norm(coords[1:]))
        tbar, rbar, branch = chart_atlas.planar_to_static(coords[0], r, lam)
        th = float(np.arccos(coords[3] / r)) if r > 0 else 0.0
        ps = float(np.arctan2(coords[2], coords[1]))
        dst = chart_atlas.ChartId.STATIC_INNER if branch == "inner" else chart_atlas.ChartId.STATIC_OUTER
        out.update({"to": dst.value, "tbar": tbar, "rbar": rbar, "branch": branch, "coords": [tbar, rbar, th, ps]})
        X = chart_atlas.embed_coords(dst, np.array([tbar, rbar, th, ps]), lam)
    else:
        if dst == "static":
            raise ConfigError("/chart/to", "'static' shorthand is defined from planar-upper; name the static chart")
        dst = chart_atlas.ChartId.parse(dst)
        X = chart_atlas.embed_coords(src, coords, lam)
        c = chart_atlas.chart_coords(dst, X, lam)
        out.update({"to": dst.value, "coords": c})
    X0 = chart_atlas.embed_coords(src, coords, lam)
    out["ambient"] = X0
    out["hyperboloid_residual"] = float(chart_atlas.hyperboloid_residual(X0, lam))
    out["roundtrip_error"] = float(np.max(np.abs(X - X0)))
    out["tolerance"] = 1e-10 * max(lam, 1.0) ** 2
    return out, None


# ---------------------------------------------------------------------------
# verification suite


def _check(name, value, tol, passed, **extra):
    row = {"name": name, "value": value, "tolerance": tol, "passed": bool(passed)}
    row.update(extra)
    return row


def verify_suite(cfg):
    """Embeddings, vacuum constraints, charges, horizons, asymptotic slopes
    and inequality margins on the built-in models."""
    rng = np.random.default_rng(cfg["seed"])
    q = _quadrature(cfg)
    e = _extrapolation(cfg)
    dL = cfg["verify"].get("lambda_mismatch", 0.0)
    lam = cfg["model"].get("lambda", 10.0)
    warnings = []
    relax = 1.0
    if q.n_theta < 32:
        relax = 100.0
        warnings.append(f"n_theta={q.n_theta} is coarse: quadrature-dependent tolerances relaxed x{relax:g}")
    rows = []

    # charts
    worst_res, worst_rt = 0.0, 0.0
    for chart in chart_atlas.ChartId:
        c = _random_chart_coords(chart, lam, rng, 1000)
        X = chart_atlas.embed_coords(chart, c, lam)
        worst_res = max(worst_res, float(np.max(np.abs(chart_atlas.hyperboloid_residual(X, lam)))))
        X2 = chart_atlas.embed_coords(chart, chart_atlas.chart_coords(chart, X, lam), lam)
        worst_rt = max(worst_rt, float(np.max(np.abs(X2 - X))))
    rows.append(_check("embedding residual / lambda^2", worst_res / lam**2, 1e-12, worst_res / lam**2 < 1e-12))
    rows.append(_check("chart roundtrip", worst_rt, 1e-10, worst_rt < 1e-10))

    # constraints, with an optional deliberate error in Lambda
    cases = [
        ("de Sitter planar", models.de_sitter_planar(lam), {"model": "de-sitter", "lambda": lam, "t": 0.0}),
        ("McVittie", models.mcvittie_slice(models.McVittieParams(1.0, lam, 0.0)),
         {"model": "mcvittie", "m": 1.0, "lambda": lam, "t": 0.0}),
        ("Kerr-de Sitter", models.kerr_planar_slice(models.KerrDSParams(1.0, 0.5, lam)),
         {"model": "kerr-ds", "lambda": lam, "t": 0.0}),
    ]
    for name, d, desc in cases:
        x, _ = _sample_points(desc, rng, 50, None)
        c = constraints(d.g, d.K, d.Lambda + dL, x, _derivatives(desc))
        t00 = float(np.max(np.abs(c.T00)))
        t0i = float(np.max(c.T0i_norm))
        rows.append(_check(f"constraints {name}: max|T00|", t00, 1e-8, t00 < 1e-8, lambda_offset=dL))
        rows.append(_check(f"constraints {name}: max|T0i|", t0i, 1e-8, t0i < 1e-8))

    # charges
    mc = charge_report(cases[1][1], q, e)
    E = mc.charges["E"]
    rows.append(_check("McVittie E", E, 1e-6 * relax, abs(E - 1) < 1e-6 * relax, expected=1.0))
    pj = float(max(np.linalg.norm(mc.charges["P"]), np.linalg.norm(mc.charges["J"])))
    rows.append(_check("McVittie |P|, |J|", pj, 1e-8, pj < 1e-8))
    rows.append(_check("McVittie margin E - |P|", mc.inequalities["energy"], 1e-6 * relax,
                       abs(mc.inequalities["energy"] - 1) < 1e-6 * relax, expected=1.0))
    ds = charge_report(cases[0][1], q, e)
    worst = float(max(abs(v) for v in ds.inequalities.values()))
    rows.append(_check("de Sitter margins", worst, 1e-8, worst < 1e-8, expected=0.0))
    hd = models.de_sitter_hyperbolic(lam, 5.0)
    EH = hyperbolic_charges(hd, q, e).values
    rows.append(_check("hyperbolic de Sitter |E^H|", float(np.max(np.abs(EH))), 1e-8, np.max(np.abs(EH)) < 1e-8))
    for rng_name, target in (("standard", 0.5 / 1.0025**2), ("shifted", 0.5 / 1.0025)):
        kd = models.kerr_planar_slice(models.KerrDSParams(1.0, 0.5, lam, 0.0, rng_name))
        rep = charge_report(kd, q, e)
        J3 = float(rep.charges["J"][2])
        exp = target if lam == 10.0 else 0.5 / (1 + 0.25 / lam**2) ** (2 if rng_name == "standard" else 1)
        rows.append(_check(f"Kerr-de Sitter J3 ({rng_name})", J3, 5e-3 * abs(exp),
                           abs(J3 - exp) <= 5e-3 * abs(exp), expected=exp,
                           magnitude_relative_error=abs(abs(J3) / exp - 1)))

    # horizon
    for m, t in ((1.0, 0.0), (2.0, lam * np.log(2))):
        p = models.McVittieParams(m, lam, t)
        r = find_horizon_spherical(models.mcvittie_slice(p), "future",
                                   (0.6 * p.horizon_radius, 1.6 * p.horizon_radius)).radius
        err = abs(r / p.horizon_radius - 1)
        rows.append(_check(f"McVittie horizon m={m:g}", r, 1e-9, err < 1e-9, expected=p.horizon_radius))

    # asymptotic slopes of the Kerr-de Sitter planar slice
    for key, s in sorted(models.asymptotic_slopes(models.KerrDSParams(1.0, 0.5, lam)).items()):
        rows.append(_check(f"asymptotic slope {key}", s["slope"], s["power"] + 0.9, s["ok"],
                           leading_power=s["power"], ratio_to_reference=s["ratio"][-1]))

    passed = all(r["passed"] for r in rows)
    return {"task": "verify", "passed": passed, "checks": rows, "warnings": warnings,
            "seed": cfg["seed"], "n_theta": q.n_theta, "n_psi": q.n_psi}, None


def _random_chart_coords(chart, lam, rng, n):
    """Regular points with ambient coordinates of order lambda."""
    C = chart_atlas.ChartId
    th = np.arccos(rng.uniform(-0.99, 0.99, n))
    ps = rng.uniform(1e-3, 2 * np.pi - 1e-3, n)
    if chart is C.GLOBAL:
        return np.stack([rng.uniform(-2, 2, n) * lam, rng.uniform(0.01, np.pi - 0.01, n), th, ps], -1)
    if chart in (C.PLANAR_UPPER, C.PLANAR_LOWER):
        return np.stack([rng.uniform(-1, 1, n) * lam, *(rng.uniform(-1, 1, (3, n)) * lam)], -1)
    if chart is C.STATIC_INNER:
        return np.stack([rng.uniform(-2, 2, n) * lam, rng.uniform(0.01, 0.99, n) * lam, th, ps], -1)
    if chart is C.STATIC_OUTER:
        return np.stack([rng.uniform(-2, 2, n) * lam, rng.uniform(1.01, 3, n) * lam, th, ps], -1)
    return np.stack([rng.uniform(0.05, 2, n) * lam, rng.uniform(0.01, 2, n) * lam, th, ps], -1)


def task_verify(cfg):
    return verify_suite(cfg)


HANDLERS = {
    "charges": task_charges,
    "horizon": task_horizon,
    "constraints": task_constraints,
    "chart": task_chart,
    "verify": task_verify,
}


# ---------------------------------------------------------------------------
# entry point


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if np.isfinite(v) else repr(v)
    return v


def dumps(doc):
    return json.dumps(_plain(doc), sort_keys=True, indent=2) + "\n"


def _emit(text, path, stream):
    if path:
        Path(path).write_text(text)
    else:
        stream.write(text)


def run(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    file_cfg, cfg = {}, {}
    try:
        if args.config:
            try:
                file_cfg = json.loads(Path(args.config).read_text())
            except OSError as exc:
                raise ConfigError("/", f"cannot read config: {exc}") from None
            except json.JSONDecodeError as exc:
                raise ConfigError("/", f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        cfg = merge(args, file_cfg)
        report, csv_text = HANDLERS[cfg["task"]](cfg)
    except ConfigError as exc:
        stderr.write(dumps(exc.to_dict()))
        return 1
    except ParameterError as exc:
        diag = exc.to_dict()
        field = diag.get("field")
        if field is not None and not str(field).startswith("/"):
            section = "quadrature" if field in _QUAD_FIELDS else "extrapolation" if field in _EXTRAP_FIELDS else "model"
            diag["field"] = f"/{section}/{field}"
        stderr.write(dumps(diag))
        return 1
    except DSChargeError as exc:
        _emit(dumps(exc.to_dict()), cfg.get("out"), stdout)
        return 2
    _emit(dumps(report), cfg.get("out"), stdout)
    if cfg.get("csv") and csv_text is not None:
        Path(cfg["csv"]).write_text(csv_text)
    if cfg["task"] == "verify" and not report["passed"]:
        return 3
    return 0


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
