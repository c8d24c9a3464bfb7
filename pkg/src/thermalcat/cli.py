"""Command-line front end: figure and table data as deterministic CSV/JSON.

Each plot of the study maps to one subcommand invocation (the README holds
the full table). Outputs are byte-identical across reruns with the same
parameters, including the seed for the Monte Carlo subcommands.

Exit codes: 0 success, 2 invalid parameters, 3 numerical failure. Errors
are reported as a JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from . import bell_chsh as bc
from . import bell_measurement as bm
from . import fock_oracle as fo
from . import kernel_core as kc
from . import state_factory as sf
from . import teleportation as tp

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

_ORACLE_WIGNER_TOL = 1e-6
_ORACLE_PROB_TOL = 1e-5
_ORACLE_PARITY_TOL = 1e-8


class CliError(Exception):
    """Carries the exit code and a machine-readable payload."""

    def __init__(self, code: int, message: str, **details):
        super().__init__(message)
        self.code = code
        self.message = message
        self.details = details


class _Parser(argparse.ArgumentParser):
    # argparse wants to sys.exit(2); route through the common error path
    def error(self, message):
        raise CliError(EXIT_USAGE, message)


# ---------------------------------------------------------------------------
# argument parsing helpers

_PI_FORM = re.compile(
    r"^([+-]?)(\d+(?:\.\d*)?|\.\d+)?pi(?:/(\d+(?:\.\d*)?|\.\d+))?$")


def parse_angle(text: str) -> float:
    """Radians from a decimal or a symbolic pi fraction.

    Accepted forms: "1.57", "pi", "-pi/2", "3pi/4", "0.5pi", "pi/1000".
    Symbolic input avoids decimal drift in the tiny-angle regimes.
    """
    s = text.strip().lower().replace(" ", "").replace("*", "")
    m = _PI_FORM.match(s)
    if m:
        sign = -1.0 if m.group(1) == "-" else 1.0
        num = float(m.group(2)) if m.group(2) else 1.0
        den = float(m.group(3)) if m.group(3) else 1.0
        if den == 0.0:
            raise CliError(EXIT_USAGE, "zero denominator in angle %r" % text)
        return sign * num * math.pi / den
    try:
        return float(s)
    except ValueError:
        raise CliError(
            EXIT_USAGE,
            "cannot parse angle %r (use radians or pi fractions like pi/1000)"
            % text) from None


def parse_complex(text: str) -> complex:
    s = text.strip().replace(" ", "")
    for candidate in (s, s.replace("i", "j")):
        try:
            return complex(candidate)
        except ValueError:
            continue
    raise CliError(EXIT_USAGE, "cannot parse complex number %r" % text)


def parse_span(text: str, parse=float):
    """A "lo..hi" range or a single value; returns (lo, hi)."""
    s = text.strip()
    if ".." in s:
        a, b = s.split("..", 1)
        return parse(a), parse(b)
    v = parse(s)
    return v, v


def span_values(lo: float, hi: float, points: Optional[int]) -> np.ndarray:
    if points is None:
        if lo != hi:
            raise CliError(EXIT_USAGE,
                           "--points is required for a nondegenerate range")
        points = 1
    if points < 1:
        raise CliError(EXIT_USAGE, "--points must be >= 1")
    if points == 1:
        if lo != hi:
            raise CliError(EXIT_USAGE,
                           "a single sweep point needs identical endpoints")
        return np.array([float(lo)])
    return np.linspace(float(lo), float(hi), points)


def require(cond: bool, message: str) -> None:
    if not cond:
        raise CliError(EXIT_USAGE, message)


def resolve_seed(ns, required: bool = False) -> Optional[int]:
    if getattr(ns, "seed", None) is not None:
        return ns.seed
    env = os.environ.get("THERMALCAT_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise CliError(EXIT_USAGE,
                           "THERMALCAT_SEED must be an integer") from None
    if required:
        raise CliError(EXIT_USAGE,
                       "this subcommand is stochastic; pass --seed or set "
                       "THERMALCAT_SEED")
    return None


# ---------------------------------------------------------------------------
# output formatting

def fmt(x) -> str:
    """%.12g with a canonical zero (never "-0")."""
    v = float(x)
    return "0" if v == 0.0 else "%.12g" % v


def jf(x):
    """JSON-safe float rounded through the CSV format; NaN/inf become null."""
    v = float(x)
    if math.isnan(v) or math.isinf(v):
        return None
    return float(fmt(v))


def jc(z) -> list:
    z = complex(z)
    return [jf(z.real), jf(z.imag)]


def _field(c) -> str:
    if isinstance(c, str):
        if any(ch in c for ch in ',"\n'):
            return '"' + c.replace('"', '""') + '"'
        return c
    if isinstance(c, (bool, np.bool_)):
        return "true" if c else "false"
    if isinstance(c, (int, np.integer)):
        return str(int(c))
    return fmt(c)


def echo_params(params: dict) -> dict:
    out = {}
    for k, v in params.items():
        if isinstance(v, bool):
            out[k] = "true" if v else "false"
        elif isinstance(v, float):
            out[k] = fmt(v)
        elif isinstance(v, complex):
            im = v.imag
            out[k] = fmt(v.real) + ("+" if im >= 0 else "-") + fmt(abs(im)) + "j"
        else:
            out[k] = str(v)
    return out


def _json_params(params: dict) -> dict:
    out = {}
    for k, v in params.items():
        if isinstance(v, bool) or v is None:
            out[k] = v
        elif isinstance(v, (int, np.integer)):
            out[k] = int(v)
        elif isinstance(v, float):
            out[k] = jf(v)
        elif isinstance(v, complex):
            out[k] = jc(v)
        else:
            out[k] = str(v)
    return out


def csv_text(subcommand: str, params: dict, header: Sequence[str],
             rows) -> str:
    """Comment preamble, header row, data rows; LF endings throughout."""
    echoed = echo_params(params)
    lines = ["# thermalcat " + __version__,
             "# " + subcommand + " " + " ".join(
                 "%s=%s" % (k, v) for k, v in echoed.items())]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_field(c) for c in row))
    return "\n".join(lines) + "\n"


def json_envelope(subcommand: str, params: dict) -> dict:
    return {"artifact": "thermalcat", "version": __version__,
            "subcommand": subcommand, "params": _json_params(params)}


def json_text(payload: dict) -> str:
    return json.dumps(payload, indent=2) + "\n"


def write_output(text: str, path: Optional[str]) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _emit_error(err: CliError) -> None:
    payload = {"error": {"code": err.code, "message": err.message}}
    if err.details:
        payload["error"]["details"] = err.details
    sys.stderr.write(json.dumps(payload) + "\n")


# ---------------------------------------------------------------------------
# evaluation grids

def fringe_geometry(d: float, phi: float):
    """Center and transverse period of the interference patch between the
    displaced branch and its rotated image."""
    tip = complex(d) * complex(math.cos(phi), math.sin(phi))
    mid = (complex(d) + tip) / 2.0
    snap = 1e-12 * (1.0 + abs(d))
    mid = complex(0.0 if abs(mid.real) < snap else mid.real,
                  0.0 if abs(mid.imag) < snap else mid.imag)
    sep = abs(complex(d) - tip)
    period = math.sqrt(2.0) * math.pi / sep if sep > 0 else math.inf
    return mid, period


def grid_axes(V: float, d: float, phi: Optional[float], frame: str,
              points: int):
    """Square phase-space window. The full frame spans +-(|d| + 5 sqrt(V));
    the fringe frame recenters on the interference patch, and "auto" picks
    it whenever the full frame would under-resolve the fringe period."""
    full_half = abs(d) + 5.0 * math.sqrt(V)
    used = "full"
    if phi is not None and frame != "full":
        mid, period = fringe_geometry(d, phi)
        if frame == "fringe":
            used = "fringe"
        else:
            step = 2.0 * full_half / (points - 1)
            used = "fringe" if step > period / 2.0 else "full"
        if used == "fringe":
            half = min(5.0 * math.sqrt(V), 10.0 * period)
            xs = mid.real + np.linspace(-half, half, points)
            ps = mid.imag + np.linspace(-half, half, points)
            return xs, ps, used
    xs = np.linspace(-full_half, full_half, points)
    return xs, xs.copy(), used


def _wigner_grid_values(state, xs: np.ndarray, ps: np.ndarray) -> np.ndarray:
    ev = kc.wigner_evaluator(state)
    W = np.empty((xs.size, ps.size))
    for i, x in enumerate(xs):
        W[i] = ev((x + 1j * ps)[:, None])
    return W


def _superposition(V: float, d: float, phi: float, sign: int):
    try:
        return sf.thermal_superposition(V, d, phi, sign)
    except ValueError as err:
        raise CliError(EXIT_USAGE, str(err)) from None


# ---------------------------------------------------------------------------
# subcommand handlers

def run_wigner_grid(ns):
    require(ns.V >= 1.0, "--V must be >= 1")
    require(ns.points >= 2, "--points must be >= 2")
    if ns.phi is None:
        state = sf.displaced_thermal(ns.V, ns.d)
    else:
        state = _superposition(ns.V, ns.d, ns.phi, ns.sign)
    xs, ps, frame = grid_axes(ns.V, ns.d, ns.phi, ns.frame, ns.points)
    W = _wigner_grid_values(state, xs, ps)
    params = {"V": ns.V, "d": ns.d,
              "phi": "none" if ns.phi is None else fmt(ns.phi),
              "sign": ns.sign, "points": ns.points, "frame": frame}
    if ns.format == "json":
        env = json_envelope("wigner-grid", params)
        env["x"] = [jf(v) for v in xs]
        env["p"] = [jf(v) for v in ps]
        env["W"] = [[jf(w) for w in row] for row in W]
        return json_text(env), EXIT_OK
    rows = ((x, p, W[i, j])
            for i, x in enumerate(xs) for j, p in enumerate(ps))
    return csv_text("wigner-grid", params, ("x", "p", "W"), rows), EXIT_OK


def run_marginal(ns):
    require(ns.V >= 1.0, "--V must be >= 1")
    require(ns.points >= 2, "--points must be >= 2")
    if ns.phi is None:
        state = sf.displaced_thermal(ns.V, ns.d)
        angle = 0.0 if ns.angle is None else ns.angle
    else:
        state = _superposition(ns.V, ns.d, ns.phi, ns.sign)
        angle = ns.phi / 2.0 if ns.angle is None else ns.angle
    mix = kc.marginal_distribution(state, 0, angle)
    if ns.xmin is None or ns.xmax is None:
        mu, sd = mix.mean(), math.sqrt(mix.variance())
        lo = mu - 6.0 * sd if ns.xmin is None else ns.xmin
        hi = mu + 6.0 * sd if ns.xmax is None else ns.xmax
    else:
        lo, hi = ns.xmin, ns.xmax
    require(hi > lo, "--xmax must exceed --xmin")
    xs = np.linspace(lo, hi, ns.points)
    dens = mix(xs)
    params = {"V": ns.V, "d": ns.d,
              "phi": "none" if ns.phi is None else fmt(ns.phi),
              "sign": ns.sign, "angle": angle, "points": ns.points}
    if ns.format == "json":
        env = json_envelope("marginal", params)
        env["mean"] = jf(mix.mean())
        env["variance"] = jf(mix.variance())
        env["x"] = [jf(v) for v in xs]
        env["density"] = [jf(v) for v in dens]
        return json_text(env), EXIT_OK
    rows = zip(xs, dens)
    return csv_text("marginal", params, ("x", "density"), rows), EXIT_OK


def run_visibility(ns):
    require(ns.V >= 1.0, "--V must be >= 1")
    state = _superposition(ns.V, ns.d, ns.phi, ns.sign)
    axis = ns.phi / 2.0 if ns.axis is None else ns.axis
    fm = kc.fringe_metrics(state, axis)
    params = {"V": ns.V, "d": ns.d, "phi": ns.phi, "sign": ns.sign,
              "axis": axis}
    if ns.format == "json":
        env = json_envelope("visibility", params)
        env["has_fringes"] = bool(fm.has_fringes)
        env["v"] = jf(fm.visibility)
        env["spacing"] = jf(fm.spacing)
        env["n_maxima"] = int(fm.n_maxima)
        return json_text(env), EXIT_OK
    rows = [(ns.V, ns.d, ns.phi, ns.sign, axis, fm.visibility, fm.spacing,
             fm.n_maxima)]
    header = ("V", "d", "phi", "sign", "axis", "v", "spacing", "n_maxima")
    return csv_text("visibility", params, header, rows), EXIT_OK


def run_negativity(ns):
    require(ns.V >= 1.0, "--V must be >= 1")
    amp = 1.0 / math.sqrt(2.0)
    hybrid = sf.micro_macro_entangle((amp, amp),
                                     sf.displaced_thermal(ns.V, ns.d),
                                     0, sf.KerrConfig(math.pi))
    region, pts = sf.negativity_search(ns.V, ns.d)
    res = kc.min_wigner(hybrid.wigner_evaluator(), region, grid_points=pts)
    floor = sf.negativity_floor(ns.V, ns.d)
    params = {"V": ns.V, "d": ns.d}
    if ns.format == "csv":
        header = ("V", "d", "min_wigner", "loc0_re", "loc0_im",
                  "loc1_re", "loc1_im", "floor")
        z0, z1 = complex(res.point[0]), complex(res.point[1])
        rows = [(ns.V, ns.d, res.value, z0.real, z0.imag, z1.real, z1.imag,
                 floor)]
        return csv_text("negativity", params, header, rows), EXIT_OK
    env = json_envelope("negativity", params)
    env["min_wigner"] = jf(res.value)
    env["location"] = [jc(z) for z in res.point]
    env["floor"] = jf(floor)
    env["floor_gap"] = jf(res.value - floor)
    return json_text(env), EXIT_OK


def run_kerr_movie(ns):
    require(ns.V >= 1.0, "--V must be >= 1")
    require(ns.points >= 2, "--points must be >= 2")
    require(ns.frames >= 1, "--frames must be >= 1")
    lo, hi = parse_span(ns.thetas, parse_angle)
    thetas = span_values(lo, hi, ns.frames)
    try:
        states = sf.kerr_time_series(ns.V, ns.d, [float(t) for t in thetas],
                                     ns.sign)
    except ValueError as err:
        raise CliError(EXIT_USAGE, str(err)) from None
    half = abs(ns.d) + 5.0 * math.sqrt(ns.V)
    xs = np.linspace(-half, half, ns.points)
    ps = xs.copy()
    params = {"V": ns.V, "d": ns.d, "sign": ns.sign,
              "thetas": ns.thetas, "frames": ns.frames, "points": ns.points}
    if ns.format == "json":
        env = json_envelope("kerr-movie", params)
        env["thetas"] = [jf(t) for t in thetas]
        env["x"] = [jf(v) for v in xs]
        env["p"] = [jf(v) for v in ps]
        env["W"] = [[[jf(w) for w in row]
                     for row in _wigner_grid_values(st, xs, ps)]
                    for st in states]
        return json_text(env), EXIT_OK

    def rows():
        for theta, st in zip(thetas, states):
            W = _wigner_grid_values(st, xs, ps)
            for i, x in enumerate(xs):
                for j, p in enumerate(ps):
                    yield theta, x, p, W[i, j]

    header = ("theta", "x", "p", "W")
    return csv_text("kerr-movie", params, header, rows()), EXIT_OK


_FAMILY_ALIASES = {
    "two-mode": "two_mode_thermal",
    "two_mode": "two_mode_thermal",
    "two_mode_thermal": "two_mode_thermal",
    "bs": "bs_entangled",
    "bs_entangled": "bs_entangled",
}


def _chsh_config(ns) -> bc.ChshConfig:
    require(ns.restarts >= 1, "--restarts must be >= 1")
    seed = resolve_seed(ns)
    if seed is None:
        return bc.ChshConfig(restarts=ns.restarts)
    return bc.ChshConfig(restarts=ns.restarts, seed=seed)


def _settings_cells(settings):
    return (settings.alpha.real, settings.alpha.imag,
            settings.alpha_prime.real, settings.alpha_prime.imag,
            settings.beta.real, settings.beta.imag,
            settings.beta_prime.real, settings.beta_prime.imag)


_SETTINGS_HEADER = ("alpha_re", "alpha_im", "alpha_prime_re",
                    "alpha_prime_im", "beta_re", "beta_im",
                    "beta_prime_re", "beta_prime_im")


def _settings_json(settings) -> dict:
    return {"alpha": jc(settings.alpha),
            "alpha_prime": jc(settings.alpha_prime),
            "beta": jc(settings.beta),
            "beta_prime": jc(settings.beta_prime)}


def run_chsh_optimize(ns):
    require(ns.V >= 1.0, "--V must be >= 1")
    family = _FAMILY_ALIASES[ns.family]
    cfg = _chsh_config(ns)
    try:
        row = bc.chsh_sweep(family, ns.V, thetas=[ns.theta], d=ns.d,
                            sign=ns.sign, config=cfg)[0]
    except ValueError as err:
        raise CliError(EXIT_USAGE, str(err)) from None
    params = {"family": family, "V": ns.V, "d": ns.d, "theta": ns.theta,
              "sign": ns.sign, "restarts": cfg.restarts, "seed": cfg.seed}
    if ns.format == "csv":
        header = ("family", "V", "d", "theta", "B",
                  "converged") + _SETTINGS_HEADER
        rows = [(family, ns.V, ns.d, ns.theta, row.B, row.converged)
                + _settings_cells(row.settings)]
        return csv_text("chsh-optimize", params, header, rows), EXIT_OK
    env = json_envelope("chsh-optimize", params)
    env["B"] = jf(row.B)
    env["converged"] = bool(row.converged)
    env["settings"] = _settings_json(row.settings)
    return json_text(env), EXIT_OK


def run_chsh_sweep(ns):
    require(ns.V >= 1.0, "--V must be >= 1")
    family = _FAMILY_ALIASES[ns.family]
    cfg = _chsh_config(ns)
    dlo, dhi = parse_span(ns.d)
    try:
        if ns.thetas is not None:
            require(dlo == dhi, "a theta sweep takes a single --d value")
            tlo, thi = parse_span(ns.thetas, parse_angle)
            thetas = span_values(tlo, thi, ns.points)
            rows = bc.chsh_sweep(family, ns.V, thetas=[float(t) for t in thetas],
                                 d=dlo, sign=ns.sign, config=cfg)
        else:
            ds = span_values(dlo, dhi, ns.points)
            rows = bc.chsh_sweep(family, ns.V, d_values=[float(v) for v in ds],
                                 sign=ns.sign, config=cfg)
    except ValueError as err:
        raise CliError(EXIT_USAGE, str(err)) from None
    params = {"family": family, "V": ns.V, "d": ns.d,
              "thetas": "none" if ns.thetas is None else ns.thetas,
              "points": len(rows), "sign": ns.sign,
              "restarts": cfg.restarts, "seed": cfg.seed}
    if ns.format == "json":
        env = json_envelope("chsh-sweep", params)
        env["rows"] = [{"d": jf(r.d), "theta": jf(r.theta), "B": jf(r.B),
                        "converged": bool(r.converged),
                        "settings": _settings_json(r.settings)}
                       for r in rows]
        return json_text(env), EXIT_OK
    header = ("family", "V", "d", "theta", "B", "converged") + _SETTINGS_HEADER
    cells = [(r.family, r.V, r.d, r.theta, r.B, r.converged)
             + _settings_cells(r.settings) for r in rows]
    return csv_text("chsh-sweep", params, header, cells), EXIT_OK


def run_bell_measure(ns):
    require(ns.V >= 1.0, "--V must be >= 1")
    try:
        probs = bm.outcome_probabilities(ns.input, ns.V, ns.d)
    except ValueError as err:
        raise CliError(EXIT_USAGE, str(err)) from None
    # the library keeps the raw ~1e-16 pipeline traces on forbidden
    # outcomes; the report clamps that dust
    probs = {o: (p if abs(p) > 1e-14 else 0.0) for o, p in probs.items()}
    params = {"input": ns.input, "V": ns.V, "d": ns.d,
              "density_points": ns.density_points,
              "detector": ns.detector}
    if ns.format == "csv":
        rows = [(o, probs[o]) for o in bm.OUTCOMES]
        return (csv_text("bell-measure", params, ("outcome", "probability"),
                         rows), EXIT_OK)
    env = json_envelope("bell-measure", params)
    env["outcome_probs"] = {o: jf(probs[o]) for o in bm.OUTCOMES}
    env["P_s"] = jf(bm.distinguishability(ns.V, ns.d))
    env["threshold"] = jf(bm.decision_threshold(ns.V, ns.d))
    if ns.density_points:
        require(ns.density_points >= 2, "--density-points must be >= 2")
        live = [o for o in bm.OUTCOMES if probs[o] > 1e-12]
        mixes = {o: bm.homodyne_distribution(ns.input, o, ns.detector,
                                             ns.V, ns.d) for o in live}
        lo = min(m.mean() - 6.0 * math.sqrt(m.variance())
                 for m in mixes.values())
        hi = max(m.mean() + 6.0 * math.sqrt(m.variance())
                 for m in mixes.values())
        xs = np.linspace(lo, hi, ns.density_points)
        env["densities"] = {"detector": ns.detector,
                            "x": [jf(v) for v in xs]}
        for o in live:
            env["densities"][o] = [jf(v) for v in mixes[o](xs)]
    return json_text(env), EXIT_OK


def run_distinguish(ns):
    require(ns.V >= 1.0, "--V must be >= 1")
    dlo, dhi = parse_span(ns.d)
    if ns.trials is not None:
        require(ns.trials >= 1, "--trials must be >= 1")
        require(dlo == dhi, "Monte Carlo mode takes a single --d value")
        require(ns.rule == "midpoint",
                "Monte Carlo mode uses the midpoint rule")
        seed = resolve_seed(ns, required=True)
        table = bm.confusion_matrix(ns.V, dlo, ns.trials, seed=seed)
        params = {"V": ns.V, "d": dlo, "rule": ns.rule,
                  "trials": ns.trials, "seed": seed}
        env = json_envelope("distinguish", params)
        env["P_s"] = jf(bm.distinguishability(ns.V, dlo))
        env["threshold"] = jf(bm.decision_threshold(ns.V, dlo, rule=ns.rule))
        env["confusion"] = {t: {g: int(table[t][g]) for g in sf.BELL_LABELS}
                            for t in sf.BELL_LABELS}
        env["accuracy"] = {t: jf(table[t][t] / ns.trials)
                           for t in sf.BELL_LABELS}
        return json_text(env), EXIT_OK
    ds = span_values(dlo, dhi, ns.points)
    params = {"V": ns.V, "d": ns.d, "points": len(ds), "rule": ns.rule}
    rows = [(ns.V, d, bm.distinguishability(ns.V, d),
             bm.decision_threshold(ns.V, d, rule=ns.rule)) for d in ds]
    if ns.format == "json":
        env = json_envelope("distinguish", params)
        env["rows"] = [{"d": jf(d), "P_s": jf(p), "threshold": jf(t)}
                       for _, d, p, t in rows]
        return json_text(env), EXIT_OK
    header = ("V", "d", "P_s", "threshold")
    return csv_text("distinguish", params, header, rows), EXIT_OK


def run_teleport(ns):
    require(ns.V >= 1.0, "--V must be >= 1")
    if ns.d_sweep is not None:
        lo, hi = parse_span(ns.d_sweep)
        ds = span_values(lo, hi, ns.points)
        curve = tp.physical_flip_overlap_curve(ns.a, ns.b, ns.V,
                                               [float(v) for v in ds])
        params = {"a": ns.a, "b": ns.b, "V": ns.V, "channel": "psi-",
                  "outcome": "psi+", "correction": "physical",
                  "points": len(ds)}
        if ns.format == "json":
            env = json_envelope("teleport", params)
            env["rows"] = [{"d": jf(d), "overlap": jf(f)} for d, f in curve]
            return json_text(env), EXIT_OK
        header = ("V", "d", "overlap")
        rows = [(ns.V, d, f) for d, f in curve]
        return csv_text("teleport", params, header, rows), EXIT_OK
    require(ns.d is not None, "pass --d (or --d-sweep for the overlap curve)")
    try:
        reports = tp.teleport((ns.a, ns.b, ns.V, ns.d), ns.channel,
                              ns.correction)
    except ValueError as err:
        raise CliError(EXIT_USAGE, str(err)) from None
    params = {"a": ns.a, "b": ns.b, "V": ns.V, "d": ns.d,
              "channel": ns.channel, "correction": ns.correction}
    if ns.format == "csv":
        header = ("outcome", "probability", "correction", "hs_overlap",
                  "exact")
        rows = [(r.outcome, r.probability, r.correction,
                 math.nan if r.hs_overlap is None else r.hs_overlap,
                 "" if r.exact_match is None else
                 ("true" if r.exact_match else "false"))
                for r in reports]
        return csv_text("teleport", params, header, rows), EXIT_OK
    env = json_envelope("teleport", params)
    env["outcomes"] = [
        {"outcome": r.outcome, "probability": jf(r.probability),
         "correction": r.correction,
         "hs_overlap": None if r.hs_overlap is None else jf(r.hs_overlap),
         "exact_match": r.exact_match}
        for r in reports]
    env["probability_sum"] = jf(sum(r.probability for r in reports))
    return json_text(env), EXIT_OK


# ---------------------------------------------------------------------------
# oracle-check

def _fock_superposition(V, d, phi, sign):
    """Truncated-basis image of the conditional superposition, plus the
    branch probability it implies."""
    rho = fo.thermal_fock(V, d).matrix
    n = rho.shape[0]
    U = np.diag(np.exp(1j * phi * np.arange(n)))
    m = rho + U @ rho @ U.conj().T + sign * (U @ rho) + sign * (rho @ U.conj().T)
    prob = float(np.trace(m).real) / 4.0
    if prob < 1e-12:
        return None, prob
    return fo.FockDensityMatrix(m / np.trace(m), (n,)), prob


def _fock_bell_pair(kind, V, d, cutoff):
    """Parity-symmetrized displaced-thermal pair assembled in Fock space."""
    rp = fo.thermal_fock(V, d, cutoff=cutoff).matrix
    rm = fo.thermal_fock(V, -d, cutoff=cutoff).matrix
    if kind in ("phi+", "phi-"):
        A = np.kron(rp, rp) + np.kron(rm, rm)
    else:
        A = np.kron(rp, rm) + np.kron(rm, rp)
    n = cutoff + 1
    par = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    pp = np.kron(par, par)
    sign = 1.0 if kind.endswith("+") else -1.0
    m = A + sign * (pp[:, None] * A)
    m /= np.trace(m)
    return fo.FockDensityMatrix(m, (n, n))


def run_oracle_check(ns):
    require(ns.max_V >= 1.0, "--max-V must be >= 1")
    require(ns.max_d >= 0.0, "--max-d must be >= 0")
    Vs = sorted({1.0, round((1.0 + ns.max_V) / 2.0, 9), float(ns.max_V)})
    ds = sorted({0.0, round(ns.max_d / 2.0, 9), float(ns.max_d)})
    phis = (math.pi, math.pi / 2.0, math.pi / 16.0)

    cases = []
    worst_w = 0.0
    worst_p = 0.0
    for V in Vs:
        for d in ds:
            pts = [0.0 + 0.0j, 0.5 + 0.0j, -0.7j, 1.0 + 0.5j,
                   complex(d), complex(d / 2.0, 0.3)]
            for phi in phis:
                for sign in (1, -1):
                    p_exact = sf.superposition_probability(V, d, phi, sign)
                    mf, p_fock = _fock_superposition(V, d, phi, sign)
                    p_dev = abs(p_exact - p_fock)
                    w_dev = 0.0
                    if mf is not None and p_exact > 1e-12:
                        st = sf.thermal_superposition(V, d, phi, sign)
                        for pt in pts:
                            w_dev = max(w_dev, abs(kc.state_wigner(st, pt)
                                                   - fo.fock_wigner(mf, pt)))
                    worst_p = max(worst_p, p_dev)
                    worst_w = max(worst_w, w_dev)
                    cases.append({"V": jf(V), "d": jf(d), "phi": jf(phi),
                                  "sign": sign, "prob_dev": jf(p_dev),
                                  "wigner_dev": jf(w_dev)})

    V_b, d_b = min(3.0, ns.max_V), min(1.0, ns.max_d)
    parity = {}
    worst_parity = 0.0
    for kind in sf.BELL_LABELS:
        expect = 1.0 if kind.endswith("+") else -1.0
        try:
            st = sf.thermal_bell(kind, V_b, d_b)
        except ValueError:
            parity[kind] = None
            continue
        ev = kc.wigner_evaluator(st)
        w00 = float(ev(np.zeros((1, 2), dtype=complex))[0])
        kernel_par = (math.pi ** 2 / 4.0) * w00
        rho = _fock_bell_pair(kind, V_b, d_b, 50)
        fock_par = float(fo.fock_parity(rho, None))
        resid = max(abs(kernel_par - expect), abs(fock_par - expect))
        parity[kind] = jf(resid)
        worst_parity = max(worst_parity, resid)

    ok = (worst_w < _ORACLE_WIGNER_TOL and worst_p < _ORACLE_PROB_TOL
          and worst_parity < _ORACLE_PARITY_TOL)
    params = {"max_V": ns.max_V, "max_d": ns.max_d}
    env = json_envelope("oracle-check", params)
    env["status"] = "PASS" if ok else "FAIL"
    env["max_wigner_deviation"] = jf(worst_w)
    env["wigner_tolerance"] = jf(_ORACLE_WIGNER_TOL)
    env["max_probability_deviation"] = jf(worst_p)
    env["probability_tolerance"] = jf(_ORACLE_PROB_TOL)
    env["max_parity_residual"] = jf(worst_parity)
    env["parity_tolerance"] = jf(_ORACLE_PARITY_TOL)
    env["parity_point"] = {"V": jf(V_b), "d": jf(d_b)}
    env["bell_parity_residuals"] = parity
    env["cases"] = cases
    if not ok:
        _emit_error(CliError(EXIT_NUMERIC,
                             "oracle deviations exceed tolerance"))
        return json_text(env), EXIT_NUMERIC
    return json_text(env), EXIT_OK


# ---------------------------------------------------------------------------
# parser assembly

def _add_output(p, default_format):
    p.add_argument("--out", metavar="PATH", default=None,
                   help="write to this file instead of stdout")
    p.add_argument("--format", choices=("csv", "json"),
                   default=default_format,
                   help="output format (default: %(default)s)")


def _add_state_options(p, sign_default):
    p.add_argument("--V", type=float, required=True,
                   help="thermal variance, >= 1")
    p.add_argument("--d", type=float, default=0.0,
                   help="displacement amplitude (default: 0)")
    p.add_argument("--phi", type=parse_angle, default=None,
                   help="superposition rotation angle; omit for the plain "
                        "displaced thermal state")
    p.add_argument("--sign", type=int, choices=(1, -1),
                   default=sign_default,
                   help="conditioning branch (default: %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="thermalcat",
                     description="Exact phase-space data for thermal-state "
                                 "superposition and entanglement studies.")
    parser.add_argument("--version", action="version",
                        version="thermalcat " + __version__)
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND",
                                required=True)

    p = sub.add_parser("wigner-grid",
                       help="Wigner function on a square grid")
    _add_state_options(p, sign_default=1)
    p.add_argument("--points", type=int, default=201,
                   help="grid points per axis (default: %(default)s)")
    p.add_argument("--frame", choices=("auto", "full", "fringe"),
                   default="auto",
                   help="evaluation window; auto recenters on the "
                        "interference patch when needed")
    _add_output(p, "csv")
    p.set_defaults(handler=run_wigner_grid)

    p = sub.add_parser("marginal", help="quadrature density of one mode")
    _add_state_options(p, sign_default=-1)
    p.add_argument("--angle", type=parse_angle, default=None,
                   help="quadrature angle (default: phi/2, the fringe axis)")
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--xmin", type=float, default=None)
    p.add_argument("--xmax", type=float, default=None)
    _add_output(p, "csv")
    p.set_defaults(handler=run_marginal)

    p = sub.add_parser("visibility",
                       help="fringe visibility and spacing of the "
                            "conditional superposition")
    p.add_argument("--V", type=float, required=True)
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--phi", type=parse_angle, default=math.pi,
                   help="rotation angle (default: pi)")
    p.add_argument("--sign", type=int, choices=(1, -1), default=-1,
                   help="conditioning branch (default: -1, the fringe "
                        "branch)")
    p.add_argument("--axis", type=parse_angle, default=None,
                   help="marginal axis (default: phi/2)")
    _add_output(p, "csv")
    p.set_defaults(handler=run_visibility)

    p = sub.add_parser("negativity",
                       help="minimum of the entangled-pair Wigner function")
    p.add_argument("--V", type=float, required=True)
    p.add_argument("--d", type=float, default=0.0)
    _add_output(p, "json")
    p.set_defaults(handler=run_negativity)

    p = sub.add_parser("kerr-movie",
                       help="Wigner snapshots over the interaction angle")
    p.add_argument("--V", type=float, required=True)
    p.add_argument("--d", type=float, default=0.0)
    p.add_argument("--sign", type=int, choices=(1, -1), default=1)
    p.add_argument("--thetas", default="0..pi",
                   help="angle range lo..hi (default: %(default)s)")
    p.add_argument("--frames", type=int, default=5)
    p.add_argument("--points", type=int, default=201)
    _add_output(p, "csv")
    p.set_defaults(handler=run_kerr_movie)

    p = sub.add_parser("chsh-optimize",
                       help="best CHSH value for one entangled state")
    p.add_argument("--family", choices=sorted(_FAMILY_ALIASES),
                   required=True)
    p.add_argument("--V", type=float, required=True)
    p.add_argument("--d", type=float, default=0.0)
    p.add_argument("--theta", type=parse_angle, default=math.pi)
    p.add_argument("--sign", type=int, choices=(1, -1), default=1)
    p.add_argument("--restarts", type=int, default=32)
    p.add_argument("--seed", type=int, default=None)
    _add_output(p, "json")
    p.set_defaults(handler=run_chsh_optimize)

    p = sub.add_parser("chsh-sweep",
                       help="CHSH value over a displacement or angle range")
    p.add_argument("--family", choices=sorted(_FAMILY_ALIASES),
                   required=True)
    p.add_argument("--V", type=float, required=True)
    p.add_argument("--d", default="0..0",
                   help="displacement range lo..hi (default: %(default)s)")
    p.add_argument("--thetas", default=None,
                   help="angle range lo..hi; switches to a theta sweep at "
                        "fixed --d")
    p.add_argument("--points", type=int, default=None,
                   help="sweep points (default: 1 for a degenerate range)")
    p.add_argument("--sign", type=int, choices=(1, -1), default=1)
    p.add_argument("--restarts", type=int, default=32)
    p.add_argument("--seed", type=int, default=None)
    _add_output(p, "csv")
    p.set_defaults(handler=run_chsh_sweep)

    p = sub.add_parser("bell-measure",
                       help="parity outcome statistics for one entangled "
                            "input")
    p.add_argument("--input", choices=sf.BELL_LABELS, required=True)
    p.add_argument("--V", type=float, required=True)
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--density-points", type=int, default=0,
                   help="include conditional homodyne densities on this "
                        "many points (0 = omit)")
    p.add_argument("--detector", choices=("C", "D"), default="C")
    _add_output(p, "json")
    p.set_defaults(handler=run_bell_measure)

    p = sub.add_parser("distinguish",
                       help="homodyne discrimination probability and Monte "
                            "Carlo confusion matrix")
    p.add_argument("--V", type=float, required=True)
    p.add_argument("--d", required=True,
                   help="displacement value or range lo..hi")
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--rule", choices=("midpoint", "likelihood"),
                   default="midpoint")
    p.add_argument("--trials", type=int, default=None,
                   help="Monte Carlo trials per label (switches to JSON "
                        "confusion-matrix output; needs a seed)")
    p.add_argument("--seed", type=int, default=None)
    _add_output(p, "csv")
    p.set_defaults(handler=run_distinguish)

    p = sub.add_parser("teleport",
                       help="teleport a thermal-state qubit over an "
                            "entangled channel")
    p.add_argument("--a", type=parse_complex, default=complex(1.0),
                   help="amplitude on the +d basis state (default: 1)")
    p.add_argument("--b", type=parse_complex, default=complex(0.0),
                   help="amplitude on the -d basis state (default: 0)")
    p.add_argument("--V", type=float, required=True)
    p.add_argument("--d", type=float, default=None)
    p.add_argument("--channel", choices=sf.BELL_LABELS, default="psi-")
    p.add_argument("--correction", choices=tp.CORRECTION_MODES,
                   default="formal")
    p.add_argument("--d-sweep", default=None,
                   help="displacement range lo..hi for the sign-flip "
                        "overlap curve (physical mode, psi+ branch)")
    p.add_argument("--points", type=int, default=None)
    _add_output(p, "json")
    p.set_defaults(handler=run_teleport)

    p = sub.add_parser("oracle-check",
                       help="cross-validate closed forms against the "
                            "truncated-basis simulator")
    p.add_argument("--max-V", type=float, default=5.0, dest="max_V")
    p.add_argument("--max-d", type=float, default=2.0, dest="max_d")
    p.add_argument("--out", metavar="PATH", default=None)
    p.set_defaults(handler=run_oracle_check, format="json")

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        ns = build_parser().parse_args(argv)
    except CliError as err:
        _emit_error(err)
        return err.code
    try:
        text, code = ns.handler(ns)
    except CliError as err:
        _emit_error(err)
        return err.code
    except (ArithmeticError, np.linalg.LinAlgError) as err:
        _emit_error(CliError(EXIT_NUMERIC, "numerical failure: %s" % err))
        return EXIT_NUMERIC
    write_output(text, ns.out)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
