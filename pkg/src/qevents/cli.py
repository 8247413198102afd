"""Command-line front end.

Usage::

    qevents <command> --config run.ini [--out DIR] [--seed N] [--threads N] [--units natural|si]

Configuration files are flat INI files. Every command accepts a fixed set of
sections and keys; anything else is rejected before computation starts.
Vectors are comma-separated numbers. Exit status: 0 on success, 1 for
configuration errors, 2 for numerical failures.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import platform
import sys
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import scipy

from . import __version__
from .emfield import (
    GridField,
    current_and_continuity,
    field_difference,
    field_tensor,
    gauge_transform,
    homogeneous_maxwell_residual,
)
from .errors import ConfigError, QEventsError
from .gridio import export_csv, read_grid, write_grid
from .histories import (
    CandidateLattice,
    flip_statistics,
    frequency_consistency_check,
    pair_transition_frequency,
    sample_ensemble,
    write_histories_jsonl,
)
from .massshell import (
    DEFAULT_ALLOWED_THRESHOLD,
    Propagator,
    evaluate_orbit,
    is_physically_allowed,
    orbit_wave_residual,
    transition_amplitude,
    transition_probability,
)
from .nonrel import limit_convergence_study, observed_orders, write_study_csv
from .packets import GaussianEventPacket
from .poincare import PoincareElement, boost, invariance_report, rotation
from .quadrature import ShellQuadrature
from .units import Quantity, SI, convert_units

COMMANDS = (
    "amplitude",
    "probability",
    "orbit",
    "poincare-check",
    "gauge-check",
    "maxwell-check",
    "limit-study",
    "history",
    "frequency-check",
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


# -- value parsers -------------------------------------------------------------


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def _float(text: str) -> float:
    vals = _floats(text)
    if len(vals) != 1:
        raise ConfigError(f"expected a single number, got {text!r}")
    return vals[0]


def _int(text: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigError(f"expected an integer, got {text!r}") from None


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _complex(text: str) -> complex:
    try:
        return complex(text.strip().replace(" ", ""))
    except ValueError:
        raise ConfigError(f"expected a complex number, got {text!r}") from None


def _vectors(text: str) -> list:
    """Semicolon-separated list of comma-separated vectors."""
    return [_floats(chunk) for chunk in text.split(";") if chunk.strip()]


def _word(choices) -> Callable:
    def parse(text: str) -> str:
        v = text.strip()
        if v not in choices:
            raise ConfigError(f"expected one of {choices}, got {v!r}")
        return v

    return parse


PACKET_KEYS = {"center_x": _floats, "center_p": _floats, "widths_p": _floats, "amplitude": _complex}
PROPAGATOR_KEYS = {
    "mass": _float,
    "potential": _floats,
    "shell_selector": _word(("both", "positive_only", "negative_only")),
    "charge_sign": _int,
    "threshold": _float,
}
QUADRATURE_KEYS = {
    "scheme": _word(("tensor_gauss_legendre", "monte_carlo")),
    "nodes_per_axis": _int,
    "sample_count": _int,
    "truncation_sigmas": _float,
    "verify": _bool,
    "tolerance": _float,
}
GRID_KEYS = {
    "origin": _floats,
    "spacing": _floats,
    "shape": lambda t: [int(v) for v in _floats(t)],
    "potential": _word(("linear_magnetic", "coulomb", "plane_wave", "smooth")),
    "potential_file": str,
    "strength": _float,
    "gauge": _word(("linear", "quadratic", "smooth")),
    "gauge_strength": _float,
}
TRANSFORM_KEYS = {
    "translation": _floats,
    "rapidity": _floats,
    "rotation": _floats,
    "parity": _bool,
    "time_reversal": _bool,
    "rapidity_cap": _float,
}
LATTICE_KEYS = {
    "spacetime_offsets": _vectors,
    "momentum_offsets": _vectors,
    "widths": _floats,
    "energy_mode": _word(("offset", "shell")),
    "shell_branches": lambda t: [int(v) for v in _floats(t)],
}
HISTORY_KEYS = {"n_steps": _int, "n_histories": _int, "mode": _word(("normalize", "thinning"))}
FREQUENCY_KEYS = {"n_trials": _int, "target": _int}
STUDY_KEYS = {
    "velocities": _floats,
    "time_widths": _floats,
    "mass": _float,
    "travel_time": _float,
    "width_ratio": _float,
    "offset": _float,
    "scalar_potential": _float,
}
GAUGE_SHIFT_KEYS = {"shift": _floats}

SCHEMAS = {
    "amplitude": {"packet.psi": PACKET_KEYS, "packet.phi": PACKET_KEYS, "propagator": PROPAGATOR_KEYS, "quadrature": QUADRATURE_KEYS},
    "probability": {"packet.psi": PACKET_KEYS, "packet.phi": PACKET_KEYS, "propagator": PROPAGATOR_KEYS, "quadrature": QUADRATURE_KEYS},
    "orbit": {"packet.psi": PACKET_KEYS, "propagator": PROPAGATOR_KEYS, "quadrature": QUADRATURE_KEYS, "grid": GRID_KEYS},
    "poincare-check": {
        "packet.psi": PACKET_KEYS,
        "packet.phi": PACKET_KEYS,
        "propagator": PROPAGATOR_KEYS,
        "quadrature": QUADRATURE_KEYS,
        "transform": TRANSFORM_KEYS,
    },
    "gauge-check": {
        "grid": GRID_KEYS,
        "packet.psi": PACKET_KEYS,
        "packet.phi": PACKET_KEYS,
        "propagator": PROPAGATOR_KEYS,
        "quadrature": QUADRATURE_KEYS,
        "gauge_shift": GAUGE_SHIFT_KEYS,
    },
    "maxwell-check": {"grid": GRID_KEYS},
    "limit-study": {"study": STUDY_KEYS, "quadrature": QUADRATURE_KEYS},
    "history": {
        "packet.psi": PACKET_KEYS,
        "propagator": PROPAGATOR_KEYS,
        "quadrature": QUADRATURE_KEYS,
        "lattice": LATTICE_KEYS,
        "history": HISTORY_KEYS,
    },
    "frequency-check": {
        "packet.psi": PACKET_KEYS,
        "propagator": PROPAGATOR_KEYS,
        "quadrature": QUADRATURE_KEYS,
        "lattice": LATTICE_KEYS,
        "frequency": FREQUENCY_KEYS,
    },
}


MANIFEST_HEADER = "command="
RUN_KEYS = ("seed", "threads", "units")


def _ini_text(value) -> str:
    """Render a manifest JSON value back into INI syntax."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        if value and isinstance(value[0], list):
            return "; ".join(_ini_text(v) for v in value)
        return ", ".join(repr(v) for v in value)
    return str(value)


def read_manifest(path: str) -> tuple:
    """Split a manifest into (run settings, {section: {key: text}})."""
    run, sections = {}, {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"malformed manifest line {line!r}")
        if "." in key and not key.endswith("_version"):
            section, _, name = key.rpartition(".")
            sections.setdefault(section, {})[name] = _ini_text(json.loads(value))
        else:
            run[key] = value
    return run, sections


def is_manifest(path: Optional[str]) -> bool:
    if path is None:
        return False
    try:
        with open(path) as fh:
            return fh.readline().startswith(MANIFEST_HEADER)
    except OSError:
        return False


def _typed(raw_sections: dict, command: str) -> dict:
    schema = SCHEMAS[command]
    out = {}
    for section, items in raw_sections.items():
        if section not in schema:
            raise ConfigError(f"unknown section [{section}] for command {command!r}")
        keys = schema[section]
        out[section] = {}
        for key, raw in items.items():
            if key not in keys:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            out[section][key] = keys[key](raw)
    return out


def load_config(path: Optional[str], command: str) -> dict:
    """Parse and type-check an INI file (or a previous run's manifest) against the command's schema."""
    if is_manifest(path):
        run, sections = read_manifest(path)
        if run.get("command") != command:
            raise ConfigError(f"manifest was written by {run.get('command')!r}, not {command!r}")
        return _typed(sections, command)
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if path is not None:
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    return _typed({sec: dict(parser.items(sec)) for sec in parser.sections()}, command)


# -- unit handling ---------------------------------------------------------------


def _natural(values, roles, si: bool):
    if not si:
        return list(values)
    return [convert_units(Quantity(v, r, SI), "natural").value for v, r in zip(values, roles)]


def _event_roles(n: int, first: str, rest: str):
    return [first] + [rest] * (n - 1)


def _require(cfg: dict, section: str, key: str):
    try:
        return cfg[section][key]
    except KeyError:
        raise ConfigError(f"missing [{section}] {key}") from None


def build_packet(cfg: dict, name: str, si: bool) -> GaussianEventPacket:
    sec = f"packet.{name}"
    cx = _require(cfg, sec, "center_x")
    cp = _require(cfg, sec, "center_p")
    w = _require(cfg, sec, "widths_p")
    if not (len(cx) == len(cp) == len(w)):
        raise ConfigError(f"[{sec}] vectors must have equal length")
    cx = _natural(cx, _event_roles(len(cx), "time", "position"), si)
    cp = _natural(cp, _event_roles(len(cp), "energy", "momentum"), si)
    w = _natural(w, _event_roles(len(w), "energy", "momentum"), si)
    return GaussianEventPacket.from_widths(cx, cp, w, cfg[sec].get("amplitude", 1.0))


def build_propagator(cfg: dict, si: bool):
    sec = cfg.get("propagator", {})
    mass = _natural([_require(cfg, "propagator", "mass")], ["mass"], si)[0]
    pot = sec.get("potential")
    if pot is not None:
        pot = _natural(pot, ["potential"] * len(pot), si)
    G = Propagator(mass, pot, sec.get("shell_selector", "both"), sec.get("charge_sign", 1))
    return G, sec.get("threshold", DEFAULT_ALLOWED_THRESHOLD)


def build_quadrature(cfg: dict, seed: int) -> ShellQuadrature:
    sec = dict(cfg.get("quadrature", {}))
    return ShellQuadrature(seed=seed, **sec)


def _builtin_potential(kind: str, strength: float, D: int) -> Callable:
    def linear_magnetic(t, *x):
        comps = [0.0 * t for _ in range(D)]
        if D >= 3:
            comps[2] = strength * x[0]
        else:
            comps[1] = strength * t
        return comps

    def coulomb(t, *x):
        r = np.sqrt(sum(c * c for c in x) + 0.25)
        return [strength / r] + [0.0 * t] * (D - 1)

    def plane_wave(t, *x):
        # null wave vector along x^1, polarization along the last spatial axis
        phase = 2.0 * (t - x[0])
        comps = [0.0 * t for _ in range(D)]
        comps[-1] = strength * np.cos(phase)
        return comps

    def smooth(t, *x):
        s = sum((k + 1) * c for k, c in enumerate(x))
        return [strength * np.sin(0.7 * t + 0.3 * s + k) * np.cos(0.5 * x[k % len(x)]) for k in range(D)]

    return {"linear_magnetic": linear_magnetic, "coulomb": coulomb, "plane_wave": plane_wave, "smooth": smooth}[kind]


def _builtin_gauge(kind: str, strength: float) -> Callable:
    def linear(t, *x):
        return strength * (0.3 * t + sum(0.2 * (k + 1) * c for k, c in enumerate(x)))

    def quadratic(t, *x):
        return strength * (0.5 * t * t - sum(c * c for c in x) + t * x[0])

    def smooth(t, *x):
        return strength * np.sin(t) * np.cos(sum(x))

    return {"linear": linear, "quadratic": quadratic, "smooth": smooth}[kind]


def build_potential_grid(cfg: dict) -> GridField:
    sec = cfg.get("grid", {})
    if "potential_file" in sec:
        return read_grid(sec["potential_file"])
    origin = _require(cfg, "grid", "origin")
    spacing = _require(cfg, "grid", "spacing")
    shape = _require(cfg, "grid", "shape")
    if not (len(origin) == len(spacing) == len(shape)):
        raise ConfigError("[grid] origin, spacing and shape must have equal length")
    func = _builtin_potential(sec.get("potential", "smooth"), sec.get("strength", 1.0), len(shape))
    return GridField.sample(func, origin, spacing, shape)


def build_lattice(cfg: dict, dim: int) -> CandidateLattice:
    sec = cfg.get("lattice", {})
    return CandidateLattice(
        tuple(sec.get("spacetime_offsets", [[0.0] * dim])),
        tuple(sec.get("momentum_offsets", [[0.0] * dim])),
        _require(cfg, "lattice", "widths"),
        sec.get("energy_mode", "offset"),
        tuple(sec.get("shell_branches", (1, -1))),
    )


# -- output helpers ----------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, complex):
        return f"{v.real!r}{v.imag:+.17g}j"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_table(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_manifest(out: Path, command: str, args, cfg: dict) -> None:
    lines = [
        f"command={command}",
        f"config={args.config}",
        f"seed={args.seed}",
        f"threads={args.threads}",
        f"units={args.units}",
        f"qevents_version={__version__}",
        f"python_version={platform.python_version()}",
        f"numpy_version={np.__version__}",
        f"scipy_version={scipy.__version__}",
    ]
    for section in sorted(cfg):
        for key in sorted(cfg[section]):
            lines.append(f"{section}.{key}={json.dumps(cfg[section][key], default=_fmt)}")
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")


# -- commands ----------------------------------------------------------------------


class Context:
    def __init__(self, cfg: dict, args, out: Path):
        self.cfg = cfg
        self.args = args
        self.out = out
        self.si = args.units == "si"
        self.seed = args.seed
        self.threads = max(1, args.threads)


def _pair_setup(ctx: Context):
    psi = build_packet(ctx.cfg, "psi", ctx.si)
    phi = build_packet(ctx.cfg, "phi", ctx.si)
    G, threshold = build_propagator(ctx.cfg, ctx.si)
    q = build_quadrature(ctx.cfg, ctx.seed)
    return psi, phi, G, threshold, q


def cmd_amplitude(ctx: Context):
    psi, phi, G, threshold, q = _pair_setup(ctx)

    def run():
        for label, v in (("initial", psi), ("final", phi)):
            if not is_physically_allowed(v, G, q, threshold):
                from .errors import PhysicallyDisallowed

                raise PhysicallyDisallowed(f"{label} event is not physically allowed at threshold {threshold:g}")
        tau = transition_amplitude(phi, psi, G, q)
        write_table(ctx.out / "amplitude.csv", ["tau_re", "tau_im", "abs_tau"], [[tau.real, tau.imag, abs(tau)]])
        print(f"tau={_fmt(tau)}")

    return run


def cmd_probability(ctx: Context):
    psi, phi, G, threshold, q = _pair_setup(ctx)

    def run():
        P = transition_probability(phi, psi, G, q, threshold)
        write_table(ctx.out / "probability.csv", ["P"], [[P]])
        print(f"P={P!r}")

    return run


def cmd_orbit(ctx: Context):
    psi = build_packet(ctx.cfg, "psi", ctx.si)
    G, _ = build_propagator(ctx.cfg, ctx.si)
    q = build_quadrature(ctx.cfg, ctx.seed)
    origin = _require(ctx.cfg, "grid", "origin")
    spacing = _require(ctx.cfg, "grid", "spacing")
    shape = _require(ctx.cfg, "grid", "shape")
    if not (len(origin) == len(spacing) == len(shape) == psi.dim):
        raise ConfigError("[grid] must match the packet dimension")
    if any(n < 4 for n in shape):
        raise ConfigError("[grid] needs at least 4 samples per axis")

    def run():
        axes = [o + h * np.arange(n) for o, h, n in zip(origin, spacing, shape)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        vals = evaluate_orbit(psi, G, pts, q).reshape(shape)
        grid = GridField(origin, spacing, vals)
        write_grid(ctx.out / "orbit.qgrid", grid)
        export_csv(ctx.out / "orbit.csv", grid, ["psi"])
        res = orbit_wave_residual(vals, spacing, G.mass, G.potential(psi.dim))
        rel = float(np.max(np.abs(res)) / np.max(np.abs(vals)))
        print(f"orbit_points={pts.shape[0]} max_abs={float(np.max(np.abs(vals)))!r} wave_residual_rel={rel!r}")

    return run


def cmd_poincare(ctx: Context):
    psi, phi, G, _, q = _pair_setup(ctx)
    sec = ctx.cfg.get("transform", {})
    D = psi.dim
    lam = np.eye(D)
    if "rotation" in sec:
        rot = sec["rotation"]
        lam = rotation(rot[0] if len(rot) == 1 else rot, D - 1).lorentz @ lam
    if "rapidity" in sec:
        lam = boost(sec["rapidity"]).lorentz @ lam
    if lam.shape != (D, D):
        raise ConfigError("[transform] does not match the packet dimension")
    g = PoincareElement.from_parts(lam, sec.get("translation"), sec.get("parity", False), sec.get("time_reversal", False))
    cap = sec.get("rapidity_cap", 3.0)

    def run():
        rep = invariance_report(phi, psi, G, g, q, cap)
        write_table(
            ctx.out / "poincare.csv",
            ["tau_before_re", "tau_before_im", "tau_after_re", "tau_after_im", "relative_error"],
            [[rep.tau_before.real, rep.tau_before.imag, rep.tau_after.real, rep.tau_after.imag, rep.relative_error]],
        )
        print(f"relative_error={rep.relative_error!r}")

    return run


def cmd_maxwell(ctx: Context):
    A = build_potential_grid(ctx.cfg)

    def run():
        F = field_tensor(A)
        cyc = homogeneous_maxwell_residual(F)
        cyc_rel = homogeneous_maxwell_residual(F, relative=True)
        cur = current_and_continuity(F)
        write_grid(ctx.out / "field_tensor.qgrid", F.base)
        write_grid(ctx.out / "current.qgrid", cur.current)
        write_table(
            ctx.out / "maxwell.csv",
            ["cyclic_residual", "cyclic_relative", "continuity_residual", "continuity_relative"],
            [[cyc, cyc_rel, cur.continuity_residual, cur.relative_residual]],
        )
        print(f"cyclic_relative={cyc_rel!r} continuity_relative={cur.relative_residual!r}")

    return run


def cmd_gauge(ctx: Context):
    A = build_potential_grid(ctx.cfg)
    sec = ctx.cfg.get("grid", {})
    chi_fn = _builtin_gauge(sec.get("gauge", "quadratic"), sec.get("gauge_strength", 1.0))
    chi = GridField.sample(chi_fn, A.origin, A.spacing, A.shape)
    with_packets = "packet.psi" in ctx.cfg
    if with_packets:
        psi, phi, G, threshold, q = _pair_setup(ctx)
        shift = np.asarray(_require(ctx.cfg, "gauge_shift", "shift"), dtype=float)
        if shift.size != psi.dim:
            raise ConfigError("[gauge_shift] shift must match the packet dimension")

    def run():
        F0 = field_tensor(A)
        F1 = field_tensor(gauge_transform(A, chi))
        diff = field_difference(F0, F1)
        rows = [["field_tensor_change", diff]]
        if with_packets:
            pot = G.constant_potential if G.constant_potential is not None else np.zeros(psi.dim)
            P0 = transition_probability(phi, psi, G, q, threshold)
            G1 = G.with_potential(pot - G.charge_sign * shift)
            P1 = transition_probability(phi.gauge_phase(shift), psi.gauge_phase(shift), G1, q, threshold)
            rows += [["P_before", P0], ["P_after", P1], ["P_change", abs(P1 - P0)]]
        write_table(ctx.out / "gauge.csv", ["quantity", "value"], rows)
        for name, value in rows:
            print(f"{name}={value!r}")

    return run


def cmd_limit(ctx: Context):
    sec = ctx.cfg.get("study", {})
    velocities = sec.get("velocities", [0.2, 0.1, 0.05, 0.01])
    widths = sec.get("time_widths", [5.0, 2.5, 2.0])
    kwargs = {k: sec[k] for k in ("mass", "travel_time", "width_ratio", "offset", "scalar_potential") if k in sec}
    if any(w <= 0 for w in widths):
        raise ConfigError("[study] time_widths must be positive")
    q = build_quadrature(ctx.cfg, ctx.seed)

    def run():
        rows = limit_convergence_study(velocities, widths, quadrature=q, workers=ctx.threads, **kwargs)
        write_study_csv(ctx.out / "limit_study.csv", rows)
        for w in widths:
            orders = observed_orders(rows, w)
            print(f"dt_width={w!r} orders={[round(o, 4) for o in orders]}")
        for r in rows:
            print(f"v={r.v!r} dt={r.dt_width!r} rel_error={r.rel_error!r}")

    return run


def cmd_history(ctx: Context):
    psi = build_packet(ctx.cfg, "psi", ctx.si)
    G, threshold = build_propagator(ctx.cfg, ctx.si)
    q = build_quadrature(ctx.cfg, ctx.seed)
    lattice = build_lattice(ctx.cfg, psi.dim)
    sec = ctx.cfg.get("history", {})
    n_steps = sec.get("n_steps", 10)
    n_hist = sec.get("n_histories", 1)
    mode = sec.get("mode", "normalize")
    if n_steps < 0 or n_hist < 1:
        raise ConfigError("[history] needs n_steps >= 0 and n_histories >= 1")

    def run():
        hs = sample_ensemble(psi, lattice, G, n_steps, n_hist, ctx.seed, q, mode, threshold, ctx.threads)
        write_histories_jsonl(ctx.out / "histories.jsonl", hs)
        freq = pair_transition_frequency(hs)
        obs, expected, z = flip_statistics(hs)
        write_table(
            ctx.out / "history_summary.csv",
            ["flip_frequency", "observed_flips", "expected_flips", "z_score"],
            [[freq, obs, expected, z]],
        )
        print(f"flip_frequency={freq!r} observed_flips={obs} expected_flips={expected!r} z={z!r}")

    return run


def cmd_frequency(ctx: Context):
    psi = build_packet(ctx.cfg, "psi", ctx.si)
    G, threshold = build_propagator(ctx.cfg, ctx.si)
    q = build_quadrature(ctx.cfg, ctx.seed)
    lattice = build_lattice(ctx.cfg, psi.dim)
    sec = ctx.cfg.get("frequency", {})
    n_trials = sec.get("n_trials", 100_000)
    target = sec.get("target", 0)
    if n_trials <= 0:
        raise ConfigError("[frequency] n_trials must be positive")

    def run():
        cands = lattice.candidates(psi, G)
        if not 0 <= target < len(cands):
            raise ConfigError(f"[frequency] target must index one of {len(cands)} candidates")
        rep = frequency_consistency_check(psi, cands, G, n_trials, ctx.seed, target, q, threshold)
        write_table(
            ctx.out / "frequency.csv",
            ["empirical", "analytic", "z_score", "n_trials"],
            [[rep.empirical, rep.analytic, rep.z_score, rep.n_trials]],
        )
        print(f"empirical={rep.empirical!r} analytic={rep.analytic!r} z={rep.z_score!r}")

    return run


HANDLERS = {
    "amplitude": cmd_amplitude,
    "probability": cmd_probability,
    "orbit": cmd_orbit,
    "poincare-check": cmd_poincare,
    "gauge-check": cmd_gauge,
    "maxwell-check": cmd_maxwell,
    "limit-study": cmd_limit,
    "history": cmd_history,
    "frequency-check": cmd_frequency,
}


def _resolve_run_settings(args) -> None:
    """Fill unset flags from a manifest config if one is given, then from defaults."""
    stored = read_manifest(args.config)[0] if is_manifest(args.config) else {}
    defaults = {"seed": 0, "threads": 1, "units": "natural"}
    for key in RUN_KEYS:
        if getattr(args, key) is None:
            value = stored.get(key, defaults[key])
            setattr(args, key, value if key == "units" else int(value))
    if args.units not in ("natural", "si"):
        raise ConfigError(f"unknown unit system {args.units!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qevents", description="Quantum event amplitudes, symmetry checks and studies.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", default=None, help="INI configuration file")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="64-bit seed for all random draws (default 0)")
    parser.add_argument("--threads", type=int, default=None, help="maximum worker threads (default 1)")
    parser.add_argument("--units", choices=("natural", "si"), default=None, help="unit system of the config (default natural)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        _resolve_run_settings(args)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    try:
        cfg = load_config(args.config, args.command)
        ctx = Context(cfg, args, out)
        run = HANDLERS[args.command](ctx)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out, args.command, args, cfg)
    try:
        run()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QEventsError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
