"""Command-line entry point: ``dickelab {evolve,sweep,energetics,validate}``.

A run is described by one JSON config::

    {
      "version": 1,
      "command": "evolve",
      "model": {"family": "JaynesCummings", "omega0": 1, "omega": 1, "g": 0.1, "fock_cutoff": 1},
      "basis": {"reduction": "full_tensor"},
      "evolution": {"t_max": 30, "dt_output": 0.1, "initial_state": "fully_excited",
                    "observables": ["P_excited", "photon_number"]},
      "output": {"format": "csv", "path": null}
    }

``sweep`` configs add a ``sweep`` section (``n_values``, ``metric`` and
optionally ``observable`` / ``reduction``) and omit the ensemble-size
parameters from ``model``. ``energetics`` configs carry only a
``calculator`` section with a ``formula`` key.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
CSV floats carry 9 significant digits; JSON floats use the shortest
representation that round-trips exactly.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import MISSING, fields

import jsonschema

from . import energetics as en
from .dynamics import METHODS, NOISE_KINDS, EvolutionRequest, Noise, Sink, evolve
from .errors import DickeLabError, MetricError, NumericalError
from .models import FAMILIES, default_basis, model_from_dict
from .scaling import METRICS, SIZE_FIELDS, RunTemplate, SweepRequest, run_sweep
from .statespace import COLLECTIVE_SPIN, FULL_TENSOR

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

THREADS_ENV = "DICKELAB_THREADS"
CONFIG_VERSION = 1

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_COUNT = {"type": "integer", "minimum": 1}

_EVOLUTION = {
    "type": "object",
    "additionalProperties": False,
    "required": ["t_max", "dt_output"],
    "properties": {
        "t_max": _POS,
        "dt_output": _POS,
        "initial_state": {"anyOf": [
            {"type": "string"},
            {"type": "array", "items": {"anyOf": [_NUM, {"type": "array", "items": _NUM,
                                                            "minItems": 2, "maxItems": 2}]}},
        ]},
        "method": {"enum": list(METHODS)},
        "noise": {"type": "array", "items": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind", "rate"],
            "properties": {"kind": {"enum": list(NOISE_KINDS)}, "rate": _NONNEG,
                           "ensemble": {"type": "string"}},
        }},
        "sink": {
            "type": "object",
            "additionalProperties": False,
            "required": ["ensemble", "site", "rate"],
            "properties": {"ensemble": {"type": "string"}, "site": {"type": "integer", "minimum": 0},
                           "rate": _NONNEG},
        },
        "observables": {"type": "array", "items": {"type": "string"}},
        "rk4_step_scale": _POS,
        "max_open_dim": _COUNT,
    },
}

_CALCULATORS = {
    "ev_to_kwh": ({"energy_per_atom": _POS, "molar_mass": _POS,
                   "composition": {"type": "array", "minItems": 1, "items": {
                       "type": "array", "items": _POS, "minItems": 2, "maxItems": 2}}},
                  ["energy_per_atom"]),
    "kwh_to_ev": ({"kwh_per_kg": _POS, "molar_mass": _POS}, ["kwh_per_kg", "molar_mass"]),
    "material_use_per_area": ({"thickness": _NONNEG, "density": _NONNEG}, ["thickness", "density"]),
    "material_use_per_watt": ({"areal_mass": _NONNEG, "area": _NONNEG, "peak_power": _POS},
                              ["areal_mass", "area", "peak_power"]),
    "battery_energy_density": ({"e_max": _NONNEG, "molecular_mass": _POS}, ["e_max", "molecular_mass"]),
    "battery_power_density": ({"p_max": _NONNEG, "mass": _POS}, ["p_max", "mass"]),
    "nuclear_transfer_rate": ({"g_coupling": _POS, "b_field": _POS, "gamow_suppression": _POS,
                               "vol_ratio": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                               "delta_E": _POS, "n_donors": _POS, "n_acceptors": _POS,
                               "published_value": _POS},
                              ["gamow_suppression", "n_donors", "n_acceptors"]),
    "vol_ratio": ({"r_nuc": _NONNEG, "R0": _POS, "delta_R": _POS}, ["r_nuc", "R0", "delta_R"]),
    "magnetic_coupling": ({"b_field": _NONNEG}, ["b_field"]),
}

_UNITS = {
    "ev_to_kwh": "kWh/kg",
    "kwh_to_ev": "eV/atom",
    "material_use_per_area": "g/m^2",
    "material_use_per_watt": "g/Wp",
    "battery_energy_density": "Wh/kg",
    "battery_power_density": "kW/kg",
    "nuclear_transfer_rate": "1/s",
    "vol_ratio": "1",
    "magnetic_coupling": "eV",
}

_OUTPUT = {
    "type": "object",
    "additionalProperties": False,
    "properties": {"format": {"enum": ["csv", "json"]}, "path": {"type": ["string", "null"]}},
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["version", "command"],
    "properties": {
        "version": {"const": CONFIG_VERSION},
        "command": {"enum": ["evolve", "sweep", "energetics"]},
        "model": {"type": "object", "required": ["family"]},
        "basis": {"type": "object", "additionalProperties": False,
                  "properties": {"reduction": {"enum": [FULL_TENSOR, COLLECTIVE_SPIN, "auto"]}}},
        "evolution": _EVOLUTION,
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["n_values", "metric"],
            "properties": {"n_values": {"type": "array", "items": _COUNT, "minItems": 3},
                           "metric": {"enum": list(METRICS)},
                           "observable": {"type": "string"}},
        },
        "calculator": {"type": "object", "required": ["formula"],
                       "properties": {"formula": {"enum": sorted(_CALCULATORS)}}},
        "output": _OUTPUT,
    },
}

# model parameters that must not be negative (frequencies and detunings may be)
_NONNEG_PARAMS = {"g", "gamma", "g1", "g2", "J", "coupling", "eta0", "kappa"}
_INT_PARAMS = {"n_tls", "n_donors", "m_acceptors", "n1", "n2", "fock_cutoff"}
#: (required, optional) sections per command
_SECTIONS = {
    "evolve": (("model", "evolution"), ("basis",)),
    "sweep": (("model", "evolution", "sweep"), ("basis",)),
    "energetics": (("calculator",), ()),
}


class ConfigError(Exception):
    """Raised with a list of human-readable violations."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def _path(parts) -> str:
    return ".".join(str(p) for p in parts) or "<root>"


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _model_violations(model: dict, sweeping: bool) -> list[str]:
    family = model.get("family")
    if family not in FAMILIES:
        return [f"model.family: unknown family {family!r}; accepted families: {', '.join(sorted(FAMILIES))}"]
    cls = FAMILIES[family]
    names = {f.name: f for f in fields(cls)}
    out = []
    sized = set(SIZE_FIELDS.get(family, ())) if sweeping else set()
    if sweeping and family not in SIZE_FIELDS:
        out.append(f"model.family: {family} has no ensemble size to sweep; sweepable: {', '.join(sorted(SIZE_FIELDS))}")
    for key, value in model.items():
        if key == "family":
            continue
        if key not in names:
            out.append(f"model.{key}: unknown parameter for {family}")
        elif key in sized:
            out.append(f"model.{key}: set by sweep.n_values, remove it from the model section")
        elif key == "site_energies":
            if not (isinstance(value, list) and len(value) >= 2 and all(map(_is_number, value))):
                out.append("model.site_energies: must be a list of at least two numbers")
        elif key in _INT_PARAMS:
            if not (isinstance(value, int) and not isinstance(value, bool) and value >= 1):
                out.append(f"model.{key}: must be an integer >= 1, got {value!r}")
        elif not _is_number(value):
            out.append(f"model.{key}: must be a number, got {value!r}")
        elif key in _NONNEG_PARAMS and value < 0:
            out.append(f"model.{key}: coupling must be >= 0, got {value!r}")
        elif key == "sigma_pulse" and value <= 0:
            out.append(f"model.{key}: must be > 0, got {value!r}")
    for f in fields(cls):
        required = f.default is MISSING and f.default_factory is MISSING
        if required and f.name not in model and f.name not in sized:
            out.append(f"model.{f.name}: required parameter of {family} is missing")
    return out


def validate_config(cfg) -> list[str]:
    """Every schema violation of ``cfg``, each prefixed with its dotted path."""
    if not isinstance(cfg, dict):
        return ["<root>: config must be a JSON object"]
    validator = jsonschema.Draft202012Validator(SCHEMA)
    out = [f"{_path(e.absolute_path)}: {e.message}"
           for e in sorted(validator.iter_errors(cfg), key=lambda e: list(map(str, e.absolute_path)))]
    command = cfg.get("command")
    if command in _SECTIONS:
        required, optional = _SECTIONS[command]
        for section in required:
            if section not in cfg:
                out.append(f"{section}: required for command {command!r}")
        for section in sorted(set(cfg) - set(required) - set(optional) - {"version", "command", "output"}):
            if section in SCHEMA["properties"]:
                out.append(f"{section}: not used by command {command!r}")
    if command in ("evolve", "sweep") and isinstance(cfg.get("model"), dict):
        out.extend(_model_violations(cfg["model"], command == "sweep"))
    calc = cfg.get("calculator")
    if command == "energetics" and isinstance(calc, dict) and calc.get("formula") in _CALCULATORS:
        props, required = _CALCULATORS[calc["formula"]]
        sub = {"type": "object", "additionalProperties": False, "required": required,
               "properties": {"formula": {}, **props}}
        for e in jsonschema.Draft202012Validator(sub).iter_errors(calc):
            out.append(f"{_path(['calculator', *e.absolute_path])}: {e.message}")
        if calc["formula"] == "ev_to_kwh" and ("molar_mass" in calc) == ("composition" in calc):
            out.append("calculator: give exactly one of molar_mass or composition (a molar-mass basis is required)")
        if calc["formula"] == "nuclear_transfer_rate" and ("g_coupling" in calc) == ("b_field" in calc):
            out.append("calculator: give exactly one of g_coupling or b_field")
    return out


# -- loading --------------------------------------------------------------------


def load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read config ({exc.strerror})"]) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}"]) from None


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(cfg: dict, assignment: str) -> None:
    """Apply one ``dotted.path=value`` override in place.

    Values are parsed as JSON when possible (``0.05``, ``true``, ``[1,2]``)
    and kept as strings otherwise. Integer segments index into lists.
    """
    if "=" not in assignment:
        raise ConfigError([f"--set {assignment!r}: expected dotted.path=value"])
    key, raw = assignment.split("=", 1)
    parts = key.strip().split(".")
    if not all(parts):
        raise ConfigError([f"--set {assignment!r}: empty path segment"])
    node = cfg
    for i, part in enumerate(parts[:-1]):
        if isinstance(node, list):
            try:
                node = node[int(part)]
            except (ValueError, IndexError):
                raise ConfigError([f"--set {key}: no list element {part!r} at {_path(parts[:i])}"]) from None
        elif isinstance(node, dict):
            node = node.setdefault(part, {})
        else:
            raise ConfigError([f"--set {key}: {_path(parts[:i])} is not a section"])
    last = parts[-1]
    if isinstance(node, list):
        try:
            node[int(last)] = _parse_value(raw)
        except (ValueError, IndexError):
            raise ConfigError([f"--set {key}: no list element {last!r}"]) from None
    elif isinstance(node, dict):
        node[last] = _parse_value(raw)
    else:
        raise ConfigError([f"--set {key}: {_path(parts[:-1])} is not a section"])


# -- execution ------------------------------------------------------------------


def _noise(ev: dict) -> tuple[Noise, ...]:
    return tuple(Noise(n["kind"], float(n["rate"]), n.get("ensemble")) for n in ev.get("noise", ()))


def _sink(ev: dict) -> Sink | None:
    s = ev.get("sink")
    return None if s is None else Sink(s["ensemble"], int(s["site"]), float(s["rate"]))


def _initial(value):
    if isinstance(value, list):
        return [complex(*v) if isinstance(v, list) else v for v in value]
    return value


def build_request(cfg: dict) -> EvolutionRequest:
    model = model_from_dict(cfg["model"])
    ev = cfg["evolution"]
    reduction = cfg.get("basis", {}).get("reduction", FULL_TENSOR)
    if reduction == "auto":
        reduction = FULL_TENSOR
    kw = {k: ev[k] for k in ("method", "rk4_step_scale", "max_open_dim") if k in ev}
    return EvolutionRequest(
        model=model,
        t_max=float(ev["t_max"]),
        dt_output=float(ev["dt_output"]),
        initial_state=_initial(ev.get("initial_state", "all_ground")),
        basis=default_basis(model, reduction),
        noise=_noise(ev),
        observables=tuple(ev.get("observables", ())),
        sink=_sink(ev),
        **kw,
    )


def build_sweep(cfg: dict) -> SweepRequest:
    ev, sw = cfg["evolution"], cfg["sweep"]
    fixed = {k: v for k, v in cfg["model"].items() if k != "family"}
    if "site_energies" in fixed:
        fixed["site_energies"] = tuple(fixed["site_energies"])
    template = RunTemplate(
        t_max=float(ev["t_max"]),
        dt_output=float(ev["dt_output"]),
        initial_state=ev.get("initial_state", "all_ground"),
        method=ev.get("method", "eigendecomposition"),
        noise=_noise(ev),
        observable=sw.get("observable"),
        reduction=cfg.get("basis", {}).get("reduction", "auto"),
        sink=_sink(ev),
        rk4_step_scale=float(ev.get("rk4_step_scale", 0.01)),
    )
    return SweepRequest(cfg["model"]["family"], fixed, tuple(sw["n_values"]), sw["metric"], template)


def run_energetics(calc: dict) -> dict:
    """Evaluate one calculator section to ``{formula, value, unit, ...}``."""
    formula = calc["formula"]
    args = {k: v for k, v in calc.items() if k != "formula"}
    extra: dict = {}
    if formula == "ev_to_kwh":
        comp = args.get("composition")
        inp = en.EnergyDensityInput(args["energy_per_atom"], args.get("molar_mass"),
                                    None if comp is None else tuple(map(tuple, comp)))
        value = en.energy_density(inp)
        extra["molar_mass"] = inp.basis_molar_mass
    elif formula == "kwh_to_ev":
        value = en.kwh_per_kg_to_ev_per_atom(args["kwh_per_kg"], args["molar_mass"])
    elif formula == "nuclear_transfer_rate":
        published = args.pop("published_value", en.PUBLISHED_D2_HE_RATE)
        if "b_field" in args:
            args["g_coupling"] = en.magnetic_coupling(args.pop("b_field"))
        report = en.nuclear_rate_report(en.NuclearTransferInput(**args), published)
        value = report.pop("value")
        report.pop("unit")
        extra.update(report)
    else:
        value = getattr(en, formula)(**args)
    return {"formula": formula, "value": value, "unit": _UNITS[formula], **extra}


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError([f"{THREADS_ENV}={raw!r}: expected a positive integer"]) from None


# -- formatting -----------------------------------------------------------------


def format_csv_float(v: float) -> str:
    """9 significant digits; always recognisably a float (``1`` becomes ``1.0``)."""
    s = f"{float(v):.9g}"
    if not any(c in s for c in ".eni"):  # e-notation, inf, nan
        s += ".0"
    return s


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_csv_float(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def _plain(obj):
    """Convert numpy scalars and tuples into JSON-native types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else str(obj)
    return obj


def _json(doc) -> str:
    return json.dumps(_plain(doc), indent=2, allow_nan=False) + "\n"


def render(command: str, result, fmt: str) -> str:
    if command == "evolve":
        traj = result
        if fmt == "csv":
            rows = ([float(t), *map(float, row)] for t, row in zip(traj.times, traj.values))
            return _csv(["time", *traj.labels], rows)
        return _json({"times": traj.times.tolist(),
                      "records": {label: traj[label].tolist() for label in traj.labels},
                      "metadata": traj.metadata})
    if command == "sweep":
        fit = result
        if fmt == "csv":
            return _csv(["N", fit.metric], ([n, float(v)] for n, v in fit.samples))
        return _json({"metric": fit.metric,
                      "samples": [{"N": n, "value": v} for n, v in fit.samples],
                      "summary": {"exponent": fit.exponent, "exponent_stderr": fit.exponent_stderr,
                                  "r_squared": fit.r_squared, "prefactor": fit.prefactor,
                                  "label": fit.label}})
    if fmt == "csv":
        keys = [k for k in result if k not in ("formula", "unit")]
        return _csv(["formula", "unit", *keys], [[result["formula"], result["unit"],
                                                  *(float(result[k]) for k in keys)]])
    return _json(result)


def write_atomic(path: str, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".dickelab-", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- entry point ----------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dickelab", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name, text in (("evolve", "run one time evolution"), ("sweep", "run an ensemble-size sweep"),
                       ("energetics", "evaluate an energetics calculator"),
                       ("validate", "check a config without running it")):
        sp_ = sub.add_parser(name, help=text)
        sp_.add_argument("--config", required=True, help="path to a JSON config")
        sp_.add_argument("--set", action="append", default=[], metavar="PATH=VALUE",
                         help="override a config value, e.g. model.g=0.05 (repeatable)")
        if name != "validate":
            sp_.add_argument("--output", help="output file (default: config output.path or stdout)")
            sp_.add_argument("--format", choices=("csv", "json"), help="output format")
    return p


def _prepare(args) -> dict:
    cfg = load_config(args.config)
    cfg = copy.deepcopy(cfg)
    for assignment in args.set:
        if not isinstance(cfg, dict):
            break
        apply_override(cfg, assignment)
    return cfg


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = _parser().parse_args(argv)
    try:
        cfg = _prepare(args)
        violations = validate_config(cfg)
        if args.subcommand == "validate":
            for v in violations:
                print(v, file=stderr)
            return EXIT_CONFIG if violations else EXIT_OK
        if not violations and cfg["command"] != args.subcommand:
            violations = [f"command: config is for {cfg['command']!r}, not {args.subcommand!r}"]
        if violations:
            raise ConfigError(violations)
        out_cfg = cfg.get("output", {})
        fmt = args.format or out_cfg.get("format") or ("csv" if args.subcommand == "evolve" else "json")
        path = args.output or out_cfg.get("path")
        try:
            if args.subcommand == "evolve":
                result = evolve(build_request(cfg))
            elif args.subcommand == "sweep":
                result = run_sweep(build_sweep(cfg), max_workers=_threads())
            else:
                result = run_energetics(cfg["calculator"])
        except (NumericalError, MetricError):
            raise
        except (DickeLabError, ValueError, TypeError) as exc:
            raise ConfigError([str(exc)]) from None
        text = render(args.subcommand, result, fmt)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=stderr)
        return EXIT_CONFIG
    except (NumericalError, MetricError) as exc:
        print(f"numerical error: {exc}", file=stderr)
        return EXIT_NUMERICAL
    if path:
        write_atomic(path, text)
    else:
        stdout.write(text)
        stdout.flush()
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
