"""Scenario configuration files.

The primary format is INI-style text (sections with ``key = value``).  The
same structure is accepted as JSON, as an object of section objects.  Errors
carry the line of the offending key when it is known.
"""

from __future__ import annotations

import configparser
import json
import re
from importlib import resources
from pathlib import Path

import numpy as np

from .electronic import catalog
from .truncation import Scenario
from .wavepacket import cond1_defects

__all__ = ["ConfigError", "load_config", "parse_config", "builtin_scenarios", "scenario_path"]


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is the 1-based line number when known."""

    def __init__(self, message: str, path=None, line: int | None = None):
        self.path, self.line = path, line
        where = f"{path}:{line}: " if path is not None and line else (f"{path}: " if path else "")
        super().__init__(where + message)


# key -> (section, Scenario field, converter)
_FLOAT, _INT = "float", "int"
_KEYS = {
    ("scenario", "name"): ("name", str),
    ("scenario", "T"): ("T", _FLOAT),
    ("model", "name"): ("model", str),
    ("initial", "a"): ("a0", _FLOAT),
    ("initial", "eta"): ("eta0", _FLOAT),
    ("initial", "A"): ("A0", complex),
    ("initial", "B"): ("B0", complex),
    ("initial", "S"): ("S0", _FLOAT),
    ("initial", "c0"): ("c0", "c0"),
    ("expansion", "n_max"): ("n_max", _INT),
    ("expansion", "nt"): ("nt", _INT),
    ("expansion", "t_order"): ("t_order", _INT),
    ("expansion", "w_order"): ("w_order", _INT),
    ("expansion", "quad_order"): ("quad_order", _INT),
    ("expansion", "w_half_width"): ("w_half_width", _FLOAT),
    ("expansion", "w_step"): ("w_step", _FLOAT),
    ("expansion", "w_ghost"): ("w_ghost", _INT),
    ("expansion", "flow_dt"): ("flow_dt", _FLOAT),
    ("cutoff", "b0"): ("b0", _FLOAT),
    ("cutoff", "b1"): ("b1", _FLOAT),
    ("sweep", "eps"): ("eps_list", "floats"),
    ("reference", "dt"): ("dt_reference", _FLOAT),
    ("reference", "halving_tol"): ("halving_tol", _FLOAT),
    ("reference", "max_halvings"): ("max_halvings", _INT),
    ("reference", "box_margin"): ("box_margin", _FLOAT),
}
_EXTRA = {("sweep", "N"), ("sweep", "g"), ("localization", "b"), ("localization", "eps"),
          ("output", "dir")}
_PRESETS = {"ground": [1.0], "first": [0.0, 1.0], "superposition": [2 ** -0.5, 2 ** -0.5]}


def _line_index(text: str) -> dict:
    """Map ``(section, key)`` to the line where it is set."""
    out, sec = {}, None
    for i, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            sec = m.group(1).strip()
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", s)
        if m and sec is not None:
            out[(sec, m.group(1).strip())] = i
    return out


def _convert(kind, value):
    if isinstance(value, (list, tuple)):
        if kind == "floats":
            return [float(x) for x in value]
        if kind == "c0":
            return [complex(x) for x in value]
        raise ValueError(f"unexpected list {value!r}")
    if kind == _FLOAT:
        return float(value)
    if kind == _INT:
        v = float(value)
        if v != int(v):
            raise ValueError(f"expected an integer, got {value!r}")
        return int(v)
    if kind == "floats":
        return [float(x) for x in re.split(r"[,\s]+", str(value).strip()) if x]
    if kind == complex:
        return complex(str(value).replace(" ", "").replace("i", "j"))
    if kind == "c0":
        s = str(value).strip()
        if s in _PRESETS:
            return list(_PRESETS[s])
        return [complex(x.replace("i", "j")) for x in re.split(r"[,\s]+", s) if x]
    return str(value).strip()


def _model_value(value: str):
    s = str(value).strip()
    try:
        return float(s)
    except ValueError:
        pass
    if "," in s:
        return [float(x) for x in s.split(",")]
    return s


def parse_config(data: dict, path=None, lines: dict | None = None) -> tuple[Scenario, dict]:
    """Build a :class:`Scenario` from ``{section: {key: value}}``.

    Returns the scenario and a dict of extra settings (``N``, ``g``,
    localization radius and ``eps`` list, output directory).
    """
    lines = lines or {}
    kw: dict = {}
    extra: dict = {}
    model_params: dict = {}
    for sec, entries in data.items():
        for key, value in entries.items():
            line = lines.get((sec, key))
            if sec == "model" and key != "name":
                model_params[key] = _model_value(value) if isinstance(value, str) else value
                continue
            entry = _KEYS.get((sec, key))
            try:
                if entry is not None:
                    kw[entry[0]] = _convert(entry[1], value)
                elif (sec, key) in _EXTRA:
                    kind = {"N": _INT, "eps": "floats", "dir": str}.get(key, _FLOAT)
                    extra[f"{sec}.{key}"] = _convert(kind, value)
                else:
                    raise ConfigError(f"unknown key [{sec}] {key}", path, line)
            except (TypeError, ValueError) as err:
                if isinstance(err, ConfigError):
                    raise
                raise ConfigError(f"[{sec}] {key}: {err}", path, line) from None
    for req in ("name", "model", "a0", "eta0", "c0"):
        if req not in kw:
            sec, key = next(k for k, v in _KEYS.items() if v[0] == req)
            raise ConfigError(f"missing required key [{sec}] {key}", path)
    if kw["model"] not in catalog:
        raise ConfigError(f"unknown model {kw['model']!r}; choose from {sorted(catalog)}", path,
                          lines.get(("model", "name")))
    kw["model_params"] = model_params
    c0 = np.asarray(kw["c0"], dtype=complex)
    if abs(float(np.sum(np.abs(c0) ** 2)) - 1.0) > 1e-10:
        raise ConfigError(f"initial coefficients must have unit norm, got {np.sum(np.abs(c0) ** 2):.12g}",
                          path, lines.get(("initial", "c0")))
    kw["c0"] = [complex(x) if x.imag else float(x.real) for x in c0]
    A, B = kw.get("A0", 1.0), kw.get("B0", 1.0)
    sym, herm = cond1_defects([[A]], [[B]])
    if max(sym, herm) > 1e-12:
        raise ConfigError("initial A, B violate the compatibility condition "
                          f"A^t B - B^t A = 0, A^* B + B^* A = 2I (defects {sym:.3g}, {herm:.3g})",
                          path, lines.get(("initial", "B"), lines.get(("initial", "A"))))
    if kw.get("b0", 1.4) >= kw.get("b1", 2.0):
        raise ConfigError("cutoff radii must satisfy b0 < b1", path, lines.get(("cutoff", "b0")))
    if kw.get("b1", 2.0) > kw.get("w_half_width", 2.0) + 1e-12:
        raise ConfigError("cutoff radius b1 exceeds the w-grid half width", path, lines.get(("cutoff", "b1")))
    if kw.get("T", 1.0) <= 0:
        raise ConfigError("T must be positive", path, lines.get(("scenario", "T")))
    for e in kw.get("eps_list", []):
        if e <= 0:
            raise ConfigError("eps values must be positive", path, lines.get(("sweep", "eps")))
    return Scenario(**kw), extra


def load_config(path) -> tuple[Scenario, dict]:
    """Read an INI (or JSON) scenario file.

    Raises
    ------
    FileNotFoundError
        When the file does not exist.
    ConfigError
        On syntax or validation errors.
    """
    path = Path(path)
    text = path.read_text()
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(f"invalid JSON: {err.msg}", path, err.lineno) from None
        if not isinstance(data, dict) or not all(isinstance(v, dict) for v in data.values()):
            raise ConfigError("JSON config must be an object of section objects", path)
        return parse_config(data, path)
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as err:
        line = getattr(err, "lineno", None)
        msg = str(err).splitlines()[0]
        raise ConfigError(f"syntax error: {msg}", path, line) from None
    data = {s: dict(cp[s]) for s in cp.sections()}
    return parse_config(data, path, _line_index(text))


def builtin_scenarios() -> list:
    """Names of the scenario files shipped with the package."""
    root = resources.files("hagprop") / "scenarios"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def scenario_path(name: str) -> Path:
    p = resources.files("hagprop") / "scenarios" / f"{name}.cfg"
    if not p.is_file():
        raise FileNotFoundError(f"no built-in scenario {name!r}; available: {builtin_scenarios()}")
    return Path(str(p))
