"""
Configuration documents and figure presets.

A configuration is a YAML mapping.  Every frequency carries a unit tag, either
as a string (``"4.3 Gamma"``, ``"-31.7 MHz"``) or as ``{value: ..., unit: ...}``;
MHz values need ``units.gamma_mhz``.  Example::

    units:    {gamma_mhz: 6.0666}
    levels:   {delta23: 5 Gamma, delta34: 10 Gamma}
    coupling: {g_sqrt_n: 4.3 Gamma}
    cavity:   {kappa: 2 Gamma, delta_c: 0 Gamma}
    scan:     {dp_min: -30 Gamma, dp_max: 15 Gamma, points: 4501}

Unknown keys are rejected and every error names the offending key path.
"""

from __future__ import annotations

import copy
import math
import re
from dataclasses import dataclass, field
from typing import Any, Mapping

import yaml

from .errors import ValidationError
from .fit import parameter_names
from .model import (
    CavityParams,
    CollectiveCoupling,
    FrequencyQuantity,
    Grid,
    SystemConfig,
    Unit,
    build_from_splittings,
    convert,
)

__all__ = [
    "ConfigError",
    "Document",
    "FitSettings",
    "Preset",
    "PRESETS",
    "parse_config",
    "parse_document",
    "load_document",
    "preset",
    "preset_document",
    "parse_frequency",
    "dump_document",
]

RB85_D2_GAMMA_MHZ = 6.0666  # natural linewidth Gamma/2pi of the 85Rb D2 line; not a measured value of this setup


class ConfigError(ValidationError):
    """Malformed or semantically invalid configuration (CLI exit code 2)."""


_SCHEMA = {
    "units": {"gamma_mhz"},
    "levels": {"delta23", "delta34", "gammas"},
    "coupling": {"g_sqrt_n", "per_transition"},
    "cavity": {"kappa", "delta_c", "drive"},
    "scan": {"dp_min", "dp_max", "points"},
    "fit": {"free", "initial", "bounds", "max_iter"},
}
_FREQ_RE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-zΓγ]+)\s*$")


@dataclass(frozen=True)
class FitSettings:
    free: tuple[str, ...] = ("G_common", "kappa", "delta_c")
    initial: Mapping[str, float] = field(default_factory=dict)
    bounds: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    max_iter: int = 500


@dataclass(frozen=True)
class Document:
    system: SystemConfig
    fit: FitSettings
    gamma_mhz: float | None
    raw: Mapping[str, Any]


def parse_frequency(value, path: str, gamma_mhz: float | None, bare_unit: Unit | None = None) -> float:
    """Frequency in Gamma units from a unit-tagged config value."""
    if isinstance(value, Mapping):
        extra = set(value) - {"value", "unit"}
        if extra:
            raise ConfigError(path, f"unknown key(s) {sorted(extra)}")
        if "value" not in value or "unit" not in value:
            raise ConfigError(path, "frequency mapping needs 'value' and 'unit'")
        number, unit_text = value["value"], value["unit"]
        if isinstance(number, bool) or not isinstance(number, (int, float)):
            raise ConfigError(f"{path}.value", f"expected a number, got {number!r}")
    elif isinstance(value, str):
        m = _FREQ_RE.match(value)
        if m:
            number, unit_text = float(m.group(1)), m.group(2)
        elif bare_unit is not None:
            try:
                number, unit_text = float(value), bare_unit.value
            except ValueError:
                raise ConfigError(path, f"cannot parse frequency {value!r}") from None
        else:
            raise ConfigError(path, f"cannot parse frequency {value!r} (expected e.g. '4.3 Gamma' or '10 MHz')")
    elif isinstance(value, (int, float)) and not isinstance(value, bool):
        if bare_unit is None:
            raise ConfigError(path, f"unit tag required (write e.g. '{value} Gamma' or '{value} MHz')")
        number, unit_text = value, bare_unit.value
    else:
        raise ConfigError(path, f"expected a unit-tagged frequency, got {value!r}")
    try:
        unit = Unit.parse(str(unit_text))
    except ValidationError as exc:
        raise ConfigError(path, str(exc)) from None
    number = float(number)
    if not math.isfinite(number):
        raise ConfigError(path, "must be finite")
    if unit is Unit.GAMMA:
        return number
    if gamma_mhz is None:
        raise ConfigError("units.gamma_mhz", f"required to convert {path} from MHz")
    return convert(FrequencyQuantity(number, unit), Unit.GAMMA, gamma_mhz).value


def _section(doc: Mapping, name: str, required: bool) -> Mapping:
    if name not in doc:
        if required:
            raise ConfigError(name, "missing required section")
        return {}
    sec = doc[name]
    if sec is None:
        sec = {}
    if not isinstance(sec, Mapping):
        raise ConfigError(name, "expected a mapping")
    unknown = set(sec) - _SCHEMA[name]
    if unknown:
        raise ConfigError(f"{name}.{sorted(unknown)[0]}", "unknown key")
    return sec


def _require(sec: Mapping, section: str, key: str):
    if key not in sec or sec[key] is None:
        raise ConfigError(f"{section}.{key}", "missing required key")
    return sec[key]


def _number(value, path: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    v = float(value)
    if not math.isfinite(v) or (positive and v <= 0):
        raise ConfigError(path, f"must be {'> 0' if positive else 'finite'}, got {value!r}")
    return v


def parse_document(doc: Mapping) -> Document:
    """Validate a configuration mapping and convert it to Gamma units."""
    if not isinstance(doc, Mapping):
        raise ConfigError("", "configuration must be a mapping at the top level")
    unknown = set(doc) - set(_SCHEMA)
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown section")

    units = _section(doc, "units", False)
    gamma_mhz = None
    if units.get("gamma_mhz") is not None:
        gamma_mhz = _number(units["gamma_mhz"], "units.gamma_mhz", positive=True)

    def freq(value, path):
        return parse_frequency(value, path, gamma_mhz)

    levels = _section(doc, "levels", True)
    d23 = freq(_require(levels, "levels", "delta23"), "levels.delta23")
    d34 = freq(_require(levels, "levels", "delta34"), "levels.delta34")
    gammas = (1.0, 1.0, 1.0)
    if levels.get("gammas") is not None:
        raw = levels["gammas"]
        if not isinstance(raw, list) or len(raw) != 3:
            raise ConfigError("levels.gammas", "expected a list of 3 decay rates")
        gammas = tuple(freq(g, f"levels.gammas[{i}]") for i, g in enumerate(raw))
    try:
        ladder = build_from_splittings(d23, d34, gammas)
    except ValidationError as exc:
        raise ConfigError(f"levels.{exc.field}", str(exc).split(": ", 1)[-1]) from None

    coup = _section(doc, "coupling", True)
    has_common = coup.get("g_sqrt_n") is not None
    has_per = coup.get("per_transition") is not None
    if has_common == has_per:
        raise ConfigError("coupling.g_sqrt_n", "give exactly one of coupling.g_sqrt_n or coupling.per_transition")
    if has_common:
        g = freq(coup["g_sqrt_n"], "coupling.g_sqrt_n")
        strengths = (g,) * ladder.size
        path = "coupling.g_sqrt_n"
    else:
        raw = coup["per_transition"]
        if not isinstance(raw, list) or len(raw) != ladder.size:
            raise ConfigError("coupling.per_transition", f"expected a list of {ladder.size} couplings")
        strengths = tuple(freq(v, f"coupling.per_transition[{i}]") for i, v in enumerate(raw))
        path = "coupling.per_transition"
    if any(s < 0 for s in strengths):
        raise ConfigError(path, "coupling strengths must be >= 0")
    coupling = CollectiveCoupling(strengths)

    cav = _section(doc, "cavity", True)
    kappa = freq(_require(cav, "cavity", "kappa"), "cavity.kappa")
    if kappa <= 0:
        raise ConfigError("cavity.kappa", f"must be > 0, got {cav['kappa']!r}")
    delta_c = freq(_require(cav, "cavity", "delta_c"), "cavity.delta_c")
    drive = 1.0
    if cav.get("drive") is not None:
        drive = _number(cav["drive"], "cavity.drive", positive=True)
    cavity = CavityParams(kappa, delta_c, drive)

    scan = _section(doc, "scan", False)
    if scan:
        lo = freq(_require(scan, "scan", "dp_min"), "scan.dp_min")
        hi = freq(_require(scan, "scan", "dp_max"), "scan.dp_max")
        points = scan.get("points", 2001)
        if isinstance(points, bool) or not isinstance(points, int) or points < 2:
            raise ConfigError("scan.points", f"expected an integer >= 2, got {points!r}")
        if not lo < hi:
            raise ConfigError("scan.dp_max", "scan.dp_min must be < scan.dp_max")
        grid = Grid(lo, hi, points)
    else:
        grid = _auto_grid(ladder.offsets, coupling.strengths, kappa, delta_c)

    fit = _parse_fit(_section(doc, "fit", False), ladder.size, gamma_mhz)
    return Document(SystemConfig(ladder, coupling, cavity, grid), fit, gamma_mhz, copy.deepcopy(dict(doc)))


def _auto_grid(offsets, strengths, kappa, delta_c) -> Grid:
    g = math.sqrt(sum(s * s for s in strengths))
    margin = 2.0 * g + 10.0 * kappa + 5.0
    lo = min(min(offsets), delta_c) - margin
    hi = max(max(offsets), delta_c) + margin
    step = min(0.01, kappa / 100.0)
    return Grid(lo, hi, min(int(round((hi - lo) / step)) + 1, 200001))


def _parse_fit(sec: Mapping, n_transitions: int, gamma_mhz) -> FitSettings:
    if not sec:
        return FitSettings()
    names = parameter_names(n_transitions)
    unitless = {"scale"}

    def value(name, v, path):
        if name not in names:
            raise ConfigError(path, f"unknown fit parameter (expected one of {list(names)})")
        if name in unitless:
            return _number(v, path)
        return parse_frequency(v, path, gamma_mhz)

    free = FitSettings.free
    if "free" in sec:
        if not isinstance(sec["free"], list) or not sec["free"]:
            raise ConfigError("fit.free", "expected a non-empty list of parameter names")
        for i, n in enumerate(sec["free"]):
            if n not in names:
                raise ConfigError(f"fit.free[{i}]", f"unknown fit parameter {n!r}")
        free = tuple(sec["free"])
    initial = {}
    for name, v in (sec.get("initial") or {}).items():
        initial[name] = value(name, v, f"fit.initial.{name}")
    bounds = {}
    for name, pair in (sec.get("bounds") or {}).items():
        path = f"fit.bounds.{name}"
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError(path, "expected [lower, upper]")
        bounds[name] = (value(name, pair[0], f"{path}[0]"), value(name, pair[1], f"{path}[1]"))
    max_iter = sec.get("max_iter", 500)
    if isinstance(max_iter, bool) or not isinstance(max_iter, int) or max_iter < 1:
        raise ConfigError("fit.max_iter", "expected a positive integer")
    return FitSettings(free, initial, bounds, max_iter)


def load_document(text: str) -> Mapping:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"syntax error: {exc}") from None
    if doc is None:
        raise ConfigError("", "empty configuration")
    return doc


def parse_config(text: str) -> SystemConfig:
    """Parse YAML text into a validated :class:`SystemConfig` (Gamma units)."""
    return parse_document(load_document(text)).system


def dump_document(doc: Mapping) -> str:
    return yaml.safe_dump(dict(doc), sort_keys=False, default_flow_style=None, allow_unicode=True)


# ---------------------------------------------------------------------------
# presets


@dataclass(frozen=True)
class Preset:
    name: str
    source: str  # figure whose caption supplies the values
    document: Mapping[str, Any]
    g_variants: tuple[float, ...] = ()
    panels: Mapping[str, str] = field(default_factory=dict)  # panel -> cavity detuning
    notes: str = ""


def _theory(delta_c: str, g: str | None, dp_min=-30, dp_max=15, points=4501):
    return {
        "levels": {"delta23": "5 Gamma", "delta34": "10 Gamma", "gammas": ["1 Gamma", "1 Gamma", "1 Gamma"]},
        "coupling": {"g_sqrt_n": g},
        "cavity": {"kappa": "2 Gamma", "delta_c": delta_c},
        "scan": {"dp_min": f"{dp_min} Gamma", "dp_max": f"{dp_max} Gamma", "points": points},
    }


_FIG2_PANELS = {"a": "0 Gamma", "b": "-5 Gamma", "c": "-10 Gamma", "d": "-12.5 Gamma"}

PRESETS: dict[str, Preset] = {}
for _p, _dc in _FIG2_PANELS.items():
    PRESETS[f"fig2{_p}"] = Preset(
        f"fig2{_p}",
        f"Fig. 2({_p})",
        _theory(_dc, "4.3 Gamma"),
        g_variants=(2.3, 3.3, 4.3),
        notes="transmission vs probe detuning; curves for g_sqrt_n in {2.3, 3.3, 4.3} Gamma",
    )
PRESETS["fig3"] = Preset(
    "fig3",
    "Fig. 3",
    _theory("0 Gamma", "10 Gamma", dp_min=-40, dp_max=30, points=7001),
    notes="normal-mode eigenvalues vs cavity detuning over [-40, 20] Gamma",
)
PRESETS["fig6"] = Preset(
    "fig6",
    "Fig. 6",
    _theory("0 Gamma", "4.5 Gamma"),
    notes="real and imaginary susceptibility vs probe detuning",
)
PRESETS["rb85-d2"] = Preset(
    "rb85-d2",
    "Fig. 5",
    {
        "units": {"gamma_mhz": RB85_D2_GAMMA_MHZ},
        "levels": {"delta23": "31.7 MHz", "delta34": "60.3 MHz"},
        "coupling": {"g_sqrt_n": None},
        "cavity": {"kappa": "10 MHz", "delta_c": "0 MHz"},
        "scan": {"dp_min": "-250 MHz", "dp_max": "150 MHz", "points": 8001},
    },
    panels={"a": "0 MHz", "b": "0 MHz", "c": "-31.7 MHz", "d": "-78.1 MHz"},
    notes=(
        "85Rb F=2 -> F'=1,2,3 with F'=3 at zero detuning. g_sqrt_n is not published and must be supplied. "
        "gamma_mhz=6.0666 is the natural D2 linewidth, an implementer default. kappa is taken as the half-width. "
        "Panel (a) is the empty cavity (g_sqrt_n forced to 0). Panel (d) uses the caption value -78.1 MHz; the body "
        "text quotes -71.8 MHz and the midpoint of F'=1 and F'=2 is -76.15 MHz."
    ),
)


def preset_document(name: str, g_sqrt_n: str | float | None = None, panel: str | None = None) -> dict:
    """Raw configuration mapping of a preset, with optional coupling and panel."""
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    p = PRESETS[name]
    doc = copy.deepcopy(dict(p.document))
    if panel is not None:
        if not p.panels:
            raise ConfigError("panel", f"preset {name!r} has no panels")
        if panel not in p.panels:
            raise ConfigError("panel", f"unknown panel {panel!r} for {name!r}; available: {', '.join(p.panels)}")
        doc["cavity"]["delta_c"] = p.panels[panel]
        if name == "rb85-d2" and panel == "a":
            g_sqrt_n = "0 MHz"
    if g_sqrt_n is not None:
        doc["coupling"] = {"g_sqrt_n": g_sqrt_n if isinstance(g_sqrt_n, str) else f"{float(g_sqrt_n)!r} Gamma"}
    return doc


def preset(name: str, g_sqrt_n: str | float | None = None, panel: str | None = None) -> SystemConfig:
    """:class:`SystemConfig` of a named preset.

    ``rb85-d2`` leaves the collective coupling to the caller; a missing value
    raises :class:`ConfigError` naming ``coupling.g_sqrt_n``.
    """
    return parse_document(preset_document(name, g_sqrt_n, panel)).system
