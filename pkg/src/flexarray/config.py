"""Experiment configuration: YAML loading, overrides, validation and unit conversion.

Config files use degrees, GHz and millimetres; everything handed to the
library is SI with angles in radians.  Unknown keys are rejected.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import jsonschema
import numpy as np
import yaml

from .errors import ConfigError, FlexArrayError
from .fields import FAR_FIELD_RADIUS, SynthesisMode
from .geometry import FOLD_LIMIT, SPEED_OF_LIGHT, SUBSTRATE_EPS_R, ArraySpec, FoldSpec, patch_dimensions
from .link import Modulation
from .modem import MIN_BITS

# the five fold states of the reference study, degrees
SCENARIOS = {
    "unfolded": (0.0, 0.0),
    "x9,y45": (9.0, 45.0),
    "x9,y90": (9.0, 90.0),
    "x45,y45": (45.0, 45.0),
    "x15,y45": (15.0, 45.0),
}

DEFAULTS = {
    "mode": "physical",
    "threads": 1,
    "array": {
        "rows": 4,
        "cols": 4,
        "freq_ghz": 100.0,
        "eps_r": SUBSTRATE_EPS_R,
        "substrate_height_mm": 0.1,
        "patch_width_mm": None,
        "patch_length_mm": None,
        "pitch_x_mm": None,
        "pitch_y_mm": None,
        "excitations": 1.0,
        "field_scale": 1.0,
        "port_voltage": None,
        "calibrate_ohm": 50.0,
        "anchor": "edge",
    },
    "folds_deg": [list(v) for v in SCENARIOS.values()],
    "pattern": {
        "theta_deg": {"start": -90.0, "stop": 90.0, "step": 1.0},
        "phi_deg": [0.0, 90.0],
        "radius_m": FAR_FIELD_RADIUS,
        "format": "both",
    },
    "sweep": {
        "xi1_deg": {"start": -90.0, "stop": 90.0, "step": 15.0},
        "xi2_deg": {"start": -90.0, "stop": 90.0, "step": 15.0},
    },
    "link": {
        "p_t_max_dbm": 10.0,
        "distance_m": 4.5,
        "bandwidth_ghz": 5.0,
        "noise_figure_db": 10.0,
        "p_noise_tx_received_dbm": -90.0,
        "p_noise_out_dbm": None,
        "z_pa_ohm": 50.0,
        "g_t_dbi": None,
        "g_r_dbi": None,
        "p_in_ratio": 1.0,
        "x_ant_ohm": 0.0,
        "strict_paper": False,
    },
    "modem": {
        "modulations": [4, 16, 64],
        "snr_db": {"start": 0.0, "stop": 30.0, "step": 2.0},
        "n_bits": 1_000_000,
        "seed": 0,
    },
    "align": {
        "targets_deg": [[30.0, 0.0]],
        "xi1_bounds_deg": [-180.0, 180.0],
        "xi2_bounds_deg": [-180.0, 180.0],
        "coarse_step_deg": 5.0,
        "resolution_deg": 0.1,
        "mismatch_penalty": False,
    },
    "squint": {
        "fold_deg": [15.0, 45.0],
        "freqs_ghz": {"start": 97.5, "stop": 102.5, "step": 1.0},
    },
    "outputs": {"prefix": ""},
}


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    """Parse a JSON schema shipped in ``flexarray/schemas``."""
    text = resources.files("flexarray").joinpath("schemas", name).read_text(encoding="utf-8")
    return json.loads(text)


def _merge(base: dict, override: dict, path="") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key '{where}'")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


def parse_override(item: str):
    """Split ``a.b.c=value`` into a key path and a YAML-parsed value."""
    key, sep, raw = item.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override '{item}' is not of the form key=value")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as exc:
        raise ConfigError(f"override '{item}': {exc}") from None
    return key.strip().split("."), value


def apply_overrides(raw: dict, overrides) -> dict:
    raw = copy.deepcopy(raw)
    for item in overrides:
        path, value = parse_override(item)
        node = raw
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override '{item}': '{part}' is not a section")
        node[path[-1]] = value
    return raw


def load_raw(path=None) -> dict:
    """Read a YAML (or JSON) config file; ``None`` gives an empty mapping."""
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must contain a mapping at top level")
    return data


def validate_raw(raw: dict) -> dict:
    """Schema-check ``raw`` and merge it over the defaults."""
    validator = jsonschema.Draft202012Validator(load_schema("config.schema.json"))
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        first = errors[0]
        where = ".".join(str(p) for p in first.absolute_path) or "<root>"
        if first.validator == "additionalProperties":
            raise ConfigError(f"unknown config key at '{where}': {first.message}")
        raise ConfigError(f"invalid config value at '{where}': {first.message}")
    return _merge(DEFAULTS, raw)


def expand_grid(value, name: str) -> np.ndarray:
    """List, scalar or inclusive ``{start, stop, step}`` range to a float array."""
    if isinstance(value, dict):
        start, stop, step = float(value["start"]), float(value["stop"]), float(value["step"])
        if not step > 0:
            raise ConfigError(f"{name}: step must be positive")
        if stop < start:
            raise ConfigError(f"{name}: stop {stop:g} is below start {start:g}")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        # snap to 12 decimals so 0.1 steps print as 0.3, not 0.30000000000000004
        arr = np.round(start + step * np.arange(n), 12)
    else:
        arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 0 or not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name}: grid must be non-empty and finite")
    return arr


def _complex(value, name):
    if isinstance(value, (list, tuple)):
        return complex(float(value[0]), float(value[1]))
    try:
        return complex(str(value).replace(" ", "")) if isinstance(value, str) else complex(value)
    except ValueError:
        raise ConfigError(f"{name}: cannot read {value!r} as a complex number") from None


def _excitations(value, rows, cols):
    if isinstance(value, list) and value and isinstance(value[0], list):
        grid = [[_complex(v, "array.excitations") for v in row] for row in value]
        if len({len(row) for row in grid}) != 1:
            raise ConfigError("array.excitations rows have unequal lengths")
        arr = np.array(grid, dtype=complex)
        if arr.shape != (rows, cols):
            raise ConfigError(f"array.excitations has shape {arr.shape}, expected ({rows}, {cols})")
        return arr
    return np.full((rows, cols), _complex(value, "array.excitations"))


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Validated experiment, ready to run; every field is in SI units and radians."""

    raw: dict
    spec: ArraySpec
    calibrate_ohm: float | None
    mode: SynthesisMode
    anchor: str
    threads: int
    folds: tuple
    pattern_theta: np.ndarray
    pattern_phi: np.ndarray
    pattern_radius: float
    pattern_format: str
    sweep_xi1: np.ndarray
    sweep_xi2: np.ndarray
    link: dict
    modulations: tuple
    snr_db: np.ndarray
    n_bits: int
    seed: int
    targets: tuple
    bounds: tuple
    coarse_step: float
    resolution: float
    mismatch_penalty: bool
    squint_fold: FoldSpec
    squint_freqs: np.ndarray
    prefix: str


def _fold(pair, name):
    a, b = (float(v) for v in pair)
    if max(abs(a), abs(b)) > math.degrees(FOLD_LIMIT) + 1e-9:
        raise ConfigError(f"{name}: fold ({a:g}, {b:g}) deg exceeds the +/-330 deg bending limit")
    return FoldSpec.from_degrees(a, b)


def _positive(value, name):
    if not (value is not None and np.isfinite(value) and value > 0):
        raise ConfigError(f"{name} must be positive, got {value!r}")
    return float(value)


def build(raw: dict) -> ExperimentConfig:
    """Validate ``raw`` completely and convert it into an :class:`ExperimentConfig`.

    Raises
    ------
    ConfigError
        On any schema or semantic violation; nothing has been computed yet.
    """
    cfg = validate_raw(raw)
    a = cfg["array"]
    freq = a["freq_ghz"] * 1e9
    width, length = patch_dimensions(freq, a["eps_r"], a["substrate_height_mm"] * 1e-3)
    half_wave = SPEED_OF_LIGHT / freq / 2
    mm = 1e-3
    sizes = {}
    for key, fallback in (("patch_width_mm", width), ("patch_length_mm", length),
                          ("pitch_x_mm", half_wave), ("pitch_y_mm", half_wave)):
        sizes[key] = fallback if a[key] is None else _positive(a[key], f"array.{key}") * mm
    if a["port_voltage"] is None and a["calibrate_ohm"] is None:
        raise ConfigError("array: set port_voltage or calibrate_ohm")
    if a["calibrate_ohm"] is not None:
        _positive(a["calibrate_ohm"], "array.calibrate_ohm")
    try:
        spec = ArraySpec(rows=a["rows"], cols=a["cols"], patch_width=sizes["patch_width_mm"],
                         patch_length=sizes["patch_length_mm"], pitch_x=sizes["pitch_x_mm"],
                         pitch_y=sizes["pitch_y_mm"], freq=freq,
                         excitations=_excitations(a["excitations"], a["rows"], a["cols"]),
                         field_scale=float(a["field_scale"]),
                         port_voltage=1.0 if a["port_voltage"] is None else float(a["port_voltage"]))
    except FlexArrayError as exc:
        raise ConfigError(f"array: {exc}") from None

    p = cfg["pattern"]
    theta = np.radians(expand_grid(p["theta_deg"], "pattern.theta_deg"))
    phi = np.radians(expand_grid(p["phi_deg"], "pattern.phi_deg"))
    for name, grid in (("theta_deg", theta), ("phi_deg", phi)):
        if grid.size > 1 and not np.all(np.diff(grid) > 0):
            raise ConfigError(f"pattern.{name} must be strictly increasing")
    if np.any(np.abs(theta) > math.pi + 1e-12):
        raise ConfigError("pattern.theta_deg must lie within [-180, 180]")
    radius = float(p["radius_m"])
    if not radius > spec.diagonal:
        raise ConfigError(f"pattern.radius_m {radius:g} must exceed the array diagonal {spec.diagonal:g} m")

    s = cfg["sweep"]
    xi1 = expand_grid(s["xi1_deg"], "sweep.xi1_deg")
    xi2 = expand_grid(s["xi2_deg"], "sweep.xi2_deg")
    for name, grid in (("xi1_deg", xi1), ("xi2_deg", xi2)):
        if np.any(np.abs(grid) > math.degrees(FOLD_LIMIT) + 1e-9):
            raise ConfigError(f"sweep.{name} exceeds the +/-330 deg bending limit")

    lk = dict(cfg["link"])
    for key in ("distance_m", "bandwidth_ghz", "p_in_ratio"):
        _positive(lk[key], f"link.{key}")
    lk["z_pa"] = _complex(lk.pop("z_pa_ohm"), "link.z_pa_ohm")
    if abs(lk["z_pa"]) == 0:
        raise ConfigError("link.z_pa_ohm must be nonzero")

    m = cfg["modem"]
    if m["n_bits"] < MIN_BITS:
        raise ConfigError(f"modem.n_bits must be at least {MIN_BITS}")
    snr_db = expand_grid(m["snr_db"], "modem.snr_db")

    al = cfg["align"]
    targets = []
    for t in al["targets_deg"]:
        th, ph = float(t[0]), float(t[1])
        if not 0.0 <= th <= 90.0:
            raise ConfigError(f"align.targets_deg: theta {th:g} must lie in [0, 90]")
        targets.append((math.radians(th), math.radians(ph)))
    bounds = []
    for key in ("xi1_bounds_deg", "xi2_bounds_deg"):
        lo, hi = (float(v) for v in al[key])
        if lo > hi or max(abs(lo), abs(hi)) > math.degrees(FOLD_LIMIT) + 1e-9:
            raise ConfigError(f"align.{key} must be an ordered pair within +/-330 deg")
        bounds.append((math.radians(lo), math.radians(hi)))

    sq = cfg["squint"]
    freqs = expand_grid(sq["freqs_ghz"], "squint.freqs_ghz") * 1e9
    if np.any(freqs <= 0):
        raise ConfigError("squint.freqs_ghz must be positive")

    return ExperimentConfig(
        raw=cfg, spec=spec, calibrate_ohm=a["calibrate_ohm"], mode=SynthesisMode.parse(cfg["mode"]),
        anchor=a["anchor"], threads=int(cfg["threads"]),
        folds=tuple(_fold(f, "folds_deg") for f in cfg["folds_deg"]),
        pattern_theta=theta, pattern_phi=phi, pattern_radius=radius, pattern_format=p["format"],
        sweep_xi1=np.radians(xi1), sweep_xi2=np.radians(xi2), link=lk,
        modulations=tuple(Modulation(int(v)) for v in m["modulations"]), snr_db=snr_db,
        n_bits=int(m["n_bits"]), seed=int(m["seed"]), targets=tuple(targets), bounds=tuple(bounds),
        coarse_step=math.radians(al["coarse_step_deg"]), resolution=math.radians(al["resolution_deg"]),
        mismatch_penalty=bool(al["mismatch_penalty"]), squint_fold=_fold(sq["fold_deg"], "squint.fold_deg"),
        squint_freqs=freqs, prefix=cfg["outputs"]["prefix"])
