"""Strict TOML scenario files.

Every accepted key is listed in ``SCHEMA`` with its type, default and where
the default comes from; anything else in a file or an override is an error.
See ``configs/README.md`` for the documented schema.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Any, Callable, Iterable

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from irs_jbua.beamforming import PowerPolicy
from irs_jbua.channel import RadioParams
from irs_jbua.errors import IrsError
from irs_jbua.harness import ScenarioConfig, SweepSpec, SweepVariable
from irs_jbua.jbua import ObjectiveMode

FR3 = "default: FR3 reference scenario"
DESK = "default: desk scale"
MODEL = "default: model choice"


class ConfigError(Exception):
    exit_code = 2


class MissingConfigError(ConfigError):
    exit_code = 4


class UnknownKeyError(ConfigError):
    pass


class TypeMismatchError(ConfigError):
    pass


class ConstraintViolationError(ConfigError):
    pass


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _int(v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise TypeError("expected an integer")
    return v


def _float(v):
    if not _is_number(v):
        raise TypeError("expected a finite number")
    return float(v)


def _bool(v):
    if not isinstance(v, bool):
        raise TypeError("expected true or false")
    return v


def _choice(*options: str) -> Callable[[Any], str]:
    def check(v):
        if not isinstance(v, str) or v not in options:
            raise TypeError(f"expected one of {', '.join(options)}")
        return v

    return check


def _vector(n: int) -> Callable[[Any], tuple[float, ...]]:
    def check(v):
        if not isinstance(v, list) or len(v) != n or not all(_is_number(x) for x in v):
            raise TypeError(f"expected a list of {n} finite numbers")
        return tuple(float(x) for x in v)

    return check


def _optional(inner: Callable[[Any], Any]) -> Callable[[Any], Any]:
    def check(v):
        if isinstance(v, str) and v.lower() in ("none", "off"):
            return None
        return inner(v)

    return check


def _pairs(v):
    if not isinstance(v, list) or not all(
        isinstance(p, list) and len(p) == 2 and all(_is_number(x) for x in p) for p in v
    ):
        raise TypeError("expected a list of [x, y] pairs")
    return tuple((float(x), float(y)) for x, y in v)


def _floats(v):
    if not isinstance(v, list) or not all(_is_number(x) for x in v):
        raise TypeError("expected a list of finite numbers")
    return tuple(float(x) for x in v)


@dataclass(frozen=True)
class Field:
    check: Callable[[Any], Any]
    default: Any
    source: str
    doc: str


SCHEMA: dict[str, Field] = {
    "k_users": Field(_int, 4, DESK, "number of single-antenna users K"),
    "l_irs": Field(_int, 4, DESK, "number of IRS panels L (terrestrial + aerial)"),
    "trials": Field(_int, 10_000, DESK, "Monte-Carlo trials per point"),
    "master_seed": Field(_int, 0, MODEL, "root seed for all trial streams"),
    "workers": Field(_int, 1, MODEL, "worker processes (results do not depend on it)"),
    "objective": Field(_choice("clean_zf", "full_interference"), "clean_zf", MODEL, "SINR model"),
    "power_policy": Field(_choice("equal_power", "equal_rate"), "equal_power", MODEL, "power split"),
    "max_iters": Field(_int, 10, MODEL, "JBUA alternation rounds"),
    "es_limit": Field(_int, 10**7, MODEL, "skip ES above this many assignments"),
    "radio.carrier_frequency_hz": Field(_float, 15e9, FR3, "carrier frequency"),
    "radio.bandwidth_hz": Field(_float, 400e6, FR3, "channel bandwidth"),
    "radio.noise_density_dbm_per_hz": Field(_float, -174.0, FR3, "noise power density"),
    "radio.noise_figure_db": Field(_float, 10.0, FR3, "receiver noise figure"),
    "radio.ap_power_dbm": Field(_float, 43.2, FR3, "AP power budget"),
    "radio.num_ap_antennas": Field(_int, 16, DESK, "AP antennas N (full scale 256)"),
    "geometry.area_side_m": Field(_float, 100.0, MODEL, "side of the square service area"),
    "geometry.user_height_m": Field(_float, 1.5, MODEL, "user antenna height"),
    "geometry.user_drop": Field(_choice("uniform"), "uniform", MODEL, "user placement law"),
    "geometry.ap_position": Field(_vector(3), (0.0, 0.5, 25.0), MODEL, "[x/side, y/side, z_m]"),
    "geometry.ap_azimuth_rad": Field(_optional(_float), None, MODEL, "AP array normal; none = face center"),
    "geometry.center_phase_approx": Field(_bool, False, MODEL, "panel-center phase instead of per element"),
    "geometry.rician_k_db": Field(_optional(_float), None, MODEL, "scatter K-factor; none = pure LoS"),
    "irs.reflectors_y": Field(_int, 20, DESK, "elements along the panel width (full scale 100)"),
    "irs.reflectors_z": Field(_int, 20, DESK, "elements along the panel height (full scale 100)"),
    "irs.terrestrial_positions": Field(_optional(_pairs), None, MODEL, "[[x/side, y/side], ...]; none = ring"),
    "irs.terrestrial_azimuths_rad": Field(_optional(_floats), None, MODEL, "panel normals; none = face center"),
    "irs.terrestrial_height_m": Field(_float, 10.0, MODEL, "terrestrial panel center height"),
    "irs.ring_radius": Field(_float, 0.35, MODEL, "default ring radius / side"),
    "irs.aerial": Field(_bool, True, MODEL, "deploy one aerial panel"),
    "irs.aerial_position": Field(_vector(2), (0.5, 0.5), MODEL, "[x/side, y/side]"),
    "irs.aerial_altitude_m": Field(_float, 100.0, MODEL, "aerial panel altitude"),
    "sweep.variable": Field(
        _optional(_choice(*(v.value for v in SweepVariable))), None, MODEL, "swept quantity"
    ),
    "sweep.values": Field(_optional(_floats), None, MODEL, "strictly increasing grid"),
}

FULL_SCALE = {
    "radio.num_ap_antennas": 256,
    "irs.reflectors_y": 100,
    "irs.reflectors_z": 100,
}


@dataclass(frozen=True)
class LoadedConfig:
    scenario: ScenarioConfig
    sweep: SweepSpec | None
    values: dict[str, Any]
    sources: dict[str, str]

    def describe(self) -> str:
        width = max(len(k) for k in self.values)
        lines = []
        for key in SCHEMA:
            lines.append(f"{key:<{width}} = {_show(self.values[key])}  [{self.sources[key]}]")
        return "\n".join(lines)


def _show(v: Any) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return "[" + ", ".join(_show(x) for x in v) + "]"
    return repr(v) if isinstance(v, str) else str(v)


_TABLES = {k.rsplit(".", 1)[0] for k in SCHEMA if "." in k}


def _flatten(doc: dict, prefix: str = "") -> dict[str, Any]:
    flat = {}
    for key, value in doc.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            if name not in _TABLES:
                raise UnknownKeyError(f"unknown config table [{name}]")
            flat.update(_flatten(value, name + "."))
        else:
            flat[name] = value
    return flat


def _set(values: dict, sources: dict, key: str, raw: Any, source: str) -> None:
    field_ = SCHEMA.get(key)
    if field_ is None:
        raise UnknownKeyError(f"unknown config key {key!r}")
    try:
        values[key] = field_.check(raw)
    except TypeError as exc:
        raise TypeMismatchError(f"{key}: {exc} (got {raw!r})") from None
    sources[key] = source


def parse_override(text: str) -> tuple[str, Any]:
    """Split ``KEY=VALUE``; the value is read as a TOML value, else as a bare string."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not KEY=VALUE")
    key, raw = text.split("=", 1)
    key, raw = key.strip(), raw.strip()
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    return key, value


def parse_config(
    path: str | os.PathLike | None = None,
    overrides: Iterable[str] = (),
    *,
    full_scale: bool = False,
    seed: int | None = None,
) -> LoadedConfig:
    """Resolve defaults, file, ``--full-scale``, ``--set`` overrides and ``--seed``, in that order."""
    values = {k: f.default for k, f in SCHEMA.items()}
    sources = {k: f.source for k, f in SCHEMA.items()}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except FileNotFoundError:
            raise MissingConfigError(f"config file not found: {path}") from None
        except OSError as exc:
            raise MissingConfigError(f"cannot read config file {path}: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: invalid TOML: {exc}") from None
        for key, raw in _flatten(doc).items():
            _set(values, sources, key, raw, f"file: {os.fspath(path)}")
    if full_scale:
        for key, raw in FULL_SCALE.items():
            _set(values, sources, key, raw, "--full-scale")
    for text in overrides:
        key, raw = parse_override(text)
        _set(values, sources, key, raw, "--set")
    if seed is not None:
        _set(values, sources, "master_seed", seed, "--seed")
    scenario, sweep = _build(values)
    return LoadedConfig(scenario, sweep, values, sources)


def _build(v: dict[str, Any]) -> tuple[ScenarioConfig, SweepSpec | None]:
    for key in ("radio.carrier_frequency_hz", "radio.bandwidth_hz", "geometry.area_side_m"):
        if not (v[key] > 0 and math.isfinite(v[key])):
            raise ConstraintViolationError(f"{key} must be positive and finite")
    if v["k_users"] > v["l_irs"]:
        raise ConstraintViolationError(
            f"k_users={v['k_users']} exceeds l_irs={v['l_irs']}; one-to-one association needs K <= L"
        )
    for key in ("radio.noise_figure_db", "geometry.user_height_m", "irs.terrestrial_height_m",
                "irs.aerial_altitude_m"):
        if v[key] < 0:
            raise ConstraintViolationError(f"{key} must be >= 0")
    try:
        radio = RadioParams(
            carrier_frequency_hz=v["radio.carrier_frequency_hz"],
            bandwidth_hz=v["radio.bandwidth_hz"],
            noise_density_dbm_per_hz=v["radio.noise_density_dbm_per_hz"],
            noise_figure_db=v["radio.noise_figure_db"],
            ap_power_budget_dbm=v["radio.ap_power_dbm"],
            num_ap_antennas=v["radio.num_ap_antennas"],
        )
        scenario = ScenarioConfig(
            radio=radio,
            k_users=v["k_users"],
            l_irs=v["l_irs"],
            area_side_m=v["geometry.area_side_m"],
            user_height_m=v["geometry.user_height_m"],
            user_drop=v["geometry.user_drop"],
            ap_position=v["geometry.ap_position"],
            ap_azimuth_rad=v["geometry.ap_azimuth_rad"],
            terrestrial_positions=v["irs.terrestrial_positions"],
            terrestrial_azimuths_rad=v["irs.terrestrial_azimuths_rad"],
            terrestrial_height_m=v["irs.terrestrial_height_m"],
            ring_radius=v["irs.ring_radius"],
            aerial=v["irs.aerial"],
            aerial_position=v["irs.aerial_position"],
            aerial_altitude_m=v["irs.aerial_altitude_m"],
            reflectors_y=v["irs.reflectors_y"],
            reflectors_z=v["irs.reflectors_z"],
            center_phase_approx=v["geometry.center_phase_approx"],
            rician_k_db=v["geometry.rician_k_db"],
            objective=ObjectiveMode(v["objective"]),
            power_policy=PowerPolicy(v["power_policy"]),
            max_iters=v["max_iters"],
            es_limit=v["es_limit"],
            trials=v["trials"],
            master_seed=v["master_seed"],
            workers=v["workers"],
        )
        sweep = None
        if (v["sweep.variable"] is None) != (v["sweep.values"] is None):
            raise ConstraintViolationError("sweep.variable and sweep.values must be given together")
        if v["sweep.variable"] is not None:
            sweep = SweepSpec(SweepVariable(v["sweep.variable"]), v["sweep.values"], scenario)
            for value in sweep.values:
                sweep.config_at(value)
    except (IrsError, ValueError) as exc:
        raise ConstraintViolationError(str(exc)) from None
    return scenario, sweep
