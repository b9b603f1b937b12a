"""Seeded Monte-Carlo engine comparing JBUA against ES, GS and RS.

Every trial draws its randomness from
``SeedSequence(master_seed, spawn_key=(trial_index, attempt))``, which numpy
hashes into an independent stream.  The trial's stream is then split into
three children: user drop (and optional scatter), greedy tie-breaks, and the
random baseline.  Results therefore depend only on the config and the seed,
never on how trials are spread over workers.  A grid point of a sweep reuses
the same per-trial streams, so sweeps use common random numbers.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from irs_jbua.association import (
    Assignment,
    exhaustive_search_scored,
    greedy_search,
    random_search,
)
from irs_jbua.beamforming import PowerPolicy, noise_power_watts, zf_sum_rates
from irs_jbua.channel import (
    ChannelSet,
    IrsPanel,
    NetworkGeometry,
    Position,
    RadioParams,
    Tier,
    infrastructure_channels,
    synthesize_channels,
)
from irs_jbua.errors import InvalidParameterError, IrsError, SingularChannelError
from irs_jbua.jbua import (
    JbuaOptions,
    ObjectiveMode,
    beamform,
    distance_proxy_rates,
    single_user_rates,
    solve_channels,
)

log = logging.getLogger(__name__)

SCHEMES = ("ES", "JBUA", "GS", "RS")
MAX_RESAMPLES = 3
CSV_HEADER = ("sweep_var", "value", "scheme", "mean_sumrate_bpshz", "stderr", "trials", "degenerate")


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulated deployment plus Monte-Carlo settings.

    Horizontal coordinates of the AP and the IRSs are fractions of the
    service-area side, so the layout scales with ``area_side_m``; heights
    are in meters.  ``L - 1`` terrestrial panels plus one aerial panel are
    deployed when ``aerial`` is set.  Without explicit positions the
    terrestrial panels sit on a ring around the area center.  A ``None``
    azimuth means "face the area center".
    """

    radio: RadioParams = field(default_factory=RadioParams)
    k_users: int = 4
    l_irs: int = 4
    area_side_m: float = 100.0
    user_height_m: float = 1.5
    user_drop: str = "uniform"
    ap_position: tuple[float, float, float] = (0.0, 0.5, 25.0)
    ap_azimuth_rad: float | None = None
    terrestrial_positions: tuple[tuple[float, float], ...] | None = None
    terrestrial_azimuths_rad: tuple[float, ...] | None = None
    terrestrial_height_m: float = 10.0
    ring_radius: float = 0.35
    aerial: bool = True
    aerial_position: tuple[float, float] = (0.5, 0.5)
    aerial_altitude_m: float = 100.0
    reflectors_y: int = 20
    reflectors_z: int = 20
    center_phase_approx: bool = False
    rician_k_db: float | None = None
    objective: ObjectiveMode = ObjectiveMode.CLEAN_ZF
    power_policy: PowerPolicy = PowerPolicy.EQUAL_POWER
    max_iters: int = 10
    es_limit: int = 10**7
    trials: int = 10_000
    master_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidParameterError("trials must be >= 1")
        if not self.area_side_m > 0:
            raise InvalidParameterError("area side must be positive")
        if self.k_users < 1:
            raise InvalidParameterError("need at least one user")
        if self.k_users > self.l_irs:
            raise InvalidParameterError(f"K={self.k_users} exceeds L={self.l_irs}")
        if self.num_terrestrial < 0:
            raise InvalidParameterError("l_irs must count the aerial panel")
        if self.terrestrial_positions is not None and len(self.terrestrial_positions) != self.num_terrestrial:
            raise InvalidParameterError(
                f"{len(self.terrestrial_positions)} terrestrial positions for {self.num_terrestrial} panels"
            )
        if self.terrestrial_azimuths_rad is not None and len(self.terrestrial_azimuths_rad) != self.num_terrestrial:
            raise InvalidParameterError("one azimuth per terrestrial panel required")
        if self.user_drop != "uniform":
            raise InvalidParameterError(f"unsupported user drop {self.user_drop!r}")
        if not 0 < self.ring_radius <= 0.5:
            raise InvalidParameterError("ring radius must lie in (0, 0.5] of the area side")
        if self.reflectors_y < 1 or self.reflectors_z < 1:
            raise InvalidParameterError("reflector counts must be >= 1")
        if self.max_iters < 1 or self.workers < 1 or self.es_limit < 0:
            raise InvalidParameterError("max_iters and workers must be >= 1, es_limit >= 0")
        if self.master_seed < 0:
            raise InvalidParameterError("master_seed must be non-negative")

    @property
    def num_terrestrial(self) -> int:
        return self.l_irs - (1 if self.aerial else 0)

    @property
    def jbua_options(self) -> JbuaOptions:
        return JbuaOptions(
            max_iters=self.max_iters,
            mode=self.objective,
            power_policy=self.power_policy,
            center_phase_approx=self.center_phase_approx,
        )

    @property
    def es_enabled(self) -> bool:
        return math.perm(self.l_irs, self.k_users) <= self.es_limit


class SweepVariable(enum.Enum):
    AP_POWER = "ap_power"
    REFLECTORS_PER_SIDE = "reflectors_per_side"
    AREA_SIDE = "area_side"


@dataclass(frozen=True)
class SweepSpec:
    variable: SweepVariable
    values: tuple[float, ...]
    base: ScenarioConfig = field(default_factory=ScenarioConfig)

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if not values:
            raise InvalidParameterError("sweep grid is empty")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise InvalidParameterError("sweep grid must be strictly increasing")
        object.__setattr__(self, "values", values)

    def config_at(self, value: float) -> ScenarioConfig:
        if self.variable is SweepVariable.AP_POWER:
            return replace(self.base, radio=replace(self.base.radio, ap_power_budget_dbm=value))
        if self.variable is SweepVariable.REFLECTORS_PER_SIDE:
            if value != int(value):
                raise InvalidParameterError(f"reflectors per side must be an integer, got {value}")
            return replace(self.base, reflectors_y=int(value), reflectors_z=int(value))
        if self.variable is SweepVariable.AREA_SIDE:
            return replace(self.base, area_side_m=value)
        raise InvalidParameterError(f"unknown sweep variable {self.variable!r}")


def trial_seed(master_seed: int, trial_index: int, attempt: int = 0) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(trial_index, attempt))


def _facing_center(x: float, y: float, side: float) -> float:
    return math.atan2(side / 2 - y, side / 2 - x) if (x, y) != (side / 2, side / 2) else 0.0


def infrastructure(config: ScenarioConfig) -> tuple[Position, float, tuple[IrsPanel, ...]]:
    """AP position, AP array azimuth and the IRS panels for a config."""
    side = config.area_side_m
    spacing = config.radio.wavelength_m / 2.0
    ax, ay, az = config.ap_position
    ap = Position(ax * side, ay * side, az)
    ap_az = config.ap_azimuth_rad
    if ap_az is None:
        ap_az = _facing_center(ap.x, ap.y, side)
    if config.terrestrial_positions is None:
        n = config.num_terrestrial
        fractions = [
            (
                0.5 + config.ring_radius * math.cos(2 * math.pi * (i + 0.5) / n),
                0.5 + config.ring_radius * math.sin(2 * math.pi * (i + 0.5) / n),
            )
            for i in range(n)
        ]
    else:
        fractions = [tuple(p) for p in config.terrestrial_positions]
    panels = []
    for i, (fx, fy) in enumerate(fractions):
        x, y = fx * side, fy * side
        azimuth = (
            config.terrestrial_azimuths_rad[i]
            if config.terrestrial_azimuths_rad is not None
            else _facing_center(x, y, side)
        )
        panels.append(
            IrsPanel(
                Tier.TERRESTRIAL,
                config.reflectors_y,
                config.reflectors_z,
                Position(x, y, config.terrestrial_height_m),
                spacing,
                azimuth,
            )
        )
    if config.aerial:
        fx, fy = config.aerial_position
        panels.append(
            IrsPanel(
                Tier.AERIAL,
                config.reflectors_y,
                config.reflectors_z,
                Position(fx * side, fy * side, config.aerial_altitude_m),
                spacing,
            )
        )
    return ap, ap_az, tuple(panels)


def drop_users(config: ScenarioConfig, rng: np.random.Generator) -> tuple[Position, ...]:
    xy = rng.uniform(0.0, config.area_side_m, size=(config.k_users, 2))
    return tuple(Position(float(x), float(y), config.user_height_m) for x, y in xy)


def build_geometry(config: ScenarioConfig, rng: np.random.Generator) -> NetworkGeometry:
    ap, ap_az, panels = infrastructure(config)
    return NetworkGeometry(ap, drop_users(config, rng), panels, ap_az)


class ScenarioContext:
    """Per-config state shared by all trials: the infrastructure and its channels."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.ap, self.ap_azimuth, self.panels = infrastructure(config)
        self.f_matrices = infrastructure_channels(
            self.ap,
            self.ap_azimuth,
            self.panels,
            config.radio,
            center_phase_approx=config.center_phase_approx,
        )
        self.sigma2 = noise_power_watts(config.radio)

    def realize(self, rng: np.random.Generator) -> tuple[NetworkGeometry, ChannelSet]:
        cfg = self.config
        geom = NetworkGeometry(self.ap, drop_users(cfg, rng), self.panels, self.ap_azimuth)
        channels = synthesize_channels(
            geom,
            cfg.radio,
            center_phase_approx=cfg.center_phase_approx,
            rician_k_db=cfg.rician_k_db,
            rng=rng,
            f_matrices=self.f_matrices,
        )
        return geom, channels

    def scorer(self, channels: ChannelSet) -> Callable[[np.ndarray], np.ndarray]:
        """Sum rate for each row of a ``(P, K)`` array of user -> IRS maps (NaN if degenerate)."""
        cfg = self.config
        cols = np.arange(cfg.k_users)
        if cfg.objective is ObjectiveMode.CLEAN_ZF:
            def score(perms: np.ndarray) -> np.ndarray:
                H = channels.cascaded[perms, cols].conj()
                rates = zf_sum_rates(H, cfg.radio.ap_power_watts, self.sigma2, cfg.power_policy)
                return rates.sum(axis=1)
            return score

        options = cfg.jbua_options

        def score_slow(perms: np.ndarray) -> np.ndarray:
            out = np.empty(len(perms))
            for i, perm in enumerate(perms):
                try:
                    _, metrics = beamform(
                        channels, Assignment.from_user_to_irs(perm, cfg.l_irs), cfg.radio, options
                    )
                    out[i] = metrics.sum_rate_bps_hz
                except SingularChannelError:
                    out[i] = np.nan
            return out

        return score_slow


@dataclass(frozen=True)
class TrialOutcome:
    trial_index: int
    rates: dict[str, float]
    degenerate: bool = False
    attempts: int = 1
    es_skipped: bool = False
    jbua_iterations: int = 0
    jbua_monotone: bool = True


def run_trial(
    config: ScenarioConfig, trial_index: int, context: ScenarioContext | None = None
) -> TrialOutcome:
    """Evaluate all four schemes on one realization.

    A realization whose JBUA, GS or RS association cannot be zero-forced is
    redrawn from the next attempt's stream, up to ``MAX_RESAMPLES`` times;
    after that the trial counts as degenerate.
    """
    ctx = context or ScenarioContext(config)
    nan = {s: math.nan for s in SCHEMES}
    for attempt in range(MAX_RESAMPLES + 1):
        drop_ss, gs_ss, rs_ss = trial_seed(config.master_seed, trial_index, attempt).spawn(3)
        geom, channels = ctx.realize(np.random.default_rng(drop_ss))
        try:
            jbua = solve_channels(
                channels, config.radio, distance_proxy_rates(geom), config.jbua_options
            )
        except SingularChannelError:
            continue
        table = single_user_rates(channels, config.radio)
        gs = greedy_search(table, np.random.default_rng(gs_ss))
        rs = random_search(config.k_users, config.l_irs, np.random.default_rng(rs_ss))
        score = ctx.scorer(channels)
        picked = score(np.array([jbua.assignment.user_to_irs, gs.user_to_irs, rs.user_to_irs]))
        if np.any(np.isnan(picked)):
            continue
        rates = {"JBUA": float(picked[0]), "GS": float(picked[1]), "RS": float(picked[2])}
        es_skipped = not config.es_enabled
        if es_skipped:
            rates["ES"] = math.nan
        else:
            _, rates["ES"] = exhaustive_search_scored(
                score, config.k_users, config.l_irs, limit=config.es_limit
            )
        return TrialOutcome(
            trial_index,
            {s: rates[s] for s in SCHEMES},
            attempts=attempt + 1,
            es_skipped=es_skipped,
            jbua_iterations=jbua.iterations,
            jbua_monotone=jbua.monotone,
        )
    return TrialOutcome(
        trial_index, nan, degenerate=True, attempts=MAX_RESAMPLES + 1, es_skipped=not config.es_enabled
    )


def _run_chunk(args: tuple[ScenarioConfig, Sequence[int]]) -> list[TrialOutcome]:
    config, indices = args
    ctx = ScenarioContext(config)
    return [run_trial(config, i, ctx) for i in indices]


def run_trials(config: ScenarioConfig, chunk_size: int = 250) -> list[TrialOutcome]:
    """All trials of a config, ordered by trial index regardless of ``workers``."""
    indices = list(range(config.trials))
    chunks = [indices[i : i + chunk_size] for i in range(0, len(indices), chunk_size)]
    if config.workers <= 1 or len(chunks) <= 1:
        return _run_chunk((config, indices))
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        parts = pool.map(_run_chunk, [(config, c) for c in chunks])
        return [o for part in parts for o in part]


@dataclass(frozen=True)
class SchemeStats:
    """Aggregate of one scheme at one grid point; ``mean is None`` when not evaluated."""

    mean: float | None
    stderr: float | None
    trials: int | None
    degenerate: int | None


def aggregate(samples: Sequence[float], degenerate: int) -> SchemeStats:
    n = len(samples)
    if n == 0:
        return SchemeStats(math.nan, math.nan, 0, degenerate)
    mean = math.fsum(samples) / n
    if n > 1:
        var = math.fsum((x - mean) ** 2 for x in samples) / (n - 1)
        stderr = math.sqrt(var / n)
    else:
        stderr = 0.0
    return SchemeStats(mean, stderr, n, degenerate)


@dataclass(frozen=True)
class ScenarioResult:
    config: ScenarioConfig
    stats: dict[str, SchemeStats]
    outcomes: tuple[TrialOutcome, ...]

    @property
    def es_skipped(self) -> bool:
        return not self.config.es_enabled

    @property
    def non_monotone(self) -> int:
        return sum(1 for o in self.outcomes if not o.degenerate and not o.jbua_monotone)


def summarize(config: ScenarioConfig, outcomes: Sequence[TrialOutcome]) -> dict[str, SchemeStats]:
    degenerate = sum(o.degenerate for o in outcomes)
    stats = {}
    for scheme in SCHEMES:
        if scheme == "ES" and not config.es_enabled:
            stats[scheme] = SchemeStats(None, None, None, None)
            continue
        samples = [o.rates[scheme] for o in outcomes if not o.degenerate]
        stats[scheme] = aggregate(samples, degenerate)
    return stats


def run_scenario(config: ScenarioConfig) -> ScenarioResult:
    outcomes = run_trials(config)
    result = ScenarioResult(config, summarize(config, outcomes), tuple(outcomes))
    if result.non_monotone:
        log.warning("JBUA sum rate decreased between rounds in %d trials", result.non_monotone)
    return result


@dataclass(frozen=True)
class SweepRow:
    sweep_var: str
    value: float
    scheme: str
    stats: SchemeStats


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list[SweepRow] = field(default_factory=list)
    errors: dict[float, str] = field(default_factory=dict)
    es_skipped: list[float] = field(default_factory=list)

    def table(self, scheme: str) -> list[tuple[float, SchemeStats]]:
        return [(r.value, r.stats) for r in self.rows if r.scheme == scheme]


def run_sweep(
    spec: SweepSpec,
    progress: Callable[[float, ScenarioResult | None], None] | None = None,
) -> SweepResult:
    """Run every grid point; a point with an invalid config yields empty rows and the sweep goes on."""
    result = SweepResult(spec)
    name = spec.variable.value
    empty = SchemeStats(None, None, None, None)
    for value in spec.values:
        try:
            point = run_scenario(spec.config_at(value))
        except (IrsError, ValueError) as exc:
            log.error("sweep point %s=%g failed: %s", name, value, exc)
            result.errors[value] = str(exc)
            result.rows.extend(SweepRow(name, value, s, empty) for s in SCHEMES)
            if progress:
                progress(value, None)
            continue
        if point.es_skipped:
            result.es_skipped.append(value)
        result.rows.extend(SweepRow(name, value, s, point.stats[s]) for s in SCHEMES)
        if progress:
            progress(value, point)
    return result


def _fmt(x: float | int | None) -> str:
    if x is None:
        return ""
    if isinstance(x, int):
        return str(x)
    return format(x, ".9g")


def csv_rows(rows: Iterable[SweepRow]) -> list[list[str]]:
    return [
        [
            r.sweep_var,
            _fmt(r.value),
            r.scheme,
            _fmt(r.stats.mean),
            _fmt(r.stats.stderr),
            _fmt(r.stats.trials),
            _fmt(r.stats.degenerate),
        ]
        for r in rows
    ]


def write_csv(rows: Iterable[SweepRow], path: str | os.PathLike) -> None:
    """Write the results table atomically (temp file in the target directory, then rename)."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", suffix=".csv", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            writer.writerows(csv_rows(rows))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def scenario_rows(result: ScenarioResult, sweep_var: str = "none", value: float = 0.0) -> list[SweepRow]:
    return [SweepRow(sweep_var, value, s, result.stats[s]) for s in SCHEMES]
