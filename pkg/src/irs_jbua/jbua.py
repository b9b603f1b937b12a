"""Joint beamforming and user association by alternating decomposition.

The joint problem (sum-rate maximization over the precoder and a binary
one-to-one association) is a mixed-integer nonlinear program and NP-hard, so
it is split in two: zero-forcing beamforming for a fixed association, and
deferred-acceptance matching for fixed per-pair rates.  The two steps
alternate until the association stops changing.  The result is feasible but
carries no optimality certificate.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from irs_jbua.association import Assignment, build_preferences, deferred_acceptance
from irs_jbua.beamforming import (
    LinkMetrics,
    PowerPolicy,
    Precoder,
    interference_power,
    link_metrics,
    noise_power_watts,
    signal_power,
    zf_precoder,
    zf_sum_rates,
)
from irs_jbua.channel import (
    ChannelSet,
    NetworkGeometry,
    RadioParams,
    channel_matrix,
    distance,
    synthesize_channels,
)
from irs_jbua.errors import InvalidParameterError, SingularChannelError

log = logging.getLogger(__name__)


class ObjectiveMode(enum.Enum):
    # interference-free zero-forcing SINR
    CLEAN_ZF = "clean_zf"
    # interference from every other beam through every IRS path
    FULL_INTERFERENCE = "full_interference"


@dataclass(frozen=True)
class JbuaOptions:
    max_iters: int = 10
    mode: ObjectiveMode = ObjectiveMode.CLEAN_ZF
    power_policy: PowerPolicy = PowerPolicy.EQUAL_POWER
    center_phase_approx: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidParameterError("max_iters must be >= 1")


@dataclass(frozen=True, eq=False)
class JbuaSolution:
    assignment: Assignment
    precoder: Precoder
    metrics: LinkMetrics
    iterations: int
    converged: bool
    history: tuple[float, ...] = field(default=())

    @property
    def sum_rate(self) -> float:
        return self.metrics.sum_rate_bps_hz

    @property
    def monotone(self) -> bool:
        """Whether the recorded sum rate never dropped between rounds."""
        return all(b >= a * (1 - 1e-12) for a, b in zip(self.history, self.history[1:]))


def distance_proxy_rates(geometry: NetworkGeometry) -> np.ndarray:
    """``1 / (d_AP,IRS * d_IRS,user)``, proportional to the far-field cascade amplitude."""
    table = np.empty((geometry.num_irs, geometry.num_users))
    for l, panel in enumerate(geometry.irs_panels):
        d_al = distance(geometry.ap, panel.center)
        for k, user in enumerate(geometry.users):
            table[l, k] = 1.0 / (d_al * distance(panel.center, user))
    return table


def objective(
    assignment: Assignment,
    precoder: Precoder,
    channels: ChannelSet,
    sigma2: float,
    mode: ObjectiveMode = ObjectiveMode.CLEAN_ZF,
) -> float:
    """Sum rate of a given association and precoder."""
    return _metrics(assignment.user_to_irs, precoder, channels, sigma2, mode).sum_rate_bps_hz


def _metrics(
    user_to_irs: Sequence[int],
    precoder: Precoder,
    channels: ChannelSet,
    sigma2: float,
    mode: ObjectiveMode,
) -> LinkMetrics:
    if mode is ObjectiveMode.CLEAN_ZF:
        signal = signal_power(channels.cascaded, user_to_irs, precoder)
        interf = interference_power(channels.cascaded, user_to_irs, precoder, assigned_only=True)
        return link_metrics(signal / sigma2, interf)
    if mode is ObjectiveMode.FULL_INTERFERENCE:
        cascade = channels.configured_cascade(user_to_irs)
        signal = signal_power(cascade, user_to_irs, precoder)
        interf = interference_power(cascade, user_to_irs, precoder)
        return link_metrics(signal / (interf + sigma2), interf)
    raise InvalidParameterError(f"unknown objective mode {mode!r}")


def beamform(
    channels: ChannelSet,
    assignment: Assignment,
    params: RadioParams,
    options: JbuaOptions = JbuaOptions(),
) -> tuple[Precoder, LinkMetrics]:
    """Zero-forcing step for a fixed association."""
    u2i = assignment.user_to_irs
    H = channel_matrix(channels.cascaded, u2i)
    precoder = zf_precoder(H, params, options.power_policy)
    metrics = _metrics(u2i, precoder, channels, noise_power_watts(params), options.mode)
    return precoder, metrics


def _swapped(user_to_irs: Sequence[int], k: int, l: int) -> list[int]:
    out = list(user_to_irs)
    if out[k] == l:
        return out
    if l in out:
        out[out.index(l)] = out[k]
    out[k] = l
    return out


def pair_rates(
    channels: ChannelSet,
    user_to_irs: Sequence[int],
    params: RadioParams,
    policy: PowerPolicy = PowerPolicy.EQUAL_POWER,
) -> np.ndarray:
    """Rate of user k if it were served by IRS l, for every pair; shape ``(L, K)``.

    The candidate association is the current one with user k moved onto IRS
    l (swapping with its holder, if any).  The rate is user k's
    interference-free zero-forcing rate under that association.  Degenerate
    candidates score 0.
    """
    num_irs, num_users = channels.num_irs, channels.num_users
    cols = np.arange(num_users)
    batch = np.empty((num_irs * num_users, num_users, channels.num_antennas), dtype=complex)
    for l in range(num_irs):
        for k in range(num_users):
            cand = _swapped(user_to_irs, k, l)
            batch[l * num_users + k] = channels.cascaded[cand, cols].conj()
    rates = zf_sum_rates(batch, params.ap_power_watts, noise_power_watts(params), policy)
    own = rates.reshape(num_irs, num_users, num_users)[:, cols, cols]
    return np.nan_to_num(own, nan=0.0)


def solve_channels(
    channels: ChannelSet,
    params: RadioParams,
    initial_rates: np.ndarray,
    options: JbuaOptions = JbuaOptions(),
) -> JbuaSolution:
    """Alternate beamforming and matching starting from ``initial_rates`` preferences.

    Raises ``SingularChannelError`` only when the initial association cannot
    be zero-forced; a degenerate association proposed later ends the
    alternation at the previous one.
    """
    assignment = deferred_acceptance(build_preferences(initial_rates)).assignment
    precoder, metrics = beamform(channels, assignment, params, options)
    history = [metrics.sum_rate_bps_hz]
    converged = False
    iterations = 0
    while iterations < options.max_iters:
        iterations += 1
        rates = pair_rates(channels, assignment.user_to_irs, params, options.power_policy)
        proposed = deferred_acceptance(build_preferences(rates)).assignment
        if proposed == assignment:
            converged = True
            break
        try:
            new_precoder, new_metrics = beamform(channels, proposed, params, options)
        except SingularChannelError:
            log.debug("degenerate association %r proposed; keeping previous", proposed)
            break
        assignment, precoder, metrics = proposed, new_precoder, new_metrics
        if metrics.sum_rate_bps_hz < history[-1]:
            log.debug("sum rate dropped %.6g -> %.6g", history[-1], metrics.sum_rate_bps_hz)
        history.append(metrics.sum_rate_bps_hz)
    return JbuaSolution(assignment, precoder, metrics, iterations, converged, tuple(history))


def solve(
    geometry: NetworkGeometry,
    params: RadioParams,
    options: JbuaOptions = JbuaOptions(),
    *,
    channels: ChannelSet | None = None,
) -> JbuaSolution:
    """Full pipeline for one deterministic realization, initialized from distances."""
    if channels is None:
        channels = synthesize_channels(
            geometry, params, center_phase_approx=options.center_phase_approx
        )
    return solve_channels(channels, params, distance_proxy_rates(geometry), options)


@dataclass(frozen=True)
class ConstraintCheck:
    name: str
    ok: bool
    residual: float


@dataclass(frozen=True)
class AuditReport:
    checks: tuple[ConstraintCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks)

    def __getitem__(self, name: str) -> ConstraintCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def __str__(self):
        return "\n".join(
            f"{'ok  ' if c.ok else 'FAIL'} {c.name:<24} residual={c.residual:.3g}" for c in self.checks
        )


def audit_constraints(solution: JbuaSolution, params: RadioParams, rtol: float = 1e-9) -> AuditReport:
    """Check power and association constraints; residuals are the amount of violation."""
    powers = np.asarray(solution.precoder.powers, dtype=float)
    budget = params.ap_power_watts
    total = solution.precoder.total_power
    m = np.asarray(solution.assignment.matrix, dtype=float)
    col = m.sum(axis=0)
    row = m.sum(axis=1)
    binary_gap = float(np.max(np.minimum(np.abs(m), np.abs(m - 1)))) if m.size else 0.0
    col_gap = float(np.max(np.abs(col - 1))) if col.size else 0.0
    if m.shape[0] == m.shape[1]:
        row_gap = float(np.max(np.abs(row - 1))) if row.size else 0.0
    else:
        row_gap = float(np.max(np.maximum(row - 1, 0))) if row.size else 0.0
    neg = float(max(0.0, -powers.min())) if powers.size else 0.0
    over = max(0.0, total - budget)
    checks = (
        ConstraintCheck("nonnegative_power", neg == 0.0, neg),
        ConstraintCheck("power_budget", total <= budget * (1 + rtol), over),
        ConstraintCheck("one_irs_per_user", col_gap == 0.0, col_gap),
        ConstraintCheck("one_user_per_irs", row_gap == 0.0, row_gap),
        ConstraintCheck("binary_association", binary_gap == 0.0, binary_gap),
    )
    return AuditReport(checks)


def recompute_sum_rate(solution: JbuaSolution, channels: ChannelSet, params: RadioParams,
                       mode: ObjectiveMode = ObjectiveMode.CLEAN_ZF) -> float:
    return objective(solution.assignment, solution.precoder, channels, noise_power_watts(params), mode)


def single_user_rates(channels: ChannelSet, params: RadioParams) -> np.ndarray:
    """Per-pair rate table ``log2(1 + (P/K) ||h_lk||^2 / sigma2)``, shape ``(L, K)``.

    Each entry is the zero-forcing rate of the pair served alone with its
    equal power share; it ignores how the pair's channel aligns with the
    other users' channels.
    """
    gain = np.sum(np.abs(channels.cascaded) ** 2, axis=-1)
    share = params.ap_power_watts / channels.num_users
    return np.log2(1.0 + share * gain / noise_power_watts(params))


