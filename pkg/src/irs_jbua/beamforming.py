"""Zero-forcing precoding, power allocation, SINR and rate."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from irs_jbua.channel import RadioParams, dbm_to_watts
from irs_jbua.errors import InvalidParameterError, SingularChannelError

# condition number of H above which a realization counts as degenerate
COND_LIMIT = 1e12


class PowerPolicy(enum.Enum):
    EQUAL_POWER = "equal_power"
    EQUAL_RATE = "equal_rate"


@dataclass(frozen=True, eq=False)
class Precoder:
    """Unit-norm beam directions (columns, ``N x K``) and per-user powers."""

    directions: np.ndarray
    powers: np.ndarray

    @property
    def num_users(self) -> int:
        return self.directions.shape[1]

    @property
    def total_power(self) -> float:
        norms = np.sum(np.abs(self.directions) ** 2, axis=0)
        return math.fsum(self.powers * norms)

    def scaled(self, factor: float) -> "Precoder":
        """Same directions with every power multiplied by ``factor``."""
        return Precoder(self.directions, self.powers * factor)

    def effective(self) -> np.ndarray:
        """Power-scaled precoding matrix with columns ``sqrt(p_k) w_k``."""
        return self.directions * np.sqrt(self.powers)


@dataclass(frozen=True, eq=False)
class LinkMetrics:
    sinr: np.ndarray
    rate_bps_hz: np.ndarray
    sum_rate_bps_hz: float
    interference_power: np.ndarray


def noise_power_watts(params: RadioParams) -> float:
    """Thermal noise power over the band including the receiver noise figure."""
    dbm = (
        params.noise_density_dbm_per_hz
        + 10.0 * math.log10(params.bandwidth_hz)
        + params.noise_figure_db
    )
    return dbm_to_watts(dbm)


def condition_number(H: np.ndarray) -> float:
    s = np.linalg.svd(H, compute_uv=False)
    return float(s[0] / s[-1]) if s[-1] > 0 else math.inf


def zero_forcing(H: np.ndarray) -> np.ndarray:
    """Right pseudo-inverse ``H^H (H H^H)^-1`` of a fat ``K x N`` channel.

    Raises
    ------
    SingularChannelError
        If ``K > N`` or the condition number of ``H`` exceeds ``COND_LIMIT``.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2:
        raise InvalidParameterError(f"H must be 2-D, got shape {H.shape}")
    k, n = H.shape
    if k > n:
        raise SingularChannelError(f"cannot zero-force {k} users with {n} antennas")
    cond = condition_number(H)
    if not cond <= COND_LIMIT:
        raise SingularChannelError(f"channel condition number {cond:.3g} exceeds limit", cond)
    # H^H = Q R gives the Cholesky factorization H H^H = R^H R without
    # squaring the condition number by forming the Gram matrix
    q, r = linalg.qr(H.conj().T, mode="economic", check_finite=False)
    if np.any(np.abs(np.diag(r)) == 0):
        raise SingularChannelError("channel matrix is rank deficient", cond)
    return q @ linalg.solve_triangular(r, np.eye(k), trans="C", check_finite=False)


def split_columns(W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Normalize precoder columns; returns ``(directions, column_norms)``.

    The column norms of a zero-forcing matrix are the inverse effective gains:
    ``|h_k^H w_k| = 1 / norm_k`` after normalization.
    """
    norms = np.linalg.norm(W, axis=0)
    return W / norms, norms


def allocate_power(
    zf_weights: Sequence[float],
    params: RadioParams,
    policy: PowerPolicy = PowerPolicy.EQUAL_POWER,
) -> np.ndarray:
    """Split the AP budget over unit-norm beams.

    ``EQUAL_POWER`` gives every user ``P_AP / K``.  ``EQUAL_RATE`` scales
    ``p_k`` with the squared zero-forcing column norm so all users see the
    same SINR.  Either way the budget is met with equality.
    """
    weights = np.asarray(zf_weights, dtype=float)
    if np.any(~(weights > 0)):
        raise InvalidParameterError("zero-forcing weights must be positive")
    budget = params.ap_power_watts
    if policy is PowerPolicy.EQUAL_POWER:
        powers = np.full(weights.shape, budget / weights.size)
    elif policy is PowerPolicy.EQUAL_RATE:
        sq = weights**2
        powers = budget * sq / math.fsum(sq)
    else:
        raise InvalidParameterError(f"unknown power policy {policy!r}")
    return powers


def zf_precoder(
    H: np.ndarray, params: RadioParams, policy: PowerPolicy = PowerPolicy.EQUAL_POWER
) -> Precoder:
    directions, norms = split_columns(zero_forcing(H))
    return Precoder(directions, allocate_power(norms, params, policy))


def interference_power(
    cascaded: np.ndarray,
    user_to_irs: Sequence[int],
    precoder: Precoder,
    *,
    assigned_only: bool = False,
) -> np.ndarray:
    """Per-user multi-user interference in watts (times unit channel gain).

    By default the interference from every other user's beam is summed over
    all IRSs, i.e. ``sum_{i != k} sum_l p_i |h_{l,k}^H w_i|^2``.  With
    ``assigned_only`` only the user's own IRS path is counted, which is the
    part zero-forcing nulls.
    """
    cascaded = np.asarray(cascaded)
    num_users = precoder.num_users
    idx = np.asarray(user_to_irs, dtype=int)
    if assigned_only:
        paths = cascaded[idx, np.arange(num_users)][None, :, :]
    else:
        paths = cascaded
    # gains[l, k, i] = |h_{l,k}^H w_i|^2
    gains = np.abs(np.einsum("lkn,ni->lki", paths.conj(), precoder.directions)) ** 2
    per_beam = gains.sum(axis=0) * precoder.powers[None, :]
    np.fill_diagonal(per_beam, 0.0)
    return per_beam.sum(axis=1)


def signal_power(cascaded: np.ndarray, user_to_irs: Sequence[int], precoder: Precoder) -> np.ndarray:
    idx = np.asarray(user_to_irs, dtype=int)
    h = np.asarray(cascaded)[idx, np.arange(precoder.num_users)]
    gain = np.abs(np.einsum("kn,nk->k", h.conj(), precoder.directions)) ** 2
    return precoder.powers * gain


def sinr_general(
    cascaded: np.ndarray,
    user_to_irs: Sequence[int],
    precoder: Precoder,
    sigma2: float,
    *,
    assigned_only: bool = False,
) -> np.ndarray:
    """SINR with interference summed over every IRS path (see ``interference_power``)."""
    signal = signal_power(cascaded, user_to_irs, precoder)
    interf = interference_power(cascaded, user_to_irs, precoder, assigned_only=assigned_only)
    return signal / (interf + sigma2)


def sinr_zf(h_k: np.ndarray, w_k: np.ndarray, p_k: float, sigma2: float) -> float:
    """Interference-free SINR ``p_k |h_k^H w_k|^2 / sigma2``."""
    if not sigma2 > 0:
        raise InvalidParameterError("noise power must be positive")
    return float(p_k * abs(np.vdot(h_k, w_k)) ** 2 / sigma2)


def rate(sinr):
    """Achievable rate ``log2(1 + sinr)`` in bit/s/Hz (scalar or array)."""
    s = np.asarray(sinr, dtype=float)
    if np.any(s < 0) or np.any(np.isnan(s)):
        raise InvalidParameterError("SINR must be non-negative")
    r = np.log2(1.0 + s)
    return float(r) if r.ndim == 0 else r


def link_metrics(sinr: np.ndarray, interference: np.ndarray) -> LinkMetrics:
    rates = rate(np.atleast_1d(sinr))
    return LinkMetrics(
        sinr=np.atleast_1d(sinr),
        rate_bps_hz=rates,
        sum_rate_bps_hz=math.fsum(rates),
        interference_power=np.atleast_1d(interference),
    )


def zf_sum_rates(
    H_batch: np.ndarray,
    power_watts: float,
    sigma2: float,
    policy: PowerPolicy = PowerPolicy.EQUAL_POWER,
) -> np.ndarray:
    """Interference-free zero-forcing rates for a batch of channel matrices.

    ``H_batch`` has shape ``(B, K, N)``; returns per-user rates ``(B, K)``.
    Rows whose matrix is degenerate (condition number above ``COND_LIMIT``)
    come back as NaN.  Uses ``||w_k||^2 = [(H H^H)^-1]_kk`` instead of forming
    the precoders.
    """
    H_batch = np.asarray(H_batch, dtype=complex)
    b, k, _ = H_batch.shape
    s = np.linalg.svd(H_batch, compute_uv=False)
    ok = s[:, -1] * COND_LIMIT >= s[:, 0]
    rates = np.full((b, k), np.nan)
    if not np.any(ok):
        return rates
    _, r = np.linalg.qr(np.conj(np.swapaxes(H_batch[ok], -1, -2)))
    inv_r = np.linalg.solve(r, np.broadcast_to(np.eye(k), r.shape))
    # diag((R^H R)^-1) = squared row norms of R^-1
    norms_sq = np.sum(np.abs(inv_r) ** 2, axis=-1)
    if policy is PowerPolicy.EQUAL_POWER:
        sinr = (power_watts / k) / (sigma2 * norms_sq)
    elif policy is PowerPolicy.EQUAL_RATE:
        common = power_watts / (sigma2 * norms_sq.sum(axis=-1, keepdims=True))
        sinr = np.broadcast_to(common, norms_sq.shape)
    else:
        raise InvalidParameterError(f"unknown power policy {policy!r}")
    rates[ok] = np.log2(1.0 + sinr)
    return rates
