"""Deterministic line-of-sight cascaded channels through reflecting surfaces.

Geometry is resolved per element: every AP antenna and every IRS element has
its own 3-D position on a half-wavelength grid, and each link entry is
``sqrt(pathloss(d)) * exp(-1j * wave_number * d)`` for the element-pair
distance ``d``.  With ``center_phase_approx=True`` the phase term uses the
panel-center distance instead, which reproduces the simplified model where
all elements of a panel share one phase.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from irs_jbua.errors import (
    DegenerateGeometryError,
    InvalidAssignmentError,
    InvalidParameterError,
)

SPEED_OF_LIGHT = 299_792_458.0
TWO_PI = 2.0 * math.pi


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    if watts <= 0:
        raise InvalidParameterError(f"power must be positive, got {watts}")
    return 10.0 * math.log10(watts) + 30.0


@dataclass(frozen=True)
class Position:
    x: float
    y: float
    z: float

    def __post_init__(self):
        coords = (self.x, self.y, self.z)
        if not all(math.isfinite(c) for c in coords):
            raise InvalidParameterError(f"non-finite coordinate in {coords}")
        if self.z < 0:
            raise InvalidParameterError(f"height must be >= 0, got z={self.z}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


@dataclass(frozen=True)
class RadioParams:
    """Narrowband radio configuration. Defaults are the FR3 reference values."""

    carrier_frequency_hz: float = 15e9
    bandwidth_hz: float = 400e6
    noise_density_dbm_per_hz: float = -174.0
    noise_figure_db: float = 10.0
    ap_power_budget_dbm: float = 43.2
    num_ap_antennas: int = 16

    def __post_init__(self):
        if not self.carrier_frequency_hz > 0:
            raise InvalidParameterError("carrier frequency must be positive")
        if not self.bandwidth_hz > 0:
            raise InvalidParameterError("bandwidth must be positive")
        if int(self.num_ap_antennas) != self.num_ap_antennas or self.num_ap_antennas < 1:
            raise InvalidParameterError("num_ap_antennas must be an integer >= 1")
        if not math.isfinite(self.ap_power_budget_dbm):
            raise InvalidParameterError("AP power budget must be finite")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency_hz

    @property
    def ap_power_watts(self) -> float:
        return dbm_to_watts(self.ap_power_budget_dbm)


class Tier(enum.Enum):
    TERRESTRIAL = "terrestrial"
    AERIAL = "aerial"


def planar_grid(
    center: np.ndarray,
    n_h: int,
    n_v: int,
    spacing: float,
    normal_azimuth_rad: float = 0.0,
    horizontal: bool = False,
) -> np.ndarray:
    """Element positions of a uniform planar array, shape ``(n_h * n_v, 3)``.

    A vertical array (``horizontal=False``) spans the local horizontal axis
    perpendicular to its normal azimuth and the global z axis.  A horizontal
    array spans x and y, facing straight down or up.  Elements are ordered
    with the horizontal index varying slowest.
    """
    if horizontal:
        u_h = np.array([1.0, 0.0, 0.0])
        u_v = np.array([0.0, 1.0, 0.0])
    else:
        u_h = np.array([-math.sin(normal_azimuth_rad), math.cos(normal_azimuth_rad), 0.0])
        u_v = np.array([0.0, 0.0, 1.0])
    ih = (np.arange(n_h) - (n_h - 1) / 2.0) * spacing
    iv = (np.arange(n_v) - (n_v - 1) / 2.0) * spacing
    offsets = ih[:, None, None] * u_h + iv[None, :, None] * u_v
    return np.asarray(center, dtype=float) + offsets.reshape(-1, 3)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class IrsPanel:
    """One reflecting surface: an ``m_y x m_z`` grid of passive elements.

    ``amplitudes`` and ``phases`` default to lossless reflection with zero
    phase shift.  Terrestrial panels stand vertically with their normal at
    ``normal_azimuth_rad``; aerial panels are horizontal.
    """

    tier: Tier
    m_y: int
    m_z: int
    center: Position
    element_spacing_m: float
    normal_azimuth_rad: float = 0.0
    amplitudes: np.ndarray | None = None
    phases: np.ndarray | None = None

    def __post_init__(self):
        if self.m_y < 1 or self.m_z < 1:
            raise InvalidParameterError(f"panel needs m_y, m_z >= 1, got {self.m_y}x{self.m_z}")
        if not self.element_spacing_m > 0:
            raise InvalidParameterError("element spacing must be positive")
        m = self.m_y * self.m_z
        amps = np.ones(m) if self.amplitudes is None else np.asarray(self.amplitudes, dtype=float)
        phs = np.zeros(m) if self.phases is None else np.asarray(self.phases, dtype=float)
        if amps.shape != (m,) or phs.shape != (m,):
            raise InvalidParameterError(f"amplitudes/phases must have shape ({m},)")
        if np.any(amps < 0) or np.any(amps > 1):
            raise InvalidParameterError("amplitudes must lie in [0, 1]")
        if np.any(phs < 0) or np.any(phs >= TWO_PI):
            raise InvalidParameterError("phases must lie in [0, 2*pi)")
        object.__setattr__(self, "amplitudes", _readonly(amps))
        object.__setattr__(self, "phases", _readonly(phs))

    @property
    def num_elements(self) -> int:
        return self.m_y * self.m_z

    def element_positions(self) -> np.ndarray:
        return planar_grid(
            self.center.as_array(),
            self.m_y,
            self.m_z,
            self.element_spacing_m,
            self.normal_azimuth_rad,
            horizontal=self.tier is Tier.AERIAL,
        )

    def with_phases(self, phases: np.ndarray) -> "IrsPanel":
        return replace(self, phases=np.mod(np.asarray(phases, dtype=float), TWO_PI))


def ap_array_shape(n: int) -> tuple[int, int]:
    """Split ``n`` antennas into the most square ``(n_h, n_v)`` grid."""
    n_v = max(d for d in range(1, int(math.isqrt(n)) + 1) if n % d == 0)
    return n // n_v, n_v


@dataclass(frozen=True, eq=False)
class NetworkGeometry:
    ap: Position
    users: tuple[Position, ...]
    irs_panels: tuple[IrsPanel, ...]
    ap_normal_azimuth_rad: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "irs_panels", tuple(self.irs_panels))
        if len(self.users) < 1:
            raise InvalidParameterError("need at least one user")
        if len(self.irs_panels) < len(self.users):
            raise InvalidParameterError(
                f"one-to-one association needs L >= K (L={len(self.irs_panels)}, K={len(self.users)})"
            )
        for l, panel in enumerate(self.irs_panels):
            if distance(self.ap, panel.center) <= 0:
                raise DegenerateGeometryError(f"AP coincides with IRS {l}")
            for k, user in enumerate(self.users):
                if distance(panel.center, user) <= 0:
                    raise DegenerateGeometryError(f"user {k} coincides with IRS {l}")

    @property
    def num_users(self) -> int:
        return len(self.users)

    @property
    def num_irs(self) -> int:
        return len(self.irs_panels)

    def ap_antenna_positions(self, params: RadioParams) -> np.ndarray:
        n_h, n_v = ap_array_shape(params.num_ap_antennas)
        return planar_grid(
            self.ap.as_array(), n_h, n_v, params.wavelength_m / 2.0, self.ap_normal_azimuth_rad
        )


def distance(p: Position, q: Position) -> float:
    return math.dist((p.x, p.y, p.z), (q.x, q.y, q.z))


def wave_number(f: float) -> float:
    if not f > 0:
        raise InvalidParameterError(f"frequency must be positive, got {f}")
    return TWO_PI * f / SPEED_OF_LIGHT


def path_loss_linear(d, f: float):
    """Free-space power gain ``(c / (4 pi f d))**2``; accepts scalars or arrays."""
    if not f > 0:
        raise InvalidParameterError(f"frequency must be positive, got {f}")
    d_arr = np.asarray(d, dtype=float)
    if np.any(~(d_arr > 0)):
        raise InvalidParameterError("distance must be positive")
    gain = (SPEED_OF_LIGHT / (4.0 * math.pi * f * d_arr)) ** 2
    return float(gain) if gain.ndim == 0 else gain


def _link(rx: np.ndarray, tx: np.ndarray, f: float, phase_distance: float | None) -> np.ndarray:
    """Entries ``sqrt(l(d)) exp(-j w d)`` with rows over ``rx`` and columns over ``tx``."""
    d = np.linalg.norm(rx[:, None, :] - tx[None, :, :], axis=-1)
    if np.any(d <= 0):
        raise DegenerateGeometryError("coincident transmit and receive elements")
    phase_d = d if phase_distance is None else phase_distance
    return np.sqrt(path_loss_linear(d, f)) * np.exp(-1j * wave_number(f) * phase_d)


def ap_to_irs_channel(
    geom: NetworkGeometry, params: RadioParams, l: int, *, center_phase_approx: bool = False
) -> np.ndarray:
    """AP -> IRS ``l`` channel matrix, shape ``(M, N)``."""
    if not 0 <= l < geom.num_irs:
        raise InvalidParameterError(f"IRS index {l} out of range")
    return infrastructure_channels(
        geom.ap,
        geom.ap_normal_azimuth_rad,
        [geom.irs_panels[l]],
        params,
        center_phase_approx=center_phase_approx,
    )[0]


def irs_to_user_channel(
    geom: NetworkGeometry,
    params: RadioParams,
    l: int,
    k: int,
    *,
    center_phase_approx: bool = False,
) -> np.ndarray:
    """IRS ``l`` -> user ``k`` channel vector, shape ``(M,)``."""
    if not 0 <= l < geom.num_irs or not 0 <= k < geom.num_users:
        raise InvalidParameterError(f"index out of range: l={l}, k={k}")
    panel = geom.irs_panels[l]
    user = geom.users[k]
    d_center = distance(panel.center, user)
    if d_center <= 0:
        raise DegenerateGeometryError(f"user {k} coincides with IRS {l}")
    return _link(
        panel.element_positions(),
        user.as_array()[None, :],
        params.carrier_frequency_hz,
        d_center if center_phase_approx else None,
    )[:, 0]


def reflection_matrix(panel: IrsPanel) -> np.ndarray:
    return np.diag(panel.amplitudes * np.exp(1j * panel.phases))


def configure_phases(F_l: np.ndarray, f_lk: np.ndarray) -> np.ndarray:
    """Co-phase every element toward AP antenna 0 for one user.

    With ``h = F^H diag(exp(j theta)) f`` the contribution of element ``m`` to
    ``h[0]`` is ``conj(F[m, 0]) exp(j theta_m) f[m]``; choosing
    ``theta_m = arg F[m, 0] - arg f[m]`` makes every such term real and
    non-negative.
    """
    F_l = np.asarray(F_l)
    f_lk = np.asarray(f_lk)
    if F_l.ndim != 2 or f_lk.shape != (F_l.shape[0],):
        raise InvalidParameterError(f"shape mismatch: F {F_l.shape}, f {f_lk.shape}")
    theta = np.mod(np.angle(F_l[:, 0]) - np.angle(f_lk), TWO_PI)
    # mod can return exactly 2*pi for tiny negative inputs
    theta[theta >= TWO_PI] = 0.0
    return theta


def cascaded_channel(F_l: np.ndarray, theta_l: np.ndarray, f_lk: np.ndarray) -> np.ndarray:
    """``F_l^H @ Theta_l @ f_lk`` for a reflection matrix ``Theta_l``."""
    F_l = np.asarray(F_l)
    theta_l = np.asarray(theta_l)
    f_lk = np.asarray(f_lk)
    m = F_l.shape[0] if F_l.ndim == 2 else -1
    if theta_l.shape != (m, m) or f_lk.shape != (m,):
        raise InvalidParameterError(
            f"shape mismatch: F {F_l.shape}, Theta {theta_l.shape}, f {f_lk.shape}"
        )
    return F_l.conj().T @ (theta_l @ f_lk)


def channel_matrix(cascaded: np.ndarray, user_to_irs: Sequence[int]) -> np.ndarray:
    """Stack ``h_{l(k),k}^H`` into the ``(K, N)`` downlink matrix.

    ``cascaded`` has shape ``(L, K, N)``; ``user_to_irs[k]`` is the IRS
    serving user ``k`` (``-1`` or ``None`` marks an unassigned user).
    """
    cascaded = np.asarray(cascaded)
    num_irs, num_users = cascaded.shape[:2]
    if len(user_to_irs) != num_users:
        raise InvalidAssignmentError(f"assignment covers {len(user_to_irs)} of {num_users} users")
    seen = set()
    for k, l in enumerate(user_to_irs):
        if l is None or l < 0:
            raise InvalidAssignmentError(f"user {k} is unassigned")
        if l >= num_irs or l in seen:
            raise InvalidAssignmentError(f"IRS {l} invalid or used twice")
        seen.add(l)
    idx = np.asarray(user_to_irs, dtype=int)
    return cascaded[idx, np.arange(num_users)].conj()


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """All per-realization channels.

    ``f_matrices[l]`` is the ``(M, N)`` AP -> IRS channel, ``g_vectors[l]``
    the ``(K, M)`` IRS -> user channels, and ``cascaded[l, k]`` the length-N
    cascaded channel of user ``k`` through IRS ``l`` with that IRS co-phased
    for user ``k``.  ``amplitudes[l]`` holds the panel reflection amplitudes.
    """

    f_matrices: tuple[np.ndarray, ...]
    g_vectors: tuple[np.ndarray, ...]
    amplitudes: tuple[np.ndarray, ...]
    cascaded: np.ndarray = field(init=False)

    def __post_init__(self):
        casc = []
        for F, g, amp in zip(self.f_matrices, self.g_vectors, self.amplitudes):
            # |g| * amp * exp(j arg F[:, 0]) is Theta f under the co-phasing rule
            aligned = np.abs(g) * amp * np.exp(1j * np.angle(F[:, 0]))
            casc.append(aligned @ F.conj())
        object.__setattr__(self, "cascaded", np.stack(casc))

    @property
    def num_irs(self) -> int:
        return len(self.f_matrices)

    @property
    def num_users(self) -> int:
        return self.g_vectors[0].shape[0]

    @property
    def num_antennas(self) -> int:
        return self.f_matrices[0].shape[1]

    def phases_for(self, l: int, k: int | None) -> np.ndarray:
        """Phase vector of IRS ``l`` when serving user ``k`` (zeros when idle)."""
        if k is None:
            return np.zeros(self.f_matrices[l].shape[0])
        return configure_phases(self.f_matrices[l], self.g_vectors[l][k])

    def configured_cascade(self, user_to_irs: Sequence[int]) -> np.ndarray:
        """Cascaded channels of every user through every IRS, shape ``(L, K, N)``.

        Each IRS is co-phased for the user it serves; idle IRSs keep zero
        phases.  Needed for interference through IRSs other than a user's own.
        """
        owner = {int(l): k for k, l in enumerate(user_to_irs)}
        out = np.empty((self.num_irs, self.num_users, self.num_antennas), dtype=complex)
        for l in range(self.num_irs):
            theta = self.phases_for(l, owner.get(l))
            reflected = self.g_vectors[l] * (self.amplitudes[l] * np.exp(1j * theta))
            out[l] = reflected @ self.f_matrices[l].conj()
        return out


def add_rician_scatter(
    los: np.ndarray, k_factor_db: float, rng: np.random.Generator
) -> np.ndarray:
    """Mix i.i.d. complex Gaussian scatter into a LoS channel at the given K-factor.

    The scatter keeps each entry's mean power equal to its LoS power.
    """
    k = 10.0 ** (k_factor_db / 10.0)
    scatter = (rng.standard_normal(los.shape) + 1j * rng.standard_normal(los.shape)) / math.sqrt(2)
    return math.sqrt(k / (k + 1)) * los + math.sqrt(1 / (k + 1)) * np.abs(los) * scatter


def irs_link_matrices(
    geom: NetworkGeometry, params: RadioParams, *, center_phase_approx: bool = False
) -> tuple[np.ndarray, ...]:
    """AP -> IRS matrices for every panel; independent of user positions."""
    return infrastructure_channels(
        geom.ap, geom.ap_normal_azimuth_rad, geom.irs_panels, params,
        center_phase_approx=center_phase_approx,
    )


def infrastructure_channels(
    ap: Position,
    ap_normal_azimuth_rad: float,
    panels: Sequence[IrsPanel],
    params: RadioParams,
    *,
    center_phase_approx: bool = False,
) -> tuple[np.ndarray, ...]:
    """AP -> IRS matrices without a user drop, for caching across trials."""
    n_h, n_v = ap_array_shape(params.num_ap_antennas)
    antennas = planar_grid(ap.as_array(), n_h, n_v, params.wavelength_m / 2.0, ap_normal_azimuth_rad)
    out = []
    for l, panel in enumerate(panels):
        d_center = distance(ap, panel.center)
        if d_center <= 0:
            raise DegenerateGeometryError(f"AP coincides with IRS {l}")
        out.append(
            _link(
                panel.element_positions(),
                antennas,
                params.carrier_frequency_hz,
                d_center if center_phase_approx else None,
            )
        )
    return tuple(out)


def synthesize_channels(
    geom: NetworkGeometry,
    params: RadioParams,
    *,
    center_phase_approx: bool = False,
    rician_k_db: float | None = None,
    rng: np.random.Generator | None = None,
    f_matrices: Sequence[np.ndarray] | None = None,
) -> ChannelSet:
    """Build every channel of one realization.

    ``f_matrices`` may carry precomputed AP -> IRS matrices (they only depend
    on the fixed infrastructure).  ``rician_k_db`` enables scatter on both
    hops and then requires ``rng``.
    """
    if f_matrices is None:
        f_matrices = irs_link_matrices(geom, params, center_phase_approx=center_phase_approx)
    f = params.carrier_frequency_hz
    w = wave_number(f)
    users = np.array([u.as_array() for u in geom.users])
    g_vectors = []
    for l, panel in enumerate(geom.irs_panels):
        elems = panel.element_positions()
        d = np.linalg.norm(users[:, None, :] - elems[None, :, :], axis=-1)
        if np.any(d <= 0):
            raise DegenerateGeometryError(f"a user coincides with an element of IRS {l}")
        if center_phase_approx:
            phase_d = np.linalg.norm(users - panel.center.as_array(), axis=1)[:, None]
        else:
            phase_d = d
        g_vectors.append(np.sqrt(path_loss_linear(d, f)) * np.exp(-1j * w * phase_d))
    f_matrices = tuple(f_matrices)
    if rician_k_db is not None:
        if rng is None:
            raise InvalidParameterError("rician scatter needs an rng")
        f_matrices = tuple(add_rician_scatter(F, rician_k_db, rng) for F in f_matrices)
        g_vectors = [add_rician_scatter(g, rician_k_db, rng) for g in g_vectors]
    return ChannelSet(
        f_matrices=f_matrices,
        g_vectors=tuple(g_vectors),
        amplitudes=tuple(p.amplitudes for p in geom.irs_panels),
    )
