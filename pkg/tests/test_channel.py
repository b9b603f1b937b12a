import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import complex_normal, random_channels, single_panel, small_config
from irs_jbua.channel import (
    SPEED_OF_LIGHT,
    IrsPanel,
    NetworkGeometry,
    Position,
    RadioParams,
    Tier,
    ap_to_irs_channel,
    cascaded_channel,
    channel_matrix,
    configure_phases,
    dbm_to_watts,
    distance,
    irs_to_user_channel,
    path_loss_linear,
    reflection_matrix,
    watts_to_dbm,
    wave_number,
)
from irs_jbua.errors import (
    DegenerateGeometryError,
    InvalidAssignmentError,
    InvalidParameterError,
)


def test_distance_examples():
    assert distance(Position(0, 0, 0), Position(3, 4, 0)) == 5.0
    p = Position(1.5, -2.0, 7.0)
    assert distance(p, p) == 0.0
    assert distance(Position(1, 2, 2), Position(0, 0, 0)) == 3.0


def test_position_rejects_bad_coordinates():
    with pytest.raises(InvalidParameterError):
        Position(0, 0, -1)
    with pytest.raises(InvalidParameterError):
        Position(math.nan, 0, 0)


finite = st.floats(-1e4, 1e4, allow_nan=False)
heights = st.floats(0, 1e3, allow_nan=False)
positions = st.builds(Position, finite, finite, heights)


@given(positions, positions, positions)
def test_distance_symmetric_and_triangle(p, q, r):
    assert distance(p, q) == distance(q, p)
    assert distance(p, r) <= distance(p, q) + distance(q, r) + 1e-9


def test_wave_number():
    base = SPEED_OF_LIGHT / (2 * math.pi)
    assert wave_number(base) == pytest.approx(1.0, rel=1e-15)
    assert wave_number(2 * base) == pytest.approx(2.0, rel=1e-15)
    # 2*pi*15e9 / 299792458
    assert wave_number(15e9) == pytest.approx(314.3768, abs=1e-3)
    with pytest.raises(InvalidParameterError):
        wave_number(0.0)


def test_path_loss():
    f = 15e9
    d_ref = SPEED_OF_LIGHT / (4 * math.pi * f)
    assert path_loss_linear(d_ref, f) == pytest.approx(1.0, rel=1e-12)
    assert path_loss_linear(20.0, f) == pytest.approx(path_loss_linear(10.0, f) / 4, rel=1e-12)
    assert path_loss_linear(100.0, f) == pytest.approx(2.5330e-10, rel=1e-4)
    assert path_loss_linear(100.0, 2 * f) < path_loss_linear(100.0, f)
    with pytest.raises(InvalidParameterError):
        path_loss_linear(0.0, f)
    with pytest.raises(InvalidParameterError):
        path_loss_linear(-1.0, f)


def test_dbm_roundtrip():
    assert dbm_to_watts(30.0) == pytest.approx(1.0)
    assert dbm_to_watts(43.2) == pytest.approx(20.893, rel=1e-4)
    assert watts_to_dbm(dbm_to_watts(-77.98)) == pytest.approx(-77.98)


def _one_link_geometry(ap, panel, user=None):
    user = user or Position(panel.center.x + 3.0, panel.center.y + 1.0, 1.5)
    return NetworkGeometry(ap, (user,), (panel,), ap_normal_azimuth_rad=0.0)


def test_single_element_whole_wavelengths_is_real_positive():
    params = RadioParams(num_ap_antennas=1)
    lam = params.wavelength_m
    q = 1000
    panel = single_panel(Position(q * lam, 0.0, 10.0))
    geom = _one_link_geometry(Position(0.0, 0.0, 10.0), panel)
    F = ap_to_irs_channel(geom, params, 0)
    assert F.shape == (1, 1)
    expected = math.sqrt(path_loss_linear(q * lam, params.carrier_frequency_hz))
    assert F[0, 0].real == pytest.approx(expected, rel=1e-9)
    assert abs(F[0, 0].imag) < 1e-6 * expected


def test_equidistant_elements_have_equal_entries():
    params = RadioParams(num_ap_antennas=1)
    # elements spread along y, AP on the panel's normal axis (x)
    panel = single_panel(Position(0.0, 0.0, 10.0), m_y=2, m_z=1, spacing=params.wavelength_m / 2)
    geom = _one_link_geometry(Position(50.0, 0.0, 10.0), panel)
    F = ap_to_irs_channel(geom, params, 0)
    assert F.shape == (2, 1)
    assert F[0, 0] == pytest.approx(F[1, 0], rel=1e-12)


def test_user_equidistant_from_two_elements():
    params = RadioParams(num_ap_antennas=1)
    panel = single_panel(Position(0.0, 0.0, 10.0), m_y=2, m_z=1, spacing=params.wavelength_m / 2)
    user = Position(30.0, 0.0, 10.0)
    geom = _one_link_geometry(Position(50.0, 5.0, 10.0), panel, user)
    g = irs_to_user_channel(geom, params, 0, 0)
    assert g[0] == pytest.approx(g[1], rel=1e-12)


def test_irs_to_user_whole_wavelengths_is_real_positive():
    params = RadioParams(num_ap_antennas=1)
    lam = params.wavelength_m
    panel = single_panel(Position(0.0, 0.0, 10.0))
    user = Position(0.0, 0.0, 10.0 - 200 * lam)
    geom = _one_link_geometry(Position(50.0, 0.0, 10.0), panel, user)
    g = irs_to_user_channel(geom, params, 0, 0)
    assert g[0].real > 0
    assert abs(g[0].imag) < 1e-6 * abs(g[0])


def test_entries_match_per_element_oracle():
    cfg = small_config(k=2, l=2, n=4, side=3)
    geom, _ = random_channels(cfg, 5)
    params = cfg.radio
    f = params.carrier_frequency_hz
    w = 2 * math.pi * f / SPEED_OF_LIGHT
    antennas = geom.ap_antenna_positions(params)
    for l, panel in enumerate(geom.irs_panels):
        elems = panel.element_positions()
        F = ap_to_irs_channel(geom, params, l)
        for m in range(len(elems)):
            for n in range(len(antennas)):
                d = math.dist(elems[m], antennas[n])
                amp = SPEED_OF_LIGHT / (4 * math.pi * f * d)
                assert abs(F[m, n]) == pytest.approx(amp, rel=1e-12)
                phase_err = np.angle(F[m, n] * np.exp(1j * w * d))
                assert abs(phase_err) < 1e-6
        for k, user in enumerate(geom.users):
            g = irs_to_user_channel(geom, params, l, k)
            for m in range(len(elems)):
                d = math.dist(elems[m], user.as_array())
                assert abs(g[m]) == pytest.approx(SPEED_OF_LIGHT / (4 * math.pi * f * d), rel=1e-12)


def test_center_phase_approx_uses_one_phase():
    cfg = small_config(k=1, l=1, n=4, side=3)
    geom, _ = random_channels(cfg, 1)
    params = cfg.radio
    F = ap_to_irs_channel(geom, params, 0, center_phase_approx=True)
    d = distance(geom.ap, geom.irs_panels[0].center)
    expected = np.exp(-1j * wave_number(params.carrier_frequency_hz) * d)
    unit = F / np.abs(F)
    assert np.allclose(unit, expected, atol=1e-6)


def test_coincident_ap_and_irs_rejected():
    params = RadioParams(num_ap_antennas=1)
    panel = single_panel(Position(0.0, 0.0, 10.0))
    with pytest.raises((DegenerateGeometryError, InvalidParameterError)):
        geom = NetworkGeometry(Position(0.0, 0.0, 10.0), (Position(5, 5, 1.5),), (panel,), 0.0)
        ap_to_irs_channel(geom, params, 0)


def test_reflection_matrix():
    panel = single_panel(Position(0, 0, 10), m_y=2, m_z=2)
    assert np.array_equal(reflection_matrix(panel), np.eye(4))
    amps = np.array([1.0, 0.0, 0.5, 0.25])
    phases = np.array([0.0, 1.0, 2.0, 3.0])
    panel = IrsPanel(Tier.TERRESTRIAL, 2, 2, Position(0, 0, 10), 0.01, 0.0, amps, phases)
    theta = reflection_matrix(panel)
    assert theta[1, 1] == 0
    assert np.allclose(np.abs(np.diag(theta)), amps)
    assert np.count_nonzero(theta - np.diag(np.diag(theta))) == 0


def test_panel_validation():
    with pytest.raises(InvalidParameterError):
        IrsPanel(Tier.TERRESTRIAL, 0, 2, Position(0, 0, 1), 0.01)
    with pytest.raises(InvalidParameterError):
        IrsPanel(Tier.TERRESTRIAL, 1, 1, Position(0, 0, 1), 0.01, amplitudes=np.array([1.5]))
    with pytest.raises(InvalidParameterError):
        IrsPanel(Tier.TERRESTRIAL, 1, 1, Position(0, 0, 1), 0.01, phases=np.array([2 * math.pi]))


def test_configure_phases_single_element():
    F = np.array([[0.3 * np.exp(0.7j)]])
    f = np.array([0.2 * np.exp(-1.9j)])
    theta = configure_phases(F, f)
    h = cascaded_channel(F, np.diag(np.exp(1j * theta)), f)
    assert h[0].real == pytest.approx(0.06, rel=1e-12)
    assert abs(h[0].imag) < 1e-15


def test_configure_phases_zero_input_phases():
    theta = configure_phases(np.full((4, 3), 0.5 + 0j), np.full(4, 0.1 + 0j))
    assert np.array_equal(theta, np.zeros(4))


def test_cophasing_sums_magnitudes():
    rng = np.random.default_rng(3)
    F = complex_normal(rng, (4, 3))
    f = complex_normal(rng, 4)
    theta = configure_phases(F, f)
    h = cascaded_channel(F, np.diag(np.exp(1j * theta)), f)
    assert abs(h[0]) == pytest.approx(np.sum(np.abs(F[:, 0]) * np.abs(f)), rel=1e-12)


def test_cophasing_beats_phase_grid_search():
    rng = np.random.default_rng(11)
    levels = 2 * np.pi * np.arange(16) / 16
    for _ in range(20):
        F = complex_normal(rng, (2, 3))
        f = complex_normal(rng, 2)
        best = max(
            abs(np.conj(F[0, 0]) * np.exp(1j * a) * f[0] + np.conj(F[1, 0]) * np.exp(1j * b) * f[1])
            for a in levels
            for b in levels
        )
        theta = configure_phases(F, f)
        ours = abs(cascaded_channel(F, np.diag(np.exp(1j * theta)), f)[0])
        assert ours >= best - 1e-12
        # a 16-level grid is within half a step of every phase
        assert best >= ours * math.cos(np.pi / 16) - 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 16), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_cascade_matches_triple_loop(m, n, seed):
    rng = np.random.default_rng(seed)
    F = complex_normal(rng, (m, n))
    theta = np.diag(complex_normal(rng, m))
    f = complex_normal(rng, m)
    got = cascaded_channel(F, theta, f)
    want = np.zeros(n, dtype=complex)
    for nn in range(n):
        for mm in range(m):
            want[nn] += np.conj(F[mm, nn]) * theta[mm, mm] * f[mm]
    assert np.linalg.norm(got - want) <= 1e-12 * max(np.linalg.norm(want), 1e-300) + 1e-300


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 16), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_cophased_summands_have_zero_argument(m, n, seed):
    rng = np.random.default_rng(seed)
    F = complex_normal(rng, (m, n))
    f = complex_normal(rng, m)
    theta = configure_phases(F, f)
    assert np.all((theta >= 0) & (theta < 2 * np.pi))
    terms = np.conj(F[:, 0]) * np.exp(1j * theta) * f
    assert np.all(np.abs(terms.imag) <= 1e-12 * np.abs(terms) + 1e-300)
    assert np.all(terms.real >= 0)


def test_cascade_edge_cases():
    F = np.ones((3, 2), dtype=complex)
    assert np.array_equal(cascaded_channel(F, np.zeros((3, 3)), np.ones(3)), np.zeros(2))
    got = cascaded_channel(np.array([[2.0]]), np.array([[3.0]]), np.array([5.0]))
    assert got[0] == 30.0
    with pytest.raises(InvalidParameterError):
        cascaded_channel(np.ones((3, 2)), np.eye(2), np.ones(3))


def test_channel_set_matches_explicit_pipeline():
    cfg = small_config(k=2, l=3, n=4, side=3)
    geom, ch = random_channels(cfg, 9)
    params = cfg.radio
    for l, panel in enumerate(geom.irs_panels):
        F = ap_to_irs_channel(geom, params, l)
        for k in range(geom.num_users):
            g = irs_to_user_channel(geom, params, l, k)
            configured = panel.with_phases(configure_phases(F, g))
            h = cascaded_channel(F, reflection_matrix(configured), g)
            assert np.allclose(ch.cascaded[l, k], h, rtol=1e-10, atol=0)


def test_channel_matrix_rows():
    rng = np.random.default_rng(0)
    casc = complex_normal(rng, (3, 2, 4))
    H = channel_matrix(casc, [2, 0])
    assert np.array_equal(H[0], casc[2, 0].conj())
    assert np.array_equal(H[1], casc[0, 1].conj())
    H1 = channel_matrix(casc[:, :1], [1])
    assert np.array_equal(H1, casc[1, 0].conj()[None, :])
    # relabeling users permutes rows the same way
    swapped = channel_matrix(casc[:, ::-1], [0, 2])
    assert np.array_equal(swapped, H[::-1])
    with pytest.raises(InvalidAssignmentError):
        channel_matrix(casc, [0, -1])
    with pytest.raises(InvalidAssignmentError):
        channel_matrix(casc, [1, 1])
