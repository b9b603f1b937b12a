import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import complex_normal
from irs_jbua.beamforming import (
    PowerPolicy,
    Precoder,
    allocate_power,
    condition_number,
    interference_power,
    noise_power_watts,
    rate,
    signal_power,
    sinr_general,
    sinr_zf,
    split_columns,
    zero_forcing,
    zf_precoder,
    zf_sum_rates,
)
from irs_jbua.channel import RadioParams, dbm_to_watts, watts_to_dbm
from irs_jbua.errors import InvalidParameterError, SingularChannelError


def test_noise_power_examples():
    p = RadioParams(bandwidth_hz=1.0, noise_figure_db=0.0)
    assert watts_to_dbm(noise_power_watts(p)) == pytest.approx(-174.0, abs=1e-12)
    ref = noise_power_watts(RadioParams())
    assert watts_to_dbm(ref) == pytest.approx(-77.9794, abs=1e-4)
    assert ref == pytest.approx(1.592e-11, rel=1e-3)
    doubled = noise_power_watts(RadioParams(bandwidth_hz=800e6))
    assert watts_to_dbm(doubled) - watts_to_dbm(ref) == pytest.approx(3.0103, abs=1e-4)


def test_zf_identity_and_scaling():
    for k in (1, 3, 5):
        assert np.allclose(zero_forcing(np.eye(k)), np.eye(k), atol=1e-15)
        c = 2.5 - 1.0j
        assert np.allclose(zero_forcing(c * np.eye(k)), np.eye(k) / c, atol=1e-15)


def test_zf_matches_columnwise_solve():
    rng = np.random.default_rng(42)
    H = complex_normal(rng, (3, 6))
    W = zero_forcing(H)
    assert np.max(np.abs(H @ W - np.eye(3))) < 1e-9
    # independent route: solve (H H^H) x_k = e_k one column at a time, W = H^H X
    G = H @ H.conj().T
    cols = [np.linalg.solve(G, np.eye(3)[:, k]) for k in range(3)]
    W_ref = H.conj().T @ np.column_stack(cols)
    assert np.allclose(W, W_ref, rtol=1e-10, atol=1e-12)
    assert np.allclose(W, np.linalg.pinv(H), rtol=1e-10, atol=1e-12)


def test_zf_rejects_degenerate_channels():
    H = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]], dtype=complex)
    with pytest.raises(SingularChannelError):
        zero_forcing(H)
    with pytest.raises(SingularChannelError):
        zero_forcing(np.ones((3, 2)))
    rng = np.random.default_rng(0)
    v = complex_normal(rng, 4)
    near = np.vstack([v, v + 1e-14 * complex_normal(rng, 4)])
    assert condition_number(near) > 1e12
    with pytest.raises(SingularChannelError) as info:
        zero_forcing(near)
    assert info.value.condition_number > 1e12


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(0, 24), st.integers(0, 2**32 - 1))
def test_zf_identity_property(k, extra, seed):
    rng = np.random.default_rng(seed)
    H = complex_normal(rng, (k, k + extra))
    W = zero_forcing(H)
    assert np.max(np.abs(H @ W - np.eye(k))) < 1e-9


def test_allocate_power_examples():
    p = RadioParams()
    assert allocate_power([0.7], p)[0] == pytest.approx(p.ap_power_watts, rel=1e-12)
    four = allocate_power([1.0, 2.0, 3.0, 4.0], p)
    assert np.allclose(four, dbm_to_watts(43.2) / 4)
    assert four[0] == pytest.approx(5.223, rel=1e-3)
    for policy in PowerPolicy:
        powers = allocate_power([0.3, 1.0, 2.2], p, policy)
        assert math.fsum(powers) == pytest.approx(p.ap_power_watts, rel=1e-9)
        assert np.all(powers >= 0)
    with pytest.raises(InvalidParameterError):
        allocate_power([1.0, 0.0], p)


def test_equal_rate_equalizes_sinr():
    rng = np.random.default_rng(7)
    H = complex_normal(rng, (3, 5))
    params = RadioParams()
    pre = zf_precoder(H, params, PowerPolicy.EQUAL_RATE)
    sinr = sinr_general(H.conj()[None], [0, 0, 0], pre, 1.0, assigned_only=True)
    # only the assigned path is present, so every user should see the same SINR
    assert np.allclose(sinr, sinr[0], rtol=1e-9)


def test_precoder_invariants():
    rng = np.random.default_rng(1)
    H = complex_normal(rng, (4, 8))
    params = RadioParams()
    pre = zf_precoder(H, params)
    assert np.allclose(np.linalg.norm(pre.directions, axis=0), 1.0, atol=1e-9)
    assert pre.total_power == pytest.approx(params.ap_power_watts, rel=1e-9)
    assert pre.scaled(2.0).total_power == pytest.approx(2 * params.ap_power_watts, rel=1e-9)
    d, norms = split_columns(zero_forcing(H))
    gains = np.abs(np.einsum("kn,nk->k", H, d))
    assert np.allclose(gains, 1 / norms, rtol=1e-9)


def _assigned_setup(rng, k=3, l=4, n=6):
    casc = complex_normal(rng, (l, k, n))
    u2i = list(rng.permutation(l)[:k])
    H = casc[u2i, np.arange(k)].conj()
    return casc, u2i, H


def test_sinr_examples():
    casc = np.ones((1, 1, 1), dtype=complex)
    pre = Precoder(np.ones((1, 1), dtype=complex), np.array([2.0]))
    assert sinr_general(casc, [0], pre, 2.0)[0] == pytest.approx(1.0)
    rng = np.random.default_rng(3)
    casc, u2i, H = _assigned_setup(rng)
    zero = Precoder(zf_precoder(H, RadioParams()).directions, np.zeros(3))
    assert np.all(sinr_general(casc, u2i, zero, 1e-11) == 0)


def test_interference_matches_explicit_double_sum():
    rng = np.random.default_rng(5)
    casc, u2i, H = _assigned_setup(rng)
    pre = Precoder(complex_normal(rng, (6, 3)), rng.uniform(0.1, 1.0, 3))
    got = interference_power(casc, u2i, pre)
    for k in range(3):
        want = 0.0
        for i in range(3):
            if i == k:
                continue
            for l in range(casc.shape[0]):
                want += pre.powers[i] * abs(np.vdot(casc[l, k], pre.directions[:, i])) ** 2
        assert got[k] == pytest.approx(want, rel=1e-12)


def test_zf_nulls_assigned_interference():
    rng = np.random.default_rng(8)
    for _ in range(50):
        casc, u2i, H = _assigned_setup(rng)
        pre = zf_precoder(H, RadioParams())
        sig = signal_power(casc, u2i, pre)
        interf = interference_power(casc, u2i, pre, assigned_only=True)
        assert np.all(interf < 1e-10 * sig)
        # interference through the other IRSs is not nulled
        assert np.all(interference_power(casc, u2i, pre) > interf)


def test_sinr_zf():
    assert sinr_zf(np.array([1.0 + 0j]), np.array([1.0 + 0j]), 0.5, 0.5) == pytest.approx(1.0)
    rng = np.random.default_rng(2)
    h, w = complex_normal(rng, 4), complex_normal(rng, 4)
    assert sinr_zf(h, w, 2.0, 0.3) == pytest.approx(2 * sinr_zf(h, w, 1.0, 0.3))
    casc, u2i, H = _assigned_setup(rng)
    pre = zf_precoder(H, RadioParams())
    sigma2 = 1e-3
    general = sinr_general(casc, u2i, pre, sigma2, assigned_only=True)
    for k in range(3):
        clean = sinr_zf(casc[u2i[k], k], pre.directions[:, k], pre.powers[k], sigma2)
        assert clean == pytest.approx(general[k], rel=1e-9)


def test_rate_examples():
    assert rate(0.0) == 0.0
    assert rate(1.0) == 1.0
    assert rate(3.0) == 2.0
    assert np.all(np.diff(rate(np.linspace(0, 100, 50))) > 0)
    with pytest.raises(InvalidParameterError):
        rate(-0.1)


def test_sum_rate_strictly_increasing_in_power():
    rng = np.random.default_rng(4)
    casc, u2i, H = _assigned_setup(rng)
    sigma2 = 1.0
    last = -1.0
    for dbm in np.linspace(10, 50, 9):
        pre = zf_precoder(H, RadioParams(ap_power_budget_dbm=float(dbm)))
        total = float(np.sum(rate(sinr_general(casc, u2i, pre, sigma2, assigned_only=True))))
        assert total > last
        last = total


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 100.0), st.integers(0, 2**32 - 1))
def test_scale_equivariance(c, seed):
    rng = np.random.default_rng(seed)
    H = complex_normal(rng, (3, 5))
    params = RadioParams()
    d1, n1 = split_columns(zero_forcing(H))
    d2, n2 = split_columns(zero_forcing(c * H))
    g1 = np.abs(np.einsum("kn,nk->k", H, d1))
    g2 = np.abs(np.einsum("kn,nk->k", c * H, d2))
    assert np.allclose(g2, c * g1, rtol=1e-9)
    r1 = zf_sum_rates(H[None], params.ap_power_watts, 1.0)
    r2 = zf_sum_rates((c * H)[None], params.ap_power_watts, 1.0)
    assert np.allclose(2.0 ** r2 - 1, c**2 * (2.0 ** r1 - 1), rtol=1e-8)


def test_batched_rates_match_single_path():
    rng = np.random.default_rng(6)
    params = RadioParams()
    sigma2 = noise_power_watts(params) * 1e10
    batch = complex_normal(rng, (20, 3, 5))
    batch[4, 1] = batch[4, 0]  # one degenerate matrix
    for policy in PowerPolicy:
        rates = zf_sum_rates(batch, params.ap_power_watts, sigma2, policy)
        assert np.all(np.isnan(rates[4]))
        for b in (0, 7, 19):
            pre = zf_precoder(batch[b], params, policy)
            casc = batch[b].conj()[None]
            sinr = sinr_general(casc, [0, 0, 0], pre, sigma2, assigned_only=True)
            assert np.allclose(rates[b], rate(sinr), rtol=1e-9)
