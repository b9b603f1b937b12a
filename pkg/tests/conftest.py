import numpy as np
import pytest

from irs_jbua.channel import IrsPanel, NetworkGeometry, RadioParams, Tier, synthesize_channels
from irs_jbua.harness import ScenarioConfig, build_geometry


def small_config(k=2, l=2, n=4, side=6, **kw) -> ScenarioConfig:
    """A cheap desk scenario: few antennas and small panels."""
    return ScenarioConfig(
        radio=RadioParams(num_ap_antennas=n), k_users=k, l_irs=l,
        reflectors_y=side, reflectors_z=side, **kw,
    )


def random_geometry(config: ScenarioConfig, seed: int) -> NetworkGeometry:
    return build_geometry(config, np.random.default_rng(seed))


def random_channels(config: ScenarioConfig, seed: int):
    geom = random_geometry(config, seed)
    return geom, synthesize_channels(geom, config.radio)


def complex_normal(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def single_panel(center, m_y=1, m_z=1, spacing=0.01, azimuth=0.0, tier=Tier.TERRESTRIAL):
    return IrsPanel(tier, m_y, m_z, center, spacing, azimuth)


@pytest.fixture
def radio():
    return RadioParams()


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if getattr(rep, "when", None) != "call" or "test_acceptance" not in rep.nodeid:
                continue
            props = dict(rep.user_properties)
            if "criterion" in props:
                lines.append((props["criterion"], outcome.upper()[:4], props.get("measured", "")))
    if lines:
        terminalreporter.section("acceptance criteria")
        for name, status, measured in sorted(lines):
            terminalreporter.write_line(f"{status:<4}  {name}  {measured}")


def slow_start_preferences(n: int):
    """Preferences on which user-proposing deferred acceptance needs n*n - n + 1 proposals.

    Users 0..n-2 rotate through IRSs 0..n-2 and user n-1 copies user 0; all
    rank IRS n-1 last.  Each IRS ranks its proposers in reverse order of
    arrival under a "newcomer always wins" schedule, so every proposal but
    the last displaces the holder.
    """
    from collections import deque

    from irs_jbua.association import PreferenceMatrix

    m = n - 1
    user_pref = [[(i + t) % m for t in range(m)] + [m] for i in range(m)]
    user_pref.append(list(range(m)) + [m])
    arrivals = [[] for _ in range(n)]
    nxt, held, free = [0] * n, [None] * n, deque(range(n))
    while free:
        k = free.popleft()
        l = user_pref[k][nxt[k]]
        nxt[k] += 1
        arrivals[l].append(k)
        if held[l] is not None:
            free.append(held[l])
        held[l] = k
    irs_pref = []
    for l in range(n):
        order = arrivals[l][::-1]
        irs_pref.append(order + [k for k in range(n) if k not in order])
    return PreferenceMatrix(np.array(user_pref), np.array(irs_pref))
