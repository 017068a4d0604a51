import math

import numpy as np
import pytest

from ablasim.geometry import Region
from ablasim.oracles import (
    build_strip_mesh,
    front_position,
    manufactured_solution,
    Oracle1DConfig,
    OracleError,
    oracle_be_1d,
    oracle_hbe_1d,
    rod_energy,
)

MUSCLE = dict(rho=1200.0, c=3200.0, k=0.55)


def _cfg(**kw):
    base = dict(length=4e-3, **MUSCLE)
    base.update(kw)
    return Oracle1DConfig(**base)


def test_series_reaches_steady_state():
    cfg = _cfg(left=("dirichlet", 57.0), right=("dirichlet", 37.0), source=2e5)
    x, T = oracle_be_1d(cfg, [1e6])
    steady = 57.0 + (37.0 - 57.0) * x / cfg.length + cfg.source * x * (cfg.length - x) / (2 * cfg.k)
    assert np.max(np.abs(T[0] - steady)) < 1e-9


def test_series_initial_state_in_interior():
    cfg = _cfg(left=("dirichlet", 57.0))
    x, T = oracle_be_1d(cfg, [1e-3])
    mid = (x > 0.4 * cfg.length) & (x < 0.9 * cfg.length)
    assert np.max(np.abs(T[0, mid] - 37.0)) < 1e-6


def test_fd_tau_zero_matches_series():
    cfg = _cfg(left=("dirichlet", 57.0), source=2e5, nx=400, cfl=0.45)
    times = [5.0, 10.0]
    _, Ts = oracle_be_1d(cfg, times)
    _, Tf = oracle_hbe_1d(cfg, times)
    assert np.max(np.abs(Ts - Tf)) < 5e-3


def test_fd_requested_time_zero_returns_initial_state():
    cfg = _cfg(left=("dirichlet", 57.0), nx=64)
    x, T = oracle_hbe_1d(cfg, [0.0, 1.0])
    inside = T[0, 1:-1]
    assert np.all(inside == 37.0)
    assert T[0, 0] == 57.0  # boundary value applies from the start


def test_insulated_rod_energy_tracks_source_exactly():
    # uniform source + insulated ends: T stays spatially uniform, so the
    # discrete scheme must reproduce E = Q L t with no spatial error at all
    for tau in (0.0, 4.0):
        cfg = _cfg(tau=tau, source=5e5, nx=200,
                   left=("neumann", 0.0), right=("neumann", 0.0))
        t_end = 10.0
        x, T = oracle_hbe_1d(cfg, [t_end])
        e = rod_energy(cfg, x, T[0])
        assert e == pytest.approx(cfg.source * cfg.length * t_end, rel=1e-7)


def test_hyperbolic_front_speed_near_exact():
    cfg = _cfg(tau=16.0, left=("dirichlet", 57.0), nx=1000, cfl=0.45)
    times = [5.0, 10.0, 15.0]
    x, T = oracle_hbe_1d(cfg, times)
    pos = [front_position(x, T[i], 37.0) for i in range(len(times))]
    speed = np.polyfit(times, pos, 1)[0]
    exact = math.sqrt(cfg.alpha / cfg.tau)
    assert speed == pytest.approx(exact, rel=0.02)


def test_front_position_on_synthetic_profiles():
    x = np.linspace(0.0, 1.0, 11)
    assert front_position(x, np.full(11, 37.0), 37.0) == 0.0
    ramp = 37.0 + (1.0 - x)
    assert front_position(x, ramp, 37.0) == pytest.approx(0.5)
    assert front_position(x, np.full(11, 40.0), 37.0) == 1.0


def test_manufactured_forcing_parabolic():
    ms = manufactured_solution("37 + z**2 * t", **MUSCLE)
    r = np.array([0.5e-3, 1e-3])
    z = np.array([1e-3, 2e-3])
    rho_c = MUSCLE["rho"] * MUSCLE["c"]
    expected = rho_c * z**2 - MUSCLE["k"] * 2.0 * 3.0  # at t = 3
    assert np.allclose(ms.source(r, z, 3.0), expected, rtol=1e-12)
    assert np.allclose(ms.temperature(r, z, 3.0), 37.0 + z**2 * 3.0, rtol=1e-12)
    assert np.allclose(ms.temperature_rate(r, z, 3.0), z**2, rtol=1e-12)


def test_manufactured_forcing_includes_radial_laplacian():
    ms = manufactured_solution("r**2", **MUSCLE)
    # (1/r) d/dr (r dT/dr) = 4 for T = r^2, steady in time
    got = ms.source(np.array([1e-3]), np.array([0.0]), 0.0)
    assert got == pytest.approx(-4.0 * MUSCLE["k"], rel=1e-12)


def test_manufactured_hyperbolic_adds_relaxation_term():
    ms = manufactured_solution("t**2", tau=2.0, mode="hbe", **MUSCLE)
    rho_c = MUSCLE["rho"] * MUSCLE["c"]
    got = ms.source(np.array([1e-3]), np.array([1e-3]), 5.0)
    assert got == pytest.approx(rho_c * (2.0 * 2.0 + 2.0 * 5.0), rel=1e-12)


@pytest.mark.parametrize("kw, exc", [
    (dict(tau=-1.0), OracleError),
    (dict(nx=4), OracleError),
    (dict(left=("flux", 0.0)), OracleError),
    (dict(cfl=0.0), OracleError),
])
def test_bad_config_rejected(kw, exc):
    with pytest.raises(exc):
        oracle_hbe_1d(_cfg(**kw), [1.0])


def test_series_requires_dirichlet_and_positive_times():
    with pytest.raises(OracleError):
        oracle_be_1d(_cfg(left=("neumann", 0.0)), [1.0])
    with pytest.raises(OracleError):
        oracle_be_1d(_cfg(), [0.0])


def test_strip_mesh_shape_and_volume():
    mesh = build_strip_mesh(1e-3, 3e-3, 0.0, 4e-3, 4, 10)
    mesh.validate()
    assert mesh.n_nodes == 5 * 11
    vol = sum(mesh.region_volumes().values())
    exact = math.pi * (9e-6 - 1e-6) * 4e-3
    assert vol == pytest.approx(exact, rel=1e-12)
    assert set(np.unique(mesh.tri_region)) == {int(Region.MUSCLE)}
