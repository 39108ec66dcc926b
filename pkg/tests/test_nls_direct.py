"""Direct solver checks: exact solutions, conservation, reversibility."""

import numpy as np
import pytest

from nlsbarrier.nls_direct import (
    Trajectory,
    Wavefield,
    euler_residual,
    evolve,
    init_barrier,
    init_soliton,
    local_average,
    make_grid,
    moments,
)
from nlsbarrier.scattering import admissible_h


def _dt_for(p, T=1.0, target=0.1):
    # largest step obeying dt*A^2/h <= target that divides T evenly
    raw = target * p.h / p.A**2
    n = int(np.ceil(T / raw))
    return T / n


@pytest.fixture(scope="module")
def p10():
    return admissible_h(2.0, 10)


def test_grid_basics():
    g = make_grid(L=8.0, N=256)
    assert g.xs[0] == -8.0 and len(g.xs) == 256
    assert g.dx == pytest.approx(16.0 / 256)
    with pytest.raises(ValueError):
        make_grid(N=100)  # not a power of two


def test_barrier_profile(p10):
    g = make_grid(L=8.0, N=4096)
    u0 = init_barrier(g, p10)
    assert u0.values[np.argmin(np.abs(g.xs))] == p10.A
    assert u0.values[np.argmin(np.abs(g.xs - 0.75))] == 0
    j = np.argmin(np.abs(g.xs - 0.5))
    assert u0.values[j] == pytest.approx(p10.A / 2)
    with pytest.raises(ValueError):
        init_barrier(make_grid(L=0.4, N=64), p10)


def test_zero_solution(p10):
    g = make_grid(N=256)
    z = Wavefield(grid=g, values=np.zeros(256, dtype=complex), time=0.0)
    out = evolve(z, p10, dt=1e-3, T=0.05).final
    assert np.max(np.abs(out.values)) == 0.0


def test_soliton_modulus_stationary(p10):
    g = make_grid(L=8.0, N=4096)
    u0 = init_soliton(g, p10)
    dt = _dt_for(p10, T=1.0, target=0.025)
    out = evolve(u0, p10, dt=dt, T=1.0).final
    drift = np.max(np.abs(np.abs(out.values) - np.abs(u0.values)))
    assert drift < 1e-4


def test_soliton_phase(p10):
    # full exact solution including the e^{iA^2 t/(2h)} phase
    g = make_grid(L=8.0, N=4096)
    u0 = init_soliton(g, p10)
    T = 0.25
    dt = _dt_for(p10, T=T, target=0.006)
    out = evolve(u0, p10, dt=dt, T=T).final
    exact = u0.values * np.exp(1j * p10.A**2 * T / (2 * p10.h))
    assert np.max(np.abs(out.values - exact)) < 5e-4


def test_barrier_conservation(p10):
    g = make_grid(L=8.0, N=4096)
    u0 = init_barrier(g, p10)
    traj = evolve(u0, p10, dt=_dt_for(p10, T=1.0), T=1.0)
    m0, m1 = u0.mass(), traj.final.mass()
    # Riemann sum of the barrier differs from A^2 by dx/2 (midpoint rule)
    assert m0 == pytest.approx(p10.A**2, rel=3e-3)
    assert abs(m1 - m0) / m0 < 1e-6


def test_soliton_hamiltonian_drift(p10):
    # Hamiltonian conservation is only meaningful for H^1 data; the barrier
    # has infinite continuum energy, so the check runs on the soliton
    g = make_grid(L=8.0, N=4096)
    u0 = init_soliton(g, p10)
    out = evolve(u0, p10, dt=_dt_for(p10, T=1.0, target=0.025), T=1.0).final
    h0, h1 = u0.hamiltonian(p10.h), out.hamiltonian(p10.h)
    assert abs(h1 - h0) / abs(h0) < 1e-4


def test_time_reversal(p10):
    g = make_grid(L=8.0, N=4096)
    u0 = init_barrier(g, p10)
    dt = _dt_for(p10, T=0.5)
    fwd = evolve(u0, p10, dt=dt, T=0.5).final
    back = Wavefield(grid=g, values=np.conj(fwd.values), time=0.0)
    ret = evolve(back, p10, dt=dt, T=0.5).final
    assert np.max(np.abs(np.conj(ret.values) - u0.values)) < 1e-8


def test_evenness(p10):
    g = make_grid(L=8.0, N=4096)
    traj = evolve(init_barrier(g, p10), p10, dt=_dt_for(p10, T=0.3), T=0.3)
    a = np.abs(traj.final.values)
    # xs[0] = -L has no mirror point; compare xs[1:] against reversed
    assert np.max(np.abs(a[1:] - a[1:][::-1])) < 1e-10


def test_moments_plane_wave(p10):
    g = make_grid(L=8.0, N=1024)
    k = 2 * np.pi * p10.h / (2 * g.L) * 64  # resolvable wavenumber, k/h on the grid
    u = Wavefield(grid=g, values=2.0 * np.exp(1j * k * g.xs / p10.h), time=0.0)
    m = moments(u, p10)
    assert np.max(np.abs(m.rho - 4.0)) < 1e-10
    assert np.max(np.abs(m.mu - 4.0 * k)) < 1e-9


def test_moments_real_field_and_barrier(p10):
    g = make_grid(L=8.0, N=2048)
    u0 = init_barrier(g, p10)
    m = moments(u0, p10)
    assert np.max(np.abs(m.mu)) < 1e-12
    inside = np.abs(g.xs) < 0.4
    assert np.max(np.abs(m.rho[inside] - p10.A**2)) < 1e-10


def test_euler_residual_constant(p10):
    g = make_grid(L=8.0, N=512)
    u = Wavefield(grid=g, values=np.full(512, 1.3, dtype=complex), time=0.0)
    traj = Trajectory(
        fields=[Wavefield(g, u.values, t) for t in (0.0, 0.1, 0.2)],
        params=p10,
        dt=0.1,
    )
    rc, rm, _, js = euler_residual(traj, p10)
    assert js == [1]
    assert np.max(np.abs(rc[0])) < 1e-12
    assert np.max(np.abs(rm[0])) < 1e-12


def test_euler_residual_shrinks_with_h():
    # the hydrodynamic system holds only weakly: residuals are O(1/h)
    # pointwise but shrink after averaging over a few h in x and t
    res = {}
    for k in (10, 20, 40):
        p = admissible_h(2.0, k)
        g = make_grid(L=8.0, N=4096)
        T = 0.06
        dt = _dt_for(p, T=T, target=0.05)
        traj = evolve(init_barrier(g, p), p, dt=dt, T=T, snap_stride=1)
        rc, _, _, js = euler_residual(traj, p, x_window=8 * p.h, t_window=0.5 * p.h)
        ts = traj.times
        jj = int(np.argmin(np.abs(ts[np.array(js)] - 0.05)))
        win = np.abs(g.xs) < 0.15
        res[k] = np.median(np.abs(rc[jj][win]))
    assert res[20] < 0.7 * res[10]
    assert res[40] < 1.1 * res[20]


def test_euler_residual_blows_up_at_fronts(p10):
    # break time is zero at the barrier edges: the raw residual there
    # dwarfs the interior one from the very first step
    g = make_grid(L=8.0, N=4096)
    dt = _dt_for(p10, T=0.01, target=0.05)
    traj = evolve(init_barrier(g, p10), p10, dt=dt, T=0.01, snap_stride=1)
    rc, _, _, js = euler_residual(traj, p10)
    first = rc[0]
    at_front = np.abs(np.abs(g.xs) - 0.5) < 0.02
    interior = np.abs(g.xs) < 0.2
    assert np.max(np.abs(first[at_front])) > 100 * np.max(np.abs(first[interior]))


def test_local_average_periodic():
    g = make_grid(L=1.0, N=128)
    vals = np.cos(np.pi * g.xs / g.L)  # one full period
    sm = local_average(vals, g, 0.25)
    assert len(sm) == g.N
    assert np.max(np.abs(sm)) < 1.0  # averaging shrinks the extremes
    const = local_average(np.ones(g.N), g, 0.3)
    assert np.max(np.abs(const - 1)) < 1e-12
