"""Split-step reference solver for the semiclassical focusing NLS.

Integrates i h u_t + (h^2/2) u_xx + |u|^2 u = 0 on a periodic box with
Strang splitting: the kinetic half-step is exact in Fourier space
(symbol exp(-i h k^2 dt/4)) and the nonlinear step is an exact pointwise
phase rotation exp(i |u|^2 dt / h).  This is the ground truth that the
asymptotic reconstruction is compared against.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .scattering import BarrierParams

__all__ = [
    "Grid1D",
    "Wavefield",
    "HydroMoments",
    "Trajectory",
    "make_grid",
    "init_barrier",
    "init_soliton",
    "evolve",
    "moments",
    "euler_residual",
    "local_average",
    "write_csv",
]


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid on [-L, L)."""

    L: float
    N: int
    xs: np.ndarray

    @property
    def dx(self) -> float:
        return 2 * self.L / self.N

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.N, d=self.dx)


def make_grid(L: float = 8.0, N: int = 4096) -> Grid1D:
    if N < 2 or (N & (N - 1)) != 0:
        raise ValueError(f"N must be a power of two >= 2, got {N}")
    xs = -L + 2 * L * np.arange(N) / N
    return Grid1D(L=float(L), N=int(N), xs=xs)


@dataclass(frozen=True)
class Wavefield:
    grid: Grid1D
    values: np.ndarray
    time: float

    def mass(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.dx)

    def hamiltonian(self, h: float) -> float:
        ux = np.fft.ifft(1j * self.grid.wavenumbers * np.fft.fft(self.values))
        dens = 0.5 * h * h * np.abs(ux) ** 2 - 0.5 * np.abs(self.values) ** 4
        return float(np.sum(dens) * self.grid.dx)


@dataclass(frozen=True)
class HydroMoments:
    rho: np.ndarray
    mu: np.ndarray


@dataclass(frozen=True)
class Trajectory:
    fields: list
    params: BarrierParams
    dt: float

    @property
    def times(self) -> np.ndarray:
        return np.array([f.time for f in self.fields])

    @property
    def final(self) -> Wavefield:
        return self.fields[-1]


def init_barrier(grid: Grid1D, p: BarrierParams) -> Wavefield:
    """Rectangular barrier of height A on (-1/2, 1/2), midpoint value A/2
    at grid points landing within half a cell of the jumps."""
    if grid.L <= 0.5:
        raise ValueError(f"domain half-width {grid.L} does not contain the barrier")
    u = np.zeros(grid.N, dtype=complex)
    u[np.abs(grid.xs) < 0.5] = p.A
    u[np.abs(np.abs(grid.xs) - 0.5) < 0.5 * grid.dx] = 0.5 * p.A
    return Wavefield(grid=grid, values=u, time=0.0)


def init_soliton(grid: Grid1D, p: BarrierParams) -> Wavefield:
    # exact solution A sech(A x/h) e^{i A^2 t/(2h)}; modulus is stationary
    u = p.A / np.cosh(p.A * grid.xs / p.h).astype(complex)
    return Wavefield(grid=grid, values=u, time=0.0)


def evolve(
    field: Wavefield,
    p: BarrierParams,
    dt: float,
    T: float,
    snap_stride: int = 0,
) -> Trajectory:
    """Strang-split evolution from field.time to field.time + T.

    snap_stride > 0 stores every snap_stride-th step; the initial and
    final fields are always kept.  Aborts if the mass drifts by more than
    1e-3 relative (spectral blow-up detector).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if dt * p.A * p.A / p.h > 0.1 + 1e-12:
        raise ValueError(
            f"dt={dt} too coarse for the nonlinear rotation: need dt*A^2/h <= 0.1"
        )
    nsteps = int(round(T / dt))
    if abs(nsteps * dt - T) > 1e-10 * max(1.0, T):
        raise ValueError(f"T={T} is not an integer number of steps of dt={dt}")

    grid = field.grid
    half_kinetic = np.exp(-1j * p.h * grid.wavenumbers**2 * dt / 4)
    u = field.values.copy()
    mass0 = np.sum(np.abs(u) ** 2) * grid.dx

    snaps = [Wavefield(grid=grid, values=u.copy(), time=field.time)]
    for n in range(1, nsteps + 1):
        u = np.fft.ifft(half_kinetic * np.fft.fft(u))
        u *= np.exp(1j * np.abs(u) ** 2 * dt / p.h)
        u = np.fft.ifft(half_kinetic * np.fft.fft(u))
        if snap_stride and n % snap_stride == 0 and n != nsteps:
            snaps.append(Wavefield(grid=grid, values=u.copy(), time=field.time + n * dt))
        if n % 64 == 0 or n == nsteps:
            mass = np.sum(np.abs(u) ** 2) * grid.dx
            if mass0 > 0 and abs(mass - mass0) / mass0 > 1e-3:
                raise RuntimeError(
                    f"mass drift {abs(mass - mass0) / mass0:.2e} at t={field.time + n * dt:.4f}: "
                    "step size or resolution insufficient"
                )
    snaps.append(Wavefield(grid=grid, values=u, time=field.time + nsteps * dt))
    return Trajectory(fields=snaps, params=p, dt=dt)


def moments(field: Wavefield, p: BarrierParams) -> HydroMoments:
    """Hydrodynamic moments: rho = |u|^2 and the momentum density
    mu = -i(h/2)(conj(u) u_x - u conj(u)_x) = h Im(conj(u) u_x),
    with u_x by spectral differentiation."""
    u = field.values
    ux = np.fft.ifft(1j * field.grid.wavenumbers * np.fft.fft(u))
    return HydroMoments(
        rho=np.abs(u) ** 2,
        mu=p.h * np.imag(np.conj(u) * ux),
    )


def euler_residual(
    traj: Trajectory,
    p: BarrierParams,
    x_window: float = 0.0,
    t_window: float = 0.0,
):
    """Centered-in-time residuals of the dispersionless Euler system at the
    interior snapshots, plus the magnitude of the h^2/4 dispersive
    correction term.

    Returns (res_continuity, res_momentum, dispersive, j_indices) where
    the first three are lists of arrays, one per usable interior snapshot
    index in j_indices.  The continuity residual is rho_t + mu_x; the
    momentum residual is mu_t + (mu^2/rho)_x - (rho^2)_x / 2 evaluated
    where rho is bounded away from zero (masked elsewhere).

    With x_window/t_window > 0 the moments are box-averaged over those
    physical widths before differencing.  The raw residual of the
    dispersive solution is O(1/h) pointwise; only the doubly averaged one
    converges (weak limit), so convergence studies must pass windows of a
    few h in x and in t.
    """
    if len(traj.fields) < 3:
        raise ValueError("need at least three snapshots for centered differences")
    grid = traj.fields[0].grid
    ik = 1j * grid.wavenumbers

    def ddx(f):
        return np.real(np.fft.ifft(ik * np.fft.fft(f)))

    ms = [moments(f, p) for f in traj.fields]
    ts = traj.times
    rhos = [m.rho for m in ms]
    mus = [m.mu for m in ms]
    if x_window > 0:
        rhos = [local_average(r, grid, x_window) for r in rhos]
        mus = [local_average(m, grid, x_window) for m in mus]

    pad = 1
    if t_window > 0:
        dts = np.diff(ts)
        if np.max(dts) - np.min(dts) > 1e-9 * np.max(dts):
            raise ValueError("time averaging needs uniformly spaced snapshots")
        nt = max(1, int(round(t_window / dts[0])))
        if nt % 2 == 0:
            nt += 1
        if len(ms) < nt + 2:
            raise ValueError(
                f"need at least {nt + 2} snapshots for a {t_window} time window"
            )
        kernel = np.ones(nt) / nt
        R = np.array(rhos)
        M = np.array(mus)
        rhos = [
            np.convolve(R[:, i], kernel, mode="same") for i in range(grid.N)
        ]
        rhos = list(np.array(rhos).T)
        mus = [np.convolve(M[:, i], kernel, mode="same") for i in range(grid.N)]
        mus = list(np.array(mus).T)
        pad = nt // 2 + 1

    res_c, res_m, disp, js = [], [], [], []
    for j in range(pad, len(ms) - pad):
        dt2 = ts[j + 1] - ts[j - 1]
        rho_t = (rhos[j + 1] - rhos[j - 1]) / dt2
        mu_t = (mus[j + 1] - mus[j - 1]) / dt2
        rho, mu = rhos[j], mus[j]
        res_c.append(rho_t + ddx(mu))
        safe = rho > 1e-6 * np.max(rho)
        flux = np.where(safe, mu * mu / np.where(safe, rho, 1.0), 0.0)
        rm = mu_t + ddx(flux) - ddx(rho * rho) / 2
        res_m.append(np.where(safe, rm, 0.0))
        logrho = np.log(np.where(safe, rho, 1.0))
        disp.append(
            np.where(safe, (p.h**2 / 4) * ddx(rho * ddx(ddx(logrho))), 0.0)
        )
        js.append(j)
    return res_c, res_m, disp, js


def local_average(values: np.ndarray, grid: Grid1D, width: float) -> np.ndarray:
    """Moving average over a window of the given physical width (periodic).

    The pointwise modulus of the field oscillates on the O(h) scale; only
    averages over windows of a few h converge to the hydrodynamic limit,
    so comparisons between the direct solution and the asymptotic formula
    go through this."""
    n = max(1, int(round(width / grid.dx)))
    if n % 2 == 0:
        n += 1
    kernel = np.ones(n) / n
    ext = np.concatenate([values[-(n // 2):], values, values[: n // 2]])
    return np.convolve(ext, kernel, mode="valid")


def write_csv(field: Wavefield, p: BarrierParams, path) -> None:
    """Snapshot as CSV with columns x, Re u, Im u, |u|^2, mu."""
    m = moments(field, p)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "re_u", "im_u", "abs2_u", "mu"])
        for j in range(field.grid.N):
            w.writerow(
                [
                    "%.17e" % field.grid.xs[j],
                    "%.17e" % field.values[j].real,
                    "%.17e" % field.values[j].imag,
                    "%.17e" % (abs(field.values[j]) ** 2),
                    "%.17e" % m.mu[j],
                ]
            )
