"""Split-step time propagation of the mean field.

Second-order Strang splitting: half kinetic step in momentum space, full
potential+nonlinear phase in position space, half kinetic step. The
kinetic multiplier is dispersion * k^2 (dispersion = 1 for the lattice
problem in recoil units, 1/(2|m*|) for envelope reductions).

Stationary initial states bypass checkpoint storage entirely: the
trajectory is psi * exp(-i mu t) analytically, which is what all the
squeezing and correlation runs consume.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import PropagationError
from .grid import ComplexField, make_field, fft_plan
from .stationary import lattice_potential

DEFAULT_DT = 1e-3
DEFAULT_CHECKPOINT_EVERY = 10


@dataclass(frozen=True)
class Trajectory:
    """Mean-field trajectory with stored (or analytic) checkpoints."""

    initial: ComplexField
    dt: float
    duration: float
    V0: float
    g: float
    dispersion: float = 1.0
    times: np.ndarray = field(default=None, repr=False)
    checkpoints: tuple = field(default=None, repr=False)
    stationary_mu: float = None
    mu_frame: float = 0.0

    @property
    def grid(self):
        return self.initial.grid

    @property
    def is_stationary(self):
        return self.stationary_mu is not None

    def mean_field(self, t):
        """Mean-field values at time t (analytic for stationary states,
        linear interpolation between checkpoints otherwise)."""
        if self.is_stationary:
            phase = np.exp(1j * (self.mu_frame - self.stationary_mu) * t)
            return self.initial.values * phase
        if t < -1e-12 or t > self.duration + 1e-12:
            raise PropagationError(f"time {t} outside stored trajectory [0, {self.duration}]")
        idx = np.searchsorted(self.times, t)
        if idx == 0:
            return self.checkpoints[0]
        if idx >= len(self.times):
            return self.checkpoints[-1]
        t0, t1 = self.times[idx - 1], self.times[idx]
        w = (t - t0) / (t1 - t0)
        return (1.0 - w) * self.checkpoints[idx - 1] + w * self.checkpoints[idx]


def evolve(initial, T, dt=DEFAULT_DT, checkpoint_every=DEFAULT_CHECKPOINT_EVERY,
           *, V0, g, dispersion=1.0):
    """Propagate the field for duration T, storing every checkpoint_every-th step.

    dt must satisfy the accuracy guard dt <= 0.25 * spacing^2 (the scheme
    is unconditionally stable; the guard bounds the splitting error).
    """
    grid = initial.grid
    if dt > 0.25 * grid.spacing**2 + 1e-15:
        raise ValueError(
            f"dt={dt} violates the accuracy guard dt <= 0.25*spacing^2 = "
            f"{0.25 * grid.spacing**2:.3e}"
        )
    n_steps = max(1, int(round(T / dt)))
    duration = n_steps * dt
    plan = fft_plan(grid.num_points)
    kin_half = np.exp(-0.5j * dt * dispersion * grid.k_fft**2)
    kin_full = kin_half * kin_half
    v = lattice_potential(V0, grid)
    psi = initial.values.astype(np.complex128).copy()

    times = [0.0]
    checkpoints = [psi.copy()]
    done = 0
    while done < n_steps:
        chunk = min(checkpoint_every, n_steps - done)
        kernels.gpe_strang_steps(plan, psi, kin_half, kin_full, v, g, dt, chunk)
        done += chunk
        if not np.all(np.isfinite(psi.view(np.float64))):
            raise PropagationError(
                f"non-finite field at t={done * dt:.6g}",
                last_healthy_time=times[-1],
                partial=_make_trajectory(initial, dt, times[-1], V0, g, dispersion,
                                         times, checkpoints),
            )
        times.append(done * dt)
        checkpoints.append(psi.copy())
    return _make_trajectory(initial, dt, duration, V0, g, dispersion, times, checkpoints)


def _make_trajectory(initial, dt, duration, V0, g, dispersion, times, checkpoints):
    times = np.asarray(times)
    times.flags.writeable = False
    for c in checkpoints:
        c.flags.writeable = False
    return Trajectory(initial=initial, dt=dt, duration=duration, V0=V0, g=g,
                      dispersion=dispersion, times=times, checkpoints=tuple(checkpoints))


def stationary_trajectory(state, T, dt=DEFAULT_DT):
    """Trajectory of a stationary state: profile plus chemical potential."""
    return Trajectory(
        initial=state.profile,
        dt=dt,
        duration=float(T),
        V0=state.lattice_depth,
        g=state.g,
        dispersion=state.dispersion,
        stationary_mu=state.chemical_potential,
    )


def rotating_frame(traj, mu):
    """Multiply checkpoints by exp(+i mu t); composable (frames add)."""
    if traj.is_stationary:
        return Trajectory(
            initial=traj.initial, dt=traj.dt, duration=traj.duration,
            V0=traj.V0, g=traj.g, dispersion=traj.dispersion,
            stationary_mu=traj.stationary_mu, mu_frame=traj.mu_frame + mu,
        )
    rotated = tuple(c * np.exp(1j * mu * t) for c, t in zip(traj.checkpoints, traj.times))
    for c in rotated:
        c.flags.writeable = False
    return Trajectory(
        initial=traj.initial, dt=traj.dt, duration=traj.duration,
        V0=traj.V0, g=traj.g, dispersion=traj.dispersion,
        times=traj.times, checkpoints=rotated, mu_frame=traj.mu_frame + mu,
    )


def gpe_energy(f, V0, g, dispersion=1.0):
    """Energy functional: integral of dispersion|psi'|^2 + V|psi|^2 + (g/2)|psi|^4."""
    grid = f.grid
    dpsi = np.fft.ifft(1j * grid.k_fft * np.fft.fft(f.values))
    dens = np.abs(f.values) ** 2
    v = lattice_potential(V0, grid)
    return float(np.sum(dispersion * np.abs(dpsi) ** 2 + v * dens + 0.5 * g * dens**2)
                 * grid.spacing)


def norm_drift(traj):
    """Relative norm drift over the stored trajectory."""
    if traj.is_stationary:
        return 0.0
    p0 = np.sum(np.abs(traj.checkpoints[0]) ** 2)
    pt = np.sum(np.abs(traj.checkpoints[-1]) ** 2)
    return abs(pt - p0) / p0
