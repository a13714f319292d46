"""Uniform periodic grid, complex fields, and spectral primitives.

The lattice potential sin^2(x) has period pi, so every domain is an
integer number of lattice periods. Momentum values are k_n = 2*pi*n/L
for n in [-N/2, N/2); with L = 32*pi these hit the odd integers exactly,
which is what resolves the Bragg peaks in the momentum-domain
correlation spectra.

All types are immutable after construction and all operations are pure
functions, so everything here is safe to share across workers.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import GridError
from . import kernels

_PLAN_CACHE = {}


def fft_plan(num_points):
    """Kernel FFT plan for a grid size (cached; plans are immutable)."""
    plan = _PLAN_CACHE.get(num_points)
    if plan is None:
        plan = kernels.make_plan(num_points)
        _PLAN_CACHE[num_points] = plan
    return plan


@dataclass(frozen=True)
class Grid:
    """Uniform periodic spatial mesh with its paired momentum mesh.

    Attributes:
        domain_length: box length L, an integer multiple of pi.
        num_points: number of samples N, a power of two.
        spacing: L/N.
        x: sample positions in [-L/2, L/2).
        momentum_values: sorted wavenumbers 2*pi*n/L, n in [-N/2, N/2).
        k_fft: the same wavenumbers in FFT layout.
    """

    domain_length: float
    num_points: int
    spacing: float
    x: np.ndarray = field(repr=False)
    momentum_values: np.ndarray = field(repr=False)
    k_fft: np.ndarray = field(repr=False)

    @property
    def momentum_spacing(self):
        return 2.0 * np.pi / self.domain_length

    @property
    def lattice_periods(self):
        return int(round(self.domain_length / np.pi))


def _freeze(a):
    a.flags.writeable = False
    return a


def make_grid(domain_length, num_points):
    """Build a Grid; L must be an integer multiple of pi and N a power of two >= 64."""
    num_points = int(num_points)
    if num_points < 64 or num_points & (num_points - 1):
        raise GridError(f"num_points must be a power of two >= 64, got {num_points}")
    periods = domain_length / np.pi
    if abs(periods - round(periods)) > 1e-9 * max(1.0, abs(periods)) or periods <= 0:
        raise GridError(
            f"domain_length must be a positive integer multiple of pi, got {domain_length!r}"
        )
    domain_length = float(domain_length)
    spacing = domain_length / num_points
    x = _freeze(-0.5 * domain_length + spacing * np.arange(num_points))
    k_fft = _freeze(2.0 * np.pi * np.fft.fftfreq(num_points, d=spacing))
    momentum = _freeze(np.fft.fftshift(k_fft).copy())
    return Grid(domain_length, num_points, spacing, x, momentum, k_fft)


@dataclass(frozen=True)
class ComplexField:
    """Complex samples on a Grid, in position or momentum space."""

    values: np.ndarray = field(repr=False)
    grid: Grid
    space: str = "position"

    def __post_init__(self):
        if self.values.shape != (self.grid.num_points,):
            raise GridError(
                f"field length {self.values.shape} does not match grid size {self.grid.num_points}"
            )
        if not np.all(np.isfinite(self.values.view(np.float64))):
            raise GridError("field contains non-finite entries")

    @property
    def axis(self):
        return self.grid.x if self.space == "position" else self.grid.momentum_values

    @property
    def measure(self):
        return self.grid.spacing if self.space == "position" else self.grid.momentum_spacing


def make_field(values, grid, space="position"):
    vals = np.ascontiguousarray(values, dtype=np.complex128).copy()
    return ComplexField(_freeze(vals), grid, space)


def _require_same_grid(a, b):
    if a.grid is not b.grid and (
        a.grid.num_points != b.grid.num_points
        or a.grid.domain_length != b.grid.domain_length
    ):
        raise GridError("fields live on different grids")
    if a.space != b.space:
        raise GridError("fields live in different spaces")


def second_derivative(f):
    """Spectral second derivative (Fourier multiplier -k^2)."""
    vals = np.fft.ifft(-f.grid.k_fft**2 * np.fft.fft(f.values))
    return make_field(vals, f.grid, f.space)


def norm(f):
    """Integral of |f|^2 over the field's own domain (position or momentum)."""
    return float(np.sum(np.abs(f.values) ** 2) * f.measure)


def quadrature_project(local_oscillator, f):
    """Homodyne projection (1/2) * integral(conj(L) f + L conj(f)) = Re integral(conj(L) f)."""
    _require_same_grid(local_oscillator, f)
    return float(
        np.real(np.sum(np.conj(local_oscillator.values) * f.values)) * f.measure
    )


def to_momentum(f):
    """Unitary transform to the momentum mesh (Parseval: norm preserved)."""
    if f.space != "position":
        raise GridError("to_momentum expects a position-space field")
    g = f.grid
    vals = np.fft.fftshift(np.fft.fft(f.values)) * g.spacing / np.sqrt(2.0 * np.pi)
    # remove the phase from the x-offset: fft assumes samples start at x=0
    vals = vals * np.exp(-1j * g.momentum_values * g.x[0])
    return make_field(vals, g, "momentum")


def from_momentum(fhat):
    """Inverse of to_momentum."""
    if fhat.space != "momentum":
        raise GridError("from_momentum expects a momentum-space field")
    g = fhat.grid
    vals = fhat.values * np.exp(1j * g.momentum_values * g.x[0])
    vals = np.fft.ifft(np.fft.ifftshift(vals)) * np.sqrt(2.0 * np.pi) / g.spacing
    return make_field(vals, g, "position")
