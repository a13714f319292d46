"""Linear band structure of -d^2/dx^2 + V0 sin^2(x) (lattice recoil units).

The lattice period is pi, so the reciprocal lattice vector is 2 and the
first Brillouin zone is [-1, 1]. Bands come from diagonalizing the
plane-wave Hamiltonian in the basis e^{i(k+2m)x}: kinetic part diagonal,
sin^2 coupling -V0/4 between neighbouring m plus a V0/2 diagonal shift.
For V0 = 4 the first finite gap is (1.88975, 3.85911), the Mathieu
characteristic values b1(1)+2 and a1(1)+2.

Band-edge data (edge Bloch state, effective mass, effective
nonlinearity) feed the envelope construction of near-edge gap solitons.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import EigenSolverError, FlatBandError, NoGapError
from .grid import ComplexField, Grid, make_field, make_grid

DEFAULT_CUTOFF = 32
DEFAULT_K_SAMPLES = 201


def _hamiltonian(V0, k, cutoff):
    m = np.arange(-cutoff, cutoff + 1)
    h = np.diag((k + 2.0 * m) ** 2 + 0.5 * V0)
    off = -0.25 * V0 * np.ones(2 * cutoff)
    h += np.diag(off, 1) + np.diag(off, -1)
    return h


def band_energies_at(V0, k, cutoff=DEFAULT_CUTOFF, n_bands=None):
    """Eigenvalues (ascending) of the Bloch Hamiltonian at quasimomentum k."""
    try:
        e = np.linalg.eigvalsh(_hamiltonian(V0, k, cutoff))
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"eigenvalue solve failed at k={k}: {exc}") from exc
    return e if n_bands is None else e[:n_bands]


@dataclass(frozen=True)
class BandStructure:
    lattice_depth: float
    quasimomentum_samples: np.ndarray = field(repr=False)
    band_energies: np.ndarray = field(repr=False)  # (n_k, n_bands)
    plane_wave_cutoff: int = DEFAULT_CUTOFF

    @property
    def n_bands(self):
        return self.band_energies.shape[1]


def band_structure(V0, k_samples=DEFAULT_K_SAMPLES, n_bands=8,
                   cutoff=DEFAULT_CUTOFF, workers=None):
    """Diagonalize over a Brillouin-zone sample; per-k solves are independent."""
    if V0 < 0:
        raise ValueError("lattice depth must be non-negative")
    if cutoff < 2 * n_bands:
        raise ValueError("plane-wave cutoff must be at least 2*n_bands")
    ks = np.linspace(-1.0, 1.0, k_samples)

    def solve(k):
        return band_energies_at(V0, k, cutoff, n_bands)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(solve, ks))
    else:
        rows = [solve(k) for k in ks]
    energies = np.array(rows)
    energies.flags.writeable = False
    ks.flags.writeable = False
    return BandStructure(float(V0), ks, energies, cutoff)


def _refine_band_extremum(V0, band_index, k0, dk, cutoff, sign):
    """Locate the extremum of E_band near k0; sign=+1 maximizes, -1 minimizes.

    H(k) is defined for any real k (the band continues periodically), so
    the bracket may cross the zone boundary.
    """

    def objective(k):
        return -sign * band_energies_at(V0, k, cutoff)[band_index - 1]

    res = minimize_scalar(objective, bounds=(k0 - dk, k0 + dk), method="bounded",
                          options={"xatol": 1e-7})
    return float(res.x), float(-sign * res.fun)


def gap_edges(bs, gap_index):
    """Edges (mu_low, mu_high) of the gap above band gap_index (1-based)."""
    if gap_index < 1 or gap_index + 1 > bs.n_bands:
        raise NoGapError(f"band structure holds {bs.n_bands} bands; gap {gap_index} unavailable")
    ks = bs.quasimomentum_samples
    dk = ks[1] - ks[0]
    lower = bs.band_energies[:, gap_index - 1]
    upper = bs.band_energies[:, gap_index]
    _, mu_low = _refine_band_extremum(
        bs.lattice_depth, gap_index, ks[np.argmax(lower)], dk, bs.plane_wave_cutoff, +1
    )
    _, mu_high = _refine_band_extremum(
        bs.lattice_depth, gap_index + 1, ks[np.argmin(upper)], dk, bs.plane_wave_cutoff, -1
    )
    if not mu_low < mu_high - 1e-12:
        raise NoGapError(
            f"gap {gap_index} is closed for V0={bs.lattice_depth}: "
            f"max E_{gap_index} = {mu_low:.12g} >= min E_{gap_index + 1} = {mu_high:.12g}"
        )
    return mu_low, mu_high


CELL_GRID_POINTS = 64


@dataclass(frozen=True)
class BandEdgeData:
    """Bloch state and effective envelope parameters at a gap edge.

    bloch_state is sampled on a single-cell grid and normalized to unit
    cell-averaged density; effective_mass is the inverse band curvature
    (negative at the lower edge of the first finite gap);
    effective_nonlinearity is g * <|Phi|^4> / <|Phi|^2>^2 over one cell.
    """

    band_index: int
    which_edge: str
    edge_energy: float
    k_point: float
    coefficients: np.ndarray = field(repr=False)
    bloch_state: ComplexField = field(repr=False)
    effective_mass: float = 0.0
    effective_nonlinearity: float = 0.0
    lattice_depth: float = 0.0
    g: float = 1.0
    gap_low: float = 0.0
    gap_high: float = 0.0

    @property
    def m_offsets(self):
        c = (len(self.coefficients) - 1) // 2
        return np.arange(-c, c + 1)


def _bloch_samples(coefficients, k_point, x):
    c = (len(coefficients) - 1) // 2
    waves = np.exp(1j * np.outer(k_point + 2.0 * np.arange(-c, c + 1), x))
    return coefficients @ waves


def _band_curvature(V0, band_index, k_point, cutoff, h=0.02):
    """5-point second derivative of E_band at k_point with a Richardson check."""

    def d2(step):
        e = [band_energies_at(V0, k_point + j * step, cutoff)[band_index - 1]
             for j in (-2, -1, 0, 1, 2)]
        return (-e[0] + 16 * e[1] - 30 * e[2] + 16 * e[3] - e[4]) / (12 * step**2)

    coarse, fine = d2(h), d2(0.5 * h)
    if abs(fine - coarse) > 1e-4 * max(1.0, abs(fine)):
        raise EigenSolverError(
            f"band curvature finite difference not converged: {coarse} vs {fine}"
        )
    return (16.0 * fine - coarse) / 15.0


def band_edge_data(V0, gap_index, which_edge, g, cutoff=DEFAULT_CUTOFF):
    """Edge Bloch state plus effective-envelope parameters for one gap edge."""
    if which_edge not in ("low", "high"):
        raise ValueError("which_edge must be 'low' or 'high'")
    bs = band_structure(V0, n_bands=max(8, gap_index + 2), cutoff=cutoff)
    mu_low, mu_high = gap_edges(bs, gap_index)
    band = gap_index if which_edge == "low" else gap_index + 1
    sign = +1 if which_edge == "low" else -1
    ks = bs.quasimomentum_samples
    col = bs.band_energies[:, band - 1]
    k0 = ks[np.argmax(col) if which_edge == "low" else np.argmin(col)]
    k_point, edge_energy = _refine_band_extremum(
        V0, band, k0, ks[1] - ks[0], cutoff, sign
    )
    # snap to the high-symmetry point when the refinement lands next to it
    for k_sym in (-1.0, 0.0, 1.0):
        if abs(k_point - k_sym) < 1e-4:
            k_point = k_sym
            edge_energy = band_energies_at(V0, k_point, cutoff)[band - 1]
            break

    h = _hamiltonian(V0, k_point, cutoff)
    try:
        vals, vecs = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"edge eigenvector solve failed: {exc}") from exc
    coeff = vecs[:, band - 1].astype(np.complex128)
    resid = np.max(np.abs(h @ coeff - vals[band - 1] * coeff))
    if resid > 1e-8:
        raise EigenSolverError(f"edge eigenproblem residual {resid:.3e} exceeds 1e-8")

    cell = make_grid(np.pi, CELL_GRID_POINTS)
    phi = _bloch_samples(coeff, k_point, cell.x)
    # global phase fix: real and positive at the point of largest magnitude
    idx = int(np.argmax(np.abs(phi)))
    phase = phi[idx] / abs(phi[idx])
    coeff = coeff / phase
    phi = phi / phase
    if np.max(np.abs(phi.imag)) > 1e-8 * np.max(np.abs(phi)):
        raise EigenSolverError("edge Bloch state could not be made real by a global phase")

    density2 = np.mean(np.abs(phi) ** 2)
    scale = 1.0 / np.sqrt(density2)
    coeff = coeff * scale
    phi = phi * scale
    g_eff = g * np.mean(np.abs(phi) ** 4) / np.mean(np.abs(phi) ** 2) ** 2

    curvature = _band_curvature(V0, band, k_point, cutoff)
    if abs(curvature) < 1e-8:
        raise FlatBandError(
            f"band {band} curvature {curvature:.3e} at k={k_point} is below 1e-8"
        )

    coeff.flags.writeable = False
    return BandEdgeData(
        band_index=band,
        which_edge=which_edge,
        edge_energy=float(edge_energy),
        k_point=float(k_point),
        coefficients=coeff,
        bloch_state=make_field(phi, cell),
        effective_mass=float(1.0 / curvature),
        effective_nonlinearity=float(g_eff),
        lattice_depth=float(V0),
        g=float(g),
        gap_low=float(mu_low),
        gap_high=float(mu_high),
    )


def bloch_on_grid(edge, grid):
    """Sample the edge Bloch state on an arbitrary grid (edge momenta are
    integers, so the result is periodic on any whole-period box)."""
    return make_field(_bloch_samples(edge.coefficients, edge.k_point, grid.x), grid)
