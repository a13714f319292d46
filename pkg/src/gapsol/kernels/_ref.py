"""Pure-numpy reference implementation of the stepping kernels.

Same entry points as the compiled backend (`_fastcore`); used as the
fallback when the extension is unavailable and as the ground truth in
backend-equivalence tests.
"""

import numpy as np

BACKEND = "numpy"


def make_plan(n):
    """No precomputation needed for the numpy backend."""
    return int(n)


def _kin(a, phase):
    a[...] = np.fft.ifft(np.fft.fft(a, axis=-1) * phase, axis=-1)


def gpe_strang_steps(plan, psi, kin_half, kin_full, v, g, dt, nsteps):
    """Advance psi (1D complex) by nsteps of Strang-split GPE stepping.

    kin_half/kin_full are e^{-i dt/2 k^2/2} and its square in FFT order;
    the local step applies e^{-i dt (v + g |psi|^2)} pointwise.
    Adjacent half-kinetic steps are fused into full steps.
    """
    if nsteps == 0:
        return
    _kin(psi, kin_half)
    for j in range(nsteps):
        psi *= np.exp(-1j * dt * (v + g * np.abs(psi) ** 2))
        _kin(psi, kin_full if j < nsteps - 1 else kin_half)


def pair_strang_steps(plan, f, g, kin_half, kin_full, e11, e12, e21, e22, nsteps):
    """Advance a block of fluctuation pairs by nsteps of Strang stepping.

    f, g: (B, N) complex blocks. The g component sees the conjugate
    kinetic phase. The local step is the precomputed pointwise 2x2 map
    (e11 e12; e21 e22), constant over the nsteps (time-independent
    generator); callers with time-dependent coefficients use nsteps=1.
    """
    if nsteps == 0:
        return
    _kin(f, kin_half)
    _kin(g, kin_half.conj())
    for j in range(nsteps):
        fn = e11 * f + e12 * g
        gn = e21 * f + e22 * g
        f[...] = fn
        g[...] = gn
        ph = kin_full if j < nsteps - 1 else kin_half
        _kin(f, ph)
        _kin(g, ph.conj())
