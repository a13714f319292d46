# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled stepping kernels: radix-2 FFT plus fused split-step loops.

Grid sizes are powers of two by construction, so an iterative
decimation-in-time FFT with precomputed twiddle/bit-reversal tables
covers every case. The per-step pointwise work (kinetic phases,
nonlinear phase, 2x2 local Bogoliubov map) runs in a single pass
without temporaries.
"""

import numpy as np

from libc.math cimport cos, sin

ctypedef double complex cplx

BACKEND = "cython"


def make_plan(n):
    """Precompute bit-reversal and twiddle tables for size n (power of two)."""
    n = int(n)
    if n & (n - 1) or n < 2:
        raise ValueError("FFT size must be a power of two >= 2")
    bits = n.bit_length() - 1
    idx = np.arange(n, dtype=np.int64)
    rev = np.zeros(n, dtype=np.int64)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    j = np.arange(n // 2)
    tw = np.exp(-2j * np.pi * j / n).astype(np.complex128)
    return rev, tw, np.conj(tw)


cdef void _fft_inplace(cplx* a, Py_ssize_t n, const Py_ssize_t* rev,
                       const cplx* tw, bint inverse) noexcept nogil:
    cdef Py_ssize_t i, j, size, half, step, base
    cdef cplx t, u, w
    for i in range(n):
        j = rev[i]
        if j > i:
            t = a[i]
            a[i] = a[j]
            a[j] = t
    size = 2
    while size <= n:
        half = size >> 1
        step = n // size
        base = 0
        while base < n:
            for j in range(half):
                w = tw[j * step]
                t = a[base + j + half] * w
                u = a[base + j]
                a[base + j] = u + t
                a[base + j + half] = u - t
            base += size
        size <<= 1
    if inverse:
        for i in range(n):
            a[i] = a[i] / n


cdef void _fourier_phase(cplx* a, Py_ssize_t n, const cplx* phase,
                         const Py_ssize_t* rev, const cplx* tw,
                         const cplx* itw, bint conj_phase) noexcept nogil:
    # a <- ifft(fft(a) * phase); conj_phase applies the conjugated table
    cdef Py_ssize_t i
    cdef cplx p
    _fft_inplace(a, n, rev, tw, 0)
    for i in range(n):
        p = phase[i]
        if conj_phase:
            p = p.conjugate()
        a[i] = a[i] * p
    _fft_inplace(a, n, rev, itw, 1)


def gpe_strang_steps(plan, cplx[::1] psi, cplx[::1] kin_half,
                     cplx[::1] kin_full, double[::1] v, double g,
                     double dt, Py_ssize_t nsteps):
    """Advance psi (1D complex) by nsteps of Strang-split GPE stepping."""
    if nsteps == 0:
        return
    rev_arr, tw_arr, itw_arr = plan
    cdef Py_ssize_t[::1] rev = rev_arr
    cdef cplx[::1] tw = tw_arr
    cdef cplx[::1] itw = itw_arr
    cdef Py_ssize_t n = psi.shape[0]
    cdef Py_ssize_t i, s
    cdef double ph, re, im
    cdef cplx rot
    with nogil:
        _fourier_phase(&psi[0], n, &kin_half[0], &rev[0], &tw[0], &itw[0], 0)
        for s in range(nsteps):
            for i in range(n):
                re = psi[i].real
                im = psi[i].imag
                ph = -dt * (v[i] + g * (re * re + im * im))
                rot = cos(ph) + 1j * sin(ph)
                psi[i] = psi[i] * rot
            if s < nsteps - 1:
                _fourier_phase(&psi[0], n, &kin_full[0], &rev[0], &tw[0], &itw[0], 0)
            else:
                _fourier_phase(&psi[0], n, &kin_half[0], &rev[0], &tw[0], &itw[0], 0)


def pair_strang_steps(plan, cplx[:, ::1] f, cplx[:, ::1] g,
                      cplx[::1] kin_half, cplx[::1] kin_full,
                      cplx[::1] e11, cplx[::1] e12,
                      cplx[::1] e21, cplx[::1] e22, Py_ssize_t nsteps):
    """Advance a block of fluctuation pairs by nsteps of Strang stepping."""
    if nsteps == 0:
        return
    rev_arr, tw_arr, itw_arr = plan
    cdef Py_ssize_t[::1] rev = rev_arr
    cdef cplx[::1] tw = tw_arr
    cdef cplx[::1] itw = itw_arr
    cdef Py_ssize_t nb = f.shape[0]
    cdef Py_ssize_t n = f.shape[1]
    cdef Py_ssize_t b, i, s
    cdef cplx fv, gv
    cdef const cplx* kin
    with nogil:
        for b in range(nb):
            _fourier_phase(&f[b, 0], n, &kin_half[0], &rev[0], &tw[0], &itw[0], 0)
            _fourier_phase(&g[b, 0], n, &kin_half[0], &rev[0], &tw[0], &itw[0], 1)
        for s in range(nsteps):
            for b in range(nb):
                for i in range(n):
                    fv = f[b, i]
                    gv = g[b, i]
                    f[b, i] = e11[i] * fv + e12[i] * gv
                    g[b, i] = e21[i] * fv + e22[i] * gv
            if s < nsteps - 1:
                kin = &kin_full[0]
            else:
                kin = &kin_half[0]
            for b in range(nb):
                _fourier_phase(&f[b, 0], n, kin, &rev[0], &tw[0], &itw[0], 0)
                _fourier_phase(&g[b, 0], n, kin, &rev[0], &tw[0], &itw[0], 1)
