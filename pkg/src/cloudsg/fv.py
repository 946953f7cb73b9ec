"""Shared finite-volume kernels: slope-limited reconstruction, Rusanov and
central numerical fluxes, face divergences and second-order diffusion.

All kernels take arrays already padded with two ghost layers on each side
of the working axis (``grid.apply_boundary``); ``axis`` names the array
axis being operated on, so leading mode/variable axes broadcast through.
"""

import numpy as np

NG = 2


def _slc(arr, axis, start, stop=None):
    idx = [slice(None)] * arr.ndim
    idx[axis] = slice(start, stop)
    return arr[tuple(idx)]


def along(padded, axis, ng=NG, lead=0):
    """View of a fully padded array keeping ghosts only along ``axis``.

    ``apply_boundary`` pads every spatial axis; the per-axis kernels here
    want ghosts on the working axis and interior extents elsewhere.
    """
    idx = []
    for i in range(padded.ndim):
        if i < lead or i == axis:
            idx.append(slice(None))
        else:
            idx.append(slice(ng, padded.shape[i] - ng))
    return padded[tuple(idx)]


def minmod(a, b):
    """Minmod limiter; ties with equal magnitude and sign return a."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    opposite = a * b <= 0.0
    pick_a = np.abs(a) <= np.abs(b)
    out = np.where(opposite, 0.0, np.where(pick_a, a, b))
    if out.ndim == 0:
        return float(out)
    return out


def cell_slopes(padded, axis):
    """Limited undivided slopes for padded cells 1..n+2 along ``axis``.

    Returns minmod(w[i+1]-w[i], w[i]-w[i-1]) so that interface values are
    w +/- slope/2.
    """
    d = np.diff(padded, axis=axis)
    fwd = _slc(d, axis, 1, None)
    bwd = _slc(d, axis, 0, -1)
    return minmod(fwd, bwd)


def reconstruct(padded, axis):
    """Left/right interface states at all n+1 faces along ``axis``.

    Face f sits between padded cells f+1 and f+2; the left state comes from
    below the face, the right state from above. Constant and globally linear
    data are reproduced exactly; slopes vanish at extrema.
    """
    s = cell_slopes(padded, axis)
    wl = _slc(padded, axis, 1, -2) + 0.5 * _slc(s, axis, 0, -1)
    wr = _slc(padded, axis, 2, -1) - 0.5 * _slc(s, axis, 1, None)
    return wl, wr


def face_average(padded, axis):
    """Arithmetic mean of the two cells adjacent to each of the n+1 faces."""
    return 0.5 * (_slc(padded, axis, 1, -2) + _slc(padded, axis, 2, -1))


def rusanov_flux(flux_left, flux_right, w_left, w_right, lam):
    """Rusanov flux 0.5 (F(w+) + F(w-)) - 0.5 lam (w+ - w-).

    lam must bound the spectral radius of the flux Jacobian at both states.
    """
    return 0.5 * (flux_left + flux_right) - 0.5 * lam * (w_right - w_left)


def central_flux(padded_flux, axis):
    """Central face flux from cell-average flux evaluations (linear fluxes)."""
    return face_average(padded_flux, axis)


def face_divergence(face_flux, axis, h):
    """Divergence contribution of one axis: (flux[f+1] - flux[f]) / h."""
    return np.diff(face_flux, axis=axis) / h


def first_derivative(padded, axis, h):
    """Second-order central first derivative at cell centers."""
    return (_slc(padded, axis, 3, -1) - _slc(padded, axis, 1, -3)) / (2.0 * h)


def second_derivative(padded, axis, h):
    """Standard 3-point second derivative at cell centers."""
    return (_slc(padded, axis, 3, -1) - 2.0 * _slc(padded, axis, 2, -2)
            + _slc(padded, axis, 1, -3)) / (h * h)


def diffusion_term(padded_field, padded_coeff, axis, h):
    """One-axis contribution of div(c grad f) with face-averaged c.

    Exact for quadratic f with constant coefficient.
    """
    df = np.diff(_slc(padded_field, axis, 1, -1), axis=axis) / h
    cf = face_average(padded_coeff, axis)
    return np.diff(cf * df, axis=axis) / h
