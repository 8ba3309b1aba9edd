"""Inverse Helmholtz operator (1 - d^2/dx^2)^{-1} and friends.

On the line the inverse is convolution with the kernel e^{-|x|}/2, and its
x-derivative is convolution with -sgn(x) e^{-|x|}/2.  Two realizations:

* ``spectral-multiplier``   -- 1/(1+k^2) (resp. ik/(1+k^2)) on the periodic
                               grid; exact for the periodic problem.
* ``two-pass-exponential``  -- O(N) forward/backward integrating-factor
                               recurrences for the truncated-line convolution
                               with zero inflow from beyond +-L.  Panel
                               integrals take the exact integral of a local
                               quintic interpolant (O(dx^6) quadrature), so
                               the two realizations agree to ~1e-8 on
                               decaying data.

The momentum map m = u - u_xx and its inverse close the loop between the two
state variables used by the solver.
"""

import numpy as np

from .errors import UnsupportedOperationError
from .gridfield import Field, Grid, derivative, ensure_finite

SPECTRAL = "spectral-multiplier"
TWO_PASS = "two-pass-exponential"

_ALIASES = {
    "spectral": SPECTRAL,
    SPECTRAL: SPECTRAL,
    "two-pass": TWO_PASS,
    "twopass": TWO_PASS,
    TWO_PASS: TWO_PASS,
}


def normalize_kernel(method: str) -> str:
    try:
        return _ALIASES[method]
    except KeyError:
        raise UnsupportedOperationError(f"unknown kernel method {method!r}") from None


# ----------------------------------------------------------------------------
# spectral path


def _spectral_apply(values, grid: Grid, d_dx: bool):
    k = grid.wavenumbers
    mult = 1.0 / (1.0 + k**2)
    if d_dx:
        mult = mult * (1j * k)
        if grid.n_points % 2 == 0:
            mult[-1] = 0.0
    return np.fft.irfft(mult * np.fft.rfft(values), n=grid.n_points)


# ----------------------------------------------------------------------------
# two-pass exponential recurrence


_PANEL_NODES = 6  # quintic interpolant per panel: quadrature error O(dx^6)


def _panel_weights(dx, s_nodes):
    """Weights with sum_i w[i] f(node_i) = int_0^dx e^{-s} p(s) ds for the
    interpolating polynomial p through nodes at s = s_nodes."""
    e = np.exp(-dx)
    M = np.empty(len(s_nodes))
    M[0] = 1.0 - e
    for p in range(1, len(s_nodes)):
        M[p] = p * M[p - 1] - dx**p * e
    V = np.vander(np.asarray(s_nodes, dtype=float), len(s_nodes), increasing=True).T
    return np.linalg.solve(V, M)


def _one_pass(values, dx):
    """A_j = int_{-L}^{x_j} e^{-(x_j - y)} f(y) dy with zero inflow at -L.

    Panel integrals over [x_j, x_{j+1}] use the quintic through the six
    nearest samples (stencils shifted inward at the edges), then the
    integrating-factor recurrence accumulates them left to right.
    """
    n = len(values)
    if n < _PANEL_NODES:
        raise ValueError("grid too small for the panel stencil")
    f = values
    panel = np.zeros(n - 1)
    # stencil start per panel j: clamp j-2 into [0, n-6]
    # pattern p = j+1-start in {1..5}; p=3 is the centered interior case
    interior = np.arange(2, n - 3)
    w = _panel_weights(dx, dx * (3.0 - np.arange(_PANEL_NODES)))
    acc = np.zeros(n - 1)
    for i in range(_PANEL_NODES):
        acc[interior] += w[i] * f[interior - 2 + i]
    panel[interior] = acc[interior]
    for j in (0, 1, n - 3, n - 2):
        if 0 <= j < n - 1 and j not in interior:
            start = min(max(j - 2, 0), n - _PANEL_NODES)
            s_nodes = dx * ((j + 1 - start) - np.arange(_PANEL_NODES))
            wj = _panel_weights(dx, s_nodes)
            panel[j] = wj @ f[start : start + _PANEL_NODES]
    decay = np.exp(-dx)
    out = np.zeros(n)
    for i in range(1, n):
        out[i] = decay * out[i - 1] + panel[i - 1]
    return out


def _two_pass_apply(values, grid: Grid, d_dx: bool):
    dx = grid.dx
    fwd = _one_pass(values, dx)          # int_{-L}^{x} e^{-(x-y)} f
    bwd = _one_pass(values[::-1], dx)[::-1]  # int_{x}^{L} e^{-(y-x)} f
    if d_dx:
        return 0.5 * (bwd - fwd)
    return 0.5 * (fwd + bwd)


# ----------------------------------------------------------------------------
# operations


def _apply(values, grid: Grid, method: str, d_dx: bool):
    method = normalize_kernel(method)
    if method == SPECTRAL:
        if not grid.periodic:
            raise UnsupportedOperationError("spectral-multiplier requires a periodic grid")
        return _spectral_apply(values, grid, d_dx)
    return _two_pass_apply(values, grid, d_dx)


def helmholtz_inverse(f: Field, method: str = SPECTRAL) -> Field:
    """u with (1 - d^2/dx^2) u = f."""
    ensure_finite(f.values)
    return Field(f.grid, _apply(f.values, f.grid, method, d_dx=False))


def dx_helmholtz_inverse(f: Field, method: str = SPECTRAL) -> Field:
    """d/dx of the inverse, i.e. convolution with -sgn(x) e^{-|x|}/2."""
    ensure_finite(f.values)
    return Field(f.grid, _apply(f.values, f.grid, method, d_dx=True))


def momentum(u: Field) -> Field:
    """m = u - u_xx."""
    return Field(u.grid, u.values - derivative(u, 2).values)


def velocity_from_momentum(m0: Field, method: str = SPECTRAL) -> Field:
    """u0 with m0 = u0 - u0_xx."""
    return helmholtz_inverse(m0, method)


def brute_force_inverse(f: Field) -> Field:
    """O(N^2) direct quadrature of the kernel convolution (test oracle).

    Plain trapezoid plus the Euler-Maclaurin correction for the kernel's
    derivative jump at y = x (the integrand's one-sided slopes differ by
    -f(x) there), which restores O(dx^4) accuracy.
    """
    g = f.grid
    diff = np.abs(g.x[:, None] - g.x[None, :])
    kernel = 0.5 * np.exp(-diff)
    return Field(g, g.dx * kernel @ f.values - g.dx**2 / 12.0 * f.values)
