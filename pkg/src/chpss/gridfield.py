"""Uniform lattice on a truncated line with discrete calculus.

The domain is [-L, L) sampled at x_j = -L + j*dx, dx = 2L/N.  Two boundary
treatments are supported:

* ``periodic``        -- x = -L is identified with x = L; derivatives are
                         exact Fourier multipliers (ik)^order and quadrature
                         is the dx*sum rule (spectrally accurate there).
* ``decay-truncated`` -- the data is assumed to vanish at the boundary;
                         derivatives are 4th-order central differences with
                         one-sided closures at the edges, quadrature is the
                         plain trapezoid rule.

Sobolev norms are Fourier-multiplier norms on the periodic grid, normalised
so that s = 0 reproduces integrate(f*f)**0.5.  For data decaying well inside
|x| = L they differ from the line norms by O(e^{-L}), far below the
tolerances used anywhere in this package.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import NonFiniteFieldError, UnsupportedOperationError

PERIODIC = "periodic"
DECAY = "decay-truncated"

# Outer fraction of the domain watched by the tail monitor, and the relative
# magnitude (vs sup|u|) above which truncation is considered violated.
TAIL_FRACTION = 0.10
TAIL_REL_TOL = 1e-8


def ensure_finite(values):
    """Raise NonFiniteFieldError with the first offending index."""
    bad = ~np.isfinite(values)
    if bad.any():
        raise NonFiniteFieldError(int(np.argmax(bad)))


@dataclass(frozen=True)
class Grid:
    """Uniform lattice on [-L, L) with N points."""

    half_width: float = 30.0
    n_points: int = 2048
    boundary_mode: str = PERIODIC

    def __post_init__(self):
        if self.n_points < 16:
            raise ValueError("need at least 16 lattice points")
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")
        if self.boundary_mode not in (PERIODIC, DECAY):
            raise ValueError(f"unknown boundary mode {self.boundary_mode!r}")

    @property
    def dx(self):
        return 2.0 * self.half_width / self.n_points

    @cached_property
    def x(self):
        return -self.half_width + self.dx * np.arange(self.n_points)

    @cached_property
    def wavenumbers(self):
        """rfft wavenumbers 2*pi*j/(2L), j = 0..N/2."""
        return 2.0 * np.pi * np.fft.rfftfreq(self.n_points, d=self.dx)

    @property
    def periodic(self):
        return self.boundary_mode == PERIODIC

    def field(self, values):
        return Field(self, np.asarray(values, dtype=float))

    def field_from(self, func):
        return Field(self, np.asarray(func(self.x), dtype=float))


@dataclass(frozen=True)
class Field:
    """Real-valued function sampled on a Grid."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_points,):
            raise ValueError(f"expected {self.grid.n_points} values, got shape {vals.shape}")
        ensure_finite(vals)
        object.__setattr__(self, "values", vals)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def max_abs(self):
        return float(np.max(np.abs(self.values)))


# ----------------------------------------------------------------------------
# finite-difference weights (decay-truncated mode)


def _fd_weights(offsets, order):
    """Weights w with sum w_j f(x + o_j dx) = dx^order f^(order) + O(dx^m)."""
    offsets = np.asarray(offsets, dtype=float)
    n = len(offsets)
    A = np.vander(offsets, n, increasing=True).T  # A[p, j] = o_j^p
    b = np.zeros(n)
    b[order] = float(math.factorial(order))
    return np.linalg.solve(A, b)


def _fd_derivative(values, dx, order):
    """4th-order finite differences with one-sided edge closures."""
    n = len(values)
    half = (order + 4) // 2 + (order % 2)  # symmetric half-width, >= (order+4)/2
    width = 2 * half + 1
    if width > n:
        raise ValueError("grid too small for the requested stencil")
    center = np.arange(-half, half + 1)
    w_int = _fd_weights(center, order)
    out = np.empty_like(values)
    core = np.convolve(values, w_int[::-1], mode="valid")
    out[half : n - half] = core
    # one-sided closures: shift the full-width stencil into range
    for i in range(half):
        offs = np.arange(width) - i
        out[i] = _fd_weights(offs, order) @ values[:width]
        offs = np.arange(-width + 1, 1) + (half - 1 - i)
        out[n - 1 - i] = _fd_weights(offs, order) @ values[n - width :]
    return out / dx**order


# ----------------------------------------------------------------------------
# operations


def derivative(f: Field, order: int) -> Field:
    """Spatial derivative of the given order (1..4)."""
    if order not in (1, 2, 3, 4):
        raise ValueError("derivative order must be in {1, 2, 3, 4}")
    ensure_finite(f.values)
    g = f.grid
    if g.periodic:
        return Field(g, spectral_derivative(f.values, g, order))
    return Field(g, _fd_derivative(f.values, g.dx, order))


def spectral_derivative(values, grid: Grid, order: int):
    """(ik)^order Fourier multiplier on raw values (periodic grids only)."""
    k = grid.wavenumbers
    mult = (1j * k) ** order
    if order % 2 == 1 and grid.n_points % 2 == 0:
        mult = mult.copy()
        mult[-1] = 0.0  # Nyquist mode carries no usable odd derivative
    return np.fft.irfft(mult * np.fft.rfft(values), n=grid.n_points)


def integrate(f: Field) -> float:
    """Trapezoid quadrature over [-L, L)."""
    ensure_finite(f.values)
    g = f.grid
    if g.periodic:
        return float(g.dx * np.sum(f.values))
    v = f.values
    return float(g.dx * (np.sum(v) - 0.5 * (v[0] + v[-1])))


def sobolev_norm(f: Field, s: float) -> float:
    """Fourier-multiplier H^s norm; s = 0 reproduces the L2 norm."""
    g = f.grid
    if not g.periodic:
        raise UnsupportedOperationError("sobolev_norm requires a periodic grid")
    ensure_finite(f.values)
    fhat = np.fft.rfft(f.values)
    # rfft halves the spectrum: double every bin except k=0 and (N even) Nyquist
    weights = np.full(fhat.shape, 2.0)
    weights[0] = 1.0
    if g.n_points % 2 == 0:
        weights[-1] = 1.0
    power = weights * np.abs(fhat) ** 2
    mult = (1.0 + g.wavenumbers**2) ** float(s)
    return float(np.sqrt(g.dx / g.n_points * np.sum(mult * power)))


def inf_with_argmin(f: Field):
    """Minimum value and the leftmost lattice point attaining it."""
    ensure_finite(f.values)
    j = int(np.argmin(f.values))
    return float(f.values[j]), float(f.grid.x[j])


def tail_magnitude(f: Field, fraction: float = TAIL_FRACTION) -> float:
    """Largest |f| over the outer `fraction` of the domain (both ends)."""
    n_out = max(1, int(round(0.5 * fraction * f.grid.n_points)))
    v = np.abs(f.values)
    return float(max(v[:n_out].max(), v[-n_out:].max()))


def tail_ok(u: Field, ux: Field, rel_tol: float = TAIL_REL_TOL) -> bool:
    """Tail monitor: max(|u|, |ux|) on the outer zone stays below rel_tol*sup|u|."""
    scale = u.max_abs()
    if scale == 0.0:
        return True
    return max(tail_magnitude(u), tail_magnitude(ux)) <= rel_tol * scale


class FourierInterpolant:
    """Evaluate a periodic field at arbitrary positions via its rfft.

    Exact for the grid's band-limited representation; negligible modes are
    dropped once at construction to keep evaluations cheap.
    """

    def __init__(self, grid: Grid, values, mode_floor=1e-15):
        self.grid = grid
        fhat = np.fft.rfft(values)
        n = grid.n_points
        weights = np.full(len(fhat), 2.0)
        weights[0] = 1.0
        if n % 2 == 0:
            weights[-1] = 1.0
            fhat = fhat.copy()
            fhat[-1] = fhat[-1].real  # Nyquist: cosine only
        keep = np.abs(fhat) * weights > mode_floor * max(1.0, float(np.max(np.abs(fhat))))
        keep[0] = True
        self.k = grid.wavenumbers[keep]
        self.c = (weights[keep] / n) * fhat[keep]

    def __call__(self, pos):
        pos = np.atleast_1d(np.asarray(pos, dtype=float))
        # DFT phases are relative to the first sample at x = -L
        shifted = pos + self.grid.half_width
        phase = np.exp(1j * shifted[:, None] * self.k[None, :])
        return (phase @ self.c).real


def refined_min(f: Field, iterations=80):
    """Minimum of the band-limited interpolant of f (sub-lattice accurate).

    Ternary search on the Fourier interpolant within one lattice cell of the
    discrete argmin; only meaningful on periodic grids with resolved data.
    """
    j = int(np.argmin(f.values))
    interp = FourierInterpolant(f.grid, f.values)
    lo = f.grid.x[j] - f.grid.dx
    hi = f.grid.x[j] + f.grid.dx
    for _ in range(iterations):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if interp(m1)[0] <= interp(m2)[0]:
            hi = m2
        else:
            lo = m1
    xm = 0.5 * (lo + hi)
    return float(interp(xm)[0]), float(xm)


# ----------------------------------------------------------------------------
# serialization


def write_field_csv(path, f: Field):
    """CSV with header x,value at full double precision."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("x,value\n")
        for x, v in zip(f.grid.x, f.values):
            fh.write(f"{x:.17g},{v:.17g}\n")


def read_field_csv(path, grid: Grid) -> Field:
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    if data.shape[0] != grid.n_points:
        raise ValueError(f"{path}: expected {grid.n_points} rows, got {data.shape[0]}")
    return Field(grid, data[:, 1])
