"""Coframe, first fundamental form, structure residuals and curvature.

A solution u (with momentum m = u - u_xx) carries the one-forms
w_i = f_i1 dx + f_i2 dt with coefficients

    f11 = l/2 + 1/(2l) - m          f12 = u m + (l/2) u - u/(2l) - 1/2 - l^2/2
    f21 = 0                         f22 = -u_x
    f31 = m + 1/(2l) - l/2          f32 = l^2/2 - 1/2 - u/(2l) - (l/2) u - u m

for any nonzero parameter l.  The induced metric is g = w1^2 + w2^2 with
g11 = f11^2, g12 = f11 f12, g22 = f22^2 + f12^2, so det g = (f11 f22)^2
vanishes exactly where w1 ^ w2 = f11 f22 dx^dt does.

Structure residuals measure how far a lattice of frames is from satisfying
the surface's structure equations:

    r1 = dx(f12) - dt(f11) - f31 f22    (= m_t + 2 u_x m + u m_x on solutions)
    r2 = dx(f22) - (f11 f32 - f12 f31)  (= 0 identically, any u)
    r3 = dx(f32) - dt(f31) - f11 f22    (= -r1 identically)

r2 and r1 + r3 vanish to rounding provided the coefficients are assembled
from u alone with one consistent x-derivative operator; this module rebuilds
u_x and m that way instead of trusting the frames' cached fields.

Gaussian curvature is evaluated with the Brioschi formula on the coordinate
metric, independent of the coframe identities.  The formula divides by
det(g)^2, so truncation errors are amplified without bound near the
degeneracy locus; points with det below a caller-supplied floor are masked
out.  On periodic grids the x-derivatives are spectral and the t-derivatives
4th-order central differences on a uniform frame lattice: with the default
resolution the plain 2nd-order stencils leave the majority of masked points
outside a 1e-3 curvature tolerance, while this scheme holds well over 99%
of them inside it.
"""

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError
from .gridfield import Grid, _fd_derivative, spectral_derivative
from .solver import Trajectory


def _lam_constants(lam):
    if lam == 0.0:
        raise GeometryError("lambda must be nonzero")
    P = 0.5 * (lam + 1.0 / lam)
    Q = 0.5 * (lam - 1.0 / lam)
    R = 0.5 * (1.0 + lam * lam)
    return P, Q, R


@dataclass(frozen=True)
class CoframeSample:
    """Coefficients of the three one-forms at one or many points."""

    f11: np.ndarray
    f12: np.ndarray
    f22: np.ndarray
    f31: np.ndarray
    f32: np.ndarray
    lam: float

    @property
    def f21(self):
        return np.zeros_like(np.asarray(self.f11))

    @property
    def wedge(self):
        """dx^dt coefficient of w1 ^ w2."""
        return self.f11 * self.f22


@dataclass(frozen=True)
class MetricSample:
    g11: np.ndarray
    g12: np.ndarray
    g22: np.ndarray

    @property
    def det(self):
        return self.g11 * self.g22 - self.g12 * self.g12


def coframe(u, ux, m, lam) -> CoframeSample:
    """Coframe coefficients from pointwise u, u_x, m (scalars or arrays)."""
    P, Q, R = _lam_constants(lam)
    u = np.asarray(u, dtype=float)
    m = np.asarray(m, dtype=float)
    f11 = P - m
    f12 = u * m + Q * u - R
    f22 = -np.asarray(ux, dtype=float)
    f31 = m - Q
    f32 = (R - 1.0) - P * u - u * m
    return CoframeSample(f11=f11, f12=f12, f22=f22, f31=f31, f32=f32, lam=lam)


def wedge12(ux, m, lam):
    """dx^dt coefficient of w1 ^ w2: -(l/2 + 1/(2l) - m) u_x."""
    P, _, _ = _lam_constants(lam)
    return -(P - np.asarray(m, dtype=float)) * np.asarray(ux, dtype=float)


def metric(cf: CoframeSample) -> MetricSample:
    return MetricSample(
        g11=cf.f11 * cf.f11,
        g12=cf.f11 * cf.f12,
        g22=cf.f22 * cf.f22 + cf.f12 * cf.f12,
    )


# ----------------------------------------------------------------------------
# structure residuals


def _nonuniform_dt(A, t):
    """Centered first t-derivative on a possibly nonuniform frame lattice."""
    t = np.asarray(t, dtype=float)
    h0 = (t[1:-1] - t[:-2])[:, None]
    h1 = (t[2:] - t[1:-1])[:, None]
    return (
        -h1 / (h0 * (h0 + h1)) * A[:-2]
        + (h1 - h0) / (h0 * h1) * A[1:-1]
        + h0 / (h1 * (h0 + h1)) * A[2:]
    )


@dataclass(frozen=True)
class StructureResiduals:
    t: np.ndarray          # interior frame times
    x: np.ndarray
    r1: np.ndarray         # shape (len(t), len(x))
    r2: np.ndarray
    r3: np.ndarray

    def max_abs(self):
        return (
            float(np.max(np.abs(self.r1))),
            float(np.max(np.abs(self.r2))),
            float(np.max(np.abs(self.r3))),
        )


def structure_residuals(traj: Trajectory, lam, x_scheme="fd2") -> StructureResiduals:
    """Residuals of the three structure equations over the stored frames.

    x_scheme 'fd2' uses 2nd-order central differences (periodic wrap); any
    other value uses the spectral derivative.  u_x and m are rebuilt from u
    with the chosen operator so that r2 and r1 + r3 vanish identically.
    """
    if len(traj.frames) < 3:
        raise GeometryError("need at least 3 stored frames")
    grid = traj.grid
    t = traj.frame_times()
    U = np.array([fr.u.values for fr in traj.frames])

    if x_scheme == "fd2":
        def d1(A):
            return (np.roll(A, -1, axis=-1) - np.roll(A, 1, axis=-1)) / (2.0 * grid.dx)
    else:
        if not grid.periodic:
            raise GeometryError("spectral x-scheme requires a periodic grid")
        k = grid.wavenumbers
        mult = 1j * k
        if grid.n_points % 2 == 0:
            mult = mult.copy()
            mult[-1] = 0.0

        def d1(A):
            return np.fft.irfft(mult * np.fft.rfft(A, axis=-1), n=grid.n_points, axis=-1)

    UX = d1(U)
    M = U - d1(UX)
    cf = coframe(U, UX, M, lam)

    r1 = d1(cf.f12)[1:-1] - _nonuniform_dt(cf.f11, t) - (cf.f31 * cf.f22)[1:-1]
    r2 = d1(cf.f22) - (cf.f11 * cf.f32 - cf.f12 * cf.f31)
    r3 = d1(cf.f32)[1:-1] - _nonuniform_dt(cf.f31, t) - (cf.f11 * cf.f22)[1:-1]
    return StructureResiduals(t=t[1:-1], x=grid.x, r1=r1, r2=r2[1:-1], r3=r3)


# ----------------------------------------------------------------------------
# Gaussian curvature (Brioschi)


@dataclass(frozen=True)
class CurvatureLattice:
    t: np.ndarray            # interior frame times (2 trimmed each end)
    x: np.ndarray
    K: np.ndarray            # NaN where masked out
    mask: np.ndarray         # True where K was evaluated
    delta: float             # det floor is delta**2
    wedge: np.ndarray        # wedge values on the same interior lattice


def gaussian_curvature(g11, g12, g22, grid: Grid, frame_dt, delta) -> tuple:
    """Brioschi curvature of a metric lattice (frames along axis 0).

    Requires a uniform frame spacing and at least 5 frames; returns
    (K, mask) on the interior lattice (first/last two frames trimmed),
    with points where det <= delta**2 masked out (NaN).
    """
    g11 = np.asarray(g11, dtype=float)
    if g11.ndim != 2 or g11.shape[0] < 5 or g11.shape[1] < 5:
        raise GeometryError("need a lattice of at least 5x5 metric samples")
    dt = float(frame_dt)

    if grid.periodic:
        def sx(A, order=1):
            return spectral_derivative(A, grid, order) if A.ndim == 1 else _spec_rows(A, grid, order)
    else:
        def sx(A, order=1):
            return np.apply_along_axis(_fd_derivative, -1, A, grid.dx, order)

    def dtd(A):
        return (-A[4:] + 8.0 * A[3:-1] - 8.0 * A[1:-3] + A[:-4]) / (12.0 * dt)

    def dtt(A):
        return (-A[4:] + 16.0 * A[3:-1] - 30.0 * A[2:-2] + 16.0 * A[1:-3] - A[:-4]) / (12.0 * dt * dt)

    E, F, G = g11, g12, g22
    Ei, Fi, Gi = E[2:-2], F[2:-2], G[2:-2]
    Ex, Fx, Gx = sx(E)[2:-2], sx(F)[2:-2], sx(G)[2:-2]
    Et, Ft, Gt = dtd(E), dtd(F), dtd(G)
    Ett, Gxx = dtt(E), sx(G, 2)[2:-2]
    Fxt = dtd(sx(F))

    det = Ei * Gi - Fi * Fi
    mask = det > float(delta) ** 2
    A = -0.5 * Ett + Fxt - 0.5 * Gxx
    M1 = (
        A * det
        - 0.5 * Ex * ((Ft - 0.5 * Gx) * Gi - Fi * 0.5 * Gt)
        + (Fx - 0.5 * Et) * ((Ft - 0.5 * Gx) * Fi - Ei * 0.5 * Gt)
    )
    M2 = -(0.5 * Et) * (0.5 * Et * Gi - Fi * 0.5 * Gx) + 0.5 * Gx * (
        0.5 * Et * Fi - Ei * 0.5 * Gx
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        K = np.where(mask, (M1 - M2) / det**2, np.nan)
    return K, mask


def _spec_rows(A, grid: Grid, order):
    k = grid.wavenumbers
    mult = (1j * k) ** order
    if order % 2 == 1 and grid.n_points % 2 == 0:
        mult = mult.copy()
        mult[-1] = 0.0
    return np.fft.irfft(mult * np.fft.rfft(A, axis=-1), n=grid.n_points, axis=-1)


def metric_lattice(traj: Trajectory, lam, t_min=None, t_max=None):
    """(times, CoframeSample, MetricSample) over stored frames in [t_min, t_max]."""
    frames = traj.frames
    if t_min is not None or t_max is not None:
        lo = -np.inf if t_min is None else t_min - 1e-12
        hi = np.inf if t_max is None else t_max + 1e-12
        frames = [fr for fr in frames if lo <= fr.t <= hi]
    if not frames:
        raise GeometryError("no frames in the requested window")
    t = np.array([fr.t for fr in frames])
    U = np.array([fr.u.values for fr in frames])
    UX = np.array([fr.ux.values for fr in frames])
    M = np.array([fr.m.values for fr in frames])
    cf = coframe(U, UX, M, lam)
    return t, cf, metric(cf)


def curvature_lattice(traj: Trajectory, lam, delta_rel=0.2, t_min=None, t_max=None) -> CurvatureLattice:
    """Brioschi curvature over the stored frames, masked where the wedge is
    below delta_rel times its lattice maximum."""
    t, cf, g = metric_lattice(traj, lam, t_min, t_max)
    if len(t) < 5:
        raise GeometryError("need at least 5 frames for the t-stencil")
    dts = np.diff(t)
    if np.max(np.abs(dts - dts[0])) > 1e-9 * max(abs(dts[0]), 1e-300):
        raise GeometryError("curvature lattice requires uniformly spaced frames")
    wedge = cf.wedge
    delta = float(delta_rel) * float(np.max(np.abs(wedge)))
    K, mask = gaussian_curvature(g.g11, g.g12, g.g22, traj.grid, dts[0], delta)
    return CurvatureLattice(
        t=t[2:-2], x=traj.grid.x, K=K, mask=mask, delta=delta, wedge=wedge[2:-2]
    )


# ----------------------------------------------------------------------------
# generic regions


@dataclass(frozen=True)
class Rectangle:
    t_lo: float
    t_hi: float
    x_lo: float
    x_hi: float
    sign_ux: int
    frame_slice: tuple
    index_slice: tuple


@dataclass(frozen=True)
class GenericRegions:
    rectangles: list
    delta: float
    anomaly: bool            # nontrivial run produced no region

    def frames_covered(self, n_frames):
        hit = np.zeros(n_frames, dtype=bool)
        for r in self.rectangles:
            hit[r.frame_slice[0] : r.frame_slice[1]] = True
        return hit


def generic_regions(traj: Trajectory, lam, delta_rel=1e-8) -> GenericRegions:
    """Maximal lattice rectangles with |wedge| above threshold and constant
    sign of u_x, grown greedily row by row (disjoint by construction)."""
    t, cf, _ = metric_lattice(traj, lam)
    wedge = cf.wedge
    UX = -cf.f22
    delta = float(delta_rel) * float(np.max(np.abs(wedge)))
    valid = np.abs(wedge) > delta
    sgn = np.sign(UX).astype(int)
    sgn[~valid] = 0

    nt, nx = sgn.shape
    used = np.zeros_like(valid, dtype=bool)
    rects = []
    for i in range(nt):
        j = 0
        while j < nx:
            s = sgn[i, j]
            if s == 0 or used[i, j]:
                j += 1
                continue
            j1 = j
            while j1 + 1 < nx and sgn[i, j1 + 1] == s and not used[i, j1 + 1]:
                j1 += 1
            i1 = i
            while i1 + 1 < nt and np.all(sgn[i1 + 1, j : j1 + 1] == s) and not used[i1 + 1, j : j1 + 1].any():
                i1 += 1
            used[i : i1 + 1, j : j1 + 1] = True
            rects.append(
                Rectangle(
                    t_lo=float(t[i]),
                    t_hi=float(t[i1]),
                    x_lo=float(traj.grid.x[j]),
                    x_hi=float(traj.grid.x[j1]),
                    sign_ux=int(s),
                    frame_slice=(i, i1 + 1),
                    index_slice=(j, j1 + 1),
                )
            )
            j = j1 + 1
    nontrivial = any(fr.u.max_abs() > 0.0 for fr in traj.frames)
    return GenericRegions(rectangles=rects, delta=delta, anomaly=nontrivial and not rects)


# ----------------------------------------------------------------------------
# compact-support tail metrics


@dataclass(frozen=True)
class TailMetricModel:
    """Metric of the pure-exponential zone u = E e^{x} (left) / E e^{-x} (right),
    where the momentum vanishes identically."""

    side: str                # 'left' | 'right'
    lam: float

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise GeometryError("side must be 'left' or 'right'")
        _lam_constants(self.lam)

    def fields(self, x, E):
        x = np.asarray(x, dtype=float)
        u = E * np.exp(x if self.side == "left" else -x)
        ux = u if self.side == "left" else -u
        return u, ux

    def metric(self, x, E) -> MetricSample:
        u, ux = self.fields(x, E)
        return metric(coframe(u, ux, np.zeros_like(u), self.lam))

    def baseline(self) -> MetricSample:
        """Limit metric at u = m = 0: singular for every lambda."""
        P, _, R = _lam_constants(self.lam)
        return MetricSample(g11=P * P, g12=-P * R, g22=R * R)


# ----------------------------------------------------------------------------
# tail amplitude extraction


@dataclass(frozen=True)
class TailAmplitudes:
    t: np.ndarray
    E_plus: np.ndarray
    E_minus: np.ndarray
    slope_plus: np.ndarray    # NaN when below floor
    slope_minus: np.ndarray
    below_floor_plus: np.ndarray
    below_floor_minus: np.ndarray


def _fit_tail(x, u, side, upper, lower, margin, min_points):
    """log|u| vs x least squares on the pure-exponential zone; returns
    (amplitude, slope) or (0.0, nan) when there is too little tail."""
    absu = np.abs(u)
    above = np.nonzero(absu >= upper)[0]
    if len(above) == 0:
        return 0.0, float("nan")
    if side == "right":
        start = above[-1]
        zone = slice(start, len(x))
        xs, us = x[zone], absu[zone]
        sel = (xs >= xs[0] + margin) & (us > lower) & (us < upper)
    else:
        start = above[0]
        xs, us = x[: start + 1], absu[: start + 1]
        sel = (xs <= xs[-1] - margin) & (us > lower) & (us < upper)
    if np.count_nonzero(sel) < min_points:
        return 0.0, float("nan")
    coef = np.polyfit(xs[sel], np.log(us[sel]), 1)
    return float(np.exp(coef[1])), float(coef[0])


def extract_tail_amplitudes(
    traj: Trajectory,
    upper=1e-4,
    lower=1e-12,
    margin=1.5,
    min_points=8,
) -> TailAmplitudes:
    """Fit u ~ E+ e^{-x} and E- e^{x} outside the support image per frame.

    The fit window keeps |u| inside (lower, upper) and at least `margin`
    beyond the last point with |u| >= upper, which skips the non-exponential
    rim of the support.
    """
    x = traj.grid.x
    t, Ep, Em, sp, sm = [], [], [], [], []
    for fr in traj.frames:
        u = fr.u.values
        e_plus, slope_p = _fit_tail(x, u, "right", upper, lower, margin, min_points)
        e_minus, slope_m = _fit_tail(x, u, "left", upper, lower, margin, min_points)
        t.append(fr.t)
        Ep.append(e_plus)
        Em.append(e_minus)
        sp.append(slope_p)
        sm.append(slope_m)
    sp = np.asarray(sp)
    sm = np.asarray(sm)
    return TailAmplitudes(
        t=np.asarray(t),
        E_plus=np.asarray(Ep),
        E_minus=np.asarray(Em),
        slope_plus=sp,
        slope_minus=sm,
        below_floor_plus=~np.isfinite(sp),
        below_floor_minus=~np.isfinite(sm),
    )
