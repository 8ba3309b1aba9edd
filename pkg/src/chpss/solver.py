"""Time evolution of the nonlocal Camassa-Holm equation.

State is advanced in the velocity variable u via the first-order evolution

    u_t = -u u_x - (d/dx)(1 - d^2/dx^2)^{-1} (u^2 + u_x^2 / 2)

with classical RK4 in time and the grid's native spatial calculus (spectral
on periodic grids).  Step size follows a CFL-type rule dt = cfl*dx/max(1,
sup|u|), shrunk by min(1, 10/|inf u_x|) as wave breaking approaches so the
steepening front is stepped stably all the way to the numerical blow-up
threshold.

Every accepted step appends scalar channels (inf u_x and its argmin, sup|u|,
sup|u_x|, the conserved integrals) to a dense per-step log, independent of
how sparsely full frames are stored.
"""

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import NanFault, TailFault, TrivialDatumError
from .gridfield import (
    TAIL_REL_TOL,
    Field,
    Grid,
    spectral_derivative,
    derivative,
    tail_magnitude,
)
from .helmholtz import SPECTRAL, normalize_kernel, _two_pass_apply

REACHED_T_END = "reached_t_end"
BLOWUP_DETECTED = "blowup_detected"
TAIL_FAULT = "tail_fault"
NAN_FAULT = "nan_fault"


@dataclass(frozen=True)
class RunConfig:
    grid: Grid
    lam: float = 1.0
    t_end: float = 1.0
    cfl: float = 0.3
    blowup_threshold: float = 1e4
    output_stride: int = 1
    kernel: str = SPECTRAL
    allow_trivial: bool = False
    tail_rel_tol: float = TAIL_REL_TOL

    def __post_init__(self):
        if self.lam == 0.0:
            raise ValueError("lambda must be nonzero")
        if self.t_end <= 0.0:
            raise ValueError("t_end must be positive")
        if not (0.0 < self.cfl <= 1.0):
            raise ValueError("cfl must lie in (0, 1]")
        if self.output_stride < 1:
            raise ValueError("output_stride must be >= 1")
        object.__setattr__(self, "kernel", normalize_kernel(self.kernel))


@dataclass(frozen=True)
class SolutionFrame:
    t: float
    u: Field
    m: Field
    ux: Field
    uxx: Field
    step_index: int
    dt_last: float


@dataclass(frozen=True)
class Termination:
    kind: str
    t: float
    t_numeric: float | None = None
    detail: str = ""


@dataclass
class StepLog:
    """Per-step scalar channels, dense regardless of the frame stride."""

    t: list = dc_field(default_factory=list)
    y: list = dc_field(default_factory=list)
    xi: list = dc_field(default_factory=list)
    sup_u: list = dc_field(default_factory=list)
    sup_abs_ux: list = dc_field(default_factory=list)
    H0: list = dc_field(default_factory=list)
    H1: list = dc_field(default_factory=list)
    H2: list = dc_field(default_factory=list)

    def append(self, t, u, ux, dx, x):
        j = int(np.argmin(ux))
        self.t.append(t)
        self.y.append(float(ux[j]))
        self.xi.append(float(x[j]))
        self.sup_u.append(float(np.max(np.abs(u))))
        self.sup_abs_ux.append(float(np.max(np.abs(ux))))
        self.H0.append(float(dx * np.sum(u)))
        self.H1.append(float(0.5 * dx * np.sum(u * u + ux * ux)))
        self.H2.append(float(0.5 * dx * np.sum(u**3 + u * ux * ux)))

    def finalized(self):
        return {name: np.asarray(getattr(self, name)) for name in
                ("t", "y", "xi", "sup_u", "sup_abs_ux", "H0", "H1", "H2")}


@dataclass
class Trajectory:
    grid: Grid
    config: RunConfig
    frames: list
    termination: Termination | None = None
    log: dict | None = None
    fault: Exception | None = None

    @property
    def t_numeric(self):
        return None if self.termination is None else self.termination.t_numeric

    def frame_times(self):
        return np.array([fr.t for fr in self.frames])


# ----------------------------------------------------------------------------
# right-hand side


def _derivs(values, grid: Grid):
    if grid.periodic:
        k = grid.wavenumbers
        fhat = np.fft.rfft(values)
        d1 = 1j * k
        if grid.n_points % 2 == 0:
            d1 = d1.copy()
            d1[-1] = 0.0
        ux = np.fft.irfft(d1 * fhat, n=grid.n_points)
        uxx = np.fft.irfft(-(k**2) * fhat, n=grid.n_points)
        return ux, uxx
    u = Field(grid, values)
    return derivative(u, 1).values, derivative(u, 2).values


def _rhs_values(values, grid: Grid, kernel: str):
    if grid.periodic and kernel == SPECTRAL:
        k = grid.wavenumbers
        fhat = np.fft.rfft(values)
        d1 = 1j * k
        if grid.n_points % 2 == 0:
            d1 = d1.copy()
            d1[-1] = 0.0
        ux = np.fft.irfft(d1 * fhat, n=grid.n_points)
        flux = values * values + 0.5 * ux * ux
        conv = np.fft.irfft(d1 / (1.0 + k**2) * np.fft.rfft(flux), n=grid.n_points)
        return -values * ux - conv
    ux = _derivs(values, grid)[0]
    flux = values * values + 0.5 * ux * ux
    conv = _two_pass_apply(flux, grid, d_dx=True)
    return -values * ux - conv


def rhs(u: Field, kernel: str = SPECTRAL, check_tail: bool = True) -> Field:
    """Nonlocal-form time derivative of u."""
    kernel = normalize_kernel(kernel)
    if check_tail:
        _check_tail(u.values, u.grid, TAIL_REL_TOL, t=math.nan)
    return Field(u.grid, _rhs_values(u.values, u.grid, kernel))


def _check_tail(u_values, grid, rel_tol, t):
    scale = float(np.max(np.abs(u_values)))
    if scale == 0.0:
        return
    ux = _derivs(u_values, grid)[0]
    worst = max(
        tail_magnitude(Field(grid, u_values)),
        tail_magnitude(Field(grid, ux)),
    )
    if worst > rel_tol * scale:
        raise TailFault(t, worst, rel_tol * scale)


# ----------------------------------------------------------------------------
# stepping


def make_frame(grid: Grid, u_values, t, step_index, dt_last) -> SolutionFrame:
    ux, uxx = _derivs(u_values, grid)
    u = Field(grid, u_values)
    return SolutionFrame(
        t=float(t),
        u=u,
        m=Field(grid, u_values - uxx),
        ux=Field(grid, ux),
        uxx=Field(grid, uxx),
        step_index=int(step_index),
        dt_last=float(dt_last),
    )


def step_rk4(frame: SolutionFrame, dt: float, cfg: RunConfig) -> SolutionFrame:
    """One classical RK4 step; faults on a non-finite result."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    grid, kern = cfg.grid, cfg.kernel
    u = frame.u.values
    k1 = _rhs_values(u, grid, kern)
    k2 = _rhs_values(u + 0.5 * dt * k1, grid, kern)
    k3 = _rhs_values(u + 0.5 * dt * k2, grid, kern)
    k4 = _rhs_values(u + dt * k3, grid, kern)
    u_new = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(u_new)):
        raise NanFault(frame.step_index + 1, frame.t + dt)
    return make_frame(grid, u_new, frame.t + dt, frame.step_index + 1, dt)


def run(u0: Field, cfg: RunConfig) -> Trajectory:
    """Advance from u0 until t_end, blow-up, or a fault.

    Faults are recorded on the returned trajectory rather than raised, so
    partial data stays available to the diagnostics.
    """
    grid = cfg.grid
    if u0.max_abs() == 0.0 and not cfg.allow_trivial:
        raise TrivialDatumError()

    frame = make_frame(grid, u0.values, 0.0, 0, 0.0)
    frames = [frame]
    log = StepLog()
    log.append(0.0, frame.u.values, frame.ux.values, grid.dx, grid.x)

    traj = Trajectory(grid=grid, config=cfg, frames=frames)

    # keep steps on a uniform schedule whenever the adaptive rule allows,
    # so stored frames sit on an evenly spaced t-lattice and t_end is exact;
    # rounding the plan up to a stride multiple keeps the final frame on it
    dt_nominal = cfg.cfl * grid.dx / max(1.0, frame.u.max_abs())
    n_plan = cfg.output_stride * max(
        1, math.ceil(cfg.t_end / (dt_nominal * cfg.output_stride))
    )
    dt_plan = cfg.t_end / n_plan

    try:
        _check_tail(frame.u.values, grid, cfg.tail_rel_tol, t=0.0)
        t = 0.0
        while cfg.t_end - t > 1e-12 * cfg.t_end:
            sup_u = log.sup_u[-1]
            y = log.y[-1]
            dt = cfg.cfl * grid.dx / max(1.0, sup_u)
            if y != 0.0:
                dt *= min(1.0, 10.0 / abs(y))
            dt = min(dt, dt_plan, cfg.t_end - t)
            frame = step_rk4(frame, dt, cfg)
            t = frame.t
            _check_tail(frame.u.values, grid, cfg.tail_rel_tol, t=t)
            log.append(t, frame.u.values, frame.ux.values, grid.dx, grid.x)

            detected = abs(log.y[-1]) > cfg.blowup_threshold
            if frame.step_index % cfg.output_stride == 0 or detected:
                frames.append(frame)
            if detected:
                traj.termination = Termination(
                    kind=BLOWUP_DETECTED, t=t, t_numeric=t,
                    detail=f"|inf u_x| = {abs(log.y[-1]):.3e} > {cfg.blowup_threshold:.3e}",
                )
                break
        else:
            if frames[-1] is not frame:
                frames.append(frame)
            traj.termination = Termination(kind=REACHED_T_END, t=t)
    except TailFault as exc:
        if frames[-1] is not frame:
            frames.append(frame)
        traj.termination = Termination(kind=TAIL_FAULT, t=exc.t, detail=str(exc))
        traj.fault = exc
    except NanFault as exc:
        if frames[-1] is not frame:
            frames.append(frame)
        traj.termination = Termination(kind=NAN_FAULT, t=exc.t, detail=str(exc))
        traj.fault = exc

    traj.log = log.finalized()
    return traj
