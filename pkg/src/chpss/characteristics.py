"""Particle paths dq/dt = u(q, t) and the momentum transport identity.

Paths are integrated with RK4 across each stored-frame interval, evaluating
u by Fourier interpolation in space (exact for the periodic representation)
and linear interpolation in time between the two bracketing frames.  Along
each path the identity

    m(q(x,t), t) = m0(x) * exp(-2 int_0^t u_x(q(x,s), s) ds)

holds on solutions; its residual, with the time integral taken by the
trapezoid rule along the path, measures the combined solve/interpolation
error and is also the sign-preservation witness for the momentum.
"""

from dataclasses import dataclass

import numpy as np

from .errors import CharacteristicEscapeError, GeometryError
from .gridfield import FourierInterpolant
from .solver import Trajectory


@dataclass(frozen=True)
class CharacteristicFan:
    seeds: np.ndarray
    t: np.ndarray            # frame times
    q: np.ndarray            # shape (len(t), len(seeds))
    qx: np.ndarray           # dq/dseed by centered differences across seeds

    def min_adjacent_gap(self):
        return float(np.min(np.diff(self.q, axis=1)))

    def strictly_increasing(self):
        return self.min_adjacent_gap() > 0.0


def evolve_characteristics(traj: Trajectory, seeds) -> CharacteristicFan:
    """Integrate the particle paths through the stored frames."""
    seeds = np.sort(np.asarray(seeds, dtype=float))
    if len(traj.frames) < 2:
        raise GeometryError("need at least 2 stored frames")
    grid = traj.grid
    L = grid.half_width
    times = traj.frame_times()
    interps = [FourierInterpolant(grid, fr.u.values) for fr in traj.frames]

    q = np.empty((len(times), len(seeds)))
    q[0] = seeds
    for j in range(len(times) - 1):
        h = times[j + 1] - times[j]
        ua, ub = interps[j], interps[j + 1]

        def u_at(pos, theta):
            return (1.0 - theta) * ua(pos) + theta * ub(pos)

        p = q[j]
        k1 = u_at(p, 0.0)
        k2 = u_at(p + 0.5 * h * k1, 0.5)
        k3 = u_at(p + 0.5 * h * k2, 0.5)
        k4 = u_at(p + h * k3, 1.0)
        q[j + 1] = p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        outside = np.abs(q[j + 1]) > L
        if outside.any():
            w = int(np.argmax(outside))
            raise CharacteristicEscapeError(seeds[w], times[j + 1], q[j + 1, w], L)

    qx = np.gradient(q, seeds, axis=1)
    return CharacteristicFan(seeds=seeds, t=times, q=q, qx=qx)


@dataclass(frozen=True)
class TransportResiduals:
    seeds: np.ndarray
    t: np.ndarray
    m_along: np.ndarray          # measured m(q(x,t), t)
    m_predicted: np.ndarray      # m0(x) exp(-2 int u_x along the path)
    rel_residual: np.ndarray     # per-seed max relative residual (NaN below floor)
    below_floor: np.ndarray

    def max_rel_residual(self):
        vals = self.rel_residual[~self.below_floor]
        if len(vals) == 0:
            raise GeometryError("all seeds below the momentum floor")
        return float(np.max(vals))

    def signs_preserved(self):
        """Momentum sign along each above-floor path matches its m0 sign."""
        ok = True
        for i in range(len(self.seeds)):
            if self.below_floor[i]:
                continue
            s0 = np.sign(self.m_predicted[0, i])
            ok = ok and bool(np.all(np.sign(self.m_along[:, i]) == s0))
        return ok


def transport_identity_residual(
    traj: Trajectory, fan: CharacteristicFan, floor_rel=1e-8
) -> TransportResiduals:
    """Residual of the momentum transport identity along each path.

    Seeds whose |m0| is below floor_rel * max|m0| are flagged instead of
    contributing noise-dominated relative errors.
    """
    grid = traj.grid
    times = fan.t
    m_interp = [FourierInterpolant(grid, fr.m.values) for fr in traj.frames]
    ux_interp = [FourierInterpolant(grid, fr.ux.values) for fr in traj.frames]

    m_along = np.empty_like(fan.q)
    ux_along = np.empty_like(fan.q)
    for j in range(len(times)):
        m_along[j] = m_interp[j](fan.q[j])
        ux_along[j] = ux_interp[j](fan.q[j])

    # trapezoid of u_x along each path
    integ = np.zeros_like(fan.q)
    dts = np.diff(times)[:, None]
    integ[1:] = np.cumsum(0.5 * (ux_along[1:] + ux_along[:-1]) * dts, axis=0)

    m0 = m_along[0]
    pred = m0[None, :] * np.exp(-2.0 * integ)

    floor = floor_rel * float(np.max(np.abs(traj.frames[0].m.values)))
    below = np.abs(m0) <= floor
    scale = np.maximum(np.max(np.abs(pred), axis=0), max(floor, 1e-300))
    rel = np.max(np.abs(m_along - pred), axis=0) / scale
    rel[below] = np.nan
    return TransportResiduals(
        seeds=fan.seeds,
        t=times,
        m_along=m_along,
        m_predicted=pred,
        rel_residual=rel,
        below_floor=below,
    )
