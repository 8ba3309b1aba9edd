"""Conserved channels, wave-breaking prediction/detection and metric blow-up.

Channels per frame:

    H0 = int u dx        (equals int m dx on solutions)
    H1 = 1/2 int (u^2 + u_x^2) dx
    H2 = 1/2 int (u^3 + u u_x^2) dx
    y  = inf_x u_x, xi = its argmin       (leftmost lattice point)

Breaking is predicted from the initial slope test

    min u0' < -||u0||_{H1} / sqrt(2)

and the lifespan admits the lower bound

    T(u0) = -(2 / ||u0||_{H1}) arctan(||u0||_{H1} / inf u0')

(+inf when inf u0' >= 0).  After a run, the collapse of y(t) is fitted
against the Riccati model y' <= -(eps/4) y^2, i.e. 1/y(t) gains slope at
least eps/4; the fitted slope over the last decade of |y| growth gives an
empirical eps_hat (no claim it matches any proof constant).

The metric blow-up monitor tracks sup_x g22 per frame together with the
g11/g12 channels along the minimizer path x = xi(t).  At the minimizer the
second derivative of u vanishes identically, so the channel evaluation
substitutes m(xi) = u(xi); sampling the lattice m at the discrete argmin
instead measures the u_xxx * dx interpolation error, which dwarfs the
channel itself once the breaking front nears the grid scale (both values
are reported).  The frame-wise sandwich

    |u_x| <= sqrt(g22) <= |u_x| + ||u0||_{H1} ||m0||_inf e^{2 int ||u_x||_inf}
                          + |l/2 - 1/(2l)| ||u0||_{H1} + (1 + l^2)/2

bounds sqrt(u_x^2 + f12^2) pointwise via |f12| <= |u||m| + |Q||u| + R with
||u||_inf <= ||u0||_{H1} and the momentum transport bound; the last two
terms restore the constant contributions that the asymptotic statement
drops, so a violation beyond tolerance is a genuine anomaly.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ChpssError
from .geometry import _lam_constants
from .gridfield import (
    Field,
    derivative,
    inf_with_argmin,
    refined_min,
    sobolev_norm,
    tail_magnitude,
)
from .solver import SolutionFrame, Trajectory

NONNEG_GLOBAL = "nonneg_global"
NONPOS_GLOBAL = "nonpos_global"
BREAKING_PATTERN = "breaking_pattern"
INDETERMINATE = "indeterminate"


def conserved_channels(frame: SolutionFrame):
    """(H0, H1, H2) by quadrature on one frame."""
    u, ux = frame.u.values, frame.ux.values
    g = frame.u.grid
    H0 = g.dx * float(np.sum(u))
    H1 = 0.5 * g.dx * float(np.sum(u * u + ux * ux))
    H2 = 0.5 * g.dx * float(np.sum(u**3 + u * ux * ux))
    return H0, H1, H2


@dataclass(frozen=True)
class BreakingCriterion:
    met: bool
    witness_x: float
    margin: float          # -||u0||_1/sqrt(2) - min u0'; positive iff met
    min_slope: float
    threshold: float


def breaking_criterion(u0: Field) -> BreakingCriterion:
    """Initial-slope test that guarantees finite-time breaking when met."""
    min_slope, witness = inf_with_argmin(derivative(u0, 1))
    threshold = -sobolev_norm(u0, 1) / math.sqrt(2.0)
    margin = threshold - min_slope
    return BreakingCriterion(
        met=bool(min_slope < threshold),
        witness_x=witness,
        margin=margin,
        min_slope=min_slope,
        threshold=threshold,
    )


def lifespan_lower_bound(u0: Field) -> float:
    """arctan lower bound for the maximal existence time; +inf when the
    initial slope is nowhere negative.

    The infimum of u0' is taken over the band-limited interpolant rather
    than the bare lattice: the lattice minimum overshoots by O(dx^2), which
    alone would dominate the formula's error budget.
    """
    norm1 = sobolev_norm(u0, 1)
    if norm1 == 0.0:
        raise ChpssError("lifespan bound undefined for the trivial datum")
    min_slope, _ = refined_min(derivative(u0, 1))
    if min_slope >= 0.0:
        return math.inf
    return -(2.0 / norm1) * math.atan(norm1 / min_slope)


# ----------------------------------------------------------------------------
# breaking monitor


@dataclass(frozen=True)
class BlowupReport:
    criterion_met: bool
    witness_x: float
    criterion_margin: float
    T_lower: float
    t_numeric: float | None
    epsilon_hat: float | None
    riccati_violations: int | None
    y0: float
    y_final: float
    monotone_after_departure: bool
    h1_drift_at_end: float


def breaking_monitor(traj: Trajectory, departure_rel=0.05, envelope_tol=0.25) -> BlowupReport:
    """Track y(t) = inf u_x and fit the Riccati collapse on blow-up runs.

    Monotonicity of the collapse is checked against the running-minimum
    envelope: once y departs below y(0), it may wobble (the discrete argmin
    hops between competing minima, and the front oscillates at the grid
    scale near saturation) but must never rebound above the envelope by more
    than envelope_tol relative.
    """
    log = traj.log
    t, y, H1 = log["t"], log["y"], log["H1"]
    u0 = traj.frames[0].u
    crit = breaking_criterion(u0)
    T_lower = math.inf if u0.max_abs() == 0.0 else lifespan_lower_bound(u0)
    t_numeric = traj.t_numeric

    y0 = float(y[0])
    monotone = True
    if y0 < 0.0:
        departed = y < y0 * (1.0 + departure_rel)
        if departed.any():
            seg = y[int(np.argmax(departed)):]
            run_min = np.minimum.accumulate(seg)
            monotone = bool(np.all(seg - run_min <= envelope_tol * np.abs(run_min)))

    eps_hat = None
    violations = None
    if t_numeric is not None and y[-1] < 0.0:
        y_end = y[-1]
        window = y <= y_end / 10.0
        if np.count_nonzero(window) >= 4:
            tw, yw = t[window], y[window]
            slope = np.polyfit(tw, 1.0 / yw, 1)[0]
            eps_hat = float(4.0 * slope)
            dinv = np.diff(1.0 / yw) / np.diff(tw)
            violations = int(np.count_nonzero(dinv < 0.9 * slope))

    drift = abs(H1[-1] / H1[0] - 1.0) if H1[0] != 0.0 else 0.0
    return BlowupReport(
        criterion_met=crit.met,
        witness_x=crit.witness_x,
        criterion_margin=crit.margin,
        T_lower=T_lower,
        t_numeric=t_numeric,
        epsilon_hat=eps_hat,
        riccati_violations=violations,
        y0=y0,
        y_final=float(y[-1]),
        monotone_after_departure=monotone,
        h1_drift_at_end=float(drift),
    )


# ----------------------------------------------------------------------------
# metric blow-up monitor


@dataclass(frozen=True)
class MetricBlowupReport:
    t: np.ndarray
    sup_g22: np.ndarray
    x_at_sup: np.ndarray
    g11_xi: np.ndarray           # minimizer-path channel with m(xi) = u(xi)
    g12_xi: np.ndarray
    g22_xi: np.ndarray
    g11_xi_lattice: np.ndarray   # raw lattice samples at the discrete argmin
    g12_xi_lattice: np.ndarray
    sandwich_margin: np.ndarray  # min over x of slack in both inequalities
    anomalies: int               # frames with violation beyond tolerance
    blown_up: bool               # sup over frames of sup_x g22 > 1e6

    def channel_bound_ok(self, factor=10.0):
        """Minimizer-path g11/g12 within factor*(initial value + 1)."""
        b11 = factor * (abs(self.g11_xi[0]) + 1.0)
        b12 = factor * (abs(self.g12_xi[0]) + 1.0)
        return bool(
            np.all(np.abs(self.g11_xi) <= b11) and np.all(np.abs(self.g12_xi) <= b12)
        )


def metric_blowup_monitor(traj: Trajectory, lam, tol=1e-6, blowup_level=1e6) -> MetricBlowupReport:
    P, Q, R = _lam_constants(lam)
    log = traj.log
    t_log, sup_ux = log["t"], log["sup_abs_ux"]
    cum = np.concatenate(
        [[0.0], np.cumsum(0.5 * (sup_ux[1:] + sup_ux[:-1]) * np.diff(t_log))]
    )
    norm_u0 = math.sqrt(2.0 * log["H1"][0])
    m0_sup = float(np.max(np.abs(traj.frames[0].m.values)))

    rows_t, sup22, x_sup = [], [], []
    g11_xi, g12_xi, g22_xi, g11_lat, g12_lat, margins = [], [], [], [], [], []
    anomalies = 0
    for fr in traj.frames:
        u, ux, m = fr.u.values, fr.ux.values, fr.m.values
        f12 = u * m + Q * u - R
        g22 = ux * ux + f12 * f12
        j_sup = int(np.argmax(g22))
        j_min = int(np.argmin(ux))

        # critical-point channel: u_xx vanishes at the minimizer, so m(xi) = u(xi)
        uxi = u[j_min]
        f11_th = P - uxi
        f12_th = uxi * uxi + Q * uxi - R
        g11_xi.append(f11_th * f11_th)
        g12_xi.append(f11_th * f12_th)
        g22_xi.append(ux[j_min] ** 2 + f12_th * f12_th)
        g11_lat.append((P - m[j_min]) ** 2)
        g12_lat.append((P - m[j_min]) * f12[j_min])

        i = int(np.argmin(np.abs(t_log - fr.t)))
        bound = norm_u0 * m0_sup * math.exp(2.0 * cum[i]) + abs(Q) * norm_u0 + R
        root = np.sqrt(g22)
        slack = min(
            float(np.min(root - np.abs(ux))),
            float(np.min(np.abs(ux) + bound - root)),
        )
        margins.append(slack)
        if slack < -tol:
            anomalies += 1

        rows_t.append(fr.t)
        sup22.append(float(g22[j_sup]))
        x_sup.append(float(traj.grid.x[j_sup]))

    sup22 = np.asarray(sup22)
    return MetricBlowupReport(
        t=np.asarray(rows_t),
        sup_g22=sup22,
        x_at_sup=np.asarray(x_sup),
        g11_xi=np.asarray(g11_xi),
        g12_xi=np.asarray(g12_xi),
        g22_xi=np.asarray(g22_xi),
        g11_xi_lattice=np.asarray(g11_lat),
        g12_xi_lattice=np.asarray(g12_lat),
        sandwich_margin=np.asarray(margins),
        anomalies=anomalies,
        blown_up=bool(np.max(sup22) > blowup_level),
    )


# ----------------------------------------------------------------------------
# McKean sign classifier


@dataclass(frozen=True)
class McKeanClass:
    verdict: str
    crossing: float | None


def mckean_classify(m0: Field, tol_rel=1e-12) -> McKeanClass:
    """Sign-pattern classifier of the initial momentum.

    nonneg/nonpos are global-existence verdicts; a pure +,- pattern (all
    positive mass strictly left of all negative mass) is the breaking
    pattern; anything else is indeterminate.
    """
    v = m0.values
    band = tol_rel * float(np.max(np.abs(v))) if np.max(np.abs(v)) > 0 else 0.0
    sgn = np.zeros_like(v, dtype=int)
    sgn[v > band] = 1
    sgn[v < -band] = -1

    nz = sgn[sgn != 0]
    if len(nz) == 0 or np.all(nz >= 0):
        return McKeanClass(NONNEG_GLOBAL, None)
    if np.all(nz <= 0):
        return McKeanClass(NONPOS_GLOBAL, None)
    # compress consecutive duplicates
    pattern = nz[np.concatenate([[True], nz[1:] != nz[:-1]])]
    if len(pattern) == 2 and pattern[0] == 1 and pattern[1] == -1:
        last_pos = np.nonzero(sgn == 1)[0][-1]
        first_neg = np.nonzero(sgn == -1)[0][0]
        crossing = 0.5 * (m0.grid.x[last_pos] + m0.grid.x[first_neg])
        return McKeanClass(BREAKING_PATTERN, float(crossing))
    return McKeanClass(INDETERMINATE, None)


# ----------------------------------------------------------------------------
# per-frame diagnostics records


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    H0: float
    H1: float
    H2: float
    y: float
    xi: float
    sup_g22: float
    sup_abs_f32: float       # sup |u_x|, the second form's only coefficient
    tail_max: float
    E_plus: float
    E_minus: float


def diagnostics_records(traj: Trajectory, lam, tails=None):
    """One record per stored frame; `tails` may carry precomputed amplitudes."""
    P, Q, R = _lam_constants(lam)
    records = []
    for i, fr in enumerate(traj.frames):
        u, ux, m = fr.u.values, fr.ux.values, fr.m.values
        H0, H1, H2 = conserved_channels(fr)
        y, xi = inf_with_argmin(fr.ux)
        f12 = u * m + Q * u - R
        sup_g22 = float(np.max(ux * ux + f12 * f12))
        tail = max(tail_magnitude(fr.u), tail_magnitude(fr.ux))
        ep = float(tails.E_plus[i]) if tails is not None else 0.0
        em = float(tails.E_minus[i]) if tails is not None else 0.0
        records.append(
            DiagnosticsRecord(
                t=fr.t, H0=H0, H1=H1, H2=H2, y=y, xi=xi,
                sup_g22=sup_g22,
                sup_abs_f32=float(np.max(np.abs(ux))),
                tail_max=tail, E_plus=ep, E_minus=em,
            )
        )
    return records


def write_diagnostics_csv(path, records):
    cols = ("t", "H0", "H1", "H2", "y", "xi", "sup_g22",
            "sup_abs_f32", "tail_max", "E_plus", "E_minus")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for r in records:
            fh.write(",".join(f"{getattr(r, c):.17g}" for c in cols) + "\n")
