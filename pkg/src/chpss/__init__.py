"""Numerical laboratory for the Camassa-Holm Cauchy problem and the
pseudospherical-surface geometry carried by its solutions."""

from .gridfield import (
    DECAY,
    PERIODIC,
    Field,
    Grid,
    derivative,
    inf_with_argmin,
    integrate,
    sobolev_norm,
)
from .helmholtz import (
    SPECTRAL,
    TWO_PASS,
    dx_helmholtz_inverse,
    helmholtz_inverse,
    momentum,
    velocity_from_momentum,
)
from .solver import RunConfig, SolutionFrame, Trajectory, rhs, run, step_rk4
from .geometry import (
    CoframeSample,
    MetricSample,
    TailMetricModel,
    coframe,
    curvature_lattice,
    extract_tail_amplitudes,
    generic_regions,
    metric,
    structure_residuals,
    wedge12,
)
from .characteristics import (
    CharacteristicFan,
    evolve_characteristics,
    transport_identity_residual,
)
from .diagnostics import (
    BlowupReport,
    McKeanClass,
    breaking_criterion,
    breaking_monitor,
    conserved_channels,
    lifespan_lower_bound,
    mckean_classify,
    metric_blowup_monitor,
)
from .scenario import Scenario, parse_config

__version__ = "0.1.0"
