"""Declarative run scenarios: flat key=value configs and datum builders.

A config is UTF-8 text, one `key = value` pair per line, `#` comments.
Initial data come in three families:

    gaussian_u   u0 = a exp(-n x^2)
    gaussian_m   m0 = a exp(-n x^2), u0 recovered through the kernel
    bump_compact u0 = a exp(1 - 1/(1 - (x/w)^2)) on |x| < w, else 0

The datum value may carry its parameters inline (`datum = gaussian_m a=1 n=1`)
or they may be given as separate `a = ...` keys.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .gridfield import TAIL_REL_TOL, Field, Grid
from .helmholtz import velocity_from_momentum
from .solver import RunConfig

DATUM_KINDS = ("gaussian_u", "gaussian_m", "bump_compact")
KNOWN_DIAGNOSTICS = (
    "conserved",
    "breaking",
    "mckean",
    "metric_blowup",
    "geometry",
    "regions",
    "characteristics",
    "tails",
)
DEFAULT_DIAGNOSTICS = ("conserved", "breaking", "mckean", "metric_blowup")

_REQUIRED = ("name", "datum", "t_end")
_KNOWN_KEYS = {
    "name", "datum", "a", "n", "w", "t_end", "L", "N", "lambda", "cfl",
    "blowup_threshold", "output_stride", "kernel", "allow_trivial",
    "tail_rel_tol", "diagnostics", "seeds", "curvature_delta_rel",
    "curvature_t_min", "curvature_t_max", "output_dir",
}


@dataclass
class Scenario:
    name: str
    datum_kind: str
    a: float = 1.0
    n: float = 1.0
    w: float = 5.0
    t_end: float = 1.0
    half_width: float = 30.0
    n_points: int = 2048
    lam: float = 1.0
    cfl: float = 0.3
    blowup_threshold: float = 1e4
    output_stride: int = 1
    kernel: str = "spectral-multiplier"
    allow_trivial: bool = False
    tail_rel_tol: float = TAIL_REL_TOL
    diagnostics: tuple = DEFAULT_DIAGNOSTICS
    seeds: np.ndarray | None = None
    curvature_delta_rel: float = 0.2
    curvature_t_min: float | None = None
    curvature_t_max: float | None = None
    output_dir: str | None = None

    def grid(self) -> Grid:
        return Grid(self.half_width, self.n_points)

    def run_config(self) -> RunConfig:
        return RunConfig(
            grid=self.grid(),
            lam=self.lam,
            t_end=self.t_end,
            cfl=self.cfl,
            blowup_threshold=self.blowup_threshold,
            output_stride=self.output_stride,
            kernel=self.kernel,
            allow_trivial=self.allow_trivial,
            tail_rel_tol=self.tail_rel_tol,
        )

    def initial_datum(self) -> Field:
        return build_datum(self.grid(), self.datum_kind, self.a, self.n, self.w)


def bump_profile(x, a, w):
    """C-infinity bump of amplitude a supported on |x| < w."""
    r2 = (np.asarray(x, dtype=float) / w) ** 2
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    out[inside] = a * np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
    return out


def build_datum(grid: Grid, kind: str, a: float, n: float, w: float) -> Field:
    if kind == "gaussian_u":
        return grid.field(a * np.exp(-n * grid.x**2))
    if kind == "gaussian_m":
        m0 = grid.field(a * np.exp(-n * grid.x**2))
        return velocity_from_momentum(m0)
    if kind == "bump_compact":
        if not 0.0 < w < grid.half_width:
            raise ConfigError(f"bump half-width must lie in (0, {grid.half_width})")
        return grid.field(bump_profile(grid.x, a, w))
    raise ConfigError(f"unknown datum kind {kind!r}; expected one of {DATUM_KINDS}")


def _parse_bool(value, line):
    v = value.strip().lower()
    if v in ("true", "yes", "on", "1"):
        return True
    if v in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"expected a boolean, got {value!r}", line)


def _parse_seeds(value, line):
    """Either comma-separated positions or lo:hi:count."""
    v = value.strip()
    if ":" in v:
        parts = v.split(":")
        if len(parts) != 3:
            raise ConfigError("seed range must be lo:hi:count", line)
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 2:
            raise ConfigError("seed count must be at least 2", line)
        return np.linspace(lo, hi, count)
    return np.array([float(tok) for tok in v.split(",") if tok.strip()])


def parse_config(text: str) -> Scenario:
    """Validated Scenario from flat key=value text; faults carry line numbers."""
    pairs = {}
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected key=value, got {raw.strip()!r}", lineno)
        key, value = stripped.split("=", 1)
        key = key.strip()
        if key in pairs:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        pairs[key] = value.strip()
        lines[key] = lineno

    unknown = sorted(set(pairs) - _KNOWN_KEYS)
    if unknown:
        raise ConfigError("unknown keys: " + ", ".join(unknown), lines[unknown[0]])
    missing = [k for k in _REQUIRED if k not in pairs]
    if missing:
        raise ConfigError("missing required keys: " + ", ".join(missing))

    # inline datum parameters: "gaussian_m a=1 n=2"
    datum_tokens = pairs["datum"].split()
    kind = datum_tokens[0]
    if kind not in DATUM_KINDS:
        raise ConfigError(
            f"unknown datum {kind!r}; expected one of {DATUM_KINDS}", lines["datum"]
        )
    for tok in datum_tokens[1:]:
        if "=" not in tok:
            raise ConfigError(f"bad datum parameter {tok!r}", lines["datum"])
        k, v = tok.split("=", 1)
        if k not in ("a", "n", "w"):
            raise ConfigError(f"unknown datum parameter {k!r}", lines["datum"])
        # an explicit key elsewhere overrides the inline value (sweep-friendly)
        if k not in pairs:
            pairs[k] = v
            lines[k] = lines["datum"]

    def fnum(key, default):
        if key not in pairs:
            return default
        try:
            return float(pairs[key])
        except ValueError:
            raise ConfigError(f"expected a number for {key!r}", lines[key]) from None

    def inum(key, default):
        if key not in pairs:
            return default
        try:
            return int(pairs[key])
        except ValueError:
            raise ConfigError(f"expected an integer for {key!r}", lines[key]) from None

    lam = fnum("lambda", 1.0)
    if lam == 0.0:
        raise ConfigError("lambda must be nonzero", lines.get("lambda"))
    t_end = fnum("t_end", None)
    if not (t_end > 0.0):
        raise ConfigError("t_end must be positive", lines.get("t_end"))
    n_points = inum("N", 2048)
    if n_points < 16:
        raise ConfigError("N must be at least 16", lines.get("N"))
    cfl = fnum("cfl", 0.3)
    if not (0.0 < cfl <= 1.0):
        raise ConfigError("cfl must lie in (0, 1]", lines.get("cfl"))

    diag = DEFAULT_DIAGNOSTICS
    if "diagnostics" in pairs:
        diag = tuple(tok.strip() for tok in pairs["diagnostics"].split(",") if tok.strip())
        bad = sorted(set(diag) - set(KNOWN_DIAGNOSTICS))
        if bad:
            raise ConfigError("unknown diagnostics: " + ", ".join(bad), lines["diagnostics"])

    seeds = _parse_seeds(pairs["seeds"], lines["seeds"]) if "seeds" in pairs else None

    return Scenario(
        name=pairs["name"],
        datum_kind=kind,
        a=fnum("a", 1.0),
        n=fnum("n", 1.0),
        w=fnum("w", 5.0),
        t_end=t_end,
        half_width=fnum("L", 30.0),
        n_points=n_points,
        lam=lam,
        cfl=cfl,
        blowup_threshold=fnum("blowup_threshold", 1e4),
        output_stride=inum("output_stride", 1),
        kernel=pairs.get("kernel", "spectral-multiplier"),
        allow_trivial=_parse_bool(pairs["allow_trivial"], lines["allow_trivial"])
        if "allow_trivial" in pairs
        else False,
        tail_rel_tol=fnum("tail_rel_tol", TAIL_REL_TOL),
        diagnostics=diag,
        seeds=seeds,
        curvature_delta_rel=fnum("curvature_delta_rel", 0.2),
        curvature_t_min=fnum("curvature_t_min", None),
        curvature_t_max=fnum("curvature_t_max", None),
        output_dir=pairs.get("output_dir"),
    )
