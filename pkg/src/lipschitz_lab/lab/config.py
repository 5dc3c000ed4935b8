"""Flat ``key = value`` experiment configuration.

Recognized keys (defaults in brackets)::

    domain            unit-box | l-shape | box | polygon          [unit-box]
    domain.dim        dimension of unit boxes                     [2]
    domain.lo/hi      box corners, comma separated
    domain.vertices   polygon vertices "x,y; x,y; ..."
    sampling          grid | uniform | halton | file              [grid]
    sizes             point counts for random sampling, increasing
    spacings          grid spacings, decreasing
    sampling.file     CSV cloud for sampling = file
    seed              base seed; each size uses seed XOR size     [0]
    kernel            indicator | tent | truncated-exponential | custom-table [indicator]
    kernel.file       CSV table "t,eta" for custom-table
    schedule          power | log | proportional                  [power]
    schedule.K        [1.5]
    schedule.alpha    [0.75]
    constraint        none | boundary | two-points | explicit-file [none]
    constraint.points "x,y; x,y" for two-points
    constraint.file   CSV "x0,..,x{d-1}[,value]" for explicit-file
    labels            reference | zero | values                   [reference]
    labels.values     comma separated label values
    task              functional | infinity-harmonic | mcshane-lower | mcshane-upper | ground-state [functional]
    p                 ground-state exponent                       [2]
    norm              empirical | voronoi-weighted                [empirical]
    reference         none | linear | lshape-power | distance-to-boundary [none]
    reference.a       linear coefficients, comma separated
    reference.b       linear offset                               [0]
    reference.p       lshape-power exponent                       [1]
    tol               solver tolerance                            [1e-8]
    max_sweeps        solver sweep cap                            [100000]
    probe_h           probe lattice spacing; default half the sample spacing
    out               output directory                            [out]
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

DOMAINS = ("unit-box", "l-shape", "box", "polygon")
SAMPLINGS = ("grid", "uniform", "halton", "file")
KERNELS = ("indicator", "tent", "truncated-exponential", "custom-table")
SCHEDULES = ("power", "log", "proportional")
CONSTRAINTS = ("none", "boundary", "two-points", "explicit-file")
LABELS = ("reference", "zero", "values")
TASKS = ("functional", "infinity-harmonic", "mcshane-lower", "mcshane-upper", "ground-state")
NORMS = ("empirical", "voronoi-weighted")
REFERENCES = ("none", "linear", "lshape-power", "distance-to-boundary")


class ConfigError(ValueError):
    pass


def _floats(text):
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())


def _points(text):
    return tuple(_floats(chunk) for chunk in text.split(";") if chunk.strip())


@dataclass(frozen=True)
class ExperimentConfig:
    domain: str = "unit-box"
    domain_dim: int = 2
    domain_lo: tuple = ()
    domain_hi: tuple = ()
    domain_vertices: tuple = ()
    sampling: str = "grid"
    sizes: tuple = ()
    spacings: tuple = ()
    sampling_file: str = ""
    seed: int = 0
    kernel: str = "indicator"
    kernel_file: str = ""
    schedule: str = "power"
    schedule_K: float = 1.5
    schedule_alpha: float = 0.75
    constraint: str = "none"
    constraint_points: tuple = ()
    constraint_file: str = ""
    labels: str = "reference"
    labels_values: tuple = ()
    task: str = "functional"
    p: float = 2.0
    norm: str = "empirical"
    reference: str = "none"
    reference_a: tuple = ()
    reference_b: float = 0.0
    reference_p: float = 1.0
    tol: float = 1e-8
    max_sweeps: int = 100_000
    probe_h: float | None = None
    out: str = "out"
    warnings: tuple = field(default=(), compare=False)

    @property
    def cells(self):
        """Per-row size parameter: spacings for grids, point counts otherwise."""
        return self.spacings if self.sampling == "grid" else self.sizes

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "warnings"}


_CONVERT = {
    "domain.dim": ("domain_dim", int),
    "domain.lo": ("domain_lo", _floats),
    "domain.hi": ("domain_hi", _floats),
    "domain.vertices": ("domain_vertices", _points),
    "sizes": ("sizes", lambda t: tuple(int(float(x)) for x in _floats(t))),
    "spacings": ("spacings", _floats),
    "sampling.file": ("sampling_file", str),
    "seed": ("seed", int),
    "kernel.file": ("kernel_file", str),
    "schedule.K": ("schedule_K", float),
    "schedule.alpha": ("schedule_alpha", float),
    "constraint.points": ("constraint_points", _points),
    "constraint.file": ("constraint_file", str),
    "labels.values": ("labels_values", _floats),
    "p": ("p", float),
    "reference.a": ("reference_a", _floats),
    "reference.b": ("reference_b", float),
    "reference.p": ("reference_p", float),
    "tol": ("tol", float),
    "max_sweeps": ("max_sweeps", int),
    "probe_h": ("probe_h", float),
    "out": ("out", str),
}
for _key in ("domain", "sampling", "kernel", "schedule", "constraint", "labels", "task", "norm", "reference"):
    _CONVERT[_key] = (_key, str)


def parse_config(text, **overrides):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in _CONVERT:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        name, conv = _CONVERT[key]
        try:
            values[name] = conv(val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    values.update({k: v for k, v in overrides.items() if v is not None})
    return validate_config(ExperimentConfig(**values))


def load_config(path, **overrides):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text, **overrides)


def _choice(name, value, options):
    if value not in options:
        raise ConfigError(f"{name} must be one of {', '.join(options)}; got {value!r}")


def validate_config(cfg):
    for name, options in (
        ("domain", DOMAINS),
        ("sampling", SAMPLINGS),
        ("kernel", KERNELS),
        ("schedule", SCHEDULES),
        ("constraint", CONSTRAINTS),
        ("labels", LABELS),
        ("task", TASKS),
        ("norm", NORMS),
        ("reference", REFERENCES),
    ):
        _choice(name, getattr(cfg, name), options)
    cells = cfg.cells
    if cfg.sampling == "file":
        if not cfg.sampling_file:
            raise ConfigError("sampling = file needs sampling.file")
        cells = cfg.sizes or (0,)
        cfg = replace(cfg, sizes=cells)
    elif not cells:
        raise ConfigError("grid sampling needs spacings" if cfg.sampling == "grid" else "sampling needs sizes")
    elif cfg.sampling == "grid":
        if any(b >= a for a, b in zip(cells, cells[1:])) or min(cells) <= 0:
            raise ConfigError("spacings must be positive and strictly decreasing")
    elif any(b <= a for a, b in zip(cells, cells[1:])) or min(cells) < 2:
        raise ConfigError("sizes must be at least 2 and strictly increasing")
    if cfg.schedule_K <= 0:
        raise ConfigError("schedule.K must be positive")
    if cfg.schedule == "power" and not 0 < cfg.schedule_alpha < 1:
        raise ConfigError("schedule.alpha must lie in (0, 1)")
    if cfg.domain == "box" and (len(cfg.domain_lo) != len(cfg.domain_hi) or not cfg.domain_lo):
        raise ConfigError("box domain needs domain.lo and domain.hi of equal length")
    if cfg.domain == "polygon" and len(cfg.domain_vertices) < 3:
        raise ConfigError("polygon domain needs at least three vertices")
    if cfg.kernel == "custom-table" and not cfg.kernel_file:
        raise ConfigError("custom-table kernel needs kernel.file")
    if cfg.constraint == "two-points" and len(cfg.constraint_points) != 2:
        raise ConfigError("two-points constraint needs exactly two points")
    if cfg.constraint == "explicit-file" and not cfg.constraint_file:
        raise ConfigError("explicit-file constraint needs constraint.file")
    if cfg.reference == "linear" and not cfg.reference_a:
        raise ConfigError("linear reference needs reference.a")
    if cfg.task == "ground-state":
        if cfg.constraint == "none":
            raise ConfigError("ground-state task needs a constraint")
        if not 1 <= cfg.p < float("inf"):
            raise ConfigError("p must lie in [1, inf)")
    elif cfg.task != "functional" and cfg.constraint == "none":
        raise ConfigError(f"task {cfg.task} needs a constraint")
    if cfg.labels == "reference" and cfg.constraint != "none" and cfg.task != "ground-state" \
            and cfg.reference == "none" and cfg.constraint != "explicit-file":
        raise ConfigError("labels = reference needs a reference function")
    if cfg.labels == "values" and not cfg.labels_values:
        raise ConfigError("labels = values needs labels.values")
    if cfg.tol <= 0 or cfg.max_sweeps < 1:
        raise ConfigError("tol must be positive and max_sweeps at least 1")
    if cfg.probe_h is not None and cfg.probe_h <= 0:
        raise ConfigError("probe_h must be positive")
    return cfg
