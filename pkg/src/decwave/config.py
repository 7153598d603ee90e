"""Simulation configuration files.

INI-style ``key = value`` lines grouped under ``[section]`` headers::

    [mesh]
    generator = icosphere        ; tetrahedron | icosphere | flat_grid
    radius = 1.0
    subdivisions = 3
    ; or: path = bunny.off  (format = OFF | OBJ, default from suffix)

    [model]
    type = wave                  ; wave | heat | laplace | poisson
    c = 1.0                      ; wave speed or diffusivity
    dt = auto                    ; seconds, or auto (0.9 x stability bound)
    steps = 1000
    snapshot_every = 10
    constraints = 0:5.0, 7:1.0   ; vertex:value pairs (heat, laplace, poisson)
    rhs = zero                   ; poisson: zero | constant:<k> | vertex:value pairs

    [source]
    kind = gaussian_pulse        ; gaussian_pulse | sine | constant | none
    vertex = 0
    amplitude = 1.0
    t0 = 0.3
    width = 0.1
    frequency = 1.0
    injection = hard             ; hard | additive

    [initial]
    kind = zero                  ; zero | constant | gaussian_bump | random
    value = 0.0                  ; constant
    vertex = 0                   ; gaussian_bump centre
    amplitude = 1.0              ; gaussian_bump peak, random half-range
    width = 0.2                  ; gaussian_bump spatial width (length units)

    [output]
    dir = output
    format = vtk                 ; vtk | csv

Only ``[mesh]`` (with a generator or a path) and ``[model] type`` are
required; everything else has the defaults shown above.
"""

from __future__ import annotations

import configparser
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ConfigWarning, UnsupportedModelError
from .mesh import SurfaceMesh, generate_flat_grid, generate_icosphere, generate_tetrahedron, load_mesh
from .solvers import DirichletCondition, SourceSignal

MODELS = ("wave", "heat", "laplace", "poisson")
UNSUPPORTED_MODELS = ("nonlinear", "dispersive")

GENERATOR_KEYS = {
    "tetrahedron": {"edge_length": 1.0},
    "icosphere": {"radius": 1.0, "subdivisions": 3},
    "flat_grid": {"nx": 17, "ny": 17, "spacing": 1.0},
}

SECTION_KEYS = {
    "mesh": {"generator", "path", "format", "edge_length", "radius", "subdivisions", "nx", "ny", "spacing"},
    "model": {"type", "c", "dt", "steps", "snapshot_every", "constraints", "rhs"},
    "source": {"kind", "vertex", "amplitude", "t0", "width", "frequency", "injection"},
    "initial": {"kind", "value", "vertex", "amplitude", "width"},
    "output": {"dir", "format"},
}


@dataclass(frozen=True)
class MeshSpec:
    generator: str | None = None
    path: Path | None = None
    format: str | None = None
    params: dict = field(default_factory=dict)

    def build(self) -> SurfaceMesh:
        if self.path is not None:
            return load_mesh(self.path, self.format)
        if self.generator == "tetrahedron":
            return generate_tetrahedron(**self.params)
        if self.generator == "icosphere":
            return generate_icosphere(**self.params)
        return generate_flat_grid(**self.params)


@dataclass(frozen=True)
class InitialCondition:
    kind: str = "zero"
    value: float = 0.0
    vertex: int = 0
    amplitude: float = 1.0
    width: float = 0.2

    def field(self, mesh: SurfaceMesh, rng: np.random.Generator) -> np.ndarray:
        n = mesh.n_vertices
        if self.kind == "zero":
            return np.zeros(n)
        if self.kind == "constant":
            return np.full(n, self.value)
        if self.kind == "random":
            return rng.uniform(-self.amplitude, self.amplitude, n)
        if self.vertex >= n:
            raise ConfigError(f"initial bump vertex {self.vertex} out of range for {n} vertices")
        d2 = np.sum((mesh.vertices - mesh.vertices[self.vertex]) ** 2, axis=1)
        return self.amplitude * np.exp(-d2 / (2.0 * self.width**2))


@dataclass(frozen=True)
class SimulationConfig:
    mesh: MeshSpec
    model: str
    c: float = 1.0
    dt: float | str = "auto"
    steps: int = 1000
    snapshot_every: int = 10
    source: SourceSignal = field(default_factory=SourceSignal)
    initial: InitialCondition = field(default_factory=InitialCondition)
    constraints: DirichletCondition = field(default_factory=DirichletCondition)
    rhs: str = "zero"
    output_dir: Path = Path("output")
    output_format: str = "vtk"

    def rhs_field(self, n_vertices: int) -> np.ndarray:
        spec = self.rhs.strip()
        if spec == "zero":
            return np.zeros(n_vertices)
        if spec.startswith("constant:"):
            return np.full(n_vertices, float(spec.split(":", 1)[1]))
        out = np.zeros(n_vertices)
        for v, x in _parse_pairs(spec, "rhs"):
            if v >= n_vertices:
                raise ConfigError(f"rhs vertex {v} out of range")
            out[v] = x
        return out


def _parse_pairs(text, key):
    pairs = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        try:
            v, x = item.split(":")
            pairs.append((int(v), float(x)))
        except ValueError:
            raise ConfigError(f"{key}: expected 'vertex:value' pairs, got {item!r}") from None
    return pairs


class _Section:
    """Typed access to one section, remembering which keys were consumed."""

    def __init__(self, parser, name):
        self.name = name
        self.items = dict(parser.items(name)) if parser.has_section(name) else {}

    def __contains__(self, key):
        return key in self.items

    def _raw(self, key):
        return self.items[key].strip()

    def get(self, key, default=None):
        return self._raw(key) if key in self else default

    def number(self, key, default, kind=float, positive=False, minimum=None):
        if key not in self:
            return default
        raw = self._raw(key)
        try:
            value = kind(raw)
        except ValueError:
            raise ConfigError(f"[{self.name}] {key}: expected {kind.__name__}, got {raw!r}") from None
        if kind is float and not math.isfinite(value):
            raise ConfigError(f"[{self.name}] {key} must be finite")
        if positive and not value > 0:
            raise ConfigError(f"[{self.name}] {key} must be positive, got {raw}")
        if minimum is not None and value < minimum:
            raise ConfigError(f"[{self.name}] {key} must be >= {minimum}, got {raw}")
        return value

    def choice(self, key, default, options):
        value = self.get(key, default)
        if value not in options:
            raise ConfigError(f"[{self.name}] {key}: {value!r} is not one of {', '.join(options)}")
        return value


def _read(text: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=(";", "#"), strict=True
    )
    try:
        parser.read_string(text)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"contradictory settings: [{exc.section}] {exc.option} given more than once") from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"section [{exc.section}] appears more than once") from None
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    for section in parser.sections():
        if section not in SECTION_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        unknown = set(parser.options(section)) - SECTION_KEYS[section]
        if unknown:
            raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
    return parser


def _mesh_spec(sec: _Section, base_dir: Path) -> MeshSpec:
    if not sec.items:
        raise ConfigError("missing required section [mesh]")
    if "path" in sec and "generator" in sec:
        raise ConfigError("[mesh] path and generator are mutually exclusive")
    if "path" in sec:
        extra = set(sec.items) - {"path", "format"}
        if extra:
            raise ConfigError(f"[mesh] generator parameters given with a mesh file: {', '.join(sorted(extra))}")
        path = Path(sec.get("path"))
        if not path.is_absolute():
            path = base_dir / path
        fmt = sec.get("format")
        if fmt is not None and fmt.upper() not in ("OFF", "OBJ"):
            raise ConfigError(f"[mesh] format must be OFF or OBJ, got {fmt!r}")
        return MeshSpec(path=path, format=fmt)
    if "generator" not in sec:
        raise ConfigError("[mesh] needs either 'generator' or 'path'")
    gen = sec.choice("generator", None, tuple(GENERATOR_KEYS))
    if "format" in sec:
        raise ConfigError("[mesh] format only applies to mesh files")
    allowed = GENERATOR_KEYS[gen]
    extra = set(sec.items) - {"generator"} - set(allowed)
    if extra:
        raise ConfigError(f"[mesh] key(s) not used by generator {gen}: {', '.join(sorted(extra))}")
    params = {}
    for key, default in allowed.items():
        if key in ("subdivisions",):
            params[key] = sec.number(key, default, int, minimum=0)
        elif key in ("nx", "ny"):
            params[key] = sec.number(key, default, int, minimum=2)
        else:
            params[key] = sec.number(key, default, float, positive=True)
    return MeshSpec(generator=gen, params=params)


def parse_config_text(text: str, base_dir=".") -> SimulationConfig:
    parser = _read(text)
    base_dir = Path(base_dir)
    mesh = _mesh_spec(_Section(parser, "mesh"), base_dir)

    sec = _Section(parser, "model")
    if "type" not in sec:
        raise ConfigError("missing required key [model] type")
    model = sec.get("type")
    if model in UNSUPPORTED_MODELS:
        raise UnsupportedModelError(f"unsupported model {model!r}: only the constant-speed equations are implemented")
    model = sec.choice("type", None, MODELS)
    c = sec.number("c", 1.0, positive=True)
    dt = sec.get("dt", "auto")
    if dt != "auto":
        dt = sec.number("dt", None, positive=True)
    steps = sec.number("steps", 1000, int, minimum=1)
    snapshot_every = sec.number("snapshot_every", 10, int, minimum=1)
    try:
        constraints = DirichletCondition(_parse_pairs(sec.get("constraints", ""), "constraints"))
    except ValueError as exc:
        raise ConfigError(f"[model] constraints: {exc}") from None
    rhs = sec.get("rhs", "zero")
    if rhs != "zero" and not rhs.startswith("constant:"):
        _parse_pairs(rhs, "rhs")
    if constraints and model == "wave":
        warnings.warn("constraints are ignored for the wave model", ConfigWarning, stacklevel=2)
    if "rhs" in sec and model != "poisson":
        warnings.warn(f"rhs is ignored for the {model} model", ConfigWarning, stacklevel=2)

    src = _Section(parser, "source")
    try:
        source = SourceSignal(
            kind=src.choice("kind", "none", ("gaussian_pulse", "sine", "constant", "none")),
            vertex=src.number("vertex", 0, int, minimum=0),
            amplitude=src.number("amplitude", 1.0),
            center_time=src.number("t0", 0.3),
            width=src.number("width", 0.1, positive=True),
            frequency=src.number("frequency", 1.0, positive=True),
            injection=src.choice("injection", "hard", ("hard", "additive")),
        )
    except ValueError as exc:
        raise ConfigError(f"[source] {exc}") from None
    if source.kind != "none" and model in ("laplace", "poisson"):
        warnings.warn(f"source is ignored for the {model} model", ConfigWarning, stacklevel=2)

    ini = _Section(parser, "initial")
    initial = InitialCondition(
        kind=ini.choice("kind", "zero", ("zero", "constant", "gaussian_bump", "random")),
        value=ini.number("value", 0.0),
        vertex=ini.number("vertex", 0, int, minimum=0),
        amplitude=ini.number("amplitude", 1.0),
        width=ini.number("width", 0.2, positive=True),
    )

    out = _Section(parser, "output")
    output_dir = Path(out.get("dir", "output"))
    if not output_dir.is_absolute():
        output_dir = base_dir / output_dir

    return SimulationConfig(
        mesh=mesh,
        model=model,
        c=c,
        dt=dt,
        steps=steps,
        snapshot_every=snapshot_every,
        source=source,
        initial=initial,
        constraints=constraints,
        rhs=rhs,
        output_dir=output_dir,
        output_format=out.choice("format", "vtk", ("vtk", "csv")),
    )


def parse_config(path) -> SimulationConfig:
    """Read a config file; relative paths inside it resolve against its directory."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, base_dir=path.parent)
