"""Run configuration: flat ``key = value`` text with dotted keys.

Grammar::

    line    := blank | comment | entry
    comment := '#' anything
    entry   := key '=' value [comment]
    key     := name ('.' name)*
    value   := number | complex | word | list

Lists are comma separated.  Complex numbers use Python syntax (``1+1j``).  Every key
has a documented type and range; unknown keys, malformed values and out-of-range
values raise ConfigurationError naming the key.
"""
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

SUITES = ("geometry", "norms", "traces", "extension", "calderon", "maxwell", "scattering", "sweep")
DOMAINS = ("wedge", "cube", "slab", "sphere", "mesh")


def _in(lo, hi, lo_open=False, hi_open=False):
    def check(v):
        ok_lo = v > lo if lo_open else v >= lo
        ok_hi = v < hi if hi_open else v <= hi
        return ok_lo and ok_hi
    lb = "(" if lo_open else "["
    rb = ")" if hi_open else "]"
    return check, f"{lb}{lo:g}, {hi:g}{rb}"


def _choice(options):
    return (lambda v: v in options), "one of " + ", ".join(options)


def _even(v):
    return v >= 2 and v % 2 == 0


@dataclass(frozen=True)
class Key:
    kind: str          # int, float, complex, str, floats, words, vector, path
    default: object
    check: tuple = None
    doc: str = ""


ALPHA_RANGE = _in(0.0, np.pi, lo_open=True)

KEYS = {
    "suites": Key("words", ("geometry", "norms", "traces", "extension", "calderon", "sweep"),
                  _choice(SUITES), "suites to run; executed in dependency order"),
    "seed": Key("int", 0, _in(0, 2 ** 32 - 1), "master seed for random test fields"),
    "samples": Key("int", 20, _in(1, 10000), "random fields per suite"),
    "output.dir": Key("str", "out", None, "report directory (overridden by --out)"),
    "domain.kind": Key("str", "wedge", _choice(DOMAINS), "test domain for the trace suites"),
    "domain.alpha": Key("float", np.pi / 2, ALPHA_RANGE, "wedge opening angle"),
    "domain.n": Key("int", 4, _in(1, 32), "mesh resolution (cells per unit length)"),
    "domain.h": Key("float", 0.1, _in(0.0, 1.0, lo_open=True), "slab vertical step"),
    "domain.depth": Key("float", 5.0, _in(0.0, 100.0, lo_open=True), "slab depth"),
    "mesh.path": Key("path", None, None, "mesh file for domain.kind = mesh"),
    "material.epsilon": Key("complex", 1 + 1j, None, "relative permittivity (scalar)"),
    "material.mu": Key("complex", 1 + 1j, None, "relative permeability (scalar)"),
    "material.k0": Key("float", 1.0, _in(0.0, 100.0, lo_open=True), "free-space wavenumber"),
    "incident.kind": Key("str", "plane", _choice(("none", "plane", "multipole")), "incident field"),
    "incident.direction": Key("vector", (0.0, 0.0, 1.0), None, "plane-wave direction"),
    "incident.polarization": Key("vector", (1.0, 0.0, 0.0), None, "plane-wave polarization"),
    "incident.amplitude": Key("complex", 1.0, None, "incident amplitude"),
    "incident.l": Key("int", 1, _in(1, 60), "multipole degree"),
    "incident.m": Key("int", 0, _in(-60, 60), "multipole order"),
    "incident.type": Key("str", "M", _choice(("M", "N")), "multipole type"),
    "calderon.L": Key("int", 10, _in(1, 60), "multipole truncation degree"),
    "calderon.k0R": Key("floats", (0.5, 1.0, 2.0), _in(0.0, 50.0, lo_open=True), "k0 R values"),
    "maxwell.mesh_n": Key("int", 6, (_even, "an even integer >= 2"), "ball mesh resolution"),
    "solver.method": Key("str", "direct", _choice(("direct", "gmres")), "linear solver"),
    "solver.tol": Key("float", 1e-10, _in(0.0, 1e-4, lo_open=True), "residual tolerance"),
    "quad.volume_order": Key("int", 4, _in(1, 6), "volume quadrature degree"),
    "quad.surface_order": Key("int", 3, _in(1, 5), "surface quadrature degree"),
    "gagliardo.levels": Key("int", 1, _in(0, 4), "subdivision levels for near panel pairs"),
    "eta.grid_n": Key("int", 24, _in(4, 128), "Fourier grid of the chart liftings"),
    "eta.box": Key("float", 1.0, _in(0.0, 100.0, lo_open=True), "period of the eta test data"),
    "observe.points": Key("int", 40, _in(1, 10000), "exterior points for the residual checks"),
    "observe.radius": Key("float", 2.0, _in(1.0, 100.0, lo_open=True), "exterior sample radius"),
    "observe.region_level": Key("int", 1, _in(0, 3), "refinement of the exterior shell mesh"),
    "sweep.alphas": Key("floats", tuple(np.round(np.arange(0.4, 2.81, 0.4), 10)), ALPHA_RANGE,
                        "wedge angles of the constant-vs-angle sweep"),
}


def _parse_scalar(kind, text, key):
    try:
        if kind == "int":
            f = float(text)
            if f != int(f):
                raise ValueError
            return int(f)
        if kind == "float":
            v = float(text)
        elif kind == "complex":
            v = complex(text.replace(" ", ""))
        else:
            return text
    except ValueError:
        raise ConfigurationError(f"{key}: cannot parse '{text}' as {kind}") from None
    if not np.isfinite(v):
        raise ConfigurationError(f"{key}: value must be finite")
    return v


def _parse(key, kdef, text):
    if kdef.kind in ("floats", "words", "vector"):
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if not parts:
            raise ConfigurationError(f"{key}: empty list")
        inner = "str" if kdef.kind == "words" else "float"
        val = tuple(_parse_scalar(inner, p, key) for p in parts)
        if kdef.kind == "vector" and len(val) != 3:
            raise ConfigurationError(f"{key}: expected 3 components, got {len(val)}")
        return val
    if kdef.kind == "path":
        return text
    return _parse_scalar(kdef.kind, text, key)


def _validate(key, kdef, val):
    if kdef.check is None or val is None:
        return
    fn, desc = kdef.check
    items = val if kdef.kind in ("floats", "words") else (val,)
    for v in items:
        if not fn(v):
            raise ConfigurationError(f"{key}: value {v!r} out of range, expected {desc}")


@dataclass(frozen=True)
class RunConfig:
    values: dict
    source: str = ""
    base_dir: Path = field(default_factory=Path.cwd)

    def __getitem__(self, key):
        return self.values[key]

    def with_overrides(self, **kw):
        vals = dict(self.values)
        for k, v in kw.items():
            k = k.replace("__", ".")
            if k not in KEYS:
                raise ConfigurationError(f"unknown key '{k}'")
            _validate(k, KEYS[k], v)
            vals[k] = v
        return RunConfig(vals, self.source, self.base_dir)

    @property
    def suites(self):
        chosen = set(self.values["suites"])
        return [s for s in SUITES if s in chosen]

    def canonical(self):
        """Sorted ``key = value`` text (stable across runs)."""
        def fmt(v):
            if isinstance(v, tuple):
                return ", ".join(fmt(x) for x in v)
            if isinstance(v, complex):
                return repr(v)
            return str(v)
        return "".join(f"{k} = {fmt(self.values[k])}\n" for k in sorted(self.values))


def parse_config(text, source="<string>", base_dir=None):
    vals = {k: kdef.default for k, kdef in KEYS.items()}
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{no}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in KEYS:
            raise ConfigurationError(f"{source}:{no}: unknown key '{key}'")
        if not value:
            raise ConfigurationError(f"{key}: missing value")
        kdef = KEYS[key]
        val = _parse(key, kdef, value)
        _validate(key, kdef, val)
        vals[key] = val
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    if vals["mesh.path"] is not None:
        p = Path(vals["mesh.path"])
        p = p if p.is_absolute() else base / p
        if not p.exists():
            raise ConfigurationError(f"mesh.path: file '{p}' does not exist")
        vals["mesh.path"] = str(p)
    if vals["domain.kind"] == "mesh" and vals["mesh.path"] is None:
        raise ConfigurationError("mesh.path: required when domain.kind = mesh")
    return RunConfig(vals, source, base)


def bundled_configs():
    root = resources.files("lipmax") / "data"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def load_config(path):
    """Load a config file, or a bundled config by name (e.g. ``wedge_suite``)."""
    p = Path(path)
    if p.is_file():
        return parse_config(p.read_text(), str(p), p.parent)
    name = p.name[:-4] if p.name.endswith(".cfg") else p.name
    if str(p) == p.name and name in bundled_configs():
        res = resources.files("lipmax") / "data" / f"{name}.cfg"
        with resources.as_file(res) as f:
            return parse_config(Path(f).read_text(), name, Path(f).parent)
    raise ConfigurationError(f"config file '{path}' not found")
