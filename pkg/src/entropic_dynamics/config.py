"""Scenario files.

A scenario is an INI file with a single ``[scenario]`` section::

    [scenario]
    particles = 1
    masses = 1.0
    xi = 0.125
    dt = 0.001
    grid = -20:20:512
    potential = harmonic{omega=1}
    initial = coherent{omega=1, shift=1}
    t_final = 2

Built-ins are written ``name{key=value, ...}`` and summed with ``+``;
vector values are written in parentheses, ``center=(0, 1)``.  Every error
names the offending line.
"""
from __future__ import annotations

import configparser
import hashlib
import re
from dataclasses import dataclass
from pathlib import Path

from . import potentials as P
from . import states as S
from .errors import ConfigError
from .space import GridSpec, Scenario

KEYS = ("particles", "masses", "eta", "xi", "dt", "dt_field", "grid", "potential", "vector_potential",
        "charges", "boundary", "t_final", "initial", "seed", "walkers", "stencil_order", "spatial_dim",
        "escape_cutoff", "name")

POTENTIALS = {
    "free": (P.Free, ()),
    "harmonic": (P.Harmonic, ("omega", "center")),
    "barrier": (P.Barrier, ("height", "width", "center")),
    "driven": (P.Driven, ("field", "freq")),
}
VECTOR_POTENTIALS = {
    "uniform": (P.UniformA, ("value",)),
    "uniform_B": (P.UniformB, ("strength",)),
    "ramp": (P.RampA, ("value", "rate")),
}
INITIAL_STATES = {
    "gaussian": (S.GaussianState, ("center", "sigma", "momentum")),
    "ground_state": (S.GroundState, ("omega", "center")),
    "coherent": (S.CoherentState, ("omega", "shift", "momentum")),
    "uniform": (S.UniformState, ("momentum",)),
    "excited": (S.ExcitedState, ("omega",)),
    "bimodal": (S.BimodalState, ("separation", "sigma", "center")),
}
TUPLE_FIELDS = {"center", "sigma", "momentum", "shift", "value"}
SCALAR_ONLY = {(P.Harmonic, "center"), (P.Barrier, "center"), (P.RampA, "value"), (S.GroundState, "center"),
               (S.BimodalState, "center"), (S.BimodalState, "sigma")}


@dataclass(frozen=True)
class LoadedScenario:
    scenario: Scenario
    path: str | None
    text: str

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()


def _split_top(text: str, sep: str) -> list[str]:
    out, depth, cur = [], 0, []
    for ch in text:
        if ch in "({":
            depth += 1
        elif ch in ")}":
            depth -= 1
        if ch == sep and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur))
    return out


def _number(text: str, where) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text.strip()!r}", *where) from None


def _value(text: str, where):
    text = text.strip()
    if text.startswith("(") and text.endswith(")"):
        items = [t for t in text[1:-1].split(",") if t.strip()]
        return tuple(_number(t, where) for t in items)
    return _number(text, where)


_TERM = re.compile(r"^\s*([A-Za-z_]\w*)\s*(?:\{(.*)\})?\s*$", re.S)


def parse_builtin(text: str, table: dict, kind: str, where=(None, None)) -> list:
    """Parse ``name{k=v,...} + ...`` into a list of constructed objects."""
    out = []
    for term in _split_top(text, "+"):
        m = _TERM.match(term)
        if not m:
            raise ConfigError(f"cannot parse {kind} term {term.strip()!r}", *where)
        name, body = m.group(1), m.group(2)
        if name not in table:
            raise ConfigError(f"unknown {kind} {name!r}; choose from {', '.join(sorted(table))}", *where)
        cls, allowed = table[name]
        kwargs = {}
        if body and body.strip():
            for item in _split_top(body, ","):
                if not item.strip():
                    continue
                if "=" not in item:
                    raise ConfigError(f"{kind} parameter {item.strip()!r} needs the form key=value", *where)
                key, val = (s.strip() for s in item.split("=", 1))
                if key not in allowed:
                    raise ConfigError(f"{kind} {name!r} has no parameter {key!r}; "
                                      f"allowed: {', '.join(allowed) or 'none'}", *where)
                v = _value(val, where)
                if key in TUPLE_FIELDS and (cls, key) not in SCALAR_ONLY and not isinstance(v, tuple):
                    v = (v,)
                if (cls, key) in SCALAR_ONLY and isinstance(v, tuple):
                    raise ConfigError(f"{kind} parameter {key!r} takes a single number", *where)
                kwargs[key] = v
        try:
            out.append(cls(**kwargs))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid {kind} {name!r}: {exc}", *where) from None
    return out


def parse_potential(text: str, where=(None, None)):
    terms = parse_builtin(text, POTENTIALS, "potential", where)
    return terms[0] if len(terms) == 1 else P.SumPotential(tuple(terms))


def parse_vector_potential(text: str, where=(None, None)):
    if text.strip().lower() in ("", "none"):
        return None
    terms = parse_builtin(text, VECTOR_POTENTIALS, "vector potential", where)
    return terms[0] if len(terms) == 1 else P.SumVectorPotential(tuple(terms))


def parse_initial(text: str, where=(None, None)):
    terms = parse_builtin(text, INITIAL_STATES, "initial state", where)
    if len(terms) != 1:
        raise ConfigError("initial state must be a single built-in", *where)
    return terms[0]


def parse_grid(text: str, ndim: int | None = None, where=(None, None)) -> GridSpec:
    """``lo:hi:n`` per axis, separated by spaces or commas."""
    specs = [s for s in re.split(r"[\s,]+", text.strip()) if s]
    if not specs:
        raise ConfigError("grid is empty", *where)
    lo, hi, n = [], [], []
    for spec in specs:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid axis {spec!r} must have the form lower:upper:points", *where)
        lo.append(_number(parts[0], where))
        hi.append(_number(parts[1], where))
        try:
            n.append(int(parts[2]))
        except ValueError:
            raise ConfigError(f"grid points {parts[2]!r} must be an integer", *where) from None
    if ndim is not None and len(specs) == 1 and ndim > 1:
        lo, hi, n = lo * ndim, hi * ndim, n * ndim
    try:
        return GridSpec(tuple(lo), tuple(hi), tuple(n))
    except ConfigError as exc:
        raise ConfigError(exc.message, *where) from None


def _key_lines(text: str) -> dict[str, int]:
    lines = {}
    for i, line in enumerate(text.splitlines(), start=1):
        m = re.match(r"^\s*([A-Za-z_]\w*)\s*[=:]", line)
        if m and m.group(1).lower() not in lines:
            lines[m.group(1).lower()] = i
    return lines


def parse_scenario(text: str, path: str | None = None, overrides: dict | None = None) -> LoadedScenario:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str.lower
    try:
        parser.read_string(text, source=path or "<string>")
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        if line is None and getattr(exc, "errors", None):
            line = exc.errors[0][0]
        raise ConfigError(f"malformed scenario file: {exc.message.splitlines()[0]}", line, path) from None
    if not parser.has_section("scenario"):
        raise ConfigError("missing [scenario] section", 1, path)
    extra = [s for s in parser.sections() if s != "scenario"]
    lines = _key_lines(text)
    if extra:
        raise ConfigError(f"unknown section [{extra[0]}]", _section_line(text, extra[0]), path)
    raw = dict(parser.items("scenario"))
    for key in raw:
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", lines.get(key), path)
    if overrides:
        raw.update({k: str(v) for k, v in overrides.items() if v is not None})

    def where(key):
        return (lines.get(key), path)

    def num(key, default, cast=float):
        if key not in raw:
            return default
        try:
            return cast(raw[key])
        except ValueError:
            raise ConfigError(f"{key} must be {'an integer' if cast is int else 'a number'}, got {raw[key]!r}",
                              *where(key)) from None

    def positive(key, value):
        if value is not None and not value > 0:
            raise ConfigError(f"{key} must be positive, got {value}", *where(key))
        return value

    particles = num("particles", 1, int)
    if particles < 1:
        raise ConfigError("particles must be a positive integer", *where("particles"))
    spatial_dim = num("spatial_dim", None, int)
    masses = tuple(_number(m, where("masses")) for m in re.split(r"[\s,]+", raw.get("masses", "1").strip()) if m)
    if len(masses) == 1 and particles > 1:
        masses = masses * particles
    if len(masses) != particles:
        raise ConfigError(f"expected {particles} masses, got {len(masses)}", *where("masses"))
    for m in masses:
        positive("masses", m)
    charges = None
    if "charges" in raw:
        charges = tuple(_number(c, where("charges")) for c in re.split(r"[\s,]+", raw["charges"].strip()) if c)
        if len(charges) == 1 and particles > 1:
            charges = charges * particles
        if len(charges) != particles:
            raise ConfigError(f"expected {particles} charges, got {len(charges)}", *where("charges"))
    grid = None
    if "grid" in raw:
        grid = parse_grid(raw["grid"], None, where("grid"))
        if spatial_dim is None:
            if grid.ndim % particles:
                raise ConfigError(f"grid has {grid.ndim} axes, not a multiple of {particles} particles",
                                  *where("grid"))
            spatial_dim = grid.ndim // particles
        elif grid.ndim == 1 and particles * spatial_dim > 1:
            grid = parse_grid(raw["grid"], particles * spatial_dim, where("grid"))
    spatial_dim = spatial_dim or 1
    dt = positive("dt", num("dt", 1e-3))
    kwargs = dict(
        masses=masses, n_particles=particles, spatial_dim=spatial_dim,
        eta=positive("eta", num("eta", 1.0)), xi=num("xi", 0.125), dt=dt,
        dt_field=positive("dt_field", num("dt_field", None)), grid=grid,
        charges=charges, boundary=raw.get("boundary", "periodic").strip(),
        t_final=num("t_final", 1.0), seed=num("seed", 0, int), walkers=positive("walkers", num("walkers", 10000, int)),
        stencil_order=num("stencil_order", 8, int), escape_cutoff=num("escape_cutoff", None),
        name=raw.get("name", Path(path).stem if path else "scenario").strip(),
    )
    if kwargs["xi"] < 0:
        raise ConfigError("xi must be non-negative", *where("xi"))
    if kwargs["t_final"] < 0:
        raise ConfigError("t_final must be non-negative", *where("t_final"))
    if kwargs["seed"] < 0:
        raise ConfigError("seed must be non-negative", *where("seed"))
    if "potential" in raw:
        kwargs["potential"] = parse_potential(raw["potential"], where("potential"))
    if "vector_potential" in raw:
        kwargs["vector_potential"] = parse_vector_potential(raw["vector_potential"], where("vector_potential"))
    if "initial" in raw:
        kwargs["initial"] = parse_initial(raw["initial"], where("initial"))
    if kwargs["boundary"] not in ("periodic", "reflecting", "open"):
        raise ConfigError(f"boundary must be periodic, reflecting or open, got {kwargs['boundary']!r}",
                          *where("boundary"))
    try:
        scenario = Scenario(**kwargs)
    except ConfigError as exc:
        key = next((k for k in KEYS if exc.message.startswith(k) or f" {k}" in exc.message), None)
        raise ConfigError(exc.message, lines.get(key) if key else None, path) from None
    return LoadedScenario(scenario, path, text)


def _section_line(text: str, name: str) -> int | None:
    for i, line in enumerate(text.splitlines(), start=1):
        if line.strip() == f"[{name}]":
            return i
    return None


def load_scenario(path, overrides: dict | None = None) -> LoadedScenario:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file: {exc.strerror}", None, str(p)) from None
    return parse_scenario(text, str(p), overrides)
