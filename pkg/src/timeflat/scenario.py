"""
Scenario files: flat ``key = value`` text with dotted sections.

    # comment
    name = schwarzschild_sphere
    backend.kind = schwarzschild       # minkowski | schwarzschild | schwarzschild-polar | flrw
    backend.mass = 1.0
    embedding.family = round           # round | graph | radial | flrw-comoving
    embedding.radius = 4
    grid = 32x64
    beta = const:0
    flow.dlambda = 0.01
    outputs = mass, variation

Unknown keys, malformed values and unknown families are rejected with the
line and column of the offending text before any computation starts.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

import numpy as np

from .curves import CURVES, named_curve
from .embedding import FAMILIES, EmbeddingSpec, parse_profile
from .errors import ConfigurationError, ScenarioError, TimeflatError
from .hawking import parse_beta
from .slices import SymTensorField, make_slice
from .spacetimes import make_backend
from .sphere import build_grid

__all__ = ["Scenario", "parse_scenario", "load_scenario", "parse_grid", "OUTPUTS"]

OUTPUTS = ("mass", "variation", "flow", "minimize-frame", "timeflat", "verify-identities", "curve")
BACKENDS = ("minkowski", "schwarzschild", "schwarzschild-polar", "flrw")
SLICES = ("minkowski", "schwarzschild", "flrw", "graph")
FD_FAMILIES = ("line", "flow")

_LINE = re.compile(r"^(\s*)([A-Za-z_][\w.\-]*)(\s*)=(\s*)(.*?)\s*$")


def parse_grid(text):
    m = re.fullmatch(r"\s*(\d+)\s*[xX]\s*(\d+)\s*", str(text))
    if not m:
        raise ValueError(f"grid must look like 32x64, got {text!r}")
    return int(m.group(1)), int(m.group(2))


def _floats(n):
    def conv(text):
        vals = [float(v) for v in re.split(r"[,\s]+", text.strip()) if v]
        if len(vals) != n:
            raise ValueError(f"expected {n} numbers, got {len(vals)}")
        return tuple(vals)

    return conv


def _choice(options):
    def conv(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text

    return conv


def _outputs(text):
    items = tuple(s.strip() for s in text.split(",") if s.strip())
    for item in items:
        if item not in OUTPUTS:
            raise ValueError(f"unknown output {item!r}")
    return items


def _beta(text):
    parse_beta(text)
    return text


def _profile(text):
    parse_profile(text)
    return text


def _positive_int(text):
    v = int(text)
    if v <= 0:
        raise ValueError("must be a positive integer")
    return v


SCHEMA = {
    "name": str,
    "seed": int,
    "grid": parse_grid,
    "beta": _beta,
    "outputs": _outputs,
    "backend.kind": _choice(BACKENDS),
    "backend.mass": float,
    "backend.q": float,
    "backend.mode": _choice(("analytic", "fd")),
    "embedding.family": _choice(FAMILIES),
    "embedding.radius": float,
    "embedding.time": float,
    "embedding.amplitude": float,
    "embedding.profile": _profile,
    "flow.dlambda": float,
    "flow.steps": _positive_int,
    "flow.fd_step": float,
    "flow.fd_family": _choice(FD_FAMILIES),
    "slice.kind": _choice(SLICES),
    "slice.mass": float,
    "slice.time": float,
    "slice.q": float,
    "slice.Q": _floats(9),
    "slice.b": _floats(3),
    "slice.p": str,
    "slice.samples": _positive_int,
    "curve.name": _choice(tuple(CURVES)),
    "curve.samples": _positive_int,
}
# curve.<param> accepts any float parameter of the named curve factory
_CURVE_PARAM = re.compile(r"^curve\.[a-z]\w*$")


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    seed: int = 0
    grid: tuple = (32, 64)
    beta: str = "const:0"
    outputs: tuple = ()
    backend: dict = field(default_factory=lambda: {"kind": "minkowski"})
    embedding: dict = field(default_factory=dict)
    flow: dict = field(default_factory=dict)
    slice: dict = field(default_factory=dict)
    curve: dict = field(default_factory=dict)
    source: str | None = None

    # -- builders ------------------------------------------------------------
    @property
    def dlambda(self):
        return float(self.flow.get("dlambda", 1e-2))

    @property
    def steps(self):
        return int(self.flow.get("steps", 100))

    @property
    def fd_step(self):
        return float(self.flow.get("fd_step", 1e-3))

    @property
    def fd_family(self):
        return self.flow.get("fd_family", "line")

    def make_backend(self):
        b = dict(self.backend)
        kind = b.pop("kind", "minkowski")
        mode = b.pop("mode", "analytic")
        return make_backend(kind, mode=mode, **b)

    def make_spec(self):
        return EmbeddingSpec(**self.embedding)

    def make_grid(self):
        return build_grid(*self.grid)

    def make_surface(self, **kw):
        from .embedding import evaluate_surface

        return evaluate_surface(self.make_spec(), self.make_grid(), self.make_backend(), **kw)

    def make_slice(self):
        s = dict(self.slice)
        kind = s.pop("kind", "minkowski")
        if "Q" in s:
            s["Q"] = np.reshape(s["Q"], (3, 3))
        s.pop("p", None)
        s.pop("samples", None)
        return make_slice(kind, **s)

    def make_p_field(self, sl):
        text = self.slice.get("p", "momentum")
        head, _, body = text.partition(":")
        vals = [float(v) for v in body.split(",") if v.strip()]
        if head == "momentum":
            return SymTensorField.momentum_of(sl)
        if head == "constant" and len(vals) == 3:
            return SymTensorField.constant(np.diag(vals))
        if head == "radial" and len(vals) == 2:
            return SymTensorField.radial(*vals)
        raise ConfigurationError(f"slice.p must be momentum, constant:a,b,c or radial:c1,c2; got {text!r}")

    def make_curve(self):
        c = dict(self.curve)
        name = c.pop("name", "circle")
        if "samples" in c:
            c["n"] = c.pop("samples")
        if "n" in c:
            c["n"] = int(c["n"])
        return named_curve(name, **c)

    def with_overrides(self, grid=None, seed=None, beta=None, steps=None, dlambda=None, fd_step=None):
        flow = dict(self.flow)
        if steps is not None:
            flow["steps"] = int(steps)
        if dlambda is not None:
            flow["dlambda"] = float(dlambda)
        if fd_step is not None:
            flow["fd_step"] = float(fd_step)
        out = replace(
            self,
            grid=parse_grid(grid) if isinstance(grid, str) else (tuple(grid) if grid else self.grid),
            seed=self.seed if seed is None else int(seed),
            beta=self.beta if beta is None else beta,
            flow=flow,
        )
        out.validate()
        return out

    def validate(self):
        """Build every referenced object once so that errors surface before any work."""
        try:
            self.make_grid()
            if self.backend:
                self.make_backend()
            if self.embedding:
                self.make_spec()
            parse_beta(self.beta)
            if self.slice:
                self.make_p_field(self.make_slice())
            if self.curve:
                self.make_curve()
        except ScenarioError:
            raise
        except (TimeflatError, ValueError, TypeError) as exc:
            raise ScenarioError(f"invalid scenario {self.name!r}: {exc}") from exc
        return self

    def echo(self):
        return {
            "name": self.name,
            "seed": self.seed,
            "grid": list(self.grid),
            "beta": self.beta,
            "outputs": list(self.outputs),
            "backend": dict(self.backend),
            "embedding": dict(self.embedding),
            "flow": {"dlambda": self.dlambda, "steps": self.steps, "fd_step": self.fd_step,
                     "fd_family": self.fd_family},
            "slice": {k: list(v) if isinstance(v, tuple) else v for k, v in self.slice.items()},
            "curve": dict(self.curve),
            "source": self.source,
        }


def parse_scenario(text, source=None):
    sections = {"backend": {}, "embedding": {}, "flow": {}, "slice": {}, "curve": {}}
    top = {}
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        m = _LINE.match(line)
        if not m:
            col = len(line) - len(line.lstrip()) + 1
            raise ScenarioError("expected 'key = value'", line=lineno, column=col)
        key = m.group(2)
        key_col = len(m.group(1)) + 1
        val_col = m.end(4) + 1
        value = m.group(5)
        if key in seen:
            raise ScenarioError(f"duplicate key (first set on line {seen[key]})", line=lineno, column=key_col,
                                field=key)
        seen[key] = lineno
        if key in SCHEMA:
            conv = SCHEMA[key]
        elif _CURVE_PARAM.match(key):
            conv = float
        else:
            raise ScenarioError("unknown key", line=lineno, column=key_col, field=key)
        if value == "":
            raise ScenarioError("missing value", line=lineno, column=val_col, field=key)
        try:
            parsed = conv(value)
        except (ValueError, TimeflatError) as exc:
            raise ScenarioError(f"bad value {value!r}: {exc}", line=lineno, column=val_col, field=key) from None
        section, _, sub = key.partition(".")
        if sub:
            sections[section][sub] = parsed
        else:
            top[key] = parsed
    scn = Scenario(
        name=top.get("name", "scenario"),
        seed=top.get("seed", 0),
        grid=top.get("grid", (32, 64)),
        beta=top.get("beta", "const:0"),
        outputs=top.get("outputs", ()),
        backend=sections["backend"] or {"kind": "minkowski"},
        embedding=sections["embedding"],
        flow=sections["flow"],
        slice=sections["slice"],
        curve=sections["curve"],
        source=source,
    )
    return scn.validate()


def load_scenario(path):
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read(), source=str(path))
