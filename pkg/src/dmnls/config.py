"""Run configuration: flat ``key = value`` text, validation and presets.

File format (UTF-8)::

    # comment
    dimension = 2
    amplitudes = 0.005, 0.0025, 0.00125
    mode = 3, 0

Unset dimension-dependent fields (``n``, ``box_length``, ``sigma``) resolve
to the desk defaults of the chosen dimension. Floats are written with
``repr`` so that parse(dump(cfg)) == cfg exactly.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields

from .nonlinearity import DEALIAS_POLICIES

__all__ = ["ConfigError", "RunConfig", "PRESETS", "parse_config", "load_config", "dump_config"]

INITIAL_KINDS = ("gaussian", "mode", "file")
SCAN_METHODS = ("auto", "grid", "boosted")
DESK_DEFAULTS = {1: (1024, 80.0 * math.pi), 2: (256, 40.0 * math.pi)}


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class RunConfig:
    dimension: int = 1
    n: int | None = None
    box_length: float | None = None
    d_av: float = 1.0
    sigma: float | None = None
    eps: float = 0.0
    dt: float = 1e-3
    t_final: float = 1.0
    snapshot_every: int = 1
    quad_nodes: int = 32
    dealias: str = "pad"
    map_strength: float = 1.0
    initial: str = "gaussian"
    width: float = 1.0
    amplitude: float = 0.1
    mode: tuple = ()
    initial_file: str = ""
    seed: int = 0
    threads: int = 1
    # scenario knobs
    amplitudes: tuple = ()
    eps_ladder: tuple = ()
    orig_substeps: int = 64
    scan_separations: tuple = (16, 32, 64, 128, 256, 512)
    scan_seeds: int = 32
    scan_nt: int = 128
    scan_method: str = "auto"
    strichartz_q: float = 6.0
    strichartz_r: float = 6.0
    strichartz_levels: tuple = (1, 2, 4, 8, 16)
    picard_tol: float = 1e-12
    picard_max_iter: int = 50
    vp_p: float = 2.0

    def resolved(self):
        """Copy with dimension-dependent defaults filled in."""
        if self.dimension not in DESK_DEFAULTS:
            raise ConfigError("dimension", f"must be 1 or 2, got {self.dimension}")
        n0, L0 = DESK_DEFAULTS[self.dimension]
        return dataclasses.replace(
            self,
            n=n0 if self.n is None else self.n,
            box_length=L0 if self.box_length is None else self.box_length,
            sigma=2.0 / self.dimension if self.sigma is None else self.sigma,
        )

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def validate(self, scenario=None):
        """Field-level checks; returns the resolved config."""
        c = self.resolved()
        if c.n < 16 or c.n & (c.n - 1):
            raise ConfigError("n", f"must be a power of two >= 16, got {c.n}")
        _positive(c, "box_length", "sigma", "dt", "t_final", "width")
        if c.eps < 0:
            raise ConfigError("eps", f"must be >= 0, got {c.eps}")
        if c.amplitude < 0:
            raise ConfigError("amplitude", f"must be >= 0, got {c.amplitude}")
        for name in ("snapshot_every", "threads", "scan_seeds", "picard_max_iter", "orig_substeps"):
            if getattr(c, name) < 1:
                raise ConfigError(name, f"must be >= 1, got {getattr(c, name)}")
        if c.quad_nodes < 2:
            raise ConfigError("quad_nodes", f"must be >= 2, got {c.quad_nodes}")
        if c.scan_nt < 16:
            raise ConfigError("scan_nt", f"need at least 16 time samples, got {c.scan_nt}")
        if c.dealias not in DEALIAS_POLICIES:
            raise ConfigError("dealias", f"must be one of {DEALIAS_POLICIES}, got {c.dealias!r}")
        if c.initial not in INITIAL_KINDS:
            raise ConfigError("initial", f"must be one of {INITIAL_KINDS}, got {c.initial!r}")
        if c.initial == "mode" and len(c.mode) != c.dimension:
            raise ConfigError("mode", f"needs {c.dimension} integer components, got {c.mode}")
        if c.initial == "file" and not c.initial_file:
            raise ConfigError("initial_file", "required when initial = file")
        if c.scan_method not in SCAN_METHODS:
            raise ConfigError("scan_method", f"must be one of {SCAN_METHODS}, got {c.scan_method!r}")
        if c.vp_p < 1:
            raise ConfigError("vp_p", f"p must be >= 1, got {c.vp_p}")
        if any(a < 0 for a in c.amplitudes):
            raise ConfigError("amplitudes", "amplitudes must be >= 0")
        if any(e <= 0 for e in c.eps_ladder):
            raise ConfigError("eps_ladder", "entries must be positive")
        if c.seed < 0 or c.seed >= 2 ** 64:
            raise ConfigError("seed", "must fit in an unsigned 64-bit integer")
        if scenario in ("scatter", "picard") and c.d_av == 0:
            raise ConfigError(
                "d_av", "must be nonzero: small-data scattering is only asserted for d_av != 0"
            )
        if scenario == "average-check" and len(c.eps_ladder) < 2:
            raise ConfigError("eps_ladder", "average-check needs at least two eps values")
        if scenario == "bilinear-scan" and len(c.scan_separations) < 4:
            raise ConfigError("scan_separations", "need at least 4 dyadic separations")
        return c


def _positive(c, *names):
    for name in names:
        v = getattr(c, name)
        if not v > 0:
            raise ConfigError(name, f"must be positive, got {v}")


# --- text format ---------------------------------------------------------------

_INT, _FLOAT, _STR = "int", "float", "str"
_TYPES = {
    "dimension": _INT, "n": _INT, "box_length": _FLOAT, "d_av": _FLOAT,
    "sigma": _FLOAT, "eps": _FLOAT, "dt": _FLOAT, "t_final": _FLOAT,
    "snapshot_every": _INT, "quad_nodes": _INT, "dealias": _STR,
    "map_strength": _FLOAT, "initial": _STR, "width": _FLOAT, "amplitude": _FLOAT,
    "mode": (_INT,), "initial_file": _STR, "seed": _INT, "threads": _INT,
    "amplitudes": (_FLOAT,), "eps_ladder": (_FLOAT,), "orig_substeps": _INT,
    "scan_separations": (_INT,), "scan_seeds": _INT, "scan_nt": _INT,
    "scan_method": _STR, "strichartz_q": _FLOAT, "strichartz_r": _FLOAT,
    "strichartz_levels": (_INT,), "picard_tol": _FLOAT, "picard_max_iter": _INT,
    "vp_p": _FLOAT,
}
assert set(_TYPES) == {f.name for f in fields(RunConfig)}


def _parse_scalar(key, kind, text):
    try:
        if kind == _INT:
            return int(text)
        if kind == _FLOAT:
            return float(text)
    except ValueError:
        raise ConfigError(key, f"cannot parse {text!r} as {kind}") from None
    return text


def parse_value(key, text):
    if key not in _TYPES:
        raise ConfigError(key, "unknown key")
    kind = _TYPES[key]
    text = text.strip()
    if text.lower() == "none" and key in ("n", "box_length", "sigma"):
        return None
    if isinstance(kind, tuple):
        if not text:
            return ()
        return tuple(_parse_scalar(key, kind[0], p.strip()) for p in text.split(","))
    return _parse_scalar(key, kind, text)


def parse_config(text, base=None):
    """Apply the ``key = value`` lines of ``text`` on top of ``base``."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        values[key] = parse_value(key, val)
    return dataclasses.replace(base or RunConfig(), **values)


def load_config(path, base=None):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), base)


def _fmt(v):
    if v is None:
        return "none"
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(cfg):
    return "".join(f"{f.name} = {_fmt(getattr(cfg, f.name))}\n" for f in fields(cfg))


def apply_overrides(cfg, pairs):
    """``pairs`` like ``["dt=0.5", "mode=1,0"]`` (command-line ``--set``)."""
    values = {}
    for item in pairs:
        if "=" not in item:
            raise ConfigError(item, "override must look like key=value")
        key, val = item.split("=", 1)
        values[key.strip()] = parse_value(key.strip(), val)
    return dataclasses.replace(cfg, **values)


# Calibrated desk-scale scenarios (time steps are set per scenario; the
# global dt default is far too fine for T = 50 runs).
PRESETS = {
    "scatter-1d": dict(
        dimension=1, sigma=2.0, initial="gaussian", amplitude=0.1, width=5.0,
        dt=0.5, t_final=50.0, snapshot_every=2, quad_nodes=32,
        amplitudes=(0.1, 0.05, 0.025),
    ),
    "scatter-2d": dict(
        dimension=2, sigma=1.0, initial="gaussian", amplitude=0.005, width=10.0,
        dt=1.0, t_final=50.0, snapshot_every=1, quad_nodes=8,
        amplitudes=(0.005, 0.0025, 0.00125),
    ),
    "average-1d": dict(
        dimension=1, n=256, box_length=40.0, sigma=1.0, initial="gaussian",
        amplitude=1.0, width=1.0, t_final=1.0, quad_nodes=32, orig_substeps=64,
        eps_ladder=(0.1, 0.05, 0.025, 0.0125, 0.00625),
    ),
    "picard-1d": dict(
        dimension=1, n=256, box_length=40.0, sigma=2.0, initial="gaussian",
        width=2.0, amplitude=0.25, dt=0.01, t_final=1.0, quad_nodes=16,
        amplitudes=(0.125, 0.25, 0.5, 1.0, 2.0),
    ),
    "bilinear-1d": dict(dimension=1, scan_method="grid"),
    "bilinear-2d": dict(dimension=2, scan_method="boosted"),
    "strichartz-1d": dict(dimension=1, strichartz_q=6.0, strichartz_r=6.0, scan_seeds=8),
    "strichartz-2d": dict(dimension=2, strichartz_q=4.0, strichartz_r=4.0, scan_seeds=4,
                          scan_nt=64),
}


def preset(name):
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return RunConfig(**PRESETS[name])
