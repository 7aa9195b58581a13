"""Periodic grids, Fourier transforms, free propagators, dyadic blocks and norms.

Fourier convention
------------------
The transform follows the analyst convention

    f_hat(xi) = integral exp(-i x.xi) f(x) dx,

realized on the grid as ``(L/n)**dim * sum_x exp(-i x.xi) f(x)`` with grid
points ``x_j = -L/2 + j L/n``. The inverse carries the matching
``(2 pi)**-dim`` factor, so Parseval reads

    ||f||_2**2 = (2 pi)**-dim * (2 pi / L)**dim * sum_xi |f_hat(xi)|**2.

Free propagation ``exp(i c tau Laplacian)`` is the multiplier
``exp(-i c tau |xi|**2)``; it only needs the unnormalized FFT pair.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

trapezoid = getattr(np, "trapezoid", None) or np.trapz

__all__ = [
    "Grid",
    "Field",
    "Trajectory",
    "DyadicLadder",
    "make_grid",
    "make_ladder",
    "to_frequency",
    "to_physical",
    "free_propagate",
    "dyadic_project",
    "lp_cutoff",
    "edge_mask",
    "l2",
    "mass",
    "h_s",
    "lebesgue",
    "spacetime_norm",
    "boundary_leak",
    "gaussian",
    "plane_wave",
]


def _is_pow2(n):
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Periodic box ``[-L/2, L/2)**dim`` with ``n`` points per axis."""

    dim: int
    n: int
    box_length: float

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if not isinstance(self.n, (int, np.integer)) or not _is_pow2(int(self.n)) or self.n < 16:
            raise ValueError(f"n must be a power of two >= 16, got {self.n}")
        if not np.isfinite(self.box_length) or self.box_length <= 0:
            raise ValueError(f"box_length must be positive, got {self.box_length}")

    @property
    def shape(self):
        return (self.n,) * self.dim

    @property
    def size(self):
        return self.n ** self.dim

    @property
    def dx(self):
        return self.box_length / self.n

    @property
    def cell_volume(self):
        """Quadrature weight ``(L/n)**dim``."""
        return self.dx ** self.dim

    @property
    def nyquist(self):
        return np.pi * self.n / self.box_length

    @cached_property
    def x1d(self):
        return -0.5 * self.box_length + self.dx * np.arange(self.n)

    @cached_property
    def frequencies(self):
        """Per-axis frequencies ``2 pi j / L`` in FFT order, j in [-n/2, n/2)."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=1.0 / self.n) / self.box_length

    @cached_property
    def coords(self):
        return np.meshgrid(*([self.x1d] * self.dim), indexing="ij")

    @cached_property
    def wavevectors(self):
        return np.meshgrid(*([self.frequencies] * self.dim), indexing="ij")

    @cached_property
    def ksq(self):
        """|xi|**2 on the FFT-ordered frequency grid."""
        return sum(k * k for k in self.wavevectors)

    @cached_property
    def kabs(self):
        return np.sqrt(self.ksq)

    @cached_property
    def _shift_phase(self):
        # exp(-i xi . x_0) with x_0 = -L/2 per axis equals (-1)**j
        j = np.fft.fftfreq(self.n, d=1.0 / self.n).astype(np.int64)
        sign = np.where(j % 2 == 0, 1.0, -1.0)
        out = sign
        for _ in range(self.dim - 1):
            out = np.multiply.outer(out, sign)
        return out


def make_grid(dim, n, box_length):
    """Build a :class:`Grid`; rejects non-power-of-two ``n`` and ``box_length <= 0``."""
    return Grid(int(dim), int(n), float(box_length))


@dataclass
class Field:
    """Complex samples on a grid.

    ``representation`` is ``"physical"`` (canonical) or ``"frequency"``
    (values are ``f_hat`` on the FFT-ordered frequency grid).
    """

    grid: Grid
    values: np.ndarray
    t: float | None = None
    representation: str = "physical"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.size != self.grid.size:
            raise ValueError(
                f"field has {vals.size} values, grid expects {self.grid.size}"
            )
        vals = vals.reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("field contains NaN or Inf")
        if self.representation not in ("physical", "frequency"):
            raise ValueError(f"unknown representation {self.representation!r}")
        self.values = vals

    def _require_physical(self):
        if self.representation != "physical":
            raise ValueError("operation needs a physical-space field")

    def copy(self):
        return Field(self.grid, self.values.copy(), self.t, self.representation)

    def __add__(self, other):
        _check_same_grid(self.grid, other.grid)
        return Field(self.grid, self.values + other.values, self.t, self.representation)

    def __sub__(self, other):
        _check_same_grid(self.grid, other.grid)
        return Field(self.grid, self.values - other.values, self.t, self.representation)

    def __mul__(self, scalar):
        return Field(self.grid, self.values * scalar, self.t, self.representation)

    __rmul__ = __mul__


def _check_same_grid(a, b):
    if a != b:
        raise ValueError(f"grid mismatch: {a} vs {b}")


def to_frequency(f):
    """Discrete analyst-convention Fourier transform of a physical field."""
    f._require_physical()
    g = f.grid
    vals = g.cell_volume * g._shift_phase * np.fft.fftn(f.values)
    return Field(g, vals, f.t, "frequency")


def to_physical(fh):
    """Inverse of :func:`to_frequency`."""
    if fh.representation != "frequency":
        raise ValueError("to_physical expects a frequency-space field")
    g = fh.grid
    vals = np.fft.ifftn(fh.values * g._shift_phase) / g.cell_volume
    return Field(g, vals, fh.t, "physical")


def propagator(grid, tau, coeff=1.0):
    """Multiplier array of ``exp(i coeff tau Laplacian)``."""
    return np.exp(-1j * (coeff * tau) * grid.ksq)


def free_propagate(f, tau, coeff=1.0):
    """Apply ``exp(i coeff tau Laplacian)`` to a physical field."""
    f._require_physical()
    if tau == 0 or coeff == 0:
        return Field(f.grid, f.values.copy(), f.t)
    vals = np.fft.ifftn(propagator(f.grid, tau, coeff) * np.fft.fftn(f.values))
    return Field(f.grid, vals, f.t)


# --- Littlewood-Paley blocks -------------------------------------------------

def _smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=np.float64)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        u = 1.0 - t
        b = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
    return a / (a + b)


def lp_cutoff(xi_abs):
    """rho(|xi|): 1 for |xi| <= 1, 0 for |xi| >= 2, smooth in between."""
    return 1.0 - _smooth_step(np.asarray(xi_abs) - 1.0)


def floor_dyadic(x):
    if x < 1:
        raise ValueError(f"no dyadic level <= {x}")
    return 1 << int(np.floor(np.log2(x) + 1e-12))


@dataclass
class DyadicLadder:
    grid: Grid
    levels: list
    cutoffs: dict = field(repr=False)

    @property
    def n_max(self):
        return self.levels[-1]

    def cutoff(self, N):
        try:
            return self.cutoffs[N]
        except KeyError:
            raise ValueError(f"dyadic level {N} not in ladder {self.levels}") from None


def block_multiplier(kabs, N):
    if N == 1:
        return lp_cutoff(kabs)
    return lp_cutoff(kabs / N) - lp_cutoff(2.0 * kabs / N)


def make_ladder(grid, n_max=None):
    """Dyadic ladder 1, 2, ..., N_max with N_max = floor_dyadic(n pi / (2L)).

    A smaller ``n_max`` may be requested; a larger one would put block tails
    past the guard band and is refused.
    """
    top = floor_dyadic(grid.n * np.pi / (2.0 * grid.box_length))
    if n_max is None:
        n_max = top
    elif n_max > top or not _is_pow2(int(n_max)):
        raise ValueError(f"n_max must be a dyadic <= {top}, got {n_max}")
    levels = [1 << j for j in range(int(np.log2(n_max)) + 1)]
    cutoffs = {N: block_multiplier(grid.kabs, N) for N in levels}
    return DyadicLadder(grid, levels, cutoffs)


def dyadic_project(f, N, ladder):
    """Frequency-side multiplication by rho_N."""
    f._require_physical()
    _check_same_grid(f.grid, ladder.grid)
    vals = np.fft.ifftn(ladder.cutoff(N) * np.fft.fftn(f.values))
    return Field(f.grid, vals, f.t)


# --- norms -------------------------------------------------------------------

def _values(f):
    if isinstance(f, Field):
        f._require_physical()
        return f.grid, f.values
    raise TypeError("expected a Field")


def l2(f):
    g, v = _values(f)
    return float(np.sqrt(g.cell_volume * np.sum(v.real ** 2 + v.imag ** 2)))


def mass(f):
    g, v = _values(f)
    return float(g.cell_volume * np.sum(v.real ** 2 + v.imag ** 2))


def lebesgue(f, r):
    g, v = _values(f)
    return _lebesgue_array(np.abs(v), r, g.cell_volume)


def _lebesgue_array(a, r, weight, axes=None):
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    if np.isinf(r):
        return np.max(a, axis=axes)
    return (weight * np.sum(a ** r, axis=axes)) ** (1.0 / r)


def h_s(f, s):
    """Sobolev norm with weight (1 + |xi|**2)**s."""
    if s < 0:
        raise ValueError(f"s must be >= 0, got {s}")
    g, v = _values(f)
    fh = np.fft.fftn(v)
    w = (1.0 + g.ksq) ** s
    return float(np.sqrt(g.box_length ** g.dim / g.size ** 2 * np.sum(w * np.abs(fh) ** 2)))


LEAK_BAND = 1.0 / 32.0


def edge_mask(grid, band=LEAK_BAND):
    """Points within ``band * L`` of the box edge along any axis."""
    edge = 0.5 * grid.box_length * (1.0 - 2.0 * band)
    mask = np.zeros(grid.shape, dtype=bool)
    for c in grid.coords:
        mask |= np.abs(c) >= edge
    return mask


def boundary_leak(f, band=LEAK_BAND):
    """Fraction of mass within ``band * L`` of the box edge (any axis)."""
    g, v = _values(f)
    mask = edge_mask(g, band)
    dens = np.abs(v) ** 2
    total = dens.sum()
    if total == 0:
        return 0.0
    return float(dens[mask].sum() / total)


@dataclass
class Trajectory:
    """Snapshots ``values[k]`` at strictly increasing ``times[k]``."""

    grid: Grid
    times: np.ndarray
    values: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != (len(self.times),) + self.grid.shape:
            raise ValueError(
                f"snapshot array shape {self.values.shape} does not match "
                f"{len(self.times)} times on grid {self.grid.shape}"
            )
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        for key, col in self.diagnostics.items():
            if len(col) != len(self.times):
                raise ValueError(f"diagnostic {key!r} not aligned with times")

    def __len__(self):
        return len(self.times)

    def __getitem__(self, k):
        return Field(self.grid, self.values[k], float(self.times[k]))

    @property
    def fields(self):
        return [self[k] for k in range(len(self))]

    @classmethod
    def from_fields(cls, fields, **kw):
        if not fields:
            raise ValueError("empty trajectory")
        grid = fields[0].grid
        for f in fields:
            _check_same_grid(grid, f.grid)
        return cls(grid, [f.t for f in fields], np.stack([f.values for f in fields]), **kw)


def spacetime_norm(traj, q, r):
    """L^q_t L^r_x over the stored times (trapezoid in t, grid quadrature in x)."""
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    axes = tuple(range(1, traj.grid.dim + 1))
    inner = _lebesgue_array(np.abs(traj.values), r, traj.grid.cell_volume, axes=axes)
    if np.isinf(q):
        return float(np.max(inner))
    return float(trapezoid(inner ** q, traj.times) ** (1.0 / q))


# --- initial data ------------------------------------------------------------

def gaussian(grid, width=1.0, amplitude=1.0, center=None, t=0.0):
    """amplitude * exp(-|x - center|**2 / (2 width**2))."""
    center = np.zeros(grid.dim) if center is None else np.asarray(center, float)
    r2 = sum((c - x0) ** 2 for c, x0 in zip(grid.coords, center))
    return Field(grid, amplitude * np.exp(-r2 / (2.0 * width ** 2)), t)


def plane_wave(grid, k, amplitude=1.0, t=0.0):
    """amplitude * exp(i xi.x) with xi = 2 pi k / L (integer mode vector k)."""
    k = np.atleast_1d(np.asarray(k, dtype=np.int64))
    if k.size != grid.dim:
        raise ValueError(f"mode vector needs {grid.dim} entries")
    phase = sum(2.0 * np.pi * kj / grid.box_length * c for kj, c in zip(k, grid.coords))
    return Field(grid, amplitude * np.exp(1j * phase), t)
