"""Variation norms, block norms, scattering profiles and estimate probes.

Only computable quantities live here: the discrete p-variation (an exact
supremum over sub-partitions of the stored times), the interaction-picture
variant, a sup-in-time block-norm *proxy* for the dyadic X-norm, and ratio
probes for linear and bilinear space-time estimates.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .spectral import (
    Field,
    _check_same_grid,
    block_multiplier,
    lp_cutoff,
    make_grid,
    make_ladder,
    trapezoid,
)

__all__ = [
    "VariationSample",
    "EstimateScanReport",
    "p_variation",
    "variation_chain",
    "variation_tail_index",
    "vp_delta_norm",
    "x_norm_proxy",
    "scattering_profile",
    "bilinear_ratio",
    "bilinear_ratio_boosted",
    "strichartz_ratio",
    "bilinear_scan",
    "strichartz_scan",
    "random_block_field",
    "random_patch_field",
    "transit_window",
    "check_admissible",
    "BILINEAR_GAIN",
]

# decay exponent of the bilinear estimate at separated frequencies, per dimension
BILINEAR_GAIN = {1: 1.0 / 6.0, 2: 1.0 / 2.0}


# --- p-variation ---------------------------------------------------------------

@dataclass
class VariationSample:
    """Points of an L^2-valued path at increasing times.

    ``points`` has shape ``(K, ...)``; ``weight`` is the quadrature weight of
    the L^2 norm. With ``infinity=True`` a terminal zero point at t = +inf is
    appended. Alternatively pass a precomputed ``distances`` matrix.
    """

    times: np.ndarray
    points: np.ndarray | None = None
    weight: float = 1.0
    infinity: bool = False
    distances: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        if self.points is None and self.distances is None:
            raise ValueError("need points or distances")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if self.points is not None:
            self.points = np.asarray(self.points)
            if len(self.points) != len(self.times):
                raise ValueError("points and times differ in length")
        else:
            self.distances = np.asarray(self.distances, dtype=np.float64)
            if self.distances.shape != (len(self.times), len(self.times)):
                raise ValueError("distance matrix does not match times")
        if len(self.times) + int(self.infinity) < 2:
            raise ValueError("a variation sample needs at least two points")

    def distance_matrix(self):
        if self.distances is not None:
            D = self.distances
            if self.infinity:
                raise ValueError("infinity marker needs explicit points")
            return D
        X = self.points.reshape(len(self.times), -1).astype(np.complex128)
        if self.infinity:
            X = np.vstack([X, np.zeros((1, X.shape[1]), dtype=np.complex128)])
        return kernels.pairwise_l2(np.ascontiguousarray(X), float(self.weight))


def variation_chain(D, p):
    """best[j]: largest sum of ``D[a_{k-1}, a_k]**p`` over chains ending at j."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return kernels.pvar_chain(np.ascontiguousarray(D, dtype=np.float64), float(p))


def p_variation(sample, p):
    """Exact discrete p-variation: sup over sub-partitions of the sample times."""
    best = variation_chain(sample.distance_matrix(), p)
    return float(best.max() ** (1.0 / p))


def variation_tail_index(sample, p, eta):
    """Earliest index ``e`` whose best chain comes within ``eta**p`` of the sup.

    Every increment between two points at or after ``e`` is then at most
    ``eta``: appending it to the best chain ending at ``e`` cannot exceed
    the supremum (discrete Cauchy tail property of finite variation).
    """
    best = variation_chain(sample.distance_matrix(), p)
    target = best.max() - eta ** p
    return int(np.argmax(best >= target))


def _pullback_values(traj, d_av):
    g = traj.grid
    axes = tuple(range(1, g.dim + 1))
    coef = np.fft.fftn(traj.values, axes=axes)
    phase = np.exp(1j * d_av * np.multiply.outer(traj.times, g.ksq))
    return np.fft.ifftn(phase * coef, axes=axes)


def vp_delta_norm(traj, p, d_av, infinity=False):
    """p-variation of the pulled-back path ``t -> exp(-i d_av t Lap) u(t)``."""
    w = _pullback_values(traj, d_av)
    sample = VariationSample(traj.times, w, traj.grid.cell_volume, infinity)
    return p_variation(sample, p)


def x_norm_proxy(traj, s, d_av, ladder):
    """(sum_N N**(2s) sup_t ||P_N exp(-i d_av t Lap) u(t)||_2**2)**(1/2).

    A proxy: the sup over stored times replaces the atomic U^2 block norm.
    """
    if s < 0:
        raise ValueError(f"s must be >= 0, got {s}")
    _check_same_grid(traj.grid, ladder.grid)
    g = traj.grid
    axes = tuple(range(1, g.dim + 1))
    coef = np.fft.fftn(traj.values, axes=axes)
    # the pullback is a unimodular multiplier, so block L^2 norms see |coef| only
    power = np.abs(coef) ** 2
    scale = g.box_length ** g.dim / g.size ** 2
    total = 0.0
    for N in ladder.levels:
        block = np.sum((ladder.cutoff(N) ** 2) * power, axis=axes) * scale
        total += N ** (2 * s) * float(block.max())
    return math.sqrt(total)


def scattering_profile(traj, d_av):
    """Candidate asymptotic state and the Cauchy residuals of the pulled-back path.

    Returns ``(phi_plus, [(t, ||w(t) - w(T_last)||_2), ...])`` with
    ``w(t) = exp(-i d_av t Lap) u(t)`` and ``phi_plus = w(T_last)``.
    """
    if len(traj) < 3:
        raise ValueError("scattering_profile needs at least three snapshots")
    w = _pullback_values(traj, d_av)
    g = traj.grid
    axes = tuple(range(1, g.dim + 1))
    diff = w - w[-1]
    r = np.sqrt(g.cell_volume * np.sum(diff.real ** 2 + diff.imag ** 2, axis=axes))
    phi = Field(g, w[-1], float(traj.times[-1]))
    return phi, [(float(t), float(x)) for t, x in zip(traj.times, r)]


# --- estimate probes -----------------------------------------------------------

def _time_grid(window):
    T, n_t = window
    if not T > 0:
        raise ValueError(f"window length must be positive, got {T}")
    if n_t < 16:
        raise ValueError(f"need at least 16 time samples, got {n_t}")
    return np.linspace(-T, T, int(n_t))


def _spacetime_lp(ts, fields_at, weight, expo):
    """(int int |prod fields|**expo dx dt)**(1/expo), trapezoid in t."""
    vals = np.empty(len(ts))
    for k, t in enumerate(ts):
        vals[k] = weight * np.sum(fields_at(t) ** expo)
    return trapezoid(vals, ts) ** (1.0 / expo)


def bilinear_ratio(f, g, N1, N2, window, d_av, ladder=None):
    """||e^{i d t L} P_N1 f * e^{i d t L} P_N2 g||_{L^{1+2/d}([-T,T] x box)} / (||P_N1 f|| ||P_N2 g||)."""
    _check_same_grid(f.grid, g.grid)
    grid = f.grid
    ladder = ladder or make_ladder(grid)
    ts = _time_grid(window)
    fh = ladder.cutoff(N1) * np.fft.fftn(f.values)
    gh = ladder.cutoff(N2) * np.fft.fftn(g.values)
    scale = grid.box_length ** grid.dim / grid.size ** 2
    nf = math.sqrt(scale * np.sum(np.abs(fh) ** 2))
    ng = math.sqrt(scale * np.sum(np.abs(gh) ** 2))
    if nf == 0 or ng == 0:
        return 0.0
    expo = 1.0 + 2.0 / grid.dim
    kk = grid.ksq

    def prod(t):
        ph = np.exp(-1j * d_av * t * kk)
        return np.abs(np.fft.ifftn(ph * fh) * np.fft.ifftn(ph * gh))

    return float(_spacetime_lp(ts, prod, grid.cell_volume, expo) / (nf * ng))


def bilinear_ratio_boosted(psi, carrier, g, N1, N2, window, d_av):
    """:func:`bilinear_ratio` for ``f = exp(i carrier.x) psi`` computed in the carrier frame.

    ``psi`` and ``g`` live on a coarse grid resolving only their own bands;
    ``carrier`` must be a lattice frequency of that grid's box. Exact
    because ``|e^{itL}(e^{iv.x}psi)|`` is ``|psi|`` evolved with the shifted
    dispersion relation ``|v + eta|**2``.
    """
    _check_same_grid(psi.grid, g.grid)
    grid = psi.grid
    v = np.asarray(carrier, dtype=np.float64).reshape(grid.dim)
    step = 2.0 * np.pi / grid.box_length
    if np.max(np.abs(v / step - np.round(v / step))) > 1e-9:
        raise ValueError("carrier must be a lattice frequency of the grid")
    shifted = [kv + vi for kv, vi in zip(grid.wavevectors, v)]
    shifted_abs = np.sqrt(sum(s * s for s in shifted))
    shifted_sq = shifted_abs ** 2
    fh = block_multiplier(shifted_abs, N1) * np.fft.fftn(psi.values)
    gh = block_multiplier(grid.kabs, N2) * np.fft.fftn(g.values)
    if 2.0 * N2 >= grid.nyquist:
        raise ValueError("coarse grid does not resolve the low-frequency block")
    scale = grid.box_length ** grid.dim / grid.size ** 2
    nf = math.sqrt(scale * np.sum(np.abs(fh) ** 2))
    ng = math.sqrt(scale * np.sum(np.abs(gh) ** 2))
    if nf == 0 or ng == 0:
        return 0.0
    ts = _time_grid(window)
    expo = 1.0 + 2.0 / grid.dim
    kk = grid.ksq

    def prod(t):
        a = np.fft.ifftn(np.exp(-1j * d_av * t * shifted_sq) * fh)
        b = np.fft.ifftn(np.exp(-1j * d_av * t * kk) * gh)
        return np.abs(a * b)

    return float(_spacetime_lp(ts, prod, grid.cell_volume, expo) / (nf * ng))


def check_admissible(dim, q, r):
    lhs = 2.0 / q
    rhs = dim * (0.5 - (0.0 if np.isinf(r) else 1.0 / r))
    if abs(lhs - rhs) > 1e-12 or q < 2:
        raise ValueError(
            f"(q, r) = ({q}, {r}) is not admissible in d={dim}: "
            f"need 2/q = d(1/2 - 1/r), got {lhs:.6g} vs {rhs:.6g}"
        )
    if dim == 2 and q == 2 and np.isinf(r):
        raise ValueError("the endpoint (d, q, r) = (2, 2, inf) is excluded")


def strichartz_ratio(f, q, r, window, d_av):
    """||e^{i d_av t Lap} f||_{L^q_t L^r_x([-T,T] x box)} / ||f||_2."""
    grid = f.grid
    check_admissible(grid.dim, q, r)
    fh = np.fft.fftn(f.values)
    scale = grid.box_length ** grid.dim / grid.size ** 2
    nf = math.sqrt(scale * np.sum(np.abs(fh) ** 2))
    if nf == 0:
        return 0.0
    ts = _time_grid(window)
    inner = np.empty(len(ts))
    for k, t in enumerate(ts):
        a = np.abs(np.fft.ifftn(np.exp(-1j * d_av * t * grid.ksq) * fh))
        inner[k] = a.max() if np.isinf(r) else (grid.cell_volume * np.sum(a ** r)) ** (1.0 / r)
    if np.isinf(q):
        val = inner.max()
    else:
        val = trapezoid(inner ** q, ts) ** (1.0 / q)
    return float(val / nf)


# --- seeded random data --------------------------------------------------------

def _rng(seed, *salt):
    return np.random.default_rng([int(seed)] + [int(s) for s in salt])


def random_block_field(grid, N, seed, width=1.0, salt=()):
    """P_N of a Gaussian-enveloped complex white-noise field (spatially localized)."""
    rng = _rng(seed, N, *salt)
    noise = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    r2 = sum(c * c for c in grid.coords)
    raw = np.exp(-r2 / (2.0 * width ** 2)) * noise
    vals = np.fft.ifftn(block_multiplier(grid.kabs, N) * np.fft.fftn(raw))
    return Field(grid, vals)


def random_patch_field(grid, seed, width=1.5, radius=1.0, salt=()):
    """Localized random field with spectrum inside |eta| <= 2 radius."""
    rng = _rng(seed, *salt)
    noise = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    r2 = sum(c * c for c in grid.coords)
    raw = np.exp(-r2 / (2.0 * width ** 2)) * noise
    vals = np.fft.ifftn(lp_cutoff(grid.kabs / radius) * np.fft.fftn(raw))
    return Field(grid, vals)


# --- scans ---------------------------------------------------------------------

@dataclass
class EstimateScanReport:
    """Rows ``(N1, N2, seed, ratio, normalized)`` plus log-log fit summaries.

    Bilinear scans: ``fitted_exponent`` is the least-squares slope of
    log(ratio) against log(N_min/N_max) over separations >= 16, and
    ``normalized_slope`` the slope of log(ratio * (N_max/N_min)**bound_exponent)
    against log(N_max/N_min). Strichartz scans fit log(ratio) against log(N).
    """

    kind: str
    dim: int
    bound_exponent: float
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def pairs(self):
        return [(r[0], r[1], r[3]) for r in self.rows]

    @property
    def normalized_max(self):
        return max(r[4] for r in self.rows)

    def _scan_variable(self):
        if self.kind == "bilinear":
            return np.array([max(r[0], r[1]) / min(r[0], r[1]) for r in self.rows], float)
        return np.array([r[0] for r in self.rows], float)

    def _fit(self, use_normalized):
        x = self._scan_variable()
        keep = x >= 16 if self.kind == "bilinear" else np.ones(len(x), bool)
        if keep.sum() < 2 or len(np.unique(x[keep])) < 2:
            return float("nan")
        y = np.array([r[4] if use_normalized else r[3] for r in self.rows], float)[keep]
        x = np.log(x[keep])
        if self.kind == "bilinear" and not use_normalized:
            x = -x
        return float(np.polyfit(x, np.log(y), 1)[0])

    @property
    def fitted_exponent(self):
        return self._fit(False)

    @property
    def normalized_slope(self):
        return self._fit(True)

    def separation_stats(self):
        """(mean, max) of the normalized quantity per separation (or per N)."""
        out = {}
        for key, r in zip(self._scan_variable(), self.rows):
            out.setdefault(int(key), []).append(r[4])
        return {k: (float(np.mean(v)), float(np.max(v))) for k, v in sorted(out.items())}

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N1", "N2", "seed", "ratio", "normalized"])
        for N1, N2, seed, ratio, norm in self.rows:
            w.writerow([N1, N2, seed, repr(float(ratio)), repr(float(norm))])
        return buf.getvalue()

    def summary(self):
        return {
            "kind": self.kind,
            "dim": self.dim,
            "fitted_exponent": self.fitted_exponent,
            "bound_exponent": self.bound_exponent,
            "normalized_max": self.normalized_max,
            "normalized_slope": self.normalized_slope,
            "separation_stats": {str(k): v for k, v in self.separation_stats().items()},
            **self.meta,
        }

    def summary_json(self):
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def transit_window(box_length, d_av, n_hi):
    """Window half-length over which the fastest part of block n_hi travels L/2.

    Group speeds in block N lie in [|d| N, 4 |d| N]; over [-T, T] with this T
    the high-frequency data crosses the low-frequency data once and never
    wraps around the torus back onto it.
    """
    return box_length / (8.0 * abs(d_av) * n_hi)


def _bilinear_task_grid(dim, N1, N2, seed, d_av, n_t, setup, t_scale=1.0):
    grid, ladder = setup["grid"], setup["ladder"]
    f = random_block_field(grid, N1, seed, setup["width"], salt=(1, dim))
    g = random_block_field(grid, N2, seed, setup["width"], salt=(2, dim))
    T = t_scale * transit_window(grid.box_length, d_av, max(N1, N2))
    return bilinear_ratio(f, g, N1, N2, (T, n_t), d_av, ladder)


def _bilinear_task_boosted(dim, N1, N2, seed, d_av, n_t, setup, t_scale=1.0):
    grid = setup["grid"]
    step = 2.0 * np.pi / grid.box_length
    hi, lo = max(N1, N2), min(N1, N2)
    carrier = np.zeros(dim)
    carrier[0] = step * round(hi / step)
    psi = random_patch_field(grid, seed, setup["width"], setup["patch_radius"], salt=(1, dim, hi))
    g = random_block_field(grid, lo, seed, setup["width"], salt=(2, dim, hi))
    T = t_scale * transit_window(grid.box_length, d_av, hi)
    return bilinear_ratio_boosted(psi, carrier, g, hi, lo, (T, n_t), d_av)


def default_bilinear_setup(dim, method, max_sep):
    """Grid, ladder and data width used by :func:`bilinear_scan`."""
    if method == "grid":
        box = 64.0
        need = 2.0 * max_sep  # rho_N reaches 2N; N_min = 1
        n = 16
        while np.pi * n / (2.0 * box) < max_sep:
            n *= 2
        grid = make_grid(dim, n, box)
        assert grid.nyquist >= need
        return {"grid": grid, "ladder": make_ladder(grid, max_sep), "width": 1.0}
    if method == "boosted":
        grid = make_grid(dim, 128, 64.0)
        return {"grid": grid, "width": 1.5, "patch_radius": 1.0}
    raise ValueError(f"unknown method {method!r}")


def bilinear_scan(dim, separations=(16, 32, 64, 128, 256, 512), n_seeds=32, seed=0,
                  d_av=1.0, n_t=128, method=None, threads=1, setup=None):
    """Ratio scan over dyadic separations N1/N2 with N2 = 1 and seeded data.

    ``method="grid"`` evaluates :func:`bilinear_ratio` on a grid resolving
    block N1 directly; ``method="boosted"`` uses carrier-frame evaluation
    (default in 2D, where the direct grid would be too large).
    """
    method = method or ("grid" if dim == 1 else "boosted")
    setup = setup or default_bilinear_setup(dim, method, max(separations))
    task = _bilinear_task_grid if method == "grid" else _bilinear_task_boosted
    beta = BILINEAR_GAIN[dim]
    jobs = [(int(sep), 1, seed + k) for sep in separations for k in range(n_seeds)]

    def run(job):
        N1, N2, sd = job
        return task(dim, N1, N2, sd, d_av, n_t, setup)

    ratios = _map(run, jobs, threads)
    checks = [(sep, _window_check(lambda nt, ts: task(dim, sep, 1, seed, d_av, nt, setup, ts),
                                  ratios[i * n_seeds], n_t))
              for i, sep in enumerate(separations)]
    rep = EstimateScanReport(
        "bilinear", dim, beta,
        meta={"method": method, "d_av": d_av, "n_t": n_t, "n_seeds": n_seeds,
              "window": "transit: T = L / (8 |d_av| N_max)",
              "window_check": checks,
              "grid": [setup["grid"].dim, setup["grid"].n, setup["grid"].box_length]},
    )
    for (N1, N2, sd), ratio in zip(jobs, ratios):
        sep = max(N1, N2) / min(N1, N2)
        rep.rows.append((N1, N2, sd, ratio, ratio * sep ** beta))
    return rep


def strichartz_scan(dim, q, r, levels=(1, 2, 4, 8, 16), n_seeds=8, seed=0, d_av=1.0,
                    n_t=64, threads=1, box_length=32.0, n=None):
    """Strichartz ratio for localized random data in each dyadic block.

    The admissible ratio is scale invariant, so no trend in N is expected;
    rows use ``N1 = N2 = N`` with the transit window of block N.
    """
    check_admissible(dim, q, r)
    if n is None:
        n = 16
        while np.pi * n / (2.0 * box_length) < max(levels):
            n *= 2
    grid = make_grid(dim, n, box_length)
    jobs = [(int(N), seed + k) for N in levels for k in range(n_seeds)]

    def ratio(N, sd, nt, t_scale=1.0):
        f = random_block_field(grid, N, sd, 1.0, salt=(3, dim))
        T = t_scale * transit_window(box_length, d_av, N)
        return strichartz_ratio(f, q, r, (T, nt), d_av)

    ratios = _map(lambda job: ratio(*job, n_t), jobs, threads)
    checks = [(int(N), _window_check(lambda nt, ts: ratio(int(N), seed, nt, ts),
                                     ratios[i * n_seeds], n_t))
              for i, N in enumerate(levels)]
    rep = EstimateScanReport(
        "strichartz", dim, 0.0,
        meta={"q": q, "r": r, "d_av": d_av, "n_t": n_t, "n_seeds": n_seeds,
              "window": "transit: T = L / (8 |d_av| N)", "window_check": checks,
              "grid": [dim, n, box_length]},
    )
    for (N, sd), ratio in zip(jobs, ratios):
        rep.rows.append((N, N, sd, ratio, ratio))
    return rep


def _window_check(sample, base, n_t):
    """Relative change of one sample under finer time steps and a halved window.

    No convergence rate in the window length is asserted; the numbers are
    reported so a scan can be judged against its own truncation.
    """
    if base == 0:
        return {"finer_steps": 0.0, "half_window": 0.0}
    return {"finer_steps": abs(sample(2 * n_t, 1.0) / base - 1.0),
            "half_window": abs(sample(n_t, 0.5) / base - 1.0)}


def _map(fn, jobs, threads):
    if threads <= 1:
        return [fn(j) for j in jobs]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(fn, jobs))
