import numpy as np
import pytest

from dmnls.integrators import (
    EvolutionParams,
    dispersion_map,
    picard_solve,
    solve_averaged,
    solve_original,
    step_averaged,
)
from dmnls.nonlinearity import NonlinearityParams
from dmnls.spectral import Field, free_propagate, gaussian, l2, make_grid, plane_wave

from oracles import gaussian_free_solution


def test_params_validation():
    with pytest.raises(ValueError):
        EvolutionParams(dt=0)
    with pytest.raises(ValueError):
        EvolutionParams(t_final=-1)
    with pytest.raises(ValueError):
        EvolutionParams(eps=-0.1)
    with pytest.raises(ValueError, match="divide"):
        EvolutionParams(eps=0.1, dt=0.03)
    with pytest.raises(ValueError):
        EvolutionParams(sigma=1.0, nl=NonlinearityParams(sigma=2.0))
    with pytest.raises(ValueError):
        EvolutionParams(dt=0.3, t_final=1.0).n_steps
    assert EvolutionParams(dt=0.25, t_final=1.0).n_steps == 4


def test_dispersion_map():
    assert dispersion_map(0.3, 0.5, 0.0) == 0.5
    assert dispersion_map(0.05, 1.0, 0.1) == pytest.approx(11.0)
    assert dispersion_map(0.15, 1.0, 0.1) == pytest.approx(-9.0)
    assert dispersion_map(0.25, 1.0, 0.1) == pytest.approx(11.0)
    assert dispersion_map(0.15, 1.0, 0.1, strength=0.0) == 1.0


def test_zero_data_stays_zero():
    g = make_grid(1, 64, 20.0)
    u0 = Field(g, np.zeros(64))
    tr = solve_averaged(u0, EvolutionParams(dt=0.1, t_final=0.5, sigma=2.0))
    assert np.all(tr.values == 0)
    assert np.all(tr.diagnostics["mass"] == 0)
    assert tr.flags["mass_drift"] == 0.0


def test_linear_limit_matches_closed_form():
    # amplitude 1e-8: the quintic term is O(1e-40) and invisible
    g = make_grid(1, 256, 40.0)
    u0 = gaussian(g, 1.0, 1e-8)
    tr = solve_averaged(u0, EvolutionParams(d_av=0.7, dt=0.05, t_final=0.5, sigma=2.0,
                                            nl=NonlinearityParams(sigma=2.0, quad_nodes=4)))
    exact = gaussian_free_solution(g.coords, 0.5, 1.0, 1e-8, 0.7)
    assert l2(tr[-1] - Field(g, exact)) < 1e-10 * l2(u0)


def test_single_mode_exact_phase():
    # plane wave A e^{ikx}: u(t) = A e^{ikx} exp(-i d k^2 t + i |A|^4 t)
    g = make_grid(1, 32, 2 * np.pi)
    A = 0.6
    u0 = plane_wave(g, (2,), A)
    T = 1.0
    tr = solve_averaged(u0, EvolutionParams(dt=0.01, t_final=T, sigma=2.0,
                                            nl=NonlinearityParams(sigma=2.0, quad_nodes=4)))
    exact = u0.values * np.exp(-1j * 4.0 * T + 1j * A ** 4 * T)
    assert np.max(np.abs(tr[-1].values - exact)) < 1e-10


def test_step_averaged_matches_solver():
    g = make_grid(1, 64, 20.0)
    u0 = gaussian(g, 1.0, 0.5)
    p = EvolutionParams(dt=0.1, t_final=0.1, sigma=1.0)
    one = step_averaged(u0, 0.0, p)
    tr = solve_averaged(u0, p)
    assert np.max(np.abs(one.values - tr[-1].values)) < 1e-15
    assert one.t == pytest.approx(0.1)


def test_snapshot_cadence():
    g = make_grid(1, 64, 20.0)
    p = EvolutionParams(dt=0.1, t_final=1.0, sigma=1.0, snapshot_every=3)
    tr = solve_averaged(gaussian(g, 1.0, 0.1), p)
    assert np.allclose(tr.times, [0, 0.3, 0.6, 0.9, 1.0])
    assert set(tr.diagnostics) == {"mass", "h1", "linf", "boundary_leak"}


def test_original_equation_conserves_mass_and_reduces_without_map():
    g = make_grid(1, 128, 30.0)
    u0 = gaussian(g, 1.0, 1.0)
    p = EvolutionParams(eps=0.05, dt=0.005, t_final=0.5, sigma=1.0)
    tr = solve_original(u0, p)
    assert tr.flags["mass_drift"] < 1e-13
    # zero map strength and zero nonlinearity => pure free evolution
    p0 = EvolutionParams(eps=0.05, dt=0.005, t_final=0.5, sigma=1.0,
                         nl=NonlinearityParams(sigma=1.0, map_strength=0.0))
    tiny = gaussian(g, 1.0, 1e-9)
    tr0 = solve_original(tiny, p0)
    assert l2(tr0[-1] - free_propagate(tiny, 0.5)) < 1e-12 * l2(tiny)
    with pytest.raises(ValueError):
        solve_original(u0, EvolutionParams(sigma=1.0))


def test_picard_small_data():
    g = make_grid(1, 128, 40.0)
    u0 = gaussian(g, 2.0, 0.3)
    p = EvolutionParams(dt=0.02, t_final=0.4, sigma=2.0,
                        nl=NonlinearityParams(sigma=2.0, quad_nodes=8))
    traj, rep = picard_solve(u0, p, tol=1e-12)
    assert rep.converged
    assert all(r < 0.5 for r in rep.contraction_ratios)
    assert len(traj) == 21 and traj.times[-1] == pytest.approx(0.4)
    step = solve_averaged(u0, p)
    # the fixed point is a second-order scheme; compare at that accuracy
    assert np.max(np.abs(traj.values - step.values)) < 1e-5


def test_picard_bookkeeping_and_threads():
    g = make_grid(1, 64, 20.0)
    u0 = gaussian(g, 2.0, 0.3)
    p = EvolutionParams(dt=0.05, t_final=0.2, sigma=2.0,
                        nl=NonlinearityParams(sigma=2.0, quad_nodes=4))
    _, rep = picard_solve(u0, p, max_iter=1)
    assert rep.n_iter == 1 and rep.contraction_ratios == []
    a, ra = picard_solve(u0, p, threads=1)
    b, rb = picard_solve(u0, p, threads=3)
    assert np.array_equal(a.values, b.values)
    assert ra.iterates == rb.iterates


def test_picard_divergence_is_reported_not_raised():
    g = make_grid(1, 64, 20.0)
    u0 = gaussian(g, 2.0, 5.0)
    p = EvolutionParams(dt=0.05, t_final=1.0, sigma=2.0,
                        nl=NonlinearityParams(sigma=2.0, quad_nodes=4))
    traj, rep = picard_solve(u0, p, max_iter=30)
    assert not rep.converged
    assert np.all(np.isfinite(traj.values))
