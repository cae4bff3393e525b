"""Normalized ground-state solvers.

Two regimes share one projected-descent core:

* 2 < p < 4: the constrained energy is bounded below and negative, so a
  plain projected gradient descent on the mass sphere finds the global
  minimum.
* p > 4: the energy is unbounded below along the fiber dilation, so the
  solver minimizes the fiber-reduced functional F(u) = E(u_{t_u}) =
  max_t E(u_t): each iterate is snapped to its fiber maximizer before the
  gradient step, keeping the search on the zero-Pohozaev manifold where
  the minimum is the ground-state level.

The L2 gradient of the energy is

    g = -lap u + (A1^2 + A2^2) u + A0 u - 2i (A1 d1 u + A2 d2 u)
        - lambda |u|^{p-2} u,

whose implicit gauge-field dependence contributes exactly the A0 term
(dE(u)[v] = Re int g conj(v)); this is verified against central
differences in the test suite.

Projection onto the mass sphere is plain renormalization, so every
iterate has mass c to rounding; the multiplier is recovered a posteriori
from the stationarity relation.  Steps use Armijo backtracking
(nonconvex landscape; robustness over speed).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .functionals import (
    EnergyBreakdown,
    ModelParams,
    energy_breakdown,
    gauge_for,
    mass,
    multiplier_estimate,
    pohozaev_q,
)
from .gauge import GaugeFields, compute_gauge
from .grid import ComplexField, Grid2D, gradient, inner_real, l2_norm_sq, quad
from .scaling import DilationInterpolationWarning, dilate_same_grid, t_star


@dataclass(frozen=True)
class SolverConfig:
    """Projected-descent settings; tolerances must be positive."""

    max_iters: int = 2000
    step_init: float = 0.05
    step_backtrack: float = 0.5
    step_min: float = 1e-12
    step_grow: float = 1.4
    grad_tol: float = 1e-7
    q_tol: float = 1e-6
    radial: bool = False
    radial_stride: int = 10
    seed: int = 0
    perturbation: float = 0.0
    armijo_c1: float = 1e-4

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if min(self.grad_tol, self.q_tol, self.step_init, self.step_min) <= 0.0:
            raise ValueError("tolerances and step sizes must be positive")


@dataclass
class GroundStateResult:
    """Converged (or best-effort) normalized stationary state."""

    u: ComplexField
    energy: float
    q_residual: float
    multiplier: float
    iterations: int
    converged: bool
    regime: str
    grad_norm: float
    breakdown: EnergyBreakdown

    def summary(self) -> dict:
        return {
            "energy": self.energy,
            "q_residual": self.q_residual,
            "multiplier": self.multiplier,
            "iterations": self.iterations,
            "converged": self.converged,
            "regime": self.regime,
            "grad_norm": self.grad_norm,
            "mass": mass(self.u),
            "breakdown": self.breakdown.as_dict(),
        }


def energy_gradient(
    u: ComplexField, params: ModelParams, gauge: GaugeFields | None = None
) -> ComplexField:
    """L2 gradient of E at u (gauge fields recomputed unless supplied)."""
    g = gauge_for(u, params, gauge)
    grid = u.grid
    d1, d2 = gradient(u)
    lap = np.fft.ifft2(-grid.K2 * np.fft.fft2(u.values))
    vals = (
        -lap
        + (g.a1.values**2 + g.a2.values**2) * u.values
        + g.a0.values * u.values
        - 2j * (g.a1.values * d1 + g.a2.values * d2)
        - params.lam * np.abs(u.values) ** (params.p - 2.0) * u.values
    )
    return ComplexField(grid, vals)


def initial_gaussian(grid: Grid2D, c: float, width: float | None = None) -> ComplexField:
    """Centered radial Gaussian normalized to mass c (default basin seed)."""
    w = width if width is not None else grid.lx / 10.0
    vals = np.exp(-grid.R2 / (2.0 * w * w)).astype(np.complex128)
    u = ComplexField(grid, vals)
    return renormalize(u, c)


def renormalize(u: ComplexField, c: float) -> ComplexField:
    """Exact projection onto the mass sphere by amplitude rescaling."""
    m = mass(u)
    if m <= 0.0:
        raise ValueError("cannot renormalize a zero field")
    return ComplexField(u.grid, u.values * np.sqrt(c / m))


def radial_symmetrize(u: ComplexField) -> ComplexField:
    """Angular averaging onto radial bins (realizes the radial restriction)."""
    g = u.grid
    r = np.sqrt(g.R2).ravel()
    dr = 0.5 * min(g.dx, g.dy)
    idx = np.round(r / dr).astype(np.int64)
    nbins = int(idx.max()) + 1
    sums = np.bincount(idx, weights=u.values.real.ravel(), minlength=nbins) + 1j * np.bincount(
        idx, weights=u.values.imag.ravel(), minlength=nbins
    )
    counts = np.bincount(idx, minlength=nbins)
    means = sums / np.maximum(counts, 1)
    return ComplexField(g, means[idx].reshape(g.nx, g.ny))


def _fiber_direction(u: ComplexField) -> ComplexField:
    """Tangent of the dilation fiber at t=1: u + x . grad u."""
    d1, d2 = gradient(u)
    return ComplexField(u.grid, u.values + u.grid.X * d1 + u.grid.Y * d2)


def _project_tangent(
    g: ComplexField, u: ComplexField, c: float, fiber: ComplexField | None
) -> ComplexField:
    """Remove the mass direction (and optionally the fiber direction)."""
    coeff = inner_real(g, u) / c
    vals = g.values - coeff * u.values
    if fiber is not None:
        fnorm = l2_norm_sq(fiber)
        if fnorm > 0.0:
            proj = float(np.sum((vals * np.conj(fiber.values)).real) * u.grid.cell_area)
            vals = vals - (proj / fnorm) * fiber.values
    return ComplexField(u.grid, vals)


def _snap_to_fiber_max(u: ComplexField, params: ModelParams,
                       bd: EnergyBreakdown | None = None) -> ComplexField:
    """Map u to its fiber maximizer u_{t_u} on the same grid."""
    t = t_star(u, params, breakdown=bd)
    if abs(t - 1.0) < 1e-13:
        return u
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DilationInterpolationWarning)
        return dilate_same_grid(u, t)


def _descend(
    u: ComplexField,
    params: ModelParams,
    config: SolverConfig,
    supercritical: bool,
) -> GroundStateResult:
    c = params.c
    u = renormalize(u, c)
    if supercritical:
        u = renormalize(_snap_to_fiber_max(u, params), c)
    gauge = gauge_for(u, params)
    bd = energy_breakdown(u, params, gauge)
    e = 0.5 * bd.kinetic_cov - params.lam / params.p * bd.potential
    step = config.step_init
    converged = False
    grad_norm = np.inf
    iterations = 0

    for it in range(1, config.max_iters + 1):
        iterations = it
        grad = energy_gradient(u, params, gauge)
        fiber = _fiber_direction(u) if supercritical else None
        gt = _project_tangent(grad, u, c, fiber)
        grad_norm = np.sqrt(l2_norm_sq(gt))
        q = pohozaev_q(u, params, breakdown=bd)
        if grad_norm <= config.grad_tol and abs(q) <= config.q_tol * max(
            bd.kinetic_cov, 1e-300
        ):
            converged = True
            break

        accepted = False
        while step >= config.step_min:
            trial = ComplexField(u.grid, u.values - step * gt.values)
            try:
                trial = renormalize(trial, c)
                if supercritical:
                    trial = renormalize(_snap_to_fiber_max(trial, params), c)
            except ValueError:
                step *= config.step_backtrack
                continue
            trial_gauge = gauge_for(trial, params)
            trial_bd = energy_breakdown(trial, params, trial_gauge)
            e_trial = (
                0.5 * trial_bd.kinetic_cov
                - params.lam / params.p * trial_bd.potential
            )
            if supercritical and trial_bd.potential <= 0.0:
                raise RuntimeError("fiber collapse: potential term vanished")
            if e_trial <= e - config.armijo_c1 * step * grad_norm**2:
                u, gauge, bd, e = trial, trial_gauge, trial_bd, e_trial
                accepted = True
                step = min(step * config.step_grow, 1e3 * config.step_init)
                break
            step *= config.step_backtrack
        if not accepted:
            break

        if config.radial and it % config.radial_stride == 0:
            u = renormalize(radial_symmetrize(u), c)
            if supercritical:
                u = renormalize(_snap_to_fiber_max(u, params), c)
            gauge = gauge_for(u, params)
            bd = energy_breakdown(u, params, gauge)
            e = 0.5 * bd.kinetic_cov - params.lam / params.p * bd.potential

    q = pohozaev_q(u, params, breakdown=bd)
    alpha = multiplier_estimate(u, gauge, params, breakdown=bd)
    return GroundStateResult(
        u=u,
        energy=e,
        q_residual=q,
        multiplier=alpha,
        iterations=iterations,
        converged=converged,
        regime="supercritical" if supercritical else "subcritical",
        grad_norm=grad_norm,
        breakdown=bd,
    )


def _seed_field(grid: Grid2D, params: ModelParams, config: SolverConfig) -> ComplexField:
    u = initial_gaussian(grid, params.c)
    if config.perturbation > 0.0:
        rng = np.random.default_rng(config.seed)
        from .grid import smooth_random_field

        noise = smooth_random_field(grid, rng, band_fraction=0.2)
        u = ComplexField(
            grid, u.values * (1.0 + config.perturbation * noise.values.real)
        )
    return renormalize(u, params.c)


def minimize_subcritical(
    grid: Grid2D, params: ModelParams, config: SolverConfig = SolverConfig()
) -> GroundStateResult:
    """Global minimizer of E on the mass sphere for 2 < p < 4."""
    if not (2.0 < params.p < 4.0):
        raise ValueError("subcritical solver requires 2 < p < 4")
    return _descend(_seed_field(grid, params, config), params, config, supercritical=False)


def minimize_supercritical(
    grid: Grid2D, params: ModelParams, config: SolverConfig = SolverConfig()
) -> GroundStateResult:
    """Fiber-reduced minimizer on the zero-Pohozaev manifold for p > 4."""
    if not params.p > 4.0:
        raise ValueError("supercritical solver requires p > 4")
    return _descend(_seed_field(grid, params, config), params, config, supercritical=True)


@dataclass
class CertificationReport:
    """Stationarity and identity residuals for one candidate state."""

    grad_norm: float
    q_residual: float
    q_residual_rel: float
    multiplier: float
    aid_residual_rel: float
    selfdual_rel: float | None
    passed: bool

    def as_dict(self) -> dict:
        return {
            "grad_norm": self.grad_norm,
            "q_residual": self.q_residual,
            "q_residual_rel": self.q_residual_rel,
            "multiplier": self.multiplier,
            "aid_residual_rel": self.aid_residual_rel,
            "selfdual_rel": self.selfdual_rel,
            "passed": self.passed,
        }


def certify(
    u: ComplexField, params: ModelParams, config: SolverConfig = SolverConfig()
) -> CertificationReport:
    """Check a candidate against the necessary stationarity conditions.

    Reports the projected-gradient norm, the Pohozaev residual, the
    multiplier estimate, the gauge-weight identity residual, and (at
    p = 4, lam = 1) the self-dual residual relative to the gradient norm.
    """
    gauge = gauge_for(u, params)
    bd = energy_breakdown(u, params, gauge)
    grad = energy_gradient(u, params, gauge)
    gt = _project_tangent(grad, u, max(mass(u), 1e-300), None)
    grad_norm = np.sqrt(l2_norm_sq(gt))
    q = pohozaev_q(u, params, breakdown=bd)
    q_rel = abs(q) / max(bd.kinetic_cov, 1e-300)
    aid = abs(bd.a0_weight - 2.0 * (bd.mag + bd.cross)) / max(
        abs(bd.a0_weight), 2.0 * bd.mag + 2.0 * abs(bd.cross), 1e-300
    )
    selfdual = None
    if params.p == 4.0 and params.lam == 1.0:
        from .critical_mass import selfdual_residual_sq

        sd = np.sqrt(selfdual_residual_sq(u, gauge))
        selfdual = sd / max(np.sqrt(bd.grad), 1e-300)
    alpha = multiplier_estimate(u, gauge, params, breakdown=bd)
    passed = (
        grad_norm <= config.grad_tol
        and q_rel <= config.q_tol
        and aid <= 1e-6
    )
    return CertificationReport(
        grad_norm=grad_norm,
        q_residual=q,
        q_residual_rel=q_rel,
        multiplier=alpha,
        aid_residual_rel=aid,
        selfdual_rel=selfdual,
        passed=passed,
    )
