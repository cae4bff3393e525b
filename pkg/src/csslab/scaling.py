"""Scaling maps: the mass-preserving fiber dilation, the subcritical
theta-scaling, the fiber energy closed form, its unique maximizer, and
the zero-energy amplitude at the critical exponent.

The dilation u_t(x) = t u(t x) is represented exactly for every t > 0 by
rescaling the box (same samples, sides divided by t); a same-grid variant
evaluates the trigonometric interpolant at the dilated nodes and is
flagged with :class:`DilationInterpolationWarning` since it is exact only
for band-limited fields.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .functionals import EnergyBreakdown, ModelParams, energy, energy_breakdown, pohozaev_q
from .grid import ComplexField, Grid2D


class DilationInterpolationWarning(UserWarning):
    """A non-grid-exact dilation fell back to spectral interpolation."""


@dataclass
class FiberPoint:
    """One sample of the fiber map t -> (E(u_t), Q(u_t))."""

    t: float
    energy_at_t: float
    q_at_t: float


def dilate(u: ComplexField, t: float) -> ComplexField:
    """Mass-preserving dilation u_t(x) = t u(t x), exact via box rescale.

    The returned field lives on a grid with sides lx/t, ly/t; sample i of
    the new grid is t times sample i of the old one, so the map is exact
    for every t > 0 and mass is preserved to rounding.
    """
    if not t > 0.0:
        raise ValueError("dilation parameter t must be positive")
    g = u.grid
    new_grid = Grid2D(g.nx, g.ny, g.lx / t, g.ly / t, dealias_fraction=g.dealias_fraction)
    return ComplexField(new_grid, t * u.values)


def _axis_eval_matrix(n: int, length: float, targets: np.ndarray) -> np.ndarray:
    """Evaluate the 1D trig interpolant of samples at x_j = -L/2 + j L/n.

    Returns E with E[i, j'] pairing target i against DFT bin j', Nyquist
    split symmetrically so real inputs stay real.
    """
    dx = length / n
    freqs = np.fft.fftfreq(n, d=dx)  # cycles per unit length
    phases = np.exp(2j * np.pi * np.outer(targets + 0.5 * length, freqs))
    # Split the Nyquist bin (index n//2) between +/- n/2.
    nyq = n // 2
    f_nyq = 0.5 / dx
    pos = np.exp(2j * np.pi * (targets + 0.5 * length) * f_nyq)
    phases[:, nyq] = 0.5 * (pos + np.conj(pos))
    return phases / n


def dilate_same_grid(u: ComplexField, t: float) -> ComplexField:
    """Dilation onto the original grid by spectral interpolation (flagged).

    Exact for fields whose periodic interpolant represents them; for
    decaying fields the wrap-around of t*x beyond the box edge is the
    leading error, so callers should keep t near 1 or the support small.
    """
    if not t > 0.0:
        raise ValueError("dilation parameter t must be positive")
    if t == 1.0:
        return u.copy()
    warnings.warn(
        f"dilation t={t} resampled spectrally onto the original grid",
        DilationInterpolationWarning,
        stacklevel=2,
    )
    g = u.grid
    # Wrap t*x back into the box; the interpolant is periodic anyway.
    ex = _axis_eval_matrix(g.nx, g.lx, t * g.x)
    ey = _axis_eval_matrix(g.ny, g.ly, t * g.y)
    vhat = np.fft.fft2(u.values)
    return ComplexField(g, t * (ex @ vhat @ ey.T))


def fiber_energy(u: ComplexField, params: ModelParams, t: float,
                 breakdown: EnergyBreakdown | None = None) -> float:
    """Closed-form fiber energy E(u_t) = t^2 K/2 - lambda t^(p-2) P/p."""
    if not t > 0.0:
        raise ValueError("dilation parameter t must be positive")
    bd = breakdown if breakdown is not None else energy_breakdown(u, params)
    return 0.5 * t**2 * bd.kinetic_cov - params.lam * t ** (params.p - 2.0) / params.p * bd.potential


def fiber_q(u: ComplexField, params: ModelParams, t: float,
            breakdown: EnergyBreakdown | None = None) -> float:
    """Closed-form Q(u_t) = t^2 K - lambda (p-2)/p t^(p-2) P."""
    bd = breakdown if breakdown is not None else energy_breakdown(u, params)
    return t**2 * bd.kinetic_cov - params.lam * (params.p - 2.0) / params.p * t ** (
        params.p - 2.0
    ) * bd.potential


def fiber_scan(u: ComplexField, params: ModelParams, ts) -> list[FiberPoint]:
    """Sample the fiber map on a t-grid (single evaluation of K and P)."""
    bd = energy_breakdown(u, params)
    return [
        FiberPoint(
            t=float(t),
            energy_at_t=fiber_energy(u, params, float(t), breakdown=bd),
            q_at_t=fiber_q(u, params, float(t), breakdown=bd),
        )
        for t in ts
    ]


def t_star(u: ComplexField, params: ModelParams,
           breakdown: EnergyBreakdown | None = None) -> float:
    """Unique fiber maximizer t_u = (p K / (lambda (p-2) P))^(1/(p-4)).

    Q(u_{t_u}) = 0; for p > 4 the fiber energy is maximized there and is
    concave beyond.  p = 4 is rejected: the fiber energy is t^2 E(u) with
    no interior critical point.
    """
    if params.p == 4.0:
        raise ValueError("t_star is undefined at p = 4 (scale-invariant fiber)")
    bd = breakdown if breakdown is not None else energy_breakdown(u, params)
    if bd.kinetic_cov <= 0.0 or bd.potential <= 0.0:
        raise ValueError("t_star needs positive kinetic and potential integrals")
    ratio = params.p * bd.kinetic_cov / (params.lam * (params.p - 2.0) * bd.potential)
    return float(ratio ** (1.0 / (params.p - 4.0)))


def beta_exponent(p: float) -> float:
    """beta = (p-2)/(8-2p), positive exactly in the subcritical band."""
    if not (2.0 < p < 4.0):
        raise ValueError("beta scaling requires 2 < p < 4")
    return (p - 2.0) / (8.0 - 2.0 * p)


def beta_scale(u: ComplexField, theta: float, params: ModelParams) -> ComplexField:
    """Subcritical mass rescaling u^theta(x) = theta^((1+2b)/2) u(theta^b x).

    Exact via box rescale; mass(u^theta) = theta * mass(u).  The exponent
    b = (p-2)/(8-2p) balances the gradient and potential homogeneities.
    """
    if not theta > 0.0:
        raise ValueError("theta must be positive")
    b = beta_exponent(params.p)
    g = u.grid
    factor = theta**b
    new_grid = Grid2D(
        g.nx, g.ny, g.lx / factor, g.ly / factor, dealias_fraction=g.dealias_fraction
    )
    return ComplexField(new_grid, theta ** (0.5 * (1.0 + 2.0 * b)) * u.values)


def amplitude_zero_energy(
    u: ComplexField, params: ModelParams, tol: float = 1e-12
) -> float | None:
    """Largest theta in (0, 1] with E(theta u) = 0 at the critical exponent.

    With a = grad/2, b = cross - lambda*potential/4, c = mag/2 the energy
    of theta*u is a t^2 + b t^4 + c t^6 (t = theta); the root is found by
    bisection to ``tol``.  Returns None when E(u) >= 0 and no crossing
    exists on the segment.
    """
    if params.p != 4.0:
        raise ValueError("amplitude projection is specific to p = 4")
    bd = energy_breakdown(u, params)
    a = 0.5 * bd.grad
    b = bd.cross - params.lam * bd.potential / 4.0
    c = 0.5 * bd.mag

    def e_of(theta: float) -> float:
        t2 = theta * theta
        return t2 * (a + b * t2 + c * t2 * t2)

    e1 = e_of(1.0)
    scale = abs(a) + abs(b) + abs(c)
    if abs(e1) <= 1e-14 * max(scale, 1.0):
        return 1.0
    if e1 > 0.0:
        return None
    # g(theta) = E(theta u)/theta^2 decreases through its largest root in
    # (0, 1): scan downward for the sign change, then bisect.
    thetas = np.linspace(1.0, 0.0, 1025)[:-1]
    vals = [a + b * t * t + c * t**4 for t in thetas]
    hi = None
    for k in range(1, len(thetas)):
        if vals[k] >= 0.0:
            hi, lo = thetas[k], thetas[k - 1]
            break
    if hi is None:
        return None
    g_of = lambda t: a + b * t * t + c * t**4
    while lo - hi > tol:
        mid = 0.5 * (lo + hi)
        if g_of(mid) >= 0.0:
            hi = mid
        else:
            lo = mid
    return float(0.5 * (lo + hi))
