"""Covariant derivatives and the scalar functionals of the model.

The constrained energy is

    E(u) = 1/2 int |D1 u|^2 + |D2 u|^2 - (lambda/p) int |u|^p,

with D_j = d_j + i A_j and the potentials slaved to u (``gauge``
module).  E is always assembled from the covariant form; the expanded
form

    |D1 u|^2 + |D2 u|^2 = |grad u|^2 + (A1^2+A2^2)|u|^2
                          + 2 Im (A1 d1 u + A2 d2 u) conj(u)

and the gauge-weight identity

    int A0 |u|^2 = 2 int (A1^2+A2^2)|u|^2
                   + 2 Im int (A1 d1 u + A2 d2 u) conj(u)

are checked identities, not alternative code paths.  Both hold to
rounding on the periodic box for the spectral gauge solves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gauge import GaugeFields, compute_gauge, zero_gauge
from .grid import ComplexField, ensure_finite, gradient, l2_norm_sq, quad


class IdentityError(ValueError):
    """An exact identity between energy terms failed beyond tolerance."""


@dataclass(frozen=True)
class ToleranceBundle:
    """Default tolerances for identity checks and constraint residuals."""

    identity_rel: float = 1e-6
    constraint_rel: float = 1e-8


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters: coupling lam > 0, exponent p > 2, mass target c > 0.

    ``include_gauge=False`` switches off the self-generated potentials
    (the plain NLS limit used as an oracle control).  ``dealias=None``
    resolves to the 2/3-rule default: on for p >= 4, off otherwise; the
    flag only affects evolution right-hand sides, never diagnostics.
    """

    lam: float
    p: float
    c: float
    include_gauge: bool = True
    dealias: bool | None = None
    tol: ToleranceBundle = field(default_factory=ToleranceBundle)

    def __post_init__(self) -> None:
        if not self.lam > 0.0:
            raise ValueError("coupling lam must be positive")
        if not self.p > 2.0:
            raise ValueError("p must exceed 2")
        if not self.c > 0.0:
            raise ValueError("mass target c must be positive")

    @property
    def dealias_on(self) -> bool:
        return self.p >= 4.0 if self.dealias is None else self.dealias

    @property
    def regime(self) -> str:
        if self.p < 4.0:
            return "subcritical"
        if self.p == 4.0:
            return "critical"
        return "supercritical"


@dataclass
class EnergyBreakdown:
    """Every term of the energy, with the two exact identities as invariants."""

    kinetic_cov: float
    grad: float
    mag: float
    cross: float
    potential: float
    a0_weight: float

    def check(self, tol: float = 1e-6) -> None:
        scale = max(self.kinetic_cov, self.grad + self.mag + 2.0 * abs(self.cross))
        if scale > 0.0:
            res = abs(self.kinetic_cov - (self.grad + self.mag + 2.0 * self.cross))
            if res > tol * scale:
                raise IdentityError(
                    f"covariant-kinetic decomposition off by {res:.3e} "
                    f"(scale {scale:.3e})"
                )
        scale0 = max(abs(self.a0_weight), 2.0 * self.mag + 2.0 * abs(self.cross))
        if scale0 > 0.0:
            res0 = abs(self.a0_weight - 2.0 * (self.mag + self.cross))
            if res0 > tol * scale0:
                raise IdentityError(
                    f"gauge-weight identity off by {res0:.3e} (scale {scale0:.3e})"
                )
        if self.kinetic_cov < -tol or self.mag < -tol or self.potential < -tol:
            raise IdentityError("a nonnegative energy term came out negative")

    def as_dict(self) -> dict[str, float]:
        return {
            "kinetic_cov": self.kinetic_cov,
            "grad": self.grad,
            "mag": self.mag,
            "cross": self.cross,
            "potential": self.potential,
            "a0_weight": self.a0_weight,
        }


def mass(u: ComplexField) -> float:
    """Squared L2 norm, the conserved particle number."""
    return l2_norm_sq(u)


def covariant_derivative(u: ComplexField, g: GaugeFields, axis: int) -> ComplexField:
    """D_axis u = d_axis u + i A_axis u."""
    if not u.grid.compatible(g.grid):
        raise ValueError("gauge fields live on a different grid than u")
    if axis not in (1, 2):
        raise ValueError("axis must be 1 or 2")
    d1, d2 = gradient(u)
    d = d1 if axis == 1 else d2
    a = g.a1 if axis == 1 else g.a2
    return ComplexField(u.grid, d + 1j * a.values * u.values)


def gauge_for(u: ComplexField, params: ModelParams, gauge: GaugeFields | None = None) -> GaugeFields:
    """Gauge fields for u honoring include_gauge, reusing a precomputed triple."""
    if not params.include_gauge:
        return zero_gauge(u.grid)
    return compute_gauge(u) if gauge is None else gauge


def energy_breakdown(
    u: ComplexField, params: ModelParams, gauge: GaugeFields | None = None
) -> EnergyBreakdown:
    """All six energy terms of u (gauge recomputed unless supplied)."""
    ensure_finite(u)
    g = gauge_for(u, params, gauge)
    grid = u.grid
    d1, d2 = gradient(u)
    rho = np.abs(u.values) ** 2
    uc = np.conj(u.values)
    cov1 = d1 + 1j * g.a1.values * u.values
    cov2 = d2 + 1j * g.a2.values * u.values
    kinetic_cov = quad(grid, np.abs(cov1) ** 2 + np.abs(cov2) ** 2)
    grad_term = quad(grid, np.abs(d1) ** 2 + np.abs(d2) ** 2)
    mag = quad(grid, (g.a1.values**2 + g.a2.values**2) * rho)
    cross = quad(grid, (g.a1.values * (d1 * uc).imag + g.a2.values * (d2 * uc).imag))
    potential = quad(grid, np.abs(u.values) ** params.p)
    a0_weight = quad(grid, g.a0.values * rho)
    return EnergyBreakdown(
        kinetic_cov=kinetic_cov,
        grad=grad_term,
        mag=mag,
        cross=cross,
        potential=potential,
        a0_weight=a0_weight,
    )


def energy(
    u: ComplexField, params: ModelParams, gauge: GaugeFields | None = None
) -> tuple[float, EnergyBreakdown]:
    """E(u) and its term breakdown; identity violations raise IdentityError."""
    bd = energy_breakdown(u, params, gauge)
    bd.check(params.tol.identity_rel)
    return 0.5 * bd.kinetic_cov - (params.lam / params.p) * bd.potential, bd


def pohozaev_q(
    u: ComplexField, params: ModelParams, gauge: GaugeFields | None = None,
    breakdown: EnergyBreakdown | None = None,
) -> float:
    """Q(u) = kinetic_cov - lambda (p-2)/p * potential (zero at stationary points)."""
    bd = breakdown if breakdown is not None else energy_breakdown(u, params, gauge)
    return bd.kinetic_cov - params.lam * (params.p - 2.0) / params.p * bd.potential


def multiplier_estimate(
    u: ComplexField, g: GaugeFields | None, params: ModelParams,
    breakdown: EnergyBreakdown | None = None,
) -> float:
    """Lagrange multiplier alpha = -(K + int A0|u|^2 - lambda int |u|^p)/mass.

    Under the torus zero-mean convention for A0; exact at stationary
    points, an estimate elsewhere.
    """
    m = mass(u)
    if m == 0.0:
        raise ValueError("multiplier estimate needs nonzero mass")
    bd = breakdown if breakdown is not None else energy_breakdown(u, params, g)
    return -(bd.kinetic_cov + bd.a0_weight - params.lam * bd.potential) / m


def far_separation_additivity(
    u1: ComplexField, u2: ComplexField, distance: float, params: ModelParams
) -> tuple[float, float]:
    """Energy additivity defect of disjoint bumps and its O(1/distance) bound.

    Returns (E(u1+u2) - E(u1) - E(u2), bound).  The bound collects the
    gauge cross terms: with M_j = mass_j/(4 pi d) the sup of either
    component of A(u_j) at distance >= d from its support,

        |defect| <= M1^2 c2 + M2^2 c1
                    + sqrt(2) [ M2 sqrt(c1) (S1 + ||grad u1||)
                              + M1 sqrt(c2) (S2 + ||grad u2||) ],

    S_j^2 = int (A1^2+A2^2)(u_j) |u_j|^2.  Gradient and potential terms
    are exactly additive for disjoint supports.
    """
    if not u1.grid.compatible(u2.grid):
        raise ValueError("bumps must share a grid")
    if distance <= 0.0:
        raise ValueError("distance must be positive")
    overlap = np.abs(u1.values) * np.abs(u2.values)
    peak = np.abs(u1.values).max() * np.abs(u2.values).max()
    if peak > 0.0 and overlap.max() > 1e-12 * peak:
        raise ValueError("supports overlap beyond the 1e-12 threshold")
    e_sum, _ = energy(ComplexField(u1.grid, u1.values + u2.values), params)
    e1, bd1 = energy(u1, params)
    e2, bd2 = energy(u2, params)
    diff = e_sum - e1 - e2
    c1, c2 = mass(u1), mass(u2)
    m1 = c1 / (4.0 * np.pi * distance)
    m2 = c2 / (4.0 * np.pi * distance)
    s1, s2 = np.sqrt(max(bd1.mag, 0.0)), np.sqrt(max(bd2.mag, 0.0))
    g1, g2 = np.sqrt(max(bd1.grad, 0.0)), np.sqrt(max(bd2.grad, 0.0))
    bound = (
        m1**2 * c2
        + m2**2 * c1
        + np.sqrt(2.0) * (m2 * np.sqrt(c1) * (s1 + g1) + m1 * np.sqrt(c2) * (s2 + g2))
    )
    return diff, float(bound)
