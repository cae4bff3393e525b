"""Virial and localized-virial diagnostics.

For a radial weight xi the monitored quantity is

    V_xi[phi] = Im int conj(phi) (D1 phi d1 xi + D2 phi d2 xi),

whose exact time derivative along solutions is

    dV/dt = 2 int (|D1 phi|^2 d1^2 xi + 2 Re conj(D1 phi) D2 phi d1 d2 xi
                   + |D2 phi|^2 d2^2 xi)
            - (lambda (p-2)/p) int |phi|^p lap xi
            - 1/2 int |phi|^2 bilap xi.

With xi = 2|x|^2 this collapses to 8 Q(phi) (second derivative of the
moment of inertia I = int |x|^2 |phi|^2).  The cutoff replaces |x|^2/2 by
a C^4 radial profile chi_R(r) = R^2 chi(r/R) with

    chi(s) = s^2/2 for s <= 1,  constant for s >= 10,
    chi'(s) = s (1 - S((s-1)/9)) on [1, 10],

where S is the degree-7 smootherstep (three vanishing derivatives at both
ends).  This closed form makes the three positivity constraints

    1 - chi_R'' >= 0,   1 - chi_R'/r >= 0,   2 - lap chi_R >= 0

hold by construction at every radius.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

from .functionals import ModelParams, energy_breakdown, pohozaev_q
from .gauge import GaugeFields
from .grid import ComplexField, Grid2D, RealField, gradient, l2_norm_sq, quad


def _chi_prime_polynomial() -> Polynomial:
    """chi'(s) = s * (1 - S3((s-1)/9)) on [1, 10] as an exact polynomial."""
    x = Polynomial([-1.0 / 9.0, 1.0 / 9.0])  # (s-1)/9
    s3 = 35.0 * x**4 - 84.0 * x**5 + 70.0 * x**6 - 20.0 * x**7
    return Polynomial([0.0, 1.0]) * (Polynomial([1.0]) - s3)


_CHI1 = _chi_prime_polynomial()
_CHI2 = _CHI1.deriv()
_CHI3 = _CHI2.deriv()
_CHI4 = _CHI3.deriv()
_CHI0 = _CHI1.integ(k=[0.0]) - _CHI1.integ(k=[0.0])(1.0) + 0.5  # chi(1) = 1/2
_CHI_FLAT = float(_CHI0(10.0))


def chi_profile(s: np.ndarray, order: int = 0) -> np.ndarray:
    """chi and its first four radial derivatives at profile radii s >= 0."""
    s = np.asarray(s, dtype=float)
    inner = s <= 1.0
    outer = s >= 10.0
    mid = ~(inner | outer)
    out = np.zeros_like(s)
    if order == 0:
        out[inner] = 0.5 * s[inner] ** 2
        out[mid] = _CHI0(s[mid])
        out[outer] = _CHI_FLAT
    elif order == 1:
        out[inner] = s[inner]
        out[mid] = _CHI1(s[mid])
    elif order == 2:
        out[inner] = 1.0
        out[mid] = _CHI2(s[mid])
    elif order == 3:
        out[mid] = _CHI3(s[mid])
    elif order == 4:
        out[mid] = _CHI4(s[mid])
    else:
        raise ValueError("order must be 0..4")
    return out


def _profile_extrema() -> tuple[float, float]:
    """M2 = sup (2 - lap chi), M4 = sup |bilap chi| over the profile."""
    s = np.linspace(1.0, 10.0, 20001)
    c1, c2 = chi_profile(s, 1), chi_profile(s, 2)
    c3, c4 = chi_profile(s, 3), chi_profile(s, 4)
    lap = c2 + c1 / s
    bilap = c4 + 2.0 * c3 / s - c2 / s**2 + c1 / s**3
    return float(np.max(2.0 - lap)), float(np.max(np.abs(bilap)))


_M2, _M4 = _profile_extrema()


class RadialWeight:
    """Partial derivatives of a radial weight xi sampled on a grid.

    Subclasses fill d1, d2 (gradient), d11, d12, d22 (Hessian), lap and
    bilap arrays; the virial operations only consume these samples.
    """

    grid: Grid2D
    d1: np.ndarray
    d2: np.ndarray
    d11: np.ndarray
    d12: np.ndarray
    d22: np.ndarray
    lap: np.ndarray
    bilap: np.ndarray


class QuadraticWeight(RadialWeight):
    """xi = 2|x|^2: the plain virial weight (fourth derivatives vanish)."""

    def __init__(self, grid: Grid2D):
        self.grid = grid
        self.d1 = 4.0 * grid.X
        self.d2 = 4.0 * grid.Y
        ones = np.ones((grid.nx, grid.ny))
        self.d11 = 4.0 * ones
        self.d22 = 4.0 * ones
        self.d12 = np.zeros_like(ones)
        self.lap = 8.0 * ones
        self.bilap = np.zeros_like(ones)


class CutoffChiR(RadialWeight):
    """The localized weight chi_R(r) = R^2 chi(r/R) with derivatives to order 4.

    chi_R(r) = r^2/2 exactly for r <= R and is constant for r >= 10R; the
    positivity constraints hold at every node by construction and are
    asserted at build time.
    """

    def __init__(self, grid: Grid2D, R: float):
        if not R > 0.0:
            raise ValueError("cutoff radius must be positive")
        self.grid = grid
        self.R = float(R)
        r = np.sqrt(grid.R2)
        s = r / R
        c0 = R * R * chi_profile(s, 0)
        c1 = R * chi_profile(s, 1)
        c2 = chi_profile(s, 2)
        c3 = chi_profile(s, 3) / R
        c4 = chi_profile(s, 4) / R**2
        self.values = c0
        # chi'/r == 1 on the quadratic region; elsewhere r >= R > 0.
        ratio = np.where(s <= 1.0, 1.0, c1 / np.maximum(r, 1e-300))
        with np.errstate(invalid="ignore", divide="ignore"):
            w1 = np.where(r > 0.0, grid.X / np.maximum(r, 1e-300), 0.0)
            w2 = np.where(r > 0.0, grid.Y / np.maximum(r, 1e-300), 0.0)
        self.d1 = grid.X * ratio
        self.d2 = grid.Y * ratio
        self.d11 = (1.0 - w1 * w1) * ratio + w1 * w1 * c2
        self.d22 = (1.0 - w2 * w2) * ratio + w2 * w2 * c2
        self.d12 = w1 * w2 * (c2 - ratio)
        self.lap = c2 + ratio
        self.bilap = np.where(
            s <= 1.0,
            0.0,
            c4 + 2.0 * c3 / np.maximum(r, 1e-300) - c2 / np.maximum(r**2, 1e-300)
            + c1 / np.maximum(r**3, 1e-300),
        )
        self.m2 = _M2
        self.m4 = _M4
        eps = 1e-12
        if (1.0 - c2).min() < -eps or (1.0 - ratio).min() < -eps or (2.0 - self.lap).min() < -eps:
            raise AssertionError("cutoff positivity constraints violated")


def weight_from_field(xi: RealField, angular_tol: float = 1e-8) -> RadialWeight:
    """Build a RadialWeight from sampled xi via spectral differentiation.

    Rejects non-radial inputs (angular variance of xi over radius bins
    beyond ``angular_tol`` relative).  Only appropriate for weights that
    are smooth across the periodic boundary, such as saturated cutoffs.
    """
    g = xi.grid
    check_radial(ComplexField(g, xi.values.astype(complex)), angular_tol)

    def ddx(vals, k):
        return np.fft.ifft2(1j * k * np.fft.fft2(vals)).real

    w = RadialWeight()
    w.grid = g
    w.d1 = ddx(xi.values, g.KX)
    w.d2 = ddx(xi.values, g.KY)
    w.d11 = ddx(w.d1, g.KX)
    w.d12 = ddx(w.d1, g.KY)
    w.d22 = ddx(w.d2, g.KY)
    w.lap = w.d11 + w.d22
    w.bilap = np.fft.ifft2(g.K2**2 * np.fft.fft2(xi.values)).real
    return w


def check_radial(u: ComplexField, tol: float = 1e-6) -> float:
    """Relative angular variance of |u| over radius bins; raises beyond tol."""
    g = u.grid
    r = np.sqrt(g.R2).ravel()
    vals = np.abs(u.values).ravel()
    dr = min(g.dx, g.dy)
    idx = np.round(r / dr).astype(np.int64)
    nbins = int(idx.max()) + 1
    counts = np.bincount(idx, minlength=nbins)
    sums = np.bincount(idx, weights=vals, minlength=nbins)
    means = sums / np.maximum(counts, 1)
    sq = np.bincount(idx, weights=(vals - means[idx]) ** 2, minlength=nbins)
    variance = float(np.sum(sq)) / max(float(np.sum(vals**2)), 1e-300)
    if variance > tol:
        raise ValueError(f"field is not radial: angular variance {variance:.3e} > {tol:.1e}")
    return variance


def virial_i(phi: ComplexField, warn_tail: bool = True) -> float:
    """Moment of inertia int |x|^2 |phi|^2 measured from the box center."""
    g = phi.grid
    if warn_tail:
        r = np.sqrt(g.R2)
        tail = quad(g, np.where(r > 0.5 * g.lx - 2.0, np.abs(phi.values) ** 2, 0.0))
        total = l2_norm_sq(phi)
        if total > 0.0 and tail > 1e-8 * total:
            warnings.warn(
                f"tail mass {tail / total:.2e} beyond r = lx/2 - 2 pollutes the "
                "|x|^2 moment",
                stacklevel=2,
            )
    return quad(g, g.R2 * np.abs(phi.values) ** 2)


def virial_v(phi: ComplexField, g: GaugeFields, xi: RadialWeight | RealField) -> float:
    """V_xi = Im int conj(phi)(D1 phi d1 xi + D2 phi d2 xi)."""
    w = weight_from_field(xi) if isinstance(xi, RealField) else xi
    d1, d2 = gradient(phi)
    cov1 = d1 + 1j * g.a1.values * phi.values
    cov2 = d2 + 1j * g.a2.values * phi.values
    integrand = (np.conj(phi.values) * (cov1 * w.d1 + cov2 * w.d2)).imag
    return quad(phi.grid, integrand)


def virial_rhs(
    phi: ComplexField, g: GaugeFields, params: ModelParams, xi: RadialWeight | RealField
) -> float:
    """Closed-form dV_xi/dt assembled from the current field and gauge."""
    w = weight_from_field(xi) if isinstance(xi, RealField) else xi
    d1, d2 = gradient(phi)
    cov1 = d1 + 1j * g.a1.values * phi.values
    cov2 = d2 + 1j * g.a2.values * phi.values
    grid = phi.grid
    t1 = 2.0 * quad(
        grid,
        np.abs(cov1) ** 2 * w.d11
        + 2.0 * (np.conj(cov1) * cov2).real * w.d12
        + np.abs(cov2) ** 2 * w.d22,
    )
    amp_p = np.abs(phi.values) ** params.p
    t2 = -params.lam * (params.p - 2.0) / params.p * quad(grid, amp_p * w.lap)
    t3 = -0.5 * quad(grid, np.abs(phi.values) ** 2 * w.bilap)
    return t1 + t2 + t3


def blowup_bound_check(
    phi: ComplexField,
    g: GaugeFields,
    params: ModelParams,
    chi: CutoffChiR,
    radial_tol: float = 1e-6,
) -> tuple[float, float]:
    """Localized-virial inequality: returns (dV/dt, explicit upper bound).

    For radial fields the derivative obeys

        dV_{chi_R}/dt <= 2 Q(phi)
            + (lambda (p-2)/p) M2 (c^(1/2) K^(1/2) / (pi R))^((p-2)/2) c
            + (M4 / 2) R^-2 c,

    with c the mass, K the covariant kinetic term, M2 = sup(2 - lap chi),
    M4 = sup |bilap chi| (profile constants), via the radial decay bound
    |phi(r)|^2 <= ||phi||_2 ||grad|phi|||_2 / (pi r) for r >= R and the
    diamagnetic inequality.
    """
    if not params.p > 2.0:
        raise ValueError("bound requires p > 2")
    check_radial(phi, radial_tol)
    lhs = virial_rhs(phi, g, params, chi)
    bd = energy_breakdown(phi, params, g)
    q = pohozaev_q(phi, params, breakdown=bd)
    c = l2_norm_sq(phi)
    k = max(bd.kinetic_cov, 0.0)
    r = chi.R
    strauss = (np.sqrt(c) * np.sqrt(k) / (np.pi * r)) ** (0.5 * (params.p - 2.0))
    slack_p = params.lam * (params.p - 2.0) / params.p * chi.m2 * strauss * c
    slack_bilap = 0.5 * chi.m4 * c / r**2
    return lhs, 2.0 * q + slack_p + slack_bilap


def bound_slack_terms(
    phi: ComplexField, params: ModelParams, chi: CutoffChiR
) -> tuple[float, float]:
    """The two R-dependent slack terms of the bound (for scaling probes)."""
    bd = energy_breakdown(phi, params)
    c = l2_norm_sq(phi)
    k = max(bd.kinetic_cov, 0.0)
    strauss = (np.sqrt(c) * np.sqrt(k) / (np.pi * chi.R)) ** (0.5 * (params.p - 2.0))
    slack_p = params.lam * (params.p - 2.0) / params.p * chi.m2 * strauss * c
    slack_bilap = 0.5 * chi.m4 * c / chi.R**2
    return slack_p, slack_bilap
