"""Variational functionals of the surface profile and their L2 gradients.

The reduced wave energy at momentum 2*mu is

    J_mu(eta) = potential(eta) + (mu + coupling(eta))^2 / kinetic(eta),

where `potential` collects gravity, capillarity and the vorticity-squared
corrections, `coupling` is the linear-in-vorticity momentum coupling, and
`kinetic` is the quadratic form of the derivative-sandwiched operator.  The
wave speed is the constraint multiplier (mu + coupling)/kinetic.  Gradients
are assembled from the boundary form of the strip solves and are the exact
gradients of the discretized functionals (finite differences agree to
roundoff-limited accuracy).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dispersion import FluidParams
from .errors import ZeroProfile
from .grid import PeriodicGrid, SurfaceProfile
from .strip_operators import (
    apply_coth_multiplier,
    dn_apply,
    hprime_form,
    k_apply_with_form,
    nd_apply,
)


def _quad(grid: PeriodicGrid, vals: np.ndarray) -> float:
    """Trapezoid rule on the periodic box, compensated summation."""
    return math.fsum(vals) * grid.dx


@dataclass(frozen=True)
class FunctionalValues:
    coupling: float   # vanishes identically at zero vorticity
    potential: float
    kinetic: float


@dataclass(frozen=True)
class HomogeneousParts:
    """Quadratic/cubic/quartic homogeneous parts (flat-multiplier formulas)."""

    coupling2: float
    potential2: float
    kinetic2: float
    coupling3: float
    potential3: float
    kinetic3: float
    coupling4: float
    potential4: float
    kinetic4: float


@dataclass
class FunctionalBundle:
    coupling: float
    potential: float
    kinetic: float
    objective: float
    speed: float
    mu: float
    parts: Optional[HomogeneousParts] = None
    nonlinear_rest: Optional[float] = None  # objective minus its quadratic model


@dataclass
class WaveState:
    """Surface profile with the reconstructed potential trace at momentum 2*mu."""

    eta: SurfaceProfile
    trace: SurfaceProfile
    mu: float
    trace_flux: Optional[SurfaceProfile] = None  # known Dirichlet-Neumann image
    speed: Optional[float] = None                # multiplier used to build the trace


def _mean_cell_form(eta: SurfaceProfile, a: SurfaceProfile, b: SurfaceProfile) -> float:
    """Mean-cell part of <a, K(eta) b>: the k = 0 quadrature cell of the line form."""
    two_l = 2.0 * eta.grid.half_length
    k0eta = apply_coth_multiplier(eta).values
    return (two_l * a.mean() * b.mean() * (1.0 + eta.mean())
            - b.mean() * _quad(eta.grid, a.values * k0eta)
            - a.mean() * _quad(eta.grid, eta.values * apply_coth_multiplier(b).values))


# ---------------------------------------------------------------------------
# Values and gradients of the three base functionals
# ---------------------------------------------------------------------------

def _base_solves(eta: SurfaceProfile, params: FluidParams):
    """Shared strip solves: K(eta) eta always, K(eta) eta^2 when omega != 0."""
    k_eta, sol_a = k_apply_with_form(eta, eta)
    if params.omega == 0.0:
        return k_eta, sol_a, None, None
    eta_sq = SurfaceProfile(eta.grid, eta.values ** 2)
    k_eta_sq, sol_b = k_apply_with_form(eta, eta_sq)
    return k_eta, sol_a, k_eta_sq, sol_b


def eval_functionals(eta: SurfaceProfile, params: FluidParams) -> FunctionalValues:
    eta.require_admissible()
    k_eta, _, k_eta_sq, _ = _base_solves(eta, params)
    return _values_from_solves(eta, params, k_eta, k_eta_sq)


def _values_from_solves(eta, params, k_eta, k_eta_sq) -> FunctionalValues:
    g = eta.grid
    w = params.omega
    ev = eta.values
    dev = eta.derivative().values
    kinetic = 0.5 * _quad(g, ev * k_eta.values)
    potential = _quad(g, 0.5 * ev ** 2 + params.beta * (np.sqrt(1.0 + dev ** 2) - 1.0))
    if w == 0.0:
        return FunctionalValues(0.0, potential, kinetic)
    coupling = 0.25 * w * _quad(g, ev ** 2 * k_eta.values) - 0.25 * w * _quad(g, ev ** 2)
    potential += (-(w ** 2) / 8.0 * _quad(g, ev ** 2 * k_eta_sq.values)
                  + w ** 2 / 6.0 * _quad(g, ev ** 3))
    return FunctionalValues(coupling, potential, kinetic)


def eval_gradients(eta: SurfaceProfile, params: FluidParams):
    """L2 gradients of (coupling, potential, kinetic) at eta."""
    eta.require_admissible()
    k_eta, sol_a, k_eta_sq, sol_b = _base_solves(eta, params)
    return _gradients_from_solves(eta, params, k_eta, sol_a, k_eta_sq, sol_b)


def _gradients_from_solves(eta, params, k_eta, sol_a, k_eta_sq, sol_b):
    g = eta.grid
    w = params.omega
    ev = eta.values
    dev = eta.derivative().values

    hp_aa = hprime_form(eta, eta, eta, sol1=sol_a, sol2=sol_a)
    grad_kin = SurfaceProfile(g, 0.5 * hp_aa.values + k_eta.values)

    curvature = SurfaceProfile(g, dev / np.sqrt(1.0 + dev ** 2)).derivative().values
    pot_vals = ev - params.beta * curvature
    if w == 0.0:
        return SurfaceProfile.zero(g), SurfaceProfile(g, pot_vals), grad_kin

    eta_sq = SurfaceProfile(g, ev ** 2)
    hp_ba = hprime_form(eta, eta_sq, eta, sol1=sol_b, sol2=sol_a)
    hp_bb = hprime_form(eta, eta_sq, eta_sq, sol1=sol_b, sol2=sol_b)

    grad_cpl = SurfaceProfile(g, 0.25 * w * hp_ba.values + 0.25 * w * k_eta_sq.values
                              + 0.5 * w * ev * k_eta.values - 0.5 * w * ev)
    # Product rule: the operator term differentiates to eta * K(eta) eta^2 and
    # the cubic term to (omega^2/2) eta^2; finite differences confirm both.
    pot_vals = (pot_vals - w ** 2 / 8.0 * hp_bb.values
                - 0.5 * w ** 2 * ev * k_eta_sq.values + 0.5 * w ** 2 * ev ** 2)
    return grad_cpl, SurfaceProfile(g, pot_vals), grad_kin


# ---------------------------------------------------------------------------
# Homogeneous parts (flat-multiplier formulas; exact polynomial homogeneity)
# ---------------------------------------------------------------------------

def eval_parts(eta: SurfaceProfile, params: FluidParams) -> HomogeneousParts:
    g = eta.grid
    w = params.omega
    ev = eta.values
    dev = eta.derivative().values
    d2ev = eta.derivative(2).values
    k0e = apply_coth_multiplier(eta).values
    k0_esq = apply_coth_multiplier(SurfaceProfile(g, ev ** 2)).values
    k0_ek0e = apply_coth_multiplier(SurfaceProfile(g, ev * k0e)).values

    coupling2 = -0.25 * w * _quad(g, ev ** 2)
    potential2 = _quad(g, 0.5 * ev ** 2 + 0.5 * params.beta * dev ** 2)
    kinetic2 = 0.5 * _quad(g, ev * k0e)

    coupling3 = 0.25 * w * _quad(g, ev ** 2 * k0e)
    potential3 = w ** 2 / 6.0 * _quad(g, ev ** 3)
    kinetic3 = 0.5 * _quad(g, -(k0e ** 2) * ev + dev ** 2 * ev)

    coupling4 = 0.5 * w * _quad(g, ev ** 2 * dev ** 2) - 0.25 * w * _quad(g, ev ** 2 * k0_ek0e)
    potential4 = (-params.beta / 8.0 * _quad(g, dev ** 4)
                  - w ** 2 / 8.0 * _quad(g, ev ** 2 * k0_esq))
    kinetic4 = 0.5 * _quad(g, k0_ek0e * ev * k0e + k0e * ev ** 2 * d2ev)

    return HomogeneousParts(coupling2, potential2, kinetic2,
                            coupling3, potential3, kinetic3,
                            coupling4, potential4, kinetic4)


def cubic_part_gradients(eta: SurfaceProfile, params: FluidParams):
    """Gradients of the cubic homogeneous parts (Euler-identity checks)."""
    g = eta.grid
    w = params.omega
    ev = eta.values
    dev = eta.derivative().values
    d2ev = eta.derivative(2).values
    k0e = apply_coth_multiplier(eta).values
    gc3 = SurfaceProfile(g, 0.25 * w * apply_coth_multiplier(
        SurfaceProfile(g, ev ** 2)).values + 0.5 * w * ev * k0e)
    gp3 = SurfaceProfile(g, 0.5 * w ** 2 * ev ** 2)
    gk3 = SurfaceProfile(g, -apply_coth_multiplier(SurfaceProfile(g, ev * k0e)).values
                         - 0.5 * k0e ** 2 - 0.5 * dev ** 2 - d2ev * ev)
    return gc3, gp3, gk3


# ---------------------------------------------------------------------------
# Reduced energy, its gradient, and the trace reconstruction
# ---------------------------------------------------------------------------

def _require_nonzero(eta: SurfaceProfile):
    if not np.any(eta.values):
        raise ZeroProfile("reduced energy undefined at the zero profile")


def reduced_energy(mu: float, eta: SurfaceProfile, params: FluidParams,
                   with_parts: bool = False) -> FunctionalBundle:
    _require_nonzero(eta)
    vals = eval_functionals(eta, params)
    return _bundle_from_values(mu, eta, params, vals, with_parts)


def _bundle_from_values(mu, eta, params, vals: FunctionalValues,
                        with_parts: bool) -> FunctionalBundle:
    speed = (mu + vals.coupling) / vals.kinetic
    objective = vals.potential + (mu + vals.coupling) * speed
    bundle = FunctionalBundle(vals.coupling, vals.potential, vals.kinetic,
                              objective, speed, mu)
    if with_parts:
        p = eval_parts(eta, params)
        bundle.parts = p
        quadratic_model = p.potential2 + (mu + p.coupling2) ** 2 / p.kinetic2
        bundle.nonlinear_rest = objective - quadratic_model
    return bundle


def reduced_energy_gradient(mu: float, eta: SurfaceProfile,
                            params: FluidParams) -> SurfaceProfile:
    _, grad = reduced_energy_with_gradient(mu, eta, params)
    return grad


def reduced_energy_with_gradient(mu: float, eta: SurfaceProfile, params: FluidParams,
                                 with_parts: bool = False):
    """Objective bundle and its L2 gradient from one set of strip solves."""
    _require_nonzero(eta)
    eta.require_admissible()
    k_eta, sol_a, k_eta_sq, sol_b = _base_solves(eta, params)
    vals = _values_from_solves(eta, params, k_eta, k_eta_sq)
    bundle = _bundle_from_values(mu, eta, params, vals, with_parts)
    gc, gp, gk = _gradients_from_solves(eta, params, k_eta, sol_a, k_eta_sq, sol_b)
    nu = bundle.speed
    grad = SurfaceProfile(eta.grid, gp.values + 2.0 * nu * gc.values - nu ** 2 * gk.values)
    return bundle, grad


def reconstruct_trace(mu: float, eta: SurfaceProfile, params: FluidParams) -> WaveState:
    """Potential trace of the constrained problem at momentum 2*mu.

    The trace solves the Neumann problem with data nu*eta' - (omega/2)(eta^2)',
    so its Dirichlet-Neumann image is that data exactly.
    """
    _require_nonzero(eta)
    bundle = reduced_energy(mu, eta, params)
    data = SurfaceProfile(eta.grid,
                          bundle.speed * eta.derivative().values
                          - 0.5 * params.omega * SurfaceProfile(
                              eta.grid, eta.values ** 2).derivative().values)
    trace = nd_apply(eta, data)
    return WaveState(eta=eta, trace=trace, mu=mu, trace_flux=data, speed=bundle.speed)


def eval_energy_momentum(state: WaveState, params: FluidParams):
    """Total wave energy and horizontal momentum of (eta, trace).

    For reconstructed traces (speed set), the k = 0 quadrature cells of the
    line pairings are restored, consistently with the completed operator K;
    the identities momentum = 2*mu and energy = J_mu(eta) then hold to solver
    accuracy.  For generic states the plain box values are returned.
    """
    g = state.eta.grid
    eta = state.eta
    ev = eta.values
    dev = eta.derivative().values
    xv = state.trace.values
    flux = state.trace_flux if state.trace_flux is not None else dn_apply(eta, state.trace)
    w = params.omega
    energy = _quad(g, 0.5 * xv * flux.values + w * xv * ev * dev
                   + w ** 2 / 6.0 * ev ** 3 + 0.5 * ev ** 2
                   + params.beta * (np.sqrt(1.0 + dev ** 2) - 1.0))
    momentum = _quad(g, xv * dev + 0.5 * w * ev ** 2)
    if state.speed is not None:
        nu = state.speed
        eta_sq = SurfaceProfile(g, ev ** 2)
        cell_ee = _mean_cell_form(eta, eta, eta)
        momentum += nu * cell_ee - 0.5 * w * _mean_cell_form(eta, eta_sq, eta)
        energy += 0.5 * nu ** 2 * cell_ee - w ** 2 / 8.0 * _mean_cell_form(eta, eta_sq, eta_sq)
    return energy, momentum


def weighted_norm(eta: SurfaceProfile, alpha: float, mu: float, k0: float) -> float:
    """Carrier-concentration diagnostic norm with weight 1 + mu^(-4a)(|k|-k0)^4."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    k = eta.grid.wavenumbers
    weight = 1.0 + mu ** (-4.0 * alpha) * (np.abs(k) - k0) ** 4
    return float(np.sqrt(eta.spectral_sum(weight)))
