"""Linear dispersion relation for gravity-capillary waves on a sheared stream.

Everything here is closed form: the finite-depth multiplier |k|coth|k|, the
linear phase speed, the critical Bond number separating the strong and weak
surface-tension regimes, and the location of the phase-speed minimum from
which solitary waves bifurcate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import RegimeAmbiguous

# Below this |k| the coth multiplier and its derivatives switch to their even
# Taylor series; the relative matching error at the crossover is < 1e-12.
_SERIES_CUTOFF = 0.5

# Regime classification refuses to decide when |beta - beta_c| is below this.
REGIME_TOL = 1e-9


class Regime(Enum):
    STRONG_TENSION = "strong"   # beta > beta_c, bifurcation from k = 0
    WEAK_TENSION = "weak"       # beta < beta_c, bifurcation from k = k0 > 0


@dataclass(frozen=True)
class FluidParams:
    """Dimensionless vorticity and surface-tension coefficient (unit depth)."""

    omega: float
    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.omega) and math.isfinite(self.beta)):
            raise ValueError("fluid parameters must be finite")
        if self.beta <= 0.0:
            raise ValueError(f"surface-tension coefficient must be positive, got {self.beta}")


@dataclass(frozen=True)
class LinearWaveData:
    """Bifurcation data of the linear problem: carrier wavenumber and speed."""

    beta_c: float
    k0: float
    nu0: float
    regime: Regime
    gap_curvature: float  # second derivative of the gap symbol at k0


def coth_multiplier(k):
    """|k|coth|k|, the flat-water symbol of the derivative-sandwiched operator.

    Even in k, equals 1 at k = 0 (removable singularity) and grows like |k|.
    Evaluated by its Taylor series for |k| < 0.5 to avoid cancellation.
    """
    k = np.asarray(k, dtype=float)
    a = np.abs(k)
    small = a < _SERIES_CUTOFF
    k2 = np.where(small, k * k, 0.0)
    series = 1.0 + k2 / 3.0 - k2 * k2 / 45.0 + 2.0 * k2 ** 3 / 945.0
    safe = np.where(small, 1.0, a)
    direct = safe / np.tanh(safe)
    out = np.where(small, series, direct)
    return out if out.ndim else float(out)


def coth_multiplier_d1(k):
    """First derivative of the coth multiplier (odd in k)."""
    k = np.asarray(k, dtype=float)
    a = np.abs(k)
    small = a < _SERIES_CUTOFF
    k2 = np.where(small, k * k, 0.0)
    series = k * (2.0 / 3.0 - 4.0 * k2 / 45.0 + 4.0 * k2 * k2 / 315.0)
    safe = np.where(small, 1.0, a)
    direct = np.sign(k) * (1.0 / np.tanh(safe) - safe / np.sinh(safe) ** 2)
    out = np.where(small, series, direct)
    return out if out.ndim else float(out)


def coth_multiplier_d2(k):
    """Second derivative of the coth multiplier (even in k)."""
    k = np.asarray(k, dtype=float)
    a = np.abs(k)
    small = a < _SERIES_CUTOFF
    k2 = np.where(small, k * k, 0.0)
    series = 2.0 / 3.0 - 4.0 * k2 / 15.0 + 4.0 * k2 * k2 / 63.0
    safe = np.where(small, 1.0, a)
    direct = 2.0 * (safe / np.tanh(safe) - 1.0) / np.sinh(safe) ** 2
    out = np.where(small, series, direct)
    return out if out.ndim else float(out)


def phase_speed(k, params: FluidParams):
    """Positive root nu of 1 + beta k^2 - omega nu - nu^2 f(k) = 0."""
    f = coth_multiplier(k)
    w = params.omega
    k = np.asarray(k, dtype=float)
    out = -w / (2.0 * f) + 0.5 * np.sqrt(w * w / f ** 2 + 4.0 * (1.0 + params.beta * k * k) / f)
    return out if out.ndim else float(out)


def phase_speed_d1(k, params: FluidParams):
    """d(nu)/dk by implicit differentiation of the dispersion identity."""
    nu = phase_speed(k, params)
    f = coth_multiplier(k)
    fp = coth_multiplier_d1(k)
    k = np.asarray(k, dtype=float)
    out = (2.0 * params.beta * k - nu * nu * fp) / (params.omega + 2.0 * nu * f)
    return out if out.ndim else float(out)


def critical_bond_number(omega: float) -> float:
    """Bond number at which the phase-speed minimum leaves k = 0.

    Always in (0, 1/3], equal to 1/3 at zero vorticity and decreasing to 0
    as omega -> +inf.
    """
    r = math.sqrt(omega * omega + 4.0)
    return (omega * omega + 2.0 - omega * r) / 6.0


def dispersion_gap(k, lw: LinearWaveData, params: FluidParams):
    """Gap symbol 1 + beta k^2 - omega nu0 - nu0^2 f(k).

    Nonnegative for all k, vanishing exactly at the carrier wavenumbers +-k0.
    """
    k = np.asarray(k, dtype=float)
    out = (1.0 + params.beta * k * k - params.omega * lw.nu0
           - lw.nu0 ** 2 * coth_multiplier(k))
    return out if out.ndim else float(out)


def _golden_min(fn, a, b, tol=1e-12):
    """Golden-section minimization of a unimodal function on [a, b]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    while (b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def _newton_step_on_slope(k, params: FluidParams) -> float:
    """One Newton update for the root of nu'(k)."""
    nu = phase_speed(k, params)
    f = coth_multiplier(k)
    fp = coth_multiplier_d1(k)
    fpp = coth_multiplier_d2(k)
    denom = params.omega + 2.0 * nu * f
    nup = (2.0 * params.beta * k - nu * nu * fp) / denom
    nupp = (2.0 * params.beta - 2.0 * nup * nup * f - 4.0 * nu * nup * fp - nu * nu * fpp) / denom
    if nupp <= 0.0:
        return k
    step = k - nup / nupp
    return step if step > 0.0 else k


def solve_bifurcation(params: FluidParams) -> LinearWaveData:
    """Locate the global phase-speed minimum and classify the regime.

    Raises RegimeAmbiguous when beta is within REGIME_TOL of the critical
    Bond number, where the minimum degenerates.
    """
    beta_c = critical_bond_number(params.omega)
    if abs(params.beta - beta_c) < REGIME_TOL:
        raise RegimeAmbiguous(
            f"beta={params.beta} within {REGIME_TOL} of beta_c={beta_c}")

    if params.beta > beta_c:
        nu0 = 0.5 * (-params.omega + math.sqrt(params.omega ** 2 + 4.0))
        lw = LinearWaveData(beta_c=beta_c, k0=0.0, nu0=nu0,
                            regime=Regime.STRONG_TENSION, gap_curvature=0.0)
        curv = 2.0 * params.beta - nu0 * nu0 * coth_multiplier_d2(0.0)
        return LinearWaveData(beta_c, 0.0, nu0, Regime.STRONG_TENSION, curv)

    # Weak surface tension: bracket the interior minimum on a coarse scan,
    # refine by golden section, then polish with one Newton step.
    ks = np.arange(0.01, 20.0 + 0.01, 0.01)
    nus = phase_speed(ks, params)
    i = int(np.argmin(nus))
    lo = ks[max(i - 1, 0)]
    hi = ks[min(i + 1, len(ks) - 1)]
    k0 = _golden_min(lambda k: phase_speed(k, params), lo, hi, tol=1e-12)
    k0 = _newton_step_on_slope(k0, params)
    nu0 = phase_speed(k0, params)
    curv = 2.0 * params.beta - nu0 * nu0 * coth_multiplier_d2(k0)
    return LinearWaveData(beta_c, float(k0), float(nu0), Regime.WEAK_TENSION, float(curv))
