"""Self-contained validation suite: operator identities, gradients, models.

Each check returns a measured number and its tolerance so the report is a
plain table; the suite doubles as the engine behind `gcwaves validate` and
is exercised again (with the same tolerances) by the test suite.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .dispersion import (
    FluidParams,
    coth_multiplier,
    critical_bond_number,
    dispersion_gap,
    phase_speed,
    solve_bifurcation,
)
from .functionals import (
    eval_functionals,
    eval_parts,
    reduced_energy,
    reduced_energy_with_gradient,
)
from .grid import PeriodicGrid, SurfaceProfile, band_limited_profile
from .minimizer import EnvelopeProfile, align_distance
from .model_asymptotics import (
    certify_focusing,
    interaction_coefficients,
    kdv_data,
    nls_data,
    variational_test_profile,
)
from .strip_operators import (
    apply_coth_multiplier,
    build_Q,
    dn_apply,
    k_apply,
    k_series,
    nd_apply,
)


@dataclass
class Check:
    name: str
    measured: float
    tolerance: float
    passed: bool
    seconds: float = 0.0
    note: str = ""


def _check(name, measured, tolerance, t0, note="", larger_is_better=False):
    ok = measured >= tolerance if larger_is_better else measured <= tolerance
    return Check(name, float(measured), float(tolerance), bool(ok),
                 time.time() - t0, note)


def flat_symbol_error(grid: PeriodicGrid, symbol_perturbation: float = 0.0) -> float:
    """Worst per-mode relative error of the flat-water operators vs symbols.

    symbol_perturbation scales the reference multiplier; a nonzero value is
    the injected fault for the suite's sensitivity self-test.
    """
    eta0 = SurfaceProfile.zero(grid)
    k = grid.wavenumbers
    n_half = grid.n_modes // 2
    rng = np.random.default_rng(1234)
    c = np.zeros(n_half + 1, dtype=complex)
    c[1:n_half] = rng.standard_normal(n_half - 1) + 1j * rng.standard_normal(n_half - 1)
    zeta = SurfaceProfile.from_coeffs(grid, c)

    ref = coth_multiplier(k) * (1.0 + symbol_perturbation)
    out = k_apply(eta0, zeta).coeffs
    err_k = np.max(np.abs(out[1:n_half] - ref[1:n_half] * c[1:n_half])
                   / np.abs(c[1:n_half]))

    dn_ref = k * np.tanh(k) * (1.0 + symbol_perturbation)
    out_dn = dn_apply(eta0, zeta).coeffs
    err_dn = np.max(np.abs(out_dn[1:n_half] - dn_ref[1:n_half] * c[1:n_half])
                    / np.abs(c[1:n_half]))

    kap = SurfaceProfile.from_coeffs(grid, np.where(np.arange(n_half + 1) == 0, 0, c))
    nd_ref = np.ones_like(k)
    nd_ref[1:] = 1.0 / (k[1:] * np.tanh(k[1:])) * (1.0 + symbol_perturbation)
    out_nd = nd_apply(eta0, kap).coeffs
    err_nd = np.max(np.abs(out_nd[1:n_half] - nd_ref[1:n_half] * c[1:n_half])
                    / np.abs(c[1:n_half]))
    return float(max(err_k, err_dn, err_nd))


def run_validation(seed: int = 0, grid: PeriodicGrid | None = None) -> list[Check]:
    checks: list[Check] = []
    rng = np.random.default_rng(seed)
    g = grid or PeriodicGrid(np.pi, 256, 48)
    dx = g.dx

    # 1. flat-strip symbols
    t0 = time.time()
    checks.append(_check("flat_strip_symbols", flat_symbol_error(g), 1e-10, t0))

    # sensitivity self-test: a 1e-3 multiplier fault must trip the check above
    t0 = time.time()
    fault = flat_symbol_error(g, symbol_perturbation=1e-3)
    checks.append(_check("fault_injection_detected", fault, 1e-10, t0,
                         note="perturbed multiplier must fail the symbol check",
                         larger_is_better=True))

    # 2. operator algebra on random profiles
    t0 = time.time()
    sym_err = 0.0
    inv_err = 0.0
    min_quad = math.inf
    for _ in range(20):
        eta = band_limited_profile(g, rng, 0.3)
        z1 = band_limited_profile(g, rng, 1.0, m_max=12)
        z2 = band_limited_profile(g, rng, 1.0, m_max=12)
        gz1, gz2 = dn_apply(eta, z1), dn_apply(eta, z2)
        s12 = np.sum(z2.values * gz1.values) * dx
        s21 = np.sum(z1.values * gz2.values) * dx
        sym_err = max(sym_err, abs(s12 - s21) / max(abs(s12), 1e-30))
        kz = k_apply(eta, z1)
        quad = np.sum(z1.values * kz.values) * dx
        min_quad = min(min_quad, quad / z1.norm_sobolev(0.5) ** 2)
        kap = SurfaceProfile(g, z2.values - z2.values.mean())
        back = dn_apply(eta, nd_apply(eta, kap))
        inv_err = max(inv_err, float(np.linalg.norm(back.values - kap.values)
                                     / np.linalg.norm(kap.values)))
    checks.append(_check("bilinear_form_symmetry", sym_err, 1e-10, t0))
    checks.append(_check("inverse_consistency", inv_err, 1e-8, t0))
    checks.append(_check("k_form_coercivity", min_quad, 1e-3, t0,
                         note="smallest <z,Kz>/|z|_{1/2}^2 over 20 samples",
                         larger_is_better=True))

    # 3. series expansion: slope and first-order closed form
    t0 = time.time()
    eta = band_limited_profile(g, rng, 1.0, m_max=8)
    zeta = band_limited_profile(g, rng, 1.0, m_max=8)
    zeta = SurfaceProfile(g, zeta.values - zeta.values.mean())
    terms = k_series(eta, zeta, 3)
    eps_list = np.geomspace(1e-3, 1e-1, 7)
    errs = []
    for eps in eps_list:
        full = k_apply(SurfaceProfile(g, eps * eta.values), zeta)
        approx = sum(eps ** j * t.values for j, t in enumerate(terms))
        errs.append(np.linalg.norm(full.values - approx) * math.sqrt(dx))
    errs = np.array(errs)
    mask = errs > 1e-13
    slope = float(np.polyfit(np.log(eps_list[mask]), np.log(errs[mask]), 1)[0])
    checks.append(_check("k_series_slope", slope, 3.7, t0, larger_is_better=True))

    t0 = time.time()
    first = k_series(eta, eta, 1)[1]
    k0e = apply_coth_multiplier(eta)
    closed = (-apply_coth_multiplier(SurfaceProfile(g, eta.values * k0e.values)).values
              - SurfaceProfile(g, eta.derivative().values * eta.values).derivative().values)
    checks.append(_check("k_first_order_closed_form",
                         float(np.max(np.abs(first.values - closed))), 1e-8, t0))

    # 4. gradient correctness (Richardson finite differences)
    t0 = time.time()
    worst = 0.0
    params = FluidParams(0.8, 0.4)
    mu = 0.01
    for _ in range(5):
        base = band_limited_profile(g, rng, 0.12, m_max=10)
        _, gradj = reduced_energy_with_gradient(mu, base, params)
        for _ in range(2):
            w = band_limited_profile(g, rng, 0.05, m_max=12)
            h = 1e-5

            def val(t):
                return reduced_energy(mu, SurfaceProfile(g, base.values + t * w.values),
                                      params).objective

            d1 = (val(h) - val(-h)) / (2 * h)
            d2 = (val(h / 2) - val(-h / 2)) / h
            deriv = (4 * d2 - d1) / 3
            analytic = np.sum(gradj.values * w.values) * dx
            worst = max(worst, abs(deriv - analytic) / max(abs(analytic), 1e-14))
    checks.append(_check("objective_gradient_fd", worst, 1e-6, t0))

    # 5. quadratic-form identity
    t0 = time.time()
    lw = solve_bifurcation(params)
    worst = 0.0
    for _ in range(20):
        eta = band_limited_profile(g, rng, 0.2)
        parts = eval_parts(eta, params)
        lhs = parts.potential2 + 2 * lw.nu0 * parts.coupling2 - lw.nu0 ** 2 * parts.kinetic2
        rhs = 0.5 * eta.spectral_sum(dispersion_gap(g.wavenumbers, lw, params))
        worst = max(worst, abs(lhs - rhs))
    checks.append(_check("quadratic_form_identity", worst, 1e-10, t0))

    # 6. model solitons
    t0 = time.time()
    worst = 0.0
    for w_vort, beta in [(0.0, 2.0), (1.0, 2.0), (0.5, 0.8), (2.0, 1.5)]:
        pp = FluidParams(w_vort, beta)
        lww = solve_bifurcation(pp)
        sol = kdv_data(pp, lww)
        xs = np.linspace(-80.0 / sol.decay / 10, 80.0 / sol.decay / 10, 200001)
        dxs = xs[1] - xs[0]
        worst = max(worst,
                    abs(sol.mass_on(xs, dxs) - 2 * sol.mass_constant),
                    float(np.max(np.abs(sol.ode_residual(xs)))),
                    abs(sol.energy_on(xs, dxs) - sol.energy_min))
    pp = FluidParams(0.0, 0.2)
    lww = solve_bifurcation(pp)
    coeffs, _ = interaction_coefficients(pp, lww)
    soln = nls_data(pp, lww, coeffs)
    xs = np.linspace(-40.0 / soln.decay, 40.0 / soln.decay, 200001)
    dxs = xs[1] - xs[0]
    worst = max(worst,
                abs(soln.mass_on(xs, dxs) - 2 * soln.mass_constant),
                float(np.max(np.abs(soln.ode_residual(xs)))),
                abs(soln.energy_on(xs, dxs) - soln.energy_min))
    checks.append(_check("model_soliton_invariants", worst, 1e-8, t0))

    t0 = time.time()
    c_closed = -(9.0 / 5.0) * (2.0 / 3.0) ** (1.0 / 3.0) / ((5.0 / 3.0) ** (1.0 / 3.0) * 4.0 ** (5.0 / 6.0))
    c_lib = kdv_data(FluidParams(0.0, 2.0), solve_bifurcation(FluidParams(0.0, 2.0))).energy_min
    checks.append(_check("kdv_energy_reference_value", abs(c_lib - c_closed), 1e-10, t0))

    # 7. focusing certification
    t0 = time.time()
    rep = certify_focusing(np.arange(-5.0, 5.0 + 0.25, 0.5),
                           np.arange(0.05, 0.951, 0.05))
    checks.append(_check("focusing_margin_negative", rep.min_margin, 0.0, t0,
                         note=f"argmin at omega={rep.argmin[0]}, beta={rep.argmin[1]:.4f}"))
    checks.append(_check("focusing_roundtrip", rep.max_roundtrip_error, 1e-9, t0))

    # 8. variational upper bound, strong regime
    t0 = time.time()
    pp = FluidParams(0.0, 2.0)
    lww = solve_bifurcation(pp)
    sol = kdv_data(pp, lww)
    mu = 5e-3
    rate = 2.0 * sol.decay * mu ** (1.0 / 3.0)
    gg = PeriodicGrid(max(28.0 / rate, 40.0), 512, 48)
    tp = variational_test_profile(mu, pp, lww, gg)
    excess = reduced_energy(mu, tp.eta, pp).objective - 2.0 * lww.nu0 * mu
    ratio = excess / (sol.energy_min * mu ** (5.0 / 3.0))
    checks.append(_check("variational_bound_strong", abs(ratio - 1.0), 0.10, t0))

    # 12. pseudolocality of the nonlocal functionals
    t0 = time.time()
    worst_rel = 0.0
    improvement = []
    for ratio_sep in (8.0, 16.0):
        defect = _pseudolocality_defect(ratio_sep)
        improvement.append(defect)
        if ratio_sep == 8.0:
            worst_rel = defect
    checks.append(_check("pseudolocality_split", worst_rel, 1e-4, t0,
                         note="two-bump splitting defect at separation ratio 8"))
    checks.append(_check("pseudolocality_decay",
                         improvement[1], improvement[0], t0,
                         note="defect decreases from ratio 8 to 16"))

    # alignment sanity: exact shift recovery
    t0 = time.time()
    env = EnvelopeProfile(20.0, np.cosh(np.linspace(-20, 20, 256, endpoint=False)) ** -2.0)
    shifted = EnvelopeProfile(20.0, np.roll(env.values, 5))
    checks.append(_check("alignment_shift_recovery",
                         align_distance(env, shifted, "translate"), 1e-10, t0))
    return checks


def _bump(x, center, radius):
    """Smooth compactly supported bump on |x - center| < radius."""
    u = (x - center) / radius
    out = np.zeros_like(x)
    inside = np.abs(u) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
    return out


def _pseudolocality_defect(sep_ratio: float) -> float:
    """Relative splitting defect of the nonlocal functionals for two bumps."""
    radius = 2.0
    sep = sep_ratio * radius
    half_length = 4.0 * sep
    g = PeriodicGrid(half_length, 1024, 48)
    params = FluidParams(1.0, 2.0)
    amp = 0.15
    eta1 = SurfaceProfile(g, amp * _bump(g.x, 0.0, radius))
    eta2 = SurfaceProfile(g, amp * _bump(g.x, sep + 4.0 * radius, 3.0 * radius))
    both = SurfaceProfile(g, eta1.values + eta2.values)
    v1 = eval_functionals(eta1, params)
    v2 = eval_functionals(eta2, params)
    v12 = eval_functionals(both, params)
    worst = 0.0
    for name in ("coupling", "kinetic"):
        split = getattr(v12, name) - getattr(v1, name) - getattr(v2, name)
        worst = max(worst, abs(split) / abs(getattr(v1, name)))
    return worst


def format_report(checks: list[Check]) -> str:
    lines = []
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        lines.append(f"{status}  {c.name:32s} measured={c.measured:.6e} "
                     f"tol={c.tolerance:.6e} ({c.seconds:.1f}s)"
                     + (f"  [{c.note}]" if c.note else ""))
    n_fail = sum(not c.passed for c in checks)
    lines.append(f"{len(checks) - n_fail}/{len(checks)} checks passed")
    return "\n".join(lines)
