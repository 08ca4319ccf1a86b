"""Experiment orchestration: grids, sweeps, persistence, validation tables.

A sweep minimizes the reduced energy over a descending momentum list,
post-processes each minimizer (envelope extraction, alignment against the
model soliton, speed and energy defects) and appends one row per momentum
to CSV/JSON outputs, flushing after every row.  Outputs are deterministic
given the configuration and seed.
"""

from __future__ import annotations

import concurrent.futures
import configparser
import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .dispersion import (
    FluidParams,
    LinearWaveData,
    Regime,
    coth_multiplier,
    dispersion_gap,
    phase_speed,
    solve_bifurcation,
)
from .errors import CollapsedToZero, GCWavesError, WrongRegime
from .functionals import (
    reconstruct_trace,
    reduced_energy,
    eval_energy_momentum,
)
from .grid import PeriodicGrid, SurfaceProfile
from .minimizer import (
    EnvelopeProfile,
    MinimizeConfig,
    MinimizerResult,
    PenaltyConfig,
    align_distance,
    extract_envelope,
    minimize_reduced_energy,
)
from .model_asymptotics import (
    KdvSoliton,
    NlsSoliton,
    interaction_coefficients,
    kdv_data,
    nls_data,
    variational_test_profile,
)

OUTDIR_ENV = "GCWAVES_OUTDIR"
CSV_FMT = "%.17g"


# ---------------------------------------------------------------------------
# Model context and grid sizing
# ---------------------------------------------------------------------------

@dataclass
class ModelContext:
    """Regime-resolved constants shared by sweep rows."""

    params: FluidParams
    lw: LinearWaveData
    kdv: Optional[KdvSoliton] = None
    nls: Optional[NlsSoliton] = None

    @classmethod
    def resolve(cls, params: FluidParams) -> "ModelContext":
        lw = solve_bifurcation(params)
        if lw.regime is Regime.STRONG_TENSION:
            return cls(params, lw, kdv=kdv_data(params, lw))
        coeffs, _ = interaction_coefficients(params, lw)
        return cls(params, lw, nls=nls_data(params, lw, coeffs))

    @property
    def strong(self) -> bool:
        return self.lw.regime is Regime.STRONG_TENSION

    def decay_rate(self, mu: float) -> float:
        """Spatial decay rate of the model solitary wave at momentum 2*mu."""
        if self.strong:
            return 2.0 * self.kdv.decay * mu ** (1.0 / 3.0)
        return self.nls.decay * mu

    def objective_exponent(self) -> float:
        return 5.0 / 3.0 if self.strong else 3.0

    def speed_exponent(self) -> float:
        return 2.0 / 3.0 if self.strong else 2.0

    def objective_constant(self) -> float:
        return self.kdv.energy_min if self.strong else self.nls.energy_min

    def speed_constant(self) -> float:
        if self.strong:
            w = self.params.omega
            return 2.0 / math.sqrt(w * w + 4.0) * self.kdv.nu
        f0 = coth_multiplier(self.lw.k0)
        return 4.0 / (self.params.omega + 2.0 * self.lw.nu0 * f0) * self.nls.nu

    def envelope_mass_target(self) -> float:
        return 2.0 * (self.kdv.mass_constant if self.strong else self.nls.mass_constant)

    def default_delta0(self) -> float:
        return 1.0 if self.strong else self.lw.k0 / 4.0

    def envelope_reference(self, env: EnvelopeProfile) -> EnvelopeProfile:
        if self.strong:
            return EnvelopeProfile(env.half_length, self.kdv.profile(env.x))
        return EnvelopeProfile(env.half_length, self.nls.profile(env.x).astype(complex))

    def align_mode(self) -> str:
        return "translate" if self.strong else "translate_rotate"


def suggest_grid(ctx: ModelContext, mu_min: float,
                 n_modes: Optional[int] = None, n_layers: int = 48) -> PeriodicGrid:
    """Box sized so the slowest profile decays below ~1e-12 of its peak.

    The half-length is four soliton widths (width = seven e-foldings of the
    model decay rate at the smallest momentum) and at least twenty carrier
    wavelengths in the weak regime; the mode count keeps the Nyquist
    wavenumber above five carrier harmonics.
    """
    rate = ctx.decay_rate(mu_min)
    half_length = max(4.0 * 7.0 / rate, 40.0)
    k_need = 3.0
    if not ctx.strong:
        k0 = ctx.lw.k0
        half_length = max(half_length, 20.0 * 2.0 * math.pi / k0)
        # land the carrier exactly on the wavenumber lattice
        half_length = math.ceil(half_length * k0 / math.pi) * math.pi / k0
        k_need = 5.0 * k0
    if n_modes is None:
        n_modes = 512
        while math.pi * n_modes / (2.0 * half_length) < k_need:
            n_modes *= 2
    return PeriodicGrid(half_length, n_modes, n_layers)


# ---------------------------------------------------------------------------
# Sweep specification and rows
# ---------------------------------------------------------------------------

@dataclass
class SweepSpec:
    params: FluidParams
    mu_list: list
    grid: PeriodicGrid
    delta0: Optional[float] = None
    minimize: MinimizeConfig = None           # mu is filled per row
    penalty: PenaltyConfig = field(default_factory=PenaltyConfig)
    continuation: bool = True
    seed: int = 0

    def __post_init__(self):
        mus = list(self.mu_list)
        if any(m2 >= m1 for m1, m2 in zip(mus, mus[1:])):
            raise ValueError("mu_list must be strictly decreasing")
        if any(not (0.0 < m <= 0.1) for m in mus):
            raise ValueError("momentum values must lie in (0, 0.1]")


@dataclass
class SweepRow:
    mu: float
    c_mu: float = math.nan
    speed: float = math.nan
    c_defect: float = math.nan
    speed_defect: float = math.nan
    envelope_mass: float = math.nan
    align_dist: float = math.nan
    grad_norm: float = math.nan
    iterations: int = 0
    penalty_active: bool = False
    h2_norm: float = math.nan
    momentum_error: float = math.nan
    energy_error: float = math.nan
    nonlinear_rest: float = math.nan
    boundary_amplitude: float = math.nan
    status: str = "ok"
    message: str = ""

    FIELDS = ("mu", "c_mu", "speed", "c_defect", "speed_defect", "envelope_mass",
              "align_dist", "grad_norm", "iterations", "penalty_active", "h2_norm",
              "momentum_error", "energy_error", "nonlinear_rest",
              "boundary_amplitude", "status", "message")


def _clamp_to_ball(eta: SurfaceProfile, pen: PenaltyConfig) -> SurfaceProfile:
    h2 = eta.norm_sobolev(2.0)
    cap = 0.9 * pen.inner_radius
    if h2 > cap:
        return SurfaceProfile(eta.grid, eta.values * (cap / h2))
    return eta


def _warm_start(ctx: ModelContext, prev_eta: SurfaceProfile, mu_prev: float,
                mu: float, delta0: float) -> SurfaceProfile:
    """Rescale the previous minimizer onto the model scaling at the next mu."""
    grid = prev_eta.grid
    if ctx.strong:
        r = (mu / mu_prev) ** (1.0 / 3.0)
        c = prev_eta.coeffs
        k = grid.wavenumbers
        # evaluate the band-limited series at the stretched abscissae
        keep = np.abs(c) > 1e-14 * np.max(np.abs(c))
        x = grid.x * r
        vals = np.zeros_like(x)
        for m in np.nonzero(keep)[0]:
            contrib = c[m] * np.exp(1j * k[m] * x)
            vals += contrib.real if m in (0, len(c) - 1) else 2.0 * contrib.real
        return SurfaceProfile(grid, r ** 2 * vals)
    env = extract_envelope(prev_eta, mu_prev, ctx.lw, delta0)
    r = mu / mu_prev
    coeffs = env.coeffs()
    kk = env.wavenumbers
    x_env = r * mu_prev * grid.x  # envelope abscissae of the new profile
    phi = np.zeros(grid.n_modes, dtype=complex)
    for m in np.nonzero(np.abs(coeffs) > 1e-13 * np.max(np.abs(coeffs)))[0]:
        phi += coeffs[m] * np.exp(1j * kk[m] * x_env)
    vals = mu * np.real(phi * np.exp(1j * ctx.lw.k0 * grid.x))
    return SurfaceProfile(grid, vals)


def run_sweep_row(ctx: ModelContext, spec: SweepSpec, mu: float,
                  init: SurfaceProfile) -> tuple:
    """One minimization plus post-processing; returns (row, result or None)."""
    params, lw = ctx.params, ctx.lw
    delta0 = spec.delta0 if spec.delta0 is not None else ctx.default_delta0()
    base = spec.minimize or MinimizeConfig(mu=mu)
    cfg = MinimizeConfig(mu=mu, grad_tol=base.grad_tol,
                         grad_tol_factor=base.grad_tol_factor,
                         max_iter=base.max_iter, descent=base.descent,
                         memory=base.memory, armijo_c1=base.armijo_c1,
                         max_backtracks=base.max_backtracks)
    row = SweepRow(mu=mu)
    try:
        try:
            res = minimize_reduced_energy(cfg, spec.penalty, init, params)
        except CollapsedToZero:
            res = minimize_reduced_energy(
                cfg, spec.penalty,
                SurfaceProfile(init.grid, 1.5 * init.values), params)
    except GCWavesError as exc:
        row.status = "failed"
        row.message = f"{type(exc).__name__}: {exc}"
        return row, None

    row.c_mu = res.bundle.objective
    row.speed = res.bundle.speed
    row.grad_norm = res.grad_norm
    row.iterations = res.iterations
    row.penalty_active = res.penalty_active
    row.h2_norm = res.eta.norm_sobolev(2.0)
    row.c_defect = (res.bundle.objective - 2.0 * lw.nu0 * mu) / mu ** ctx.objective_exponent()
    row.speed_defect = (res.bundle.speed - lw.nu0) / mu ** ctx.speed_exponent()
    edge = res.eta.grid.n_modes // 64 or 1
    row.boundary_amplitude = float(np.max(np.abs(
        np.concatenate([res.eta.values[:edge], res.eta.values[-edge:]]))))

    env = extract_envelope(res.eta, mu, lw, delta0)
    row.envelope_mass = env.mass()
    row.align_dist = align_distance(env, ctx.envelope_reference(env), ctx.align_mode())

    state = reconstruct_trace(mu, res.eta, params)
    energy, momentum = eval_energy_momentum(state, params)
    row.momentum_error = abs(momentum - 2.0 * mu)
    row.energy_error = abs(energy - res.bundle.objective)
    bundle = reduced_energy(mu, res.eta, params, with_parts=True)
    row.nonlinear_rest = bundle.nonlinear_rest
    return row, res


def run_sweep(spec: SweepSpec, out_dir: Optional[Path] = None,
              jobs: int = 1, progress=None):
    """Minimize along the descending momentum list; persist rows as they finish."""
    ctx = ModelContext.resolve(spec.params)
    delta0 = spec.delta0 if spec.delta0 is not None else ctx.default_delta0()
    writer = _RowWriter(out_dir, spec) if out_dir is not None else None

    rows: list[SweepRow] = []
    results: list[Optional[MinimizerResult]] = []

    if jobs > 1 and not spec.continuation:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = [pool.submit(_row_from_scratch, spec, mu) for mu in spec.mu_list]
            for fut, mu in zip(futs, spec.mu_list):
                row = fut.result()
                rows.append(row)
                results.append(None)
                if writer:
                    writer.append(row)
                if progress:
                    progress(row)
        return rows, results

    prev: Optional[tuple] = None
    for mu in spec.mu_list:
        if spec.continuation and prev is not None and prev[1] is not None:
            init = _warm_start(ctx, prev[1].eta, prev[0], mu, delta0)
            init = _clamp_to_ball(init, spec.penalty)
        else:
            init = _initial_guess(ctx, spec, mu)
        row, res = run_sweep_row(ctx, spec, mu, init)
        if row.status != "ok" and spec.continuation and prev is not None:
            # retry from scratch before recording a failure
            row, res = run_sweep_row(ctx, spec, mu, _initial_guess(ctx, spec, mu))
        rows.append(row)
        results.append(res)
        prev = (mu, res)
        if writer:
            writer.append(row)
        if progress:
            progress(row)
    return rows, results


def _initial_guess(ctx: ModelContext, spec: SweepSpec, mu: float) -> SurfaceProfile:
    tp = variational_test_profile(mu, ctx.params, ctx.lw, spec.grid)
    return _clamp_to_ball(tp.eta, spec.penalty)


def _row_from_scratch(spec: SweepSpec, mu: float) -> SweepRow:
    ctx = ModelContext.resolve(spec.params)
    row, _ = run_sweep_row(ctx, spec, mu, _initial_guess(ctx, spec, mu))
    return row


class _RowWriter:
    """Single-writer CSV/JSON persistence, flushed after every row."""

    def __init__(self, out_dir: Path, spec: SweepSpec):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.csv_path = self.out_dir / "sweep.csv"
        self.json_path = self.out_dir / "sweep.json"
        self.rows = []
        self.meta = {
            "omega": spec.params.omega,
            "beta": spec.params.beta,
            "half_length": spec.grid.half_length,
            "n_modes": spec.grid.n_modes,
            "n_layers": spec.grid.n_layers,
            "mu_list": list(spec.mu_list),
            "delta0": spec.delta0,
            "continuation": spec.continuation,
            "seed": spec.seed,
        }
        with open(self.csv_path, "w", newline="") as fh:
            csv.writer(fh).writerow(SweepRow.FIELDS)

    def append(self, row: SweepRow):
        rec = asdict(row)
        self.rows.append(rec)
        with open(self.csv_path, "a", newline="") as fh:
            csv.writer(fh).writerow(
                [_csv_cell(rec[name]) for name in SweepRow.FIELDS])
        with open(self.json_path, "w") as fh:
            json.dump({"config": self.meta, "rows": self.rows}, fh,
                      indent=2, sort_keys=True)
            fh.write("\n")


def _csv_cell(value):
    if isinstance(value, float):
        return CSV_FMT % value
    return value


# ---------------------------------------------------------------------------
# Command implementations (the CLI wraps these)
# ---------------------------------------------------------------------------

def cmd_dispersion(params: FluidParams, out_dir: Optional[Path] = None,
                   k_max: Optional[float] = None, n_samples: int = 501):
    """Plot-ready dispersion table: k, nu(k), gap(k) with a constants header."""
    lw = solve_bifurcation(params)
    if k_max is None:
        k_max = max(5.0, 3.0 * lw.k0)
    ks = np.linspace(0.0, k_max, n_samples)
    nus = phase_speed(ks, params)
    gaps = dispersion_gap(ks, lw, params)
    header = {"omega": params.omega, "beta": params.beta, "beta_c": lw.beta_c,
              "k0": lw.k0, "nu0": lw.nu0, "regime": lw.regime.value}
    lines = [f"# {key} = {CSV_FMT % val}" if isinstance(val, float) else f"# {key} = {val}"
             for key, val in header.items()]
    lines.append("k,nu,gap")
    for k, nu, gap in zip(ks, nus, gaps):
        lines.append(",".join(CSV_FMT % v for v in (k, nu, gap)))
    text = "\n".join(lines) + "\n"
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "dispersion.csv").write_text(text)
    return header, text


def cmd_coeffs(params: FluidParams, out_dir: Optional[Path] = None) -> dict:
    """Interaction coefficients, model-soliton constants, focusing margin."""
    lw = solve_bifurcation(params)
    if lw.regime is not Regime.WEAK_TENSION:
        raise WrongRegime("coefficient tables require the weak-tension regime")
    coeffs, oracle = interaction_coefficients(params, lw, check_quartic=True)
    nls = nls_data(params, lw, coeffs)
    record = {
        "omega": params.omega,
        "beta": params.beta,
        "beta_c": lw.beta_c,
        "k0": lw.k0,
        "nu0": lw.nu0,
        "gap_curvature": lw.gap_curvature,
        "coefficients": {
            "cubic_second_harmonic": coeffs.cubic_second_harmonic,
            "cubic_mean_flow": coeffs.cubic_mean_flow,
            "cubic": coeffs.cubic,
            "quartic_potential": coeffs.quartic_potential,
            "quartic_coupling": coeffs.quartic_coupling,
            "quartic_kinetic": coeffs.quartic_kinetic,
            "quartic": coeffs.quartic,
        },
        "focusing_margin": coeffs.focusing_margin,
        "quartic_oracle_errors": oracle,
        "nls": {
            "nu": nls.nu,
            "energy_min": nls.energy_min,
            "mass_constant": nls.mass_constant,
            "amplitude": nls.amplitude,
            "decay": nls.decay,
        },
    }
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "coefficients.json", "w") as fh:
            json.dump(record, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return record


def cmd_minimize(params: FluidParams, mu: float, out_dir: Optional[Path] = None,
                 n_modes: Optional[int] = None, n_layers: int = 48,
                 minimize_cfg: Optional[MinimizeConfig] = None):
    """Single minimization at one momentum; returns (row, result)."""
    ctx = ModelContext.resolve(params)
    grid = suggest_grid(ctx, mu, n_modes=n_modes, n_layers=n_layers)
    spec = SweepSpec(params=params, mu_list=[mu], grid=grid,
                     minimize=minimize_cfg, continuation=False)
    row, res = run_sweep_row(ctx, spec, mu, _initial_guess(ctx, spec, mu))
    if out_dir is not None and res is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "profile.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "eta"])
            for x, v in zip(grid.x, res.eta.values):
                w.writerow([CSV_FMT % x, CSV_FMT % v])
        with open(out_dir / "minimize.json", "w") as fh:
            json.dump({"row": asdict(row)}, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return row, res


# ---------------------------------------------------------------------------
# Configuration file handling
# ---------------------------------------------------------------------------

DEFAULT_CONFIG = {
    "fluid": {"omega": 0.0, "beta": 2.0},
    "grid": {"n_modes": 0, "n_layers": 48, "half_length": 0.0},  # 0 = auto
    "minimize": {"grad_tol_factor": 1e-7, "max_iter": 2000,
                 "descent": "quasi_newton", "penalty_strength": 1.0},
    "sweep": {"mu_list": [0.05, 0.02, 0.01, 0.005], "delta0": 0.0,  # 0 = auto
              "continuation": True},
}


def load_config(path: Optional[Path]) -> dict:
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    for section in parser.sections():
        if section not in cfg:
            raise ValueError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in cfg[section]:
                raise ValueError(f"unknown config key {key!r} in [{section}]")
            default = cfg[section][key]
            if key == "mu_list":
                cfg[section][key] = [float(tok) for tok in raw.replace(",", " ").split()]
            elif isinstance(default, bool):
                cfg[section][key] = raw.strip().lower() in ("1", "true", "yes", "on")
            elif isinstance(default, int):
                cfg[section][key] = int(raw)
            elif isinstance(default, float):
                cfg[section][key] = float(raw)
            else:
                cfg[section][key] = raw.strip()
    return cfg


def spec_from_config(cfg: dict) -> SweepSpec:
    params = FluidParams(cfg["fluid"]["omega"], cfg["fluid"]["beta"])
    ctx = ModelContext.resolve(params)
    mu_list = cfg["sweep"]["mu_list"]
    n_modes = cfg["grid"]["n_modes"] or None
    if cfg["grid"]["half_length"]:
        grid = PeriodicGrid(cfg["grid"]["half_length"],
                            n_modes or 512, cfg["grid"]["n_layers"])
    else:
        grid = suggest_grid(ctx, min(mu_list), n_modes=n_modes,
                            n_layers=cfg["grid"]["n_layers"])
    pen = PenaltyConfig(strength=cfg["minimize"]["penalty_strength"])
    mcfg = MinimizeConfig(mu=mu_list[0],
                          grad_tol_factor=cfg["minimize"]["grad_tol_factor"],
                          max_iter=cfg["minimize"]["max_iter"],
                          descent=cfg["minimize"]["descent"])
    delta0 = cfg["sweep"]["delta0"] or None
    return SweepSpec(params=params, mu_list=mu_list, grid=grid, delta0=delta0,
                     minimize=mcfg, penalty=pen,
                     continuation=cfg["sweep"]["continuation"])


def resolve_out_dir(flag_value: Optional[str]) -> Optional[Path]:
    env = os.environ.get(OUTDIR_ENV)
    if env:
        return Path(env)
    return Path(flag_value) if flag_value else None
