"""Periodic collocation grid and surface profiles.

The x-axis is the periodic box [-L, L) with N uniform nodes and rfft-layout
wavenumbers k_m = pi*m/L.  A SurfaceProfile stores real nodal values together
with (lazily computed) Fourier coefficients; the two stay consistent under
the discrete transform.  Profiles double as generic periodic scalar fields
(potential traces, Neumann data), so the minimum-depth constraint is enforced
at operator entry points rather than at construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainViolation

# Minimum fluid depth: admissible surfaces satisfy 1 + min(eta) > H0.
H0 = 0.1


@dataclass(frozen=True)
class PeriodicGrid:
    half_length: float
    n_modes: int      # N, number of x collocation points (power of two)
    n_layers: int     # M, vertical resolution of the strip (M+1 nodes)

    def __post_init__(self):
        n = self.n_modes
        if n < 2 or (n & (n - 1)) != 0:
            raise ValueError(f"n_modes must be a power of two, got {n}")
        if self.n_layers < 16:
            raise ValueError(f"n_layers must be >= 16, got {self.n_layers}")
        if self.half_length <= 0:
            raise ValueError("half_length must be positive")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_length / self.n_modes

    @property
    def x(self) -> np.ndarray:
        L = self.half_length
        return -L + self.dx * np.arange(self.n_modes)

    @property
    def wavenumbers(self) -> np.ndarray:
        """Nonnegative wavenumbers in rfft layout, k_m = pi*m/L."""
        return np.pi * np.arange(self.n_modes // 2 + 1) / self.half_length

    @property
    def mode_phase(self) -> np.ndarray:
        """(-1)^m factors relating rfft of values on [-L, L) to coefficients."""
        m = np.arange(self.n_modes // 2 + 1)
        return np.where(m % 2 == 0, 1.0, -1.0)

    @property
    def mode_weights(self) -> np.ndarray:
        """Parseval weights: 2 for interior rfft modes, 1 for k=0 and Nyquist."""
        w = np.full(self.n_modes // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w


@dataclass
class SurfaceProfile:
    grid: PeriodicGrid
    values: np.ndarray
    _coeffs: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_modes,):
            raise ValueError("values length must match the grid")

    @classmethod
    def from_callable(cls, grid: PeriodicGrid, fn) -> "SurfaceProfile":
        return cls(grid, np.asarray(fn(grid.x), dtype=float))

    @classmethod
    def from_coeffs(cls, grid: PeriodicGrid, coeffs: np.ndarray) -> "SurfaceProfile":
        vals = np.fft.irfft(coeffs * grid.mode_phase * grid.n_modes)
        p = cls(grid, vals)
        p._coeffs = np.asarray(coeffs, dtype=complex)
        return p

    @classmethod
    def zero(cls, grid: PeriodicGrid) -> "SurfaceProfile":
        return cls(grid, np.zeros(grid.n_modes))

    @property
    def coeffs(self) -> np.ndarray:
        """Fourier coefficients c_m of sum_m c_m exp(i k_m x), rfft layout."""
        if self._coeffs is None:
            self._coeffs = np.fft.rfft(self.values) * self.grid.mode_phase / self.grid.n_modes
        return self._coeffs

    def mean(self) -> float:
        return float(np.mean(self.values))

    def integral(self) -> float:
        """Trapezoid rule on the uniform periodic grid (spectrally accurate)."""
        return float(np.sum(self.values) * self.grid.dx)

    def derivative(self, order: int = 1) -> "SurfaceProfile":
        k = self.grid.wavenumbers
        mult = (1j * k) ** order
        if order % 2 == 1:
            mult[-1] = 0.0  # odd derivatives drop the Nyquist mode
        return SurfaceProfile.from_coeffs(self.grid, self.coeffs * mult)

    def apply_multiplier(self, symbol) -> "SurfaceProfile":
        """Apply an even real Fourier multiplier given as symbol(|k|)."""
        return SurfaceProfile.from_coeffs(self.grid, self.coeffs * symbol(self.grid.wavenumbers))

    def spectral_sum(self, weight: np.ndarray) -> float:
        """2L * sum over all signed modes of weight(|k|) |c_k|^2."""
        c = self.coeffs
        return float(2.0 * self.grid.half_length
                     * np.sum(self.grid.mode_weights * weight * (c.real ** 2 + c.imag ** 2)))

    def norm_l2(self) -> float:
        return float(np.sqrt(max(self.spectral_sum(np.ones_like(self.grid.wavenumbers)), 0.0)))

    def norm_sobolev(self, order: float) -> float:
        k = self.grid.wavenumbers
        return float(np.sqrt(max(self.spectral_sum((1.0 + k * k) ** order), 0.0)))

    def norm_h_half_star(self) -> float:
        """Homogeneous-type trace norm: weight (1+k^2)^(-1/2) k^2."""
        k = self.grid.wavenumbers
        return float(np.sqrt(max(self.spectral_sum(k * k / np.sqrt(1.0 + k * k)), 0.0)))

    def shifted(self, steps: int) -> "SurfaceProfile":
        """Translate by an integer number of grid cells."""
        return SurfaceProfile(self.grid, np.roll(self.values, steps))

    def reflected(self) -> "SurfaceProfile":
        """x -> -x on the node set (node 0 is its own mirror image)."""
        return SurfaceProfile(self.grid, np.concatenate([self.values[:1], self.values[:0:-1]]))

    def resample(self, n_modes: int) -> "SurfaceProfile":
        """Fourier interpolation onto a grid with a different mode count."""
        target = PeriodicGrid(self.grid.half_length, n_modes, self.grid.n_layers)
        c_old = self.coeffs
        c_new = np.zeros(n_modes // 2 + 1, dtype=complex)
        m = min(len(c_old), len(c_new))
        c_new[:m] = c_old[:m]
        if m - 1 < len(c_old) - 1:  # keep a truncated Nyquist real
            c_new[m - 1] = c_new[m - 1].real
        return SurfaceProfile.from_coeffs(target, c_new)

    def require_admissible(self, h0: float = H0) -> None:
        if 1.0 + float(np.min(self.values)) <= h0:
            raise DomainViolation(
                f"surface touches the minimum depth: 1+min(eta)={1.0 + float(np.min(self.values)):.4g} <= {h0}")


def band_limited_profile(grid: PeriodicGrid, rng: np.random.Generator,
                         h2_norm: float, m_max: int = 24) -> SurfaceProfile:
    """Random smooth profile with the requested H^2 norm.

    Coefficients decay like (1+k^2)^{-3/2} up to mode m_max; used by the
    validation suite and tests.
    """
    n_half = grid.n_modes // 2 + 1
    m_max = min(m_max, n_half - 2)
    c = np.zeros(n_half, dtype=complex)
    k = grid.wavenumbers[1:m_max + 1]
    amp = (1.0 + k * k) ** -1.5
    c[1:m_max + 1] = amp * (rng.standard_normal(m_max) + 1j * rng.standard_normal(m_max))
    c[0] = 0.3 * amp[0] * rng.standard_normal()
    p = SurfaceProfile.from_coeffs(grid, c)
    cur = p.norm_sobolev(2.0)
    return SurfaceProfile(grid, p.values * (h2_norm / cur))
