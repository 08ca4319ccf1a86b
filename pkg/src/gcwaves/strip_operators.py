"""Nonlocal surface operators via elliptic solves on the flattened strip.

The fluid domain under a surface eta is mapped onto the fixed strip
[-L, L) x [0, 1] by (x, y) -> (x, y(1+eta(x))), which turns Laplace's
equation into div((I+Q)grad u) = 0 with a variable coefficient tensor Q of
unit determinant.  Discretization is Fourier collocation in x and Chebyshev
(Gauss-Lobatto) collocation in y.

The flat-strip problem decouples per Fourier mode and is solved by a dense
(M+1)x(M+1) factorization per mode for the smooth particular part plus
closed-form hyperbolic responses for the boundary data, so flat-water
operator symbols (|k|tanh|k| and friends) are reproduced to machine
precision regardless of M.  The variable-coefficient problem is the
fixed-point equation u = Flat(data, G - Q grad u), solved by GMRES on
(I + T)u = b with T v = Flat(0, Q grad v).

Mean-mode convention: the Dirichlet-Neumann and Neumann-Dirichlet maps act
on the zero-mean sector (constants are invisible to them on the box).  The
derivative-sandwiched operator K(eta) = -d/dx N(eta) d/dx is completed with
the k = 0 quadrature cell of the whole-line operator,

    K(eta) z  =  K_solver(eta) z + mean-cell terms,

without which box functionals acquire an O((integral of eta)^2 / L) bias
that decays far too slowly for the small-momentum asymptotics downstream.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial import chebyshev as ncheb
from scipy.sparse.linalg import LinearOperator, gmres

from .dispersion import coth_multiplier
from .errors import DomainViolation, MeanNotZero, SolveFailure
from .grid import H0, PeriodicGrid, SurfaceProfile

GMRES_RTOL = 1e-12
GMRES_MAXITER = 200


# ---------------------------------------------------------------------------
# Chebyshev machinery on [0, 1], nodes ascending (y[0] = 0, y[M] = 1)
# ---------------------------------------------------------------------------

def _cheb_diff(m: int):
    """Gauss-Lobatto nodes (descending on [-1,1]) and differentiation matrix."""
    i = np.arange(m + 1)
    t = np.cos(np.pi * i / m)
    c = np.hstack([2.0, np.ones(m - 1), 2.0]) * (-1.0) ** i
    tt = np.tile(t, (m + 1, 1)).T
    dt = tt - tt.T + np.eye(m + 1)
    d = np.outer(c, 1.0 / c) / dt
    d -= np.diag(d.sum(axis=1))
    return t, d


def _clencurt(m: int) -> np.ndarray:
    """Clenshaw-Curtis quadrature weights for GL nodes on [-1, 1]."""
    theta = np.pi * np.arange(m + 1) / m
    w = np.zeros(m + 1)
    ii = np.arange(1, m)
    v = np.ones(m - 1)
    if m % 2 == 0:
        w[0] = w[m] = 1.0 / (m * m - 1)
        for j in range(1, m // 2):
            v -= 2.0 * np.cos(2.0 * j * theta[ii]) / (4.0 * j * j - 1.0)
        v -= np.cos(m * theta[ii]) / (m * m - 1.0)
    else:
        w[0] = w[m] = 1.0 / (m * m)
        for j in range(1, (m - 1) // 2 + 1):
            v -= 2.0 * np.cos(2.0 * j * theta[ii]) / (4.0 * j * j - 1.0)
    w[ii] = 2.0 * v / m
    return w


# ---------------------------------------------------------------------------
# Boundary conditions and solution container
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DirichletTop:
    xi: SurfaceProfile


@dataclass(frozen=True)
class NeumannTop:
    xi: SurfaceProfile


@dataclass
class StripSolution:
    """Field on the flattened strip plus exact top-row data channels."""

    grid: PeriodicGrid
    values: np.ndarray          # (N, M+1), y ascending
    trace_top: np.ndarray       # u(x, 1)
    dy_top: np.ndarray          # u_y(x, 1)
    dx_top: np.ndarray          # u_x(x, 1)
    gauge: str                  # "zero_mean" or "dirichlet_top"
    iterations: int = 0
    residual: float = 0.0


@dataclass
class QTensor:
    """Symmetric coefficient tensor of the flattened Laplacian (q12 = q21)."""

    grid: PeriodicGrid
    q11: np.ndarray
    q12: np.ndarray
    q22: np.ndarray

    def det_i_plus_q(self) -> np.ndarray:
        return (1.0 + self.q11) * (1.0 + self.q22) - self.q12 ** 2

    def min_eigenvalue(self) -> float:
        """Smallest pointwise eigenvalue of I+Q (coercivity constant p0)."""
        a = 1.0 + self.q11
        c = 1.0 + self.q22
        disc = np.sqrt((a - c) ** 2 + 4.0 * self.q12 ** 2)
        return float(np.min(0.5 * (a + c - disc)))

    def is_trivial(self) -> bool:
        return (not np.any(self.q11)) and (not np.any(self.q12)) and (not np.any(self.q22))


def build_Q(eta: SurfaceProfile, h0: float = H0) -> QTensor:
    """Coefficient tensor for the flattening (x, y) -> (x, y(1+eta))."""
    eta.require_admissible(h0)
    ws = get_workspace(eta.grid)
    ev = eta.values[:, None]
    dev = eta.derivative().values[:, None]
    y = ws.y[None, :]
    q11 = np.broadcast_to(ev, (eta.grid.n_modes, ws.m + 1)).copy()
    q12 = -y * dev
    q22 = (-ev + (y * dev) ** 2) / (1.0 + ev)
    return QTensor(eta.grid, q11, q12 + np.zeros_like(q22), q22)


# ---------------------------------------------------------------------------
# Per-grid workspace with cached factorizations and response tables
# ---------------------------------------------------------------------------

class StripWorkspace:
    def __init__(self, grid: PeriodicGrid):
        self.grid = grid
        self.m = grid.n_layers
        m = self.m

        t_desc, d_desc = _cheb_diff(m)
        flip = slice(None, None, -1)
        self.y = (1.0 + t_desc[flip]) / 2.0           # ascending, y[0]=0
        self.dy = 2.0 * d_desc[flip, :][:, flip]      # d/dy on ascending nodes
        self.d2y = self.dy @ self.dy
        self.wy = _clencurt(m)[flip] / 2.0            # integrates over [0, 1]

        # Cumulative-integral matrix: (Jy f)[i] = integral_0^{y_i} f.
        t_asc = 2.0 * self.y - 1.0
        vand = ncheb.chebvander(t_asc, m)
        vinv = np.linalg.inv(vand)
        jy = np.empty((m + 1, m + 1))
        for j in range(m + 1):
            c = vinv[:, j]
            ci = ncheb.chebint(c, lbnd=-1.0)
            jy[:, j] = 0.5 * ncheb.chebval(t_asc, ci)
        self.jy = jy

        self.k = grid.wavenumbers
        nk = len(self.k)
        kp = self.k[1:]                               # strictly positive modes

        e2k = np.exp(-2.0 * kp)
        # Neumann responses: unit top flux / unit bottom flux, zero other flux.
        # Hyperbolics are evaluated in decaying-exponential form so that large
        # k never overflows.
        ky = kp[:, None] * self.y[None, :]
        k1my = kp[:, None] * (1.0 - self.y[None, :])
        denom_n = (kp * (1.0 - e2k))[:, None]
        self.resp_ntop = (np.exp(-k1my) + np.exp(-kp[:, None] * (1.0 + self.y[None, :]))) / denom_n
        self.resp_nbot = -(np.exp(-ky) + np.exp(-kp[:, None] * (2.0 - self.y[None, :]))) / denom_n
        self.trace_ntop = (1.0 + e2k) / (kp * (1.0 - e2k))   # cosh k /(k sinh k)
        self.trace_nbot = -2.0 * np.exp(-kp) / (kp * (1.0 - e2k))

        # Dirichlet responses: unit top value / unit bottom flux.
        denom_d = (1.0 + e2k)[:, None]
        self.resp_dtop = (np.exp(-k1my) + np.exp(-kp[:, None] * (1.0 + self.y[None, :]))) / denom_d
        self.resp_dbot = (np.exp(-kp[:, None] * (2.0 - self.y[None, :])) - np.exp(-ky)) / (kp[:, None] * denom_d)
        self.flux_dtop = kp * (1.0 - e2k) / (1.0 + e2k)      # k tanh k
        self.flux_dbot = 2.0 * np.exp(-kp) / (1.0 + e2k)     # 1 / cosh k

        # Batched dense solves for the smooth particular parts.
        eye = np.eye(m + 1)
        interior = slice(1, m)

        a_n = np.empty((nk - 1, m + 1, m + 1))
        a_n[:] = self.d2y[None, :, :] - (kp ** 2)[:, None, None] * eye[None, :, :]
        a_n[:, 0, :] = self.dy[0, :]
        a_n[:, m, :] = self.dy[m, :]
        self.inv_neumann = np.linalg.inv(a_n)

        a_d = np.empty((nk, m + 1, m + 1))
        a_d[:] = self.d2y[None, :, :] - (self.k ** 2)[:, None, None] * eye[None, :, :]
        a_d[:, 0, :] = self.dy[0, :]
        a_d[:, m, :] = 0.0
        a_d[:, m, m] = 1.0
        self.inv_dirichlet = np.linalg.inv(a_d)

        self._interior = interior

    # -- field transforms ---------------------------------------------------

    def rfft_field(self, f: np.ndarray) -> np.ndarray:
        return np.fft.rfft(f, axis=0)

    def irfft_field(self, fh: np.ndarray) -> np.ndarray:
        return np.fft.irfft(fh, n=self.grid.n_modes, axis=0)

    def grad(self, u: np.ndarray):
        uh = self.rfft_field(u)
        dxh = 1j * self.k[:, None] * uh
        dxh[-1, :] = 0.0
        return self.irfft_field(dxh), u @ self.dy.T

    def strip_mean(self, u: np.ndarray) -> float:
        return float(np.mean(u @ self.wy))

    def strip_integral(self, f: np.ndarray) -> float:
        return float(np.sum(f @ self.wy) * self.grid.dx)

    def _batch_solve(self, inv: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        stacked = np.stack([rhs.real, rhs.imag], axis=-1)
        out = np.matmul(inv, stacked)
        return out[..., 0] + 1j * out[..., 1]

    # -- flat-strip solves (per rfft mode) ----------------------------------

    def flat_solve(self, kind: str, xi_hat: np.ndarray,
                   f1_hat: Optional[np.ndarray], f2_hat: Optional[np.ndarray]):
        """Solve Laplace/Poisson on the flat strip for every Fourier mode.

        Returns (u_hat, trace_hat, dytop_hat).  Forcing enters as the vector
        field G with div G on the right-hand side and G.n in the flux data,
        matching the weak form of the transformed problem.
        """
        m = self.m
        nk = len(self.k)
        if f1_hat is None:
            f1_hat = np.zeros((nk, m + 1), dtype=complex)
            f2_hat = np.zeros((nk, m + 1), dtype=complex)

        rhs_full = 1j * self.k[:, None] * f1_hat + f2_hat @ self.dy.T
        rhs = np.zeros_like(rhs_full)
        rhs[:, self._interior] = rhs_full[:, self._interior]

        u_hat = np.zeros((nk, m + 1), dtype=complex)
        g_bot = f2_hat[:, 0]

        if kind == "neumann":
            g_top = xi_hat + f2_hat[:, m]
            up = self._batch_solve(self.inv_neumann, rhs[1:])
            u_hat[1:] = (up + g_top[1:, None] * self.resp_ntop
                         + g_bot[1:, None] * self.resp_nbot)
            trace = np.empty(nk, dtype=complex)
            trace[1:] = up[:, m] + g_top[1:] * self.trace_ntop + g_bot[1:] * self.trace_nbot
            # Mean mode: u0' = f2 exactly (bottom flux matches by construction),
            # integrated spectrally; gauge-fixed to zero strip mean.
            u0 = self.jy @ f2_hat[0]
            u0 -= self.wy @ u0
            u_hat[0] = u0
            trace[0] = u0[m]
            dytop = g_top
            return u_hat, trace, dytop

        if kind == "dirichlet":
            up = self._batch_solve(self.inv_dirichlet, rhs)
            dytop_p = up @ self.dy[m, :]
            u_hat = up.copy()
            u_hat[1:] += (xi_hat[1:, None] * self.resp_dtop
                          + g_bot[1:, None] * self.resp_dbot)
            # k = 0 responses: constant for top data, (y-1) for bottom flux.
            u_hat[0] += xi_hat[0] + g_bot[0] * (self.y - 1.0)
            trace = xi_hat.copy()
            dytop = dytop_p.astype(complex)
            dytop[1:] += xi_hat[1:] * self.flux_dtop + g_bot[1:] * self.flux_dbot
            dytop[0] += g_bot[0]
            return u_hat, trace, dytop

        raise ValueError(f"unknown boundary kind {kind!r}")


_workspaces: dict[tuple, StripWorkspace] = {}
_ws_lock = threading.Lock()


def get_workspace(grid: PeriodicGrid) -> StripWorkspace:
    key = (grid.half_length, grid.n_modes, grid.n_layers)
    ws = _workspaces.get(key)
    if ws is None:
        with _ws_lock:
            ws = _workspaces.get(key)
            if ws is None:
                ws = StripWorkspace(grid)
                _workspaces[key] = ws
    return ws


# ---------------------------------------------------------------------------
# Variable-coefficient solve
# ---------------------------------------------------------------------------

def _forcing_hat(ws: StripWorkspace, forcing):
    if forcing is None:
        return None, None
    g1, g2 = forcing
    return ws.rfft_field(g1), ws.rfft_field(g2)


def solve_strip(eta: SurfaceProfile, bc, forcing=None,
                rtol: float = GMRES_RTOL, maxiter: int = GMRES_MAXITER) -> StripSolution:
    """Discrete weak solution of div((I+Q)grad u) = div G on the strip.

    bc is DirichletTop(xi) or NeumannTop(xi); NeumannTop data must have zero
    mean and the solution is returned in the zero-strip-mean gauge.
    """
    grid = eta.grid
    ws = get_workspace(grid)
    n, m = grid.n_modes, ws.m

    if isinstance(bc, NeumannTop):
        kind = "neumann"
        xi = bc.xi
        scale = abs(xi.mean())
        if scale > 1e-11 * (1.0 + float(np.max(np.abs(xi.values)))):
            raise MeanNotZero(f"Neumann data has mean {xi.mean():.3e}")
    elif isinstance(bc, DirichletTop):
        kind = "dirichlet"
        xi = bc.xi
    else:
        raise TypeError("bc must be DirichletTop or NeumannTop")

    xi_hat = np.fft.rfft(xi.values)
    if kind == "neumann":
        xi_hat[0] = 0.0  # exact zero-mean compatibility
    f1_hat, f2_hat = _forcing_hat(ws, forcing)

    q = build_Q(eta)

    def assemble(u_field: Optional[np.ndarray]):
        """Flat solve with effective forcing G - Q grad u."""
        if u_field is None:
            g1h, g2h = f1_hat, f2_hat
        else:
            ux, uy = ws.grad(u_field)
            e1 = -(q.q11 * ux + q.q12 * uy)
            e2 = -(q.q12 * ux + q.q22 * uy)
            if forcing is not None:
                e1 += forcing[0]
                e2 += forcing[1]
            g1h, g2h = ws.rfft_field(e1), ws.rfft_field(e2)
        return ws.flat_solve(kind, xi_hat, g1h, g2h)

    b_hat, b_trace, b_dytop = assemble(None)
    b_field = ws.irfft_field(b_hat)

    if q.is_trivial():
        u_field, trace_hat, dytop_hat = b_field, b_trace, b_dytop
        iters, resid = 0, 0.0
    else:
        shape = (n, m + 1)

        def apply_T(vec):
            v = vec.reshape(shape)
            vx, vy = ws.grad(v)
            g1 = q.q11 * vx + q.q12 * vy
            g2 = q.q12 * vx + q.q22 * vy
            th, _, _ = ws.flat_solve(kind, np.zeros_like(xi_hat),
                                     ws.rfft_field(g1), ws.rfft_field(g2))
            return vec + ws.irfft_field(th).ravel()

        op = LinearOperator((n * (m + 1),) * 2, matvec=apply_T, dtype=float)
        counter = {"n": 0}

        def cb(_):
            counter["n"] += 1

        sol, info = gmres(op, b_field.ravel(), x0=b_field.ravel(),
                          rtol=rtol, atol=0.0, restart=80, maxiter=maxiter,
                          callback=cb, callback_type="pr_norm")
        if info != 0:
            raise SolveFailure(f"gmres failed to converge (info={info})")
        u_iter = sol.reshape(shape)

        u_hat, trace_hat, dytop_hat = assemble(u_iter)
        u_field = ws.irfft_field(u_hat)
        scale = float(np.linalg.norm(u_field)) or 1.0
        resid = float(np.linalg.norm(u_field - u_iter)) / scale
        iters = counter["n"]
        if resid > 1e-8:
            raise SolveFailure(f"fixed-point residual {resid:.3e} after gmres")

    trace = np.fft.irfft(trace_hat, n=n)
    dx_top_hat = 1j * ws.k * trace_hat
    dx_top_hat[-1] = 0.0
    return StripSolution(
        grid=grid,
        values=u_field,
        trace_top=trace,
        dy_top=np.fft.irfft(dytop_hat, n=n),
        dx_top=np.fft.irfft(dx_top_hat, n=n),
        gauge="zero_mean" if kind == "neumann" else "dirichlet_top",
        iterations=iters,
        residual=resid,
    )


# ---------------------------------------------------------------------------
# Surface operators
# ---------------------------------------------------------------------------

def apply_coth_multiplier(zeta: SurfaceProfile) -> SurfaceProfile:
    """Flat-water operator: Fourier multiplier |k|coth|k| (mean passes through)."""
    return zeta.apply_multiplier(coth_multiplier)


def neumann_solution(eta: SurfaceProfile, zeta: SurfaceProfile) -> StripSolution:
    """Strip solve with top Neumann data (d/dx zeta); shared by K and the form."""
    return solve_strip(eta, NeumannTop(zeta.derivative()))


def dn_apply(eta: SurfaceProfile, xi: SurfaceProfile) -> SurfaceProfile:
    """Dirichlet-Neumann map: surface trace -> rescaled normal flux (zero mean)."""
    sol = solve_strip(eta, DirichletTop(xi))
    dev = eta.derivative().values
    flux = (-dev * sol.dx_top
            + (1.0 + dev ** 2) / (1.0 + eta.values) * sol.dy_top)
    flux -= np.mean(flux)  # range lies in the zero-mean sector
    return SurfaceProfile(eta.grid, flux)


def nd_apply(eta: SurfaceProfile, kappa: SurfaceProfile) -> SurfaceProfile:
    """Neumann-Dirichlet map (inverse of dn_apply on zero-mean data)."""
    sol = solve_strip(eta, NeumannTop(kappa))
    return SurfaceProfile(eta.grid, sol.trace_top)


def _mean_cell_terms(eta: SurfaceProfile, zeta: SurfaceProfile) -> np.ndarray:
    """k = 0 quadrature cell of the whole-line operator (see module docstring)."""
    c0 = zeta.mean()
    k0eta = apply_coth_multiplier(eta).values
    coupling = np.mean(eta.values * apply_coth_multiplier(zeta).values)
    return c0 * (1.0 + eta.mean() - k0eta) - coupling


def k_apply(eta: SurfaceProfile, zeta: SurfaceProfile) -> SurfaceProfile:
    """Derivative-sandwiched operator -d/dx N(eta) d/dx, mean cell restored.

    Reduces exactly to the coth multiplier on flat water.
    """
    sol = neumann_solution(eta, zeta)
    out = -SurfaceProfile(eta.grid, sol.trace_top).derivative().values
    out += _mean_cell_terms(eta, zeta)
    return SurfaceProfile(eta.grid, out)


def k_apply_with_form(eta: SurfaceProfile, zeta: SurfaceProfile):
    """K(eta) zeta together with the top-row derivatives of its strip solve."""
    sol = neumann_solution(eta, zeta)
    out = -SurfaceProfile(eta.grid, sol.trace_top).derivative().values
    out += _mean_cell_terms(eta, zeta)
    return SurfaceProfile(eta.grid, out), sol


def hprime_form(eta: SurfaceProfile, zeta1: SurfaceProfile, zeta2: SurfaceProfile,
                sol1: Optional[StripSolution] = None,
                sol2: Optional[StripSolution] = None) -> SurfaceProfile:
    """Surface gradient density of the bilinear form <zeta1, K(eta) zeta2>.

    Equals [-u1_x u2_x + (1+eta'^2)/(1+eta)^2 u1_y u2_y] on the top row plus
    the mean-cell completion; u_j solves the strip problem with Neumann data
    (d/dx zeta_j).
    """
    if sol1 is None:
        sol1 = neumann_solution(eta, zeta1)
    if sol2 is None:
        sol2 = sol1 if zeta2 is zeta1 else neumann_solution(eta, zeta2)
    dev = eta.derivative().values
    w = (1.0 + dev ** 2) / (1.0 + eta.values) ** 2
    vals = -sol1.dx_top * sol2.dx_top + w * sol1.dy_top * sol2.dy_top
    vals -= zeta2.mean() * apply_coth_multiplier(zeta1).values
    vals -= zeta1.mean() * apply_coth_multiplier(zeta2).values
    vals += zeta1.mean() * zeta2.mean()
    return SurfaceProfile(eta.grid, vals)


# ---------------------------------------------------------------------------
# Power-series terms of K about the flat strip
# ---------------------------------------------------------------------------

def _q_homogeneous(eta: SurfaceProfile, ws: StripWorkspace, order: int):
    """Order-n homogeneous part of Q(eps*eta) in eps (closed rational expansion)."""
    ev = eta.values[:, None]
    dev = eta.derivative().values[:, None]
    y = ws.y[None, :]
    zero = np.zeros((eta.grid.n_modes, ws.m + 1))
    if order == 1:
        return ev + zero, -y * dev + zero, -ev + zero
    if order == 2:
        return zero, zero, ev ** 2 + (y * dev) ** 2
    sign = -1.0 if order % 2 else 1.0
    q22 = sign * (ev ** order + (y * dev) ** 2 * ev ** (order - 2))
    return zero, zero, q22 + zero


def k_series(eta: SurfaceProfile, zeta: SurfaceProfile, order: int):
    """Homogeneous terms [K0 z, K1(eta) z, ..., Kn(eta) z] of K about eta = 0.

    Term n >= 1 is the top flux derivative of the n-th solution in the
    power-series recursion with forcing G_n = -sum_j Q_j grad u_{n-j}.
    """
    grid = eta.grid
    ws = get_workspace(grid)
    terms = [apply_coth_multiplier(zeta)]
    if order == 0:
        return terms

    qparts = [_q_homogeneous(eta, ws, j) for j in range(1, order + 1)]
    sol0 = solve_strip(SurfaceProfile.zero(grid), NeumannTop(zeta.derivative()))
    grads = [ws.grad(sol0.values)]
    zero_data = SurfaceProfile.zero(grid)

    for n_term in range(1, order + 1):
        g1 = np.zeros((grid.n_modes, ws.m + 1))
        g2 = np.zeros_like(g1)
        for j in range(1, n_term + 1):
            q11, q12, q22 = qparts[j - 1]
            ux, uy = grads[n_term - j]
            g1 -= q11 * ux + q12 * uy
            g2 -= q12 * ux + q22 * uy
        sol = solve_strip(SurfaceProfile.zero(grid), NeumannTop(zero_data),
                          forcing=(g1, g2))
        grads.append(ws.grad(sol.values))
        vals = -SurfaceProfile(grid, sol.trace_top).derivative().values
        if n_term == 1:
            vals += zeta.mean() * (eta.mean() - apply_coth_multiplier(eta).values)
            vals -= np.mean(eta.values * apply_coth_multiplier(zeta).values)
        terms.append(SurfaceProfile(grid, vals))
    return terms
