"""Brute-force spectral oracle for the killed 1D kinetic Langevin dynamics.

Discretizes the generator v d/dx - (V'(x) + gamma v) d/dv + gamma d^2/dv^2
on a cell-centered (x, v) grid with pure upwinding for the transport terms
and absorbing (zero) values outside the interval in x and outside the
velocity truncation.  The resulting matrix has nonnegative off-diagonal
entries, so the dominant eigenvalue is real with positive left and right
eigenvectors; both are computed by shift-inverted power iteration, the
second decay rate by the same iteration with biorthogonal deflation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import OracleError, UsageError
from .potentials import PotentialSpec, grad_potential

MAX_POWER_ITERS = 500
RESIDUAL_TOL = 1e-10


@dataclass
class GridOracleResult:
    lambda1: float  # principal decay rate (positive)
    lambda2: Optional[float]  # second decay rate (positive, >= lambda1)
    phi: np.ndarray  # right eigenfunction, (nx, nv), positive, max = 1
    mu: np.ndarray  # left eigenvector as cell masses, (nx, nv), sums to 1
    x_centers: np.ndarray
    v_centers: np.ndarray
    residual: float
    lambda2_method: str = "deflated_power"

    @property
    def spectral_gap(self) -> Optional[float]:
        if self.lambda2 is None:
            return None
        return self.lambda2 - self.lambda1

    def phi_at(self, x: float, v: float) -> float:
        """Bilinear interpolation of phi at a phase point."""
        return _bilinear(self.x_centers, self.v_centers, self.phi, x, v)

    def x_marginal(self) -> np.ndarray:
        return self.mu.sum(axis=1)

    def v_marginal(self) -> np.ndarray:
        return self.mu.sum(axis=0)


def _bilinear(xs, vs, grid, x, v):
    ix = np.clip(np.searchsorted(xs, x) - 1, 0, len(xs) - 2)
    iv = np.clip(np.searchsorted(vs, v) - 1, 0, len(vs) - 2)
    tx = np.clip((x - xs[ix]) / (xs[ix + 1] - xs[ix]), 0.0, 1.0)
    tv = np.clip((v - vs[iv]) / (vs[iv + 1] - vs[iv]), 0.0, 1.0)
    return float(
        grid[ix, iv] * (1 - tx) * (1 - tv)
        + grid[ix + 1, iv] * tx * (1 - tv)
        + grid[ix, iv + 1] * (1 - tx) * tv
        + grid[ix + 1, iv + 1] * tx * tv
    )


def build_killed_generator(
    potential: PotentialSpec,
    interval: tuple,
    nx: int,
    nv: int,
    v_cut: float,
    gamma: float,
) -> tuple:
    """Sparse upwind discretization of the killed generator.

    Returns (A, x_centers, v_centers); row/column k = i * nv + j.
    """
    a, b = float(interval[0]), float(interval[1])
    if not b > a:
        raise UsageError("interval must satisfy a < b")
    if nx < 4 or nv < 4 or v_cut <= 0:
        raise UsageError("grid needs nx, nv >= 4 and v_cut > 0")
    hx = (b - a) / nx
    hv = 2.0 * v_cut / nv
    xs = a + (np.arange(nx) + 0.5) * hx
    vs = -v_cut + (np.arange(nv) + 0.5) * hv
    grad = grad_potential(potential, xs[:, None]).reshape(-1)

    rows, cols, vals = [], [], []

    def add(k, kk, val):
        rows.append(k)
        cols.append(kk)
        vals.append(val)

    for i in range(nx):
        for j in range(nv):
            k = i * nv + j
            diag = 0.0
            # transport in x with speed v (absorbing outside the interval)
            cx = vs[j]
            if cx > 0:
                if i + 1 < nx:
                    add(k, k + nv, cx / hx)
                diag -= cx / hx
            elif cx < 0:
                if i - 1 >= 0:
                    add(k, k - nv, -cx / hx)
                diag += cx / hx
            # transport in v with speed -(V' + gamma v) (truncated in v)
            cv = -(grad[i] + gamma * vs[j])
            if cv > 0:
                if j + 1 < nv:
                    add(k, k + 1, cv / hv)
                diag -= cv / hv
            elif cv < 0:
                if j - 1 >= 0:
                    add(k, k - 1, -cv / hv)
                diag += cv / hv
            # diffusion in v
            if gamma > 0:
                co = gamma / hv**2
                if j + 1 < nv:
                    add(k, k + 1, co)
                if j - 1 >= 0:
                    add(k, k - 1, co)
                diag -= 2.0 * co
            add(k, k, diag)
    n = nx * nv
    A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return A, xs, vs


def _shift_invert_power(lu, A, start, project=None):
    u = start / np.linalg.norm(start)
    eig = None
    residual = np.inf
    for _ in range(MAX_POWER_ITERS):
        w = lu.solve(u)
        if project is not None:
            w = project(w)
        nw = np.linalg.norm(w)
        if not np.isfinite(nw) or nw == 0:
            raise OracleError("power iteration collapsed", residual=residual)
        u = w / nw
        au = A @ u
        eig = float(u @ au)
        residual = float(np.linalg.norm(au - eig * u))
        if residual < RESIDUAL_TOL:
            break
    return eig, u, residual


def grid_oracle_kl_1d(
    potential: PotentialSpec,
    interval: tuple,
    nx: int = 120,
    nv: int = 120,
    v_cut: float = 5.0,
    gamma: float = 1.0,
    sigma: float = 0.5,
    want_lambda2: bool = True,
) -> GridOracleResult:
    """Principal (and second) decay rate with QSD and eigenfunction grids."""
    if potential.dim != 1:
        raise UsageError("the grid oracle covers one-dimensional positions only")
    A, xs, vs = build_killed_generator(potential, interval, nx, nv, v_cut, gamma)
    n = A.shape[0]
    shifted = (A - sigma * sp.eye(n, format="csr")).tocsc()
    try:
        lu = spla.splu(shifted)
    except RuntimeError as exc:  # pragma: no cover - singular shift
        raise OracleError(f"factorization failed: {exc}")
    rng = np.random.Generator(np.random.Philox(key=7))
    start = np.abs(rng.standard_normal(n)) + 1.0
    eig1, phi_vec, res1 = _shift_invert_power(lu, A, start)
    luT = spla.splu(shifted.T.tocsc())
    eig1_left, mu_vec, res2 = _shift_invert_power(luT, A.T.tocsr(), start)
    residual = max(res1, res2, abs(eig1 - eig1_left))
    if residual > 1e-8:
        raise OracleError(
            f"power iteration did not reach the 1e-8 eigen-residual (got {residual:.2e})",
            residual=residual,
        )
    # Perron vectors have one sign; orient positive
    phi_vec = phi_vec if phi_vec.sum() > 0 else -phi_vec
    mu_vec = mu_vec if mu_vec.sum() > 0 else -mu_vec
    lam1 = -eig1
    lam2 = None
    method = "deflated_power"
    if want_lambda2:
        lam2, method = _second_rate(lu, A, phi_vec, mu_vec, start, rng)
    phi = phi_vec.reshape(len(xs), len(vs))
    mu = mu_vec.reshape(len(xs), len(vs))
    return GridOracleResult(
        lambda1=float(lam1),
        lambda2=lam2,
        phi=phi / phi.max(),
        mu=mu / mu.sum(),
        x_centers=xs,
        v_centers=vs,
        residual=float(residual),
        lambda2_method=method,
    )


def _second_rate(lu, A, phi_vec, mu_vec, start, rng):
    """Deflated shift-inverted iteration; ARPACK fallback on stagnation."""
    denom = float(mu_vec @ phi_vec)

    def project(w):
        return w - phi_vec * (mu_vec @ w) / denom

    try:
        eig2, _, res = _shift_invert_power(lu, A, project(start + rng.standard_normal(len(start)) * 0.1), project=project)
        if res < 1e-6:
            return float(-eig2), "deflated_power"
    except OracleError:
        pass
    # complex second pair or slow separation: fall back to Arnoldi
    vals = spla.eigs(A.astype(float), k=6, which="LR", return_eigenvectors=False)
    real_parts = np.sort(np.real(vals))[::-1]
    return float(-real_parts[1]), "arnoldi_fallback"


def refinement_drift(
    potential: PotentialSpec,
    interval: tuple,
    nx: int,
    nv: int,
    v_cut: float,
    gamma: float,
) -> tuple:
    """Relative change of lambda1 when the grid is doubled (convergence gate)."""
    base = grid_oracle_kl_1d(potential, interval, nx, nv, v_cut, gamma, want_lambda2=False)
    fine = grid_oracle_kl_1d(potential, interval, 2 * nx, 2 * nv, v_cut, gamma, want_lambda2=False)
    drift = abs(fine.lambda1 - base.lambda1) / fine.lambda1
    return base, fine, float(drift)
