"""Uniform cell-centered finite-volume grid on [0, L] with no-flux boundaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded


@dataclass(frozen=True)
class Grid1D:
    N: int
    L: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if not (np.isfinite(self.L) and self.L > 0):
            raise ValueError(f"L must be positive, got {self.L!r}")

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.N) + 0.5) * self.h


def _check(phi: np.ndarray, grid: Grid1D) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    if phi.shape[-1] != grid.N:
        raise ValueError(f"field has {phi.shape[-1]} cells, grid has {grid.N}")
    return phi


def laplacian_neumann(phi: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Three-point Laplacian along the last axis with zero-flux ghost cells.

    Written as a difference of face fluxes so that ``h * sum(lap)``
    telescopes to zero.
    """
    phi = _check(phi, grid)
    flux = np.zeros(phi.shape[:-1] + (grid.N + 1,))
    flux[..., 1:-1] = np.diff(phi, axis=-1) / grid.h
    return np.diff(flux, axis=-1) / grid.h


def integrate(phi: np.ndarray, grid: Grid1D) -> np.ndarray:
    phi = _check(phi, grid)
    return grid.h * np.sum(phi, axis=-1)


def face_gradient(phi: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Differences across the N-1 interior faces divided by h."""
    return np.diff(_check(phi, grid), axis=-1) / grid.h


def laplacian_bands(grid: Grid1D) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(sub, main, super) diagonals of the Neumann Laplacian matrix."""
    n, h2 = grid.N, grid.h**2
    main = np.full(n, -2.0 / h2)
    main[0] = main[-1] = -1.0 / h2
    if n == 1:
        main[:] = 0.0
    off = np.full(n - 1, 1.0 / h2)
    return off, main, off.copy()


def solve_shifted(M: float, tau: float, rhs: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Solve ``(M - tau*Lap) v = rhs`` along the last axis (no-flux)."""
    sub, main, sup = laplacian_bands(grid)
    ab = np.zeros((3, grid.N))
    ab[0, 1:] = -tau * sup
    ab[1] = M - tau * main
    ab[2, :-1] = -tau * sub
    rhs = np.asarray(rhs, dtype=float)
    flat = rhs.reshape(-1, grid.N).T
    return solve_banded((1, 1), ab, flat).T.reshape(rhs.shape)


def block_tridiag_solve(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Direct solve of a block-tridiagonal system.

    Parameters
    ----------
    lower : (n-1, m, m) array
        Block ``(j+1, j)``.
    diag : (n, m, m) array
        Block ``(j, j)``.
    upper : (n-1, m, m) array
        Block ``(j, j+1)``.
    rhs : (n, m) array

    Returns
    -------
    (n, m) array

    The unknowns are interleaved cell-major, giving a banded matrix with
    ``2m - 1`` sub- and super-diagonals that LAPACK's banded LU factorizes.
    """
    n, m, _ = diag.shape
    bw = 2 * m - 1
    size = n * m
    ab = np.zeros((2 * bw + 1, size))
    r = np.arange(m)[:, None]
    c = np.arange(m)[None, :]

    def put(blocks, row_off, col_off):
        k = blocks.shape[0]
        if k == 0:
            return
        jr = np.arange(k)[:, None, None] + row_off
        jc = np.arange(k)[:, None, None] + col_off
        rows = m * jr + r
        cols = m * jc + c
        ab[bw + rows - cols, cols] = blocks

    put(diag, 0, 0)
    put(lower, 1, 0)
    put(upper, 0, 1)
    sol = solve_banded((bw, bw), ab, np.asarray(rhs, dtype=float).reshape(size), check_finite=False)
    return sol.reshape(n, m)
