"""Brute-force reference implementations for tests and diagnostics.

Nothing here shares numerical kernels with the main path: the element
matrix is the closed-form bilinear stiffness, assembly is a dense double
loop, the perimeter is a direct double sum and projection is a full sort.
These routines are slow and size-capped; never call them in a run.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np

from .grid import Grid

MAX_DENSE_DOFS = 2000


@dataclass(frozen=True)
class OracleReport:
    quantity: str
    value: float
    oracle: float
    tolerance: float

    @property
    def abs_error(self) -> float:
        return abs(self.value - self.oracle)

    @property
    def rel_error(self) -> float:
        return self.abs_error / max(abs(self.oracle), 1e-30)

    @property
    def passed(self) -> bool:
        return self.rel_error <= self.tolerance

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.quantity}: value={self.value:.12g} oracle={self.oracle:.12g} "
                f"rel_err={self.rel_error:.3e} (tol {self.tolerance:.1e})")


def fd_gradient(objective, chi, direction, t: float = 1e-6) -> float:
    """Central difference ``(f(chi + t d) - f(chi - t d)) / (2 t)``."""
    chi = np.asarray(chi, dtype=float)
    direction = np.asarray(direction, dtype=float)
    return (objective(chi + t * direction) - objective(chi - t * direction)) / (2.0 * t)


def gaussian_weights_2d(eps: float, h: float, radius_factor: float = 4.0) -> np.ndarray:
    """Normalized 2D truncated Gaussian sampled on cell offsets, built directly."""
    k = int(math.floor(radius_factor * eps / h + 1e-9))
    w = np.empty((2 * k + 1, 2 * k + 1))
    for a in range(-k, k + 1):
        for b in range(-k, k + 1):
            w[a + k, b + k] = math.exp(-((a * h) ** 2 + (b * h) ** 2) / (2.0 * eps * eps))
    return w / w.sum()


def convolve_direct(chi, eps: float, h: float, radius_factor: float = 4.0) -> np.ndarray:
    """Zero-extended convolution by explicit neighbour summation."""
    chi = np.asarray(chi, dtype=float)
    w = gaussian_weights_2d(eps, h, radius_factor)
    k = w.shape[0] // 2
    ny, nx = chi.shape
    pad = np.zeros((ny + 2 * k, nx + 2 * k))
    pad[k:k + ny, k:k + nx] = chi
    out = np.zeros_like(chi)
    for a in range(2 * k + 1):
        for b in range(2 * k + 1):
            out += w[a, b] * pad[a:a + ny, b:b + nx]
    return out


def perimeter_double_sum(chi, eps: float, h: float, radius_factor: float = 4.0,
                         power: int = 1) -> float:
    """``1/2 sum_x sum_y G(x - y) |chi(x) - chi(y)|^power h^2`` over grid pairs.

    Both points range over the grid only, so a field equal to one
    everywhere has zero perimeter.  For fields vanishing within the kernel
    radius of the boundary this equals the zero-extended perimeter.
    """
    chi = np.asarray(chi, dtype=float)
    w = gaussian_weights_2d(eps, h, radius_factor)
    k = w.shape[0] // 2
    ny, nx = chi.shape
    total = 0.0
    for j in range(ny):
        for i in range(nx):
            for a in range(max(-k, -j), min(k, ny - 1 - j) + 1):
                for b in range(max(-k, -i), min(k, nx - 1 - i) + 1):
                    total += w[a + k, b + k] * abs(chi[j, i] - chi[j + a, i + b]) ** power
    return 0.5 * h * h * total


def projection_bruteforce(chi_bar, beta: float, mode: str = "inequality") -> np.ndarray:
    """Threshold projection from a full sort.

    Inequality mode scans candidate thresholds among the sorted values and
    keeps the smallest one whose strict superlevel set fits the budget.
    """
    chi_bar = np.asarray(chi_bar, dtype=float)
    flat = chi_bar.ravel()
    n = flat.size
    budget = int(math.floor(beta * n + 1e-9))
    out = np.zeros(n)
    if mode == "equality":
        order = sorted(range(n), key=lambda i: (-flat[i], i))
        for i in order[:budget]:
            out[i] = 1.0
        return out.reshape(chi_bar.shape)
    ascending = sorted(flat.tolist())
    for c in sorted(set(ascending)):
        # number of values strictly above c, read off the sorted list
        above = n - bisect.bisect_right(ascending, c)
        if above <= budget:
            out[flat > c] = 1.0
            return out.reshape(chi_bar.shape)
    return out.reshape(chi_bar.shape)


def element_stiffness_closed_form(nu: float) -> np.ndarray:
    """Unit-modulus plane-stress Q1 stiffness in closed form, DOFs ordered
    (x, y) per node counterclockwise from the lower-left corner."""
    k = np.array([1 / 2 - nu / 6, 1 / 8 + nu / 8, -1 / 4 - nu / 12, -1 / 8 + 3 * nu / 8,
                  -1 / 4 + nu / 12, -1 / 8 - nu / 8, nu / 6, 1 / 8 - 3 * nu / 8])
    idx = [[0, 1, 2, 3, 4, 5, 6, 7],
           [1, 0, 7, 6, 5, 4, 3, 2],
           [2, 7, 0, 5, 6, 3, 4, 1],
           [3, 6, 5, 0, 7, 2, 1, 4],
           [4, 5, 6, 7, 0, 1, 2, 3],
           [5, 4, 3, 2, 1, 0, 7, 6],
           [6, 3, 4, 1, 2, 7, 0, 5],
           [7, 2, 1, 4, 3, 6, 5, 0]]
    return np.array([[k[j] for j in row] for row in idx]) / (1.0 - nu * nu)


def scalar_stiffness_closed_form() -> np.ndarray:
    """Unit-conductivity Q1 Laplacian element matrix (independent of h in 2D)."""
    return np.array([[4, -1, -2, -1], [-1, 4, -1, -2],
                     [-2, -1, 4, -1], [-1, -2, -1, 4]], dtype=float) / 6.0


def dense_solve(grid: Grid, coeff, rhs, fixed_dofs, fixed_values=None,
                dofs_per_node: int = 2, nu: float = 0.3) -> np.ndarray:
    """Dense reference solve of ``K(coeff) x = rhs`` with Dirichlet rows.

    Raises ``ValueError`` if the system exceeds :data:`MAX_DENSE_DOFS` or the
    constrained matrix is not symmetric positive definite.
    """
    n = grid.n_nodes * dofs_per_node
    if n > MAX_DENSE_DOFS:
        raise ValueError(f"dense oracle is capped at {MAX_DENSE_DOFS} DOFs, got {n}")
    ke = element_stiffness_closed_form(nu) if dofs_per_node == 2 else scalar_stiffness_closed_form()
    coeff = np.asarray(coeff, dtype=float).ravel()
    k = np.zeros((n, n))
    for e in range(grid.n_elements):
        nodes = grid.connectivity[e]
        dofs = [int(nd) * dofs_per_node + c for nd in nodes for c in range(dofs_per_node)]
        for a, da in enumerate(dofs):
            for b, db in enumerate(dofs):
                k[da, db] += coeff[e] * ke[a, b]
    fixed = np.asarray(fixed_dofs, dtype=int)
    values = np.zeros(len(fixed)) if fixed_values is None else np.asarray(fixed_values, dtype=float)
    free = np.setdiff1d(np.arange(n), fixed)
    x = np.zeros(n)
    x[fixed] = values
    b = np.asarray(rhs, dtype=float)[free] - k[np.ix_(free, fixed)] @ values
    kff = k[np.ix_(free, free)]
    try:
        chol = np.linalg.cholesky(kff)
    except np.linalg.LinAlgError as exc:
        raise ValueError("constrained matrix is not symmetric positive definite") from exc
    y = np.linalg.solve(chol, b)
    x[free] = np.linalg.solve(chol.T, y)
    return x
