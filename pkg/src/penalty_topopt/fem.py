"""Bilinear (Q1) finite elements on the structured grid.

Element matrices are integrated with 2x2 Gauss quadrature, which is exact
for products of Q1 gradients on square cells.  Global systems are reduced to
the free DOFs by symmetric elimination and solved either with a sparse
Cholesky factorization (CHOLMOD through cvxopt, SuperLU when cvxopt is not
importable) or with Jacobi-preconditioned conjugate gradients.
"""

from __future__ import annotations

import logging
import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AssemblyError, SolverError
from .grid import Grid, ResolvedBoundary

try:
    import cvxopt
    import cvxopt.cholmod
except ImportError:  # pragma: no cover - exercised only without cvxopt
    cvxopt = None

log = logging.getLogger(__name__)

_XI = np.array([-1.0, 1.0, 1.0, -1.0])
_ETA = np.array([-1.0, -1.0, 1.0, 1.0])
_GAUSS = (-1.0 / math.sqrt(3.0), 1.0 / math.sqrt(3.0))

SOLVER_RTOL = 1e-9
SINGULAR_PIVOT = 1e-13


def _shape_gradients(xi, eta, h):
    """``(2, 4)`` array of dN/dx, dN/dy at a reference point of an h-cell."""
    dxi = 0.25 * _XI * (1 + _ETA * eta)
    deta = 0.25 * _ETA * (1 + _XI * xi)
    return np.vstack([dxi, deta]) * (2.0 / h)


def plane_stress_matrix(nu):
    """Unit-modulus isotropic plane-stress matrix in Voigt form."""
    return np.array([[1.0, nu, 0.0],
                     [nu, 1.0, 0.0],
                     [0.0, 0.0, 0.5 * (1.0 - nu)]]) / (1.0 - nu * nu)


def strain_displacement(xi, eta, h):
    """``(3, 8)`` engineering-strain operator at a reference point."""
    g = _shape_gradients(xi, eta, h)
    b = np.zeros((3, 8))
    b[0, 0::2] = g[0]
    b[1, 1::2] = g[1]
    b[2, 0::2] = g[1]
    b[2, 1::2] = g[0]
    return b


def element_stiffness_elastic(nu, h=1.0):
    """8x8 plane-stress Q1 stiffness of an h-square with unit modulus."""
    d = plane_stress_matrix(nu)
    ke = np.zeros((8, 8))
    for xi in _GAUSS:
        for eta in _GAUSS:
            b = strain_displacement(xi, eta, h)
            ke += b.T @ d @ b * (h * h / 4.0)
    return 0.5 * (ke + ke.T)


def element_stiffness_scalar(h=1.0):
    """4x4 Q1 Laplace stiffness of an h-square."""
    ke = np.zeros((4, 4))
    for xi in _GAUSS:
        for eta in _GAUSS:
            g = _shape_gradients(xi, eta, h)
            ke += g.T @ g * (h * h / 4.0)
    return 0.5 * (ke + ke.T)


def assemble(grid: Grid, coeff, element_matrix) -> sp.csc_matrix:
    """Full global matrix ``sum_e coeff_e * K_e`` scattered to global DOFs."""
    coeff = np.asarray(coeff, dtype=float).ravel()
    if coeff.shape != (grid.n_elements,):
        raise AssemblyError(f"expected {grid.n_elements} coefficients, got {coeff.size}")
    if not np.all(coeff > 0):
        raise AssemblyError("element coefficients must be positive")
    nd = element_matrix.shape[0]
    edof = grid.element_dofs(nd // 4)
    n = grid.n_nodes * (nd // 4)
    rows = np.repeat(edof, nd, axis=1).ravel()
    cols = np.tile(edof, (1, nd)).ravel()
    vals = (coeff[:, None] * element_matrix.ravel()[None, :]).ravel()
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsc()


def solve_linear(matrix, rhs, fixed_dofs=(), fixed_values=(), method="direct",
                 rtol=SOLVER_RTOL, maxiter=None):
    """Solve ``K x = b`` with Dirichlet DOFs eliminated symmetrically.

    ``rhs`` may be a vector or an ``(n, k)`` block.  Returns the full
    solution with prescribed values in place.  ``method`` is ``"direct"``
    (sparse LU) or ``"cg"`` (Jacobi-preconditioned conjugate gradients with
    at most ``50 sqrt(n)`` iterations by default).
    """
    k = sp.csc_matrix(matrix)
    n = k.shape[0]
    b = np.asarray(rhs, dtype=float)
    single = b.ndim == 1
    if single:
        b = b[:, None]
    fixed = np.asarray(fixed_dofs, dtype=np.int64)
    values = np.asarray(fixed_values, dtype=float)
    free = np.setdiff1d(np.arange(n), fixed)

    x = np.zeros_like(b)
    x[fixed, :] = values[:, None]
    kff = k[free][:, free].tocsc()
    bf = b[free] - (k[free][:, fixed] @ x[fixed]) if len(fixed) else b[free]
    if method == "direct":
        try:
            lu = spla.splu(kff)
        except RuntimeError as exc:
            raise SolverError(f"singular system: {exc}") from exc
        xf = lu.solve(bf)
    elif method == "cg":
        xf = np.column_stack([_pcg(kff, bf[:, j], rtol, maxiter) for j in range(bf.shape[1])])
    else:
        raise ValueError(f"unknown solver method {method!r}")
    _check_residual(kff, xf, bf, rtol)
    x[free] = xf
    return x[:, 0] if single else x


def _pcg(kff, b, rtol, maxiter):
    n = kff.shape[0]
    if not np.any(b):
        return np.zeros(n)
    diag = kff.diagonal()
    if np.any(diag <= 0):
        raise SolverError("matrix has a nonpositive diagonal entry")
    precond = spla.LinearOperator(kff.shape, matvec=lambda r: r / diag)
    maxiter = maxiter or int(50 * math.sqrt(n)) + 1
    x, info = spla.cg(kff, b, rtol=rtol, atol=0.0, maxiter=maxiter, M=precond)
    if info != 0:
        res = np.linalg.norm(kff @ x - b) / np.linalg.norm(b)
        raise SolverError(f"conjugate gradients stopped after {maxiter} iterations "
                          f"with relative residual {res:.3e}", residual=res)
    return x


def _backward_error(kff, xf, bf):
    """Normwise backward error ``|b - K x| / (|K| |x| + |b|)`` per column."""
    xf = xf.reshape(len(xf), -1)
    bf = bf.reshape(len(bf), -1)
    knorm = spla.norm(kff, np.inf)
    res = np.linalg.norm(kff @ xf - bf, np.inf, axis=0)
    scale = knorm * np.linalg.norm(xf, np.inf, axis=0) + np.linalg.norm(bf, np.inf, axis=0)
    return np.where(scale > 0, res / np.where(scale > 0, scale, 1.0), res)


def _check_residual(kff, xf, bf, rtol):
    if not np.all(np.isfinite(xf)):
        raise SolverError("solution contains non-finite values (singular system?)")
    rel = _backward_error(kff, xf, bf)
    if np.any(rel > rtol):
        raise SolverError(f"relative residual {rel.max():.3e} exceeds {rtol:.1e}",
                          residual=float(rel.max()))


class FEModel:
    """Assembly and solves for one grid, element type and boundary set.

    The sparsity pattern of the reduced (free-DOF) matrix never changes, so
    its CSC structure and the symbolic Cholesky factorization are computed
    once and reused for every coefficient field.
    """

    def __init__(self, grid: Grid, element_matrix, boundary: ResolvedBoundary,
                 method="direct"):
        self.grid = grid
        self.ke = np.asarray(element_matrix, dtype=float)
        self.boundary = boundary
        self.method = method
        nd = self.ke.shape[0]
        self.dofs_per_node = nd // 4
        self.edof = grid.element_dofs(self.dofs_per_node)
        self.n_dofs = boundary.n_dofs
        self.free = boundary.free_dofs
        self.fixed = boundary.fixed_dofs
        self.fixed_values = boundary.fixed_values
        self.n_free = len(self.free)
        self._inhomogeneous = bool(np.any(self.fixed_values != 0))

        reduced = -np.ones(self.n_dofs, dtype=np.int64)
        reduced[self.free] = np.arange(self.n_free)
        r = reduced[np.repeat(self.edof, nd, axis=1)].ravel()
        c = reduced[np.tile(self.edof, (1, nd))].ravel()
        # lower triangle of the reduced matrix, column-major keys
        keep = (r >= 0) & (c >= 0) & (r >= c)
        keys = c[keep] * self.n_free + r[keep]
        ukeys, self._inverse = np.unique(keys, return_inverse=True)
        self._keep = np.flatnonzero(keep)
        self._rows = ukeys % self.n_free
        self._cols = ukeys // self.n_free
        self._indptr = np.concatenate(
            [[0], np.cumsum(np.bincount(self._cols, minlength=self.n_free))])
        self._nnz = len(ukeys)
        self._symbolic = None

    def reduced_lower(self, coeff) -> np.ndarray:
        """Nonzeros of the lower triangle of the reduced matrix (CSC order)."""
        coeff = np.asarray(coeff, dtype=float).ravel()
        if coeff.shape != (self.grid.n_elements,):
            raise AssemblyError(
                f"expected {self.grid.n_elements} coefficients, got {coeff.size}")
        if not np.all(coeff > 0):
            raise AssemblyError("element coefficients must be positive")
        vals = (coeff[:, None] * self.ke.ravel()[None, :]).ravel()[self._keep]
        return np.bincount(self._inverse, weights=vals, minlength=self._nnz)

    def reduced_matrix(self, coeff) -> sp.csc_matrix:
        low = sp.csc_matrix((self.reduced_lower(coeff), self._rows, self._indptr),
                            shape=(self.n_free, self.n_free))
        return (low + low.T - sp.diags(low.diagonal())).tocsc()

    def apply(self, coeff, field) -> np.ndarray:
        """Full matrix-vector product ``K(coeff) @ field`` element by element."""
        coeff = np.asarray(coeff, dtype=float).ravel()
        fe = coeff[:, None] * (np.asarray(field)[self.edof] @ self.ke.T)
        return np.bincount(self.edof.ravel(), weights=fe.ravel(), minlength=self.n_dofs)

    def element_products(self, a, b) -> np.ndarray:
        """Per-element ``a_e^T K_e b_e`` with the unit-coefficient element matrix."""
        ae = np.asarray(a)[self.edof]
        be = np.asarray(b)[self.edof]
        return np.einsum("ei,ij,ej->e", ae, self.ke, be)

    def solve(self, coeff, rhs) -> np.ndarray:
        """Solve ``K(coeff) x = rhs`` for one or more full right-hand sides.

        The Dirichlet DOFs of the boundary carry their prescribed values in
        every returned column.
        """
        b = np.asarray(rhs, dtype=float)
        single = b.ndim == 1
        if single:
            b = b[:, None]
        x = np.zeros_like(b)
        x[self.fixed, :] = self.fixed_values[:, None]
        bf = b[self.free].copy()
        if self._inhomogeneous:
            lift = self.apply(coeff, x[:, 0])
            bf -= lift[self.free][:, None]
        data = self.reduced_lower(coeff)
        if self.method == "direct":
            xf = self._direct(data, bf)
        elif self.method == "cg":
            kff = self._full_from_lower(data)
            xf = np.column_stack([_pcg(kff, bf[:, j], SOLVER_RTOL, None)
                                  for j in range(bf.shape[1])])
            _check_residual(kff, xf, bf, SOLVER_RTOL)
        else:
            raise ValueError(f"unknown solver method {self.method!r}")
        x[self.free] = xf
        return x[:, 0] if single else x

    def _full_from_lower(self, data):
        low = sp.csc_matrix((data, self._rows, self._indptr), shape=(self.n_free, self.n_free))
        return (low + low.T - sp.diags(low.diagonal())).tocsr()

    def _direct(self, data, bf):
        if cvxopt is None:
            kff = self._full_from_lower(data).tocsc()
            try:
                xf = spla.splu(kff).solve(bf)
            except RuntimeError as exc:
                raise SolverError(f"singular system: {exc}") from exc
            _check_residual(kff, xf, bf, SOLVER_RTOL)
            return xf
        a = cvxopt.spmatrix(data, self._rows, self._cols, (self.n_free, self.n_free))
        try:
            if self._symbolic is None:
                self._symbolic = cvxopt.cholmod.symbolic(a)
            factor = self._symbolic
            cvxopt.cholmod.numeric(a, factor)
        except ArithmeticError as exc:
            raise SolverError("matrix is not positive definite after constraint "
                              "elimination (missing Dirichlet constraints?)") from exc
        kff = self._full_from_lower(data)
        pivots = np.array(cvxopt.cholmod.diag(factor)).ravel() ** 2
        if pivots.min() <= SINGULAR_PIVOT * kff.diagonal().max():
            # rounding turns an exactly singular matrix into tiny pivots
            raise SolverError("matrix is numerically singular after constraint "
                              "elimination (missing Dirichlet constraints?)")

        def chol_solve(rhs):
            out = cvxopt.matrix(np.ascontiguousarray(rhs))
            cvxopt.cholmod.solve(factor, out)
            return np.array(out).reshape(rhs.shape)

        xf = chol_solve(bf)
        for _ in range(2):
            # iterative refinement with the same factor
            if np.all(_backward_error(kff, xf, bf) <= 1e-14):
                break
            xf = xf + chol_solve(bf - kff @ xf)
        _check_residual(kff, xf, bf, SOLVER_RTOL)
        return xf


# --- linear elasticity -------------------------------------------------------

def mechanical_model(grid: Grid, nu, boundary: ResolvedBoundary, method="direct") -> FEModel:
    return FEModel(grid, element_stiffness_elastic(nu), boundary, method)


def solve_mech(model: FEModel, chi_eps, mat):
    """State ``u`` (input load) and adjoint ``v`` (output load) at ``chi_eps``.

    Both share one factorization of ``a(chi_eps; ., .)`` whose element
    coefficient is ``1 / A(chi_eps)``.
    """
    coeff = 1.0 / np.asarray(mat.compliance(np.ravel(chi_eps)))
    f_in = model.boundary.load_vector("in")
    f_out = model.boundary.load_vector("out")
    x = model.solve(coeff, np.column_stack([f_in, f_out]))
    return x[:, 0], x[:, 1]


def solve_state_mech(model, chi_eps, mat):
    return solve_mech(model, chi_eps, mat)[0]


def solve_adjoint_mech(model, chi_eps, mat):
    return solve_mech(model, chi_eps, mat)[1]


def compute_stress(grid: Grid, u, chi_eps, mat) -> np.ndarray:
    """Centroid stress tensors ``(1/A(chi_eps)) E_0 eps(u)``, shape ``(n, 2, 2)``."""
    b = strain_displacement(0.0, 0.0, grid.h)
    strain = np.asarray(u)[grid.element_dofs(2)] @ b.T
    stress = strain @ plane_stress_matrix(mat.nu).T
    stress /= np.asarray(mat.compliance(np.ravel(chi_eps)))[:, None]
    out = np.empty((grid.n_elements, 2, 2))
    out[:, 0, 0] = stress[:, 0]
    out[:, 1, 1] = stress[:, 1]
    out[:, 0, 1] = out[:, 1, 0] = stress[:, 2]
    return out


def compute_strain(grid: Grid, u) -> np.ndarray:
    """Centroid engineering strains ``(n, 3)``: exx, eyy, gamma_xy."""
    b = strain_displacement(0.0, 0.0, grid.h)
    return np.asarray(u)[grid.element_dofs(2)] @ b.T


# --- heat conduction ---------------------------------------------------------

def thermal_model(grid: Grid, boundary: ResolvedBoundary, method="direct") -> FEModel:
    return FEModel(grid, element_stiffness_scalar(), boundary, method)


def heat_load(model: FEModel, q) -> np.ndarray:
    """Consistent nodal load of a piecewise constant source ``q``."""
    q = np.asarray(q, dtype=float).ravel()
    share = np.repeat(q * model.grid.cell_area / 4.0, 4)
    return np.bincount(model.edof.ravel(), weights=share, minlength=model.n_dofs)


def element_means(model: FEModel, t) -> np.ndarray:
    """Element integrals of a nodal field (exact for bilinear interpolation)."""
    return np.asarray(t)[model.edof].mean(axis=1) * model.grid.cell_area


def solve_heat_state(model: FEModel, chi_eps, mat):
    from .material import heat_coefficients
    kappa, q, _, _ = heat_coefficients(mat, np.ravel(chi_eps))
    return model.solve(kappa, heat_load(model, q))


def solve_heat_scaled(model: FEModel, chi_eps, mat, lam):
    """Inner minimizer of the heat penalty: the state problem with load ``lam/(lam+2)``."""
    from .material import heat_coefficients
    if lam <= 0:
        raise ValueError("penalty weight must be positive")
    kappa, q, _, _ = heat_coefficients(mat, np.ravel(chi_eps))
    return model.solve(kappa, heat_load(model, q) * (lam / (lam + 2.0)))
