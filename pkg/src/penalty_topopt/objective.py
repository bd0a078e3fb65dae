"""Penalized objectives and their design sensitivities.

Both physics are written as ``L(chi, frozen state)``: the state variables
(stresses for the mechanism, temperature for heat) are the inner minimizers
computed at the current iterate and are held fixed while ``chi`` varies,
except for the ``min g`` term which is re-solved at every ``chi``.  At the
iterate itself the penalty residual of the stress form vanishes and ``L``
reduces to the mutual energy plus the perimeter term.

Element integrals of quadratic state quantities are computed with the exact
element matrices rather than centroid samples.  This keeps the discrete
identities (reciprocity, ``G = l_in(u) + l_out(v)``, zero residual at the
inner minimum) exact up to solver round-off.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import fem
from .errors import ConfigurationError
from .grid import BoundarySpec, Grid, resolve_boundary
from .material import ElasticMaterial, HeatMaterial, heat_coefficients
from .perimeter import KernelSpec, convolve, perimeter_subgrad, perimeter_value

CONSTRAINT_MODES = ("inequality", "equality")
FORMULATIONS = ("stress", "displacement-adjoint")


@dataclass(frozen=True)
class PenaltyParams:
    """Parameters of the penalized problem and its descent loop.

    ``eps`` defaults to the cell size and ``delta`` (the line-search
    termination measure, in area units) to two cell areas when left as
    ``None``; see :meth:`resolved`.
    """

    lam: float = 1.0
    gamma: float = 0.1
    eps: float | None = None
    beta: float = 0.3
    delta: float | None = None
    constraint: str = "inequality"
    formulation: str = "stress"
    max_outer_iters: int = 500

    def __post_init__(self):
        if not self.lam > 0:
            raise ConfigurationError("penalty weight lam must be positive")
        if not self.gamma >= 0:
            raise ConfigurationError("perimeter weight gamma must be nonnegative")
        if self.eps is not None and not self.eps > 0:
            raise ConfigurationError("smoothing length eps must be positive")
        if not 0 < self.beta < 1:
            raise ConfigurationError(f"volume fraction beta must lie in (0, 1), got {self.beta}")
        if self.delta is not None and not self.delta > 0:
            raise ConfigurationError("line-search measure delta must be positive")
        if self.constraint not in CONSTRAINT_MODES:
            raise ConfigurationError(f"unknown constraint mode {self.constraint!r}")
        if self.formulation not in FORMULATIONS:
            raise ConfigurationError(f"unknown formulation {self.formulation!r}")
        if int(self.max_outer_iters) != self.max_outer_iters or self.max_outer_iters < 0:
            raise ConfigurationError("max_outer_iters must be a nonnegative integer")

    def resolved(self, h: float) -> "PenaltyParams":
        return replace(self,
                       eps=h if self.eps is None else self.eps,
                       delta=2.0 * h * h if self.delta is None else self.delta)


@dataclass(frozen=True)
class ObjectiveBreakdown:
    total: float
    physical: float
    penalty: float
    perimeter: float
    perimeter_value: float
    volume: float


class _SolveCache:
    """Remembers the most recent solves keyed by the smoothed design."""

    def __init__(self, size=2):
        self.size = size
        self._items: list[tuple[bytes, object]] = []

    def get(self, key):
        for k, v in self._items:
            if k == key:
                return v
        return None

    def put(self, key, value):
        self._items = [(key, value)] + [kv for kv in self._items if kv[0] != key]
        del self._items[self.size:]


class _Physics:
    def __init__(self, grid: Grid, params: PenaltyParams):
        self.grid = grid
        self.params = params.resolved(grid.h)
        self.kernel = KernelSpec(self.params.eps, grid.h)
        self.n_solves = 0
        self._cache = _SolveCache()
        if params.formulation == "stress" and params.lam <= 0.5 and isinstance(self, Mechanism):
            warnings.warn("lam <= 1/2: the stress-form penalty is not guaranteed "
                          "to reproduce the original problem", stacklevel=3)

    def _as_field(self, chi) -> np.ndarray:
        chi = np.asarray(chi, dtype=float)
        if chi.size != self.grid.n_elements:
            raise ValueError(f"design has {chi.size} values, grid has {self.grid.n_elements} elements")
        return chi.reshape(self.grid.shape)

    def smooth(self, chi) -> np.ndarray:
        return convolve(self._as_field(chi), self.kernel)

    def _perimeter(self, chi):
        value = perimeter_value(chi, self.kernel)
        return value, self.params.gamma / self.params.eps * value

    def _perimeter_gradient(self, chi):
        # exact derivative of the perimeter term used in eval_L
        return 2.0 * self.params.gamma / self.params.eps * perimeter_subgrad(chi, self.kernel)

    def volume_fraction(self, chi) -> float:
        return float(np.mean(chi))

    def inner_product(self, a, b) -> float:
        """L2 inner product of two element fields."""
        return float(np.sum(np.asarray(a) * np.asarray(b)) * self.grid.cell_area)


# --- compliant mechanism -----------------------------------------------------

@dataclass
class MechState:
    """Inner minimizers at one design plus derived element integrals.

    ``e_uu``, ``e_vv``, ``e_uv`` are element integrals of ``E_0 eps:eps``
    products; the frozen stress integrals ``int E_0^-1 sigma:rho`` etc. are
    these divided by ``A^2``.
    """

    chi: np.ndarray
    chi_eps: np.ndarray
    compliance: np.ndarray
    u: np.ndarray
    v: np.ndarray
    e_uu: np.ndarray
    e_vv: np.ndarray
    e_uv: np.ndarray
    G: float
    J: float
    l_in_v: float
    breakdown: ObjectiveBreakdown | None = None

    @property
    def m_uv(self):
        return self.e_uv / self.compliance ** 2

    @property
    def m_uu(self):
        return self.e_uu / self.compliance ** 2

    @property
    def m_vv(self):
        return self.e_vv / self.compliance ** 2


class Mechanism(_Physics):
    """Compliant mechanism: minimize the output work under the input load."""

    def __init__(self, grid: Grid, bcs: BoundarySpec, mat: ElasticMaterial,
                 params: PenaltyParams, method="direct"):
        super().__init__(grid, params)
        self.mat = mat
        self.boundary = resolve_boundary(grid, bcs, 2)
        self.model = fem.mechanical_model(grid, mat.nu, self.boundary, method)
        self.f_in = self.boundary.load_vector("in")
        self.f_out = self.boundary.load_vector("out")
        self.max_reciprocity_error = 0.0

    def _solve(self, chi_eps):
        key = chi_eps.tobytes()
        hit = self._cache.get(key)
        if hit is None:
            u, v = fem.solve_mech(self.model, chi_eps, self.mat)
            self.n_solves += 1
            j_out = float(self.f_out @ u)
            gap = abs(float(self.f_in @ v) - j_out) / max(abs(j_out), 1e-300)
            self.max_reciprocity_error = max(self.max_reciprocity_error, gap)
            hit = (u, v)
            self._cache.put(key, hit)
        return hit

    def eval_G(self, chi_eps):
        """``G = min g~``: value, centroid stresses and the two displacement fields."""
        chi_eps = np.asarray(chi_eps, dtype=float).reshape(self.grid.shape)
        u, v = self._solve(chi_eps)
        a = np.asarray(self.mat.compliance(chi_eps.ravel()))
        value = float(np.sum((self.model.element_products(u, u)
                              + self.model.element_products(v, v)) / a))
        sigma = fem.compute_stress(self.grid, u, chi_eps, self.mat)
        rho = fem.compute_stress(self.grid, v, chi_eps, self.mat)
        return value, sigma, rho, u, v

    def state(self, chi) -> MechState:
        chi = self._as_field(chi).copy()
        chi_eps = self.smooth(chi)
        u, v = self._solve(chi_eps)
        a = np.asarray(self.mat.compliance(chi_eps.ravel()))
        e_uu = self.model.element_products(u, u)
        e_vv = self.model.element_products(v, v)
        e_uv = self.model.element_products(u, v)
        st = MechState(chi, chi_eps, a, u, v, e_uu, e_vv, e_uv,
                       G=float(np.sum((e_uu + e_vv) / a)),
                       J=float(self.f_out @ u), l_in_v=float(self.f_in @ v))
        st.breakdown = self.eval_L(chi, st)
        return st

    def physical_objective(self, state: MechState) -> float:
        """Output work ``l_out(u)``."""
        return state.J

    def eval_L(self, chi, state: MechState) -> ObjectiveBreakdown:
        """Penalized objective at ``chi`` with the state of ``state`` frozen."""
        chi = self._as_field(chi)
        if chi.shape != state.chi.shape:
            raise ValueError("design and frozen state live on different grids")
        lam = self.params.lam
        chi_eps = self.smooth(chi)
        a = np.asarray(self.mat.compliance(chi_eps.ravel()))
        if self.params.formulation == "stress":
            physical = float(np.sum(a * state.m_uv))
            g_tilde = float(np.sum(a * (state.m_uu + state.m_vv)))
            if np.array_equal(chi_eps, state.chi_eps):
                g_min = state.G
            else:
                u, v = self._solve(chi_eps)
                g_min = float(np.sum((self.model.element_products(u, u)
                                      + self.model.element_products(v, v)) / a))
            penalty = lam * (g_tilde - g_min)
        else:
            # displacement form: the inner displacements are re-minimized at
            # every trial design, so the penalty vanishes identically and the
            # objective is the output work of the fresh state.
            u, _ = self._solve(chi_eps)
            physical = float(self.f_out @ u)
            penalty = 0.0
        p_value, p_term = self._perimeter(chi)
        return ObjectiveBreakdown(physical + penalty + p_term, physical, penalty,
                                  p_term, p_value, self.volume_fraction(chi))

    def descent_field(self, state: MechState) -> np.ndarray:
        """Derivative field of ``eval_L`` at the state's own design.

        The penalty terms cancel there, leaving the smoothed mutual energy
        density weighted by ``A'`` plus the perimeter derivative.  The
        displacement form uses the same field (adjoint sensitivity).
        """
        dens = (np.asarray(self.mat.compliance_deriv(state.chi_eps.ravel()))
                * state.m_uv / self.grid.cell_area).reshape(self.grid.shape)
        return convolve(dens, self.kernel) + self._perimeter_gradient(state.chi)

    def stresses(self, state: MechState):
        return (fem.compute_stress(self.grid, state.u, state.chi_eps, self.mat),
                fem.compute_stress(self.grid, state.v, state.chi_eps, self.mat))


# --- heat transfer -----------------------------------------------------------

@dataclass
class HeatState:
    chi: np.ndarray
    chi_eps: np.ndarray
    T_star: np.ndarray
    T: np.ndarray
    e_star: np.ndarray
    e_t: np.ndarray
    i_star: np.ndarray
    i_t: np.ndarray
    min_g: float
    J: float
    breakdown: ObjectiveBreakdown | None = None


class HeatTransfer(_Physics):
    """Heat dissipation with design-dependent conductivity and source."""

    def __init__(self, grid: Grid, bcs: BoundarySpec, mat: HeatMaterial,
                 params: PenaltyParams, method="direct"):
        super().__init__(grid, params)
        self.mat = mat
        self.boundary = resolve_boundary(grid, bcs, 1)
        if len(self.boundary.fixed_dofs) == 0:
            raise ConfigurationError("heat problem needs a temperature segment")
        self.model = fem.thermal_model(grid, self.boundary, method)

    @property
    def load_factor(self) -> float:
        lam = self.params.lam
        return lam / (lam + 2.0)

    def _solve(self, chi_eps):
        """``(T_star, T)`` at ``chi_eps`` from one factorization."""
        key = chi_eps.tobytes()
        hit = self._cache.get(key)
        if hit is None:
            kappa, q, _, _ = heat_coefficients(self.mat, chi_eps.ravel())
            f = fem.heat_load(self.model, q)
            x = self.model.solve(kappa, np.column_stack([f, self.load_factor * f]))
            self.n_solves += 1
            hit = (x[:, 0], x[:, 1])
            self._cache.put(key, hit)
        return hit

    def _min_g(self, chi_eps, kappa, q):
        t_star, _ = self._solve(chi_eps)
        e = self.model.element_products(t_star, t_star)
        i = fem.element_means(self.model, t_star)
        return 0.5 * float(np.sum(kappa * e)) - float(np.sum(q * i))

    def state(self, chi) -> HeatState:
        chi = self._as_field(chi).copy()
        chi_eps = self.smooth(chi)
        t_star, t = self._solve(chi_eps)
        kappa, q, _, _ = heat_coefficients(self.mat, chi_eps.ravel())
        e_star = self.model.element_products(t_star, t_star)
        i_star = fem.element_means(self.model, t_star)
        st = HeatState(chi, chi_eps, t_star, t, e_star,
                       self.model.element_products(t, t), i_star,
                       fem.element_means(self.model, t),
                       min_g=0.5 * float(np.sum(kappa * e_star)) - float(np.sum(q * i_star)),
                       J=float(np.sum(q * i_star)))
        st.breakdown = self.eval_L(chi, st)
        return st

    def physical_objective(self, state: HeatState) -> float:
        """Heat generation weighted temperature ``int q(chi) T*``."""
        return state.J

    def eval_L(self, chi, state: HeatState) -> ObjectiveBreakdown:
        chi = self._as_field(chi)
        if chi.shape != state.chi.shape:
            raise ValueError("design and frozen state live on different grids")
        lam = self.params.lam
        chi_eps = self.smooth(chi)
        kappa, q, _, _ = heat_coefficients(self.mat, chi_eps.ravel())
        a_t = float(np.sum(kappa * state.e_t))
        l_t = float(np.sum(q * state.i_t))
        if np.array_equal(chi_eps, state.chi_eps):
            min_g = state.min_g
        else:
            min_g = self._min_g(chi_eps, kappa, q)
        penalty = lam * (0.5 * a_t - l_t - min_g)
        p_value, p_term = self._perimeter(chi)
        return ObjectiveBreakdown(a_t + penalty + p_term, a_t, penalty, p_term,
                                  p_value, self.volume_fraction(chi))

    def descent_field(self, state: HeatState) -> np.ndarray:
        """Derivative field of ``eval_L`` at the state's own design."""
        lam = self.params.lam
        _, _, dkappa, dq = heat_coefficients(self.mat, state.chi_eps.ravel())
        dens = (dkappa * ((1.0 + 0.5 * lam) * state.e_t - 0.5 * lam * state.e_star)
                - lam * dq * (state.i_t - state.i_star)) / self.grid.cell_area
        return convolve(dens.reshape(self.grid.shape), self.kernel) + self._perimeter_gradient(state.chi)
