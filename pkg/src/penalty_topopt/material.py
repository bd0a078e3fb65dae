"""Design-to-coefficient interpolation laws.

Three families are used:

* the compliance-linear law ``A(chi) = (1/E_max - 1/E_min) chi + 1/E_min``
  whose reciprocal is the element stiffness factor,
* the generalized material interpolation ``Y(k1, k2, p, chi)``, a weighted
  power mean of ``k1`` and ``k2`` (arithmetic for p = 1, harmonic for
  p = -1, geometric in the limit p -> 0),
* linear interpolation of heat generation rates.

All functions accept scalars or numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError

_CHI_TOL = 1e-12
_P_ZERO = 1e-12


def _check_chi(chi):
    chi = np.asarray(chi, dtype=float)
    if not np.all(np.isfinite(chi)):
        raise DomainError("design values must be finite")
    if chi.size and (chi.min() < -_CHI_TOL or chi.max() > 1 + _CHI_TOL):
        raise DomainError("design values must lie in [0, 1]")
    return np.clip(chi, 0.0, 1.0)


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class GmifParams:
    k1: float
    k2: float
    p: float

    def __post_init__(self):
        if not (self.k1 > 0 and self.k2 > 0):
            raise DomainError("GMIF coefficients must be positive")
        if not np.isfinite(self.p):
            raise DomainError("GMIF exponent must be finite")


def gmif_eval(g: GmifParams, chi):
    """``[(k1^p - k2^p) chi + k2^p]^(1/p)``, geometric mean at p = 0."""
    chi = _check_chi(chi)
    if abs(g.p) < _P_ZERO:
        return _out(g.k1 ** chi * g.k2 ** (1.0 - chi))
    a, b = g.k1 ** g.p, g.k2 ** g.p
    return _out(((a - b) * chi + b) ** (1.0 / g.p))


def gmif_deriv(g: GmifParams, chi):
    """Derivative of :func:`gmif_eval` with respect to ``chi``."""
    chi = _check_chi(chi)
    if abs(g.p) < _P_ZERO:
        y = g.k1 ** chi * g.k2 ** (1.0 - chi)
        return _out(y * np.log(g.k1 / g.k2))
    a, b = g.k1 ** g.p, g.k2 ** g.p
    base = (a - b) * chi + b
    return _out(base ** (1.0 / g.p - 1.0) * (a - b) / g.p)


ELASTIC_INTERPS = ("linear-compliance", "linear-stiffness", "gmif")
HEAT_INTERPS = ("linear", "gmif")


@dataclass(frozen=True)
class ElasticMaterial:
    """Two-phase isotropic plane-stress material.

    ``interp`` selects how the stiffness factor ``1/A(chi)`` depends on the
    design: ``linear-compliance`` (the default) makes ``A`` affine,
    ``linear-stiffness`` makes ``1/A`` affine, ``gmif`` uses the power mean
    with exponent ``p``.
    """

    e_max: float
    e_min: float
    nu: float = 0.3
    interp: str = "linear-compliance"
    p: float | None = None

    def __post_init__(self):
        if not 0 < self.e_min < self.e_max:
            raise ConfigurationError("need 0 < e_min < e_max")
        if not 0 <= self.nu < 0.5:
            raise ConfigurationError("Poisson ratio must lie in [0, 0.5)")
        if self.interp not in ELASTIC_INTERPS:
            raise ConfigurationError(f"unknown elastic interpolation {self.interp!r}")
        if self.interp == "gmif" and self.p is None:
            raise ConfigurationError("gmif interpolation needs an exponent p")

    @property
    def gmif(self) -> GmifParams:
        return GmifParams(self.e_max, self.e_min, self.p)

    def compliance(self, chi):
        """Compliance factor ``A(chi)``; the stiffness factor is ``1/A``."""
        if self.interp == "linear-compliance":
            return compliance_A(self, chi)
        chi = _check_chi(chi)
        if self.interp == "linear-stiffness":
            return _out(1.0 / ((self.e_max - self.e_min) * chi + self.e_min))
        return _out(1.0 / np.asarray(gmif_eval(self.gmif, chi)))

    def compliance_deriv(self, chi):
        if self.interp == "linear-compliance":
            chi = _check_chi(chi)
            return _out(np.full_like(chi, 1.0 / self.e_max - 1.0 / self.e_min))
        chi = _check_chi(chi)
        if self.interp == "linear-stiffness":
            e = (self.e_max - self.e_min) * chi + self.e_min
            return _out(-(self.e_max - self.e_min) / e ** 2)
        y = np.asarray(gmif_eval(self.gmif, chi))
        return _out(-np.asarray(gmif_deriv(self.gmif, chi)) / y ** 2)


def compliance_A(mat: ElasticMaterial, chi):
    """``(1/E_max - 1/E_min) chi + 1/E_min``.

    Evaluated as ``chi / E_max + (1 - chi) / E_min`` so both endpoints are
    exact.
    """
    chi = _check_chi(chi)
    return _out(chi / mat.e_max + (1.0 - chi) / mat.e_min)


@dataclass(frozen=True)
class HeatMaterial:
    """Conducting phase (``kappa1``, ``q1``) inside a weak, hot background."""

    kappa1: float
    kappa2: float
    q1: float
    q2: float
    interp_kappa: str = "linear"
    p: float | None = None

    def __post_init__(self):
        if not self.kappa1 > self.kappa2 > 0:
            raise ConfigurationError("need kappa1 > kappa2 > 0")
        if not self.q2 >= self.q1 > 0:
            raise ConfigurationError("need q2 >= q1 > 0")
        if self.interp_kappa not in HEAT_INTERPS:
            raise ConfigurationError(f"unknown conductivity interpolation {self.interp_kappa!r}")
        if self.interp_kappa == "gmif" and self.p is None:
            raise ConfigurationError("gmif interpolation needs an exponent p")


def heat_coefficients(mat: HeatMaterial, chi):
    """Return ``(kappa, q, dkappa_dchi, dq_dchi)`` at ``chi``.

    The source rate is always linear in ``chi``; the conductivity follows
    ``mat.interp_kappa``.
    """
    chi = _check_chi(chi)
    q = mat.q1 * chi + mat.q2 * (1.0 - chi)
    dq = np.full_like(chi, mat.q1 - mat.q2)
    if mat.interp_kappa == "linear":
        kappa = mat.kappa1 * chi + mat.kappa2 * (1.0 - chi)
        dkappa = np.full_like(chi, mat.kappa1 - mat.kappa2)
    else:
        g = GmifParams(mat.kappa1, mat.kappa2, mat.p)
        kappa = np.asarray(gmif_eval(g, chi))
        dkappa = np.asarray(gmif_deriv(g, chi))
    return _out(kappa), _out(q), _out(dkappa), _out(dq)
