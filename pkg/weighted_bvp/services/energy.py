"""Energy functional I_lambda = phi - lambda psi, its gradient and the norm/energy bounds."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch
from .assembly import SystemMatrix, residual
from .grid_problem import GridFunction, ProblemInstance
from .spectral import BOUND_SLACK, SpectrumSummary

logger = logging.getLogger(__name__)


def euclidean_norm(U: GridFunction) -> float:
    return float(np.linalg.norm(U.flat))


def max_norm(U: GridFunction) -> float:
    return float(np.max(np.abs(U.values)))


def _check_order(M: SystemMatrix, U: GridFunction) -> None:
    if M.order != U.m * U.n:
        raise ShapeMismatch(f"grid function of shape {U.shape} does not match order {M.order}")


def phi(M: SystemMatrix, U: GridFunction) -> float:
    _check_order(M, U)
    return 0.5 * M.quadratic_form(U.flat)


def psi(instance: ProblemInstance, U: GridFunction) -> float:
    instance.check_shape(U)
    return float(np.sum(instance.nonlinearity.F_values(U.values)))


@dataclass(frozen=True)
class EnergyBreakdown:
    phi: float
    psi: float
    total: float
    lam: float

    def to_dict(self) -> dict:
        return {"phi": self.phi, "psi": self.psi, "total": self.total, "lambda": self.lam}

    @classmethod
    def from_dict(cls, data: dict) -> "EnergyBreakdown":
        return cls(
            phi=float(data["phi"]),
            psi=float(data["psi"]),
            total=float(data["total"]),
            lam=float(data["lambda"]),
        )


def energy(
    instance: ProblemInstance, M: SystemMatrix, U: GridFunction, lam: float
) -> EnergyBreakdown:
    quadratic = phi(M, U)
    potential = psi(instance, U)
    return EnergyBreakdown(phi=quadratic, psi=potential, total=quadratic - lam * potential, lam=lam)


def energy_value(instance: ProblemInstance, M: SystemMatrix, flat: np.ndarray, lam: float) -> float:
    """I_lambda on a flat vector; the hot path for line searches."""
    values = np.reshape(flat, (instance.m, instance.n), order="F")
    potential = float(np.sum(instance.nonlinearity.F_values(values)))
    return 0.5 * M.quadratic_form(flat) - lam * potential


def gradient(
    instance: ProblemInstance, M: SystemMatrix, U: GridFunction, lam: float
) -> GridFunction:
    """MU - lambda H(U)."""
    return residual(instance, U, lam, M)


def gradient_vector(
    instance: ProblemInstance, M: SystemMatrix, flat: np.ndarray, lam: float
) -> np.ndarray:
    values = np.reshape(flat, (instance.m, instance.n), order="F")
    forcing = instance.nonlinearity.f_values(values).flatten(order="F")
    return M.matvec(flat) - lam * forcing


@dataclass(frozen=True)
class BoundsReport:
    """Both sides of 1/2 l1 |U|^2 <= phi <= 1/2 l_mn |U|^2 and |U|_inf^2 <= 2 phi / l1."""

    lower: float
    phi: float
    upper: float
    max_norm_squared: float
    max_norm_bound: float
    energy_chain_holds: bool
    max_norm_chain_holds: bool

    @property
    def holds(self) -> bool:
        return self.energy_chain_holds and self.max_norm_chain_holds


def _le(a: float, b: float) -> bool:
    return a <= b + BOUND_SLACK * max(abs(a), abs(b))


def check_bounds(
    M: SystemMatrix, spectrum: SpectrumSummary, U: GridFunction
) -> BoundsReport:
    quadratic = phi(M, U)
    norm2 = euclidean_norm(U) ** 2
    lower = 0.5 * spectrum.lambda_min * norm2
    upper = 0.5 * spectrum.lambda_max * norm2
    sup2 = max_norm(U) ** 2
    sup_bound = 2.0 * quadratic / spectrum.lambda_min

    report = BoundsReport(
        lower=lower,
        phi=quadratic,
        upper=upper,
        max_norm_squared=sup2,
        max_norm_bound=sup_bound,
        energy_chain_holds=_le(lower, quadratic) and _le(quadratic, upper),
        max_norm_chain_holds=_le(sup2, sup_bound),
    )
    if not report.holds:
        logger.warning(f"Norm bounds violated: {report}")
    return report
