"""Player payoffs, the shared potential function, and its derivatives.

Each non-anchor node i has payoff

    J_i(x) = sum_{ss neighbors j} (||x_i - x_j||^2 - d_ij^2)^2
           + sum_{as neighbors l} (||x_i - a_l||^2 - d_il^2)^2

with a_l the measured anchor positions.  The potential

    Phi(x) = sum_{ss edges} (...)^2 + sum_{as edges} (...)^2

sums every such term once; anchor-anchor terms are constant in x and
excluded.  A unilateral change of x_i changes Phi and J_i by exactly
the same amount, because Phi - J_i collects only terms without x_i.

Derivatives come from the residual/rigidity-matrix factorization
(``rho``, ``rbar`` below):

    Phi      = ||rho||^2
    grad Phi = 4 rbar^T rho
    hess Phi = 4 (2 rbar^T rbar - L (x) I_2)

with L the residual coupling matrix (kron by the 2x2 identity).  These
factors match central finite differences of Phi; see the tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import MeasurementSet, SensorNetwork
from .rigidity import lambda_matrix, revised_system

__all__ = [
    "Derivatives",
    "payoff",
    "potential",
    "gradient",
    "hessian",
    "derivatives",
    "check_potential_identity",
]


@dataclass(frozen=True, eq=False)
class Derivatives:
    """Potential value with its gradient and Hessian at one profile."""

    value: float
    gradient: np.ndarray
    hessian: np.ndarray


def payoff(i: int, x: np.ndarray, network: SensorNetwork,
           measurements: MeasurementSet) -> float:
    """Localization-accuracy payoff of player ``i`` at profile ``x``."""
    if not 0 <= i < network.n_free:
        raise ValueError(f"player index {i} out of range")
    pts = np.asarray(x, dtype=float).reshape(-1, 2)
    total = 0.0
    for t, (a, b) in enumerate(network.edges_ss):
        if i in (a, b):
            d = pts[a] - pts[b]
            total += (d @ d - measurements.d_sq_ss[t]) ** 2
    for t, (a, l) in enumerate(network.edges_as):
        if a == i:
            d = pts[a] - measurements.anchors_measured[l]
            total += (d @ d - measurements.d_sq_as[t]) ** 2
    return float(total)


def potential(x: np.ndarray, network: SensorNetwork,
              measurements: MeasurementSet) -> float:
    """Network-wide potential: squared norm of the residual vector."""
    rho, _ = revised_system(x, network, measurements)
    return float(rho @ rho)


def gradient(x: np.ndarray, network: SensorNetwork,
             measurements: MeasurementSet) -> np.ndarray:
    """Analytic gradient of the potential, entries (2i, 2i+1) per player."""
    rho, rbar = revised_system(x, network, measurements)
    return 4.0 * (rbar.T @ rho)


def hessian(x: np.ndarray, network: SensorNetwork,
            measurements: MeasurementSet) -> np.ndarray:
    """Analytic Hessian of the potential (symmetric 2N x 2N)."""
    rho, rbar = revised_system(x, network, measurements)
    lam = lambda_matrix(rho, network)
    return 4.0 * (2.0 * (rbar.T @ rbar) - np.kron(lam, np.eye(2)))


def derivatives(x: np.ndarray, network: SensorNetwork,
                measurements: MeasurementSet) -> Derivatives:
    """Value, gradient and Hessian in a single assembly pass."""
    rho, rbar = revised_system(x, network, measurements)
    lam = lambda_matrix(rho, network)
    return Derivatives(
        value=float(rho @ rho),
        gradient=4.0 * (rbar.T @ rho),
        hessian=4.0 * (2.0 * (rbar.T @ rbar) - np.kron(lam, np.eye(2))),
    )


def check_potential_identity(x: np.ndarray, i: int, deviation: np.ndarray,
                             network: SensorNetwork,
                             measurements: MeasurementSet) -> float:
    """Gap |dPhi - dJ_i| for a unilateral deviation of player ``i``.

    ``deviation`` is the offset added to x_i; all four function values
    are evaluated independently, so the returned gap measures only
    floating-point summation noise.  Zero deviation returns exactly 0.
    """
    x = np.asarray(x, dtype=float).ravel()
    x_dev = x.copy()
    x_dev[2 * i:2 * i + 2] += np.asarray(deviation, dtype=float)
    d_phi = (potential(x_dev, network, measurements)
             - potential(x, network, measurements))
    d_pay = (payoff(i, x_dev, network, measurements)
             - payoff(i, x, network, measurements))
    return abs(d_phi - d_pay)
