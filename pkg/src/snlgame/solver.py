"""Stationary-point search for the localization potential.

The potential is an exact sum of squares of the residual vector, so the
default local method is Levenberg-Marquardt on the residuals (Jacobian
= 2 x revised reduced rigidity matrix).  A gradient-descent method with
Armijo backtracking is kept as a reference.  Both accept a step only if
the potential does not increase, and both project every iterate onto
the feasible box.

The global search is a deterministic multi-start: the first start puts
every player at the measured-anchor centroid, the rest are uniform in
the initialization box.  Converged points are deduplicated by position
and the lowest-potential one is reported together with the fraction of
starts that reached it, which serves as uniqueness evidence.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .network import MeasurementSet, SensorNetwork
from .potential import potential
from .rigidity import lambda_matrix, revised_system

__all__ = [
    "SolveOptions",
    "StationaryPoint",
    "SolveResult",
    "default_box",
    "local_minimize",
    "multistart_solve",
    "classify_stationary",
    "mean_localization_error",
]

log = logging.getLogger(__name__)

# Positions closer than this (inf-norm) are considered the same point.
DEDUP_TOL = 1e-6
# Potential values within this of the minimum tie; lowest start index wins.
VALUE_TIE_TOL = 1e-12
# Relative eigenvalue band around zero treated as indeterminate.
PSD_TOL = 1e-8

METHODS = ("gauss-newton-lm", "gradient-descent-armijo")


@dataclass(frozen=True)
class SolveOptions:
    starts: int = 64
    max_iterations: int = 300
    grad_tolerance: float = 1e-7
    step_tolerance: float = 1e-14
    seed: int = 0
    init_box: np.ndarray | None = None  # [[xmin, ymin], [xmax, ymax]]
    method: str = "gauss-newton-lm"

    def __post_init__(self):
        if self.starts < 1 or self.max_iterations < 1:
            raise ValueError("starts and max_iterations must be positive")
        if self.grad_tolerance <= 0 or self.step_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")


@dataclass(frozen=True, eq=False)
class StationaryPoint:
    x: np.ndarray
    value: float
    grad_inf_norm: float
    min_hess_eigenvalue: float
    max_hess_eigenvalue: float
    classification: str  # local-NE | saddle | indeterminate
    iterations: int
    start_index: int

    def converged(self, opts: SolveOptions) -> bool:
        return self.grad_inf_norm <= opts.grad_tolerance

    def to_dict(self) -> dict:
        return {
            "positions": [[float(a), float(b)] for a, b in self.x.reshape(-1, 2)],
            "value": float(self.value),
            "grad_inf_norm": float(self.grad_inf_norm),
            "min_hess_eigenvalue": float(self.min_hess_eigenvalue),
            "max_hess_eigenvalue": float(self.max_hess_eigenvalue),
            "classification": self.classification,
            "iterations": self.iterations,
            "start_index": self.start_index,
        }


@dataclass(frozen=True, eq=False)
class SolveResult:
    best: StationaryPoint
    all_points: tuple[StationaryPoint, ...]
    globally_unique_evidence: float
    mle: float | None

    def to_dict(self) -> dict:
        return {
            "best": self.best.to_dict(),
            "points": [p.to_dict() for p in self.all_points],
            "globally_unique_evidence": float(self.globally_unique_evidence),
            "mle": None if self.mle is None else float(self.mle),
        }


def default_box(network: SensorNetwork) -> np.ndarray:
    """Axis-aligned box twice the extent of the scenario's bounding box."""
    pts = np.vstack([network.non_anchors, network.anchors])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    center = 0.5 * (lo + hi)
    half = np.maximum(0.5 * (hi - lo), 1e-3)
    return np.array([center - 2.0 * half, center + 2.0 * half])


def _project_box(x: np.ndarray, box: np.ndarray) -> np.ndarray:
    lo = np.tile(box[0], x.size // 2)
    hi = np.tile(box[1], x.size // 2)
    return np.clip(x, lo, hi)


def _eig_bounds(x, network, measurements) -> tuple[float, float]:
    rho, rbar = revised_system(x, network, measurements)
    lam = lambda_matrix(rho, network)
    hess = 4.0 * (2.0 * (rbar.T @ rbar) - np.kron(lam, np.eye(2)))
    eig = np.linalg.eigvalsh(hess)
    return float(eig[0]), float(eig[-1])


def _classify(min_eig: float, max_eig: float) -> str:
    band = PSD_TOL * (1.0 + max_eig)
    if min_eig > band:
        return "local-NE"
    if min_eig < -band:
        return "saddle"
    return "indeterminate"


def classify_stationary(x: np.ndarray, network: SensorNetwork,
                        measurements: MeasurementSet) -> str:
    """Second-order classification of a (near-)stationary profile."""
    return _classify(*_eig_bounds(x, network, measurements))


def mean_localization_error(x: np.ndarray, x_true: np.ndarray) -> float:
    """(1/N) * sqrt(sum_i ||x_i - x_i*||^2) over the N players."""
    x = np.asarray(x, dtype=float).ravel()
    x_true = np.asarray(x_true, dtype=float).ravel()
    if x.size != x_true.size:
        raise ValueError("profiles must have the same length")
    n = x.size // 2
    return float(np.linalg.norm(x - x_true) / n)


def _lm_minimize(x0, network, measurements, opts, box, trace):
    """Levenberg-Marquardt on the residual vector with box projection."""
    x = _project_box(np.asarray(x0, dtype=float).ravel(), box)
    rho, rbar = revised_system(x, network, measurements)
    phi = float(rho @ rho)
    if trace is not None:
        trace.append(phi)
    lam_damp = None
    iterations = 0
    while iterations < opts.max_iterations:
        grad = 4.0 * (rbar.T @ rho)
        if np.max(np.abs(grad)) <= opts.grad_tolerance:
            break
        jtj = 4.0 * (rbar.T @ rbar)  # J = 2 rbar
        if lam_damp is None:
            lam_damp = 1e-3 * (np.trace(jtj) / jtj.shape[0] + 1e-12)
        accepted = False
        step_inf = 0.0
        for _ in range(60):
            try:
                step = np.linalg.solve(
                    jtj + lam_damp * np.eye(jtj.shape[0]), -0.5 * grad)
            except np.linalg.LinAlgError:
                step, *_ = np.linalg.lstsq(
                    jtj + lam_damp * np.eye(jtj.shape[0]), -0.5 * grad,
                    rcond=None)
            x_new = _project_box(x + step, box)
            rho_new, rbar_new = revised_system(x_new, network, measurements)
            phi_new = float(rho_new @ rho_new)
            if np.isfinite(phi_new) and phi_new <= phi:
                step_inf = float(np.max(np.abs(x_new - x)))
                x, rho, rbar, phi = x_new, rho_new, rbar_new, phi_new
                lam_damp = max(lam_damp / 3.0, 1e-14)
                accepted = True
                if trace is not None:
                    trace.append(phi)
                break
            lam_damp *= 3.0
        iterations += 1
        if not accepted or step_inf < opts.step_tolerance:
            break
    grad = 4.0 * (rbar.T @ rho)
    return x, phi, float(np.max(np.abs(grad))), iterations


def _gd_minimize(x0, network, measurements, opts, box, trace):
    """Projected gradient descent with Armijo backtracking."""
    x = _project_box(np.asarray(x0, dtype=float).ravel(), box)
    rho, rbar = revised_system(x, network, measurements)
    phi = float(rho @ rho)
    if trace is not None:
        trace.append(phi)
    iterations = 0
    while iterations < opts.max_iterations:
        grad = 4.0 * (rbar.T @ rho)
        if np.max(np.abs(grad)) <= opts.grad_tolerance:
            break
        t = 1.0 / (1.0 + np.linalg.norm(grad))
        accepted = False
        step_inf = 0.0
        for _ in range(60):
            x_new = _project_box(x - t * grad, box)
            rho_new, rbar_new = revised_system(x_new, network, measurements)
            phi_new = float(rho_new @ rho_new)
            if np.isfinite(phi_new) and \
                    phi_new <= phi - 1e-4 * grad @ (x - x_new):
                step_inf = float(np.max(np.abs(x_new - x)))
                x, rho, rbar, phi = x_new, rho_new, rbar_new, phi_new
                accepted = True
                if trace is not None:
                    trace.append(phi)
                break
            t *= 0.5
        iterations += 1
        if not accepted or step_inf < opts.step_tolerance:
            break
    grad = 4.0 * (rbar.T @ rho)
    return x, phi, float(np.max(np.abs(grad))), iterations


def local_minimize(x0: np.ndarray, network: SensorNetwork,
                   measurements: MeasurementSet, opts: SolveOptions,
                   start_index: int = 0,
                   trace: list | None = None) -> StationaryPoint:
    """Descend from ``x0`` to a stationary point of the potential.

    The accepted-iterate potential is non-increasing; ``trace``, when
    given a list, receives it for inspection.  Points that exhaust the
    iteration budget without meeting the gradient tolerance come back
    classified ``indeterminate``.
    """
    box = opts.init_box if opts.init_box is not None else default_box(network)
    box = np.asarray(box, dtype=float)
    minimize = _lm_minimize if opts.method == "gauss-newton-lm" else _gd_minimize
    x, phi, gnorm, iters = minimize(x0, network, measurements, opts, box, trace)

    min_eig, max_eig = _eig_bounds(x, network, measurements)
    if gnorm <= opts.grad_tolerance:
        classification = _classify(min_eig, max_eig)
    else:
        classification = "indeterminate"
    return StationaryPoint(
        x=x, value=phi, grad_inf_norm=gnorm,
        min_hess_eigenvalue=min_eig, max_hess_eigenvalue=max_eig,
        classification=classification, iterations=iters,
        start_index=start_index)


def _dedup(points: list[StationaryPoint]) -> list[StationaryPoint]:
    kept: list[StationaryPoint] = []
    for p in sorted(points, key=lambda p: (p.value, p.start_index)):
        if all(np.max(np.abs(p.x - q.x)) >= DEDUP_TOL for q in kept):
            kept.append(p)
    return kept


def multistart_solve(network: SensorNetwork, measurements: MeasurementSet,
                     opts: SolveOptions | None = None) -> SolveResult:
    """Deterministic multi-start search for the global minimizer.

    Raises ValueError for non-localizable networks (any player with no
    edge at all).  The MLE is computed against the network's true
    positions, which are always known for synthetic scenarios.
    """
    opts = opts or SolveOptions()
    degree = np.zeros(network.n_free, dtype=int)
    for i, j in network.edges_ss:
        degree[i] += 1
        degree[j] += 1
    for i, _ in network.edges_as:
        degree[i] += 1
    if np.any(degree == 0):
        isolated = np.nonzero(degree == 0)[0].tolist()
        raise ValueError(f"non-localizable network: players {isolated} have no edges")

    box = opts.init_box if opts.init_box is not None else default_box(network)
    box = np.asarray(box, dtype=float)
    opts_run = replace(opts, init_box=box)

    n = network.n_free
    starts = np.empty((opts.starts, 2 * n))
    starts[0] = np.tile(measurements.anchors_measured.mean(axis=0), n)
    if opts.starts > 1:
        rng = np.random.default_rng(opts.seed)
        lo = np.tile(box[0], n)
        hi = np.tile(box[1], n)
        starts[1:] = rng.uniform(lo, hi, size=(opts.starts - 1, 2 * n))

    points = [
        local_minimize(starts[s], network, measurements, opts_run, start_index=s)
        for s in range(opts.starts)
    ]

    distinct = _dedup(points)
    vmin = min(p.value for p in distinct)
    best = min((p for p in distinct if p.value <= vmin + VALUE_TIE_TOL),
               key=lambda p: p.start_index)
    evidence = sum(
        1 for p in points if np.max(np.abs(p.x - best.x)) < DEDUP_TOL
    ) / opts.starts
    mle = mean_localization_error(best.x, network.non_anchors.ravel())
    log.debug("multistart: %d starts, %d distinct points, best value %.3e",
              opts.starts, len(distinct), best.value)
    return SolveResult(best=best, all_points=tuple(distinct),
                       globally_unique_evidence=evidence, mle=mle)
