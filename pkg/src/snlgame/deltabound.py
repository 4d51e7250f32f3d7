"""Certified measurement-noise bound for unique localization.

The certificate delta guarantees that any noise draw with weighted norm
a*||mu||^2 + b*||e||^2 + c*||eps||^2 below delta leaves the game with a
unique equilibrium whose squared distance to the true profile is below
delta.  It is computed in three steps:

1. Verify that the potential's Hessian stays positive definite at the
   stationary point tracked from the true profile, for sampled noise
   draws up to a trial budget delta_1 (halving delta_1 until it holds),
   then compute phi_1: the minimum of the *noiseless* potential over
   profiles at squared distance >= delta_1 from the truth (capped by an
   outer radius; the potential is coercive, so the cap is inactive for
   a large enough radius).
2. Find the largest delta_2 <= delta_1 whose joint minimum phi_2 (over
   profiles in the same annulus *and* noise in the weighted ball of
   radius delta_2) stays at least phi_1 / 2, by bisection.
3. delta = min(delta_2, phi_1 / 2).

Both minimizations are non-convex; they are evaluated as the best of a
multi-start scheme (projected local minimization plus a dense sweep of
starts on the inner sphere), so phi_1 and phi_2 are upper estimates and
the resulting delta is understood as the best available certificate at
this numerical scale.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .network import (NoiseDraw, NoiseSpec, SensorNetwork, draw_noise,
                      exact_measurements, measure)
from .rigidity import RigidityError, is_generically_globally_rigid, revised_system
from .solver import SolveOptions, local_minimize

__all__ = [
    "Weights",
    "DeltaReport",
    "noise_weights",
    "default_outer_radius",
    "noise_budget_check",
    "phi1",
    "phi2",
    "phi2_grid",
    "delta_bound",
]

log = logging.getLogger(__name__)

MIN_DELTA1 = 1e-12
BISECTION_REL_TOL = 1e-3
HESSIAN_DRAWS = 32
BOUNDARY_SHRINK = 1.0 - 1e-6


@dataclass(frozen=True)
class Weights:
    """Budget weights (a, b, c) for (mu, e, eps) respectively."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if self.a < 1.0 or self.b < 2.0:
            raise ValueError("weights below the floor values a=1, b=2")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.a, self.b, self.c)


@dataclass(frozen=True, eq=False)
class DeltaReport:
    delta1: float
    phi1: float
    delta2: float
    phi2: float
    delta: float
    weights: Weights
    hessian_pd_verified: bool
    outer_radius: float
    solver_trace: dict

    def to_dict(self) -> dict:
        return {
            "delta1": float(self.delta1),
            "phi1": float(self.phi1),
            "delta2": float(self.delta2),
            "phi2": float(self.phi2),
            "delta": float(self.delta),
            "weights": {"a": self.weights.a, "b": self.weights.b,
                        "c": self.weights.c},
            "hessian_pd_verified": bool(self.hessian_pd_verified),
            "outer_radius": float(self.outer_radius),
            "solver_trace": self.solver_trace,
        }


def noise_weights(network: SensorNetwork) -> Weights:
    """Floor weights: a=1, b=2, c=32 * (largest true anchor-edge distance)^2.

    The weight on anchor offsets scales with the squared anchor-edge
    distances because an offset of a far anchor perturbs its squared
    distance measurements proportionally to that distance.
    """
    d_as = network.d_star_as()
    if d_as.size == 0:
        raise ValueError("network has no anchor edges")
    return Weights(a=1.0, b=2.0, c=32.0 * float(np.max(d_as)) ** 2)


def default_outer_radius(network: SensorNetwork) -> float:
    """Four times the squared diameter of the scenario bounding box."""
    pts = np.vstack([network.non_anchors, network.anchors])
    span = pts.max(axis=0) - pts.min(axis=0)
    return 4.0 * float(span @ span)


def noise_budget_check(draw: NoiseDraw, weights: Weights, delta: float) -> bool:
    """True iff the draw satisfies the weighted budget *strictly*."""
    return draw.weighted_norm(weights.as_tuple()) < delta


# ---------------------------------------------------------------------------
# Constrained minimization of the potential over the annulus
# ---------------------------------------------------------------------------

def _project_annulus(x, x_star, lo_sq, hi_sq):
    v = x - x_star
    s = float(v @ v)
    if s < lo_sq:
        if s == 0.0:
            v = np.zeros_like(x)
            v[0] = 1.0
            s = 1.0
        return x_star + v * np.sqrt(lo_sq / s)
    if s > hi_sq:
        return x_star + v * np.sqrt(hi_sq / s)
    return x


def _minimize_projected(x0, network, measurements, project, max_iter):
    """Monotone projected-gradient descent with Barzilai-Borwein steps.

    Every trial point is projected back onto the feasible set before the
    Armijo acceptance test, so the constraint is honored throughout and
    the value sequence never increases.  Returns (x, value).
    """
    x = project(np.asarray(x0, dtype=float).ravel())
    rho, rbar = revised_system(x, network, measurements)
    phi = float(rho @ rho)
    grad = 4.0 * (rbar.T @ rho)
    t = 1.0 / (1.0 + float(np.linalg.norm(grad)))
    for _ in range(max_iter):
        accepted = False
        t_try = t
        for _ in range(50):
            x_new = project(x - t_try * grad)
            dx = x_new - x
            if not np.any(dx):
                break
            rho_new, rbar_new = revised_system(x_new, network, measurements)
            phi_new = float(rho_new @ rho_new)
            if np.isfinite(phi_new) and phi_new <= phi + 1e-4 * (grad @ dx):
                grad_new = 4.0 * (rbar_new.T @ rho_new)
                dg = grad_new - grad
                denom = float(dx @ dg)
                t = abs(float(dx @ dx) / denom) if denom != 0.0 else 2.0 * t_try
                t = min(max(t, 1e-13), 1e6)
                x, rho, rbar, phi, grad = x_new, rho_new, rbar_new, phi_new, grad_new
                accepted = True
                break
            t_try *= 0.3
        if not accepted:
            break
        if np.max(np.abs(dx)) < 1e-12 * (1.0 + np.max(np.abs(x))):
            break
    return x, phi


def _annulus_starts(network, delta1, outer_radius, opts):
    """Start profiles: a dense sweep on the inner sphere plus random
    points through the annulus."""
    x_star = network.non_anchors.ravel()
    dim = x_star.size
    rng = np.random.default_rng(opts.seed)

    n_sphere = 2 * opts.starts
    dirs = rng.standard_normal((n_sphere, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    sphere = x_star + np.sqrt(delta1) * dirs

    n_ann = opts.starts
    dirs = rng.standard_normal((n_ann, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii_sq = rng.uniform(delta1, outer_radius, size=n_ann)
    annulus = x_star + np.sqrt(radii_sq)[:, None] * dirs
    return np.vstack([sphere, annulus])


def phi1(network: SensorNetwork, delta1: float,
         outer_radius: float | None = None,
         opts: SolveOptions | None = None) -> float:
    """Minimum of the noiseless potential at squared distance >= delta1
    from the true profile (capped at ``outer_radius``).

    Positive for generically globally rigid scenarios; for flexible
    scenarios the value collapses to ~0 and a warning is emitted, since
    a certificate built on it would be void.
    """
    opts = opts or SolveOptions()
    outer_radius = outer_radius if outer_radius is not None \
        else default_outer_radius(network)
    if delta1 <= 0:
        raise ValueError("delta1 must be positive")
    if outer_radius <= delta1:
        raise ValueError("outer radius must exceed delta1")
    if not is_generically_globally_rigid(network):
        warnings.warn("scenario is not generically globally rigid; the "
                      "annulus minimum is not bounded away from zero",
                      RuntimeWarning, stacklevel=2)

    meas = exact_measurements(network)
    x_star = network.non_anchors.ravel()

    def project(x):
        return _project_annulus(x, x_star, delta1, outer_radius)

    best = np.inf
    for x0 in _annulus_starts(network, delta1, outer_radius, opts):
        _, value = _minimize_projected(x0, network, meas, project,
                                       opts.max_iterations)
        best = min(best, value)
    return best


# ---------------------------------------------------------------------------
# Joint minimization over profile and noise
# ---------------------------------------------------------------------------

def _whiten_dim(network):
    return len(network.edges_ss) + len(network.edges_as) + 2 * network.n_anchors


def _split_whitened(network, y, weights):
    a, b, c = weights.as_tuple()
    n_ss = len(network.edges_ss)
    n_as = len(network.edges_as)
    return NoiseDraw(
        y[:n_ss] / np.sqrt(a),
        y[n_ss:n_ss + n_as] / np.sqrt(b),
        (y[n_ss + n_as:] / np.sqrt(c)).reshape(network.n_anchors, 2),
    )


def _whiten_draw(network, draw, weights):
    a, b, c = weights.as_tuple()
    return np.concatenate([
        np.sqrt(a) * draw.mu,
        np.sqrt(b) * draw.e_bias,
        np.sqrt(c) * draw.epsilon.ravel(),
    ])


def _noise_design(network, x, weights):
    """Linear model of the residual vector in the whitened noise:
    residuals = r0 - Q y for the current profile x."""
    a, b, c = weights.as_tuple()
    n = network.n_free
    pts = np.asarray(x, dtype=float).reshape(n, 2)
    n_ss = len(network.edges_ss)
    n_as = len(network.edges_as)
    n_eps = 2 * network.n_anchors
    rows = n_ss + n_as
    cols = n_ss + n_as + n_eps
    r0 = np.zeros(rows)
    q = np.zeros((rows, cols))

    for t, (i, j) in enumerate(network.edges_ss):
        d = pts[i] - pts[j]
        d_true = network.non_anchors[i] - network.non_anchors[j]
        r0[t] = d @ d - d_true @ d_true
        q[t, t] = 1.0 / np.sqrt(a)
    for t, (i, l) in enumerate(network.edges_as):
        row = n_ss + t
        d = pts[i] - network.anchors[l]
        d_true = network.non_anchors[i] - network.anchors[l]
        r0[row] = d @ d - d_true @ d_true
        q[row, n_ss + t] = 1.0 / np.sqrt(b)
        g = 2.0 * (pts[i] - network.non_anchors[i])
        q[row, n_ss + n_as + 2 * l:n_ss + n_as + 2 * l + 2] = g / np.sqrt(c)
    return r0, q


def _noise_step(network, x, y, weights, delta2, iterations=250):
    """Projected gradient on the whitened noise ball, profile fixed.

    The block objective is a convex least-squares problem, so gradient
    steps at 1/L with ball projection converge to its global minimum.
    """
    if delta2 <= 0.0:
        return np.zeros_like(y)
    r0, q = _noise_design(network, x, weights)
    lip = 2.0 * np.linalg.norm(q, 2) ** 2
    if lip == 0.0:
        return y
    radius = np.sqrt(delta2)
    step = 1.0 / lip
    for _ in range(iterations):
        resid = r0 - q @ y
        y_new = y + 2.0 * step * (q.T @ resid)
        norm = np.linalg.norm(y_new)
        if norm > radius:
            y_new *= radius / norm
        if np.max(np.abs(y_new - y)) < 1e-15:
            y = y_new
            break
        y = y_new
    return y


def _noise_measurements(network, y, weights):
    return measure(network, _split_whitened(network, y, weights))


def _phi2_search(network, delta1, delta2, outer_radius, weights, opts,
                 extra_starts=(), bcd_cycles=25):
    """Best (value, x, y) over multi-start block-coordinate descent.

    With delta2 = 0 the noise block stays at zero, every cycle after the
    first is a no-op, and the per-start values reproduce phi1's exactly.
    """
    x_star = network.non_anchors.ravel()

    def project(x):
        return _project_annulus(x, x_star, delta1, outer_radius)

    dim_y = _whiten_dim(network)
    starts = [(x0, np.zeros(dim_y))
              for x0 in _annulus_starts(network, delta1, outer_radius, opts)]
    starts += [(np.asarray(x0, dtype=float).copy(), np.asarray(y0, dtype=float).copy())
               for x0, y0 in extra_starts]

    best_value, best_x, best_y = np.inf, None, None
    for x, y in starts:
        norm = np.linalg.norm(y)
        if delta2 <= 0.0:
            y = np.zeros_like(y)
        elif norm > np.sqrt(delta2):
            y = y * (np.sqrt(delta2) / norm)
        value = np.inf
        for _ in range(bcd_cycles):
            y = _noise_step(network, x, y, weights, delta2)
            meas = _noise_measurements(network, y, weights)
            x, value_new = _minimize_projected(x, network, meas, project,
                                               opts.max_iterations)
            if value_new > value - 1e-12 * (1.0 + abs(value_new)):
                value = min(value, value_new)
                break
            value = value_new
        if value < best_value:
            best_value, best_x, best_y = value, x.copy(), y.copy()
    return best_value, best_x, best_y


def phi2(network: SensorNetwork, delta1: float, delta2: float,
         outer_radius: float | None = None,
         weights: Weights | None = None,
         opts: SolveOptions | None = None) -> float:
    """Joint minimum of the potential over annulus profiles and noise in
    the weighted ball of squared radius ``delta2``.

    With ``delta2 = 0`` the noise block is pinned at zero and the value
    reduces to ``phi1``.  Nonincreasing in ``delta2`` (the feasible sets
    nest).
    """
    opts = opts or SolveOptions()
    outer_radius = outer_radius if outer_radius is not None \
        else default_outer_radius(network)
    weights = weights or noise_weights(network)
    if not 0.0 <= delta2 <= delta1:
        raise ValueError("need 0 <= delta2 <= delta1")
    if not is_generically_globally_rigid(network):
        warnings.warn("scenario is not generically globally rigid; the "
                      "annulus minimum is not bounded away from zero",
                      RuntimeWarning, stacklevel=2)
    value, _, _ = _phi2_search(network, delta1, delta2, outer_radius,
                               weights, opts)
    return value


def phi2_grid(network: SensorNetwork, delta1: float, delta2_values,
              outer_radius: float | None = None,
              weights: Weights | None = None,
              opts: SolveOptions | None = None) -> list[float]:
    """phi2 over an increasing delta2 grid with warm-started continuity.

    Each evaluation adds the previous optimum as an extra start, which
    makes the returned sequence nonincreasing by construction (the
    feasible sets nest, so the previous optimum stays feasible).
    """
    opts = opts or SolveOptions()
    outer_radius = outer_radius if outer_radius is not None \
        else default_outer_radius(network)
    weights = weights or noise_weights(network)
    values = []
    extra = []
    prev = np.inf
    for d2 in sorted(delta2_values):
        value, x, y = _phi2_search(network, delta1, float(d2), outer_radius,
                                   weights, opts, extra_starts=extra)
        value = min(value, prev)
        values.append(value)
        extra = [(x, y)]
        prev = value
    return values


# ---------------------------------------------------------------------------
# The certification algorithm
# ---------------------------------------------------------------------------

def _sphere_draw(network, weights, budget, rng):
    """Noise draw exactly on the weighted-budget sphere."""
    k = _whiten_dim(network)
    g = rng.standard_normal(k)
    g /= np.linalg.norm(g)
    return _split_whitened(network, np.sqrt(budget) * g, weights)


def _hessian_pd_at_tracked_point(network, meas, opts):
    sp = local_minimize(network.non_anchors.ravel(), network, meas, opts)
    return (sp.converged(opts)
            and sp.classification == "local-NE")


def _verify_hessian_pd(network, weights, delta1, draws, opts):
    """Sampled positive-definiteness check of the potential Hessian at
    the stationary point tracked from the true profile.

    Half the draws sit just inside the budget boundary (the expected
    worst case), half are interior.
    """
    rng = np.random.default_rng(np.random.SeedSequence([opts.seed, 2171]))
    for t in range(draws):
        if t % 2 == 0:
            draw = _sphere_draw(network, weights, delta1 * BOUNDARY_SHRINK, rng)
        else:
            spec = NoiseSpec(delta_budget=delta1, weights=weights.as_tuple(),
                             seed=int(rng.integers(2 ** 31)))
            draw = draw_noise(network, spec)
        meas = measure(network, draw)
        if not _hessian_pd_at_tracked_point(network, meas, opts):
            return False
    return True


def delta_bound(network: SensorNetwork, delta1_init: float,
                opts: SolveOptions | None = None,
                outer_radius: float | None = None,
                hessian_draws: int = HESSIAN_DRAWS) -> DeltaReport:
    """Run the three-step certification and report all intermediates.

    Raises RigidityError if the scenario is not generically globally
    rigid, or if the Hessian verification keeps failing until delta1
    underflows the minimum trial budget.
    """
    opts = opts or SolveOptions()
    if delta1_init <= 0:
        raise ValueError("delta1_init must be positive")
    if not is_generically_globally_rigid(network):
        raise RigidityError(
            "scenario graph is not generically globally rigid; the "
            "uniqueness certificate does not apply")
    weights = noise_weights(network)
    outer_radius = outer_radius if outer_radius is not None \
        else default_outer_radius(network)

    delta1 = float(delta1_init)
    halvings = 0
    while not _verify_hessian_pd(network, weights, delta1, hessian_draws, opts):
        delta1 *= 0.5
        halvings += 1
        log.info("Hessian PD check failed; retrying with delta1=%.3e", delta1)
        if delta1 < MIN_DELTA1:
            raise RigidityError(
                "Hessian positive-definiteness could not be verified for "
                "any trial budget; the scenario numerically violates the "
                "global-rigidity assumption")

    value_phi1 = phi1(network, delta1, outer_radius, opts)

    bisection_steps = 0
    value_d1, x_best, y_best = _phi2_search(
        network, delta1, delta1, outer_radius, weights, opts)
    if value_d1 >= 0.5 * value_phi1:
        delta2, value_phi2 = delta1, value_d1
    else:
        lo, value_lo = 0.0, value_phi1
        hi = delta1
        extra = [(x_best, y_best)]
        while hi - lo > BISECTION_REL_TOL * delta1:
            mid = 0.5 * (lo + hi)
            value_mid, x_mid, y_mid = _phi2_search(
                network, delta1, mid, outer_radius, weights, opts,
                extra_starts=extra)
            bisection_steps += 1
            if value_mid >= 0.5 * value_phi1:
                lo, value_lo = mid, value_mid
            else:
                hi = mid
            extra = [(x_mid, y_mid)]
        delta2, value_phi2 = lo, value_lo

    delta = min(delta2, 0.5 * value_phi1)
    trace = {
        "delta1_init": float(delta1_init),
        "delta1_halvings": halvings,
        "hessian_draws": hessian_draws,
        "bisection_steps": bisection_steps,
        "starts": opts.starts,
        "seed": opts.seed,
    }
    return DeltaReport(
        delta1=delta1, phi1=value_phi1, delta2=delta2, phi2=value_phi2,
        delta=delta, weights=weights, hessian_pd_verified=True,
        outer_radius=outer_radius, solver_trace=trace)
