"""Sensor network model: true geometry, edge sets, noise draws, measurements.

A network consists of N non-anchor nodes (positions unknown to a solver)
and M >= 3 anchor nodes (positions known, possibly inaccurately).  Nodes
sense squared-distance measurements to every other node within a fixed
sensing range.  Three edge classes exist:

* ss  -- both endpoints are non-anchors,
* as  -- one non-anchor, one anchor,
* aa  -- both anchors (always the complete set of anchor pairs).

Vertex ordering is non-anchors first, then anchors; edge ordering is
ss, then as, then aa, lexicographic by index pair within each class.
All downstream matrix layouts rely on these two contracts.

Measurement noise has three components: per-ss-edge squared-distance
errors mu_ij, per-as-edge bias terms e_il, and per-anchor position
offsets eps_l.  The anchor-edge squared-distance error decomposes as

    mu_il = ||eps_l||^2 - 2 (x_i* - x_l*) . eps_l + e_il

(the dot product equals 2 d_il* ||eps_l|| cos(angle between the
anchor-to-node direction and eps_l)), which makes

    d_il^2 - e_il = ||x_i* - (x_l* + eps_l)||^2

an exact algebraic identity.  The offset eps_l is the stored primitive;
the deviation angle is never represented explicitly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SensorNetwork",
    "NoiseSpec",
    "NoiseDraw",
    "MeasurementSet",
    "build_edges",
    "draw_noise",
    "zero_noise",
    "measure",
    "exact_measurements",
]

DISTRIBUTIONS = ("uniform-ball", "gaussian-rejection")


def _as_points(a, name: str) -> np.ndarray:
    pts = np.asarray(a, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"{name} must have shape (k, 2), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError(f"{name} contains non-finite coordinates")
    return pts


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class SensorNetwork:
    """True network geometry plus the derived edge sets.

    ``non_anchors`` is (N, 2), ``anchors`` is (M, 2); both hold true
    positions.  Edge index pairs use class-local indices: ss pairs index
    into ``non_anchors``, aa pairs into ``anchors``, and as pairs are
    (non-anchor index, anchor index).
    """

    non_anchors: np.ndarray
    anchors: np.ndarray
    sensing_range: float
    edges_ss: tuple[tuple[int, int], ...]
    edges_as: tuple[tuple[int, int], ...]
    edges_aa: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "non_anchors", _freeze(self.non_anchors))
        object.__setattr__(self, "anchors", _freeze(self.anchors))
        if self.n_anchors < 3:
            raise ValueError("at least 3 anchors are required")
        if self.sensing_range <= 0:
            raise ValueError("sensing range must be positive")

    @property
    def n_free(self) -> int:
        return self.non_anchors.shape[0]

    @property
    def n_anchors(self) -> int:
        return self.anchors.shape[0]

    @property
    def n_vertices(self) -> int:
        return self.n_free + self.n_anchors

    def d_star_ss(self) -> np.ndarray:
        """True distances for ss edges, ordered as ``edges_ss``."""
        if not self.edges_ss:
            return np.zeros(0)
        i, j = np.array(self.edges_ss).T
        return np.linalg.norm(self.non_anchors[i] - self.non_anchors[j], axis=1)

    def d_star_as(self) -> np.ndarray:
        """True distances for as edges, ordered as ``edges_as``."""
        if not self.edges_as:
            return np.zeros(0)
        i, l = np.array(self.edges_as).T
        return np.linalg.norm(self.non_anchors[i] - self.anchors[l], axis=1)

    def grounded_edges(self) -> list[tuple[int, int]]:
        """All edges on global vertex indices (anchors offset by N)."""
        n = self.n_free
        out = [(i, j) for i, j in self.edges_ss]
        out += [(i, n + l) for i, l in self.edges_as]
        out += [(n + l, n + m) for l, m in self.edges_aa]
        return out


@dataclass(frozen=True)
class NoiseSpec:
    """Noise-draw configuration.

    ``delta_budget`` bounds the weighted squared norm
    a*||mu||^2 + b*||e||^2 + c*||eps||^2 strictly from above; ``weights``
    are (a, b, c).  Draws are pure functions of (network, spec).
    """

    delta_budget: float
    weights: tuple[float, float, float]
    distribution: str = "uniform-ball"
    seed: int = 0

    def __post_init__(self):
        if self.delta_budget < 0:
            raise ValueError("delta_budget must be nonnegative")
        if any(w <= 0 for w in self.weights):
            raise ValueError("weights must be strictly positive")
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"unknown distribution {self.distribution!r}")


@dataclass(frozen=True, eq=False)
class NoiseDraw:
    """One realization of measurement noise, keyed to a network's edges.

    ``mu`` follows ``edges_ss``, ``e_bias`` follows ``edges_as`` and
    ``epsilon`` is (M, 2) per-anchor position offsets.
    """

    mu: np.ndarray
    e_bias: np.ndarray
    epsilon: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", _freeze(np.atleast_1d(self.mu)))
        object.__setattr__(self, "e_bias", _freeze(np.atleast_1d(self.e_bias)))
        object.__setattr__(self, "epsilon", _freeze(self.epsilon))

    def weighted_norm(self, weights: tuple[float, float, float]) -> float:
        """a*||mu||^2 + b*||e||^2 + c*||eps||^2 for weights (a, b, c)."""
        a, b, c = weights
        return float(
            a * np.dot(self.mu, self.mu)
            + b * np.dot(self.e_bias, self.e_bias)
            + c * np.sum(self.epsilon * self.epsilon)
        )


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Squared-distance measurements plus measured anchor positions."""

    d_sq_ss: np.ndarray
    d_sq_as: np.ndarray
    anchors_measured: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "d_sq_ss", _freeze(np.atleast_1d(self.d_sq_ss)))
        object.__setattr__(self, "d_sq_as", _freeze(np.atleast_1d(self.d_sq_as)))
        object.__setattr__(self, "anchors_measured", _freeze(self.anchors_measured))
        for arr in (self.d_sq_ss, self.d_sq_as, self.anchors_measured):
            if not np.all(np.isfinite(arr)):
                raise ValueError("measurements must be finite")


def build_edges(non_anchors, anchors, sensing_range: float) -> SensorNetwork:
    """Construct a network with edge sets derived from true positions.

    ss and as pairs are included when the true distance is within the
    sensing range; aa is always the complete set of anchor pairs.  Edge
    lists come out lexicographic by index pair.  Coincident nodes are
    rejected: a zero true distance would make its edge degenerate.
    """
    non_anchors = _as_points(non_anchors, "non_anchors")
    anchors = _as_points(anchors, "anchors")
    if sensing_range <= 0:
        raise ValueError("sensing range must be positive")

    all_pts = np.vstack([non_anchors, anchors])
    for u, v in itertools.combinations(range(len(all_pts)), 2):
        if np.array_equal(all_pts[u], all_pts[v]):
            raise ValueError(f"duplicate node position at vertices {u} and {v}")

    n = len(non_anchors)
    m = len(anchors)
    edges_ss = tuple(
        (i, j)
        for i in range(n)
        for j in range(i + 1, n)
        if np.linalg.norm(non_anchors[i] - non_anchors[j]) <= sensing_range
    )
    edges_as = tuple(
        (i, l)
        for i in range(n)
        for l in range(m)
        if np.linalg.norm(non_anchors[i] - anchors[l]) <= sensing_range
    )
    edges_aa = tuple((l, k) for l in range(m) for k in range(l + 1, m))
    return SensorNetwork(non_anchors, anchors, float(sensing_range),
                         edges_ss, edges_as, edges_aa)


def _noise_dim(network: SensorNetwork) -> int:
    return len(network.edges_ss) + len(network.edges_as) + 2 * network.n_anchors


def _split_draw(network: SensorNetwork, y: np.ndarray,
                weights: tuple[float, float, float]) -> NoiseDraw:
    """Map a point of the weighted-norm ball back to (mu, e, eps)."""
    a, b, c = weights
    n_ss = len(network.edges_ss)
    n_as = len(network.edges_as)
    mu = y[:n_ss] / np.sqrt(a)
    e = y[n_ss:n_ss + n_as] / np.sqrt(b)
    eps = (y[n_ss + n_as:] / np.sqrt(c)).reshape(network.n_anchors, 2)
    return NoiseDraw(mu, e, eps)


def zero_noise(network: SensorNetwork) -> NoiseDraw:
    """The all-zero draw (exact measurements)."""
    return NoiseDraw(
        np.zeros(len(network.edges_ss)),
        np.zeros(len(network.edges_as)),
        np.zeros((network.n_anchors, 2)),
    )


def draw_noise(network: SensorNetwork, spec: NoiseSpec) -> NoiseDraw:
    """Draw noise satisfying the weighted budget strictly.

    In the whitened coordinates y = (sqrt(a) mu, sqrt(b) e, sqrt(c) eps)
    the budget is the Euclidean ball of radius sqrt(delta).  The
    ``uniform-ball`` mode samples y uniformly in that ball; the
    ``gaussian-rejection`` mode samples i.i.d. normals (scaled so the
    mean squared norm is a quarter of the budget) and rejects draws
    outside the ball.  Deterministic for a fixed seed.
    """
    k = _noise_dim(network)
    if spec.delta_budget == 0.0 or k == 0:
        return zero_noise(network)

    rng = np.random.default_rng(spec.seed)
    radius = np.sqrt(spec.delta_budget)
    while True:
        if spec.distribution == "uniform-ball":
            g = rng.standard_normal(k)
            norm = np.linalg.norm(g)
            if norm == 0.0:
                continue
            y = radius * rng.random() ** (1.0 / k) * g / norm
        else:
            y = np.sqrt(spec.delta_budget / (4 * k)) * rng.standard_normal(k)
        draw = _split_draw(network, y, spec.weights)
        # Re-check on the realized draw: rounding in the split must not
        # push the weighted norm onto or past the boundary.
        if draw.weighted_norm(spec.weights) < spec.delta_budget:
            return draw


def measure(network: SensorNetwork, draw: NoiseDraw) -> MeasurementSet:
    """Produce the squared-distance measurements seen by a solver.

    ss edges: d_ij^2 = d_ij*^2 + mu_ij.  as edges: the error mu_il is
    assembled from the anchor offset geometry and the bias term (see the
    module docstring), so d_il^2 - e_il equals the squared distance from
    the true node to the measured anchor to machine precision.
    """
    if len(draw.mu) != len(network.edges_ss) \
            or len(draw.e_bias) != len(network.edges_as) \
            or draw.epsilon.shape != (network.n_anchors, 2):
        raise ValueError("noise draw is not keyed to this network")

    d_sq_ss = network.d_star_ss() ** 2 + draw.mu

    if network.edges_as:
        i, l = np.array(network.edges_as).T
        diff = network.non_anchors[i] - network.anchors[l]  # x_i* - x_l*
        eps = draw.epsilon[l]
        mu_as = (np.sum(eps * eps, axis=1)
                 - 2.0 * np.sum(diff * eps, axis=1)
                 + draw.e_bias)
        d_sq_as = np.sum(diff * diff, axis=1) + mu_as
    else:
        d_sq_as = np.zeros(0)

    anchors_measured = network.anchors + draw.epsilon
    return MeasurementSet(d_sq_ss, d_sq_as, anchors_measured)


def exact_measurements(network: SensorNetwork) -> MeasurementSet:
    """Measurements under the all-zero draw (true distances, true anchors)."""
    return measure(network, zero_noise(network))
