"""Rigidity matrices, residuals, and generic rigidity tests.

The rigidity matrix of a framework has one row per edge and one
coordinate-pair column block per vertex: the row for edge (j, k)
holds x_j - x_k in j's columns and x_k - x_j in k's columns.  With the
vertex ordering contract (non-anchors first) and edge ordering contract
(ss, as, aa), the full matrix has the block form

    R = [[R_r, A],
         [0,   B]]

where R_r (the reduced matrix) keeps the rows of edges touching at
least one non-anchor and the non-anchor coordinate columns.  The
revised reduced matrix replaces each anchor-edge row's non-anchor block
by the difference to the *measured* anchor position, which is what the
potential's derivatives are built from.

Generic rigidity is decided numerically: the graph is rigid iff the
rank of the full rigidity matrix at a generic realization is
2*|V| - 3.  Generic global rigidity in the plane uses the combinatorial
characterization: 3-connected and redundantly rigid.
"""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from .network import MeasurementSet, SensorNetwork

__all__ = [
    "Framework",
    "RigidityMatrixSet",
    "RigidityError",
    "IndeterminateRigidityError",
    "framework_at_truth",
    "rigidity_matrices",
    "residual_vector",
    "lambda_matrix",
    "revised_system",
    "graph_is_generically_rigid",
    "is_generically_rigid",
    "graph_is_generically_globally_rigid",
    "is_generically_globally_rigid",
]

# Rank decisions with sigma_max / sigma_min_kept beyond this are marginal.
RANK_CONDITION_LIMIT = 1e8
RANK_TEST_REALIZATIONS = 5


class RigidityError(RuntimeError):
    """A rigidity requirement is violated."""


class IndeterminateRigidityError(RigidityError):
    """The numerical rank test was too marginal to decide."""


@dataclass(frozen=True, eq=False)
class Framework:
    """A network graph with current coordinates for every vertex.

    ``x`` is the flat (2N,) vector of non-anchor estimates; the anchor
    coordinates used in matrix rows are ``anchor_positions``.
    """

    network: SensorNetwork
    x: np.ndarray
    anchor_positions: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        if x.size != 2 * self.network.n_free:
            raise ValueError(
                f"positions must have {2 * self.network.n_free} entries, got {x.size}")
        object.__setattr__(self, "x", x)
        object.__setattr__(
            self, "anchor_positions",
            np.asarray(self.anchor_positions, dtype=float).reshape(-1, 2))
        if self.anchor_positions.shape[0] != self.network.n_anchors:
            raise ValueError("anchor_positions length mismatch")

    def points(self) -> np.ndarray:
        """Non-anchor estimates as an (N, 2) array."""
        return self.x.reshape(-1, 2)


@dataclass(frozen=True, eq=False)
class RigidityMatrixSet:
    full: np.ndarray
    reduced: np.ndarray
    revised_reduced: np.ndarray


def framework_at_truth(network: SensorNetwork) -> Framework:
    return Framework(network, network.non_anchors.ravel(), network.anchors)


def _full_matrix(vertices: np.ndarray, edges) -> np.ndarray:
    """|E| x 2|V| coordinate-difference matrix for arbitrary graphs."""
    r = np.zeros((len(edges), 2 * len(vertices)))
    for row, (j, k) in enumerate(edges):
        d = vertices[j] - vertices[k]
        r[row, 2 * j:2 * j + 2] = d
        r[row, 2 * k:2 * k + 2] = -d
    return r


def rigidity_matrices(framework: Framework,
                      measurements: MeasurementSet) -> RigidityMatrixSet:
    """Assemble the full, reduced and revised reduced rigidity matrices.

    The revised matrix differs from the reduced one only in anchor-edge
    rows, whose entries become the difference to the measured anchor;
    with zero anchor offsets the two are bit-for-bit identical.
    """
    net = framework.network
    n = net.n_free
    pts = np.vstack([framework.points(), framework.anchor_positions])
    full = _full_matrix(pts, net.grounded_edges())

    n_r = len(net.edges_ss) + len(net.edges_as)
    reduced = full[:n_r, :2 * n].copy()

    revised = reduced.copy()
    for t, (i, l) in enumerate(net.edges_as):
        row = len(net.edges_ss) + t
        revised[row, 2 * i:2 * i + 2] = (
            framework.points()[i] - measurements.anchors_measured[l])
    return RigidityMatrixSet(full, reduced, revised)


def revised_system(x: np.ndarray, network: SensorNetwork,
                   measurements: MeasurementSet) -> tuple[np.ndarray, np.ndarray]:
    """Residual vector and revised reduced matrix in one pass.

    This is the workhorse for derivative evaluation and least-squares
    iterations: the residuals are the entries of the potential's sum of
    squares, and twice the returned matrix is their Jacobian.
    """
    n = network.n_free
    pts = np.asarray(x, dtype=float).reshape(n, 2)
    n_ss = len(network.edges_ss)
    n_as = len(network.edges_as)
    rho = np.zeros(n_ss + n_as)
    rbar = np.zeros((n_ss + n_as, 2 * n))

    if n_ss:
        i, j = np.array(network.edges_ss).T
        diff = pts[i] - pts[j]
        rho[:n_ss] = np.sum(diff * diff, axis=1) - measurements.d_sq_ss
        for t in range(n_ss):
            rbar[t, 2 * i[t]:2 * i[t] + 2] = diff[t]
            rbar[t, 2 * j[t]:2 * j[t] + 2] = -diff[t]
    if n_as:
        i, l = np.array(network.edges_as).T
        diff = pts[i] - measurements.anchors_measured[l]
        rho[n_ss:] = np.sum(diff * diff, axis=1) - measurements.d_sq_as
        for t in range(n_as):
            rbar[n_ss + t, 2 * i[t]:2 * i[t] + 2] = diff[t]
    return rho, rbar


def residual_vector(framework: Framework,
                    measurements: MeasurementSet) -> np.ndarray:
    """Per-edge squared-distance residuals, ordered ss rows then as rows.

    Entry for an ss edge (i, j): ||x_i - x_j||^2 - d_ij^2.  Entry for an
    as edge (i, l): ||x_i - a_l||^2 - d_il^2 with a_l the measured
    anchor.  Zero exactly when the framework fits the measurements.
    """
    rho, _ = revised_system(framework.x, framework.network, measurements)
    return rho


def lambda_matrix(residuals: np.ndarray, network: SensorNetwork) -> np.ndarray:
    """N x N residual coupling matrix appearing in the potential Hessian.

    Off-diagonal (i, j) holds the ss residual of edge (i, j) (zero if
    absent); diagonal (i, i) is minus the sum of all residuals on edges
    at node i, anchor edges included.
    """
    n = network.n_free
    n_ss = len(network.edges_ss)
    residuals = np.asarray(residuals, dtype=float)
    if residuals.size != n_ss + len(network.edges_as):
        raise ValueError("residual vector is not keyed to this network")

    lam = np.zeros((n, n))
    diag = np.zeros(n)
    for t, (i, j) in enumerate(network.edges_ss):
        lam[i, j] = lam[j, i] = residuals[t]
        diag[i] -= residuals[t]
        diag[j] -= residuals[t]
    for t, (i, _) in enumerate(network.edges_as):
        diag[i] -= residuals[n_ss + t]
    lam[np.diag_indices(n)] = diag
    return lam


def _numeric_rank(matrix: np.ndarray) -> tuple[int, bool]:
    """(rank, marginal) using the standard singular-value threshold."""
    if matrix.size == 0:
        return 0, False
    sigma = np.linalg.svd(matrix, compute_uv=False)
    tol = max(matrix.shape) * np.finfo(float).eps * sigma[0]
    kept = sigma[sigma > tol]
    rank = kept.size
    marginal = rank > 0 and sigma[0] / kept[-1] > RANK_CONDITION_LIMIT
    return rank, marginal


def _rigid_votes(num_vertices: int, edges, trials: int, seed: int):
    """Rank tests at random generic realizations; one vote per trial."""
    rng = np.random.default_rng(seed)
    votes, marginals = [], []
    target = 2 * num_vertices - 3
    for _ in range(trials):
        pts = rng.uniform(0.0, 1.0, size=(num_vertices, 2))
        rank, marginal = _numeric_rank(_full_matrix(pts, list(edges)))
        votes.append(rank == target)
        marginals.append(marginal)
    return votes, marginals


def graph_is_generically_rigid(num_vertices: int, edges,
                               trials: int = RANK_TEST_REALIZATIONS,
                               seed: int = 0) -> bool:
    """Generic rigidity of an abstract graph in the plane.

    Majority vote of rank tests over independent random realizations:
    rigid iff rank equals 2|V| - 3.
    """
    if num_vertices < 3:
        raise ValueError("rigidity test needs at least 3 vertices")
    votes, _ = _rigid_votes(num_vertices, edges, trials, seed)
    return sum(votes) * 2 > trials


def is_generically_rigid(network: SensorNetwork,
                         trials: int = RANK_TEST_REALIZATIONS,
                         seed: int = 0) -> bool:
    """Generic rigidity of the grounded graph (all edge classes)."""
    return graph_is_generically_rigid(
        network.n_vertices, network.grounded_edges(), trials, seed)


def graph_is_generically_globally_rigid(num_vertices: int, edges,
                                        trials: int = RANK_TEST_REALIZATIONS,
                                        seed: int = 0) -> bool:
    """Generic global rigidity of an abstract graph in the plane.

    Complete graphs are globally rigid.  Otherwise (|V| >= 4) the
    combinatorial characterization applies: 3-connected and rigid after
    the deletion of any single edge.  Raises IndeterminateRigidityError
    when a rank decision is numerically marginal.
    """
    edges = [tuple(e) for e in edges]
    edge_set = {frozenset(e) for e in edges}
    if len(edge_set) == num_vertices * (num_vertices - 1) // 2:
        return True
    if num_vertices < 4:
        return False  # incomplete on <= 3 vertices is never globally rigid

    g = nx.Graph()
    g.add_nodes_from(range(num_vertices))
    g.add_edges_from(edges)
    if nx.node_connectivity(g) < 3:
        return False

    for drop in range(len(edges)):
        remaining = edges[:drop] + edges[drop + 1:]
        votes, marginals = _rigid_votes(num_vertices, remaining, trials, seed)
        if sum(marginals) * 2 > trials:
            raise IndeterminateRigidityError(
                "rank test marginal (condition beyond "
                f"{RANK_CONDITION_LIMIT:g}) after deleting edge {edges[drop]}")
        if sum(votes) * 2 <= trials:
            return False
    return True


def is_generically_globally_rigid(network: SensorNetwork,
                                  trials: int = RANK_TEST_REALIZATIONS,
                                  seed: int = 0) -> bool:
    """Generic global rigidity of the grounded graph."""
    return graph_is_generically_globally_rigid(
        network.n_vertices, network.grounded_edges(), trials, seed)
