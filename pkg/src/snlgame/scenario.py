"""Scenario generation and the JSON scenario file format.

A scenario file stores true positions, the sensing range and an
optional noise specification.  Edge sets are always recomputed from
positions and range on load, never stored:

    {
      "anchors": [[x, y], ...],
      "non_anchors_true": [[x, y], ...],
      "sensing_range": 1.5,
      "noise": {"delta_budget": 0.1, "weights": [1, 2, 32],
                "distribution": "uniform-ball", "seed": 7}   # optional
    }

Generated scenarios place nodes uniformly in a box and resample until
the configuration is generic (no duplicate points, no three nodes
collinear within tolerance), since the rigidity machinery assumes
generic position.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .network import NoiseSpec, SensorNetwork, build_edges
from .rigidity import RigidityError, is_generically_globally_rigid

__all__ = [
    "Scenario",
    "generate_network",
    "scenario_to_dict",
    "scenario_from_dict",
    "save_scenario",
    "load_scenario",
]

COLLINEARITY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Scenario:
    network: SensorNetwork
    noise: NoiseSpec | None = None


def _is_generic(points: np.ndarray) -> bool:
    for a, b, c in itertools.combinations(range(len(points)), 3):
        u = points[b] - points[a]
        v = points[c] - points[a]
        if abs(u[0] * v[1] - u[1] * v[0]) <= COLLINEARITY_TOL:
            return False
    return True


def generate_network(n: int, m: int, sensing_range: float,
                     box=((0.0, 0.0), (1.0, 1.0)), seed: int = 0,
                     require_globally_rigid: bool = False,
                     max_resamples: int = 100) -> SensorNetwork:
    """Sample a random generic scenario; optionally insist on global rigidity.

    Positions are uniform in ``box``.  Raises RigidityError when no
    generically globally rigid configuration is found within the
    resample budget (only with ``require_globally_rigid``).
    """
    if n < 1:
        raise ValueError("need at least one non-anchor")
    if m < 3:
        raise ValueError("need at least three anchors")
    (x0, y0), (x1, y1) = box
    rng = np.random.default_rng(seed)
    last = None
    for _ in range(max_resamples):
        pts = rng.uniform((x0, y0), (x1, y1), size=(n + m, 2))
        if not _is_generic(pts):
            continue
        net = build_edges(pts[:n], pts[n:], sensing_range)
        last = net
        if not require_globally_rigid or is_generically_globally_rigid(net):
            return net
    if last is None:
        raise RigidityError("could not sample a generic configuration")
    raise RigidityError(
        f"no generically globally rigid scenario found in {max_resamples} "
        "resamples; enlarge the sensing range or the node count")


def scenario_to_dict(scenario: Scenario) -> dict:
    net = scenario.network
    out = {
        "anchors": [[float(x), float(y)] for x, y in net.anchors],
        "non_anchors_true": [[float(x), float(y)] for x, y in net.non_anchors],
        "sensing_range": float(net.sensing_range),
    }
    if scenario.noise is not None:
        ns = scenario.noise
        out["noise"] = {
            "delta_budget": float(ns.delta_budget),
            "weights": [float(w) for w in ns.weights],
            "distribution": ns.distribution,
            "seed": int(ns.seed),
        }
    return out


def scenario_from_dict(data: dict) -> Scenario:
    try:
        network = build_edges(data["non_anchors_true"], data["anchors"],
                              float(data["sensing_range"]))
    except KeyError as exc:
        raise ValueError(f"scenario file missing key {exc}") from exc
    noise = None
    if "noise" in data and data["noise"] is not None:
        raw = data["noise"]
        if "weights" in raw:
            weights = tuple(float(w) for w in raw["weights"])
        else:
            # Fall back to the certified floor weights for this network.
            from .deltabound import noise_weights
            weights = noise_weights(network).as_tuple()
        noise = NoiseSpec(
            delta_budget=float(raw["delta_budget"]),
            weights=weights,
            distribution=raw.get("distribution", "uniform-ball"),
            seed=int(raw.get("seed", 0)),
        )
    return Scenario(network=network, noise=noise)


def save_scenario(path, scenario: Scenario) -> None:
    Path(path).write_text(
        json.dumps(scenario_to_dict(scenario), indent=2, sort_keys=True) + "\n")


def load_scenario(path) -> Scenario:
    return scenario_from_dict(json.loads(Path(path).read_text()))
