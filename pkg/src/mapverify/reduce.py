"""Frame transformation to the map frame and 2-D to 1-D uncertainty reduction."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .state import EgoState, GlobalTrack, TrackState, require_covariance, wrap_angle

UNIT_TOL = 1e-9


@dataclass(frozen=True)
class ReducedGaussian:
    mean: float
    var: float

    @property
    def std(self) -> float:
        return math.sqrt(self.var)


def rotation(phi: float) -> np.ndarray:
    """Counter-clockwise rotation by ``phi``."""
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -s], [s, c]])


def to_global(track: TrackState, ego: EgoState) -> GlobalTrack:
    """Express a track's pose and spatial covariance in the map frame.

    The covariance is ``R P_track R^T + P_ego`` with ``R`` the rotation used
    for the position, i.e. the Jacobian of the position transform.
    """
    require_covariance(ego.cov, "ego covariance")
    require_covariance(track.cov, f"track {track.label!r} covariance")
    rot = rotation(ego.phi)
    pos = ego.position + rot @ track.position
    sigma = rot @ track.spatial_cov @ rot.T + ego.spatial_cov
    sigma = 0.5 * (sigma + sigma.T)
    return GlobalTrack(
        label=track.label,
        x=float(pos[0]),
        y=float(pos[1]),
        phi=wrap_angle(ego.phi + track.phi),
        sigma=sigma,
        phi_var=track.phi_var,
        existence=track.existence,
        class_probs=dict(track.class_probs),
    )


def directional_variance(sigma, u) -> float:
    """Marginal variance of a 2-D Gaussian projected onto unit vector ``u``."""
    u = np.asarray(u, dtype=float)
    if abs(math.hypot(u[0], u[1]) - 1.0) > UNIT_TOL:
        raise ValueError(f"direction must be a unit vector, got norm {math.hypot(u[0], u[1])!r}")
    return max(float(u @ np.asarray(sigma, dtype=float) @ u), 0.0)


def reduce_to_line(track: GlobalTrack, foot, u) -> ReducedGaussian:
    """1-D Gaussian of the track position along the line through ``foot`` with direction ``u``."""
    u = np.asarray(u, dtype=float)
    var = directional_variance(track.sigma, u)
    mean = float(u @ (track.position - np.asarray(foot, dtype=float)))
    return ReducedGaussian(mean, var)
