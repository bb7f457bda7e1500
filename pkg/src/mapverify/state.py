"""Kinematic state containers for the ego vehicle and tracked objects.

All 6x6 covariances use the state order ``[x, y, v, a, phi, omega]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Mapping

import numpy as np

STATE_ORDER = ("x", "y", "v", "a", "phi", "omega")
PHI_INDEX = 4
PSD_TOL = 1e-9


class CovarianceError(ValueError):
    """Raised when a covariance matrix is not symmetric PSD."""


def wrap_angle(theta: float) -> float:
    """Map an angle to the half-open interval ``(-pi, pi]``."""
    if not math.isfinite(theta):
        raise ValueError(f"cannot wrap non-finite angle {theta!r}")
    wrapped = math.fmod(theta, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    elif wrapped > math.pi:
        wrapped -= 2.0 * math.pi
    return wrapped


@dataclass(frozen=True)
class CovarianceReport:
    """Outcome of :func:`validate_covariance`.

    ``index`` is the offending ``(row, col)`` pair for an asymmetry, or the
    eigenvalue index for a negative eigenvalue.
    """

    ok: bool
    reason: str = ""
    index: tuple[int, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


def validate_covariance(m, tol: float = PSD_TOL) -> CovarianceReport:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return CovarianceReport(False, f"not square: shape {m.shape}")
    if not np.all(np.isfinite(m)):
        bad = tuple(int(i) for i in np.argwhere(~np.isfinite(m))[0])
        return CovarianceReport(False, "non-finite entry", bad)
    asym = np.abs(m - m.T)
    if asym.max(initial=0.0) > tol:
        i, j = np.unravel_index(int(np.argmax(asym)), asym.shape)
        return CovarianceReport(False, f"asymmetric at ({i}, {j}): {m[i, j]!r} != {m[j, i]!r}", (int(i), int(j)))
    eig = np.linalg.eigvalsh(0.5 * (m + m.T))
    if eig.size and eig.min() < -tol:
        k = int(np.argmin(eig))
        return CovarianceReport(False, f"negative eigenvalue {eig[k]:.6g} (index {k})", (k,))
    return CovarianceReport(True)


def require_covariance(m, what: str = "covariance") -> np.ndarray:
    """Validate ``m`` and return it as a float array, raising on violation."""
    report = validate_covariance(m)
    if not report:
        raise CovarianceError(f"{what}: {report.reason}")
    return np.asarray(m, dtype=float)


def _as_cov6(cov) -> np.ndarray:
    arr = np.asarray(cov, dtype=float)
    if arr.shape == (36,):
        arr = arr.reshape(6, 6)
    if arr.shape != (6, 6):
        raise ValueError(f"expected a 6x6 covariance, got shape {arr.shape}")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class EgoState:
    """Global ego motion state (east/north in a planar map frame)."""

    x: float
    y: float
    v: float
    a: float
    phi: float
    omega: float
    cov: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "cov", _as_cov6(self.cov))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def spatial_cov(self) -> np.ndarray:
        return self.cov[:2, :2].copy()

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.v, self.a, self.phi, self.omega])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EgoState):
            return NotImplemented
        return (
            np.array_equal(self.as_array(), other.as_array())
            and np.array_equal(self.cov, other.cov)
            and self.timestamp == other.timestamp
        )


@dataclass(frozen=True, eq=False)
class TrackState:
    """A tracked object in the ego frame, as published by the tracker.

    Attributes
    ----------
    label:
        Unique track identifier.
    x, y, phi:
        Pose of the geometric center relative to the ego vehicle.
    cov:
        6x6 covariance in ``STATE_ORDER``.
    existence:
        The tracker's existence probability ``r``.
    class_probs:
        Class name to probability.
    """

    label: Hashable
    x: float
    y: float
    v: float
    a: float
    phi: float
    omega: float
    cov: np.ndarray
    existence: float
    class_probs: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "cov", _as_cov6(self.cov))
        if not 0.0 <= self.existence <= 1.0:
            raise ValueError(f"track {self.label!r}: existence {self.existence} outside [0, 1]")
        for name, p in self.class_probs.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"track {self.label!r}: class probability {name}={p} outside [0, 1]")

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def spatial_cov(self) -> np.ndarray:
        return self.cov[:2, :2].copy()

    @property
    def phi_var(self) -> float:
        return float(self.cov[PHI_INDEX, PHI_INDEX])

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.v, self.a, self.phi, self.omega])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TrackState):
            return NotImplemented
        return (
            self.label == other.label
            and np.array_equal(self.as_array(), other.as_array())
            and np.array_equal(self.cov, other.cov)
            and self.existence == other.existence
            and dict(self.class_probs) == dict(other.class_probs)
        )


@dataclass(frozen=True, eq=False)
class GlobalTrack:
    """Track pose and spatial uncertainty expressed in the map frame."""

    label: Hashable
    x: float
    y: float
    phi: float
    sigma: np.ndarray
    phi_var: float
    existence: float = 1.0
    class_probs: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        sigma = np.array(self.sigma, dtype=float).reshape(2, 2)
        sigma.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def max_std(self) -> float:
        """Standard deviation along the major axis of ``sigma``."""
        return math.sqrt(max(float(np.linalg.eigvalsh(self.sigma)[-1]), 0.0))
