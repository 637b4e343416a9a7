"""Seeded Haar-random triads and a drifting channel model.

Generators are always passed in by the caller.  ``generator_for`` derives an
independent stream from a master seed and a counter, which is how the Monte
Carlo engine keeps results independent of worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .qmath import (
    MeasurementTriad,
    axis_angle_rotation,
    orthonormalize,
    rotation_from_quaternion,
)

MAX_SEED = 2**64 - 1


def generator_for(master_seed: int, *counter: int) -> np.random.Generator:
    """Independent PCG64 stream for ``(master_seed, *counter)``."""
    if not 0 <= int(master_seed) <= MAX_SEED:
        raise ValueError(f"seed {master_seed!r} is not a 64-bit unsigned integer")
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(c) for c in counter))
    return np.random.Generator(np.random.PCG64(ss))


def random_rotations(rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` Haar-uniform proper rotations from normalised Gaussian quaternions."""
    q = rng.standard_normal((n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    return rotation_from_quaternion(q)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    return random_rotations(rng, 1)[0]


def random_triad(rng: np.random.Generator, random_handedness: bool = False) -> MeasurementTriad:
    """Haar-random orthonormal triad.

    With ``random_handedness`` the third vector is negated with probability 1/2,
    giving a left-handed triad.
    """
    r = random_rotation(rng)
    if random_handedness and rng.random() < 0.5:
        r = r @ np.diag([1.0, 1.0, -1.0])
    return MeasurementTriad.from_rotation(r)


def random_unit_vector(rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


@dataclass(frozen=True, eq=False)
class DriftProcess:
    """Slow random walk of the channel rotation.

    Each step rotates by a half-normal angle (scale ``step_angle_std``) about an
    axis that keeps a fraction ``axis_correlation`` of the previous axis.
    """

    step_angle_std: float = 0.02
    axis_correlation: float = 0.9
    current_rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        if self.step_angle_std < 0:
            raise ValueError("step_angle_std must be nonnegative")
        if not 0.0 <= self.axis_correlation <= 1.0:
            raise ValueError("axis_correlation must lie in [0, 1]")
        r = np.asarray(self.current_rotation, dtype=float)
        if np.max(np.abs(r @ r.T - np.eye(3))) > 1e-9 or abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValueError("current_rotation must be a proper rotation")


def random_drift(rng: np.random.Generator, step_angle_std: float = 0.02,
                 axis_correlation: float = 0.9) -> DriftProcess:
    """Drift process starting from a Haar-random channel and a random axis."""
    return DriftProcess(step_angle_std, axis_correlation, random_rotation(rng),
                        random_unit_vector(rng))


def drift_step(process: DriftProcess, rng: np.random.Generator) -> DriftProcess:
    if process.step_angle_std == 0.0:
        return process
    c = process.axis_correlation
    axis = c * process.axis + math.sqrt(1.0 - c * c) * random_unit_vector(rng)
    axis = axis / np.linalg.norm(axis)
    angle = abs(rng.normal(0.0, process.step_angle_std))
    r = orthonormalize(axis_angle_rotation(axis, angle) @ process.current_rotation)
    return replace(process, current_rotation=r, axis=axis)


def apply_channel(triad_b: MeasurementTriad, rotation) -> MeasurementTriad:
    """Bob's effective triad after the channel rotates his qubit by ``rotation``.

    Measuring ``b`` on the rotated state equals measuring ``R^T b`` on the
    original one.
    """
    r = np.asarray(rotation, dtype=float)
    return MeasurementTriad(triad_b.vectors @ r)
