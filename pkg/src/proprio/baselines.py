"""Comparison contact detectors: force thresholding and gait scheduling.

The force detector maps joint torques through the kinematic Jacobian
transpose (static approximation, no dynamics terms), low-passes the
vertical component and thresholds its magnitude. The schedule detector
reproduces a commanded gait cycle: contact while the leg phase sits inside
the duty window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinematics import fk_jacobian
from .labelgen import lowpass

SINGULAR_SVMIN = 1e-4


class MissingTorquesError(ValueError):
    pass


@dataclass
class GrfConfig:
    threshold: float = 15.0  # N
    cutoff: float = 0.04  # cycles/sample, half-power frequency
    leg_signs: tuple = (1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.threshold <= 0.0:
            raise ValueError("force threshold must be positive")


@dataclass
class GaitSchedule:
    period: float  # s
    offsets: np.ndarray  # (L,), per-leg phase offsets in [0, 1)
    duty: float
    start_time: float = 0.0

    def __post_init__(self):
        self.offsets = np.asarray(self.offsets, dtype=float)
        if not 0.0 < self.duty < 1.0:
            raise ValueError("duty factor must lie in (0, 1)")
        if np.any(self.offsets < 0.0) or np.any(self.offsets >= 1.0):
            raise ValueError("phase offsets must lie in [0, 1)")


def estimate_grf(tau, alpha, legs):
    """Per-leg ground-reaction force estimate f = (J^T)^-1 tau.

    tau: (..., 12) torques, alpha: (..., 4, 3) joint angles. Returns
    (forces (..., 4, 3), singular_flags (..., 4)); near-singular legs fall
    back to a pseudo-inverse and are flagged.
    """
    tau = np.asarray(tau, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    tau_legs = tau.reshape(tau.shape[:-1] + (4, 3))
    forces = np.zeros_like(tau_legs)
    flags = np.zeros(tau_legs.shape[:-1], dtype=bool)
    for leg in range(4):
        jac_t = np.swapaxes(fk_jacobian(legs[leg], alpha[..., leg, :]), -1, -2)
        svmin = np.linalg.svd(jac_t, compute_uv=False)[..., -1]
        singular = svmin < SINGULAR_SVMIN
        flags[..., leg] = singular
        if np.all(singular):
            forces[..., leg, :] = np.einsum(
                "...ij,...j->...i", np.linalg.pinv(jac_t), tau_legs[..., leg, :]
            )
            continue
        safe = np.where(singular[..., None, None], np.eye(3), jac_t)
        sol = np.linalg.solve(safe, tau_legs[..., leg, :, None])[..., 0]
        if np.any(singular):
            pinv = np.linalg.pinv(jac_t)
            alt = np.einsum("...ij,...j->...i", pinv, tau_legs[..., leg, :])
            sol = np.where(singular[..., None], alt, sol)
        forces[..., leg, :] = sol
    return forces, flags


def grf_threshold_detect(frames, config: GrfConfig, legs) -> np.ndarray:
    """(N, 4) contact booleans by thresholding filtered vertical force."""
    if frames.tau is None:
        raise MissingTorquesError("frames carry no torque channel")
    alpha = frames.q.reshape(-1, 4, 3)
    forces, _ = estimate_grf(frames.tau, alpha, legs)
    out = np.zeros((len(frames), 4), dtype=bool)
    for leg in range(4):
        fz = config.leg_signs[leg] * forces[:, leg, 2]
        fz = lowpass(fz, config.cutoff)
        out[:, leg] = np.abs(fz) > config.threshold
    return out


def gait_cycle_detect(timestamps, schedule: GaitSchedule) -> np.ndarray:
    """(N, L) contact booleans from the commanded gait cycle."""
    t = np.asarray(timestamps, dtype=float)
    phase = (t[:, None] - schedule.start_time) / schedule.period + schedule.offsets[None, :]
    return np.mod(phase, 1.0) < schedule.duty
