"""Adaptive Runge-Kutta-Fehlberg 4(5) on complex arrays.

Classic Fehlberg tableau. The error estimate is the embedded 4th/5th-order
difference measured entrywise, err = max |y5 - y4| / (abs_tol + rel_tol*|y5|),
and the 5th-order solution is the one propagated (local extrapolation) --
that is what keeps the global error at J*t = 10 below the 1e-8 acceptance
bound with the default tolerances.

The integrator knows nothing about quantum mechanics; dynamics.py feeds it
density-matrix right-hand sides.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, IntegrationError

# Fehlberg nodes and stage coefficients.
_C = np.array([0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2])
_A = (
    (),
    (1 / 4,),
    (3 / 32, 9 / 32),
    (1932 / 2197, -7200 / 2197, 7296 / 2197),
    (439 / 216, -8.0, 3680 / 513, -845 / 4104),
    (-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40),
)
_B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])
_B5 = np.array([16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55])

_SAFETY = 0.9
# The propagated (5th-order) solution accrues global error well below the
# embedded estimate only if each step keeps a margin under the requested
# tolerance; 1/4 buys a ~4x accuracy cushion for ~1.4x the steps.
_ERR_MARGIN = 0.25
_MIN_SHRINK = 0.2
_MAX_GROW = 5.0
_MAX_STEPS = 10_000_000


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and step limits for the adaptive integrator.

    The step fields are in the same time units as the durations passed to
    evolve(); the defaults assume J*t-like dimensionless time of order one
    (protocol code rescales them by 1/J).
    """

    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    initial_step: float = 1e-3
    max_step: float = 0.1
    dense_grid_spacing: float = 0.01

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise DomainError("tolerances must be positive")
        if self.initial_step <= 0 or self.max_step <= 0:
            raise DomainError("step sizes must be positive")
        if self.dense_grid_spacing <= 0:
            raise DomainError("grid spacing must be positive")

    def scaled(self, time_factor: float) -> "IntegratorConfig":
        """Rescale the time-dimensioned fields (tolerances untouched)."""
        return replace(
            self,
            initial_step=self.initial_step * time_factor,
            max_step=self.max_step * time_factor,
            dense_grid_spacing=self.dense_grid_spacing * time_factor,
        )


@dataclass
class IntegrationResult:
    y: np.ndarray
    samples: list[tuple[float, np.ndarray]]
    steps_taken: int
    steps_rejected: int


def rkf45(rhs: Callable[[float, np.ndarray], np.ndarray],
          y0: np.ndarray,
          duration: float,
          cfg: IntegratorConfig,
          t_eval: Sequence[float] | None = None) -> IntegrationResult:
    """Integrate dy/dt = rhs(t, y) from t=0 to t=duration.

    `t_eval` (optional, increasing, within [0, duration]) lists times at
    which the solution is recorded; the step sequence lands on them exactly
    rather than interpolating.
    """
    if duration < 0:
        raise DomainError(f"duration must be >= 0, got {duration}")
    y = np.array(y0, dtype=complex)
    eval_times = list(t_eval) if t_eval is not None else []
    if any(t < 0 or t > duration for t in eval_times):
        raise DomainError("t_eval times must lie inside [0, duration]")
    samples: list[tuple[float, np.ndarray]] = []
    next_eval = 0
    while next_eval < len(eval_times) and eval_times[next_eval] <= 0.0:
        samples.append((0.0, y.copy()))
        next_eval += 1
    if duration == 0:
        return IntegrationResult(y, samples, 0, 0)

    t = 0.0
    h = min(cfg.initial_step, cfg.max_step, duration)
    taken = rejected = 0
    h_floor = max(1e-14 * duration, 5e-292)

    while t < duration:
        if duration - t <= h_floor:
            break  # fp-level remainder; the end point has been reached
        target = None
        h = min(h, cfg.max_step, duration - t)
        if next_eval < len(eval_times) and t + h >= eval_times[next_eval] - 1e-15:
            target = eval_times[next_eval]
            h = target - t
        if h <= h_floor:
            if target is not None and h <= 0:
                # Duplicate/collapsed eval point: record and move on.
                samples.append((target, y.copy()))
                next_eval += 1
                continue
            raise IntegrationError("step-size underflow", t=t, step=h, ratio=np.inf)

        k1 = rhs(t, y)
        k2 = rhs(t + _C[1] * h, y + h * (_A[1][0] * k1))
        k3 = rhs(t + _C[2] * h, y + h * (_A[2][0] * k1 + _A[2][1] * k2))
        k4 = rhs(t + _C[3] * h,
                 y + h * (_A[3][0] * k1 + _A[3][1] * k2 + _A[3][2] * k3))
        k5 = rhs(t + _C[4] * h,
                 y + h * (_A[4][0] * k1 + _A[4][1] * k2 + _A[4][2] * k3
                          + _A[4][3] * k4))
        k6 = rhs(t + _C[5] * h,
                 y + h * (_A[5][0] * k1 + _A[5][1] * k2 + _A[5][2] * k3
                          + _A[5][3] * k4 + _A[5][4] * k5))
        # _B4[1] = _B4[5] = _B5[1] = 0: those stages drop out of the sums.
        y5 = y + h * (_B5[0] * k1 + _B5[2] * k3 + _B5[3] * k4
                      + _B5[4] * k5 + _B5[5] * k6)
        y4 = y + h * (_B4[0] * k1 + _B4[2] * k3 + _B4[3] * k4 + _B4[4] * k5)

        if not np.all(np.isfinite(y5.view(float))):
            raise IntegrationError("non-finite state", t=t, step=h, ratio=np.inf)

        scale = _ERR_MARGIN * (cfg.abs_tol + cfg.rel_tol * np.abs(y5))
        ratio = float((np.abs(y5 - y4) / scale).max())

        if ratio <= 1.0:
            taken += 1
            t = target if target is not None else t + h
            y = y5
            if target is not None:
                samples.append((t, y.copy()))
                next_eval += 1
            if taken + rejected > _MAX_STEPS:
                raise IntegrationError("step budget exhausted", t=t, step=h,
                                       ratio=ratio)
        else:
            rejected += 1
            if rejected > _MAX_STEPS:
                raise IntegrationError("step budget exhausted", t=t, step=h,
                                       ratio=ratio)
        factor = _SAFETY * ratio ** -0.2 if ratio > 0 else _MAX_GROW
        h = h * min(_MAX_GROW, max(_MIN_SHRINK, factor))

    return IntegrationResult(y, samples, taken, rejected)
