"""
Resilience curve metrics.

Given a tick trace with a disruption marker t_D:

* y_m is the minimum normalized throughput at or after t_D and the
  performance drop is dy = (pre-disruption mean) - y_m, never negative.
* t_R is the first tick of the first run of `window` consecutive
  violation-free ticks that starts at or after the first violation
  following t_D; dt = t_R - t_D.
* Recovery is "full" when the mean throughput from t_R on reaches 98% of
  the pre-disruption mean, "partial" otherwise, and "none" when no clean
  window exists (dt is then the rest of the run).
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

logger = logging.getLogger(__name__)

RECOVERY_WINDOW_TICKS = 10
FULL_RECOVERY_RATIO = 0.98


class EmptyTraceError(ValueError):
    """Raised when metrics are requested for a trace without ticks."""


@dataclass
class ResilienceResult:
    dy: float
    dt: float
    recovery_class: str
    t_D: Optional[float] = None
    t_R: Optional[float] = None
    first_violation: Optional[float] = None
    y_m: float = 1.0
    pre_mean: float = 1.0
    post_mean: float = 1.0

    def to_dict(self) -> Dict:
        return dict(self.__dict__)


def _classify(post_mean: float, pre_mean: float) -> str:
    return "full" if post_mean >= FULL_RECOVERY_RATIO * pre_mean else "partial"


def first_clean_window(violation: np.ndarray, start: int, window: int) -> Optional[int]:
    """Index of the first tick of `window` consecutive clean ticks at or after start."""
    run = 0
    for j in range(start, len(violation)):
        if violation[j]:
            run = 0
            continue
        run += 1
        if run == window:
            return j - window + 1
    return None


def resilience_metrics(trace, window: int = RECOVERY_WINDOW_TICKS) -> ResilienceResult:
    """
    Performance drop, recovery time and recovery class of a trace.

    Args:
        trace: TickTrace (uses the t, y and violation columns and t_D)
        window: Consecutive clean ticks that count as recovered

    Raises:
        EmptyTraceError: If the trace has no ticks
    """
    if len(trace) == 0:
        raise EmptyTraceError("Cannot compute resilience metrics of an empty trace")
    t = trace.array('t').astype(float)
    y = trace.array('y').astype(float)
    violation = trace.array('violation').astype(bool)
    t_D = trace.t_D

    if t_D is None:
        return ResilienceResult(dy=0.0, dt=0.0, recovery_class="full", y_m=float(y.min()),
                                pre_mean=float(y.mean()), post_mean=float(y.mean()))

    pre = y[t < t_D]
    pre_mean = float(pre.mean()) if pre.size else 1.0
    post_idx = np.flatnonzero(t >= t_D)
    if post_idx.size == 0:
        return ResilienceResult(dy=0.0, dt=0.0, recovery_class="full", t_D=t_D,
                                y_m=pre_mean, pre_mean=pre_mean, post_mean=pre_mean)

    y_m = float(y[post_idx].min())
    dy = max(0.0, pre_mean - y_m)
    violated = post_idx[violation[post_idx]]
    if violated.size == 0:
        post_mean = float(y[post_idx].mean())
        return ResilienceResult(dy=dy, dt=0.0, recovery_class=_classify(post_mean, pre_mean),
                                t_D=t_D, t_R=t_D, y_m=y_m, pre_mean=pre_mean, post_mean=post_mean)

    first_violation = int(violated[0])
    recovered_at = first_clean_window(violation, first_violation, window)
    if recovered_at is None:
        logger.debug(f"No {window}-tick clean window after t={t[first_violation]:.3f}s")
        return ResilienceResult(dy=dy, dt=float(t[-1] - t_D), recovery_class="none", t_D=t_D,
                                first_violation=float(t[first_violation]), y_m=y_m,
                                pre_mean=pre_mean, post_mean=float(y[post_idx].mean()))

    t_R = float(t[recovered_at])
    post_mean = float(y[recovered_at:].mean())
    return ResilienceResult(dy=dy, dt=max(0.0, t_R - t_D), recovery_class=_classify(post_mean, pre_mean),
                            t_D=t_D, t_R=t_R, first_violation=float(t[first_violation]), y_m=y_m,
                            pre_mean=pre_mean, post_mean=post_mean)
