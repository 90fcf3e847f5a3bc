"""Bolus insulin and carbohydrate action profiles.

Doses are impulses per grid bin; their effect is spread over time by a
two-compartment linear response

    h(t) = (exp(-t/tau1) - exp(-t/tau2)) / (tau1 - tau2)

which integrates to 1 over ``[0, inf)``. Times are minutes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .series import UniformSeries

TRUNCATION_MASS = 0.9999


@dataclass(frozen=True)
class ActionProfile:
    tau1: float
    tau2: float

    def __post_init__(self):
        if not (self.tau1 > 0 and self.tau2 > 0):
            raise ValueError("tau1 and tau2 must be positive")

    @property
    def degenerate(self) -> bool:
        return abs(self.tau1 - self.tau2) < 1e-9 * self.tau1


INSULIN_PROFILE = ActionProfile(55.0, 70.0)
CARB_PROFILE = ActionProfile(20.0, 40.0)


def impulse_response(profile: ActionProfile, t):
    """Response to a unit dose at time ``t`` minutes after it (1/min)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("impulse response is defined for t >= 0 only")
    if profile.degenerate:
        tau = profile.tau1
        h = t / tau**2 * np.exp(-t / tau)
    else:
        t1, t2 = profile.tau1, profile.tau2
        h = (np.exp(-t / t1) - np.exp(-t / t2)) / (t1 - t2)
    return np.maximum(h, 0.0)


def cumulative_response(profile: ActionProfile, t):
    """Closed-form integral of the impulse response over ``[0, t]``."""
    t = np.asarray(t, dtype=float)
    if profile.degenerate:
        x = t / profile.tau1
        return 1.0 - (1.0 + x) * np.exp(-x)
    t1, t2 = profile.tau1, profile.tau2
    return 1.0 - (t1 * np.exp(-t / t1) - t2 * np.exp(-t / t2)) / (t1 - t2)


def kernel(profile: ActionProfile, dt_min: float, mass: float = TRUNCATION_MASS) -> np.ndarray:
    """Sampled response times ``dt_min``, cut once cumulative mass exceeds ``mass``."""
    # first grid lag whose analytic cumulative mass passes the cutoff
    t = np.arange(0.0, 1.0 + 60.0 * max(profile.tau1, profile.tau2) / dt_min) * dt_min
    cut = int(np.argmax(cumulative_response(profile, t) > mass))
    return impulse_response(profile, t[: cut + 1]) * dt_min


def events_to_activity(doses: UniformSeries, profile: ActionProfile) -> UniformSeries:
    """Causal convolution of per-bin dose totals with the action kernel.

    ``activity[i] = sum_k dose[k] * h((i - k) * dt) * dt`` over ``k <= i``,
    so summed activity recovers the total dose up to truncation.
    """
    d = doses.values
    if np.any(d < 0):
        raise ValueError("dose values must be non-negative")
    k = kernel(profile, doses.dt / 60.0)
    activity = np.convolve(d, k)[: d.size]
    units = f"{doses.units}-activity" if doses.units else ""
    return UniformSeries(doses.t0, doses.dt, np.maximum(activity, 0.0), units)


def activity_at(profile: ActionProfile, dose_times_min, doses, t_min, dt_min: float):
    """Continuous-time activity for doses at given times, untruncated.

    Matches :func:`events_to_activity` on grid points when doses sit on the
    grid, apart from kernel truncation.
    """
    t_min = np.asarray(t_min, dtype=float)
    out = np.zeros_like(t_min)
    for tk, dk in zip(dose_times_min, doses):
        lag = t_min - tk
        live = lag > 0
        out[live] += dk * impulse_response(profile, lag[live])
    return out * dt_min
