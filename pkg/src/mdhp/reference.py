"""Unconstrained reference processors: SVD precoder/combiner, waterfilling, MMSE combiner.

Noise power is fixed at one, so the transmit power equals the SNR ``gamma``.
"""
from dataclasses import dataclass

import numpy as np

from .numerics import RankDeficiencyError, svd


@dataclass(frozen=True)
class UnconstrainedDesign:
    precoder: np.ndarray
    combiner: np.ndarray
    singular_values: np.ndarray


@dataclass(frozen=True)
class PowerAllocation:
    gains: np.ndarray

    @property
    def powers(self):
        return self.gains**2


def optimal_unconstrained(h, ns):
    """First ``ns`` right/left singular vectors of the channel."""
    res = svd(h)
    if ns > res.singular_values.size:
        raise RankDeficiencyError(f"channel of shape {np.shape(h)} cannot carry {ns} streams")
    sv = res.singular_values[:ns]
    if sv[-1] <= 1e-10 * sv[0]:
        raise RankDeficiencyError(f"channel rank is below {ns}")
    return UnconstrainedDesign(precoder=res.v[:, :ns], combiner=res.u[:, :ns], singular_values=sv)


def rate_upper_bound(sv, gamma, ns):
    sv = np.asarray(sv, dtype=float)[:ns]
    return float(np.sum(np.log2(1.0 + gamma / ns * sv**2)))


def waterfilled_rate(sv, gamma, ns, allocation):
    sv = np.asarray(sv, dtype=float)[:ns]
    return float(np.sum(np.log2(1.0 + gamma / ns * allocation.powers * sv**2)))


def waterfill(sv, gamma, ns):
    """Power split over ``ns`` eigenchannels maximizing ``sum log2(1 + gamma/ns * p_i * s_i^2)``.

    Total power ``sum p_i = ns``. The active set is found exactly by
    shrinking it from the weakest channel until the water level clears the
    weakest active floor.
    """
    sv = np.asarray(sv, dtype=float)[:ns]
    if np.any(np.diff(sv) > 0):
        raise ValueError("singular values must be non-increasing")
    with np.errstate(divide="ignore"):
        floor = np.where(sv > 0, ns / (gamma * sv**2), np.inf)
    powers = np.zeros(ns)
    for k in range(ns, 0, -1):
        if not np.isfinite(floor[k - 1]):
            continue
        level = (ns + floor[:k].sum()) / k
        if level - floor[k - 1] >= 0:
            powers[:k] = level - floor[:k]
            break
    return PowerAllocation(gains=np.sqrt(np.maximum(powers, 0.0)))


def mmse_combiner(h, f, gamma, ns):
    """Linear MMSE combiner for the effective channel ``h @ f`` (noise power one).

    Implements ``sqrt(P)/ns * (P/ns * HF (HF)^H + I)^-1 HF`` with ``P = gamma``.
    """
    hf = np.asarray(h) @ np.asarray(f)
    cov = (gamma / ns) * (hf @ hf.conj().T) + np.eye(hf.shape[0])
    return np.sqrt(gamma) / ns * np.linalg.solve(cov, hf)
