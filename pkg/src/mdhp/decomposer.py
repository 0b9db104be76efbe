"""Constant-modulus matrix decomposition by alternating optimization.

A target ``T`` (``N x Ns``) is approximated by ``F_R @ F_B`` where every entry
of ``F_R`` (``N x M``) has the same modulus and only its phases are free.
The baseband factor is refit by least squares; the RF phases move by small
increments found from a box-constrained QP on the linearized residual.
"""
from dataclasses import dataclass, field

import numpy as np

from .numerics import (
    RankDeficiencyError,
    as_complex,
    frobenius_norm,
    ls_solve,
    solve_box_ls_batch,
    svd,
)

TWO_PI = 2.0 * np.pi
BACKTRACK_SCALES = (1.0, 0.5, 0.25, 0.125)


class ZeroTargetError(ValueError):
    pass


def wrap_phase(phi):
    out = np.mod(phi, TWO_PI)
    out[out >= TWO_PI] = 0.0
    return out


@dataclass(frozen=True)
class PhaseMatrix:
    """Constant-modulus matrix stored as its phases in ``[0, 2pi)``."""

    phases: np.ndarray
    modulus: float

    def __post_init__(self):
        if not self.modulus > 0:
            raise ValueError("modulus must be positive")
        phases = wrap_phase(np.array(self.phases, dtype=float, ndmin=2))
        phases.setflags(write=False)
        object.__setattr__(self, "phases", phases)

    @property
    def shape(self):
        return self.phases.shape

    @property
    def matrix(self):
        return self.modulus * np.exp(1j * self.phases)


@dataclass(frozen=True)
class HybridProcessor:
    rf: PhaseMatrix
    baseband: np.ndarray

    @property
    def matrix(self):
        return self.rf.matrix @ self.baseband

    def normalized(self, power):
        """Scale the baseband so that ``||rf @ baseband||_F^2 == power``."""
        norm = frobenius_norm(self.matrix)
        if norm == 0:
            return self
        return HybridProcessor(self.rf, self.baseband * (np.sqrt(power) / norm))


@dataclass
class DecompositionSettings:
    convergence_tol: float = 1e-5
    initial_increment: float = 0.1
    growth_factor: float = 1.25
    shrink_factor: float = 0.8
    increment_bounds: tuple = (0.1, 0.5)
    proximity_multiplier: float = 100.0
    max_iterations: int = 500
    threshold_mode: str = "adaptive"
    normalize_output: bool = True

    def __post_init__(self):
        self.increment_bounds = tuple(float(v) for v in self.increment_bounds)
        lo, hi = self.increment_bounds
        if not 0 < self.shrink_factor < 1 < self.growth_factor:
            raise ValueError("need 0 < shrink_factor < 1 < growth_factor")
        if not lo <= self.initial_increment <= hi:
            raise ValueError("initial_increment must lie within increment_bounds")
        if not self.convergence_tol > 0:
            raise ValueError("convergence_tol must be positive")
        if self.threshold_mode not in ("adaptive", "constant"):
            raise ValueError(f"unknown threshold_mode {self.threshold_mode!r}")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")


@dataclass
class DecompositionTrace:
    """Iteration history of one decomposition.

    ``error_history[k]`` is the relative error after iteration ``k`` (entry 0
    is the initial point). ``threshold_history[k]`` is the phase-increment
    bound used to reach it; entry 0 is 0.0 since no RF step precedes the
    initial point.
    """

    error_history: list = field(default_factory=list)
    threshold_history: list = field(default_factory=list)
    converged: bool = False
    entry: tuple = None
    entry_phases: list = field(default_factory=list)
    entry_increments: list = field(default_factory=list)

    @property
    def iterations(self):
        return len(self.error_history) - 1

    @property
    def final_error(self):
        return self.error_history[-1]


def error_measure(target, hp):
    norm = frobenius_norm(target)
    if norm == 0:
        raise ZeroTargetError("target matrix is zero")
    return frobenius_norm(target - hp.matrix) / norm


def init_rf(target, m, modulus, rng):
    """Initial RF factor: phases of ``U_F Sigma_F`` followed by ``m - Ns`` random columns."""
    target = as_complex(target)
    n, ns = target.shape
    if m < ns:
        raise ValueError(f"need at least {ns} RF chains, got {m}")
    res = svd(target)
    s = res.singular_values
    if s[-1] <= 1e-10 * s[0]:
        raise RankDeficiencyError("target does not have full column rank")
    head = np.angle(res.u * s)
    tail = rng.uniform(0.0, TWO_PI, size=(n, m - ns))
    return PhaseMatrix(np.hstack([head, tail]), modulus)


def baseband_update(rf, target):
    return ls_solve(rf.matrix, target)


def _rf_step(rf, fb, target, bound):
    phases, mod = rf.phases, rf.modulus
    rot = np.exp(1j * phases)
    residual = target - (mod * rot) @ fb
    # per row p: G_p = j * mod * diag(e^{j phi_p}) @ fb
    mapping = (1j * mod) * rot[:, :, None] * fb[None, :, :]
    delta = solve_box_ls_batch(mapping, residual, bound)

    # the true residual is row-separable; keep per row the largest tried step that does not increase it
    old = np.sum(np.abs(residual) ** 2, axis=1)
    step = np.zeros_like(delta)
    pending = np.ones(phases.shape[0], dtype=bool)
    for scale in BACKTRACK_SCALES:
        if not pending.any():
            break
        trial = scale * delta[pending]
        rows = mod * np.exp(1j * (phases[pending] + trial)) @ fb
        new = np.sum(np.abs(target[pending] - rows) ** 2, axis=1)
        ok = new <= old[pending]
        idx = np.flatnonzero(pending)[ok]
        step[idx] = trial[ok]
        pending[idx] = False
    return PhaseMatrix(phases + step, mod), step


def rf_update(rf, fb, target, bound):
    return _rf_step(rf, np.asarray(fb, dtype=np.complex128), as_complex(target), bound)[0]


def adapt_threshold(eps_prev, eps_prev2, delta_prev, settings):
    improving = eps_prev < eps_prev2
    far = abs(eps_prev - eps_prev2) > settings.proximity_multiplier * settings.convergence_tol
    if far and improving:
        bound = delta_prev * settings.growth_factor
    else:
        bound = delta_prev * settings.shrink_factor
    lo, hi = settings.increment_bounds
    return float(min(max(bound, lo), hi))


def decompose(target, m, modulus, settings, rng, initial_rf=None, track_entry=None):
    """Alternating minimization of ``||target - F_R F_B||_F`` over constant-modulus ``F_R``.

    Returns ``(HybridProcessor, DecompositionTrace)``. Iteration stops once
    successive relative errors differ by at most ``settings.convergence_tol``
    or after ``settings.max_iterations`` RF updates; the trace records which.
    ``track_entry=(row, col)`` records that RF entry's phase and increment
    at every iteration.
    """
    target = as_complex(target)
    scale = frobenius_norm(target)
    if scale == 0:
        raise ZeroTargetError("target matrix is zero")
    t = target / scale
    ns = t.shape[1]

    rf = init_rf(t, m, modulus, rng) if initial_rf is None else initial_rf
    if rf.shape != (t.shape[0], m):
        raise ValueError(f"initial RF factor has shape {rf.shape}, expected {(t.shape[0], m)}")
    fb = baseband_update(rf, t)
    trace = DecompositionTrace(entry=track_entry)
    trace.error_history.append(frobenius_norm(t - rf.matrix @ fb))
    trace.threshold_history.append(0.0)
    if track_entry is not None:
        trace.entry_phases.append(float(rf.phases[track_entry]))

    bound = settings.initial_increment
    prev = np.inf
    eps = trace.error_history
    while abs(eps[-1] - prev) > settings.convergence_tol and trace.iterations < settings.max_iterations:
        if trace.iterations >= 1 and settings.threshold_mode == "adaptive":
            bound = adapt_threshold(eps[-1], eps[-2], bound, settings)
        rf, step = _rf_step(rf, fb, t, bound)
        fb = baseband_update(rf, t)
        prev = eps[-1]
        eps.append(frobenius_norm(t - rf.matrix @ fb))
        trace.threshold_history.append(bound)
        if track_entry is not None:
            trace.entry_increments.append(float(step[track_entry]))
            trace.entry_phases.append(float(rf.phases[track_entry]))
    trace.converged = abs(eps[-1] - prev) <= settings.convergence_tol

    hp = HybridProcessor(rf, fb * scale)
    if settings.normalize_output:
        hp = hp.normalized(ns)
    return hp, trace


def decompose_waterfilled(target_nonzero, zero_cols, m, modulus, settings, rng):
    """Decompose the powered columns only; zero-power streams live in the baseband.

    The returned baseband is ``[F_B', 0]`` with ``zero_cols`` zero columns.
    """
    hp, trace = decompose(target_nonzero, m, modulus, settings, rng)
    if zero_cols:
        pad = np.zeros((hp.baseband.shape[0], zero_cols), dtype=np.complex128)
        hp = HybridProcessor(hp.rf, np.hstack([hp.baseband, pad]))
    return hp, trace


def quantize_phases(rf, l_bits):
    """Round each phase to the circularly nearest point of a ``2**l_bits`` grid."""
    if l_bits < 1:
        raise ValueError("l_bits must be >= 1")
    levels = 2**l_bits
    step = TWO_PI / levels
    idx = np.mod(np.rint(rf.phases / step), levels)
    return PhaseMatrix(idx * step, rf.modulus)


def refit_baseband(rf, target, power=None):
    """LS baseband for a fixed RF factor, optionally rescaled to total ``power``."""
    hp = HybridProcessor(rf, baseband_update(rf, as_complex(target)))
    return hp if power is None else hp.normalized(power)
