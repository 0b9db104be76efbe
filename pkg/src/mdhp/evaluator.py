"""Rate metrics and the end-to-end hybrid link design.

Noise power is one, so ``gamma`` doubles as the transmit power ``P``.
"""
from dataclasses import dataclass, replace

import numpy as np

from . import reference
from .decomposer import (
    HybridProcessor,
    PhaseMatrix,
    decompose,
    decompose_waterfilled,
    error_measure,
    quantize_phases,
    refit_baseband,
)
from .numerics import logdet2_hpd

ZERO_POWER_RTOL = 1e-12


class SingularNoiseCovarianceError(ValueError):
    pass


@dataclass(frozen=True)
class LinkDesign:
    precoder: HybridProcessor
    combiner: HybridProcessor
    gamma: float
    ns: int


@dataclass(frozen=True)
class RateReport:
    achieved: float
    upper_bound: float
    decomposition_errors: tuple


def dft_rf(n):
    """Unitary DFT matrix as a square constant-modulus RF factor."""
    k = np.arange(n)
    return PhaseMatrix(2.0 * np.pi * np.outer(k, k) / n, 1.0 / np.sqrt(n))


def full_rank_hybrid(target):
    """Exact hybrid split of ``target`` through a square DFT RF stage."""
    rf = dft_rf(target.shape[0])
    return HybridProcessor(rf, rf.matrix.conj().T @ target)


def spectral_efficiency_dense(h, f, w, gamma, ns, noise_power=1.0):
    """Achieved rate for a linear precoder ``f`` and combiner ``w`` with colored noise.

    ``gamma`` is the transmit power normalized by unit noise; pass
    ``noise_power`` to evaluate at power ``gamma * noise_power``.
    """
    power = gamma * noise_power
    r_n = noise_power * (w.conj().T @ w)
    try:
        chol = np.linalg.cholesky(0.5 * (r_n + r_n.conj().T))
    except np.linalg.LinAlgError as exc:
        raise SingularNoiseCovarianceError("combiner does not have full column rank") from exc
    h_eff = w.conj().T @ h @ f
    white = np.linalg.solve(chol, h_eff)
    return logdet2_hpd(np.eye(ns) + (power / ns) * (white @ white.conj().T))


def spectral_efficiency(h, design, noise_power=1.0):
    return spectral_efficiency_dense(
        h, design.precoder.matrix, design.combiner.matrix, design.gamma, design.ns, noise_power
    )


def mutual_information(h, f, gamma, ns):
    hf = h @ f
    return logdet2_hpd(np.eye(h.shape[0]) + (gamma / ns) * (hf @ hf.conj().T))


def mutual_information_approx(sv1, v1, f, gamma, ns):
    """Small-deviation approximation of :func:`mutual_information` around ``f = v1``."""
    return reference.rate_upper_bound(sv1, gamma, ns) - ns + float(np.linalg.norm(v1.conj().T @ f) ** 2)


@dataclass(frozen=True)
class PrecoderDesign:
    hybrid: HybridProcessor
    target: np.ndarray
    active: int
    error: float
    upper_bound: float
    unconstrained: reference.UnconstrainedDesign


def design_precoder(h, ns, mt, gamma, settings, rng, waterfill=False, quant_bits=None):
    """Unconstrained SVD precoder decomposed into a hybrid with ``mt`` RF chains.

    With ``waterfill`` the target is ``V1 @ diag(gains)``; streams given no
    power are carried as zero baseband columns. ``gamma`` only matters for
    waterfilling and for the attached rate bound.
    """
    nt = h.shape[1]
    ud = reference.optimal_unconstrained(h, ns)
    settings = replace(settings, normalize_output=True)
    target = ud.precoder
    active = ns
    bound = reference.rate_upper_bound(ud.singular_values, gamma, ns)
    if waterfill:
        alloc = reference.waterfill(ud.singular_values, gamma, ns)
        target = ud.precoder * alloc.gains
        active = int(np.count_nonzero(alloc.powers >= ZERO_POWER_RTOL * ns))
        bound = reference.waterfilled_rate(ud.singular_values, gamma, ns, alloc)
    hp, trace = decompose_waterfilled(target[:, :active], ns - active, mt, 1.0 / np.sqrt(nt), settings, rng)
    pre = PrecoderDesign(hp, target, active, trace.final_error, bound, ud)
    return pre if quant_bits is None else quantize_precoder(pre, quant_bits)


def quantize_precoder(pre, bits):
    """Quantize the RF phases, refit the baseband by least squares and renormalize."""
    hp, err = _quantized(pre.hybrid.rf, pre.target, pre.active, bits, power=pre.target.shape[1])
    return replace(pre, hybrid=hp, error=err)


def _quantized(rf, target, active, bits, power=None):
    """Quantized RF factor with a least-squares baseband for the first ``active`` columns.

    The error is measured before any power normalization, as in :func:`decompose`.
    """
    qrf = quantize_phases(rf, bits)
    hp = refit_baseband(qrf, target[:, :active])
    err = error_measure(target[:, :active], hp)
    pad = target.shape[1] - active
    if pad:
        hp = HybridProcessor(qrf, np.hstack([hp.baseband, np.zeros((hp.baseband.shape[0], pad), complex)]))
    return (hp if power is None else hp.normalized(power)), err


def design_combiner(h, precoder, mr, gamma, settings, rng, quant_bits=None):
    """Hybrid combiner approximating the MMSE combiner for the realized precoder.

    Columns of the MMSE combiner that see no signal (zero-power streams)
    are replaced by the matching left singular vectors so the combiner
    keeps full column rank.
    """
    nr = h.shape[0]
    ns = precoder.target.shape[1]
    w = reference.mmse_combiner(h, precoder.hybrid.matrix, gamma, ns)
    if precoder.active < ns:
        w = w.copy()
        w[:, precoder.active:] = precoder.unconstrained.combiner[:, precoder.active:]
    settings = replace(settings, normalize_output=False)
    hp, trace = decompose(w, mr, 1.0 / np.sqrt(nr), settings, rng)
    err = trace.final_error
    if quant_bits is not None:
        hp, err = _quantized(hp.rf, w, ns, quant_bits)
    return hp, err


def design_link(h, ns, mt, mr, gamma, settings, rng, waterfill=False, quant_bits=None):
    nr, nt = h.shape
    if not (ns <= mt <= nt and ns <= mr <= nr):
        raise ValueError(f"need ns <= mt <= nt and ns <= mr <= nr, got ns={ns} mt={mt} mr={mr} for {nr}x{nt}")
    pre = design_precoder(h, ns, mt, gamma, settings, rng, waterfill, quant_bits)
    comb, comb_err = design_combiner(h, pre, mr, gamma, settings, rng, quant_bits)
    link = LinkDesign(pre.hybrid, comb, gamma, ns)
    report = RateReport(spectral_efficiency(h, link), pre.upper_bound, (pre.error, comb_err))
    return link, report
