"""Experiment runners: convergence traces, Monte-Carlo SNR sweeps, CSV output.

Randomness is derived from the config seed only. Trial ``t`` draws its
channel from ``default_rng(seed + t)``; decomposition streams are keyed by
``(seed + t, stage, snr index, scheme index)`` so results do not depend on
which schemes are requested or how trials are scheduled.
"""
import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import channel, reference
from .config import SCHEMES, ConfigError
from .decomposer import decompose
from .evaluator import (
    design_combiner,
    design_link,
    design_precoder,
    quantize_precoder,
    spectral_efficiency_dense,
)

log = logging.getLogger(__name__)

CSV_HEADER = ("scheme", "snr_db", "mean_rate", "rate_stderr", "eps_precoder", "eps_combiner", "trials")
BOUND_SLACK = 1e-6
MAX_FAILURE_FRACTION = 0.01


class SweepAbortedError(RuntimeError):
    pass


@dataclass(frozen=True)
class ResultRecord:
    scheme: str
    snr_db: float
    mean_rate: float
    rate_stderr: float
    mean_eps_precoder: float
    mean_eps_combiner: float
    trials: int
    mean_upper_bound: float = float("nan")
    bound_violations: int = 0
    failed_trials: int = 0


@dataclass
class ConvergenceResult:
    traces: dict = field(default_factory=dict)
    entry: tuple = None

    def rows(self):
        for mode, trace in self.traces.items():
            for k, (eps, delta) in enumerate(zip(trace.error_history, trace.threshold_history)):
                yield mode, k, eps, delta

    def phase_rows(self):
        """Per-iteration exact and linearized updates of the tracked RF entry."""
        for mode, trace in self.traces.items():
            for k, delta in enumerate(trace.entry_increments):
                phi = trace.entry_phases[k]
                exact = np.exp(1j * (phi + delta))
                linear = (1.0 + 1j * delta) * np.exp(1j * phi)
                yield mode, k + 1, phi, delta, exact.real, exact.imag, linear.real, linear.imag


def trial_channel(cfg, trial):
    rng = np.random.default_rng(cfg.seed + trial)
    if cfg.channel_family == "mmwave":
        return channel.gen_mmwave(cfg.channel_params(), rng)
    return channel.gen_rayleigh(cfg.nr, cfg.nt, rng)


def _stream(cfg, trial, *key):
    return np.random.default_rng([cfg.seed + trial, *key])


def run_convergence(cfg):
    """Decompose one channel's SVD precoder with both threshold modes on the same seed."""
    r, c = cfg.trace_entry
    if not (r < cfg.nt and c < cfg.mt):
        raise ConfigError(f"entry {tuple(cfg.trace_entry)} outside the {cfg.nt}x{cfg.mt} RF factor", field="trace_entry")
    h = trial_channel(cfg, 0)
    target = reference.optimal_unconstrained(h, cfg.ns).precoder
    result = ConvergenceResult(entry=tuple(cfg.trace_entry))
    for mode in ("adaptive", "constant"):
        settings = replace(cfg.decomposition, threshold_mode=mode)
        _, trace = decompose(
            target, cfg.mt, 1.0 / np.sqrt(cfg.nt), settings, _stream(cfg, 0, 0), track_entry=result.entry
        )
        log.info("%s: %d iterations, final error %.6f", mode, trace.iterations, trace.final_error)
        result.traces[mode] = trace
    return result


def _run_trial(args):
    """Rates, bounds and decomposition errors of one channel realization.

    Returns ``{scheme: array (n_snr, 4)}`` with columns rate, bound,
    eps_precoder, eps_combiner.
    """
    cfg, trial = args
    h = trial_channel(cfg, trial)
    gammas = 10.0 ** (np.asarray(cfg.snr_grid_db) / 10.0)
    out = {s: np.zeros((len(gammas), 4)) for s in cfg.schemes}
    settings = cfg.decomposition
    want_hybrid = any(s != "svd_unconstrained" for s in cfg.schemes)

    base = None
    if want_hybrid and not cfg.waterfill:
        base = design_precoder(h, cfg.ns, cfg.mt, 1.0, settings, _stream(cfg, trial, 0))
    for i, gamma in enumerate(gammas):
        if want_hybrid and cfg.waterfill:
            base = design_precoder(h, cfg.ns, cfg.mt, gamma, settings, _stream(cfg, trial, 0, i), waterfill=True)
        ud = reference.optimal_unconstrained(h, cfg.ns) if base is None else base.unconstrained
        if cfg.waterfill:
            alloc = reference.waterfill(ud.singular_values, gamma, cfg.ns)
            bound = reference.waterfilled_rate(ud.singular_values, gamma, cfg.ns, alloc)
            f_opt = ud.precoder * alloc.gains
        else:
            bound = reference.rate_upper_bound(ud.singular_values, gamma, cfg.ns)
            f_opt = ud.precoder
        for scheme in cfg.schemes:
            j = SCHEMES.index(scheme)
            if scheme == "svd_unconstrained":
                rate = spectral_efficiency_dense(h, f_opt, ud.combiner, gamma, cfg.ns)
                out[scheme][i] = rate, bound, 0.0, 0.0
                continue
            pre = base if scheme == "md_hp" else quantize_precoder(base, cfg.quant_bits)
            bits = cfg.quant_bits if scheme == "md_hp_quantized" else None
            comb, comb_err = design_combiner(h, pre, cfg.mr, gamma, settings, _stream(cfg, trial, 1, i, j), bits)
            rate = spectral_efficiency_dense(h, pre.hybrid.matrix, comb.matrix, gamma, cfg.ns)
            out[scheme][i] = rate, bound, pre.error, comb_err
    return out


def _safe_trial(args):
    try:
        return _run_trial(args)
    except (ValueError, np.linalg.LinAlgError) as exc:
        log.warning("trial %d failed: %s", args[1], exc)
        return None


def run_sweep(cfg, workers=1):
    """Monte-Carlo average of every requested scheme over the SNR grid.

    Trials run on ``workers`` processes; per-trial results are reduced in
    trial order, so the output does not depend on the worker count.
    """
    jobs = [(cfg, t) for t in range(cfg.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_safe_trial, jobs))
    else:
        results = [_safe_trial(job) for job in jobs]
    ok = [r for r in results if r is not None]
    failed = len(results) - len(ok)
    if failed > MAX_FAILURE_FRACTION * cfg.trials:
        raise SweepAbortedError(f"{failed} of {cfg.trials} trials failed")

    records = []
    for scheme in cfg.schemes:
        stack = np.stack([r[scheme] for r in ok])
        n = stack.shape[0]
        for i, snr in enumerate(cfg.snr_grid_db):
            rates = stack[:, i, 0]
            stderr = float(np.std(rates, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
            records.append(
                ResultRecord(
                    scheme=scheme,
                    snr_db=float(snr),
                    mean_rate=float(np.mean(rates)),
                    rate_stderr=stderr,
                    mean_eps_precoder=float(np.mean(stack[:, i, 2])),
                    mean_eps_combiner=float(np.mean(stack[:, i, 3])),
                    trials=n,
                    mean_upper_bound=float(np.mean(stack[:, i, 1])),
                    bound_violations=int(np.count_nonzero(rates > stack[:, i, 1] + BOUND_SLACK)),
                    failed_trials=failed,
                )
            )
    return records


def _fmt(v):
    return format(v, ".17g")


def emit_csv(records, path):
    if not records:
        raise ValueError("no records to write")
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for r in records:
                writer.writerow(
                    [
                        r.scheme,
                        _fmt(r.snr_db),
                        _fmt(r.mean_rate),
                        _fmt(r.rate_stderr),
                        _fmt(r.mean_eps_precoder),
                        _fmt(r.mean_eps_combiner),
                        r.trials,
                    ]
                )
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            ResultRecord(
                scheme=row["scheme"],
                snr_db=float(row["snr_db"]),
                mean_rate=float(row["mean_rate"]),
                rate_stderr=float(row["rate_stderr"]),
                mean_eps_precoder=float(row["eps_precoder"]),
                mean_eps_combiner=float(row["eps_combiner"]),
                trials=int(row["trials"]),
            )
            for row in reader
        ]


def write_rows(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
    return path


def run_single(cfg):
    """Full hybrid link for the first channel realization at every SNR of the grid.

    Returns ``(rows, arrays)``: per-SNR rate rows and a dict of factor
    matrices keyed by name and SNR index.
    """
    h = trial_channel(cfg, 0)
    rows, arrays = [], {"channel": h}
    for i, snr in enumerate(cfg.snr_grid_db):
        gamma = 10.0 ** (snr / 10.0)
        bits = cfg.quant_bits if "md_hp_quantized" in cfg.schemes else None
        link, report = design_link(
            h, cfg.ns, cfg.mt, cfg.mr, gamma, cfg.decomposition, _stream(cfg, 0, 2, i),
            waterfill=cfg.waterfill, quant_bits=bits,
        )
        rows.append((float(snr), report.achieved, report.upper_bound, *map(float, report.decomposition_errors)))
        arrays[f"rf_precoder_phases_{i}"] = link.precoder.rf.phases
        arrays[f"bb_precoder_{i}"] = link.precoder.baseband
        arrays[f"rf_combiner_phases_{i}"] = link.combiner.rf.phases
        arrays[f"bb_combiner_{i}"] = link.combiner.baseband
    return rows, arrays
