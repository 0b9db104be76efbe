"""Acceptance criteria, one PASS/FAIL line each.

The lines are printed as the tests run and again in the pytest terminal
summary. Run ``python tests/test_acceptance.py`` to get the lines without
pytest. The whole file takes about ten minutes on one core.
"""
import sys
import time
from dataclasses import replace

import numpy as np
import pytest

from mdhp import harness
from mdhp.config import ExperimentConfig, default_config
from mdhp.decomposer import DecompositionSettings, PhaseMatrix, baseband_update
from mdhp.evaluator import LinkDesign, design_link, full_rank_hybrid, spectral_efficiency
from mdhp.numerics import BoxLsProblem, solve_box_ls
from mdhp.reference import optimal_unconstrained, rate_upper_bound

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script from elsewhere
    ACCEPTANCE_LINES = []

pytestmark = pytest.mark.slow

# every sweep run here feeds the hard bound invariant of criterion 7
SWEEP_LOG = []


def report(name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)
    return ok


def sweep(cfg, label):
    records = harness.run_sweep(cfg.validate())
    SWEEP_LOG.append((label, records))
    return {(r.scheme, r.snr_db): r for r in records}


def rayleigh(ns, mt, mr, snr, trials, schemes=("svd_unconstrained", "md_hp"), bits=None, seed=0):
    return ExperimentConfig(ns=ns, mt=mt, mr=mr, snr_grid_db=tuple(float(s) for s in snr), trials=trials,
                            seed=seed, schemes=schemes, quant_bits=bits)


def test_1_convergence():
    seeds = range(20)
    ok_eps = {"adaptive": 0, "constant": 0}
    faster, slowest = 0, 0.0
    for seed in seeds:
        cfg = replace(default_config("convergence"), seed=seed).validate()
        t0 = time.perf_counter()
        result = harness.run_convergence(cfg)
        slowest = max(slowest, time.perf_counter() - t0)
        for mode, trace in result.traces.items():
            ok_eps[mode] += 0.1 <= trace.final_error <= 0.3
        faster += result.traces["adaptive"].iterations < result.traces["constant"].iterations
    n = len(seeds)
    a = report("1a final eps in [0.1, 0.3] on >= 90% of 20 seeds, both modes",
               min(ok_eps.values()) >= 0.9 * n, f"adaptive {ok_eps['adaptive']}/{n}, constant {ok_eps['constant']}/{n}")
    b = report("1b adaptive strictly fewer iterations on >= 70% of seeds", faster >= 0.7 * n, f"{faster}/{n}")
    c = report("1c runtime <= 2 min per seed", slowest <= 120, f"slowest seed {slowest:.1f} s (both modes)")
    assert a and b and c


def _gap_at_zero(recs):
    return recs[("svd_unconstrained", 0.0)].mean_rate - recs[("md_hp", 0.0)].mean_rate


def test_2_twelve_chains_near_optimal():
    recs = sweep(rayleigh(8, 12, 12, [0], 50), "rayleigh 12 chains")
    gap = _gap_at_zero(recs)
    ok = report("2 Rayleigh Ns=8 Mt=Mr=12, 50 trials: gap to R~ at 0 dB <= 1 bps/Hz", gap <= 1.0,
                f"gap {gap:.3f} bps/Hz (R~ {recs[('svd_unconstrained', 0.0)].mean_rate:.3f})")
    assert ok


def test_3_eight_chains_gap():
    recs = sweep(rayleigh(8, 8, 8, [0], 50), "rayleigh 8 chains")
    gap = _gap_at_zero(recs)
    ok = report("3 Rayleigh Ns=8 Mt=Mr=8, 50 trials: gap to R~ at 0 dB in [1.5, 4.5]", 1.5 <= gap <= 4.5,
                f"gap {gap:.3f} bps/Hz")
    assert ok


def level_crossing(snr, rate, level):
    """SNR at which a monotone rate curve reaches ``level`` (linear interpolation), or None."""
    snr, rate = np.asarray(snr), np.asarray(rate)
    if rate[-1] < level or rate[0] > level:
        return None
    return float(np.interp(level, rate, snr))


def test_4_quantization_loss():
    grid = np.arange(-10.0, 6.1, 2.0)
    results = []
    for chains in (12, 8):
        cfg = rayleigh(8, chains, chains, grid, 10, ("md_hp", "md_hp_quantized"), bits=2)
        recs = sweep(cfg, f"rayleigh {chains} chains quantized")
        exact = [recs[("md_hp", s)].mean_rate for s in grid]
        quant = [recs[("md_hp_quantized", s)].mean_rate for s in grid]
        level = 0.75 * recs[("md_hp", 0.0)].mean_rate
        s_exact, s_quant = level_crossing(grid, exact, level), level_crossing(grid, quant, level)
        shift = None if s_exact is None or s_quant is None else s_quant - s_exact
        results.append((chains, shift, level))
    ok = all(shift is not None and shift <= 3.0 for _, shift, _ in results)
    detail = ", ".join(
        f"Mt=Mr={c}: shift {'n/a' if s is None else f'{s:.2f}'} dB at {lvl:.2f} bps/Hz" for c, s, lvl in results
    )
    report("4 L=2 quantized loss <= 3 dB at 75% of peak (peak = unquantized rate at 0 dB)", ok, detail)
    assert ok


def test_5_critical_chains():
    grid = default_config().snr_grid_db
    curves, within = {}, {}
    for ns in (2, 4, 8):
        recs = sweep(rayleigh(ns, ns, ns, grid, 10), f"rayleigh critical Ns={ns}")
        curves[ns] = np.array([recs[("md_hp", s)].mean_rate for s in grid])
        bound = recs[("svd_unconstrained", 0.0)].mean_rate
        within[ns] = (bound - recs[("md_hp", 0.0)].mean_rate) / bound
    a = report("5a Mt=Mr=Ns: MD-HP within 15% of R~ at 0 dB for Ns in {2, 4, 8}", max(within.values()) <= 0.15,
               ", ".join(f"Ns={k}: {100 * v:.1f}%" for k, v in within.items()))
    increasing = (curves[4] > curves[2]) & (curves[8] > curves[4])
    bad = [f"{s:g}" for s, ok in zip(grid, increasing) if not ok]
    b = report("5b MD-HP rate strictly increasing in Ns at every SNR point", not bad,
               "all points" if not bad else f"violated at SNR {', '.join(bad)} dB")
    assert a and b


def test_6_mmwave():
    cfg = replace(rayleigh(8, 12, 12, [0], 50), channel_family="mmwave")
    recs = sweep(cfg, "mmwave 12 chains")
    gap = _gap_at_zero(recs)
    ok = report("6 mmWave Nc=8 Np=10, Ns=8 Mt=Mr=12, 50 trials: gap to R~ at 0 dB <= 1.5", gap <= 1.5,
                f"gap {gap:.3f} bps/Hz")
    assert ok


def _grid_min(p, resolution=1e-3):
    g = np.arange(-p.bound, p.bound + resolution / 2, resolution)
    d1, d2 = np.meshgrid(g, g, indexing="ij")
    res = p.target - d1[..., None] * p.mapping[0] - d2[..., None] * p.mapping[1]
    return float(np.min(np.sum(np.abs(res) ** 2, axis=-1)))


def _crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def test_7_oracles():
    rng = np.random.default_rng(2024)

    worst = -np.inf
    for _ in range(100):
        s = int(rng.integers(1, 5))
        p = BoxLsProblem(rng.uniform(0.02, 0.5) * _crandn(rng, s), _crandn(rng, 2, s), 0.1)
        worst = max(worst, p.objective(solve_box_ls(p)) - _grid_min(p))
    a = report("7a box LS vs grid search, 100 instances: objective gap <= 1e-5", worst <= 1e-5,
               f"max gap {worst:.2e}")

    ortho = 0.0
    for _ in range(100):
        n, m = int(rng.integers(8, 32)), int(rng.integers(2, 8))
        rf = PhaseMatrix(rng.uniform(0, 2 * np.pi, (n, m)), 1 / np.sqrt(n))
        target = _crandn(rng, n, int(rng.integers(1, m + 1)))
        fb = baseband_update(rf, target)
        ortho = max(ortho, float(np.abs(rf.matrix.conj().T @ (target - rf.matrix @ fb)).max()))
    b = report("7b baseband residual orthogonality, 100 instances <= 1e-8", ortho <= 1e-8, f"max {ortho:.2e}")

    se_gap = 0.0
    for _ in range(50):
        h = _crandn(rng, 16, 32)
        ud = optimal_unconstrained(h, 4)
        gamma = 10 ** rng.uniform(-4, 0)
        link = LinkDesign(full_rank_hybrid(ud.precoder), full_rank_hybrid(ud.combiner), gamma, 4)
        se_gap = max(se_gap, abs(spectral_efficiency(h, link) - rate_upper_bound(ud.singular_values, gamma, 4)))
    c = report("7c spectral_efficiency(V1, U1) = R~ on 50 channels within 1e-8", se_gap <= 1e-8, f"max {se_gap:.2e}")

    if not SWEEP_LOG:
        # standalone run of this test only: produce a sweep to audit
        sweep(rayleigh(4, 6, 6, [-20, 0], 5, ("svd_unconstrained", "md_hp", "md_hp_quantized"), bits=2), "audit")
    violations = sum(r.bound_violations for _, recs in SWEEP_LOG for r in recs)
    checked = sum(r.trials for _, recs in SWEEP_LOG for r in recs)
    d = report("7d achieved <= R~ + 1e-6 on every trial of every sweep", violations == 0,
               f"{violations} violations over {checked} trial-scheme-SNR evaluations in {len(SWEEP_LOG)} sweeps")

    cm_err, norm_err = 0.0, 0.0
    settings = DecompositionSettings()
    for k in range(12):
        family = "mmwave" if k % 2 else "rayleigh"
        cfg = replace(ExperimentConfig(channel_family=family, seed=100 + k), ns=4, mt=6, mr=6).validate()
        h = harness.trial_channel(cfg, 0)
        for waterfill in (False, True):
            for bits in (None, 2):
                link, _ = design_link(h, 4, 6, 6, 10 ** rng.uniform(-3, 0), settings,
                                      np.random.default_rng(k), waterfill, bits)
                cm_err = max(cm_err, float(np.abs(np.abs(link.precoder.rf.matrix) - 1 / np.sqrt(256)).max()),
                             float(np.abs(np.abs(link.combiner.rf.matrix) - 1 / np.sqrt(64)).max()))
                norm_err = max(norm_err, abs(np.linalg.norm(link.precoder.matrix) ** 2 - 4))
    e = report("7e constant modulus exact and ||F_R F_B||_F^2 = Ns within 1e-10 on emitted factors",
               cm_err <= 1e-15 and norm_err <= 1e-10, f"modulus dev {cm_err:.1e}, power dev {norm_err:.1e}")
    assert a and b and c and d and e


def test_8_determinism(tmp_path):
    cfg = ExperimentConfig(nt=64, nr=32, ns=4, mt=6, mr=6, snr_grid_db=(-20.0, -10.0, 0.0), trials=8, seed=7,
                           quant_bits=2, schemes=("svd_unconstrained", "md_hp", "md_hp_quantized")).validate()
    paths = []
    for i, workers in enumerate((1, 1, 8)):
        path = tmp_path / f"run{i}.csv"
        harness.emit_csv(harness.run_sweep(cfg, workers=workers), path)
        paths.append(path)
    blobs = [p.read_bytes() for p in paths]
    ok = report("8 sweep CSV byte-identical across runs and 1 vs 8 workers", blobs[0] == blobs[1] == blobs[2],
                f"{len(blobs[0])} bytes, digests equal: {len(set(blobs)) == 1}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
