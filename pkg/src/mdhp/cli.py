"""Command-line entry point: ``mdhp {convergence,sweep,single}``."""
import argparse
import json
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import harness
from .config import ConfigError, default_config, dump_config, load_config

log = logging.getLogger("mdhp")


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment config; omitted keys take the subcommand defaults")
    common.add_argument("--seed", type=int, help="override the config seed (unsigned 64-bit)")
    common.add_argument("--out", default=".", help="output directory (created if missing)")
    common.add_argument("--threads", type=int, default=1, help="worker processes for Monte-Carlo trials")
    common.add_argument("--no-plot", action="store_true", help="write CSV only, skip figures")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="mdhp", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("convergence", parents=[common], help="error traces for adaptive and constant thresholds")
    sub.add_parser("sweep", parents=[common], help="spectral efficiency vs. SNR, Monte-Carlo averaged")
    sub.add_parser("single", parents=[common], help="one channel, full dump of factors and rates")
    return p


def _config(args):
    base = default_config(args.command)
    cfg = load_config(args.config, base) if args.config else base.validate()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed).validate()
    return cfg


def _run(args):
    cfg = _config(args)
    os.makedirs(args.out, exist_ok=True)
    out = lambda name: os.path.join(args.out, name)  # noqa: E731
    with open(out("config.yaml"), "w", encoding="utf-8") as fh:
        fh.write(dump_config(cfg))

    if args.command == "convergence":
        result = harness.run_convergence(cfg)
        harness.write_rows(out("convergence.csv"), ("mode", "k", "eps", "delta_bar"), result.rows())
        harness.write_rows(
            out("phase_trace.csv"),
            ("mode", "k", "phase", "increment", "exact_re", "exact_im", "linear_re", "linear_im"),
            result.phase_rows(),
        )
        if not args.no_plot:
            from . import plotting

            plotting.plot_convergence(result, out("convergence.png"))
            plotting.plot_phase_trace(result, out("phase_trace.png"))
        for mode, trace in result.traces.items():
            print(f"{mode}: iterations={trace.iterations} final_eps={trace.final_error:.6f} converged={trace.converged}")

    elif args.command == "sweep":
        records = harness.run_sweep(cfg, workers=args.threads)
        harness.emit_csv(records, out("sweep.csv"))
        if not args.no_plot:
            from . import plotting

            title = f"{cfg.nt}x{cfg.nr} {cfg.channel_family}, Ns={cfg.ns}, Mt={cfg.mt}, Mr={cfg.mr}"
            plotting.plot_sweep(records, out("sweep.png"), title)
        for r in records:
            print(f"{r.scheme:18s} {r.snr_db:7.2f} dB  {r.mean_rate:9.4f} +- {r.rate_stderr:.4f} bps/Hz")

    else:
        rows, arrays = harness.run_single(cfg)
        harness.write_rows(
            out("single.csv"), ("snr_db", "achieved", "upper_bound", "eps_precoder", "eps_combiner"), rows
        )
        np.savez(out("single_factors.npz"), **arrays)
        for snr, achieved, bound, ep, ec in rows:
            print(f"{snr:7.2f} dB  achieved={achieved:.4f}  bound={bound:.4f}  eps=({ep:.4f}, {ec:.4f})")


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        _run(args)
    except ConfigError as exc:
        err = {"error": "config", "message": exc.message, "field": exc.field, "line": exc.line, "path": exc.path}
        print(json.dumps(err), file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
