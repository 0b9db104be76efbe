"""Figure rendering for the harness outputs (PNG files, headless backend)."""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "svd_unconstrained": dict(color="k", marker="o", linestyle="-", label="Unconstrained SVD"),
    "md_hp": dict(color="tab:blue", marker="s", linestyle="-", label="MD-HP"),
    "md_hp_quantized": dict(color="tab:red", marker="^", linestyle="--", label="MD-HP, quantized"),
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_sweep(records, path, title=None):
    fig, ax = plt.subplots(figsize=(5.5, 4.2))
    for scheme in dict.fromkeys(r.scheme for r in records):
        rows = sorted((r for r in records if r.scheme == scheme), key=lambda r: r.snr_db)
        x = [r.snr_db for r in rows]
        y = np.array([r.mean_rate for r in rows])
        err = np.array([r.rate_stderr for r in rows])
        ax.errorbar(x, y, yerr=err, capsize=2, markersize=4, **STYLE.get(scheme, dict(label=scheme)))
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("Spectral efficiency (bps/Hz)")
    ax.grid(alpha=0.3)
    ax.legend(loc="upper left")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_convergence(result, path):
    fig, ax = plt.subplots(figsize=(5.5, 4.2))
    for mode, trace in result.traces.items():
        ax.plot(trace.error_history, label=f"{mode} threshold ({trace.iterations} it.)")
    ax.set_xlabel("Iteration k")
    ax.set_ylabel(r"Relative error $\varepsilon_k$")
    ax.grid(alpha=0.3)
    ax.legend()
    return _save(fig, path)


def plot_phase_trace(result, path, mode="adaptive"):
    """Exact vs. linearized update of the tracked RF entry on the complex plane."""
    trace = result.traces[mode]
    phi = np.asarray(trace.entry_phases[:-1])
    delta = np.asarray(trace.entry_increments)
    exact = np.exp(1j * (phi + delta))
    linear = (1 + 1j * delta) * np.exp(1j * phi)
    circle = np.exp(1j * np.linspace(0, 2 * np.pi, 400))

    fig, ax = plt.subplots(figsize=(4.8, 4.8))
    ax.plot(circle.real, circle.imag, "r--", linewidth=0.8, label="unit circle")
    ax.plot(exact.real, exact.imag, "o-", markersize=3, label="exact update")
    ax.plot(linear.real, linear.imag, "x", markersize=4, label="linearized update")
    ax.set_aspect("equal")
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    r, c = result.entry
    ax.set_title(f"RF entry ({r}, {c}), {mode} threshold")
    ax.legend(loc="lower left", fontsize=8)
    return _save(fig, path)
