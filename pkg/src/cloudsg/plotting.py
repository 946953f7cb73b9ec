"""Figure rendering for runs and studies (file output only)."""

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and r[0] != "#"]
    head, body = rows[0], rows[1:]
    cols = {}
    for i, name in enumerate(head):
        vals = []
        for r in body:
            try:
                vals.append(float(r[i]))
            except (ValueError, IndexError):
                vals.append(np.nan)
        cols[name] = np.array(vals)
    return cols


def plot_diagnostics(csv_path, out_path):
    """Time series of the mean and spread of the three mixing ratios."""
    cols = _read_csv(csv_path)
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 7), sharex=True)
    t = cols["t"]
    for name, style in (("q_v", "-"), ("q_c", "--"), ("q_r", ":")):
        ax1.semilogy(t, np.maximum(cols[f"mean[{name}]"], 1e-300),
                     style, label=f"mean {name}")
        ax2.semilogy(t, np.maximum(cols[f"sigma[{name}]"], 1e-300),
                     style, label=f"sigma {name}")
    ax1.set_ylabel("domain mean [kg/kg]")
    ax2.set_ylabel("domain spread [kg/kg]")
    ax2.set_xlabel("t [s]")
    for ax in (ax1, ax2):
        ax.legend(loc="best", fontsize=8)
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=140)
    plt.close(fig)
    return out_path


def plot_snapshot(data, out_path):
    """2-D field panels (mean cloud state and flow perturbations)."""
    cloud = data["cloud"]
    mean = cloud[:, 0] if cloud.ndim == 4 else cloud
    dim = int(data["meta"]["dim"])
    if dim != 2:
        raise ValueError("field plots are implemented for 2-D runs only")
    fields = [("rho q_v", mean[0]), ("rho q_c", mean[1]),
              ("rho q_r", mean[2]), ("rho'", data["rho_p"]),
              ("(rho theta)'", data["rho_theta_p"]),
              ("rho u_vert", data[f"rho_u{dim - 1}"])]
    fig, axes = plt.subplots(2, 3, figsize=(12, 7))
    for ax, (name, f) in zip(axes.ravel(), fields):
        im = ax.imshow(f.T, origin="lower", aspect="auto", cmap="viridis")
        ax.set_title(f"{name} (t={float(data['t']):.4g}s)", fontsize=9)
        fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(out_path, dpi=140)
    plt.close(fig)
    return out_path


def plot_eoc(report, out_path):
    """Error-vs-resolution lines with a second-order reference slope."""
    fig, ax = plt.subplots(figsize=(6, 5))
    N = np.array(report.column("N"), dtype=float)
    for col in report.columns:
        if col.startswith("err["):
            ax.loglog(N, report.column(col), "o-",
                      label=col[4:-1], linewidth=1)
    ref = np.array(report.column(f"err[{report.columns[3][4:-1]}]"))
    ax.loglog(N, ref[0] * (N[0] / N) ** 2, "k--", alpha=0.5,
              label="2nd order")
    ax.set_xlabel("N")
    ax.set_ylabel("L2 difference to next refinement")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=140)
    plt.close(fig)
    return out_path


def plot_spectral(report, out_path):
    """Truncation error against chaos degree on a log scale."""
    fig, ax = plt.subplots(figsize=(6, 5))
    M = np.array(report.column("M"), dtype=float)
    err = np.array(report.column("error"))
    ax.semilogy(M, err, "o-")
    if hasattr(report, "slope") and np.isfinite(report.slope):
        ax.semilogy(M, err[0] * np.exp(report.slope * (M - M[0])), "k--",
                    alpha=0.6, label=f"fit slope {report.slope:.2f}/mode")
        ax.legend()
    ax.set_xlabel("chaos degree M")
    ax.set_ylabel("L2 truncation error")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=140)
    plt.close(fig)
    return out_path


def plot_mode_norms(report, out_path):
    """Coefficient norms by mode for both stochastic methods."""
    fig, ax = plt.subplots(figsize=(6, 5))
    Ms = sorted(set(report.column("M")))
    for M in Ms:
        rows = [r for r in report.rows if r["M"] == M]
        modes = [r["mode"] for r in rows]
        ax.semilogy(modes, [r["galerkin_norm"] for r in rows], "o-",
                    label=f"Galerkin M={M}")
        ax.semilogy(modes, [r["collocation_norm"] for r in rows], "s--",
                    label=f"collocation M={M}")
    ax.set_xlabel("mode index")
    ax.set_ylabel("coefficient L2 norm")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=140)
    plt.close(fig)
    return out_path
