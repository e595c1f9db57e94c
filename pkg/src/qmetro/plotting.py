"""Figures for report bundles.

Uses the object-oriented matplotlib API with the Agg canvas, so nothing here
touches pyplot global state. PNG metadata is stripped to keep output
byte-reproducible.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib import rc_context
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .estimation import rescaled_limits
from .qfi import producibility_bound

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 7,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "lines.linewidth": 1.2,
    "savefig.dpi": 120,
}
COLORS = ["tab:red", "tab:blue", "tab:green", "tab:purple", "tab:orange", "tab:brown"]


def _new_figure(width=7.0, height=3.0):
    fig = Figure(figsize=(width, height))
    FigureCanvasAgg(fig)
    return fig


def _save(fig, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    return path


def plot_probability_curves(bundles, path):
    """One panel per outcome mu, P(mu|theta) against theta/pi."""
    outcomes = sorted({int(m) for b in bundles for m in b.curves.get("mu", [])})
    if not outcomes:
        return None
    with rc_context(STYLE):
        fig = _new_figure(2.0 * len(outcomes), 2.4)
        axes = fig.subplots(1, len(outcomes), sharey=True, squeeze=False)[0]
        for b, color in zip(bundles, COLORS):
            c = b.curves
            for ax, mu in zip(axes, outcomes):
                sel = c["mu"] == mu
                ax.plot(c["theta"][sel] / np.pi, c["p"][sel], color=color, label=b.label)
        for ax, mu in zip(axes, outcomes):
            ax.set_title(rf"$\mu={mu}$")
            ax.set_xlabel(r"$\theta/\pi$")
            ax.set_ylim(-0.02, 1.02)
        axes[0].set_ylabel(r"$P(\mu|\theta)$")
        axes[-1].legend(frameon=False)
        return _save(fig, path)


def plot_fisher(bundles, path):
    """F(theta) with the k-producibility bounds as horizontal lines."""
    with rc_context(STYLE):
        fig = _new_figure(4.0, 3.0)
        ax = fig.add_subplot()
        n_set = set()
        for b, color in zip(bundles, COLORS):
            f = b.fisher
            if not len(f.get("theta", ())):
                continue
            ax.plot(f["theta"] / np.pi, f["f"], color=color, label=b.label)
            n_set.add(int(b.summary["n_qubits"]))
        for n in sorted(n_set):
            for k in range(1, n + 1):
                bound = producibility_bound(n, k)
                name = "sep" if k == 1 else f"{k}-ent"
                ax.axhline(bound, color="0.6", lw=0.7, ls=":")
                ax.text(0.005, bound, f" {name}", va="bottom", fontsize=6, color="0.4",
                        transform=ax.get_yaxis_transform())
            ax.axhline(n * (n + 2) / 2, color="k", lw=0.8, ls="--", label=f"Dicke N={n}")
        ax.set_xlabel(r"$\theta/\pi$")
        ax.set_ylabel(r"$F_{\hat\mu}(\theta)$")
        ax.set_ylim(bottom=0)
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_histograms(bundles, path, method="ml"):
    """Estimator histograms (normalized to one), one panel per m, at the first theta0."""
    ms = sorted({int(v) for b in bundles for v in b.histograms.get("m", [])})
    if not ms:
        return None
    with rc_context(STYLE):
        fig = _new_figure(2.6 * len(ms), 2.6)
        axes = fig.subplots(1, len(ms), squeeze=False)[0]
        for b, color in zip(bundles, COLORS):
            h = b.histograms
            if not len(h.get("m", ())):
                continue
            theta0 = np.unique(h["theta0"])[0]
            for ax, m in zip(axes, ms):
                sel = (h["method"] == method) & (h["m"] == m) & (h["theta0"] == theta0)
                if not np.any(sel):
                    continue
                counts = h["count"][sel]
                total = counts.sum() or 1
                ax.stairs(counts / total, np.append(h["bin_lo"][sel], h["bin_hi"][sel][-1]) / np.pi,
                          color=color, label=b.label)
                ax.axvline(theta0 / np.pi, color="k", ls="--", lw=0.8)
        for ax, m in zip(axes, ms):
            ax.set_title(f"m = {m}")
            ax.set_xlabel(r"$\theta_{\rm est}/\pi$")
        axes[0].set_ylabel("fraction")
        axes[-1].legend(frameon=False)
        return _save(fig, path)


def plot_rescaled_uncertainty(bundles, path):
    """Delta_res of ML (stars) and Bayes (circles) against theta0, with reference limits."""
    ms = sorted({int(v) for b in bundles for v in b.campaign.get("m", [])})
    if not ms:
        return None
    with rc_context(STYLE):
        fig = _new_figure(3.4 * len(ms), 3.0)
        axes = fig.subplots(1, len(ms), sharey=True, squeeze=False)[0]
        n_set = set()
        for b, color in zip(bundles, COLORS):
            c = b.campaign
            n_set.add(int(b.summary["n_qubits"]))
            f = b.fisher
            for ax, m in zip(axes, ms):
                sel = c["m"] == m
                if not np.any(sel):
                    continue
                t = c["theta0"][sel] / np.pi
                ax.plot(t, c["ml_dres"][sel], "*", color=color, ms=7, label=f"{b.label} ML")
                ax.errorbar(t, c["bayes_dres"][sel], yerr=np.sqrt(m) * c["bayes_c_std"][sel],
                            fmt="o", mfc="none", color=color, ms=5, capsize=2, label=f"{b.label} Bayes")
                if len(f.get("theta", ())):
                    # points where F collapses (ideal zeros) would dominate the axis
                    ok = f["f"] > 0.05 * f["f"].max()
                    ax.plot(f["theta"][ok] / np.pi, 1 / np.sqrt(f["f"][ok]), color=color, lw=0.9)
        for n in sorted(n_set):
            lim = rescaled_limits(n)
            for ax in axes:
                ax.axhline(lim["snl"], color="k", lw=0.8, ls="-")
                ax.axhline(lim["dicke"], color="k", lw=0.8, ls="--")
                ax.axhline(lim["hl"], color="k", lw=0.8, ls="-.")
        for ax, m in zip(axes, ms):
            ax.set_title(f"m = {m}")
            ax.set_xlabel(r"$\theta_0/\pi$")
            ax.set_ylim(0, 1.0)
        axes[0].set_ylabel(r"$\Delta_{\rm res}$")
        axes[-1].legend(frameon=False, ncol=1)
        return _save(fig, path)


def render_bundle_figures(bundles, out_dir) -> list[Path]:
    out = Path(out_dir)
    paths = [
        plot_probability_curves(bundles, out / "probabilities.png"),
        plot_fisher(bundles, out / "fisher.png"),
        plot_histograms(bundles, out / "histograms_ml.png", "ml"),
        plot_histograms(bundles, out / "histograms_bayes.png", "bayes"),
        plot_rescaled_uncertainty(bundles, out / "delta_res.png"),
    ]
    return [p for p in paths if p is not None]
