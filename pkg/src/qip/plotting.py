"""SVG figures for the demos.

Figures are written with the non-interactive Agg/SVG backend and with a
fixed hash salt and no date metadata so reruns produce identical files.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .freqid import FreqResult, true_response  # noqa: E402

STYLE = {
    "svg.hashsalt": "qip",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
}

CONDITION_COLORS = ["tab:blue", "tab:orange", "tab:green", "tab:purple", "tab:brown"]


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def anscombe_figure(fits, path) -> None:
    """2x2 panel: data, nominal line, cone asymptotes, hyperbolic bounds."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(2, 2, figsize=(7.5, 6.5), sharex=True, sharey=True)
        for ax, f in zip(axes.ravel(), fits):
            xs = np.linspace(0.0, 1.1 * f.x.max(), 300)
            lo, hi = f.bounds(xs)
            ax.plot(xs, f.slope * xs, "k--", lw=1.0, label="nominal")
            for sgn in (-1, 1):
                ax.plot(xs, (f.slope + sgn * f.asymptote) * xs, "k:", lw=1.0)
            ax.plot(xs, lo, "C3-", xs, hi, "C3-")
            ax.scatter(f.x, f.y, s=14, c="C0", zorder=3)
            act = f.active
            ax.scatter(f.x[act], f.y[act], s=70, facecolors="none", edgecolors="C3",
                       linewidths=1.5, zorder=4)
            ax.set_title(f"({f.name})  active points: {len(act)}")
        for ax in axes[1]:
            ax.set_xlabel("x")
        for ax in axes[:, 0]:
            ax.set_ylabel("y - 3")
        fig.tight_layout()
        _save(fig, path)


def bode_figure(res: FreqResult, path) -> None:
    """Magnitude and phase with the QIP and scaled least squares envelopes."""
    sc = res.scenario
    w = sc.omegas
    mags = np.concatenate([np.abs(true_response(sc.plant, c, w))
                           for c in range(sc.plant.n_conditions)])
    floor = 0.1 * mags.min()
    with plt.rc_context(STYLE):
        fig, (am, ap) = plt.subplots(2, 1, figsize=(7.5, 7.0), sharex=True)
        if res.ls_envelope is not None:
            e = res.ls_envelope
            am.fill_between(w, np.maximum(e.lower, floor), e.upper, color="0.85",
                            label="scaled LS envelope")
            ap.plot(w, np.unwrap(e.phase), color="0.5", lw=1.0, ls="--", label="LS nominal")
        if res.qip_envelope is not None:
            e = res.qip_envelope
            am.fill_between(w, np.maximum(e.lower, floor), e.upper, color="C3", alpha=0.25,
                            label="QIP envelope")
            am.plot(w, e.nominal, "C3--", lw=1.0)
            ap.plot(w, np.unwrap(e.phase), "C3--", lw=1.0, label="QIP nominal")
        for c in range(sc.plant.n_conditions):
            col = CONDITION_COLORS[c % len(CONDITION_COLORS)]
            G = true_response(sc.plant, c, w)
            am.plot(w, np.abs(G), color=col, label=f"true plant {c}")
            ap.plot(w, np.unwrap(np.angle(G)), color=col)
            ys = np.array([s.y for s in res.samples if s.condition == c])
            ws = np.array([s.omega for s in res.samples if s.condition == c])
            am.scatter(ws, np.abs(ys), s=5, color=col, alpha=0.6)
        am.set_xscale("log")
        am.set_yscale("log")
        am.set_ylim(floor, None)
        am.set_ylabel("magnitude")
        ap.set_ylabel("phase [rad]")
        ap.set_xlabel("angular frequency [rad/s]")
        am.legend(loc="lower left", fontsize=7)
        ap.legend(loc="lower left", fontsize=7)
        fig.tight_layout()
        _save(fig, path)
