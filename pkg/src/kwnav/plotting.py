"""Report figures.

Figures are written straight to files with the Agg backend; nothing here
opens a window.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import FIELD_TITLES, FIELDS  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    # keep PNG bytes stable between runs
    "svg.hashsalt": "kwnav",
}

MODE_COLORS = {"Non-tracked": "#8c8c8c", "Drill": "#d95f02", "Cannula": "#1b9e77"}


def _color(condition):
    for k, c in MODE_COLORS.items():
        if condition.startswith(k):
            return c
    return "#4c72b0"


def _save(fig, path):
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_study(groups, path):
    """Box plots of the four placement-error fields, one box per condition."""
    names = list(groups)
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 4, figsize=(11, 3.2))
        for ax, f in zip(axes, FIELDS):
            data = [[getattr(pe, f) for pe in groups[n]] for n in names]
            bp = ax.boxplot(data, patch_artist=True, showfliers=False, widths=0.6)
            for patch, n in zip(bp["boxes"], names):
                patch.set_facecolor(_color(n))
                patch.set_alpha(0.35 if "marker" in n else 0.8)
            ax.set_xticks(range(1, len(names) + 1))
            ax.set_xticklabels([n.replace(" + surface marker", "\n+ marker") for n in names],
                               rotation=45, ha="right")
            ax.set_title(FIELD_TITLES[f])
        fig.tight_layout()
        return _save(fig, path)


def plot_e2e(samples, path, band=None):
    """Histogram of touch-point errors, optional (lo, hi) reference band."""
    s = np.asarray(samples, dtype=float).ravel()
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.0))
        ax.hist(s, bins=60, color="#4c72b0", alpha=0.8)
        ax.axvline(s.mean(), color="k", lw=1, label=f"mean {s.mean():.2f} mm")
        if band is not None:
            ax.axvspan(band[0], band[1], color="#1b9e77", alpha=0.15, label="reference band")
        ax.set_xlabel("end-to-end error (mm)")
        ax.set_ylabel("count")
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def plot_indicator_trace(times, entry_r, end_r, path):
    """Indicator radii over time; suppressed frames are simply absent."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 2.8))
        ax.plot(times, entry_r, ".", ms=3, label="entry radius")
        ax.plot(times, end_r, ".", ms=3, label="end radius")
        ax.set_xlabel("t (s)")
        ax.set_ylabel("radius (mm)")
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)
