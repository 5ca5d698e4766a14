"""Figures written next to the tabular reports.

Uses the non-interactive Agg backend; every function saves to a file and
closes its figure.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# No version string or timestamp in the files, so reruns are byte-identical.
_PNG_METADATA = {"Software": None}

_STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}

_MARKERS = {"svd": "o", "euclid-full": "s", "hyperbolic": "^"}


def plot_sweep(rows, path, title=None):
    """MAP against rank, one line per method, baseline as a dashed horizontal line."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        baseline = [row for row in rows if row.method == "baseline"]
        methods = []
        for row in rows:
            if row.method != "baseline" and row.method not in methods:
                methods.append(row.method)
        for method in methods:
            pts = sorted((row.rank, row.map) for row in rows if row.method == method)
            ax.plot([p[0] for p in pts], [p[1] for p in pts],
                    marker=_MARKERS.get(method, "o"), ms=4, lw=1.2, label=method)
        if baseline:
            ax.axhline(baseline[0].map, color="0.4", ls="--", lw=1.0,
                       label=f"uncompressed ({baseline[0].map:.4f})")
        ranks = sorted({row.rank for row in rows if row.method != "baseline"})
        if len(ranks) > 1 and ranks[-1] / max(ranks[0], 1) >= 10:
            ax.set_xscale("log")
        ax.set_xlabel("rank r")
        ax.set_ylabel("MAP")
        ax.set_ylim(0.0, 1.02)
        if title:
            ax.set_title(title)
        ax.legend(frameon=False, loc="lower right")
        fig.tight_layout()
        fig.savefig(path, dpi=150, metadata=_PNG_METADATA)
        plt.close(fig)
    return path


def plot_convergence(report, path, title=None):
    """Loss and Riemannian gradient norm per outer iteration; rejected steps marked."""
    with plt.rc_context(_STYLE):
        fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(4.5, 4.2), sharex=True)
        its = list(range(len(report.loss_trace)))
        floor = 1e-300
        ax1.semilogy(its, [max(f, floor) for f in report.loss_trace], lw=1.2)
        rejected = [k + 1 for k, ok in enumerate(report.accepted_flags) if not ok]
        if rejected:
            ax1.semilogy(rejected, [max(report.loss_trace[k], floor) for k in rejected],
                         "x", color="C3", ms=4, label="rejected step")
            ax1.legend(frameon=False)
        ax1.set_ylabel("loss")
        ax2.semilogy(its, [max(g, floor) for g in report.grad_norm_trace], lw=1.2, color="C1")
        ax2.set_ylabel("gradient norm")
        ax2.set_xlabel("outer iteration")
        if title:
            ax1.set_title(title)
        fig.tight_layout()
        fig.savefig(path, dpi=150, metadata=_PNG_METADATA)
        plt.close(fig)
    return path
