"""Figures for experiment reports, rendered off-screen to PNG."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .experiments import ExperimentReport  # noqa: E402

_DPI = 100
# no timestamp or version string, so identical runs give identical files
_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="png", dpi=_DPI, metadata=_META)
    plt.close(fig)
    return path


def _cells(report: ExperimentReport):
    ks = sorted({r["k"] for r in report.records})
    pts = sorted({r["point"] for r in report.records})
    return ks, pts


def _grid(n_rows: int, n_cols: int):
    fig, axes = plt.subplots(n_rows, n_cols, figsize=(4.5 * n_cols, 3.5 * n_rows), squeeze=False)
    return fig, axes


def plot_bias(report: ExperimentReport, path: Path) -> Path:
    """Log variance estimates per B against the log empirical variance (red)."""
    cfg = report.config
    ks, pts = _cells(report)
    Bs = cfg["B"]
    est = {m: np.asarray(v) for m, v in report.raw["estimates"].items()}
    fig, axes = _grid(len(ks), len(pts))
    width = 0.8 / max(1, len(est))
    for a, k in enumerate(ks):
        for p in pts:
            ax = axes[a][p]
            for i, (m, arr) in enumerate(est.items()):
                data = []
                for c in range(len(Bs)):
                    v = arr[:, a, c, p]
                    v = v[np.isfinite(v) & (v > 0)]
                    data.append(np.log(v) if v.size else [np.nan])
                pos = np.arange(len(Bs)) + (i - (len(est) - 1) / 2) * width
                bp = ax.boxplot(data, positions=pos, widths=width * 0.9, patch_artist=True, showfliers=False)
                for box in bp["boxes"]:
                    box.set_facecolor(f"C{i}")
                ax.plot([], [], color=f"C{i}", lw=6, label=m)
            emp = [r["empirical_variance"] for r in report.records if r["k"] == k and r["point"] == p]
            for c, e in enumerate(emp):
                if e and e > 0:
                    ax.hlines(np.log(e), c - 0.45, c + 0.45, colors="red", lw=2)
            ax.set_xticks(np.arange(len(Bs)), [str(B) for B in Bs])
            ax.set_xlabel("B")
            ax.set_ylabel("log variance")
            ax.set_title(f"k={k}, point {p}")
    axes[0][0].legend(fontsize="small")
    fig.tight_layout()
    return _save(fig, path)


def plot_coverage(report: ExperimentReport, path: Path) -> Path:
    """Variance ratio and interval coverage for each cell and estimator."""
    recs = report.records
    methods = list(recs[0]["estimators"])
    labels = [f"k={r['k']}\nB={r['B']}\np{r['point']}" for r in recs]
    x = np.arange(len(recs))
    width = 0.8 / len(methods)
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(max(6.0, 0.9 * len(recs) + 2), 7))
    for i, m in enumerate(methods):
        ratio = [r["estimators"][m]["ratio"] for r in recs]
        cov = [r["estimators"][m].get("coverage") for r in recs]
        off = x + (i - (len(methods) - 1) / 2) * width
        ax1.bar(off, [np.nan if v is None else v for v in ratio], width, label=m, color=f"C{i}")
        ax2.bar(off, [np.nan if v is None else v for v in cov], width, label=m, color=f"C{i}")
    ax1.axhline(1.0, color="red", lw=1)
    ax1.set_ylabel("mean estimate / empirical variance")
    level = 100 * report.config["level"]
    ax2.axhline(level, color="red", lw=1)
    ax2.set_ylabel("coverage (%)")
    ax2.set_ylim(0, 100)
    for ax in (ax1, ax2):
        ax.set_xticks(x, labels, fontsize="small")
    ax1.legend(fontsize="small")
    fig.tight_layout()
    return _save(fig, path)


def plot_components(report: ExperimentReport, path: Path) -> Path:
    """(k^2/n) zeta_1, zeta_kk / B, their sum, and the empirical variance across B."""
    ks, pts = _cells(report)
    fig, axes = _grid(len(ks), len(pts))
    for a, k in enumerate(ks):
        for p in pts:
            ax = axes[a][p]
            recs = [r for r in report.records if r["k"] == k and r["point"] == p]
            Bs = [r["B"] for r in recs]
            for key, label, style in (
                ("zeta1_term", "(k^2/n) zeta_1", "C0-o"),
                ("zetakk_term", "zeta_kk / B", "C1-o"),
                ("sum", "sum", "C2-s"),
            ):
                vals = [r["components"][key] for r in recs]
                ax.plot(Bs, [np.nan if v is None else v for v in vals], style, label=label)
            ax.plot(Bs, [r["empirical_variance"] for r in recs], "r--", label="empirical")
            ax.set_xscale("log")
            ax.set_yscale("log")
            ax.set_xlabel("B")
            ax.set_title(f"k={k}, point {p}")
    axes[0][0].legend(fontsize="small")
    fig.tight_layout()
    return _save(fig, path)


def plot_bench(report: ExperimentReport, path: Path) -> Path:
    """Mean test error (or accuracy) with one standard error, per sampling mode."""
    fig, ax = plt.subplots(figsize=(6, 4))
    modes = list(dict.fromkeys(r["mode"] for r in report.records))
    for i, mode in enumerate(modes):
        recs = [r for r in report.records if r["mode"] == mode]
        ax.errorbar(
            [r["proportion"] for r in recs], [r["mean"] for r in recs],
            yerr=[r["se"] for r in recs], fmt="o-", color=f"C{i}", capsize=3, label=mode,
        )
    ax.set_xlabel("subsample proportion k/n")
    ax.set_ylabel(report.records[0]["metric"])
    ax.legend(fontsize="small")
    fig.tight_layout()
    return _save(fig, path)


_PLOTS = {
    "bias": plot_bias,
    "coverage": plot_coverage,
    "components": plot_components,
    "bench": plot_bench,
}


def render(report: ExperimentReport, out_dir: Path) -> list[Path]:
    if report.raw is None and report.kind == "bias":
        return []
    return [_PLOTS[report.kind](report, Path(out_dir) / f"{report.kind}.png")]
