"""Matplotlib renderers for evaluation reports and episode summaries.

Figures are written as PNG files next to the delimited outputs; metadata is
pinned so repeated runs produce identical bytes.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .aks import AksBatchStats, AksEpisode
from .metrics import MetricReport

_SAVE_KWARGS = {"dpi": 120, "metadata": {"Software": "vrskit"}}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)
    return path


def save_metric_figures(
    aggregate: MetricReport, per_video: Mapping[str, MetricReport], outdir: str | Path
) -> list[Path]:
    """Per-video J/F/J&F bars plus a J-vs-F scatter."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    names = sorted(per_video)
    j = [per_video[n].j_mean for n in names]
    f = [per_video[n].f_mean for n in names]
    jf = [per_video[n].jf_mean for n in names]

    fig, ax = plt.subplots(figsize=(max(6.0, 0.5 * len(names) + 2.0), 4.0))
    x = range(len(names))
    width = 0.28
    ax.bar([i - width for i in x], j, width, label="J")
    ax.bar(list(x), f, width, label="F")
    ax.bar([i + width for i in x], jf, width, label="J&F")
    ax.axhline(aggregate.jf_mean, color="gray", linestyle="--", linewidth=1,
               label=f"dataset J&F = {aggregate.jf_mean:.3f}")
    ax.set_xticks(list(x))
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("score")
    ax.set_title("Per-video segmentation metrics")
    ax.legend(fontsize=8)
    fig.tight_layout()
    paths = [_save(fig, outdir / "per_video_metrics.png")]

    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.scatter(j, f, s=18)
    ax.plot([0, 1], [0, 1], color="gray", linewidth=0.8, linestyle=":")
    ax.set_xlim(0, 1.02)
    ax.set_ylim(0, 1.02)
    ax.set_xlabel("J (region)")
    ax.set_ylabel("F (boundary)")
    ax.set_title("Region vs boundary quality")
    fig.tight_layout()
    paths.append(_save(fig, outdir / "j_vs_f.png"))
    return paths


def save_aks_figures(
    episodes: Sequence[AksEpisode],
    stats: AksBatchStats,
    ratios: Sequence[tuple[float, float]],
    outdir: str | Path,
) -> list[Path]:
    """Round-count histogram and initial-vs-final area-ratio scatter."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rounds = [ep.rounds for ep in episodes]
    max_rounds = max(rounds)

    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    bins = [b + 0.5 for b in range(max_rounds + 1)]
    ax.hist(rounds, bins=bins, rwidth=0.85)
    ax.axvline(stats.mean_rounds, color="gray", linestyle="--", linewidth=1,
               label=f"mean = {stats.mean_rounds:.2f}")
    ax.set_xlabel("rounds per episode")
    ax.set_ylabel("episodes")
    ax.set_title("Selection rounds")
    ax.legend(fontsize=8)
    fig.tight_layout()
    paths = [_save(fig, outdir / "rounds_histogram.png")]

    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    initial = [r[0] for r in ratios]
    final = [r[1] for r in ratios]
    ax.scatter(initial, final, s=14, alpha=0.7)
    ax.plot([0, 1], [0, 1], color="gray", linewidth=0.8, linestyle=":")
    ax.set_xlim(0, 1.02)
    ax.set_ylim(0, 1.02)
    ax.set_xlabel("initial candidate area ratio")
    ax.set_ylabel("final keyframe area ratio")
    ax.set_title("Keyframe quality before/after re-selection")
    fig.tight_layout()
    paths.append(_save(fig, outdir / "area_ratio_improvement.png"))
    return paths
