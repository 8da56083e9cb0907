"""Line charts of sweep results, one series per policy."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiment import SweepResult  # noqa: E402

PANELS = (
    ("misdetection", "Misdetection probability"),
    ("ec", "Mean energy per device per TTI"),
    ("info", "Mean information per event"),
)

STYLE = {
    "genie": dict(color="k", marker="s", linestyle="--"),
    "knn": dict(color="tab:blue", marker="o"),
    "grid": dict(color="tab:green", marker="^"),
    "random": dict(color="tab:red", marker="v"),
}


def _series(result: SweepResult, metric: str):
    out: dict[str, tuple[list, list, list]] = {}
    for pol, n, agg in result.rows:
        summary = getattr(agg, metric)
        if summary.mean is None:
            continue
        xs, ys, es = out.setdefault(pol.value, ([], [], []))
        xs.append(n)
        ys.append(summary.mean)
        es.append(summary.ci)
    return out


def render_sweep(result: SweepResult, stem: str | Path, i_min: float | None = None) -> list[Path]:
    """Write ``<stem>_<metric>.svg`` for each metric; returns the paths."""
    stem = Path(stem)
    written = []
    with plt.rc_context({"svg.hashsalt": "ehduty", "font.size": 10}):
        for metric, label in PANELS:
            fig, ax = plt.subplots(figsize=(5.0, 3.4))
            for name, (xs, ys, es) in _series(result, metric).items():
                ax.errorbar(xs, ys, yerr=es, label=name, capsize=2, **STYLE.get(name, {}))
            if metric == "info" and i_min is not None:
                ax.axhline(i_min, color="0.5", linewidth=0.8, linestyle=":", label="I_min")
            ax.set_xlabel("Number of devices")
            ax.set_ylabel(label)
            ax.grid(alpha=0.3)
            ax.legend(frameon=False)
            fig.tight_layout()
            path = stem.with_name(f"{stem.name}_{metric}.svg")
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            written.append(path)
    return written
