"""Report writers: delimited outputs, the statistics summary block and the
matplotlib figures rendered next to them.

All CSVs use full-precision repr floats so reruns with the same config and
seed are byte-identical.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .evaluate import RankTable
from .pipeline import EvalOutcome
from .spotting import DetectionResult


def write_eval_report_csv(outcome: EvalOutcome, path) -> Path:
    lines = ["class,method,dont_care,overlap,accuracy"]
    for r in outcome.rows:
        lines.append(f"{r.class_name},{r.method},{r.dont_care},"
                     f"{repr(r.overlap)},{repr(r.accuracy)}")
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def write_ranks_csv(table: RankTable, experiment_ids, path) -> Path:
    lines = ["experiment," + ",".join(table.methods)]
    for eid, row in zip(experiment_ids, table.ranks):
        lines.append(eid + "," + ",".join(repr(float(v)) for v in row))
    mean = table.mean_ranks
    lines.append("mean," + ",".join(repr(float(v)) for v in mean))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def write_detections_csv(detections, path) -> Path:
    lines = ["class,begin,end,cost"]
    for d in detections:
        lines.append(f"{d.class_name},{d.begin},{d.end},{repr(d.terminal_cost)}")
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def detection_record(d: DetectionResult, stream_id: str) -> dict:
    return {"stream": stream_id, "class": d.class_name, "begin": d.begin,
            "end": d.end, "cost": d.terminal_cost}


def stats_block(outcome: EvalOutcome) -> str:
    """Human-readable summary of the rank statistics."""
    t = outcome.rank_table
    lines = [
        "== rank statistics ==",
        "methods:      " + " ".join(outcome.methods),
        f"experiments:  {t.n_experiments} "
        f"({len(outcome.classes)} classes x {len(outcome.dont_care_values)} "
        f"dont-care values x 2 metrics)",
        "mean ranks:   " + " ".join(f"{v:.4f}" for v in t.mean_ranks),
        f"friedman X2:  {outcome.x2:.4f}",
        f"iman-davenport F: {outcome.f_f:.4f} "
        f"(p = {outcome.p_value:.4g} under F({t.n_methods - 1}, "
        f"{(t.n_methods - 1) * (t.n_experiments - 1)}))",
    ]
    for alpha in sorted(outcome.critical_differences):
        cd = outcome.critical_differences[alpha]
        lines.append(f"nemenyi CD at {1 - alpha:.2f} confidence: {cd:.4f}")
    return "\n".join(lines)


def render_metric_figure(outcome: EvalOutcome, metric: str, path) -> Path:
    """One subplot per class: metric vs Don't-Care value, one line per method."""
    classes = outcome.classes
    fig, axes = plt.subplots(1, len(classes), figsize=(4.2 * len(classes), 3.4),
                             sharey=True, squeeze=False)
    for ax, cls in zip(axes[0], classes):
        for method in outcome.methods:
            ys = [getattr(outcome.row(cls, method, dc), metric)
                  for dc in outcome.dont_care_values]
            ax.plot(outcome.dont_care_values, ys, marker="o", label=method)
        ax.set_title(cls)
        ax.set_xlabel("don't-care frames")
        ax.set_ylim(-0.05, 1.05)
        ax.grid(True, alpha=0.3)
    axes[0][0].set_ylabel(metric)
    axes[0][-1].legend(fontsize=8, loc="lower right")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_rank_figure(outcome: EvalOutcome, path) -> Path:
    """Mean rank per method with the Nemenyi critical-difference interval."""
    t = outcome.rank_table
    fig, ax = plt.subplots(figsize=(6.0, 0.9 * t.n_methods + 1.2))
    ys = range(t.n_methods)
    cd = outcome.critical_differences.get(0.05)
    for y, (name, rank) in enumerate(zip(outcome.methods, t.mean_ranks)):
        if cd is not None:
            ax.errorbar([rank], [y], xerr=[[cd / 2], [cd / 2]], fmt="o",
                        capsize=4, color="C0")
        else:
            ax.plot([rank], [y], "o", color="C0")
        ax.annotate(f"{rank:.3f}", (rank, y), textcoords="offset points",
                    xytext=(0, 8), ha="center", fontsize=8)
    ax.set_yticks(list(ys))
    ax.set_yticklabels(outcome.methods)
    ax.invert_yaxis()
    ax.set_xlabel("mean rank (1 = best)"
                  + (f"; interval = CD(0.95)/2 = {cd / 2:.3f}" if cd else ""))
    ax.grid(True, axis="x", alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_eval_figures(outcome: EvalOutcome, directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return [
        render_metric_figure(outcome, "overlap", directory / "eval-overlap.png"),
        render_metric_figure(outcome, "accuracy", directory / "eval-accuracy.png"),
        render_rank_figure(outcome, directory / "eval-ranks.png"),
    ]
