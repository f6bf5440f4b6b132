"""Figure rendering for report and comparison output.

All renderers write PNG files next to the delimited output; the headless
Agg backend keeps them usable from the CLI and CI.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

DOW_LABELS = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"]


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def seasonal_profile_figure(profile, stream_id: str, path: str | Path) -> Path:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 3.5))
    hours = np.arange(len(profile.hourly_means))
    ax1.plot(hours, profile.hourly_means, color="tab:blue")
    ax1.fill_between(hours, profile.hourly_means - profile.hourly_se,
                     profile.hourly_means + profile.hourly_se, alpha=0.3, color="tab:blue")
    ax1.set_xlabel("business hour")
    ax1.set_ylabel("mean demand")
    ax1.set_title(f"{stream_id}: intra-day profile")
    dows = np.arange(7)
    ax2.plot(dows, profile.dow_means, color="tab:blue", marker="o")
    ax2.fill_between(dows, profile.dow_means - profile.dow_se,
                     profile.dow_means + profile.dow_se, alpha=0.3, color="tab:blue")
    ax2.set_xticks(dows, DOW_LABELS)
    ax2.set_title(f"{stream_id}: day-of-week profile")
    return _save(fig, path)


def rolling_correlation_figure(rc, stream_id: str, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(8, 3))
    ax.plot(rc.days, rc.avg_corr, color="tab:blue")
    ax.axhline(0.0, color="gray", lw=0.5)
    ax.set_ylim(-1.05, 1.05)
    ax.set_xlabel("day")
    ax.set_ylabel("avg correlation")
    ax.set_title(f"{stream_id}: rolling correlation vs other streams")
    return _save(fig, path)


def durations_figure(metrics: dict, path: str | Path) -> Path:
    all_durations = [d for m in metrics.values() for d in m.durations]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    if all_durations:
        ax.hist(all_durations, bins=min(30, max(5, len(set(all_durations)))), color="tab:blue")
    ax.set_xlabel("days between re-trainings")
    ax.set_ylabel("count")
    ax.set_title("re-training regime durations")
    return _save(fig, path)


def retrain_counts_figure(counts: dict, n_streams: int, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(8, 3))
    if counts:
        days = sorted(counts)
        ax.bar(days, [counts[d] for d in days], width=1.0, color="tab:blue")
    ax.axhline(n_streams, color="tab:red", lw=1.0, label=f"all {n_streams} streams")
    ax.set_xlabel("day")
    ax.set_ylabel("streams re-trained")
    ax.legend(loc="upper left")
    ax.set_title("re-training instances across time")
    return _save(fig, path)


def pit_figure(metrics: dict, stream_id: str, path: str | Path) -> Path:
    m = metrics[stream_id]
    fig, ax = plt.subplots(figsize=(8, 3))
    days = m.retrain_days
    if days:
        ref = [m.p_pairs[d][0] for d in days]
        new = [m.p_pairs[d][1] for d in days]
        ax.scatter(days, ref, color="tab:blue", label="reference mean", zorder=3)
        ax.scatter(days, new, color="tab:red", label="new batch mean", zorder=3)
        for d, r, n in zip(days, ref, new):
            ax.plot([d, d], [r, n], color="gray", lw=0.8, zorder=2)
        ax.legend()
    ax.set_xlabel("re-training day")
    ax.set_ylabel("mean loss")
    ax.set_title(f"{stream_id}: reference vs new loss at re-training")
    return _save(fig, path)


def smape_cost_figure(rows: list[dict], path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for r in rows:
        monthly_cost = r["labor_usd_month"] + (r["cpu_usd_year"] + r["co2_usd_year"]) / 12.0
        ax.scatter(monthly_cost, r["avg_smape"],
                   color="tab:red" if r["strategy"] == "mlma" else "tab:blue", zorder=3)
        ax.annotate(r["strategy"], (monthly_cost, r["avg_smape"]),
                    textcoords="offset points", xytext=(5, 4), fontsize=8)
    ax.set_xlabel("total monthly cost (USD)")
    ax.set_ylabel("avg SMAPE")
    ax.set_title("forecast accuracy vs monitoring cost")
    return _save(fig, path)
