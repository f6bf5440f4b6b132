"""Analytics and report emission: profiles, correlations, run tables.

Everything here reads either a Panel or a finished run's event log and
produces plain data structures; CSV/text writers live alongside so the
CLI can emit delimited output next to the rendered figures.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .engine import RunReport
from .eventlog import read_events
from .panel import Panel, StreamSeries


@dataclass(frozen=True)
class SeasonalProfile:
    hourly_means: np.ndarray
    hourly_se: np.ndarray
    dow_means: np.ndarray
    dow_se: np.ndarray


def seasonal_profile(series: StreamSeries) -> SeasonalProfile:
    """Mean demand (with standard errors) by business hour and by weekday."""
    if series.n_days < 7:
        raise ValueError(f"seasonal profile needs >= 7 complete days, got {series.n_days}")
    cal = series.calendar
    B = cal.bins_per_day
    t = np.arange(1, series.n_bins + 1)
    hour = ((t - 1) % B) // 4
    day = (t - 1) // B
    dow = (cal.first_date.weekday() + day) % 7

    def group_stats(labels: np.ndarray, n_groups: int):
        means = np.empty(n_groups)
        ses = np.empty(n_groups)
        for g in range(n_groups):
            vals = series.values[labels == g]
            means[g] = vals.mean()
            ses[g] = vals.std(ddof=1) / np.sqrt(len(vals)) if len(vals) > 1 else 0.0
        return means, ses

    hourly_means, hourly_se = group_stats(hour, cal.business_hours_per_day)
    dow_means, dow_se = group_stats(dow, 7)
    return SeasonalProfile(hourly_means, hourly_se, dow_means, dow_se)


@dataclass(frozen=True)
class RollingCorrelation:
    days: np.ndarray  # day index of each window end
    avg_corr: np.ndarray  # mean Pearson correlation vs the other streams
    degenerate: np.ndarray  # count of zero-variance pairs folded in as 0


def rolling_correlation(panel: Panel, stream_id: str, window_days: int = 30) -> RollingCorrelation:
    """Average correlation of one stream against all others, per day end.

    Windows cover the most recent ``window_days`` full days; a pair with a
    zero-variance window contributes correlation 0 and is counted in the
    degenerate flags.
    """
    if panel.D < 2:
        raise ValueError("rolling correlation needs at least two streams")
    if panel.n_days < window_days + 1:
        raise ValueError(f"panel has {panel.n_days} days, need >= {window_days + 1}")
    B = panel.calendar.bins_per_day
    values = panel.values_matrix()
    target_row = panel.stream_ids.index(stream_id)
    others = [i for i in range(panel.D) if i != target_row]

    day_ends = np.arange(window_days, panel.n_days + 1)
    avg = np.empty(len(day_ends))
    degenerate = np.zeros(len(day_ends), dtype=int)
    for j, d in enumerate(day_ends):
        window = values[:, (d - window_days) * B : d * B]
        centered = window - window.mean(axis=1, keepdims=True)
        norms = np.sqrt((centered**2).sum(axis=1))
        target = centered[target_row]
        corrs = []
        for i in others:
            if norms[target_row] == 0.0 or norms[i] == 0.0:
                corrs.append(0.0)
                degenerate[j] += 1
            else:
                corrs.append(float(target @ centered[i] / (norms[target_row] * norms[i])))
        avg[j] = float(np.mean(corrs))
    return RollingCorrelation(days=day_ends, avg_corr=avg, degenerate=degenerate)


# ---------------------------------------------------------------------------
# run-log analytics (for the `report` subcommand and the metrics API)
# ---------------------------------------------------------------------------

@dataclass
class StreamMetrics:
    stream_id: str
    r_days: dict  # day -> 0/1
    p_pairs: dict  # day -> (ref_mean, new_mean)
    daily_smape: dict  # day -> mean sape
    retrain_days: list
    durations: list

    def to_dict(self) -> dict:
        return {
            "stream_id": self.stream_id,
            "r": {str(d): r for d, r in sorted(self.r_days.items())},
            "p": {str(d): list(p) for d, p in sorted(self.p_pairs.items())},
            "daily_smape": {str(d): s for d, s in sorted(self.daily_smape.items())},
            "retrain_days": self.retrain_days,
            "durations": self.durations,
        }


def metrics_from_log(log_path: str | Path) -> dict:
    """Per-stream metric streams reconstructed from an event log."""
    out: dict[str, StreamMetrics] = {}
    for rec in read_events(log_path, types=("step",)):
        sid = rec["stream"]
        m = out.setdefault(
            sid, StreamMetrics(sid, r_days={}, p_pairs={}, daily_smape={}, retrain_days=[], durations=[])
        )
        day = rec["day"]
        m.r_days[day] = rec["r"]
        m.p_pairs[day] = tuple(rec["p_pair"])
        m.daily_smape[day] = rec["day_smape"]
    for m in out.values():
        m.retrain_days = sorted(d for d, r in m.r_days.items() if r == 1)
        m.durations = [b - a for a, b in zip(m.retrain_days, m.retrain_days[1:])]
    return out


def daily_retrain_counts(metrics: dict) -> dict:
    """day -> number of streams re-trained that day."""
    counts: dict[int, int] = {}
    for m in metrics.values():
        for d in m.retrain_days:
            counts[d] = counts.get(d, 0) + 1
    return dict(sorted(counts.items()))


# ---------------------------------------------------------------------------
# delimited/text emission
# ---------------------------------------------------------------------------

def comparison_rows(reports: list[RunReport]) -> list[dict]:
    rows = []
    for rep in reports:
        spec = rep.strategy
        name = spec["kind"]
        if spec["kind"] == "periodic":
            name = f"periodic_{spec['period_days']}d"
        rows.append(
            {
                "strategy": name,
                "avg_smape": rep.avg_smape,
                "retrains": len(rep.retrain_events),
                "alerts": rep.alerts,
                "labor_hours_month": rep.labor.hours_per_month,
                "labor_usd_month": rep.labor.usd_per_month,
                "cpu_usd_year": rep.compute.cpu_usd_per_year,
                "co2_usd_year": rep.compute.co2_usd_per_year,
            }
        )
    return rows


def write_comparison_csv(reports: list[RunReport], path: str | Path) -> None:
    rows = comparison_rows(reports)
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def comparison_summary(reports: list[RunReport]) -> str:
    rows = comparison_rows(reports)
    base = next((r for r in rows if r["strategy"] == "mlma"), rows[0])
    buf = io.StringIO()
    buf.write(f"{'strategy':<18}{'SMAPE':>8}{'vs mlma':>9}{'retrains':>10}"
              f"{'labor $/mo':>12}{'cpu $/yr':>10}{'co2 $/yr':>10}\n")
    for r in rows:
        rel = (r["avg_smape"] / base["avg_smape"] - 1.0) * 100.0 if base["avg_smape"] else 0.0
        buf.write(
            f"{r['strategy']:<18}{r['avg_smape']:>8.2f}{rel:>+8.1f}%{r['retrains']:>10d}"
            f"{r['labor_usd_month']:>12.2f}{r['cpu_usd_year']:>10.2f}{r['co2_usd_year']:>10.2f}\n"
        )
    return buf.getvalue()


def write_seasonal_profile_csv(profile: SeasonalProfile, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "index", "mean", "se"])
        for h, (m, s) in enumerate(zip(profile.hourly_means, profile.hourly_se)):
            writer.writerow(["hour", h, repr(float(m)), repr(float(s))])
        for d, (m, s) in enumerate(zip(profile.dow_means, profile.dow_se)):
            writer.writerow(["dow", d, repr(float(m)), repr(float(s))])


def write_rolling_correlation_csv(rc: RollingCorrelation, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["day", "avg_correlation", "degenerate_pairs"])
        for d, c, g in zip(rc.days, rc.avg_corr, rc.degenerate):
            writer.writerow([int(d), repr(float(c)), int(g)])


def write_metrics_csv(metrics: dict, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stream", "day", "r", "p_ref_mean", "p_new_mean", "day_smape"])
        for sid in sorted(metrics):
            m = metrics[sid]
            for day in sorted(m.r_days):
                p = m.p_pairs.get(day, (0.0, 0.0))
                writer.writerow([sid, day, m.r_days[day], repr(float(p[0])), repr(float(p[1])),
                                 repr(float(m.daily_smape.get(day, 0.0)))])


def write_durations_csv(metrics: dict, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stream", "durations_days"])
        for sid in sorted(metrics):
            writer.writerow([sid, ",".join(str(d) for d in metrics[sid].durations)])


def write_mc_csv(results, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["distribution", "length", "batch", "alpha", "rejection_frequency", "mc_stderr"])
        for r in results:
            c = r.config
            writer.writerow([c.distribution, c.stream_length, c.batch_size, c.alpha,
                             repr(r.rejection_frequency), repr(r.mc_stderr)])
