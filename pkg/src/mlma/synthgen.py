"""Synthetic data: the sequential-test size study and benchmark panels.

The size study measures the empirical rejection rate of the sequential
stability test on iid loss streams (no forecaster involved): the first
batch initialises the reference, every later batch is tested against it,
rejection resets the reference to the new batch, acceptance merges it.
Replications are advanced in lockstep so the whole grid runs in seconds,
with every replication owning an independent seeded RNG stream.

Panel generation builds multiplicative seasonal demand with per-stream
level/volatility shift schedules, mimicking streams whose regimes change
at different times.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date

import numpy as np
from scipy.special import stdtr

from .calendar import BusinessCalendar
from .losstest import ReferenceBatchAggregate, update_reference, welch_test
from .panel import Panel, StreamSeries

DISTRIBUTIONS = ("gaussian", "chisquare5")
MC_LENGTHS = (10_000, 20_000, 50_000, 100_000)
MC_BATCHES = (10, 50, 100)
MC_ALPHAS = (0.05, 0.01)


@dataclass(frozen=True)
class MCConfig:
    distribution: str = "gaussian"
    stream_length: int = 10_000
    batch_size: int = 10
    alpha: float = 0.05
    replications: int = 1000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"distribution must be one of {DISTRIBUTIONS}")
        if self.stream_length < 2 * self.batch_size:
            raise ValueError("stream_length must be >= 2 * batch_size")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")


@dataclass(frozen=True)
class MCResult:
    config: MCConfig
    rejection_frequency: float
    mc_stderr: float


def _draw_stream(distribution: str, length: int, seed: int, replication: int) -> np.ndarray:
    g = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, replication))))
    if distribution == "gaussian":
        return g.standard_normal(length)
    return g.chisquare(5, size=length)


def replication_rejections(stream: np.ndarray, batch_size: int, alpha: float) -> list[bool]:
    """Reference-path implementation of one replication via the engine test.

    Slow but shares the exact welch_test/update_reference code used by the
    monitoring engine; the vectorised study is checked against it.
    """
    n_batches = len(stream) // batch_size
    batches = stream[: n_batches * batch_size].reshape(n_batches, batch_size)
    ref = ReferenceBatchAggregate.from_losses(batches[0], started_at=batch_size)
    out = []
    for k in range(1, n_batches):
        result = welch_test(ref, batches[k], alpha)
        out.append(result.reject)
        ref = update_reference(ref, batches[k], rejected=result.reject, b=(k + 1) * batch_size)
    return out


def run_size_study(config: MCConfig, chunk: int = 250) -> MCResult:
    """Empirical size of the sequential test under stability (iid streams).

    Returns the per-replication rejection rate (rejections / tests) averaged
    over replications, with its Monte Carlo standard error.
    """
    B = config.batch_size
    n_batches = config.stream_length // B
    n_tests = n_batches - 1
    rates = np.empty(config.replications)
    for start in range(0, config.replications, chunk):
        m = min(chunk, config.replications - start)
        streams = np.empty((m, n_batches * B))
        for j in range(m):
            streams[j] = _draw_stream(
                config.distribution, config.stream_length, config.seed, start + j
            )[: n_batches * B]
        X = streams.reshape(m, n_batches, B)
        bmean = X.mean(axis=2)
        bm2 = ((X - bmean[:, :, None]) ** 2).sum(axis=2)

        ref_n = np.full(m, float(B))
        ref_mean = bmean[:, 0].copy()
        ref_m2 = bm2[:, 0].copy()
        rejections = np.zeros(m)
        nb = float(B)
        for k in range(1, n_batches):
            nmean = bmean[:, k]
            nm2 = bm2[:, k]
            a1 = ref_m2 / (ref_n - 1.0) / ref_n
            a2 = nm2 / (nb - 1.0) / nb
            se2 = a1 + a2
            t = (ref_mean - nmean) / np.sqrt(se2)
            dof = se2 * se2 / (a1 * a1 / (ref_n - 1.0) + a2 * a2 / (nb - 1.0))
            p = 2.0 * stdtr(dof, -np.abs(t))
            rej = p < config.alpha
            rejections += rej

            n_tot = ref_n + nb
            delta = nmean - ref_mean
            merged_mean = ref_mean + delta * nb / n_tot
            merged_m2 = ref_m2 + nm2 + delta * delta * ref_n * nb / n_tot
            ref_n = np.where(rej, nb, n_tot)
            ref_mean = np.where(rej, nmean, merged_mean)
            ref_m2 = np.where(rej, nm2, merged_m2)
        rates[start : start + m] = rejections / n_tests
    freq = float(rates.mean())
    stderr = float(rates.std(ddof=1) / np.sqrt(len(rates))) if len(rates) > 1 else 0.0
    return MCResult(config=config, rejection_frequency=freq, mc_stderr=stderr)


def size_study_grid(
    distributions=DISTRIBUTIONS,
    lengths=MC_LENGTHS,
    batches=MC_BATCHES,
    alphas=MC_ALPHAS,
    replications: int = 1000,
    seed: int = 0,
    long_stream_replications: int | None = None,
) -> list[MCResult]:
    """Full study grid; the longest streams may use fewer replications."""
    out = []
    for dist in distributions:
        for length in lengths:
            reps = replications
            if long_stream_replications is not None and length >= 100_000:
                reps = long_stream_replications
            for batch in batches:
                for alpha in alphas:
                    cfg = MCConfig(
                        distribution=dist,
                        stream_length=length,
                        batch_size=batch,
                        alpha=alpha,
                        replications=reps,
                        seed=seed,
                    )
                    out.append(run_size_study(cfg))
    return out


# ---------------------------------------------------------------------------
# synthetic demand panels
# ---------------------------------------------------------------------------

def default_day_profile(bins_per_day: int = 60) -> np.ndarray:
    """Two-peak intra-day shape: lunch bump and a stronger evening peak."""
    x = np.arange(bins_per_day) / (bins_per_day - 1)
    lunch = 3.0 * np.exp(-0.5 * ((x - 0.25) / 0.08) ** 2)
    dinner = 5.0 * np.exp(-0.5 * ((x - 0.72) / 0.10) ** 2)
    return 2.0 + lunch + dinner


DEFAULT_DOW_MULTIPLIERS = (0.85, 0.9, 0.95, 1.0, 1.15, 1.25, 1.0)


@dataclass(frozen=True)
class SyntheticPanelConfig:
    D: int = 8
    days: int = 400
    base_profile: tuple = ()
    dow_multipliers: tuple = DEFAULT_DOW_MULTIPLIERS
    trend_slope: float = 0.0
    shift_schedule: tuple = ()  # per-stream tuple of (day, level_mult, volatility_mult) tuples
    noise_sd: float = 0.0
    seed: int = 0
    first_date: date = date(2019, 1, 1)
    bins_per_day: int = 60

    def __post_init__(self) -> None:
        if self.days <= 0 or self.D <= 0:
            raise ValueError("D and days must be positive")
        if len(self.dow_multipliers) != 7 or any(m <= 0 for m in self.dow_multipliers):
            raise ValueError("dow_multipliers must be 7 positive values")
        profile = tuple(self.base_profile) or tuple(default_day_profile(self.bins_per_day))
        if len(profile) != self.bins_per_day:
            raise ValueError(f"base_profile must have {self.bins_per_day} values")
        object.__setattr__(self, "base_profile", profile)
        for sched in self.shift_schedule:
            for day, level, vol in sched:
                if level <= 0 or vol <= 0:
                    raise ValueError("shift multipliers must be positive")
                if not 1 <= day <= self.days:
                    raise ValueError(f"shift day {day} outside 1..{self.days}")


def generate_panel(config: SyntheticPanelConfig) -> Panel:
    """Multiplicative seasonal demand with per-stream regime shifts.

    demand[i, t] = max(0, profile(bin) * dow_mult(dow) * level_i(day)
                             * (1 + trend_slope * (day - 1)) + noise),
    where level and noise volatility jump at the stream's scheduled shift
    days.  With no shifts, zero noise and zero trend the series is exactly
    periodic with a one-week period.
    """
    cal = BusinessCalendar(
        business_hours_per_day=config.bins_per_day // 4, first_date=config.first_date
    )
    n_bins = config.days * config.bins_per_day
    profile = np.asarray(config.base_profile)
    day_idx = np.arange(config.days)
    dow = (config.first_date.weekday() + day_idx) % 7
    dow_mult = np.asarray(config.dow_multipliers)[dow]
    trend = 1.0 + config.trend_slope * day_idx

    streams = []
    for i in range(config.D):
        level = np.ones(config.days)
        vol = np.ones(config.days)
        schedule = config.shift_schedule[i] if i < len(config.shift_schedule) else ()
        for shift_day, level_mult, vol_mult in schedule:
            level[shift_day - 1 :] *= level_mult
            vol[shift_day - 1 :] *= vol_mult
        day_scale = dow_mult * level * trend
        base = (profile[None, :] * day_scale[:, None]).ravel()
        if config.noise_sd > 0:
            g = np.random.Generator(np.random.PCG64(np.random.SeedSequence((config.seed, i))))
            noise = g.standard_normal(n_bins) * config.noise_sd * np.repeat(vol, config.bins_per_day)
            base = base + noise
        values = np.maximum(base, 0.0)
        streams.append(StreamSeries(stream_id=f"s{i:02d}", values=values, calendar=cal))
    return Panel(streams=tuple(streams), calendar=cal)


def benchmark_panel(D: int = 8, days: int = 400, seed: int = 7) -> Panel:
    """Strategy-comparison panel: staggered mid-sample level/volatility jumps.

    Streams shift on different days so re-training needs rarely coincide
    across streams.
    """
    schedules = []
    for i in range(D):
        shift_day = 205 + 9 * i
        level = 3.0 if i % 2 == 0 else 0.35
        schedules.append(((shift_day, level, 2.0),))
    cfg = SyntheticPanelConfig(
        D=D,
        days=days,
        trend_slope=0.0005,
        shift_schedule=tuple(schedules),
        noise_sd=0.6,
        seed=seed,
    )
    return generate_panel(cfg)
