"""Forecast losses, the reference-loss aggregate and the stability test.

The monitor keeps a growing reference batch of past forecast losses per
stream.  Each new day's loss batch is tested against it with a Welch
(unequal-variance) two-sample t-test; non-rejection extends the reference,
rejection makes the new batch the reference.  The aggregate stores only
sufficient statistics (n, mean, sum of squared deviations) so memory per
stream is O(1) regardless of how long the stable regime lasts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import stdtr


class InsufficientReferenceError(ValueError):
    """Reference aggregate too small to test against (need n >= 2)."""


# ---------------------------------------------------------------------------
# loss functions
# ---------------------------------------------------------------------------

def _check_finite(actual: float, forecast: float) -> None:
    if not (math.isfinite(actual) and math.isfinite(forecast)):
        raise ValueError(f"non-finite loss inputs: actual={actual}, forecast={forecast}")


def squared_loss(actual: float, forecast: float) -> float:
    """Squared forecast error (actual - forecast)^2."""
    _check_finite(actual, forecast)
    return (actual - forecast) ** 2


def sape(actual: float, forecast: float) -> float:
    """Symmetric absolute percentage error, 100|a - f| / (|a| + |f|), in [0, 100].

    The 0/0 case (perfect zero forecast on zero demand) is defined as 0 so
    that it cannot poison batch means.
    """
    _check_finite(actual, forecast)
    denom = abs(actual) + abs(forecast)
    if denom == 0.0:
        return 0.0
    return 100.0 * abs(actual - forecast) / denom


def smape(actuals, forecasts) -> float:
    """Mean SAPE over paired sequences."""
    a = np.asarray(actuals, dtype=float)
    f = np.asarray(forecasts, dtype=float)
    if a.shape != f.shape or a.ndim != 1 or len(a) == 0:
        raise ValueError(f"smape needs equal-length 1-d inputs, got {a.shape} vs {f.shape}")
    return float(np.mean(sape_values(a, f)))


def sape_values(actuals: np.ndarray, forecasts: np.ndarray) -> np.ndarray:
    """Vectorised SAPE with the 0/0 := 0 convention."""
    a = np.asarray(actuals, dtype=float)
    f = np.asarray(forecasts, dtype=float)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(f))):
        raise ValueError("non-finite loss inputs")
    denom = np.abs(a) + np.abs(f)
    out = np.zeros_like(denom)
    nz = denom > 0
    out[nz] = 100.0 * np.abs(a[nz] - f[nz]) / denom[nz]
    return out


def squared_values(actuals: np.ndarray, forecasts: np.ndarray) -> np.ndarray:
    a = np.asarray(actuals, dtype=float)
    f = np.asarray(forecasts, dtype=float)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(f))):
        raise ValueError("non-finite loss inputs")
    return (a - f) ** 2


# ---------------------------------------------------------------------------
# batches and the reference aggregate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LossBatch:
    """One day's losses for one stream (length = bins per day)."""

    stream_id: str
    b: int
    losses: np.ndarray
    loss_kind: str  # "squared" | "sape"

    def __post_init__(self) -> None:
        losses = np.asarray(self.losses, dtype=float)
        object.__setattr__(self, "losses", losses)
        losses.setflags(write=False)
        if self.loss_kind not in ("squared", "sape"):
            raise ValueError(f"unknown loss_kind {self.loss_kind!r}")
        if not np.all(np.isfinite(losses)) or np.any(losses < 0):
            raise ValueError("losses must be finite and non-negative")
        if self.loss_kind == "sape" and np.any(losses > 100.0 + 1e-9):
            raise ValueError("sape losses above 100")


def _batch_stats(losses: np.ndarray) -> tuple[int, float, float]:
    """(n, mean, sum of squared deviations) of a loss array."""
    x = np.asarray(losses, dtype=float)
    n = len(x)
    mean = float(np.mean(x))
    m2 = float(np.sum((x - mean) ** 2))
    return n, mean, m2


@dataclass(frozen=True)
class ReferenceBatchAggregate:
    """Streaming sufficient statistics of the current reference loss batch."""

    n: int
    mean: float
    m2: float
    started_at: int  # batch-end bin index that (re)initialised this reference

    @classmethod
    def from_losses(cls, losses, started_at: int) -> "ReferenceBatchAggregate":
        n, mean, m2 = _batch_stats(losses)
        if n < 1:
            raise ValueError("cannot initialise reference from empty batch")
        return cls(n=n, mean=mean, m2=m2, started_at=started_at)

    @property
    def variance(self) -> float:
        if self.n < 2:
            raise InsufficientReferenceError("variance undefined for n < 2")
        return self.m2 / (self.n - 1)

    def merged_with(self, losses) -> "ReferenceBatchAggregate":
        """Extend the aggregate with a new loss batch (Chan/Welford merge).

        Association order is fixed: the batch's own (n, mean, m2) are merged
        into the aggregate, so results are reproducible bit-for-bit.
        """
        nb, mean_b, m2_b = _batch_stats(losses)
        n = self.n + nb
        delta = mean_b - self.mean
        mean = self.mean + delta * nb / n
        m2 = self.m2 + m2_b + delta * delta * self.n * nb / n
        return ReferenceBatchAggregate(n=n, mean=mean, m2=m2, started_at=self.started_at)


def update_reference(
    ref: ReferenceBatchAggregate,
    new_losses,
    rejected: bool,
    retrained: bool = False,
    b: int = 0,
) -> ReferenceBatchAggregate:
    """Advance the reference batch with one day's losses.

    Not rejected: the losses are appended (Welford merge).  Rejected: a
    fresh aggregate is built from the new batch alone, started at ``b``.
    ``retrained`` is accepted for logging symmetry but does not alter the
    handling here; the caller decides what "rejected" means for its policy
    (test outcome alone, or test outcome plus the re-train decision).
    """
    if rejected:
        return ReferenceBatchAggregate.from_losses(new_losses, started_at=b)
    return ref.merged_with(new_losses)


# ---------------------------------------------------------------------------
# Welch two-sample stability test
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestResult:
    t_stat: float
    dof: float
    p_value: float
    reject: bool
    alpha: float
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "t_stat": self.t_stat,
            "dof": self.dof,
            "p_value": self.p_value,
            "reject": self.reject,
            "alpha": self.alpha,
            "degenerate": self.degenerate,
        }


def student_t_cdf(t: float, dof: float) -> float:
    """Student-t CDF (vendored cephes implementation via scipy.special.stdtr)."""
    return float(stdtr(dof, t))


def welch_from_stats(
    n1: int, mean1: float, var1: float, n2: int, mean2: float, var2: float, alpha: float
) -> TestResult:
    """Welch unequal-variance t-test from sufficient statistics.

    Two-sided p-value with Welch-Satterthwaite degrees of freedom.  Both
    samples having zero variance is resolved deterministically: equal means
    give (t=0, p=1), unequal means give (p=0, reject) with the degenerate
    flag set.
    """
    if n1 < 2:
        raise InsufficientReferenceError(f"reference needs n >= 2, got {n1}")
    if n2 < 2:
        raise ValueError(f"new batch needs n >= 2, got {n2}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    a1 = var1 / n1
    a2 = var2 / n2
    se2 = a1 + a2
    if se2 == 0.0:
        if mean1 == mean2:
            return TestResult(0.0, 0.0, 1.0, False, alpha, degenerate=True)
        return TestResult(math.inf if mean1 > mean2 else -math.inf, 0.0, 0.0, True, alpha, degenerate=True)
    t = (mean1 - mean2) / math.sqrt(se2)
    dof = se2 * se2 / (a1 * a1 / (n1 - 1) + a2 * a2 / (n2 - 1))
    p = 2.0 * student_t_cdf(-abs(t), dof)
    return TestResult(t_stat=t, dof=dof, p_value=p, reject=p < alpha, alpha=alpha)


def welch_test(ref: ReferenceBatchAggregate, new_losses, alpha: float) -> TestResult:
    """Equality-of-means test between the reference aggregate and a new batch."""
    if ref.n < 2:
        raise InsufficientReferenceError(f"reference needs n >= 2, got {ref.n}")
    nb, mean_b, m2_b = _batch_stats(new_losses)
    if nb < 2:
        raise ValueError(f"new batch needs n >= 2, got {nb}")
    return welch_from_stats(ref.n, ref.mean, ref.variance, nb, mean_b, m2_b / (nb - 1), alpha)
