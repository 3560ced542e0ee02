"""Steady-state estimation and the gap-scaling regression.

Point estimates are time averages over the post-warmup window; confidence
intervals come from non-overlapping batch means with a Student-t quantile
(20 batches by default).  Accumulators from parallel replications merge
by pooling their batches, which leaves point estimates exactly invariant
under splitting or merging windows.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DegenerateGridError, WindowEmptyError

SCALAR_METRICS = ("active", "cost", "virtual", "backup")


@dataclass
class MetricsAccumulator:
    """Per-batch time integrals of the tracked fleet quantities."""

    batch_len: float
    active: np.ndarray = field(repr=False)
    cost: np.ndarray = field(repr=False)
    virtual: np.ndarray = field(repr=False)
    backup: np.ndarray = field(repr=False)
    tokens: np.ndarray = field(repr=False)        # (nb, num_types)
    occupancy: np.ndarray = field(repr=False)     # (|K|,) whole-window
    window: float = 0.0
    events: int = 0
    events_post: int = 0

    @staticmethod
    def from_kernel(raw: dict) -> "MetricsAccumulator":
        return MetricsAccumulator(
            batch_len=float(raw["batch_len"]),
            active=np.asarray(raw["batch_active"], dtype=float),
            cost=np.asarray(raw["batch_cost"], dtype=float),
            virtual=np.asarray(raw["batch_virt"], dtype=float),
            backup=np.asarray(raw["batch_backup"], dtype=float),
            tokens=np.asarray(raw["batch_tokens"], dtype=float),
            occupancy=np.asarray(raw["occupancy"], dtype=float),
            window=float(raw["window"]),
            events=int(raw["events"]),
            events_post=int(raw.get("events_post", raw["events"])),
        )

    def merge(self, other: "MetricsAccumulator") -> "MetricsAccumulator":
        """Pool batches; both sides must use a common batch length."""
        if not math.isclose(self.batch_len, other.batch_len, rel_tol=1e-9):
            raise ValueError("cannot merge accumulators with unequal batches")
        return MetricsAccumulator(
            batch_len=self.batch_len,
            active=np.concatenate([self.active, other.active]),
            cost=np.concatenate([self.cost, other.cost]),
            virtual=np.concatenate([self.virtual, other.virtual]),
            backup=np.concatenate([self.backup, other.backup]),
            tokens=np.vstack([self.tokens, other.tokens]),
            occupancy=self.occupancy + other.occupancy,
            window=self.window + other.window,
            events=self.events + other.events,
            events_post=self.events_post + other.events_post,
        )


def merge_all(accs) -> MetricsAccumulator:
    accs = list(accs)
    out = accs[0]
    for a in accs[1:]:
        out = out.merge(a)
    return out


@dataclass(frozen=True)
class Estimate:
    value: float
    half_width: float

    @property
    def lo(self) -> float:
        return self.value - self.half_width

    @property
    def hi(self) -> float:
        return self.value + self.half_width


def _batch_estimate(integrals: np.ndarray, batch_len: float, conf: float):
    means = integrals / batch_len
    nb = means.shape[0]
    point = float(means.mean())
    if nb < 2:
        return Estimate(point, float("inf"))
    se = float(means.std(ddof=1)) / math.sqrt(nb)
    t = float(stats.t.ppf(0.5 + conf / 2, nb - 1))
    return Estimate(point, t * se)


def estimate(acc: MetricsAccumulator, conf: float = 0.95) -> dict:
    """Point estimates with batch-means confidence intervals.

    The cost-per-active-server ratio uses per-batch ratios; when a batch
    has no active-server time the ratio is undefined and flagged None.
    """
    if acc.window <= 0:
        raise WindowEmptyError("no post-warmup observation window")
    out = {
        "active": _batch_estimate(acc.active, acc.batch_len, conf),
        "virtual": _batch_estimate(acc.virtual, acc.batch_len, conf),
        "backup": _batch_estimate(acc.backup, acc.batch_len, conf),
        "tokens": [
            _batch_estimate(acc.tokens[:, i], acc.batch_len, conf)
            for i in range(acc.tokens.shape[1])
        ],
    }
    # Exact whole-window averages (invariant under merge).
    out["active_mean"] = float(acc.active.sum() / acc.window)
    out["cost_mean"] = float(acc.cost.sum() / acc.window)
    if np.all(acc.active > 0):
        ratios = acc.cost / acc.active
        nb = ratios.shape[0]
        point = float(acc.cost.sum() / acc.active.sum())
        if nb < 2:
            out["cost_per_active"] = Estimate(point, float("inf"))
        else:
            se = float(ratios.std(ddof=1)) / math.sqrt(nb)
            t = float(stats.t.ppf(0.5 + conf / 2, nb - 1))
            out["cost_per_active"] = Estimate(point, t * se)
    else:
        out["cost_per_active"] = None  # undefined, not 0/0
    return out


@dataclass(frozen=True)
class ScalingFit:
    """Log-log regression of the optimality-gap surrogate against scale."""

    r_values: tuple
    gaps: tuple
    gap_ses: tuple
    floor: tuple
    slope: float
    slope_half_width: float
    intercept: float

    def to_json_dict(self) -> dict:
        return {
            "r_values": list(self.r_values),
            "gaps": list(self.gaps),
            "gap_ses": list(self.gap_ses),
            "floor": list(self.floor),
            "slope": self.slope,
            "slope_half_width": self.slope_half_width,
            "intercept": self.intercept,
        }


def gap_scaling(points, conf: float = 0.95) -> ScalingFit:
    """OLS of log(gap) on log(r).

    points: iterable of (r, gap, gap_se).  Gaps are floored at one
    standard error so that noise-dominated nonpositive values cannot
    poison the logarithm.
    """
    points = sorted(points)
    if len(points) < 3:
        raise DegenerateGridError("need at least 3 grid points")
    r = np.array([p[0] for p in points], dtype=float)
    if np.any(np.diff(r) <= 0):
        raise DegenerateGridError("grid values must be strictly increasing")
    gap = np.array([p[1] for p in points], dtype=float)
    se = np.array([p[2] for p in points], dtype=float)
    floor = np.maximum(se, 1e-12)
    y = np.log(np.maximum(gap, floor))
    x = np.log(r)
    n = len(points)
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    slope = float(((x - xm) * (y - ym)).sum() / sxx)
    intercept = ym - slope * xm
    resid = y - (intercept + slope * x)
    if n > 2:
        sigma2 = float((resid**2).sum() / (n - 2))
        se_slope = math.sqrt(sigma2 / sxx)
        t = float(stats.t.ppf(0.5 + conf / 2, n - 2))
        half = t * se_slope
    else:
        half = float("inf")
    return ScalingFit(
        r_values=tuple(r.tolist()),
        gaps=tuple(gap.tolist()),
        gap_ses=tuple(se.tolist()),
        floor=tuple(floor.tolist()),
        slope=slope,
        slope_half_width=half,
        intercept=float(intercept),
    )
