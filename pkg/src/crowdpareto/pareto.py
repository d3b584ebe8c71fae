"""Subset improvement, bootstrap risk, and the accuracy-risk frontier.

Improvement of a subset is the full-crowd error minus the subset error
within a round (positive = the subset beats the whole crowd).  Each
bootstrap replicate resamples predictions within every round, yielding a
mean improvement across rounds and a cross-round standard deviation (the
risk measure); both are averaged over replicates.
"""

import math
from dataclasses import dataclass, replace
from datetime import timedelta

import numpy as np
from scipy import stats

from .attribution import AlphaGrid, select_subset
from .dataset import Round
from .errors import (
    EmptySubset,
    EmptyWindow,
    InsufficientRounds,
    TooFewPoints,
    TooFewSamples,
)
from .seeding import derive_rng


@dataclass(frozen=True)
class ImprovementSample:
    """Per-round improvements of one bootstrap replicate at one boundary."""

    alpha_s: float
    bootstrap_index: int
    per_round_improvements: dict


@dataclass(frozen=True)
class ParetoPoint:
    """One point of the frontier; NaN fields flag an empty-subset gap."""

    alpha_s: float
    improvement_mean: float
    ci95_half_width: float
    risk: float
    n_rounds_used: int

    def __post_init__(self):
        if math.isfinite(self.ci95_half_width) and self.ci95_half_width < 0:
            raise ValueError("ci95_half_width must be >= 0")
        if math.isfinite(self.risk) and self.risk < 0:
            raise ValueError("risk must be >= 0")

    @property
    def is_gap(self) -> bool:
        return not math.isfinite(self.improvement_mean)


def subset_error(round_: Round, ids, phase: str = "post") -> float:
    """Percent error of the subset's mean prediction against ground truth."""
    if phase not in ("pre", "post"):
        raise ValueError(f"phase must be 'pre' or 'post', got {phase!r}")
    wanted = set(ids)
    preds = [p.b_post if phase == "post" else p.b_pre
             for p in round_.analysis_sets if p.id in wanted]
    if not preds:
        raise EmptySubset(round_.round_id)
    v = round_.ground_truth
    return abs(float(np.mean(preds)) - v) / v * 100.0


def improvement(round_: Round, ids) -> float:
    """Signed percent improvement of the subset over the whole crowd."""
    full = [p.id for p in round_.analysis_sets]
    if not full:
        raise EmptySubset(round_.round_id)
    return subset_error(round_, full) - subset_error(round_, ids)


def _round_tables(rounds, records):
    """Per-round (b_post array over alpha records, id -> position)."""
    by_round = {}
    for r in rounds:
        post = {p.id: p.b_post for p in r.analysis_sets}
        ids = [rec.prediction_set_id for rec in records
               if rec.round_id == r.round_id and rec.prediction_set_id in post]
        by_round[r.round_id] = (r, np.array([post[i] for i in ids]),
                                {i: k for k, i in enumerate(ids)})
    return by_round


def bootstrap_improvements(
    rounds,
    records,
    alpha_s: float,
    n_boot: int = 100,
    seed: int = 0,
    resample_full: bool = True,
) -> list:
    """Per-round improvements for each bootstrap replicate.

    Replicate streams are derived from (seed, alpha_s, replicate, round),
    so results do not depend on evaluation order or parallelism.  Rounds
    whose subset is empty at this boundary are excluded throughout.
    """
    records = list(records)
    selected = set(select_subset(records, alpha_s))
    tables = _round_tables(rounds, records)

    usable = []
    for round_id, (r, posts, pos) in tables.items():
        sub_idx = np.array([k for i, k in pos.items() if i in selected], dtype=int)
        if sub_idx.size and posts.size:
            usable.append((r, posts, np.sort(sub_idx)))
    if not usable:
        raise EmptySubset("all rounds", alpha_s=alpha_s)

    out = []
    for b in range(n_boot):
        per_round = {}
        for r, posts, sub_idx in usable:
            rng = derive_rng(seed, "boot", float(alpha_s), b, r.round_id)
            sub_draw = posts[sub_idx[rng.integers(0, sub_idx.size, sub_idx.size)]]
            if sub_idx.size == posts.size:
                full_draw = sub_draw  # subset is the whole crowd: self-comparison
            elif resample_full:
                full_draw = posts[rng.integers(0, posts.size, posts.size)]
            else:
                full_draw = posts
            v = r.ground_truth
            err_full = abs(float(full_draw.mean()) - v) / v * 100.0
            err_sub = abs(float(sub_draw.mean()) - v) / v * 100.0
            per_round[r.round_id] = err_full - err_sub
        out.append(ImprovementSample(alpha_s, b, per_round))
    return out


def bootstrap_analysis(
    rounds,
    records,
    alpha_s: float,
    n_boot: int = 100,
    seed: int = 0,
    resample_full: bool = True,
) -> ParetoPoint:
    """Bootstrap mean improvement, its t-interval, and cross-round risk."""
    samples = bootstrap_improvements(rounds, records, alpha_s, n_boot, seed,
                                     resample_full)
    n_rounds = len(samples[0].per_round_improvements)
    if n_rounds < 2:
        raise InsufficientRounds(
            f"risk needs >= 2 rounds with non-empty subsets, got {n_rounds}")
    means = np.empty(len(samples))
    risks = np.empty(len(samples))
    for k, s in enumerate(samples):
        vals = np.fromiter(s.per_round_improvements.values(), dtype=float)
        means[k] = vals.mean()
        risks[k] = vals.std(ddof=0)
    lo, hi = t_confidence_interval(means)
    return ParetoPoint(
        alpha_s=alpha_s,
        improvement_mean=float(means.mean()),
        ci95_half_width=(hi - lo) / 2.0,
        risk=float(risks.mean()),
        n_rounds_used=n_rounds,
    )


def pareto_curve(
    rounds,
    records,
    grid: AlphaGrid,
    n_boot: int = 100,
    seed: int = 0,
    resample_full: bool = True,
    map_fn=map,
) -> list:
    """One ParetoPoint per grid boundary, ordered by alpha_s.

    Boundaries whose subset is unusable yield explicit gap points (NaN
    fields) rather than being dropped.
    """

    def one(alpha_s):
        try:
            return bootstrap_analysis(rounds, records, alpha_s, n_boot, seed,
                                      resample_full)
        except (EmptySubset, InsufficientRounds):
            return ParetoPoint(alpha_s, math.nan, math.nan, math.nan, 0)

    return list(map_fn(one, grid.boundaries))


def t_confidence_interval(samples, level: float = 0.95) -> tuple:
    """Symmetric Student-t interval around the sample mean.

    The standard error uses the population std (ddof=0) over the
    replicate means.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size < 2:
        raise TooFewSamples(f"need >= 2 samples, got {samples.size}")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    mean = float(samples.mean())
    se = float(samples.std(ddof=0) / math.sqrt(samples.size))
    t = float(stats.t.ppf(0.5 + level / 2.0, df=samples.size - 1))
    return mean - t * se, mean + t * se


def loess_smooth(points, span: float = 0.75) -> np.ndarray:
    """Degree-1 LOESS with tricube weights, evaluated at the input x.

    Classic local linear regression (Cleveland 1979): each point is fit
    from its int(span * n) nearest neighbors, weighted by the tricube of
    the scaled distance.  Returns an (n, 2) array in input order.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be an (n, 2) array-like")
    n = pts.shape[0]
    if n < 3:
        raise TooFewPoints(f"need >= 3 points, got {n}")
    if not 0.0 < span <= 1.0:
        raise ValueError("span must lie in (0, 1]")

    order = np.argsort(pts[:, 0], kind="stable")
    x, y = pts[order, 0], pts[order, 1]
    k = min(max(int(span * n), 2), n)

    fitted = np.empty(n)
    for i in range(n):
        # Smallest-width contiguous window of k points covering x[i];
        # earliest window wins ties, matching the classic sweep.
        j_lo, j_hi = max(0, i - k + 1), min(i, n - k)
        widths = [max(x[i] - x[j], x[j + k - 1] - x[i]) for j in range(j_lo, j_hi + 1)]
        j = j_lo + int(np.argmin(widths))
        xi, yi = x[j:j + k], y[j:j + k]
        width = widths[j - j_lo]
        if width > 0:
            w = np.clip(np.abs(xi - x[i]) / width, 0.0, 1.0)
            w = (1.0 - w ** 3) ** 3
        else:
            w = np.ones(k)
        sw = np.sqrt(w)
        design = np.column_stack([sw, sw * xi])
        beta, *_ = np.linalg.lstsq(design, sw * yi, rcond=None)
        fitted[i] = beta[0] + beta[1] * x[i]

    out = np.empty((n, 2))
    out[order, 0] = x
    out[order, 1] = fitted
    return out


def window_filter(rounds, from_date, to_date) -> list:
    """Rounds restricted to prediction sets inside the date window.

    The filtered rounds get the window end as their analysis cutoff so a
    full pipeline re-run (e.g. with a smaller grid) sees exactly the
    windowed data.  Rounds left without sets are dropped.
    """
    if from_date > to_date:
        raise ValueError("from_date must not exceed to_date")
    out = []
    for r in rounds:
        kept = tuple(p for p in r.prediction_sets
                     if from_date <= p.timestamp.date() <= to_date)
        if not kept:
            continue
        cutoff = min(to_date, r.end_date)
        cutoff = max(cutoff, r.start_date + timedelta(days=1))
        out.append(replace(r, prediction_sets=kept, analysis_cutoff=cutoff))
    if not out:
        raise EmptyWindow(f"no prediction sets between {from_date} and {to_date}")
    return out
