"""Prediction-round dataset: types, file ingestion, and baseline statistics.

The normalized on-disk layout is a pair of JSON-lines files
(``rounds.jsonl`` + ``predictions.jsonl``) or an equivalent CSV bundle
(``rounds.csv``, ``predictions.csv``, ``histograms.csv``, ``prices.csv``).
Records are validated on load and rejected, never silently dropped.
"""

import csv
import json
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .errors import (
    CrowdParetoError,
    EmptyRound,
    InsufficientHistory,
    MissingField,
    MissingFutures,
    NonMonotoneDates,
    NonPositivePrice,
    UnknownRoundReference,
)


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Dated series of daily closing prices, strictly increasing in date."""

    dates: tuple
    closes: tuple

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "closes", tuple(float(c) for c in self.closes))
        if len(self.dates) != len(self.closes):
            raise ValueError("dates and closes must have equal length")
        for c in self.closes:
            if not c > 0:
                raise NonPositivePrice(f"non-positive close {c}")
        for a, b in zip(self.dates, self.dates[1:]):
            if not a < b:
                raise NonMonotoneDates(f"dates not strictly increasing at {b}")

    def __len__(self) -> int:
        return len(self.dates)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PriceSeries)
            and self.dates == other.dates
            and self.closes == other.closes
        )

    @property
    def closes_array(self) -> np.ndarray:
        return np.asarray(self.closes, dtype=float)

    def through(self, cutoff: date) -> "PriceSeries":
        """Sub-series of observations dated on or before ``cutoff``."""
        pairs = [(d, c) for d, c in zip(self.dates, self.closes) if d <= cutoff]
        return PriceSeries(tuple(d for d, _ in pairs), tuple(c for _, c in pairs))

    def close_on_or_before(self, day: date) -> float | None:
        out = None
        for d, c in zip(self.dates, self.closes):
            if d > day:
                break
            out = c
        return out


@dataclass(frozen=True, eq=False)
class PredictionSet:
    """One forecaster interaction: belief before exposure, the social and
    price information shown, and the revised belief afterwards."""

    id: str
    round_id: str
    timestamp: datetime
    b_pre: float
    social_histogram: tuple
    price_history: PriceSeries
    b_post: float

    def __post_init__(self):
        object.__setattr__(self, "social_histogram", tuple(float(p) for p in self.social_histogram))
        ts = self.timestamp
        if ts.tzinfo is None:
            ts = ts.replace(tzinfo=timezone.utc)
        object.__setattr__(self, "timestamp", ts.astimezone(timezone.utc))
        if not self.b_pre > 0:
            raise NonPositivePrice(f"b_pre = {self.b_pre}", record_id=self.id)
        if not self.b_post > 0:
            raise NonPositivePrice(f"b_post = {self.b_post}", record_id=self.id)
        for p in self.social_histogram:
            if not p > 0:
                raise NonPositivePrice(f"histogram price = {p}", record_id=self.id)
        if len(self.price_history) and self.price_history.dates[-1] > self.timestamp.date():
            raise NonMonotoneDates("price history extends past the prediction timestamp",
                                   record_id=self.id)


@dataclass(frozen=True, eq=False)
class Round:
    """One prediction task: an asset, its realized final price, and the
    prediction sets collected over the round."""

    round_id: str
    asset_symbol: str
    start_date: date
    end_date: date
    ground_truth: float
    prediction_sets: tuple
    futures_series: PriceSeries | None = None
    analysis_cutoff: date | None = None

    def __post_init__(self):
        object.__setattr__(self, "prediction_sets", tuple(self.prediction_sets))
        if self.analysis_cutoff is None:
            object.__setattr__(self, "analysis_cutoff", self.end_date - timedelta(days=7))
        if not self.ground_truth > 0:
            raise NonPositivePrice(f"ground_truth = {self.ground_truth}", record_id=self.round_id)
        if not (self.start_date < self.analysis_cutoff <= self.end_date):
            raise NonMonotoneDates(
                f"require start < cutoff <= end, got {self.start_date} / "
                f"{self.analysis_cutoff} / {self.end_date}",
                record_id=self.round_id,
            )
        for pset in self.prediction_sets:
            if pset.round_id != self.round_id:
                raise UnknownRoundReference(
                    f"set {pset.id} references round {pset.round_id}", record_id=pset.id
                )

    @property
    def analysis_sets(self) -> tuple:
        """Sets inside the analysis window (timestamp on or before cutoff)."""
        return tuple(p for p in self.prediction_sets
                     if p.timestamp.date() <= self.analysis_cutoff)

    def merged_price_history(self, through: date | None = None) -> PriceSeries:
        """Union of the daily closes shown across the analysis-window sets.

        Later sets win on duplicate dates; the same asset is shown to all
        participants so duplicates agree in practice.
        """
        cutoff = through if through is not None else self.analysis_cutoff
        closes: dict = {}
        for pset in self.analysis_sets:
            for d, c in zip(pset.price_history.dates, pset.price_history.closes):
                if d <= cutoff:
                    closes[d] = c
        days = sorted(closes)
        return PriceSeries(tuple(days), tuple(closes[d] for d in days))


@dataclass(frozen=True)
class RoundSummary:
    round_id: str
    asset_symbol: str
    ground_truth: float
    n_prediction_sets: int
    price_change_pct: float
    linear_extrapolation_error_pct: float
    crowd_mean_error_pct: float
    futures_mean_error_pct: float | None


# ---------------------------------------------------------------------------
# baseline statistics


def crowd_mean_error(round_: Round, phase: str = "post") -> float:
    """Percent error of the crowd's mean prediction against ground truth."""
    if phase not in ("pre", "post"):
        raise ValueError(f"phase must be 'pre' or 'post', got {phase!r}")
    sets = round_.analysis_sets
    if not sets:
        raise EmptyRound("no prediction sets in the analysis window",
                         record_id=round_.round_id)
    preds = [p.b_post if phase == "post" else p.b_pre for p in sets]
    v = round_.ground_truth
    return abs(float(np.mean(preds)) - v) / v * 100.0


def linear_extrapolation_error(round_: Round) -> float:
    """Percent error of a static-slope extrapolation of the price history.

    Fits an ordinary least-squares line to the daily closes available at
    the analysis cutoff and extends it to the round's final day.
    """
    history = round_.merged_price_history()
    if len(history) < 2:
        raise InsufficientHistory("need >= 2 closes for a slope",
                                  record_id=round_.round_id)
    x = np.array([d.toordinal() for d in history.dates], dtype=float)
    x0 = x.mean()  # center for conditioning
    slope, intercept = np.polyfit(x - x0, history.closes_array, 1)
    extrapolated = intercept + slope * (round_.end_date.toordinal() - x0)
    v = round_.ground_truth
    return abs(extrapolated - v) / v * 100.0


def futures_mean_error(round_: Round) -> float:
    """Mean percent gap between the futures price and the realized price,
    over analysis-window days."""
    if round_.futures_series is None:
        raise MissingFutures("round has no futures series", record_id=round_.round_id)
    v = round_.ground_truth
    errs = [abs(c - v) / v
            for d, c in zip(round_.futures_series.dates, round_.futures_series.closes)
            if round_.start_date <= d <= round_.analysis_cutoff]
    if not errs:
        raise MissingFutures("futures series does not overlap the analysis window",
                             record_id=round_.round_id)
    return float(np.mean(errs)) * 100.0


def price_change(round_: Round) -> float:
    """Percent move of the asset from the round's start to its realized end."""
    history = round_.merged_price_history(through=round_.analysis_cutoff)
    start_close = history.close_on_or_before(round_.start_date)
    if start_close is None:
        raise InsufficientHistory("no close on or before the round start",
                                  record_id=round_.round_id)
    return abs(round_.ground_truth - start_close) / start_close * 100.0


def summarize_round(round_: Round) -> RoundSummary:
    try:
        fut = futures_mean_error(round_)
    except MissingFutures:
        fut = None
    return RoundSummary(
        round_id=round_.round_id,
        asset_symbol=round_.asset_symbol,
        ground_truth=round_.ground_truth,
        n_prediction_sets=len(round_.analysis_sets),
        price_change_pct=price_change(round_),
        linear_extrapolation_error_pct=linear_extrapolation_error(round_),
        crowd_mean_error_pct=crowd_mean_error(round_, "post"),
        futures_mean_error_pct=fut,
    )


def summarize(rounds) -> list:
    return [summarize_round(r) for r in rounds]


# ---------------------------------------------------------------------------
# ingestion

_PREDICTION_FIELDS = ("id", "round_id", "timestamp", "b_pre", "b_post",
                      "social_histogram", "price_history")
_ROUND_FIELDS = ("round_id", "asset_symbol", "start_date", "end_date", "ground_truth")


def _parse_date(value: str, record_id: str) -> date:
    try:
        return date.fromisoformat(value)
    except (TypeError, ValueError) as exc:
        raise NonMonotoneDates(f"bad date {value!r}: {exc}", record_id=record_id)


def _parse_timestamp(value: str, record_id: str) -> datetime:
    try:
        ts = datetime.fromisoformat(value.replace("Z", "+00:00"))
    except (TypeError, ValueError, AttributeError) as exc:
        raise NonMonotoneDates(f"bad timestamp {value!r}: {exc}", record_id=record_id)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _require(obj: dict, fields, record_id: str) -> None:
    for name in fields:
        if name not in obj:
            raise MissingField(f"missing field {name!r}", record_id=record_id)


def _series_from_json(rows, record_id: str) -> PriceSeries:
    dates, closes = [], []
    for row in rows:
        _require(row, ("date", "close"), record_id)
        dates.append(_parse_date(row["date"], record_id))
        closes.append(row["close"])
    try:
        return PriceSeries(tuple(dates), tuple(closes))
    except CrowdParetoError as exc:
        if exc.record_id is None:
            raise type(exc)(str(exc), record_id=record_id) from exc
        raise


def _prediction_from_json(obj: dict) -> PredictionSet:
    record_id = str(obj.get("id", "<missing id>"))
    _require(obj, _PREDICTION_FIELDS, record_id)
    return PredictionSet(
        id=str(obj["id"]),
        round_id=str(obj["round_id"]),
        timestamp=_parse_timestamp(obj["timestamp"], record_id),
        b_pre=float(obj["b_pre"]),
        social_histogram=tuple(float(p) for p in obj["social_histogram"]),
        price_history=_series_from_json(obj["price_history"], record_id),
        b_post=float(obj["b_post"]),
    )


def _round_from_json(obj: dict, prediction_sets) -> Round:
    record_id = str(obj.get("round_id", "<missing round_id>"))
    _require(obj, _ROUND_FIELDS, record_id)
    futures = None
    if obj.get("futures"):
        futures = _series_from_json(obj["futures"], record_id)
    cutoff = obj.get("analysis_cutoff")
    return Round(
        round_id=str(obj["round_id"]),
        asset_symbol=str(obj["asset_symbol"]),
        start_date=_parse_date(obj["start_date"], record_id),
        end_date=_parse_date(obj["end_date"], record_id),
        ground_truth=float(obj["ground_truth"]),
        prediction_sets=tuple(prediction_sets),
        futures_series=futures,
        analysis_cutoff=_parse_date(cutoff, record_id) if cutoff else None,
    )


def _read_jsonl(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise MissingField(f"invalid JSON on line {lineno}: {exc}",
                                   record_id=f"{path.name}:{lineno}")


def _load_jsonl_bundle(root: Path):
    rounds_path = root / "rounds.jsonl"
    preds_path = root / "predictions.jsonl"
    for p in (rounds_path, preds_path):
        if not p.exists():
            raise MissingField(f"missing dataset file {p.name}", record_id=str(root))
    round_objs = {}
    for obj in _read_jsonl(rounds_path):
        _require(obj, ("round_id",), "<missing round_id>")
        round_objs[str(obj["round_id"])] = obj
    by_round: dict = {rid: [] for rid in round_objs}
    for obj in _read_jsonl(preds_path):
        pset = _prediction_from_json(obj)
        if pset.round_id not in by_round:
            raise UnknownRoundReference(
                f"prediction {pset.id} references unknown round",
                record_id=pset.round_id)
        by_round[pset.round_id].append(pset)
    return [_round_from_json(obj, by_round[rid]) for rid, obj in round_objs.items()]


def _read_csv(path: Path):
    with open(path, newline="", encoding="utf-8") as fh:
        yield from csv.DictReader(fh)


def _load_csv_bundle(root: Path):
    names = ("rounds.csv", "predictions.csv", "histograms.csv", "prices.csv")
    for name in names:
        if not (root / name).exists():
            raise MissingField(f"missing dataset file {name}", record_id=str(root))

    histograms: dict = {}
    for row in _read_csv(root / "histograms.csv"):
        _require(row, ("id", "price"), row.get("id", "<missing id>"))
        histograms.setdefault(row["id"], []).append(float(row["price"]))

    prices: dict = {}
    futures: dict = {}
    for row in _read_csv(root / "prices.csv"):
        _require(row, ("id", "date", "close"), row.get("id", "<missing id>"))
        target = futures if row.get("kind") == "futures" else prices
        target.setdefault(row["id"], []).append(
            {"date": row["date"], "close": float(row["close"])})

    round_objs = {}
    for row in _read_csv(root / "rounds.csv"):
        _require(row, _ROUND_FIELDS, row.get("round_id", "<missing round_id>"))
        obj = dict(row)
        if not obj.get("analysis_cutoff"):
            obj.pop("analysis_cutoff", None)
        obj["ground_truth"] = float(obj["ground_truth"])
        obj["futures"] = futures.get(obj["round_id"], [])
        round_objs[str(obj["round_id"])] = obj

    by_round: dict = {rid: [] for rid in round_objs}
    for row in _read_csv(root / "predictions.csv"):
        obj = dict(row)
        obj["social_histogram"] = histograms.get(row.get("id", ""), [])
        obj["price_history"] = prices.get(row.get("id", ""), [])
        pset = _prediction_from_json(obj)
        if pset.round_id not in by_round:
            raise UnknownRoundReference(
                f"prediction {pset.id} references unknown round",
                record_id=pset.round_id)
        by_round[pset.round_id].append(pset)
    return [_round_from_json(obj, by_round[rid]) for rid, obj in round_objs.items()]


def load_dataset(path, format: str = "auto") -> list:
    """Load and validate a dataset directory.

    Raises the first violation encountered as a typed :class:`DatasetError`
    naming the offending record; use :func:`validate_dataset` to collect
    every violation instead.
    """
    root = Path(path)
    if format == "auto":
        format = "csv-bundle" if (root / "rounds.csv").exists() else "jsonl"
    if format == "jsonl":
        return _load_jsonl_bundle(root)
    if format in ("csv", "csv-bundle"):
        return _load_csv_bundle(root)
    raise ValueError(f"unknown dataset format {format!r}")


def validate_dataset(path, format: str = "auto") -> list:
    """Return a list of violations (empty when the dataset is clean).

    Loading stops at the first structural error per file pass, so the
    list contains at least one entry per failed pass.
    """
    violations = []
    try:
        load_dataset(path, format=format)
    except CrowdParetoError as exc:
        violations.append(exc)
    return violations


# ---------------------------------------------------------------------------
# serialization

def _timestamp_str(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def _series_to_json(series: PriceSeries) -> list:
    return [{"date": d.isoformat(), "close": c}
            for d, c in zip(series.dates, series.closes)]


def prediction_to_json(pset: PredictionSet) -> dict:
    return {
        "id": pset.id,
        "round_id": pset.round_id,
        "timestamp": _timestamp_str(pset.timestamp),
        "b_pre": pset.b_pre,
        "b_post": pset.b_post,
        "social_histogram": list(pset.social_histogram),
        "price_history": _series_to_json(pset.price_history),
    }


def round_to_json(round_: Round) -> dict:
    obj = {
        "round_id": round_.round_id,
        "asset_symbol": round_.asset_symbol,
        "start_date": round_.start_date.isoformat(),
        "end_date": round_.end_date.isoformat(),
        "ground_truth": round_.ground_truth,
        "analysis_cutoff": round_.analysis_cutoff.isoformat(),
    }
    if round_.futures_series is not None:
        obj["futures"] = _series_to_json(round_.futures_series)
    return obj


def save_dataset(rounds, path) -> None:
    """Write rounds to ``rounds.jsonl`` + ``predictions.jsonl`` under ``path``.

    Output is canonical (sorted keys, repr floats) so identical inputs
    produce byte-identical files.
    """
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "rounds.jsonl", "w", encoding="utf-8") as fh:
        for r in rounds:
            fh.write(json.dumps(round_to_json(r), sort_keys=True) + "\n")
    with open(root / "predictions.jsonl", "w", encoding="utf-8") as fh:
        for r in rounds:
            for pset in r.prediction_sets:
                fh.write(json.dumps(prediction_to_json(pset), sort_keys=True) + "\n")


def save_dataset_csv(rounds, path) -> None:
    """Write rounds as the four-file CSV bundle under ``path``."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)

    with open(root / "rounds.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["round_id", "asset_symbol", "start_date", "end_date",
                    "ground_truth", "analysis_cutoff"])
        for r in rounds:
            w.writerow([r.round_id, r.asset_symbol, r.start_date.isoformat(),
                        r.end_date.isoformat(), repr(r.ground_truth),
                        r.analysis_cutoff.isoformat()])

    with open(root / "predictions.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "round_id", "timestamp", "b_pre", "b_post"])
        for r in rounds:
            for p in r.prediction_sets:
                w.writerow([p.id, p.round_id, _timestamp_str(p.timestamp),
                            repr(p.b_pre), repr(p.b_post)])

    with open(root / "histograms.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "price"])
        for r in rounds:
            for p in r.prediction_sets:
                for price in p.social_histogram:
                    w.writerow([p.id, repr(price)])

    with open(root / "prices.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "kind", "date", "close"])
        for r in rounds:
            for p in r.prediction_sets:
                for d, c in zip(p.price_history.dates, p.price_history.closes):
                    w.writerow([p.id, "history", d.isoformat(), repr(c)])
            if r.futures_series is not None:
                for d, c in zip(r.futures_series.dates, r.futures_series.closes):
                    w.writerow([r.round_id, "futures", d.isoformat(), repr(c)])


def convert_dataset(src, dst, to_format: str = "csv-bundle") -> None:
    """Re-serialize a dataset directory into the other supported format."""
    rounds = load_dataset(src)
    if to_format in ("csv", "csv-bundle"):
        save_dataset_csv(rounds, dst)
    elif to_format == "jsonl":
        save_dataset(rounds, dst)
    else:
        raise ValueError(f"unknown dataset format {to_format!r}")
