import json
from datetime import date, datetime, timedelta, timezone

import pytest

from crowdpareto import (
    crowd_mean_error,
    futures_mean_error,
    linear_extrapolation_error,
    load_dataset,
    price_change,
    save_dataset,
    summarize,
    validate_dataset,
)
from crowdpareto.dataset import PriceSeries, Round, convert_dataset, save_dataset_csv
from crowdpareto.errors import (
    EmptyRound,
    InsufficientHistory,
    MissingField,
    MissingFutures,
    NonMonotoneDates,
    NonPositivePrice,
    UnknownRoundReference,
)

from conftest import CUTOFF, ROUND_END, ROUND_START, daily_series, make_pset, make_round


def _rounds_equal(a, b):
    assert a.round_id == b.round_id
    assert a.asset_symbol == b.asset_symbol
    assert a.start_date == b.start_date and a.end_date == b.end_date
    assert a.ground_truth == b.ground_truth
    assert a.analysis_cutoff == b.analysis_cutoff
    assert (a.futures_series is None) == (b.futures_series is None)
    if a.futures_series is not None:
        assert a.futures_series == b.futures_series
    assert len(a.prediction_sets) == len(b.prediction_sets)
    for pa, pb in zip(a.prediction_sets, b.prediction_sets):
        assert pa.id == pb.id and pa.round_id == pb.round_id
        assert pa.timestamp == pb.timestamp
        assert pa.b_pre == pb.b_pre and pa.b_post == pb.b_post
        assert pa.social_histogram == pb.social_histogram
        assert pa.price_history == pb.price_history


class TestIngestion:
    def test_jsonl_roundtrip_counts(self, two_rounds, tmp_path):
        save_dataset(two_rounds, tmp_path)
        loaded = load_dataset(tmp_path)
        assert len(loaded) == 2
        assert sum(len(r.prediction_sets) for r in loaded) == 5

    def test_roundtrip_is_lossless(self, two_rounds, tmp_path):
        save_dataset(two_rounds, tmp_path / "a")
        loaded = load_dataset(tmp_path / "a")
        for orig, back in zip(two_rounds, loaded):
            _rounds_equal(orig, back)
        # a second serialize pass is byte-identical
        save_dataset(loaded, tmp_path / "b")
        for name in ("rounds.jsonl", "predictions.jsonl"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_csv_bundle_roundtrip(self, two_rounds, tmp_path):
        save_dataset_csv(two_rounds, tmp_path)
        loaded = load_dataset(tmp_path, format="csv-bundle")
        for orig, back in zip(two_rounds, loaded):
            _rounds_equal(orig, back)

    def test_convert_roundtrip(self, two_rounds, tmp_path):
        save_dataset(two_rounds, tmp_path / "jl")
        convert_dataset(tmp_path / "jl", tmp_path / "csv", to_format="csv-bundle")
        convert_dataset(tmp_path / "csv", tmp_path / "jl2", to_format="jsonl")
        for name in ("rounds.jsonl", "predictions.jsonl"):
            assert (tmp_path / "jl" / name).read_bytes() == (tmp_path / "jl2" / name).read_bytes()

    def test_format_autodetect(self, two_rounds, tmp_path):
        save_dataset_csv(two_rounds, tmp_path)
        assert len(load_dataset(tmp_path)) == 2

    def test_nonpositive_price_rejected(self, two_rounds, tmp_path):
        save_dataset(two_rounds, tmp_path)
        lines = (tmp_path / "predictions.jsonl").read_text().splitlines()
        bad = json.loads(lines[0])
        bad["b_pre"] = 0.0
        lines[0] = json.dumps(bad, sort_keys=True)
        (tmp_path / "predictions.jsonl").write_text("\n".join(lines) + "\n")
        with pytest.raises(NonPositivePrice) as err:
            load_dataset(tmp_path)
        assert err.value.record_id == bad["id"]

    def test_unknown_round_reference(self, two_rounds, tmp_path):
        save_dataset(two_rounds, tmp_path)
        lines = (tmp_path / "predictions.jsonl").read_text().splitlines()
        bad = json.loads(lines[0])
        bad["round_id"] = "r99"
        lines[0] = json.dumps(bad, sort_keys=True)
        (tmp_path / "predictions.jsonl").write_text("\n".join(lines) + "\n")
        with pytest.raises(UnknownRoundReference) as err:
            load_dataset(tmp_path)
        assert err.value.record_id == "r99"

    def test_missing_field(self, two_rounds, tmp_path):
        save_dataset(two_rounds, tmp_path)
        lines = (tmp_path / "predictions.jsonl").read_text().splitlines()
        bad = json.loads(lines[1])
        del bad["b_post"]
        lines[1] = json.dumps(bad, sort_keys=True)
        (tmp_path / "predictions.jsonl").write_text("\n".join(lines) + "\n")
        with pytest.raises(MissingField) as err:
            load_dataset(tmp_path)
        assert err.value.record_id == bad["id"]

    def test_nonmonotone_history_rejected(self):
        with pytest.raises(NonMonotoneDates):
            PriceSeries((date(2020, 1, 2), date(2020, 1, 1)), (100.0, 101.0))

    def test_history_after_timestamp_rejected(self):
        from crowdpareto.dataset import PredictionSet
        ts = datetime(2020, 3, 10, tzinfo=timezone.utc)
        series = daily_series((100.0, 101.0), end=ts.date() + timedelta(days=1))
        with pytest.raises(NonMonotoneDates):
            PredictionSet("x", "r1", ts, 100.0, (), series, 100.0)

    def test_validate_collects(self, two_rounds, tmp_path):
        save_dataset(two_rounds, tmp_path)
        assert validate_dataset(tmp_path) == []
        (tmp_path / "predictions.jsonl").write_text("not json\n")
        assert len(validate_dataset(tmp_path)) == 1


class TestCrowdMeanError:
    def test_exact_prediction(self):
        r = make_round([make_pset(b_post=102.0)], v=102.0)
        assert crowd_mean_error(r, "post") == 0.0

    def test_symmetric_pair(self):
        v = 102.0
        r = make_round([
            make_pset("s1", b_post=v * 0.9),
            make_pset("s2", b_post=v * 1.1),
        ], v=v)
        assert crowd_mean_error(r, "post") < 1e-9

    def test_permutation_invariant(self, two_rounds):
        r = two_rounds[0]
        shuffled = make_round(r.prediction_sets[::-1], "r1", v=r.ground_truth,
                              futures=r.futures_series)
        assert crowd_mean_error(r) == crowd_mean_error(shuffled)

    def test_pre_phase(self):
        r = make_round([make_pset(b_pre=110.0, b_post=100.0)], v=100.0)
        assert crowd_mean_error(r, "pre") == pytest.approx(10.0, rel=1e-12)
        assert crowd_mean_error(r, "post") == 0.0

    def test_empty_round(self):
        late = datetime(2020, 3, 22, tzinfo=timezone.utc)  # past the cutoff
        r = make_round([make_pset(ts=late)])
        with pytest.raises(EmptyRound):
            crowd_mean_error(r)

    def test_window_never_increases_count(self, two_rounds):
        for r in two_rounds:
            assert len(r.analysis_sets) <= len(r.prediction_sets)


class TestLinearExtrapolation:
    def test_constant_series(self):
        r = make_round([make_pset(closes=(100.0,) * 30)], v=100.0)
        assert linear_extrapolation_error(r) == pytest.approx(0.0, abs=1e-9)

    def test_exact_linear_series(self):
        # closes on a known line; the truth sits on its extension
        ts = datetime(2020, 3, 16, 12, 0, tzinfo=timezone.utc)
        n = 120
        closes = [500.0 + 2.0 * i for i in range(n)]
        pset = make_pset(ts=ts, closes=closes)
        last_day = pset.price_history.dates[-1]
        v = closes[-1] + 2.0 * (ROUND_END - last_day).days
        r = make_round([pset], v=v)
        assert linear_extrapolation_error(r) <= 1e-9

    def test_insufficient_history(self):
        r = make_round([make_pset(closes=(100.0,))])
        with pytest.raises(InsufficientHistory):
            linear_extrapolation_error(r)


class TestFuturesError:
    def test_identical_to_truth(self):
        fut = daily_series([100.0] * 5, end=CUTOFF)
        r = make_round([make_pset()], v=100.0, futures=fut)
        assert futures_mean_error(r) == 0.0

    def test_two_day_series(self):
        v = 100.0
        fut = daily_series([v * 1.02, v * 0.98], end=CUTOFF)
        r = make_round([make_pset()], v=v, futures=fut)
        assert futures_mean_error(r) == pytest.approx(2.0, rel=1e-12)

    def test_missing_futures(self):
        r = make_round([make_pset()])
        with pytest.raises(MissingFutures):
            futures_mean_error(r)

    def test_no_overlap(self):
        fut = daily_series([100.0], end=ROUND_START - timedelta(days=2))
        r = make_round([make_pset()], futures=fut)
        with pytest.raises(MissingFutures):
            futures_mean_error(r)


class TestPriceChange:
    def test_zero_change(self):
        closes = [100.0] * 30
        r = make_round([make_pset(closes=closes)], v=100.0)
        assert price_change(r) == 0.0

    def test_arithmetic(self):
        # flat at 100 through the start, any later values
        ts = datetime(2020, 3, 10, tzinfo=timezone.utc)
        closes = [100.0] * 15
        r = make_round([make_pset(ts=ts, closes=closes)], v=111.03)
        assert price_change(r) == pytest.approx(11.03, rel=1e-12)

    def test_no_start_coverage(self):
        ts = datetime(2020, 3, 10, tzinfo=timezone.utc)
        r = make_round([make_pset(ts=ts, closes=(100.0, 101.0))])  # starts 2020-03-09
        with pytest.raises(InsufficientHistory):
            price_change(r)


class TestSummaries:
    def test_summarize_fields(self, two_rounds):
        rows = summarize(two_rounds)
        assert [s.round_id for s in rows] == ["r1", "r2"]
        assert rows[0].n_prediction_sets == 3
        assert rows[0].futures_mean_error_pct is not None
        assert rows[1].futures_mean_error_pct is None  # absence, not zero
        for s in rows:
            assert s.price_change_pct >= 0
            assert s.crowd_mean_error_pct >= 0
            assert s.linear_extrapolation_error_pct >= 0

    def test_round_invariants(self):
        with pytest.raises(NonPositivePrice):
            make_round([make_pset()], v=0.0)
        with pytest.raises(NonMonotoneDates):
            Round("r1", "SPX", ROUND_START, ROUND_END, 100.0, (),
                  analysis_cutoff=ROUND_START)
