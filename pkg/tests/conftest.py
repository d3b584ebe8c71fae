from datetime import date, datetime, timedelta, timezone

import pytest

from crowdpareto.dataset import PredictionSet, PriceSeries, Round

ROUND_START = date(2020, 3, 2)
ROUND_END = date(2020, 3, 23)
CUTOFF = ROUND_END - timedelta(days=7)


def daily_series(closes, end=CUTOFF):
    """Consecutive daily closes ending on ``end``."""
    n = len(closes)
    dates = [end - timedelta(days=n - 1 - i) for i in range(n)]
    return PriceSeries(tuple(dates), tuple(closes))


def make_pset(id="s1", round_id="r1", ts=None, b_pre=100.0, hist=(100.0,),
              closes=(100.0, 100.0), b_post=100.0):
    ts = ts or datetime(2020, 3, 10, 12, 0, tzinfo=timezone.utc)
    return PredictionSet(
        id=id, round_id=round_id, timestamp=ts, b_pre=b_pre,
        social_histogram=tuple(hist),
        price_history=daily_series(closes, end=ts.date()),
        b_post=b_post,
    )


def make_round(sets, round_id="r1", v=100.0, start=ROUND_START, end=ROUND_END,
               futures=None, cutoff=None):
    return Round(
        round_id=round_id, asset_symbol="SPX", start_date=start, end_date=end,
        ground_truth=v, prediction_sets=tuple(sets), futures_series=futures,
        analysis_cutoff=cutoff,
    )


@pytest.fixture
def two_rounds():
    """Two small rounds, five prediction sets, with futures on round 1."""
    ts = lambda day, hour: datetime(2020, 3, day, hour, tzinfo=timezone.utc)
    r1_sets = [
        make_pset("a1", "r1", ts(4, 10), 100.0, (95.0, 105.0), (98.0, 99.0, 100.0), 103.0),
        make_pset("a2", "r1", ts(9, 11), 104.0, (103.0,), (99.0, 100.0, 103.5), 102.0),
        make_pset("a3", "r1", ts(13, 9), 99.5, (103.0, 102.0, 101.0), (100.0, 103.5, 99.0), 101.0),
    ]
    futures = daily_series([101.0, 102.5, 101.5], end=date(2020, 3, 12))
    r1 = make_round(r1_sets, "r1", v=102.0, futures=futures)
    r2_sets = [
        make_pset("b1", "r2", ts(5, 10), 50.0, (52.0,), (49.0, 49.5, 50.0, 50.5), 51.0),
        make_pset("b2", "r2", ts(10, 15), 52.0, (51.0, 50.0), (50.5, 51.5), 50.5),
    ]
    r2 = make_round(r2_sets, "r2", v=51.0)
    return [r1, r2]
