import datetime as dt

import numpy as np
import pytest

from mmnoise import marketdata as md
from mmnoise.errors import DataError, DuplicateKeyError, OrderingError, ParseError

HEADER = ",".join(md.CHAIN_COLUMNS)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_chain_sorts_rows(tmp_path):
    p = write(tmp_path, "c.csv", HEADER + "\n"
              "30,105,1.5,1.4,1.6,10,20\n"
              "5,100,2.0,,,3,4\n"
              "30,95,6.1,6.0,6.2,1,0\n")
    chain = md.load_chain(p, 100.0, 0.04)
    assert len(chain) == 3
    assert [q.key for q in chain.quotes] == [(5, 100.0), (30, 95.0), (30, 105.0)]
    assert np.isnan(chain.quotes[0].bid)
    assert chain.quotes[1].moneyness == pytest.approx(0.95)
    assert chain.daily_rate == pytest.approx(0.04 / 252)


def test_header_only_gives_empty_chain(tmp_path):
    chain = md.load_chain(write(tmp_path, "c.csv", HEADER + "\n"), 100.0, 0.0)
    assert len(chain) == 0


def test_bad_strike_reports_line(tmp_path):
    p = write(tmp_path, "c.csv", HEADER + "\n30,100,1,,,1,1\n30,abc,1,,,1,1\n")
    with pytest.raises(ParseError) as info:
        md.load_chain(p, 100.0, 0.0)
    assert info.value.line == 3
    assert "line 3" in str(info.value)


def test_wrong_header(tmp_path):
    with pytest.raises(ParseError):
        md.load_chain(write(tmp_path, "c.csv", "a,b\n"), 100.0, 0.0)


def test_duplicate_key_rejected(tmp_path):
    p = write(tmp_path, "c.csv", HEADER + "\n30,100,1,,,1,1\n30,100,2,,,1,1\n")
    with pytest.raises(DuplicateKeyError):
        md.load_chain(p, 100.0, 0.0)


def test_missing_file_names_path(tmp_path):
    with pytest.raises(FileNotFoundError, match="nope.csv"):
        md.load_chain(tmp_path / "nope.csv", 100.0, 0.0)


def test_chain_round_trip(tmp_path):
    quotes = [md.make_quote(5, 100.0, 2.25, 100.0, 2.2, 2.3, 7, 9),
              md.make_quote(40, 110.0, 0.1 + 0.2, 100.0)]
    chain = md.OptionChain("X", dt.date(2025, 4, 21), 100.0, 0.04, tuple(quotes))
    md.write_chain(chain, tmp_path / "c.csv")
    back = md.load_chain(tmp_path / "c.csv", 100.0, 0.04, dt.date(2025, 4, 21), "X")
    assert back == chain


@pytest.mark.parametrize("price,vol,oi,kept", [
    (0.0, 5, 9, False),
    (12.5, 0, 0, False),
    (12.5, 0, 3, True),
])
def test_clean_chain_filters(price, vol, oi, kept):
    q = md.make_quote(30, 100.0, price, 100.0, volume=vol, open_interest=oi)
    chain = md.OptionChain("", None, 100.0, 0.0, (q,))
    assert (len(md.clean_chain(chain)) == 1) is kept


def test_split_by_horizon():
    quotes = tuple(md.make_quote(t, 100.0, 1.0, 100.0) for t in (5, 30, 31))
    chain = md.OptionChain("", None, 100.0, 0.0, quotes)
    short, long = md.split_by_horizon(chain, 30)
    assert [q.expiry_days for q in short.quotes] == [5, 30]
    assert [q.expiry_days for q in long.quotes] == [31]
    short, long = md.split_by_horizon(chain, 1000)
    assert len(long) == 0 and len(short) == 3


def test_split_is_partition(rng):
    quotes = tuple(md.make_quote(int(t), 100.0 + i, 1.0, 100.0)
                   for i, t in enumerate(rng.integers(1, 400, 60)))
    chain = md.OptionChain("", None, 100.0, 0.0, quotes)
    for b in (1, 17, 200, 399):
        short, long = md.split_by_horizon(chain, b)
        assert sorted(short.quotes + long.quotes, key=lambda q: q.key) == list(chain.quotes)
        assert not set(short.quotes) & set(long.quotes)


def test_clean_is_idempotent(rng):
    quotes = tuple(md.make_quote(30, 50.0 + i, float(rng.choice([0.0, 1.0])), 100.0,
                                 volume=int(rng.integers(0, 2)), open_interest=int(rng.integers(0, 2)))
                   for i in range(50))
    chain = md.OptionChain("", None, 100.0, 0.0, quotes)
    once = md.clean_chain(chain)
    assert md.clean_chain(once) == once


def test_load_returns_window(tmp_path):
    start = dt.date(2021, 1, 1)
    lines = ["date,return"] + [f"{start + dt.timedelta(days=i)},{0.001 * i}" for i in range(1008)]
    s = md.load_returns(write(tmp_path, "r.csv", "\n".join(lines) + "\n"))
    assert s.window == 1008
    assert md.load_returns(tmp_path / "r.csv", window=10).returns[0] == pytest.approx(0.998)


def test_load_returns_ordering_error(tmp_path):
    p = write(tmp_path, "r.csv", "date,return\n2024-01-03,0.1\n2024-01-02,0.2\n")
    with pytest.raises(OrderingError):
        md.load_returns(p)


def test_prices_become_arithmetic_returns(tmp_path):
    p = write(tmp_path, "p.csv", "date,price\n2024-01-02,100\n2024-01-03,110\n2024-01-04,99\n")
    s = md.load_returns(p)
    assert s.window == 2
    np.testing.assert_allclose(s.returns, [0.1, -0.1], rtol=1e-15)
    assert s.dates[0] == dt.date(2024, 1, 3)


def test_returns_round_trip(tmp_path, rng):
    s = md.ReturnSeries.from_returns(rng.normal(0, 0.01, 50))
    md.write_returns(s, tmp_path / "r.csv")
    back = md.load_returns(tmp_path / "r.csv")
    assert back.dates == s.dates
    assert np.array_equal(back.returns, s.returns)


def test_negative_spot_rejected():
    with pytest.raises(DataError):
        md.OptionChain("", None, -1.0, 0.0, ())
