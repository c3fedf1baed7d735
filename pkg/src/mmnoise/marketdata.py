"""Option-chain and return-history ingestion.

Chain files are CSV with the exact header::

    expiry_days,strike,last_price,bid,ask,volume,open_interest

Spot and the annual riskless rate are not part of the file and are passed in
by the caller. Return files are ``date,return`` or ``date,price``.
"""
from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, DuplicateKeyError, OrderingError, ParseError

CHAIN_COLUMNS = ("expiry_days", "strike", "last_price", "bid", "ask", "volume", "open_interest")
TRADING_DAYS_PER_YEAR = 252


@dataclass(frozen=True)
class OptionQuote:
    expiry_days: int
    strike: float
    last_price: float
    bid: float
    ask: float
    volume: int
    open_interest: int
    moneyness: float = math.nan

    @property
    def key(self) -> tuple[int, float]:
        return (self.expiry_days, self.strike)


@dataclass(frozen=True)
class OptionChain:
    symbol: str
    quote_date: dt.date | None
    spot: float
    annual_rate: float
    quotes: tuple[OptionQuote, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.spot > 0:
            raise DataError(f"spot must be positive, got {self.spot}")
        if not self.annual_rate >= 0:
            raise DataError(f"annual_rate must be nonnegative, got {self.annual_rate}")
        quotes = tuple(sorted(self.quotes, key=lambda q: q.key))
        for a, b in zip(quotes, quotes[1:]):
            if a.key == b.key:
                raise DuplicateKeyError(f"duplicate quote for (expiry_days, strike) = {a.key}")
        object.__setattr__(self, "quotes", quotes)

    def __len__(self):
        return len(self.quotes)

    def __iter__(self):
        return iter(self.quotes)

    @property
    def daily_rate(self) -> float:
        return daily_rate(self.annual_rate)

    def with_quotes(self, quotes: Iterable[OptionQuote]) -> "OptionChain":
        return replace(self, quotes=tuple(quotes))

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(q, name) for q in self.quotes], dtype=float)


@dataclass(frozen=True)
class ReturnSeries:
    dates: tuple[dt.date, ...]
    returns: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.returns, dtype=float)
        r.setflags(write=False)
        object.__setattr__(self, "returns", r)
        object.__setattr__(self, "dates", tuple(self.dates))
        if len(self.dates) != r.size:
            raise DataError("dates and returns differ in length")
        for i in range(1, len(self.dates)):
            if not self.dates[i] > self.dates[i - 1]:
                raise OrderingError(
                    f"dates not strictly increasing at position {i}: "
                    f"{self.dates[i - 1]} then {self.dates[i]}"
                )

    @property
    def window(self) -> int:
        return self.returns.size

    def tail(self, window: int) -> "ReturnSeries":
        """Last ``window`` observations."""
        if window > self.window:
            raise DataError(f"requested window {window} exceeds series length {self.window}")
        return ReturnSeries(self.dates[-window:], self.returns[-window:])

    @classmethod
    def from_returns(cls, returns: Sequence[float], start: dt.date = dt.date(2000, 1, 3)):
        """Wrap a bare array, stamping consecutive calendar dates."""
        returns = np.asarray(returns, dtype=float)
        dates = tuple(start + dt.timedelta(days=i) for i in range(returns.size))
        return cls(dates, returns)


def daily_rate(annual_rate: float) -> float:
    """Convert an annual simple rate to a per-trading-day rate."""
    return annual_rate / TRADING_DAYS_PER_YEAR


def _parse_float(text, name, line, allow_empty=False):
    text = text.strip()
    if text == "" and allow_empty:
        return math.nan
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"column {name!r}: cannot parse {text!r} as a number", line) from None
    if not math.isfinite(value):
        raise ParseError(f"column {name!r}: non-finite value {text!r}", line)
    return value


def _parse_count(text, name, line):
    value = _parse_float(text, name, line)
    if value < 0 or value != int(value):
        raise ParseError(f"column {name!r}: expected a nonnegative integer, got {text!r}", line)
    return int(value)


def make_quote(expiry_days, strike, last_price, spot, bid=math.nan, ask=math.nan,
               volume=1, open_interest=1) -> OptionQuote:
    return OptionQuote(
        expiry_days=int(expiry_days),
        strike=float(strike),
        last_price=float(last_price),
        bid=float(bid),
        ask=float(ask),
        volume=int(volume),
        open_interest=int(open_interest),
        moneyness=float(strike) / spot,
    )


def load_chain(path, spot: float, annual_rate: float, quote_date: dt.date | None = None,
               symbol: str = "") -> OptionChain:
    """Read a chain CSV. Raises ParseError naming the offending line."""
    path = Path(path)
    if not spot > 0:
        raise DataError(f"spot must be positive, got {spot}")
    quotes = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file, header required", 1) from None
        header = [h.strip() for h in header]
        if tuple(header) != CHAIN_COLUMNS:
            raise ParseError(f"header must be {','.join(CHAIN_COLUMNS)}, got {','.join(header)}", 1)
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(CHAIN_COLUMNS):
                raise ParseError(f"expected {len(CHAIN_COLUMNS)} fields, got {len(row)}", line)
            expiry = _parse_count(row[0], "expiry_days", line)
            strike = _parse_float(row[1], "strike", line)
            price = _parse_float(row[2], "last_price", line)
            bid = _parse_float(row[3], "bid", line, allow_empty=True)
            ask = _parse_float(row[4], "ask", line, allow_empty=True)
            volume = _parse_count(row[5], "volume", line)
            oi = _parse_count(row[6], "open_interest", line)
            if expiry < 1:
                raise ParseError(f"expiry_days must be >= 1, got {expiry}", line)
            if strike <= 0:
                raise ParseError(f"strike must be positive, got {strike}", line)
            if price < 0:
                raise ParseError(f"last_price must be nonnegative, got {price}", line)
            quotes.append(make_quote(expiry, strike, price, spot, bid, ask, volume, oi))
    return OptionChain(symbol=symbol, quote_date=quote_date, spot=spot,
                       annual_rate=annual_rate, quotes=tuple(quotes))


def write_chain(chain: OptionChain, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CHAIN_COLUMNS)
        for q in chain.quotes:
            w.writerow([q.expiry_days, repr(q.strike), repr(q.last_price),
                        "" if math.isnan(q.bid) else repr(q.bid),
                        "" if math.isnan(q.ask) else repr(q.ask),
                        q.volume, q.open_interest])


def clean_chain(chain: OptionChain) -> OptionChain:
    """Drop zero-price quotes and quotes with neither volume nor open interest."""
    kept = [q for q in chain.quotes
            if q.last_price > 0 and (q.volume > 0 or q.open_interest > 0)]
    return chain.with_quotes(kept)


def split_by_horizon(chain: OptionChain, boundary_days: int) -> tuple[OptionChain, OptionChain]:
    """Partition into (expiry <= boundary, expiry > boundary)."""
    if boundary_days < 1:
        raise DataError(f"boundary_days must be >= 1, got {boundary_days}")
    short = [q for q in chain.quotes if q.expiry_days <= boundary_days]
    long = [q for q in chain.quotes if q.expiry_days > boundary_days]
    return chain.with_quotes(short), chain.with_quotes(long)


def load_returns(path, kind: str | None = None, window: int | None = None) -> ReturnSeries:
    """Read ``date,return`` or ``date,price`` CSV.

    ``kind`` is ``"returns"`` or ``"prices"``; by default it is taken from the
    second header column. Prices are converted to arithmetic returns
    ``P[k]/P[k-1] - 1`` stamped with the later date. If ``window`` is given the
    last ``window`` returns are kept.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file, header required", 1) from None
        if len(header) != 2 or header[0] != "date" or header[1] not in ("return", "price"):
            raise ParseError(f"header must be date,return or date,price, got {','.join(header)}", 1)
        if kind is None:
            kind = "returns" if header[1] == "return" else "prices"
        if kind not in ("returns", "prices"):
            raise DataError(f"kind must be 'returns' or 'prices', got {kind!r}")
        dates, values = [], []
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 fields, got {len(row)}", line)
            try:
                day = dt.date.fromisoformat(row[0].strip())
            except ValueError:
                raise ParseError(f"cannot parse date {row[0]!r}", line) from None
            dates.append(day)
            values.append(_parse_float(row[1], header[1], line))

    values = np.array(values, dtype=float)
    if kind == "prices":
        if np.any(values <= 0):
            raise DataError("prices must be positive")
        # validate ordering on the raw dates before differencing
        ReturnSeries(tuple(dates), values)
        values = values[1:] / values[:-1] - 1.0
        dates = dates[1:]
    series = ReturnSeries(tuple(dates), values)
    if window is not None:
        series = series.tail(window)
    return series


def write_returns(series: ReturnSeries, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "return"])
        for d, r in zip(series.dates, series.returns):
            w.writerow([d.isoformat(), repr(float(r))])
