"""In-process continuous-double-auction matching engine.

Price-time priority, integer tick prices, integer millisecond virtual time.
Messages are processed synchronously in submission order; there is no
wall-clock pacing, latency or timeout behaviour, so runs are deterministic.
Crossing limit orders execute against the contra side first and any residual
rests at the original limit price.  Market orders walk the contra side and
silently discard unfilled remainder; a market order into an empty contra side
is dropped.
"""

from __future__ import annotations

from bisect import insort
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .util import read_lines_skipping_meta, write_meta_header

BID = "bid"
ASK = "ask"


def opposite(side: str) -> str:
    return ASK if side == BID else BID


@dataclass
class Order:
    id: int
    side: str
    price: int
    volume: int
    entry_seq: int
    timestamp: int


class Trade(NamedTuple):
    timestamp: int
    price: int
    volume: int
    aggressor_side: str
    maker_order_id: int
    taker_ref: int


class QuoteRecord(NamedTuple):
    timestamp: int
    bid: int
    bid_vol: int
    ask: int
    ask_vol: int


class DepthRecord(NamedTuple):
    timestamp: int
    bid_depth: int
    ask_depth: int


class BookEvent(NamedTuple):
    timestamp: int
    kind: str  # new | cancel | execute
    order_id: int
    side: str
    price: int
    volume: int


class DropRecord(NamedTuple):
    timestamp: int
    action: str
    side: str


class MarketDataLog:
    """Engine output feed: trades, post-message quotes, raw book events."""

    def __init__(self):
        self.trades: list[Trade] = []
        self.quotes: list[QuoteRecord] = []
        self.depths: list[DepthRecord] = []  # full-depth totals, parallel to quotes
        self.book_events: list[BookEvent] = []
        self.drops: list[DropRecord] = []

    def write_trades_csv(self, path, meta: dict | None = None) -> None:
        with open(path, "w") as fh:
            write_meta_header(fh, meta or {})
            fh.write("timestamp_ms,price,volume,aggressor_side\n")
            for tr in self.trades:
                fh.write(f"{tr.timestamp},{tr.price},{tr.volume},{tr.aggressor_side}\n")

    def write_quotes_csv(self, path, meta: dict | None = None) -> None:
        with open(path, "w") as fh:
            write_meta_header(fh, meta or {})
            fh.write("timestamp_ms,bid,bid_vol,ask,ask_vol\n")
            for q in self.quotes:
                fh.write(f"{q.timestamp},{q.bid},{q.bid_vol},{q.ask},{q.ask_vol}\n")

    @staticmethod
    def read_trades_csv(path) -> list[Trade]:
        with open(path) as fh:
            _, rows = read_lines_skipping_meta(fh)
        out = []
        for row in rows[1:]:
            ts, price, vol, side = row.split(",")
            out.append(Trade(int(ts), int(price), int(vol), side, -1, -1))
        return out

    @staticmethod
    def read_quotes_csv(path) -> list[QuoteRecord]:
        with open(path) as fh:
            _, rows = read_lines_skipping_meta(fh)
        return [QuoteRecord(*(int(x) for x in row.split(","))) for row in rows[1:]]


class _BookSide:
    """One side: FIFO queues per price level plus a sorted price index."""

    def __init__(self, side: str):
        self.side = side
        self.levels: dict[int, deque[Order]] = {}
        self.prices: list[int] = []  # ascending
        self.depth = 0

    def __len__(self) -> int:
        return sum(len(q) for q in self.levels.values())

    def best(self) -> int:
        if not self.prices:
            return 0
        return self.prices[-1] if self.side == BID else self.prices[0]

    def best_volume(self) -> int:
        best = self.best()
        return sum(o.volume for o in self.levels[best]) if best else 0

    def add(self, order: Order) -> None:
        queue = self.levels.get(order.price)
        if queue is None:
            self.levels[order.price] = deque([order])
            insort(self.prices, order.price)
        else:
            queue.append(order)
        self.depth += order.volume

    def remove(self, order: Order) -> None:
        queue = self.levels[order.price]
        queue.remove(order)
        self.depth -= order.volume
        if not queue:
            del self.levels[order.price]
            self.prices.remove(order.price)

    def pop_front_at_best(self) -> None:
        best = self.best()
        queue = self.levels[best]
        queue.popleft()
        if not queue:
            del self.levels[best]
            self.prices.remove(best)

    def iter_price_priority(self):
        ordered = reversed(self.prices) if self.side == BID else iter(self.prices)
        for price in list(ordered):
            yield from self.levels[price]


class LimitOrderBook:
    """Single-owner matching engine state machine with an attached data log."""

    def __init__(self, initial_reference_price: int = 1000):
        self.bids = _BookSide(BID)
        self.asks = _BookSide(ASK)
        # remembered even when a side empties; start level per config
        self.last_best_bid = initial_reference_price
        self.last_best_ask = initial_reference_price
        self.log = MarketDataLog()
        self._orders: dict[int, Order] = {}
        self._next_ref = 1
        self._next_entry_seq = 1

    # -- internals ---------------------------------------------------------

    def _side(self, side: str) -> _BookSide:
        return self.bids if side == BID else self.asks

    def _new_ref(self) -> int:
        ref = self._next_ref
        self._next_ref += 1
        return ref

    def _emit_quote(self, timestamp: int) -> None:
        bb, bbv, ba, bav = self.best_quotes()
        if bb:
            self.last_best_bid = bb
        if ba:
            self.last_best_ask = ba
        self.log.quotes.append(QuoteRecord(timestamp, bb, bbv, ba, bav))
        self.log.depths.append(DepthRecord(timestamp, self.bids.depth, self.asks.depth))

    def _match(self, taker_side: str, limit_price: int | None, volume: int,
               timestamp: int, taker_ref: int) -> tuple[list[Trade], int]:
        """Walk the contra side in price-time priority; returns (trades, residual)."""
        contra = self._side(opposite(taker_side))
        trades: list[Trade] = []
        remaining = volume
        while remaining > 0:
            best = contra.best()
            if best == 0:
                break
            if limit_price is not None:
                crosses = best <= limit_price if taker_side == BID else best >= limit_price
                if not crosses:
                    break
            maker = contra.levels[best][0]
            qty = min(remaining, maker.volume)
            trades.append(Trade(timestamp, maker.price, qty, taker_side, maker.id, taker_ref))
            self.log.book_events.append(
                BookEvent(timestamp, "execute", maker.id, maker.side, maker.price, qty)
            )
            maker.volume -= qty
            contra.depth -= qty
            remaining -= qty
            if maker.volume == 0:
                contra.pop_front_at_best()
                del self._orders[maker.id]
        self.log.trades.extend(trades)
        return trades, remaining

    # -- message interface ---------------------------------------------------

    def submit_limit(self, side: str, price: int, volume: int,
                     timestamp: int) -> tuple[list[Trade], Order | None]:
        if price < 1 or volume < 1:
            raise ValueError("price and volume must be >= 1")
        ref = self._new_ref()
        trades, remaining = self._match(side, price, volume, timestamp, ref)
        resting = None
        if remaining > 0:
            resting = Order(ref, side, price, remaining, self._next_entry_seq, timestamp)
            self._next_entry_seq += 1
            self._side(side).add(resting)
            self._orders[ref] = resting
            self.log.book_events.append(
                BookEvent(timestamp, "new", ref, side, price, remaining)
            )
        self._emit_quote(timestamp)
        return trades, resting

    def submit_market(self, side: str, volume: int, timestamp: int) -> list[Trade]:
        if volume < 1:
            raise ValueError("volume must be >= 1")
        if self._side(opposite(side)).best() == 0:
            self.log.drops.append(DropRecord(timestamp, "market", side))
            return []
        trades, _ = self._match(side, None, volume, timestamp, self._new_ref())
        self._emit_quote(timestamp)
        return trades

    def cancel(self, order_id: int, timestamp: int) -> Order | None:
        order = self._orders.pop(order_id, None)
        if order is None:
            # id already executed away (or never existed): mirror a lost cancel
            self.log.drops.append(DropRecord(timestamp, "cancel", "?"))
            return None
        self._side(order.side).remove(order)
        self.log.book_events.append(
            BookEvent(timestamp, "cancel", order.id, order.side, order.price, order.volume)
        )
        self._emit_quote(timestamp)
        return order

    # -- read-only views -----------------------------------------------------

    def best_quotes(self) -> tuple[int, int, int, int]:
        """(best_bid, bid_vol, best_ask, ask_vol); 0 encodes an empty side."""
        return (
            self.bids.best(),
            self.bids.best_volume(),
            self.asks.best(),
            self.asks.best_volume(),
        )

    def l1_orders(self, side: str) -> list[int]:
        """Ids resting at the side's best price, in time priority."""
        book_side = self._side(side)
        best = book_side.best()
        if best == 0:
            return []
        return [o.id for o in book_side.levels[best]]

    def deeper_orders(self, side: str) -> list[int]:
        """Ids resting strictly behind the best, in price-time priority."""
        book_side = self._side(side)
        best = book_side.best()
        if best == 0:
            return []
        return [o.id for o in book_side.iter_price_priority() if o.price != best]

    def order(self, order_id: int) -> Order | None:
        return self._orders.get(order_id)

    def resting_volume(self) -> int:
        return self.bids.depth + self.asks.depth

    def snapshot(self) -> dict:
        def side_view(book_side: _BookSide):
            ordered = reversed(book_side.prices) if book_side.side == BID else iter(book_side.prices)
            return [
                {
                    "price": price,
                    "volume": sum(o.volume for o in book_side.levels[price]),
                    "orders": [(o.id, o.volume) for o in book_side.levels[price]],
                }
                for price in list(ordered)
            ]

        return {"bids": side_view(self.bids), "asks": side_view(self.asks)}


def microstructure_series(log: MarketDataLog) -> dict[str, np.ndarray]:
    """Mid/micro-price, spread and order imbalance per quote update.

    Imbalance and the micro-price weights use full book depth, not level-1
    volume.  Entries where either side is empty are NaN.
    """
    if not log.quotes:
        raise ValueError("empty market data log")
    n = len(log.quotes)
    ts = np.array([q.timestamp for q in log.quotes], dtype=np.int64)
    bid = np.array([q.bid for q in log.quotes], dtype=float)
    ask = np.array([q.ask for q in log.quotes], dtype=float)
    vb = np.array([d.bid_depth for d in log.depths], dtype=float)
    va = np.array([d.ask_depth for d in log.depths], dtype=float)

    valid = (bid > 0) & (ask > 0)
    mid = np.full(n, np.nan)
    micro = np.full(n, np.nan)
    spread = np.full(n, np.nan)
    imbalance = np.full(n, np.nan)
    mid[valid] = (bid[valid] + ask[valid]) / 2.0
    spread[valid] = ask[valid] - bid[valid]
    total = vb + va
    imbalance[valid] = (vb[valid] - va[valid]) / total[valid]
    micro[valid] = (vb[valid] * ask[valid] + va[valid] * bid[valid]) / total[valid]
    return {
        "timestamp_ms": ts,
        "mid": mid,
        "micro": micro,
        "spread": spread,
        "imbalance": imbalance,
    }


def write_microstructure_csv(series: dict[str, np.ndarray], path, meta: dict | None = None) -> None:
    with open(path, "w") as fh:
        write_meta_header(fh, meta or {})
        fh.write("timestamp_ms,mid,micro,spread,imbalance\n")
        for i in range(series["timestamp_ms"].size):
            cells = [str(int(series["timestamp_ms"][i]))]
            for key in ("mid", "micro", "spread", "imbalance"):
                v = series[key][i]
                cells.append("" if np.isnan(v) else f"{v:.6f}")
            fh.write(",".join(cells) + "\n")
