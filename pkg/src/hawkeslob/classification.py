"""Reconstructs the 10 order-flow event types from trade-and-quote output.

Rules, applied to the book state immediately before each message:

* trades sharing a timestamp and aggressor side collapse into one market-order
  event (a large order walking several levels prints once per level);
* a limit order is aggressive when its price equals or betters the same-side
  best, or when that side is empty (it becomes the new best), else passive;
* a cancel is aggressive exactly when the cancelled order sat at the best;
* a crossing limit order that was only partially filled produces a market
  order event plus an aggressive limit order shifted one millisecond later,
  keeping the output a simple point process.

Two interchangeable information sets are supported: exact pre-states replayed
from the engine's book-event log, or reconstruction from messages plus the
quote feed alone; on simulated data both must classify identically.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .injection import Message, SimulationResult
from .lob import ASK, BID, MarketDataLog, QuoteRecord, Trade, opposite
from .util import read_numbered_lines, write_meta_header


@dataclass(frozen=True)
class ClassifiedStream:
    """Strictly increasing (seconds, type 1..10) pairs plus per-type totals."""

    horizon: float
    times: np.ndarray
    types: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        types = np.asarray(self.types, dtype=np.int64)
        if times.size and np.any(np.diff(times) <= 0):
            raise ValueError("classified timestamps must be strictly increasing")
        if types.size and (types.min() < 1 or types.max() > 10):
            raise ValueError("types must lie in 1..10")
        times.flags.writeable = False
        types.flags.writeable = False
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "types", types)

    def __len__(self) -> int:
        return self.times.size

    def counts(self, dimension: int = 10) -> np.ndarray:
        return np.bincount(self.types, minlength=dimension + 1)[1:]

    def to_csv(self, path, meta: dict | None = None) -> None:
        with open(path, "w") as fh:
            header = dict(meta or {})
            header.setdefault("horizon_s", f"{self.horizon:.6f}")
            write_meta_header(fh, header)
            fh.write("time_s,type\n")
            for t, k in zip(self.times, self.types):
                fh.write(f"{t:.6f},{int(k)}\n")

    @classmethod
    def from_csv(cls, path, horizon: float | None = None) -> "ClassifiedStream":
        with open(path) as fh:
            meta, rows = read_numbered_lines(fh)
        if rows and rows[0][1].startswith("time_s"):
            rows = rows[1:]
        if horizon is None:
            if "horizon_s" not in meta:
                raise ValueError(f"{path}: no horizon metadata; pass horizon explicitly")
            horizon = float(meta["horizon_s"])
        times, types = [], []
        for lineno, row in rows:
            parts = row.split(",")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 columns, got {len(parts)}")
            try:
                times.append(float(parts[0]))
                types.append(int(parts[1]))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: cannot parse row {row!r}") from None
        return cls(float(horizon), np.array(times), np.array(types, dtype=np.int64))


def counts_summary(classified: ClassifiedStream, injected: np.ndarray | None = None) -> dict:
    out = {"classified": {str(k + 1): int(c) for k, c in enumerate(classified.counts())}}
    if injected is not None:
        out["injected"] = {str(k + 1): int(c) for k, c in enumerate(injected)}
    return out


def aggregate_trades(log: MarketDataLog) -> list[tuple[int, int]]:
    """Collapse same-timestamp, same-aggressor trade prints into one event."""
    events = []
    seen: set[tuple[int, str]] = set()
    for tr in log.trades:
        key = (tr.timestamp, tr.aggressor_side)
        if key in seen:
            continue
        seen.add(key)
        events.append((tr.timestamp, 1 if tr.aggressor_side == BID else 2))
    return events


def classify_limit(side: str, price: int, best_bid: int, best_ask: int) -> int:
    """Type 3/4 when at/inside the same-side best or into an empty side, else 5/6."""
    if side == BID:
        aggressive = best_bid == 0 or price >= best_bid
        return 3 if aggressive else 5
    aggressive = best_ask == 0 or price <= best_ask
    return 4 if aggressive else 6


def classify_cancel(side: str, price: int, best_bid: int, best_ask: int) -> int:
    """Type 7/8 when the cancelled order sat at its side's best, else 9/10."""
    best = best_bid if side == BID else best_ask
    if side == BID:
        return 7 if price == best else 9
    return 8 if price == best else 10


def resolve_concurrent(events: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """Shift the aggressive limit order spawned by a partially-filled crossing
    order one millisecond past its trade prints; reject any other concurrency
    pattern as an engine bug."""
    by_ts: dict[int, list[int]] = defaultdict(list)
    for ts, typ in events:
        by_ts[ts].append(typ)
    out: list[tuple[int, int]] = []
    for ts, typ in events:
        group = by_ts[ts]
        if len(group) == 1:
            out.append((ts, typ))
            continue
        if len(group) != 2 or tuple(group) not in ((1, 3), (2, 4)):
            raise ValueError(
                f"unexpected concurrent events at t={ts} ms: types {group}"
            )
        out.append((ts, typ) if typ in (1, 2) else (ts + 1, typ))
    times = [ts for ts, _ in out]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("timestamps not strictly increasing after concurrency fix")
    return out


class _ReplaySide:
    """Resting-order multiset for replaying the book-event log."""

    def __init__(self, side: str):
        self.side = side
        self.count_at: dict[int, int] = {}

    def best(self) -> int:
        if not self.count_at:
            return 0
        prices = self.count_at.keys()
        return max(prices) if self.side == BID else min(prices)

    def add(self, price: int) -> None:
        self.count_at[price] = self.count_at.get(price, 0) + 1

    def remove(self, price: int) -> None:
        left = self.count_at[price] - 1
        if left:
            self.count_at[price] = left
        else:
            del self.count_at[price]


def classify_from_book_events(log: MarketDataLog, horizon_s: float) -> ClassifiedStream:
    """Exact-mode classification: replay the raw book events to recover the
    pre-state of every message."""
    sides = {BID: _ReplaySide(BID), ASK: _ReplaySide(ASK)}
    volume_left: dict[int, tuple[str, int, int]] = {}  # id -> (side, price, volume)

    groups: list[list] = []
    for ev in log.book_events:
        if groups and groups[-1][0].timestamp == ev.timestamp:
            groups[-1].append(ev)
        else:
            groups.append([ev])

    raw: list[tuple[int, int]] = []
    for group in groups:
        pre_bb = sides[BID].best()
        pre_ba = sides[ASK].best()
        executes = [e for e in group if e.kind == "execute"]
        news = [e for e in group if e.kind == "new"]
        cancels = [e for e in group if e.kind == "cancel"]
        ts = group[0].timestamp

        if cancels:
            if len(group) != 1:
                raise ValueError(f"cancel mixed with other book events at t={ts} ms")
            ev = cancels[0]
            raw.append((ts, classify_cancel(ev.side, ev.price, pre_bb, pre_ba)))
        elif executes:
            aggressor = opposite(executes[0].side)
            raw.append((ts, 1 if aggressor == BID else 2))
            if news:  # residual of a crossing limit order
                ev = news[0]
                raw.append((ts, 3 if ev.side == BID else 4))
        else:
            ev = news[0]
            raw.append((ts, classify_limit(ev.side, ev.price, pre_bb, pre_ba)))

        # apply the group to the replayed book
        for ev in group:
            if ev.kind == "new":
                sides[ev.side].add(ev.price)
                volume_left[ev.order_id] = (ev.side, ev.price, ev.volume)
            elif ev.kind == "cancel":
                sides[ev.side].remove(ev.price)
                del volume_left[ev.order_id]
            else:
                side, price, vol = volume_left[ev.order_id]
                vol -= ev.volume
                if vol:
                    volume_left[ev.order_id] = (side, price, vol)
                else:
                    sides[side].remove(price)
                    del volume_left[ev.order_id]

    resolved = resolve_concurrent(raw)
    times = np.array([ts for ts, _ in resolved], dtype=float) / 1000.0
    types = np.array([typ for _, typ in resolved], dtype=np.int64)
    return ClassifiedStream(horizon_s, times, types)


def classify_from_taq(
    messages: list[Message],
    trades: list[Trade],
    quotes: list[QuoteRecord],
    horizon_s: float,
) -> ClassifiedStream:
    """Observational-mode classification from the message list plus the trade
    and quote feeds (no engine internals)."""
    live = [m for m in messages if not m.dropped]
    if len(live) != len(quotes):
        raise ValueError(
            f"{len(live)} effective messages but {len(quotes)} quote records"
        )
    traded_ts = {tr.timestamp for tr in trades}

    raw: list[tuple[int, int]] = []
    for idx, msg in enumerate(live):
        if idx == 0:
            pre_bb = pre_ba = 0
        else:
            pre_bb, pre_ba = quotes[idx - 1].bid, quotes[idx - 1].ask
        if msg.action == "market":
            raw.append((msg.timestamp_ms, 1 if msg.side == BID else 2))
        elif msg.action == "limit":
            if msg.timestamp_ms in traded_ts:
                raw.append((msg.timestamp_ms, 1 if msg.side == BID else 2))
                post = quotes[idx]
                post_best = post.bid if msg.side == BID else post.ask
                if post_best == msg.price:  # residual rested as the new best
                    raw.append((msg.timestamp_ms, 3 if msg.side == BID else 4))
            else:
                raw.append((msg.timestamp_ms, classify_limit(msg.side, msg.price, pre_bb, pre_ba)))
        else:
            raw.append((msg.timestamp_ms, classify_cancel(msg.side, msg.price, pre_bb, pre_ba)))

    resolved = resolve_concurrent(raw)
    times = np.array([ts for ts, _ in resolved], dtype=float) / 1000.0
    types = np.array([typ for _, typ in resolved], dtype=np.int64)
    return ClassifiedStream(horizon_s, times, types)


def classify_simulation(result: SimulationResult, mode: str = "book") -> ClassifiedStream:
    """Classify a simulation run; the reference model passes through as-is."""
    if result.model == "reference":
        return ClassifiedStream(result.stream.horizon, result.stream.times, result.stream.types)
    if result.log is None:
        raise ValueError("simulation result carries no market data log")
    if mode == "book":
        return classify_from_book_events(result.log, result.stream.horizon)
    if mode == "quotes":
        return classify_from_taq(
            result.messages, result.log.trades, result.log.quotes, result.stream.horizon
        )
    raise ValueError("mode must be 'book' or 'quotes'")
