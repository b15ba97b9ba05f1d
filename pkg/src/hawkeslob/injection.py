"""Turns a 10-type event stream into matching-engine messages.

Event type table (odd = bid, even = ask):

    1-2   market orders
    3-4   aggressive limit orders
    5-6   passive limit orders
    7-8   cancellations at the best
    9-10  cancellations behind the best

Three execution models share one realization: the *reference* model submits
nothing (event types and times only), *model1* prices aggressive limit orders
one tick through the best even when that crosses the book, *model2* caps the
improvement at the spread so limit orders never cross.  All randomness beyond
the input stream (volumes, empty-book price offsets, cancel selection) comes
from purpose-labeled substreams of one seed, drawn per event index, so event
times, types and volumes are bitwise identical across models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hawkes import (
    STREAM_CANCELS,
    STREAM_OFFSETS,
    STREAM_VOLUMES,
    EventStream,
    substream,
)
from .lob import ASK, BID, LimitOrderBook, MarketDataLog, opposite
from .util import read_lines_skipping_meta, write_meta_header

MODELS = ("reference", "model1", "model2")


@dataclass(frozen=True)
class EventSpec:
    kind: str  # market | limit | cancel
    side: str
    aggressive: bool


EVENT_TYPES: dict[int, EventSpec] = {
    1: EventSpec("market", BID, True),
    2: EventSpec("market", ASK, True),
    3: EventSpec("limit", BID, True),
    4: EventSpec("limit", ASK, True),
    5: EventSpec("limit", BID, False),
    6: EventSpec("limit", ASK, False),
    7: EventSpec("cancel", BID, True),
    8: EventSpec("cancel", ASK, True),
    9: EventSpec("cancel", BID, False),
    10: EventSpec("cancel", ASK, False),
}


@dataclass(frozen=True)
class VolumeModel:
    """Pareto order sizes: density a*x_m^a / x^(a+1) above the minimum x_m."""

    x_m_lo: int = 20
    x_m_mo: int = 50
    tail_alpha: float = 1.0


def sample_volume(model: VolumeModel, kind: str, u: float) -> int:
    """Inverse-CDF draw, floored to an integer (>= x_m by construction)."""
    if not 0.0 < u < 1.0:
        raise ValueError("u must lie strictly inside (0, 1)")
    x_m = model.x_m_mo if kind == "market" else model.x_m_lo
    return int(math.floor(x_m * (1.0 - u) ** (-1.0 / model.tail_alpha)))


def draw_volumes(stream: EventStream, model: VolumeModel, seed: int) -> EventStream:
    """Attach volumes to market/limit events (cancels get none).

    One uniform is drawn per event from the volume substream regardless of
    event kind, so the mapping event -> volume depends only on the stream and
    seed, never on the execution model.
    """
    u = substream(seed, STREAM_VOLUMES).random(len(stream))
    volumes = np.zeros(len(stream), dtype=np.int64)
    for i, typ in enumerate(stream.types):
        spec = EVENT_TYPES[int(typ)]
        if spec.kind != "cancel":
            volumes[i] = sample_volume(model, spec.kind, u[i])
    return stream.with_volumes(volumes)


def _price_rule_model1(b, a, side, aggressive, u):
    if side == BID:
        if not aggressive:
            if a == 0:
                return b - 1
            return a - u if b == 0 else b - 1
        return a - u if b == 0 else b + 1
    if not aggressive:
        if b == 0:
            return a + 1
        return b + u if a == 0 else a + 1
    return b + u if a == 0 else a - 1


def _price_rule_model2(b, a, side, aggressive, u):
    if side == BID:
        if not aggressive:
            if a == 0:
                return b - 1
            return a - u if b == 0 else b - 1
        if b == 0:
            return a - u
        spread = abs(a - b)
        return b + 1 if spread > 1 else b
    if not aggressive:
        if b == 0:
            return a + 1
        return b + u if a == 0 else a + 1
    if a == 0:
        return b + u
    spread = abs(a - b)
    return a - 1 if spread > 1 else a


def _limit_price(rule, best_bid, best_ask, prev_best_bid, prev_best_ask,
                 side, aggressive, u) -> tuple[int, bool]:
    b, a = best_bid, best_ask
    if b == 0 and a == 0:
        # fully empty book: the contra reference falls back to the remembered best
        if side == BID:
            a = prev_best_ask
        else:
            b = prev_best_bid
    raw = rule(b, a, side, aggressive, int(u))
    return (max(raw, 1), raw < 1)


def limit_price_model1(best_bid, best_ask, prev_best_bid, prev_best_ask,
                       side, aggressive, u) -> int:
    """Spread-blind placement: aggressive orders always improve the best by
    one tick (possibly crossing); empty-side orders land a random 1..10 ticks
    off the contra best.  Prices below one tick clamp to 1."""
    return _limit_price(_price_rule_model1, best_bid, best_ask,
                        prev_best_bid, prev_best_ask, side, aggressive, u)[0]


def limit_price_model2(best_bid, best_ask, prev_best_bid, prev_best_ask,
                       side, aggressive, u) -> int:
    """Spread-aware placement: aggressive orders improve by one tick only when
    the spread exceeds one tick, otherwise join the best, so limit orders can
    never cross."""
    return _limit_price(_price_rule_model2, best_bid, best_ask,
                        prev_best_bid, prev_best_ask, side, aggressive, u)[0]


@dataclass
class Message:
    timestamp_ms: int
    action: str  # limit | market | cancel
    side: str
    price: int
    volume: int
    order_id: int
    dropped: bool
    event_type: int = 0
    pre_bid: int = -1
    pre_ask: int = -1


def write_messages_csv(messages: list[Message], path, meta: dict | None = None) -> None:
    with open(path, "w") as fh:
        write_meta_header(fh, meta or {})
        fh.write("timestamp_ms,action,side,price,volume,order_id,dropped\n")
        for m in messages:
            fh.write(
                f"{m.timestamp_ms},{m.action},{m.side},{m.price},{m.volume},"
                f"{m.order_id},{int(m.dropped)}\n"
            )


def read_messages_csv(path) -> list[Message]:
    with open(path) as fh:
        _, rows = read_lines_skipping_meta(fh)
    out = []
    for row in rows[1:]:
        ts, action, side, price, volume, order_id, dropped = row.split(",")
        out.append(
            Message(int(ts), action, side, int(price), int(volume), int(order_id),
                    bool(int(dropped)))
        )
    return out


@dataclass
class SimulationResult:
    model: str
    seed: int
    stream: EventStream  # input realization, volumes attached
    messages: list[Message] = field(default_factory=list)
    log: MarketDataLog | None = None
    start_price: int = 1000
    price_clamps: int = 0

    @property
    def dropped_count(self) -> int:
        return sum(m.dropped for m in self.messages)


def assign_milliseconds(times_s: np.ndarray) -> np.ndarray:
    """Map event seconds to strictly increasing integer milliseconds.

    Consecutive messages are spaced at least 2 ms apart so the +1 ms slot
    used to separate a crossing order's residual from its trade prints can
    never collide with the next message.
    """
    out = np.empty(times_s.size, dtype=np.int64)
    prev = -2
    for i, t in enumerate(times_s):
        ms = max(prev + 2, int(round(t * 1000.0)), 1)
        out[i] = ms
        prev = ms
    return out


def run_simulation(
    stream: EventStream,
    model: str,
    seed: int,
    *,
    volume_model: VolumeModel | None = None,
    start_price: int = 1000,
) -> SimulationResult:
    """Feed one realization through the chosen execution model.

    Per event, in order: limit orders are priced by the model rule and
    submitted (the very first one lands exactly at the start level); market
    orders are submitted only when the contra side is non-empty, else recorded
    as dropped; cancels pick uniformly from the level-1 (aggressive) or
    strictly-deeper (passive) resting orders of the event's side, dropping
    when no candidate exists.  The reference model submits nothing.
    """
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}")
    volume_model = volume_model or VolumeModel()
    if stream.volumes is None:
        stream = draw_volumes(stream, volume_model, seed)

    if model == "reference":
        return SimulationResult(model=model, seed=seed, stream=stream, start_price=start_price)

    rule = _price_rule_model1 if model == "model1" else _price_rule_model2
    n = len(stream)
    offsets = substream(seed, STREAM_OFFSETS).integers(1, 11, size=n)
    cancel_u = substream(seed, STREAM_CANCELS).random(n)
    ms_times = assign_milliseconds(stream.times)

    book = LimitOrderBook(start_price)
    messages: list[Message] = []
    clamps = 0
    first_limit = True

    for i in range(n):
        typ = int(stream.types[i])
        spec = EVENT_TYPES[typ]
        ms = int(ms_times[i])
        volume = int(stream.volumes[i])
        pre_bb, _, pre_ba, _ = book.best_quotes()

        if spec.kind == "limit":
            if first_limit:
                price, clamped = start_price, False
                first_limit = False
            else:
                price, clamped = _limit_price(
                    rule, pre_bb, pre_ba, book.last_best_bid, book.last_best_ask,
                    spec.side, spec.aggressive, offsets[i],
                )
            clamps += clamped
            trades, resting = book.submit_limit(spec.side, price, volume, ms)
            ref = resting.id if resting is not None else trades[0].taker_ref
            messages.append(Message(ms, "limit", spec.side, price, volume, ref, False,
                                    typ, pre_bb, pre_ba))

        elif spec.kind == "market":
            contra_best = pre_ba if spec.side == BID else pre_bb
            if contra_best == 0:
                messages.append(Message(ms, "market", spec.side, 0, volume, 0, True,
                                        typ, pre_bb, pre_ba))
            else:
                trades = book.submit_market(spec.side, volume, ms)
                messages.append(Message(ms, "market", spec.side, 0, volume,
                                        trades[0].taker_ref, False, typ, pre_bb, pre_ba))

        else:  # cancel
            candidates = (book.l1_orders(spec.side) if spec.aggressive
                          else book.deeper_orders(spec.side))
            if not candidates:
                messages.append(Message(ms, "cancel", spec.side, 0, 0, 0, True,
                                        typ, pre_bb, pre_ba))
            else:
                oid = candidates[int(cancel_u[i] * len(candidates))]
                order = book.cancel(oid, ms)
                messages.append(Message(ms, "cancel", spec.side, order.price, order.volume,
                                        oid, False, typ, pre_bb, pre_ba))

    return SimulationResult(
        model=model,
        seed=seed,
        stream=stream,
        messages=messages,
        log=book.log,
        start_price=start_price,
        price_clamps=clamps,
    )
