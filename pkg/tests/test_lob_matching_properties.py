"""Engine vs brute-force matcher over exhaustively enumerated small books,
plus randomized message-sequence invariants."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hawkeslob.lob import ASK, BID, LimitOrderBook
from reference_impls import NaiveMatcher


def engine_state(book: LimitOrderBook):
    bids = [(o.price, o.volume) for o in book.bids.iter_price_priority()]
    asks = [(o.price, o.volume) for o in book.asks.iter_price_priority()]
    return bids, asks


def naive_state(naive: NaiveMatcher):
    bids, asks = naive.book_state()
    return [(p, v) for p, v, _ in bids], [(p, v) for p, v, _ in asks]


def seed_both(resting):
    book = LimitOrderBook()
    naive = NaiveMatcher()
    ts = 0
    for side, price, vol in resting:
        ts += 1
        trades, _ = book.submit_limit(side, price, vol, ts)
        assert trades == []  # enumeration only generates non-crossing setups
        naive.submit_limit(side, price, vol)
    return book, naive, ts


def resting_configs():
    """All books with <= 2 resting orders per side; bids in {1,2}, asks in
    {3,4}, volumes in {1,2}, so setup never crosses.  Together with the
    incoming order each case involves at most five orders."""
    bid_orders = [(BID, p, v) for p in (1, 2) for v in (1, 2)]
    ask_orders = [(ASK, p, v) for p in (3, 4) for v in (1, 2)]

    def side_seqs(orders):
        return [()] + [(o,) for o in orders] + [(a, b) for a in orders for b in orders]

    for bids in side_seqs(bid_orders):
        for asks in side_seqs(ask_orders):
            yield list(bids) + list(asks)


def incoming_messages():
    for side in (BID, ASK):
        for vol in (1, 2, 3):
            yield ("market", side, None, vol)
            for price in (1, 2, 3, 4):
                yield ("limit", side, price, vol)


@pytest.mark.parametrize("chunk", range(8))
def test_exhaustive_small_books_match_naive(chunk):
    configs = list(resting_configs())
    for resting in configs[chunk::8]:
        for kind, side, price, vol in incoming_messages():
            book, naive, ts = seed_both(resting)
            if kind == "market":
                got = [(t.price, t.volume) for t in book.submit_market(side, vol, ts + 1)]
                want = naive.submit_market(side, vol)
            else:
                trades, _ = book.submit_limit(side, price, vol, ts + 1)
                got = [(t.price, t.volume) for t in trades]
                want = naive.submit_limit(side, price, vol)
            label = f"resting={resting} incoming={(kind, side, price, vol)}"
            assert got == want, label
            assert engine_state(book) == naive_state(naive), label
            assert book.best_quotes() == naive.best_quotes(), label


def test_price_time_priority_across_levels():
    # better-priced maker fills first; within a price, earlier entry first
    book = LimitOrderBook()
    _, late_best = book.submit_limit(ASK, 50, 5, 1)
    _, behind = book.submit_limit(ASK, 51, 5, 2)
    _, early_same = book.submit_limit(ASK, 50, 5, 3)
    trades = book.submit_market(BID, 12, 4)
    assert [t.maker_order_id for t in trades] == [late_best.id, early_same.id, behind.id]


message_strategy = st.lists(
    st.one_of(
        st.tuples(st.just("limit"), st.sampled_from([BID, ASK]),
                  st.integers(1, 12), st.integers(1, 9)),
        st.tuples(st.just("market"), st.sampled_from([BID, ASK]),
                  st.just(0), st.integers(1, 9)),
        st.tuples(st.just("cancel"), st.sampled_from([BID, ASK]),
                  st.just(0), st.integers(0, 30)),
    ),
    min_size=1,
    max_size=60,
)


@given(message_strategy)
@settings(max_examples=300, deadline=None)
def test_random_sequences_conserve_volume_and_never_rest_crossed(messages):
    """For any message sequence: submitted LO volume splits exactly into maker
    executions + crossing-LO taker executions + cancellations + still-resting
    volume, and the book never rests crossed."""
    book = LimitOrderBook()
    submitted = taker_lo_exec = cancelled = 0
    live_ids: list[int] = []
    for ts, (kind, side, price, vol) in enumerate(messages, start=1):
        if kind == "limit":
            submitted += vol
            trades, resting = book.submit_limit(side, price, vol, ts)
            taker_lo_exec += sum(t.volume for t in trades)
            if resting is not None:
                live_ids.append(resting.id)
        elif kind == "market":
            book.submit_market(side, vol, ts)
        else:
            target = live_ids[vol % len(live_ids)] if live_ids else 99999
            order = book.cancel(target, ts)
            if order is not None:
                cancelled += order.volume
        live_ids = [i for i in live_ids if book.order(i) is not None]

        bb, _, ba, _ = book.best_quotes()
        if bb and ba:
            assert bb < ba

    maker_exec = sum(t.volume for t in book.log.trades)
    assert submitted == maker_exec + taker_lo_exec + cancelled + book.resting_volume()
