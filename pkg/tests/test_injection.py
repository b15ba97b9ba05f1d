import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hawkeslob import EventStream, VolumeModel, run_simulation, sample_volume, simulate_thinning
from hawkeslob.injection import (
    EVENT_TYPES,
    Message,
    assign_milliseconds,
    draw_volumes,
    limit_price_model1,
    limit_price_model2,
    read_messages_csv,
    write_messages_csv,
)
from hawkeslob.lob import ASK, BID


class TestEventTypeTable:
    def test_layout(self):
        assert [EVENT_TYPES[k].kind for k in range(1, 11)] == (
            ["market"] * 2 + ["limit"] * 4 + ["cancel"] * 4
        )
        # odd types act on the bid side, even on the ask side
        for k in range(1, 11):
            assert EVENT_TYPES[k].side == (BID if k % 2 else ASK)
        assert [EVENT_TYPES[k].aggressive for k in (3, 4, 5, 6)] == [True, True, False, False]
        assert [EVENT_TYPES[k].aggressive for k in (7, 8, 9, 10)] == [True, True, False, False]


class TestVolumeSampling:
    def test_lower_bound_limit(self):
        assert sample_volume(VolumeModel(), "limit", 1e-12) == 20

    def test_median_limit(self):
        assert sample_volume(VolumeModel(), "limit", 0.5) == 40

    def test_upper_tail_market(self):
        assert sample_volume(VolumeModel(), "market", 0.9) == 500

    def test_u_domain(self):
        with pytest.raises(ValueError):
            sample_volume(VolumeModel(), "limit", 0.0)
        with pytest.raises(ValueError):
            sample_volume(VolumeModel(), "limit", 1.0)

    @given(st.floats(min_value=1e-9, max_value=1 - 1e-9))
    @settings(max_examples=200)
    def test_support(self, u):
        v_lo = sample_volume(VolumeModel(), "limit", u)
        v_mo = sample_volume(VolumeModel(), "market", u)
        assert isinstance(v_lo, int) and v_lo >= 20
        assert isinstance(v_mo, int) and v_mo >= 50

    def test_general_tail_exponent(self):
        # alpha = 2: inverse CDF x_m (1-u)^(-1/2)
        model = VolumeModel(tail_alpha=2.0)
        assert sample_volume(model, "limit", 0.75) == 40

    def test_draw_volumes_assigns_only_orders(self):
        stream = EventStream(10.0, np.array([1.0, 2.0, 3.0]), np.array([1, 5, 9]))
        with_vol = draw_volumes(stream, VolumeModel(), seed=3)
        assert with_vol.volumes[0] >= 50  # market order
        assert with_vol.volumes[1] >= 20  # limit order
        assert with_vol.volumes[2] == 0  # cancels carry no volume


class TestPriceRuleSpreadBlind:
    def test_aggressive_bid_improves(self):
        assert limit_price_model1(100, 103, 1000, 1000, BID, True, 5) == 101

    def test_passive_bid_behind(self):
        assert limit_price_model1(100, 103, 1000, 1000, BID, False, 5) == 99

    def test_aggressive_ask_improves(self):
        assert limit_price_model1(100, 103, 1000, 1000, ASK, True, 5) == 102

    def test_passive_ask_behind(self):
        assert limit_price_model1(100, 103, 1000, 1000, ASK, False, 5) == 104

    def test_empty_same_side_random_offset(self):
        assert limit_price_model1(0, 102, 1000, 1000, BID, True, 3) == 99
        assert limit_price_model1(0, 102, 1000, 1000, BID, False, 3) == 99
        assert limit_price_model1(100, 0, 1000, 1000, ASK, True, 7) == 107
        assert limit_price_model1(100, 0, 1000, 1000, ASK, False, 7) == 107

    def test_passive_with_empty_contra_uses_current_best(self):
        # the passive branch keys off the current best, not the remembered one
        assert limit_price_model1(100, 0, 900, 950, BID, False, 5) == 99
        assert limit_price_model1(0, 100, 900, 950, ASK, False, 5) == 101

    def test_both_sides_empty_falls_back_to_previous(self):
        assert limit_price_model1(0, 0, 990, 1010, BID, True, 4) == 1006
        assert limit_price_model1(0, 0, 990, 1010, ASK, True, 4) == 994
        assert limit_price_model1(0, 0, 990, 1010, BID, False, 4) == 1006

    def test_clamped_at_one_tick(self):
        assert limit_price_model1(1, 3, 1000, 1000, BID, False, 5) == 1
        assert limit_price_model1(0, 4, 1000, 1000, BID, True, 9) == 1

    def test_crossing_allowed(self):
        # spread of one tick: improving crosses the contra best
        assert limit_price_model1(100, 101, 1000, 1000, BID, True, 5) == 101


class TestPriceRuleSpreadAware:
    def test_unit_spread_joins_best(self):
        assert limit_price_model2(100, 101, 1000, 1000, BID, True, 5) == 100
        assert limit_price_model2(100, 101, 1000, 1000, ASK, True, 5) == 101

    def test_wide_spread_improves(self):
        assert limit_price_model2(100, 103, 1000, 1000, BID, True, 5) == 101
        assert limit_price_model2(100, 103, 1000, 1000, ASK, True, 5) == 102

    def test_empty_side_offsets(self):
        assert limit_price_model2(100, 0, 1000, 1000, ASK, True, 7) == 107
        assert limit_price_model2(0, 102, 1000, 1000, BID, True, 3) == 99

    def test_passive_same_as_spread_blind(self):
        for side in (BID, ASK):
            assert limit_price_model2(100, 103, 1000, 1000, side, False, 5) == (
                limit_price_model1(100, 103, 1000, 1000, side, False, 5)
            )

    @given(
        st.integers(0, 150), st.integers(0, 150), st.integers(1, 10),
        st.sampled_from([BID, ASK]),
    )
    @settings(max_examples=300)
    def test_never_crosses(self, b, a, u, side):
        if b and a and b >= a:  # book never rests crossed
            return
        price = limit_price_model2(b, a, 1000, 1000, side, True, u)
        if side == BID and a:
            assert price < a
        if side == ASK and b:
            assert price > b


class TestMillisecondAssignment:
    def test_rounding_and_spacing(self):
        ms = assign_milliseconds(np.array([0.0001, 0.0002, 5.0, 5.0005, 12.3456789]))
        assert list(ms) == [1, 3, 5000, 5002, 12346]
        assert np.all(np.diff(ms) >= 2)

    def test_already_spaced_unchanged(self):
        ms = assign_milliseconds(np.array([1.0, 2.0, 3.0]))
        assert list(ms) == [1000, 2000, 3000]


@pytest.fixture(scope="module")
def small_run(params10):
    stream = simulate_thinning(params10, 1800.0, seed=5)
    return run_simulation(stream, "model1", seed=5)


class TestRunSimulation:
    def test_model_name_checked(self, params10):
        stream = simulate_thinning(params10, 10.0, seed=1)
        with pytest.raises(ValueError):
            run_simulation(stream, "model3", seed=1)

    def test_first_limit_at_start_price(self, small_run):
        first_lo = next(m for m in small_run.messages if m.action == "limit")
        assert first_lo.price == 1000

    def test_reference_bypasses_engine(self, params10):
        stream = simulate_thinning(params10, 600.0, seed=2)
        result = run_simulation(stream, "reference", seed=2)
        assert result.log is None
        assert result.messages == []
        assert result.stream.volumes is not None  # volumes still attached

    def test_market_on_empty_contra_dropped_engine_untouched(self):
        # first two events are market orders into an empty book
        stream = EventStream(10.0, np.array([1.0, 2.0, 3.0]), np.array([1, 2, 3]))
        result = run_simulation(stream, "model1", seed=1)
        assert result.messages[0].dropped and result.messages[1].dropped
        assert not result.messages[2].dropped
        assert len(result.log.quotes) == 1  # only the limit order produced a quote

    def test_passive_cancel_single_level_dropped(self):
        # one LO rests, then a passive cancel on that side finds no deeper order
        stream = EventStream(10.0, np.array([1.0, 2.0]), np.array([5, 9]))
        result = run_simulation(stream, "model2", seed=1)
        assert result.messages[1].action == "cancel"
        assert result.messages[1].dropped

    def test_dropped_bookkeeping(self, small_run):
        dropped = sum(m.dropped for m in small_run.messages)
        reached = sum(not m.dropped for m in small_run.messages)
        assert dropped + reached == len(small_run.stream)
        # only market orders and cancels can drop
        assert all(m.action in ("market", "cancel") for m in small_run.messages if m.dropped)

    def test_every_lo_rests_or_trades(self, small_run):
        lo_count = sum(1 for m in small_run.messages if m.action == "limit")
        new_events = sum(1 for e in small_run.log.book_events if e.kind == "new")
        lo_ids = {m.order_id for m in small_run.messages if m.action == "limit"}
        crossing = {t.taker_ref for t in small_run.log.trades if t.taker_ref in lo_ids}
        fully_converted = lo_count - new_events
        assert fully_converted >= 0
        assert crossing or fully_converted == 0

    def test_same_seed_reproducible(self, params10):
        stream = simulate_thinning(params10, 900.0, seed=9)
        a = run_simulation(stream, "model1", seed=9)
        b = run_simulation(stream, "model1", seed=9)
        assert a.messages == b.messages

    def test_randomness_identical_across_models(self, params10):
        """Times, types and volumes seen by the two engine models are bitwise
        identical; only prices/outcomes may differ."""
        stream = simulate_thinning(params10, 1800.0, seed=11)
        r1 = run_simulation(stream, "model1", seed=11)
        r2 = run_simulation(stream, "model2", seed=11)
        assert np.array_equal(r1.stream.volumes, r2.stream.volumes)
        for m1, m2 in zip(r1.messages, r2.messages):
            assert m1.timestamp_ms == m2.timestamp_ms
            assert m1.event_type == m2.event_type
            if m1.action in ("limit", "market"):
                assert m1.volume == m2.volume

    def test_model2_limit_orders_never_trade(self, params10):
        stream = simulate_thinning(params10, 3600.0, seed=12)
        r2 = run_simulation(stream, "model2", seed=12)
        lo_ids = {m.order_id for m in r2.messages if m.action == "limit"}
        assert all(t.taker_ref not in lo_ids for t in r2.log.trades)

    def test_model1_crossing_occurs(self, params10):
        stream = simulate_thinning(params10, 3600.0, seed=12)
        r1 = run_simulation(stream, "model1", seed=12)
        lo_ids = {m.order_id for m in r1.messages if m.action == "limit"}
        assert any(t.taker_ref in lo_ids for t in r1.log.trades)

    def test_messages_csv_round_trip(self, small_run, tmp_path):
        path = tmp_path / "events.csv"
        write_messages_csv(small_run.messages, path, meta={"seed": 5})
        again = read_messages_csv(path)
        assert len(again) == len(small_run.messages)
        for a, b in zip(again, small_run.messages):
            assert (a.timestamp_ms, a.action, a.side, a.price, a.volume, a.order_id,
                    a.dropped) == (b.timestamp_ms, b.action, b.side, b.price, b.volume,
                                   b.order_id, b.dropped)
        path2 = tmp_path / "events2.csv"
        write_messages_csv(again, path2, meta={"seed": 5})
        assert path2.read_bytes() == path.read_bytes()
