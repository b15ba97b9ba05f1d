import numpy as np
import pytest

from hawkeslob import EventStream, classify_simulation, run_simulation, simulate_thinning
from hawkeslob.classification import (
    ClassifiedStream,
    aggregate_trades,
    classify_cancel,
    classify_limit,
    counts_summary,
    resolve_concurrent,
)
from hawkeslob.lob import ASK, BID, LimitOrderBook


class TestAggregateTrades:
    def test_walking_order_collapses(self):
        book = LimitOrderBook()
        book.submit_limit(ASK, 50, 5, 1)
        book.submit_limit(ASK, 51, 5, 2)
        book.submit_market(BID, 8, 3)  # two prints, one timestamp
        assert aggregate_trades(book.log) == [(3, 1)]

    def test_single_print(self):
        book = LimitOrderBook()
        book.submit_limit(BID, 50, 5, 1)
        book.submit_market(ASK, 2, 2)
        assert aggregate_trades(book.log) == [(2, 2)]

    def test_distinct_timestamps_stay_separate(self):
        book = LimitOrderBook()
        book.submit_limit(ASK, 50, 10, 1)
        book.submit_market(BID, 2, 2)
        book.submit_market(BID, 2, 4)
        assert aggregate_trades(book.log) == [(2, 1), (4, 1)]


class TestClassifyRules:
    def test_limit_at_best_is_aggressive(self):
        assert classify_limit(BID, 100, 100, 103) == 3
        assert classify_limit(ASK, 103, 100, 103) == 4

    def test_limit_improving_is_aggressive(self):
        assert classify_limit(BID, 101, 100, 103) == 3
        assert classify_limit(ASK, 102, 100, 103) == 4

    def test_limit_behind_is_passive(self):
        assert classify_limit(BID, 99, 100, 103) == 5
        assert classify_limit(ASK, 104, 100, 103) == 6

    def test_limit_into_empty_side_is_aggressive(self):
        assert classify_limit(BID, 95, 0, 103) == 3
        assert classify_limit(ASK, 110, 100, 0) == 4

    def test_cancel_at_best(self):
        assert classify_cancel(BID, 100, 100, 103) == 7
        assert classify_cancel(ASK, 103, 100, 103) == 8

    def test_cancel_behind_best(self):
        assert classify_cancel(BID, 99, 100, 103) == 9
        assert classify_cancel(ASK, 105, 100, 103) == 10


class TestResolveConcurrent:
    def test_spawned_order_shifted(self):
        out = resolve_concurrent([(5, 1), (5, 3), (9, 2)])
        assert out == [(5, 1), (6, 3), (9, 2)]

    def test_fully_filled_crossing_is_single_event(self):
        out = resolve_concurrent([(5, 1), (9, 2)])
        assert out == [(5, 1), (9, 2)]

    def test_ask_side_pattern(self):
        assert resolve_concurrent([(5, 2), (5, 4)]) == [(5, 2), (6, 4)]

    def test_other_patterns_rejected(self):
        with pytest.raises(ValueError):
            resolve_concurrent([(5, 1), (5, 4)])  # opposite-side spawn impossible
        with pytest.raises(ValueError):
            resolve_concurrent([(5, 3), (5, 1)])  # wrong order
        with pytest.raises(ValueError):
            resolve_concurrent([(5, 5), (5, 5)])
        with pytest.raises(ValueError):
            resolve_concurrent([(5, 1), (5, 3), (5, 3)])

    def test_shift_collision_detected(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            resolve_concurrent([(5, 1), (5, 3), (6, 2)])


class TestClassifiedStream:
    def test_invariants(self):
        with pytest.raises(ValueError):
            ClassifiedStream(10.0, np.array([1.0, 1.0]), np.array([1, 2]))
        with pytest.raises(ValueError):
            ClassifiedStream(10.0, np.array([1.0]), np.array([11]))

    def test_csv_round_trip(self, tmp_path):
        cs = ClassifiedStream(10.0, np.array([0.005, 1.25]), np.array([1, 3]))
        path = tmp_path / "classified.csv"
        cs.to_csv(path, meta={"seed": 1})
        again = ClassifiedStream.from_csv(path)
        assert again.horizon == 10.0
        assert np.array_equal(again.times, cs.times)
        assert np.array_equal(again.types, cs.types)

    def test_malformed_row_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("# horizon_s=10\ntime_s,type\n1.0,3\noops\n")
        with pytest.raises(ValueError, match="bad.csv:4"):
            ClassifiedStream.from_csv(path)

    def test_counts_summary_shape(self):
        cs = ClassifiedStream(10.0, np.array([1.0, 2.0]), np.array([3, 3]))
        doc = counts_summary(cs, injected=np.arange(10))
        assert doc["classified"]["3"] == 2
        assert doc["injected"]["10"] == 9


def manual_round_trip_stream():
    """Hand-built sequence where the spread-aware model drops nothing and no
    empty-book promotion occurs, so classification must return the injected
    types exactly.  Volumes are fixed so market orders never drain a side."""
    types = [3, 4, 5, 6, 3, 4, 1, 2, 9, 10, 7, 8]
    vols = [30, 30, 30, 30, 30, 30, 25, 25, 0, 0, 0, 0]
    times = np.arange(1.0, len(types) + 1)
    return EventStream(20.0, times, np.array(types), np.array(vols))


class TestRoundTrip:
    def test_model2_no_drop_segment_types_preserved(self):
        stream = manual_round_trip_stream()
        result = run_simulation(stream, "model2", seed=42)
        assert result.dropped_count == 0
        classified = classify_simulation(result)
        assert np.array_equal(classified.types, stream.types)
        assert np.array_equal(classified.times, np.arange(1.0, 13.0))

    def test_reference_passthrough(self, params10):
        stream = simulate_thinning(params10, 600.0, seed=4)
        result = run_simulation(stream, "reference", seed=4)
        classified = classify_simulation(result)
        assert np.array_equal(classified.times, stream.times)
        assert np.array_equal(classified.types, stream.types)


@pytest.fixture(scope="module", params=["model1", "model2"])
def sim_run(request, params10):
    stream = simulate_thinning(params10, 3600.0, seed=21)
    return run_simulation(stream, request.param, seed=21)


class TestOnSimulatedRuns:
    def test_modes_agree(self, sim_run):
        by_book = classify_simulation(sim_run, mode="book")
        by_taq = classify_simulation(sim_run, mode="quotes")
        assert np.array_equal(by_book.times, by_taq.times)
        assert np.array_equal(by_book.types, by_taq.types)

    def test_simple_process_min_gap(self, sim_run):
        cs = classify_simulation(sim_run)
        assert np.min(np.diff(cs.times)) >= 0.001 - 1e-12

    def test_distortion_direction(self, sim_run):
        injected = sim_run.stream.counts(10)
        classified = classify_simulation(sim_run).counts()
        # passive cancels can only be lost, aggressive limit orders only gained
        assert classified[8] < injected[8]
        assert classified[9] < injected[9]
        assert classified[2] > injected[2]
        assert classified[3] > injected[3]

    def test_crossing_spawns_only_in_model1(self, sim_run):
        cs = classify_simulation(sim_run)
        gaps = np.diff(cs.times)
        spawn_gaps = np.sum(np.isclose(gaps, 0.001))
        if sim_run.model == "model1":
            assert spawn_gaps > 0
        else:
            assert spawn_gaps == 0
