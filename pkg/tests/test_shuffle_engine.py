from fractions import Fraction

import numpy as np  # type: ignore
import pytest
from scipy import stats  # type: ignore

from App.entropy_lab import deck_sign
from App.exact_oracles import enumerate_reachable, exact_evolve, knuth_choice_tree_law
from App.exceptions import DomainError, InvariantViolation
from App.grid_core import Move, MoveTable, apply_move, identity, l_support, sign
from App.shuffle_engine import (MatchBook, ScriptedStream, ShuffleStream, TileTracker, TwoStepBatch,
                                apply_cycle, knuth_shuffle, l_collision_probability,
                                modified_knuth_shuffle, run_chain, stack_draws, trace_matching, trial_streams,
                                two_step_3monte)

FIGURE_RIGHT = [[1, 4, 9, 16], [15, 2, 3, 8], [5, 6, 7, 14], [10, 11, 12, 13]]
FIGURE_COMMUTED = [[1, 11, 9, 16], [15, 4, 3, 8], [5, 2, 7, 14], [10, 6, 12, 13]]


def test_stream_is_reproducible():
    a, b = ShuffleStream(7, 3), ShuffleStream(7, 3)
    assert [a.next_move_code(4) for _ in range(50)] == [b.next_move_code(4) for _ in range(50)]
    assert [a.next_coin() for _ in range(50)] == [b.next_coin() for _ in range(50)]
    other = ShuffleStream(7, 4)
    assert [other.next_move_code(4) for _ in range(50)] != [ShuffleStream(7, 3).next_move_code(4)
                                                            for _ in range(50)]


def test_stream_rejects_negative_key():
    with pytest.raises(DomainError):
        ShuffleStream(-1)


def test_hold_has_probability_half(stream_factory):
    n = 4
    stream = stream_factory()
    codes = np.array([stream.next_move_code(n) for _ in range(20000)])
    holds = int((codes < 4 * n).sum())
    assert stats.binomtest(holds, codes.size, 0.5).pvalue > 1e-3
    counts = np.bincount(codes[codes >= 4 * n] - 4 * n, minlength=4 * n)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_run_chain_scripted_row_move(figure_grid):
    stream = ScriptedStream(moves=[Move.row(2, 1), Move.hold()])
    assert run_chain(figure_grid, 2, stream).rows_top_down() == FIGURE_RIGHT


def test_scripted_stream_exhaustion(figure_grid):
    with pytest.raises(InvariantViolation):
        run_chain(figure_grid, 1, ScriptedStream())
    with pytest.raises(DomainError):
        run_chain(figure_grid, -1, ScriptedStream())


def test_odd_n_stays_even(stream_factory):
    for index in range(20):
        assert sign(run_chain(identity(3), 25, stream_factory(index))) == 1


@pytest.mark.slow
def test_sampled_law_matches_exact_n2(stream_factory):
    cls = enumerate_reachable(2)
    t, runs = 6, 20000
    exact = exact_evolve(cls, t).probs
    counts = np.zeros(cls.size)
    for index in range(runs):
        state = run_chain(identity(2), t, stream_factory(index))
        counts[cls.index_of(state.tile_at.tolist())] += 1
    assert 0.5 * np.abs(counts / runs - exact).sum() < 0.04


def test_two_step_applies_row_then_column(figure_grid):
    r, c = Move.row(2, 1), Move.col(1, -1)
    kept, event = two_step_3monte(figure_grid, ScriptedStream(moves=[c, r], coins=[0]), time=5)
    assert kept.rows_top_down() == FIGURE_COMMUTED
    assert event.time == 5 and event.outcome == 0
    assert event.triple == l_support(r, c, 4)

    cycled, event = two_step_3monte(figure_grid, ScriptedStream(moves=[r, c], coins=[1]))
    cr = apply_move(apply_move(figure_grid, c), r)
    assert cycled == cr
    assert event.outcome == 1
    assert cycled == apply_cycle(kept, event.triple)


def test_two_step_without_collision_draws_no_coin(figure_grid):
    moves = [Move.row(0, 1), Move.row(2, -1)]
    state, event = two_step_3monte(figure_grid, ScriptedStream(moves=moves))
    assert event is None
    assert state == apply_move(apply_move(figure_grid, moves[0]), moves[1])


def _first_event_tiles():
    r, c = Move.row(1, 1), Move.col(2, -1)
    _, event = two_step_3monte(identity(4), ScriptedStream(moves=[r, c], coins=[1]))
    return [r, c], event.tiles


def test_trace_matching_cyclic_order():
    moves, (a, b, c) = _first_event_tiles()

    def trace(focus, T=1, t=1):
        return trace_matching(4, focus, T, t, ScriptedStream(moves=moves, coins=[1]))

    nice = trace((a, b, c))
    assert nice.matched and nice.nicely and (nice.m1, nice.m2) == (b, c) and nice.t_xyz == 1
    plain = trace((b, c, a))
    assert plain.matched and not plain.nicely
    wrong = trace((a, c, b))
    assert not wrong.matched and wrong.t_xyz == 1 and wrong.m1 == wrong.m2 == a
    others = [tile for tile in range(16) if tile not in (a, b, c)][:3]
    untouched = trace(tuple(others))
    assert not untouched.matched and untouched.t_xyz is None


def test_trace_matching_ignores_events_before_window():
    moves, tiles = _first_event_tiles()
    stream = ScriptedStream(moves=moves + [0, 0], coins=[1])
    outcome = trace_matching(4, tiles, 2, 2, stream)
    assert not outcome.matched and outcome.t_xyz is None


def test_trace_matching_edge_cases():
    assert not trace_matching(4, (1, 2, 3), 3, 2, ScriptedStream()).matched
    with pytest.raises(DomainError):
        trace_matching(4, (1, 1, 3), 1, 2, ScriptedStream())
    with pytest.raises(DomainError):
        trace_matching(4, (1, 2, 3), 0, 2, ScriptedStream())


def test_knuth_choice_trees_are_uniform():
    plain = knuth_choice_tree_law(4, [(1, 2, 3, 4)], modified=False)
    assert len(plain) == 24 and set(plain.values()) == {Fraction(1, 24)}
    modified = knuth_choice_tree_law(4, [(1, 2, 3, 4)], modified=True)
    assert len(modified) == 12 and set(modified.values()) == {Fraction(1, 12)}
    assert all(deck_sign(deck) == 1 for deck in modified)


def test_modified_knuth_moves_card_with_three_cycle(stream_factory):
    assert modified_knuth_shuffle(3, (1, 2, 3), ScriptedStream(picks=[0])) == (2, 3, 1)
    start = (2, 1, 3, 4, 5, 6)
    for index in range(30):
        deck = modified_knuth_shuffle(6, start, stream_factory(index))
        assert deck_sign(deck) == deck_sign(start)
    assert sorted(knuth_shuffle(6, stream_factory())) == list(range(1, 7))
    with pytest.raises(DomainError):
        modified_knuth_shuffle(2, (1, 2), ScriptedStream())


@pytest.mark.parametrize("n", [3, 4])
def test_l_collision_probability(n):
    triple = l_support(Move.row(1, -1), Move.col(0, 1), n)
    assert l_collision_probability(n, *triple) == Fraction(1, 32 * n * n)
    middle, front, back = triple
    assert l_collision_probability(n, front, middle, back) == 0


def test_tile_tracker_matches_full_permutation(rng):
    n, batch, steps = 5, 3, 200
    starts = [(0, 0), (2, 3), (4, 4)]
    tracker = TileTracker(n, starts, batch)
    codes = rng.integers(0, 8 * n, size=(steps, batch))
    for row in codes:
        tracker.step(row)
    for b in range(batch):
        state = identity(n)
        for code in codes[:, b]:
            state = apply_move(state, Move.from_code(int(code), n))
        for k, (x, y) in enumerate(starts):
            pos = int(state.pos_of[y * n + x])
            assert tuple(tracker.positions[b, k]) == (pos % n, pos // n)


def test_two_step_batch_matches_scalar(rng):
    n, batch, steps = 4, 6, 40
    engine = TwoStepBatch(n, batch, MoveTable(n))
    states = [identity(n) for _ in range(batch)]
    for _ in range(steps):
        c1 = rng.integers(0, 8 * n, size=batch)
        c2 = rng.integers(0, 8 * n, size=batch)
        coins = rng.integers(0, 2, size=batch)
        event, occupants = engine.step(c1, c2, coins)
        for b in range(batch):
            stream = ScriptedStream(moves=[int(c1[b]), int(c2[b])], coins=[int(coins[b])])
            states[b], scalar = two_step_3monte(states[b], stream)
            assert bool(event[b]) == (scalar is not None)
            if scalar is not None:
                assert tuple(occupants[b]) == scalar.tiles
            assert np.array_equal(engine.tile_at[b], states[b].tile_at)


def test_match_book_agrees_with_trace_matching(rng):
    n, batch, steps, x = 4, 120, 30, 5
    engine = TwoStepBatch(n, batch)
    book = MatchBook(batch, n * n, [x])
    active = np.ones(batch, dtype=bool)
    scripts = [([], []) for _ in range(batch)]
    for step in range(1, steps + 1):
        c1 = rng.integers(0, 8 * n, size=batch)
        c2 = rng.integers(0, 8 * n, size=batch)
        coins = rng.integers(0, 2, size=batch)
        event, occupants = engine.step(c1, c2, coins)
        book.record(step, active, event, occupants)
        for b in range(batch):
            scripts[b][0].extend([int(c1[b]), int(c2[b])])
            if event[b]:
                scripts[b][1].append(int(coins[b]))
    matched = book.matched()[:, 0]
    assert matched.any()
    for b in np.flatnonzero(book.time[:, 0] >= 0):
        focus = (x, int(book.front[b, 0]), int(book.back[b, 0]))
        moves, coins = scripts[b]
        outcome = trace_matching(n, focus, 1, steps, ScriptedStream(moves=moves, coins=coins))
        assert outcome.matched == bool(matched[b])
        if outcome.matched:
            assert outcome.nicely == bool(book.middle[b, 0])


def test_modified_knuth_with_balanced_start_is_uniform():
    law = knuth_choice_tree_law(4, [(1, 2, 3, 4), (2, 1, 3, 4)], modified=True)
    assert len(law) == 24 and set(law.values()) == {Fraction(1, 24)}


def test_trial_streams_are_keyed_by_trial():
    streams = trial_streams(13, 40, 5)
    codes = stack_draws([s.moves_rng for s in streams], 32, (7, 2))
    assert codes.shape == (5, 7, 2)
    for offset in range(5):
        own = ShuffleStream(13, 40 + offset).moves_rng.integers(0, 32, size=(7, 2))
        assert np.array_equal(codes[offset], own)
    split = np.concatenate([stack_draws([s.moves_rng for s in trial_streams(13, 40, 2)], 32, (7, 2)),
                            stack_draws([s.moves_rng for s in trial_streams(13, 42, 3)], 32, (7, 2))])
    assert np.array_equal(codes, split)


def test_tile_tracker_run_applies_columns(rng):
    n, batch, steps = 4, 3, 30
    codes = rng.integers(0, 8 * n, size=(batch, steps))
    stepped = TileTracker(n, [(1, 2)], batch)
    for s in range(steps):
        stepped.step(codes[:, s])
    ran = TileTracker(n, [(1, 2)], batch).run(codes)
    assert np.array_equal(ran, stepped.positions)
    with pytest.raises(DomainError):
        TileTracker(n, [(1, 2)], batch + 1).run(codes)
