import itertools

import numpy as np  # type: ignore
import pytest

from App.exceptions import DomainError
from App.grid_core import (Axis, Coord, GridPerm, Labeling, Move, MoveTable, apply_move,
                           commutator_gamma, compose, coord_of, identity, invert, l_support,
                           label_of, move_as_perm, move_permutation, pos_index, rotations,
                           shell_labels, sign, to_coord)

FIGURE_RIGHT = [[1, 4, 9, 16], [15, 2, 3, 8], [5, 6, 7, 14], [10, 11, 12, 13]]
FIGURE_COMMUTED = [[1, 11, 9, 16], [15, 4, 3, 8], [5, 2, 7, 14], [10, 6, 12, 13]]


def _pairs(n):
    moves = list(rotations(n))
    rows = [m for m in moves if m.axis is Axis.ROW]
    cols = [m for m in moves if m.axis is Axis.COL]
    return itertools.product(rows, cols)


@pytest.mark.parametrize("x, y, label", [(0, 0, 1), (3, 0, 16), (1, 2, 6), (0, 3, 10), (3, 3, 13)])
def test_label_of_shell_walk(x, y, label):
    assert label_of(Coord(x, y), 4) == label


def test_label_of_rejects_out_of_range():
    with pytest.raises(DomainError):
        label_of(Coord(4, 0), 4)
    with pytest.raises(DomainError):
        to_coord(17, 4)


@pytest.mark.parametrize("n", [1, 2, 5, 16, 64])
def test_labeling_round_trip_and_box_containment(n):
    labeling = Labeling(n)
    for pos in range(n * n):
        c = coord_of(pos, n)
        assert to_coord(label_of(c, n), n) == c
        assert labeling.to_coord(labeling.to_label(c)) == c
    for l in range(1, n + 1):
        inside = {label_of(Coord(x, y), n) for x in range(l) for y in range(l)}
        assert inside == set(range(1, l * l + 1))


def test_shell_labels():
    assert list(shell_labels(1, 8)) == [1]
    assert list(shell_labels(2, 8)) == [2, 3, 4]
    assert list(shell_labels(3, 8)) == list(range(5, 17))
    assert list(shell_labels(4, 8)) == list(range(17, 65))
    assert list(shell_labels(5, 8)) == []


def test_hold_is_identity(figure_grid):
    assert apply_move(figure_grid, Move.hold()) == figure_grid


def test_row_move_matches_figure(figure_grid):
    moved = apply_move(figure_grid, Move.row(2, 1))
    assert moved.rows_top_down() == FIGURE_RIGHT
    assert moved.is_consistent()


@pytest.mark.parametrize("move", [Move.row(1, 1), Move.col(3, -1)])
def test_rotation_has_order_n(figure_grid, move):
    state = figure_grid
    for _ in range(4):
        state = apply_move(state, move)
    assert state == figure_grid


def test_compose_identity_and_inverse(rng):
    n = 4
    p = GridPerm(n, rng.permutation(n * n))
    assert compose(p, identity(n)) == p
    assert compose(identity(n), p) == p
    assert compose(p, invert(p)) == identity(n)


def test_compose_matches_sequential_moves(figure_grid):
    a, b = Move.row(0, 1), Move.row(3, -1)
    stepwise = apply_move(apply_move(figure_grid, a), b)
    assert compose(figure_grid, move_as_perm(a, 4), move_as_perm(b, 4)) == stepwise


def test_compose_size_mismatch():
    with pytest.raises(DomainError):
        compose(identity(3), identity(4))


def test_dual_view_after_random_sequences(rng):
    n = 5
    state = identity(n)
    moves = list(rotations(n)) + [Move.hold()]
    for index in rng.integers(0, len(moves), size=300):
        state = apply_move(state, moves[index])
        assert state.is_consistent()
    assert np.array_equal(state.pos_of[state.tile_at], np.arange(n * n))


def test_sign_examples():
    assert sign(identity(4)) == 1
    assert sign(move_as_perm(Move.row(1, 1), 4)) == -1
    assert sign(move_as_perm(Move.row(1, 1), 3)) == 1


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_rotation_parity_depends_on_n(n):
    expected = 1 if n % 2 else -1
    for move in rotations(n):
        assert sign(move_as_perm(move, n)) == expected


def test_commutator_reproduces_figure(figure_grid):
    r, c = Move.row(2, 1), Move.col(1, -1)
    rc = apply_move(apply_move(figure_grid, r), c)
    cr = apply_move(apply_move(figure_grid, c), r)
    assert rc.rows_top_down() == FIGURE_COMMUTED
    gamma = commutator_gamma(r, c, 4)
    assert len(gamma.support()) == 3
    assert pos_index(Coord(1, 2), 4) in gamma.support()
    assert compose(cr, gamma) == rc
    differing = np.flatnonzero(rc.tile_at != cr.tile_at).tolist()
    assert sorted(differing) == sorted(gamma.support())


@pytest.mark.parametrize("n", [3, 4, 5])
def test_commutator_is_l_shaped_three_cycle(n):
    count = 0
    for r, c in _pairs(n):
        gamma = commutator_gamma(r, c, n)
        brute = compose(move_as_perm(r.inverse(), n), move_as_perm(c.inverse(), n),
                        move_as_perm(r, n), move_as_perm(c, n))
        assert gamma == brute
        support = gamma.support()
        middle = pos_index(Coord(c.index, r.index), n)
        assert len(support) == 3 and middle in support
        others = [coord_of(p, n) for p in support if p != middle]
        # одна клетка в строке r, другая в столбце c
        assert {o.y == r.index for o in others} == {True, False}
        assert compose(gamma, gamma, gamma) == identity(n)
        count += 1
    assert count == 4 * n * n


def test_l_support_turns_rc_into_cr():
    n = 4
    for r, c in _pairs(n):
        middle, front, back = l_support(r, c, n)
        rc = compose(move_as_perm(r, n), move_as_perm(c, n))
        cr = compose(move_as_perm(c, n), move_as_perm(r, n))
        cycled = rc.tile_at.copy()
        cycled[front], cycled[back], cycled[middle] = rc.tile_at[middle], rc.tile_at[front], rc.tile_at[back]
        assert np.array_equal(cycled, cr.tile_at)


def test_commutator_rejects_hold():
    with pytest.raises(DomainError):
        commutator_gamma(Move.hold(), Move.col(0, 1), 4)
    with pytest.raises(DomainError):
        commutator_gamma(Move.col(0, 1), Move.row(0, 1), 4)


def test_move_codes_round_trip():
    n = 5
    for code in range(4 * n, 8 * n):
        assert Move.from_code(code, n).code(n) == code
    assert all(Move.from_code(code, n).is_hold for code in range(4 * n))
    with pytest.raises(DomainError):
        Move.from_code(8 * n, n)


def test_move_table_matches_move_permutation():
    n = 3
    table = MoveTable(n)
    for code in range(8 * n):
        sigma = move_permutation(Move.from_code(code, n), n)
        assert np.array_equal(table.maps[code], sigma)
        assert np.array_equal(table.inverse_maps[code][sigma], np.arange(n * n))
    r, c = Move.row(1, -1), Move.col(2, 1)
    assert tuple(table.cycles[r.code(n) - 4 * n, c.code(n) - 6 * n]) == l_support(r, c, n)
