import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from posnec import grid as gr

E = 0.75


def test_virgin_grid():
    g = gr.new_grid(7, 3)
    assert g[0, 0] == gr.Cell(1.0, 0.0)
    assert g.pi.shape == (3, 7)
    assert g.clipped_stamps == 0 and g.wall_evidence == {}
    with pytest.raises(ValueError):
        gr.new_grid(0, 3)
    with pytest.raises(ValueError):
        gr.new_grid(3, 3, resolution=0)


def test_cell_geometry():
    g = gr.new_grid(10, 10, 0.5, origin=(-1.0, 2.0))
    assert g.cell_of(-1.0, 2.0) == (0, 0)
    assert g.cell_of(0.26, 2.9) == (2, 1)
    assert g.cell_center(0, 0) == (-0.75, 2.25)
    assert g.contains(9, 9) and not g.contains(10, 0) and not g.contains(-1, 0)


def test_grid_covering_snaps_origin():
    g = gr.grid_covering(0.03, -0.12, 1.0, 1.0, 0.1)
    assert g.origin == pytest.approx((0.0, -0.2))
    assert g.width == 10 and g.height == 12


def test_pyramid_height():
    assert gr.pyramid_height(0.0, E) == 1.0
    assert gr.pyramid_height(E, E) == 0.0
    assert gr.pyramid_height(2 * E, E) == 0.0
    assert gr.pyramid_height(0.375, E) == 0.5
    with pytest.raises(ValueError):
        gr.pyramid_height(0.1, 0.0)


def test_cell_necessity_examples():
    # centre of a small rectangle: full pyramid height
    assert gr.cell_necessity(0, 0, 0.1, 0.1, E) == pytest.approx(1 - 0.1 / E)
    # halfway to the side in x only
    assert gr.cell_necessity(0.05, 0, 0.1, 0.2, E) == pytest.approx(0.5 * (1 - 0.1 / E))
    assert gr.cell_necessity(0.1, 0, 0.1, 0.1, E) == 0.0
    assert gr.cell_necessity(0.3, 0, 0.1, 0.1, E) == 0.0
    with pytest.raises(ValueError):
        gr.cell_necessity(0, 0, 0.0, 0.1, E)


def test_prob_sum_examples():
    assert gr.prob_sum(0.5, 0.5) == 0.75
    assert gr.prob_sum(0.0, 0.3) == 0.3
    assert gr.prob_sum(1.0, 0.3) == 1.0


def test_propagate_visits_rectangle_once():
    g = gr.new_grid(20, 20)
    rect = gr.ErrorRect((10, 10), 3, 1, 2, 4)
    calls = []
    visited = gr.propagate_stamp(g, rect, lambda *a: calls.append(a))
    assert visited == set(rect.cells())
    assert len(calls) == len(visited) == 5 * 7


def test_propagate_reports_metre_offsets():
    g = gr.new_grid(20, 20, 0.1)
    seen = {}
    gr.propagate_stamp(g, gr.ErrorRect((5, 5), 2, 2, 0, 0), lambda i, j, x, ex, y, ey: seen.setdefault(i, (x, ex, y, ey)))
    assert seen[5] == (0.0, pytest.approx(0.2), 0.0, 0.0)
    assert seen[7][0] == pytest.approx(0.2)


def test_wall_stamp_single_cell_rect():
    g = gr.new_grid(5, 5, 0.1)
    gr.stamp_wall(g, gr.ErrorRect.symmetric((2, 2), 1, 1), "a", E)
    assert g[2, 2].n == pytest.approx(1 - 0.1 / E)
    assert g.n.sum() == g[2, 2].n


def test_same_segment_takes_max_different_segments_reinforce():
    g = gr.new_grid(9, 9, 0.1)
    rect = gr.ErrorRect.symmetric((4, 4), 2, 2)
    gr.stamp_wall(g, rect, "a", E)
    alpha = g[4, 4].n
    gr.stamp_wall(g, rect, "a", E)
    assert g[4, 4].n == alpha
    gr.stamp_wall(g, rect, "b", E)
    assert g[4, 4].n == pytest.approx(2 * alpha - alpha ** 2, abs=1e-15)


def test_free_stamp_takes_min():
    g = gr.new_grid(9, 9, 0.1)
    rect = gr.ErrorRect.symmetric((4, 4), 2, 2)
    gr.stamp_free(g, rect, None, E)
    first = g.pi.copy()
    assert g[4, 4].pi == pytest.approx(1 - (1 - 0.2 / E))
    gr.stamp_free(g, gr.ErrorRect.symmetric((4, 4), 4, 4), None, E)
    assert (g.pi <= first).all()
    assert g.n.sum() == 0


def test_clipping_counted_once_per_stamp():
    g = gr.new_grid(5, 5)
    gr.stamp_wall(g, gr.ErrorRect.symmetric((0, 0), 2, 2), "a", E)
    gr.stamp_free(g, gr.ErrorRect.symmetric((4, 4), 3, 3), None, E)
    gr.stamp_wall(g, gr.ErrorRect.symmetric((2, 2), 1, 1), "b", E)
    assert g.clipped_stamps == 2


def test_too_large_error_leaves_no_trace():
    g = gr.new_grid(50, 50, 0.1)
    gr.stamp_wall(g, gr.ErrorRect.symmetric((25, 25), 8, 1), "a", E)
    gr.stamp_free(g, gr.ErrorRect.symmetric((25, 25), 1, 8), None, E)
    assert g.n.sum() == 0 and (g.pi == 1).all()


def test_rect_at_rounds_up_with_one_cell_floor():
    g = gr.new_grid(20, 20, 0.1)
    assert gr.rect_at(g, 1.05, 1.05, 0.0, 0.0) == gr.ErrorRect((10, 10), 1, 1, 1, 1)
    assert gr.rect_at(g, 1.05, 1.05, 0.25, 0.1) == gr.ErrorRect((10, 10), 3, 3, 1, 1)


@pytest.mark.parametrize("cell, label", [
    ((1.0, 0.0), gr.UNKNOWN),
    ((0.2, 0.0), gr.FREE),
    ((1.0, 0.6), gr.OCCUPIED),
    ((0.3, 0.6), gr.CONFLICT),
    ((0.5, 0.25), gr.CONFLICT),
])
def test_classify(cell, label):
    assert gr.classify(cell) == label


def test_classify_grid_agrees_with_classify():
    rng = np.random.default_rng(4)
    g = gr.new_grid(6, 5)
    g.pi, g.n = rng.random((5, 6)), rng.random((5, 6))
    labels = gr.classify_grid(g)
    for j in range(5):
        for i in range(6):
            assert labels[j, i] == gr.classify(g[i, j])


def test_dump_round_trip():
    g = gr.new_grid(4, 3, 0.25, origin=(0.5, -1.0))
    gr.stamp_wall(g, gr.ErrorRect.symmetric((1, 1), 2, 1), "a", E)
    gr.stamp_free(g, gr.ErrorRect.symmetric((2, 1), 1, 1), None, E)
    g.max_error = E
    text = gr.dumps_grid(g)
    assert text.splitlines()[0] == "pngrid v1 4 3 0.25 0.5 -1.0"
    back = gr.loads_grid(text)
    assert np.array_equal(back.pi, g.pi) and np.array_equal(back.n, g.n)
    assert back.max_error == E
    assert gr.dumps_grid(back) == text


def test_dump_row_order():
    g = gr.new_grid(2, 2)
    g.n[1, 0] = 0.5  # cell (0, 1)
    lines = gr.dumps_grid(g).splitlines()[1:]
    assert lines[2] == "1.0 0.5"


@pytest.mark.parametrize("text", [
    "",
    "pngrid v2 1 1 0.1 0 0\n1.0 0.0\n",
    "pngrid v1 1 1 0.1 0 0\n",
    "pngrid v1 1 1 0.1 0 0\n1.0 x\n",
    "pngrid v1 1 1 0.1 0 0\n1.5 0.0\n",
    "pngrid v1 1 1 0.1 0 0\n1.0\n",
])
def test_dump_rejects_malformed(text):
    with pytest.raises(gr.GridFormatError):
        gr.loads_grid(text)


unit = st.floats(0.0, 1.0, allow_nan=False)


@settings(max_examples=300)
@given(unit, unit, unit)
def test_prob_sum_lattice_properties(x, y, z):
    s = gr.prob_sum(x, y)
    assert max(x, y) <= s <= 1.0
    assert s == gr.prob_sum(y, x)
    assert abs(gr.prob_sum(s, z) - gr.prob_sum(x, gr.prob_sum(y, z))) <= 1e-12
    assert gr.prob_sum(x, 0.0) == x and gr.prob_sum(x, 1.0) == 1.0


stamp = st.tuples(st.integers(0, 14), st.integers(0, 14), st.integers(0, 4), st.integers(0, 4),
                  st.integers(0, 4), st.integers(0, 4), st.sampled_from("abc"), st.booleans())


@settings(max_examples=80, deadline=None)
@given(st.lists(stamp, max_size=12), st.randoms(use_true_random=False))
def test_stamping_is_monotone_and_order_free(stamps, rnd):
    g = gr.new_grid(15, 15, 0.1)
    for ci, cj, er, el, eu, ed, seg, wall in stamps:
        pi0, n0 = g.pi.copy(), g.n.copy()
        rect = gr.ErrorRect((ci, cj), er, el, eu, ed)
        if wall:
            gr.stamp_wall(g, rect, seg, 2.0)
        else:
            gr.stamp_free(g, rect, seg, 2.0)
        assert (g.n >= n0).all() and (g.pi <= pi0).all()
        assert ((0 <= g.n) & (g.n <= 1) & (0 <= g.pi) & (g.pi <= 1)).all()
    shuffled = list(stamps)
    rnd.shuffle(shuffled)
    h = gr.new_grid(15, 15, 0.1)
    for ci, cj, er, el, eu, ed, seg, wall in shuffled:
        rect = gr.ErrorRect((ci, cj), er, el, eu, ed)
        (gr.stamp_wall if wall else gr.stamp_free)(h, rect, seg, 2.0)
    assert np.array_equal(g.n, h.n) and np.array_equal(g.pi, h.pi)
    assert g.clipped_stamps == h.clipped_stamps


def test_grid_worked_examples():
    assert gr.new_grid(1, 1)[0, 0] == gr.Cell(1.0, 0.0)
    big = gr.new_grid(100, 100)
    rng = np.random.default_rng(0)
    for i, j in rng.integers(0, 100, size=(50, 2)):
        assert big[int(i), int(j)] == gr.Cell(1.0, 0.0)
    assert gr.new_grid(100, 100, 0.1, origin=(-5.0, -5.0)).cell_of(-5.0, -5.0) == (0, 0)
    assert gr.pyramid_height(0.3, 0.6) == 0.5
    assert gr.cell_necessity(0, 0, 0.25, 0.25, 1.0) == 0.75
    assert gr.cell_necessity(0.25, 0, 0.5, 0.5, 1.0) == 0.25
    assert gr.classify(gr.Cell(1.0, 0.9), tau_occ=0.5) == gr.OCCUPIED
    assert gr.classify(gr.Cell(0.1, 0.8)) == gr.CONFLICT


def test_free_stamp_center_and_outside():
    g = gr.new_grid(9, 9, 0.1)
    gr.stamp_wall(g, gr.ErrorRect.symmetric((6, 4), 1, 1), "w", E)
    n_before = g.n.copy()
    gr.stamp_free(g, gr.ErrorRect.symmetric((4, 4), 3, 3), None, E)
    assert g[4, 4].pi == pytest.approx(0.3 / E)
    assert g[0, 0].pi == 1.0 and g[8, 4].pi == 1.0
    assert np.array_equal(g.n, n_before)


def _stamp_by_propagation(grid, rect, max_error):
    """Reference wall stamp: evaluate every visited cell one at a time."""
    out = {}

    def evaluate(i, j, x, err_x, y, err_y):
        if grid.contains(i, j) and err_x > 0 and err_y > 0:
            out[(i, j)] = gr.cell_necessity(x, y, err_x, err_y, max_error)

    gr.propagate_stamp(grid, rect, evaluate)
    return out


@settings(max_examples=150, deadline=None)
@given(st.integers(-3, 12), st.integers(-3, 12), st.integers(0, 6), st.integers(0, 6),
       st.integers(0, 6), st.integers(0, 6), st.sampled_from([0.05, 0.1, 0.25]), st.floats(0.2, 2.0))
def test_block_stamp_matches_propagation(ci, cj, er, el, eu, ed, res, max_error):
    rect = gr.ErrorRect((ci, cj), er, el, eu, ed)
    g = gr.new_grid(10, 10, res)
    gr.stamp_wall(g, rect, "s", max_error)
    ref = _stamp_by_propagation(gr.new_grid(10, 10, res), rect, max_error)
    if min(gr.pyramid_height((el + er) / 2 * res, max_error),
           gr.pyramid_height((eu + ed) / 2 * res, max_error)) <= 0:
        ref = {}
    expected = np.zeros((10, 10))
    for (i, j), v in ref.items():
        expected[j, i] = v
    # a lone contribution is stored through the complement product
    assert np.array_equal(g.n, np.where(expected > 0, 1.0 - (1.0 - expected), 0.0))
    h = gr.new_grid(10, 10, res)
    gr.stamp_free(h, rect, None, max_error)
    assert np.array_equal(h.pi, 1.0 - expected)
