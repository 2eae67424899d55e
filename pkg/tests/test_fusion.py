import numpy as np
import pytest

from posnec import fusion
from posnec import grid as gr
from posnec import robot as rb
from posnec import troupe as tr
from posnec.errormodel import default_params

P = default_params()


def ev(rid, seq, kind, start, end, e0=(0.0, 0.0), e1=None, heading=0.0, **kw):
    return rb.LogEvent(rid, seq, kind, start, end, e0, e1 or e0, heading, **kw)


def wall_run(rid, base, y=1.0, err=(0.05, 0.05), length=1.0):
    """WALL_START, one WALL_SEG, WALL_END along y with the wall on the right."""
    x0 = 0.5
    a, b = (x0, y + 0.08), (x0 + length, y + 0.08)
    extra = dict(side="right", standoff=0.08)
    return [
        ev(rid, base, rb.WALL_START, a, a, err, **extra),
        ev(rid, base + 1, rb.WALL_SEG, a, b, err, **extra),
        ev(rid, base + 2, rb.WALL_END, b, b, err, **extra),
    ]


def test_free_segment_makes_corridor():
    g = gr.new_grid(30, 20, 0.1)
    seg = ev("r", 0, rb.SEG_FREE, (1.0, 1.05), (2.0, 1.05), (0.0, 0.0), (0.0125, 0.05))
    fusion.ingest(g, [seg], P)
    row = g.pi[10]
    assert (row[10:20] < 1).all()
    assert g.n.sum() == 0
    # far from the path nothing changes
    assert (g.pi[:5] == 1).all() and (g.pi[16:] == 1).all()
    assert g.max_error == P.max_error


def test_two_robots_on_one_wall_reinforce():
    single = gr.new_grid(30, 20, 0.1)
    fusion.ingest(single, wall_run("a", 0), P)
    both = gr.new_grid(30, 20, 0.1)
    fusion.ingest(both, wall_run("a", 0) + wall_run("b", 0), P)
    j, i = np.unravel_index(np.argmax(single.n), single.n.shape)
    alpha = single.n[j, i]
    assert alpha > 0
    assert both.n[j, i] == pytest.approx(2 * alpha - alpha ** 2, abs=1e-15)


def test_one_robot_one_wall_does_not_reinforce_itself():
    once = gr.new_grid(30, 20, 0.1)
    fusion.ingest(once, wall_run("a", 0), P)
    # the same run logged in two WALL_SEG pieces counts once per cell
    a, b, c = wall_run("a", 0)
    mid = (1.0, a.start[1])
    split = [a, ev("a", 1, rb.WALL_SEG, a.start, mid, a.err_start, side="right", standoff=0.08),
             ev("a", 2, rb.WALL_SEG, mid, b.end, a.err_start, side="right", standoff=0.08),
             ev("a", 3, rb.WALL_END, b.end, b.end, a.err_start, side="right", standoff=0.08)]
    twice = gr.new_grid(30, 20, 0.1)
    fusion.ingest(twice, split, P)
    assert np.array_equal(once.n, twice.n)


def test_wall_stamped_on_the_face_not_the_path():
    g = gr.new_grid(30, 20, 0.1)
    fusion.ingest(g, wall_run("a", 0, y=1.0, err=(0.0, 0.0)), P)
    rows = np.nonzero(g.n.any(axis=1))[0]
    assert list(rows) == [10]


def test_ingest_twice_is_identity():
    g = gr.new_grid(30, 20, 0.1)
    events = wall_run("a", 0) + [ev("a", 3, rb.SEG_FREE, (1.5, 1.08), (2.5, 1.08), (0.05, 0.05))]
    fusion.ingest(g, events, P)
    pi, n, clipped = g.pi.copy(), g.n.copy(), g.clipped_stamps
    fusion.ingest(g, events, P)
    assert np.array_equal(g.pi, pi) and np.array_equal(g.n, n) and g.clipped_stamps == clipped


def test_incremental_equals_union(demo_world):
    cfg = tr.MissionConfig(robot=rb.RobotConfig(budget=120))
    m1 = tr.run_mission(demo_world, rb.make_troupe_behaviours()[:2], 3, cfg).delivered_logs
    m2 = tr.run_mission(demo_world, rb.make_troupe_behaviours()[2:4], 4, cfg).delivered_logs
    b = demo_world.bounds
    step = gr.grid_covering(b.xmin, b.ymin, b.xmax, b.ymax)
    fusion.ingest(step, m1, P)
    fusion.incremental_update(step, m2, P)
    union = gr.grid_covering(b.xmin, b.ymin, b.xmax, b.ymax)
    fusion.ingest(union, {**m1, **m2}, P)
    assert np.array_equal(step.pi, union.pi) and np.array_equal(step.n, union.n)
    before = step.pi.copy(), step.n.copy()
    fusion.incremental_update(step, [], P)
    assert np.array_equal(step.pi, before[0]) and np.array_equal(step.n, before[1])


@pytest.mark.parametrize("events, msg", [
    ([ev("r", 0, rb.WALL_SEG, (0, 0), (1, 0), side="left", standoff=0.08)], "outside"),
    ([ev("r", 0, rb.WALL_END, (0, 0), (0, 0), side="left", standoff=0.08)], "without"),
    ([ev("r", 0, rb.WALL_START, (0, 0), (0, 0), side="left", standoff=0.08),
      ev("r", 1, rb.WALL_START, (0, 0), (0, 0), side="left", standoff=0.08)], "inside"),
])
def test_bad_nesting_rejected(events, msg):
    with pytest.raises(fusion.FusionError, match=msg):
        fusion.ingest(gr.new_grid(10, 10), events, P)


def test_render_virgin_is_white_and_parses_back():
    g = gr.new_grid(7, 4)
    data = fusion.render(g)
    assert data.startswith(b"P5\n7 4\n255\n")
    pixels = fusion.parse_pgm(data)
    assert pixels.shape == (4, 7) and (pixels == 255).all()


def test_render_palette_order():
    g = gr.new_grid(5, 1)
    g.n[0, 0] = 1.0                       # strongest wall
    g.n[0, 1] = gr.TAU_OCC                # weakest wall
    g.pi[0, 2] = 0.0                      # surest free
    g.pi[0, 3] = gr.TAU_FREE              # least sure free
    g.n[0, 4], g.pi[0, 4] = 1.0, 0.0      # conflict
    v = fusion.display_values(g)[0]
    assert v[0] == min(v[:2]) and v[0] < v[1]
    assert v[2] < v[3]
    assert v[4] == fusion.CONFLICT_VALUE
    # trajectories darker than walls, walls darker than the unknown background
    assert max(v[2:4]) < min(v[:2]) < 255


def test_render_north_up():
    g = gr.new_grid(1, 2)
    g.n[1, 0] = 1.0  # north cell
    pixels = fusion.parse_pgm(fusion.render(g))
    assert pixels[0, 0] < 255 and pixels[1, 0] == 255


def test_render_depends_on_dump_only():
    g = gr.new_grid(10, 10, 0.1)
    fusion.ingest(g, wall_run("a", 0, y=0.5, err=(0.02, 0.02)), P)
    again = gr.loads_grid(gr.dumps_grid(g))
    assert fusion.render(again) == fusion.render(g)


def test_stats_virgin():
    s = fusion.stats(gr.new_grid(5, 5))
    assert (s.explored_fraction, s.occupied_cells, s.conflict_cells, s.mean_n_over_wall_cells,
            s.clipped_stamp_count) == (0.0, 0, 0, 0.0, 0)
    assert fusion.parse_stats(s.to_text())["wall_segments"] == 0


def test_stats_after_one_free_metre():
    g = gr.new_grid(40, 40, 0.1)
    seg = ev("r", 0, rb.SEG_FREE, (1.0, 2.05), (2.0, 2.05), (0.0, 0.0), (0.0125, 0.05))
    fusion.ingest(g, [seg], P)
    boxes = set()
    for x, y, err in fusion._samples(seg, g.resolution / 2):
        hx, hy = fusion.world_half_extents(err)
        boxes |= set(gr.rect_at(g, x, y, hx, hy).cells())
    s = fusion.stats(g)
    assert 0 < s.explored_fraction <= len(boxes) / (40 * 40)


def test_stats_reports_each_followed_wall():
    g = gr.new_grid(30, 30, 0.1)
    fusion.ingest(g, wall_run("a", 0, y=1.0) + wall_run("a", 3, y=2.0), P)
    s = fusion.stats(g)
    assert [seg.segment_id for seg in s.wall_segments] == [("a", 0), ("a", 3)]
    assert all(seg.cells > 0 and seg.mean_n > 0 for seg in s.wall_segments)
    text = s.to_text()
    assert "segment a 0 " in text
    assert fusion.parse_stats(text)["wall_segments"] == 2


def test_grid_for_events_covers_all_points():
    evs = wall_run("a", 0)
    g = fusion.grid_for_events(evs, resolution=0.1)
    for e in evs:
        assert g.contains(*g.cell_of(*e.start)) and g.contains(*g.cell_of(*e.end))
    assert fusion.grid_for_events([]).width == 1
