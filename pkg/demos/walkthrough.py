"""Walk through one mission on the shipped world and print the fused map as text.

    python3 demos/walkthrough.py [seed]
"""

import sys
from collections import Counter

from posnec import fusion, grid as gr, robot as rb, troupe as tr
from posnec.cli import demo_world_path
from posnec.errormodel import default_params
from posnec.world import read_world

CHARS = {gr.UNKNOWN: " ", gr.FREE: ".", gr.OCCUPIED: "#", gr.CONFLICT: "!"}


def main(seed=1):
    world = read_world(demo_world_path())
    params = default_params()
    result = tr.run_mission(world, rb.make_troupe_behaviours()[:3], seed)

    for s in result.summaries:
        print(f"{s.robot_id} {s.label:14s} {s.outcome:5s} {s.distance:7.1f} m  {s.events} events")
    for t, a, b in result.meetings:
        print(f"  t={t:7.1f} s  {a} met {b}")
    print("event kinds:", dict(Counter(e.kind for e in result.events())))

    b = world.bounds
    grid = gr.grid_covering(b.xmin, b.ymin, b.xmax, b.ymax)
    # one robot at a time, as the host would receive them
    for rid in sorted(result.delivered_by):
        fusion.ingest(grid, result.delivered_by[rid], params)
        st = fusion.stats(grid)
        print(f"after {rid}: explored {st.explored_fraction:.3f}, strong walls {st.strong_wall_segments()}")

    labels = gr.classify_grid(grid)
    # every other cell, north at the top
    for j in range(grid.height - 1, -1, -2):
        print("".join(CHARS[labels[j, i]] for i in range(0, grid.width, 2)))


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 1)
